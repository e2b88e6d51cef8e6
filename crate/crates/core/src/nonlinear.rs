//! Time stepping for the forced nonlinear problem
//! u_t + u_xxx - u_xxxxx + u u_x = g,  u(0,t) = phi(t),
//! with the linear part advanced implicitly by the theta scheme and the
//! transport term by two-step Adams-Bashforth. Runs can march the original
//! u variables (boundary forcing through ghost elimination) or the lifted
//! y variables; the two routes must agree and that agreement is a test.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forcing::{
    coefficient_fields, transform_u_to_y, transform_y_to_u, u_boundary_data, y_boundary_data,
    CoefficientFields, ForcingSignal, LiftingMap,
};
use crate::mesh::Field;
use crate::operator::{DampingParam, DiscreteOperator};
use crate::semigroup::{LinearStepper, StepperConfig, Trajectory, TrajectoryMeta};

/// Which variables the stepper marches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// March u itself; phi(t) enters through the boundary elimination.
    DirectU,
    /// March y = u + A(x) phi(t) and transform back for output.
    LiftedY,
}

impl Formulation {
    fn tag(self) -> &'static str {
        match self {
            Formulation::DirectU => "direct-u",
            Formulation::LiftedY => "lifted-y",
        }
    }
}

/// Discretization of the transport term u u_x.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearForm {
    /// (1/3) u D1 u + (2/3) D1(u^2/2); the default, kills the discrete
    /// energy contribution of the interior transport term.
    Skew,
    Advective,
    Conservative,
}

/// Space-time source g(x, t) injected into the right-hand side.
pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct NonlinearRunConfig {
    pub alpha: DampingParam,
    pub forcing: ForcingSignal,
    pub stepper: StepperConfig,
    pub formulation: Formulation,
    pub form: NonlinearForm,
    pub source: Option<SourceFn>,
}

impl NonlinearRunConfig {
    pub fn new(alpha: DampingParam, forcing: ForcingSignal, stepper: StepperConfig) -> Self {
        NonlinearRunConfig {
            alpha,
            forcing,
            stepper,
            formulation: Formulation::DirectU,
            form: NonlinearForm::Skew,
            source: None,
        }
    }
}

impl fmt::Debug for NonlinearRunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearRunConfig")
            .field("alpha", &self.alpha)
            .field("forcing", &self.forcing.descriptor())
            .field("stepper", &self.stepper)
            .field("formulation", &self.formulation)
            .field("form", &self.form)
            .field("source", &self.source.is_some())
            .finish()
    }
}

/// Centered first difference with boundary values d0 at x=0 and d1 at x=1.
pub fn centered_gradient(u: &Field, d0: f64, d1: f64) -> Field {
    let n = u.len();
    let inv2h = 1.0 / (2.0 * u.grid.h);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let left = if i == 0 { d0 } else { u.values[i - 1] };
        let right = if i + 1 == n { d1 } else { u.values[i + 1] };
        out[i] = (right - left) * inv2h;
    }
    Field { grid: u.grid.clone(), values: out }
}

/// Discrete u u_x with the requested form; d0, d1 are the boundary values
/// of u feeding the one-off ghost nodes.
pub fn nonlinear_term(u: &Field, d0: f64, d1: f64, form: NonlinearForm) -> Field {
    match form {
        NonlinearForm::Advective => {
            let mut g = centered_gradient(u, d0, d1);
            for (gi, ui) in g.values.iter_mut().zip(&u.values) {
                *gi *= ui;
            }
            g
        }
        NonlinearForm::Conservative => {
            let half_sq =
                Field { grid: u.grid.clone(), values: u.values.iter().map(|v| 0.5 * v * v).collect() };
            centered_gradient(&half_sq, 0.5 * d0 * d0, 0.5 * d1 * d1)
        }
        NonlinearForm::Skew => {
            let mut adv = nonlinear_term(u, d0, d1, NonlinearForm::Advective);
            let cons = nonlinear_term(u, d0, d1, NonlinearForm::Conservative);
            adv.scale(1.0 / 3.0);
            adv.axpy(2.0 / 3.0, &cons);
            adv
        }
    }
}

/// IMEX stepper with per-run state: cached implicit factorization, the
/// previous explicit term for Adams-Bashforth, and a norm guard.
pub struct NonlinearStepper<'a> {
    op: &'a DiscreteOperator,
    cfg: NonlinearRunConfig,
    linear: LinearStepper<'a>,
    coeffs: Option<CoefficientFields>,
    map: LiftingMap,
    prev_explicit: Option<Field>,
    t: f64,
    guard_limit: f64,
}

impl<'a> NonlinearStepper<'a> {
    /// `state0` is the field the stepper will march (u for direct runs,
    /// y for lifted ones); it seeds the blow-up guard scale.
    pub fn new(
        op: &'a DiscreteOperator,
        cfg: &NonlinearRunConfig,
        t0: f64,
        state0: &Field,
    ) -> Result<Self> {
        cfg.forcing.validate()?;
        if op.alpha.alpha() != cfg.alpha.alpha() {
            return Err(Error::InvalidParam { name: "alpha (operator/config mismatch)", value: cfg.alpha.alpha() });
        }
        let linear = LinearStepper::new(op, cfg.stepper)?;
        let map = LiftingMap::new(cfg.alpha);
        let coeffs = match cfg.formulation {
            Formulation::DirectU => None,
            Formulation::LiftedY => Some(coefficient_fields(map, cfg.forcing.clone())),
        };
        let scale = state0.l2_norm().max(cfg.forcing.c1_norm());
        Ok(NonlinearStepper {
            op,
            cfg: cfg.clone(),
            linear,
            coeffs,
            map,
            prev_explicit: None,
            t: t0,
            guard_limit: 1e3 * scale,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Explicitly treated terms at time t: minus the transport term, plus
    /// the lifted drift -a v_x - b v when marching the lifted variable.
    fn explicit_term(&self, v: &Field, t: f64) -> Field {
        match self.cfg.formulation {
            Formulation::DirectU => {
                let phi = self.cfg.forcing.eval(t).phi;
                let mut e = nonlinear_term(v, phi, 0.0, self.cfg.form);
                e.scale(-1.0);
                e
            }
            Formulation::LiftedY => {
                let coeffs = self.coeffs.as_ref().unwrap();
                let mut e = nonlinear_term(v, 0.0, 0.0, self.cfg.form);
                e.scale(-1.0);
                let grad = centered_gradient(v, 0.0, 0.0);
                for (i, (&x, ev)) in v.grid.nodes.iter().zip(e.values.iter_mut()).enumerate() {
                    *ev -= coeffs.a(x, t) * grad.values[i] + coeffs.b(x, t) * v.values[i];
                }
                e
            }
        }
    }

    /// Theta-weighted terms at time t: boundary-data injection, the lifted
    /// forcing field f, and any manufactured source.
    fn weighted_term(&self, t: f64, template: &Field) -> Field {
        let mut s = Field::zeros(&template.grid);
        let phi = self.cfg.forcing.eval(t).phi;
        match self.cfg.formulation {
            Formulation::DirectU => {
                self.op.add_data_injection(&mut s.values, &u_boundary_data(phi), 1.0);
            }
            Formulation::LiftedY => {
                self.op.add_data_injection(&mut s.values, &y_boundary_data(&self.map, phi), 1.0);
                let coeffs = self.coeffs.as_ref().unwrap();
                for (sv, &x) in s.values.iter_mut().zip(&template.grid.nodes) {
                    *sv += coeffs.f(x, t);
                }
            }
        }
        if let Some(src) = &self.cfg.source {
            for (sv, &x) in s.values.iter_mut().zip(&template.grid.nodes) {
                *sv += src(x, t);
            }
        }
        s
    }

    /// One IMEX step of the marched variable. Advances the internal clock.
    pub fn step(&mut self, v: &Field) -> Result<Field> {
        let dt = self.cfg.stepper.dt;
        let t_next = self.t + dt;
        let e_now = self.explicit_term(v, self.t);
        // Adams-Bashforth on the explicit part, explicit Euler to bootstrap.
        let mut ab = e_now.clone();
        if let Some(prev) = &self.prev_explicit {
            ab.scale(1.5);
            ab.axpy(-0.5, prev);
        }
        let mut r_now = self.weighted_term(self.t, v);
        let mut r_next = self.weighted_term(t_next, v);
        r_now.axpy(1.0, &ab);
        r_next.axpy(1.0, &ab);
        let next = self.linear.step_with_rhs(v, &r_now, &r_next)?;
        let norm = next.l2_norm();
        if self.guard_limit > 0.0 && norm > self.guard_limit {
            return Err(Error::BlowUp { t: t_next, norm, limit: self.guard_limit });
        }
        self.prev_explicit = Some(e_now);
        self.t = t_next;
        Ok(next)
    }
}

/// Single IMEX step without run state. `history` is the previous explicit
/// term; pass None on the first step to bootstrap with explicit Euler.
pub fn step_nonlinear(
    u: &Field,
    t: f64,
    cfg: &NonlinearRunConfig,
    op: &DiscreteOperator,
    history: Option<&Field>,
) -> Result<Field> {
    let mut stepper = NonlinearStepper::new(op, cfg, t, u)?;
    stepper.prev_explicit = history.cloned();
    stepper.step(u)
}

/// March the forced nonlinear problem over t_span, recording every
/// stride-th state. Output snapshots are always u variables; lifted runs
/// transform back at recording times.
pub fn evolve_nonlinear(
    u0: &Field,
    cfg: &NonlinearRunConfig,
    t_span: (f64, f64),
    stride: usize,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t1 > t0 && t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidParam { name: "t_span", value: t1 - t0 });
    }
    if stride == 0 {
        return Err(Error::InvalidParam { name: "stride", value: 0.0 });
    }
    let op = crate::operator::assemble(&u0.grid, cfg.alpha, false)?;
    let dt = cfg.stepper.dt;
    let steps = (((t1 - t0) / dt).round() as usize).max(1);

    let map = LiftingMap::new(cfg.alpha);
    let mut state = match cfg.formulation {
        Formulation::DirectU => u0.clone(),
        Formulation::LiftedY => transform_u_to_y(u0, &map, cfg.forcing.eval(t0).phi),
    };
    let mut stepper = NonlinearStepper::new(&op, cfg, t0, &state)?;

    let record = |s: &Field, t: f64| match cfg.formulation {
        Formulation::DirectU => s.clone(),
        Formulation::LiftedY => transform_y_to_u(s, &map, cfg.forcing.eval(t).phi),
    };
    let mut snapshots = Vec::with_capacity(steps / stride + 2);
    snapshots.push(record(&state, t0));
    for i in 1..=steps {
        state = stepper.step(&state)?;
        if i % stride == 0 {
            snapshots.push(record(&state, stepper.time()));
        }
    }
    let meta = TrajectoryMeta {
        alpha: cfg.alpha.alpha(),
        forcing: Some(cfg.forcing.descriptor()),
        scheme: format!(
            "imex(theta={}, ab2, {}, {})",
            cfg.stepper.theta,
            cfg.form_tag(),
            cfg.formulation.tag()
        ),
        grid_n: u0.grid.n,
    };
    Trajectory::new(t0, dt * stride as f64, snapshots, meta)
}

impl NonlinearRunConfig {
    fn form_tag(&self) -> &'static str {
        match self.form {
            NonlinearForm::Skew => "skew",
            NonlinearForm::Advective => "advective",
            NonlinearForm::Conservative => "conservative",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, sobolev_norm};
    use crate::operator::assemble;
    use crate::semigroup::step_linear;
    use approx::assert_relative_eq;

    fn quintic_p(x: f64) -> f64 {
        x * x * (1.0 - x).powi(3)
    }

    fn config(alpha: f64, forcing: ForcingSignal, dt: f64) -> NonlinearRunConfig {
        NonlinearRunConfig::new(
            DampingParam::new(alpha).unwrap(),
            forcing,
            StepperConfig::new(dt, 0.5).unwrap(),
        )
    }

    #[test]
    fn zero_state_zero_forcing_stays_zero() {
        let g = build_grid(32).unwrap();
        let zero = Field::zeros(&g);
        let cfg = config(0.5, ForcingSignal::Zero, 1e-3);
        let op = assemble(&g, cfg.alpha, false).unwrap();
        let stepped = step_nonlinear(&zero, 0.0, &cfg, &op, None).unwrap();
        assert!(stepped.values.iter().all(|&v| v == 0.0));

        let traj = evolve_nonlinear(&zero, &cfg, (0.0, 0.01), 2).unwrap();
        assert!(traj.snapshots.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn small_initial_data_step_is_quadratically_close_to_linear() {
        let g = build_grid(64).unwrap();
        let cfg = config(0.0, ForcingSignal::Zero, 1e-3);
        let op = assemble(&g, cfg.alpha, false).unwrap();
        let mut diffs = Vec::new();
        for delta in [1e-3, 5e-4] {
            let u0 = Field::from_fn(&g, |x| delta * quintic_p(x));
            let nl = step_nonlinear(&u0, 0.0, &cfg, &op, None).unwrap();
            let mut lin = step_linear(&u0, &op, cfg.stepper).unwrap();
            lin.axpy(-1.0, &nl);
            let diff = lin.l2_norm();
            let n0 = u0.l2_norm();
            assert!(
                diff <= 30.0 * cfg.stepper.dt * n0 * n0,
                "delta {delta}: diff {diff:.3e} vs budget {:.3e}",
                30.0 * cfg.stepper.dt * n0 * n0
            );
            diffs.push(diff);
        }
        // halving the data should quarter the defect
        let ratio = diffs[0] / diffs[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn transport_term_matches_analytic_sine() {
        let g = build_grid(128).unwrap();
        let u = Field::from_fn(&g, |x| (std::f64::consts::PI * x).sin());
        for form in [NonlinearForm::Skew, NonlinearForm::Advective, NonlinearForm::Conservative] {
            let nu = nonlinear_term(&u, 0.0, 0.0, form);
            let worst = g
                .nodes
                .iter()
                .zip(&nu.values)
                .map(|(&x, &v)| {
                    let exact = std::f64::consts::PI / 2.0 * (2.0 * std::f64::consts::PI * x).sin();
                    (v - exact).abs()
                })
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-3, "{form:?}: worst {worst:.3e}");
        }
    }

    #[test]
    fn skew_form_is_the_one_third_two_thirds_average() {
        let g = build_grid(48).unwrap();
        let u = Field::from_fn(&g, |x| (3.0 * x).sin() + 0.3 * x);
        let adv = nonlinear_term(&u, 0.2, -0.1, NonlinearForm::Advective);
        let cons = nonlinear_term(&u, 0.2, -0.1, NonlinearForm::Conservative);
        let skew = nonlinear_term(&u, 0.2, -0.1, NonlinearForm::Skew);
        for i in 0..u.len() {
            assert_relative_eq!(
                skew.values[i],
                adv.values[i] / 3.0 + 2.0 * cons.values[i] / 3.0,
                max_relative = 1e-12,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn free_step_bootstrap_matches_stepper_first_step() {
        let g = build_grid(48).unwrap();
        let u0 = Field::from_fn(&g, |x| 0.01 * quintic_p(x));
        let cfg = config(0.3, ForcingSignal::periodic_sin(0.01, 1.0), 5e-4);
        let op = assemble(&g, cfg.alpha, false).unwrap();
        let free = step_nonlinear(&u0, 0.0, &cfg, &op, None).unwrap();
        let mut stepper = NonlinearStepper::new(&op, &cfg, 0.0, &u0).unwrap();
        let staged = stepper.step(&u0).unwrap();
        assert_eq!(free.values, staged.values);
    }

    #[test]
    fn forced_response_is_bounded_and_linear_in_amplitude() {
        let g = build_grid(64).unwrap();
        let mut ratios = Vec::new();
        for eps in [0.01, 0.005] {
            let cfg = config(0.5, ForcingSignal::periodic_sin(eps, 1.0), 5e-4);
            let traj = evolve_nonlinear(&Field::zeros(&g), &cfg, (0.0, 5.0), 100).unwrap();
            let sup = traj
                .snapshots
                .iter()
                .map(|s| sobolev_norm(s, 2).unwrap())
                .fold(0.0f64, f64::max);
            assert!(sup.is_finite() && sup > 0.0);
            ratios.push(sup / eps);
        }
        let spread = ratios[0] / ratios[1];
        assert!(
            (0.5..2.0).contains(&spread),
            "sup/eps ratios {ratios:?} spread {spread}"
        );
    }

    #[test]
    fn lifted_and_direct_formulations_agree() {
        let g = build_grid(64).unwrap();
        let eps = 0.01;
        let make = |dt: f64, formulation: Formulation| {
            let mut cfg = config(0.5, ForcingSignal::periodic_sin(eps, 1.0), dt);
            cfg.formulation = formulation;
            evolve_nonlinear(&Field::zeros(&g), &cfg, (0.0, 1.0), (0.05 / dt) as usize).unwrap()
        };
        let direct = make(2e-4, Formulation::DirectU);
        let lifted = make(2e-4, Formulation::LiftedY);
        let fine = make(1e-4, Formulation::DirectU);
        let sup_diff = |a: &Trajectory, b: &Trajectory| {
            a.snapshots
                .iter()
                .zip(&b.snapshots)
                .map(|(x, y)| {
                    let mut d = x.clone();
                    d.axpy(-1.0, y);
                    sobolev_norm(&d, 2).unwrap()
                })
                .fold(0.0f64, f64::max)
        };
        let scheme_err = sup_diff(&direct, &fine).max(1e-14);
        let gap = sup_diff(&direct, &lifted);
        assert!(
            gap <= 10.0 * scheme_err,
            "formulation gap {gap:.3e} vs scheme error {scheme_err:.3e}"
        );
    }

    #[test]
    fn unforced_solution_decays_at_the_linear_rate() {
        let g = build_grid(64).unwrap();
        let alpha = 0.5;
        // theta = 1: the trapezoidal rule leaves ~2e-6 of a smooth state in
        // near-undamped stiff modes, which would mask the decay threshold.
        let mut cfg = config(alpha, ForcingSignal::Zero, 1e-5);
        cfg.stepper = StepperConfig::implicit_euler(1e-5).unwrap();
        let op = assemble(&g, cfg.alpha, false).unwrap();
        let omega = -op.spectral_abscissa().unwrap();
        assert!(omega > 0.0);
        let u0 = Field::from_fn(&g, |x| 1e-3 * (quintic_p(x) + alpha * x.powi(3) * (1.0 - x).powi(2)));
        let horizon = 1.2 * 20.0 / omega;
        let steps = (horizon / cfg.stepper.dt).round() as usize;
        let traj = evolve_nonlinear(&u0, &cfg, (0.0, horizon), steps).unwrap();
        let n0 = u0.l2_norm();
        let nf = traj.snapshots.last().unwrap().l2_norm();
        assert!(
            nf < 1e-8 * n0,
            "final norm {nf:.3e} vs 1e-8 * {n0:.3e} (omega {omega:.1})"
        );
    }

    #[test]
    fn blow_up_guard_trips_on_misconfigured_source() {
        let g = build_grid(32).unwrap();
        let u0 = Field::from_fn(&g, |x| 1e-6 * quintic_p(x));
        let mut cfg = config(0.0, ForcingSignal::Zero, 1e-3);
        cfg.source = Some(Arc::new(|_x, _t| 1e3));
        let err = evolve_nonlinear(&u0, &cfg, (0.0, 1.0), 1).unwrap_err();
        match err {
            Error::BlowUp { norm, limit, .. } => assert!(norm > limit),
            other => panic!("expected blow-up, got {other}"),
        }
    }

    #[test]
    fn trajectory_records_forcing_and_scheme_metadata() {
        let g = build_grid(32).unwrap();
        let mut cfg = config(0.5, ForcingSignal::periodic_sin(0.01, 1.0), 1e-3);
        cfg.formulation = Formulation::LiftedY;
        let traj = evolve_nonlinear(&Field::zeros(&g), &cfg, (0.0, 0.01), 5).unwrap();
        let forcing = traj.meta.forcing.as_deref().unwrap();
        assert!(forcing.contains("periodic"), "forcing meta {forcing}");
        assert!(traj.meta.scheme.contains("lifted-y"), "scheme meta {}", traj.meta.scheme);
        assert_eq!(traj.meta.grid_n, 32);
        assert_relative_eq!(traj.dt, 5e-3);
    }

    #[test]
    fn rejects_decreasing_time_span_and_zero_stride() {
        let g = build_grid(32).unwrap();
        let cfg = config(0.0, ForcingSignal::Zero, 1e-3);
        let zero = Field::zeros(&g);
        assert!(evolve_nonlinear(&zero, &cfg, (1.0, 0.5), 1).is_err());
        assert!(evolve_nonlinear(&zero, &cfg, (0.0, 1.0), 0).is_err());
    }
}
