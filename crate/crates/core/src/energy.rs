//! Energy bookkeeping for homogeneous linear runs: the boundary dissipation
//! identity, the hidden-regularity and weak-observability trace inequalities,
//! the L2-to-H2 space-time bound, and the constant chain that turns an
//! observability estimate into a geometric decay rate.
//!
//! Trace integrals go through the operator's own dissipation channel at
//! consecutive-snapshot midpoints: under the trapezoidal stepper the sum of
//! -2 dt (A m, m) telescopes to ||u(0)||^2 - ||u(T)||^2 exactly, so the
//! quadrature carries no trace-extraction defect and no stiff-mode noise.
//! The rate check deliberately uses the geometric one-sided traces instead;
//! its residual measures the real extraction-versus-operator gap and shrinks
//! under joint grid and step refinement.

use crate::error::{Error, Result};
use crate::mesh::{boundary_traces, l2_inner, sobolev_norm, Field};
use crate::operator::{assemble, DampingParam, DiscreteOperator};
use crate::semigroup::Trajectory;

/// Relative slack tolerance for the inequality reports. Covers summation
/// roundoff accumulated over runs of order 1e5 snapshots; measured drift
/// stays one to two orders below this.
pub const SLACK_TOL_REL: f64 = 1e-10;

/// L2 energy, (1/2) h sum u_i^2.
pub fn energy(u: &Field) -> f64 {
    0.5 * u.grid.h * u.values.iter().map(|v| v * v).sum::<f64>()
}

/// Outcome of one integral inequality on one run: lhs <= rhs_bulk + rhs_trace
/// over the window [0, t_window]. `satisfied` means the slack is no worse
/// than -tol; strictly positive slack means the bound held with room.
#[derive(Debug, Clone, Copy)]
pub struct ObservabilityReport {
    pub t_window: f64,
    pub lhs: f64,
    pub rhs_bulk: f64,
    pub rhs_trace: f64,
    pub slack: f64,
    pub tol: f64,
    pub satisfied: bool,
}

impl ObservabilityReport {
    pub fn rhs(&self) -> f64 {
        self.rhs_bulk + self.rhs_trace
    }

    fn build(t_window: f64, lhs: f64, rhs_bulk: f64, rhs_trace: f64, scale: f64) -> Self {
        let slack = rhs_bulk + rhs_trace - lhs;
        let tol = SLACK_TOL_REL * scale;
        ObservabilityReport { t_window, lhs, rhs_bulk, rhs_trace, slack, tol, satisfied: slack >= -tol }
    }
}

fn require_homogeneous(traj: &Trajectory, alpha: DampingParam) -> Result<()> {
    if traj.meta.forcing.is_some() {
        return Err(Error::InsufficientData {
            what: "energy identities need a homogeneous run, this one records boundary forcing"
                .into(),
        });
    }
    if (traj.meta.alpha - alpha.alpha()).abs() > 1e-12 {
        return Err(Error::InvalidParam {
            name: "alpha (trajectory metadata mismatch)",
            value: alpha.alpha(),
        });
    }
    Ok(())
}

/// Snapshot index closing the window [0, t_window]; t_window must sit on
/// the snapshot lattice and inside the run.
fn window_end(traj: &Trajectory, t_window: f64) -> Result<usize> {
    if !(t_window > 0.0 && t_window.is_finite()) {
        return Err(Error::InvalidParam { name: "t_window", value: t_window });
    }
    let j = (t_window / traj.dt).round() as usize;
    if j == 0 || (j as f64 * traj.dt - t_window).abs() > 1e-6 * t_window {
        return Err(Error::InvalidParam {
            name: "t_window (must be a multiple of the snapshot spacing)",
            value: t_window,
        });
    }
    if j >= traj.len() {
        return Err(Error::InsufficientData {
            what: format!(
                "window [0, {t_window}] needs {} snapshots, run has {}",
                j + 1,
                traj.len()
            ),
        });
    }
    Ok(j)
}

/// Integral of (1 - alpha^2) u_xx(0)^2 dt over the first j_end snapshot
/// intervals, measured as -2 (A m, m) at interval midpoints m.
fn dissipation_integral(traj: &Trajectory, op: &DiscreteOperator, j_end: usize) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..j_end {
        let mut m = traj.snapshots[j].clone();
        m.axpy(1.0, &traj.snapshots[j + 1]);
        m.scale(0.5);
        let am = op.apply(&m);
        acc += traj.dt * (-2.0) * l2_inner(&am, &m)?;
    }
    Ok(acc)
}

/// Trapezoid rule for integral of f(u(t)) dt over the first j_end intervals.
fn trapezoid(traj: &Trajectory, j_end: usize, f: impl Fn(&Field) -> Result<f64>) -> Result<f64> {
    let mut acc = 0.0;
    for j in 0..=j_end {
        let w = if j == 0 || j == j_end { 0.5 } else { 1.0 };
        acc += w * traj.dt * f(&traj.snapshots[j])?;
    }
    Ok(acc)
}

/// Largest pointwise residual of the dissipation identity
/// d/dt E(t) = (1/2)(alpha^2 - 1) u_xx(0, t)^2 along the run, with dE/dt by
/// centered differencing of the energy series and the trace squared averaged
/// over the two snapshot intervals the difference spans. Needs at least
/// three snapshots.
pub fn energy_rate_check(traj: &Trajectory, alpha: DampingParam) -> Result<f64> {
    require_homogeneous(traj, alpha)?;
    if traj.len() < 3 {
        return Err(Error::InsufficientData {
            what: format!("rate check needs 3 snapshots for centered differencing, run has {}", traj.len()),
        });
    }
    let energies: Vec<f64> = traj.snapshots.iter().map(energy).collect();
    let trace_sq: Vec<f64> = (0..traj.len() - 1)
        .map(|j| {
            let mut m = traj.snapshots[j].clone();
            m.axpy(1.0, &traj.snapshots[j + 1]);
            m.scale(0.5);
            let t = boundary_traces(&m, 0.0, 0.0).uxx0;
            t * t
        })
        .collect();
    let a = alpha.alpha();
    let mut worst = 0.0_f64;
    for k in 1..traj.len() - 1 {
        let rate = (energies[k + 1] - energies[k - 1]) / (2.0 * traj.dt);
        let predicted = 0.25 * (a * a - 1.0) * (trace_sq[k - 1] + trace_sq[k]);
        worst = worst.max((rate - predicted).abs());
    }
    Ok(worst)
}

/// Hidden regularity over [0, t_window]: the dissipation-channel trace
/// integral (1 - alpha^2) int u_xx(0)^2 dt never exceeds ||u0||^2.
pub fn hidden_regularity_check(
    traj: &Trajectory,
    alpha: DampingParam,
    t_window: f64,
) -> Result<ObservabilityReport> {
    require_homogeneous(traj, alpha)?;
    let j_end = window_end(traj, t_window)?;
    let op = assemble(&traj.snapshots[0].grid, alpha, false)?;
    let lhs = dissipation_integral(traj, &op, j_end)?;
    let u0_sq = 2.0 * energy(&traj.snapshots[0]);
    Ok(ObservabilityReport::build(t_window, lhs, u0_sq, 0.0, u0_sq))
}

/// Space-time smoothing over [0, t_window]: the L2-in-time H2-in-space norm
/// of the run is controlled by sqrt((1/(1-alpha^2) + 4 t_window) / 3) times
/// ||u0||.
pub fn l2h2_bound_check(
    traj: &Trajectory,
    alpha: DampingParam,
    t_window: f64,
) -> Result<ObservabilityReport> {
    require_homogeneous(traj, alpha)?;
    let j_end = window_end(traj, t_window)?;
    let h2_sq = trapezoid(traj, j_end, |u| Ok(sobolev_norm(u, 2)?.powi(2)))?;
    let lhs = h2_sq.max(0.0).sqrt();
    let a = alpha.alpha();
    let coef = ((1.0 / (1.0 - a * a) + 4.0 * t_window) / 3.0).sqrt();
    let u0 = (2.0 * energy(&traj.snapshots[0])).sqrt();
    let rhs = coef * u0;
    Ok(ObservabilityReport::build(t_window, lhs, rhs, 0.0, rhs.max(lhs)))
}

/// Weak observability over [0, t_window]: the initial energy is recovered
/// from the bulk time average plus the dissipation-channel trace integral,
/// (1/2)||u0||^2 <= (1/(2 t_window)) int ||u||^2 dt
///                  + (1/2)(1 - alpha^2) int u_xx(0)^2 dt.
pub fn weak_observability_check(
    traj: &Trajectory,
    alpha: DampingParam,
    t_window: f64,
) -> Result<ObservabilityReport> {
    require_homogeneous(traj, alpha)?;
    let j_end = window_end(traj, t_window)?;
    let op = assemble(&traj.snapshots[0].grid, alpha, false)?;
    let bulk = trapezoid(traj, j_end, |u| Ok(2.0 * energy(u)))? / (2.0 * t_window);
    let trace = 0.5 * dissipation_integral(traj, &op, j_end)?;
    let lhs = energy(&traj.snapshots[0]);
    Ok(ObservabilityReport::build(t_window, lhs, bulk, trace, lhs.max(bulk)))
}

/// Constant chain from an observability estimate to a decay rate. With
/// E(0) <= C (E(0) - E(T)) one gets E(T) <= gamma E(0), gamma = C/(1+C) < 1,
/// and nu = ln(1 + 1/C) / T reproduces gamma^(t/T) = exp(-nu t).
#[derive(Debug, Clone, Copy)]
pub struct DecayConstants {
    /// Empirical bulk-to-trace constant: largest over the ensemble of
    /// (1/2) int ||u||^2 dt divided by the trace integral.
    pub c1: f64,
    /// Aggregate observability constant C = c1 / T + (1 - alpha^2) / 2,
    /// raised if needed so E(0) <= C (E(0) - E(T)) holds on every member.
    pub c_agg: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Members dropped because their trace integral vanished.
    pub excluded: usize,
    /// Whether E(j T) <= gamma^j E(0) held for every member at every
    /// whole window the run covers.
    pub geometric_ok: bool,
}

/// gamma and nu from an aggregate constant and a window length.
pub fn decay_chain(c_agg: f64, t_window: f64) -> Result<(f64, f64)> {
    if !(c_agg > 0.0) {
        return Err(Error::InvalidParam { name: "c_agg", value: c_agg });
    }
    if !(t_window > 0.0 && t_window.is_finite()) {
        return Err(Error::InvalidParam { name: "t_window", value: t_window });
    }
    let gamma = c_agg / (1.0 + c_agg);
    let nu = (1.0 / c_agg).ln_1p() / t_window;
    Ok((gamma, nu))
}

/// Measure the observability constants on an ensemble of homogeneous runs
/// sharing one damping parameter, then derive the decay chain and verify
/// geometric decay window by window. Every run must cover at least three
/// whole windows; runs whose trace integral vanishes are excluded (all of
/// them vanishing is an error).
pub fn decay_constants(
    ensemble: &[Trajectory],
    alpha: DampingParam,
    t_window: f64,
) -> Result<DecayConstants> {
    if ensemble.is_empty() {
        return Err(Error::InsufficientData { what: "decay constants need a nonempty ensemble".into() });
    }
    let a = alpha.alpha();
    let mut c1 = 0.0_f64;
    let mut enforce = 0.0_f64;
    let mut excluded = 0;
    let mut kept: Vec<(&Trajectory, usize, usize)> = Vec::new();
    for traj in ensemble {
        require_homogeneous(traj, alpha)?;
        let j_end = window_end(traj, t_window)?;
        let windows = (traj.len() - 1) / j_end;
        if windows < 3 {
            return Err(Error::InsufficientData {
                what: format!("run covers {windows} whole windows of length {t_window}, needs 3"),
            });
        }
        let op = assemble(&traj.snapshots[0].grid, alpha, false)?;
        let trace_q = dissipation_integral(traj, &op, j_end)?;
        let u0_sq = 2.0 * energy(&traj.snapshots[0]);
        if trace_q <= 1e-30 * u0_sq {
            excluded += 1;
            continue;
        }
        let bulk = trapezoid(traj, j_end, |u| Ok(2.0 * energy(u)))?;
        c1 = c1.max(0.5 * bulk / trace_q);
        enforce = enforce.max(0.5 * u0_sq / trace_q);
        kept.push((traj, j_end, windows));
    }
    if kept.is_empty() {
        return Err(Error::InsufficientData {
            what: "every ensemble member has a vanishing trace integral".into(),
        });
    }
    let c_agg = (c1 / t_window + 0.5 * (1.0 - a * a)).max(enforce);
    let (gamma, nu) = decay_chain(c_agg, t_window)?;
    let mut geometric_ok = true;
    for (traj, j_end, windows) in kept {
        let e0 = energy(&traj.snapshots[0]);
        for j in 1..=windows {
            if energy(&traj.snapshots[j * j_end]) > gamma.powi(j as i32) * e0 * (1.0 + 1e-12) {
                geometric_ok = false;
            }
        }
    }
    Ok(DecayConstants { c1, c_agg, gamma, nu, excluded, geometric_ok })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ensemble::smooth_ensemble;
    use crate::mesh::{build_grid, Grid};
    use crate::semigroup::{evolve_linear, StepperConfig, TrajectoryMeta};

    fn quintic_pair(grid: &Arc<Grid>, a: f64) -> Field {
        Field::from_fn(grid, |x| {
            x * x * (1.0 - x).powi(3) + a * x.powi(3) * (1.0 - x).powi(2)
        })
    }

    fn synthetic_meta(alpha: f64, n: usize) -> TrajectoryMeta {
        TrajectoryMeta { alpha, forcing: None, scheme: "synthetic".into(), grid_n: n }
    }

    fn cn_run(u0: &Field, alpha: DampingParam, dt: f64, t_final: f64, stride: usize) -> Trajectory {
        let op = assemble(&u0.grid, alpha, false).unwrap();
        let cfg = StepperConfig::trapezoidal(dt).unwrap();
        evolve_linear(u0, &op, cfg, t_final, stride).unwrap()
    }

    #[test]
    fn energy_matches_closed_forms_and_scales_quadratically() {
        let g = build_grid(199).unwrap();
        assert_eq!(energy(&Field::zeros(&g)), 0.0);
        // sum of sin^2(pi x_i) over the uniform interior lattice is exactly
        // (n + 1) / 2, so the energy of sin(pi x) is exactly 1/4.
        let s = Field::from_fn(&g, |x| (std::f64::consts::PI * x).sin());
        assert!((energy(&s) - 0.25).abs() < 1e-13);
        let mut s2 = s.clone();
        s2.scale(2.0);
        assert!((energy(&s2) - 4.0 * energy(&s)).abs() < 1e-13);
    }

    #[test]
    fn rate_check_flags_a_dissipation_free_run_exactly() {
        let g = build_grid(32).unwrap();
        let alpha = DampingParam::new(0.5).unwrap();
        let u = quintic_pair(&g, 0.5);
        let traj =
            Trajectory::new(0.0, 1e-3, vec![u.clone(); 5], synthetic_meta(0.5, 32)).unwrap();
        // A constant-in-time run has zero measured rate, so the residual is
        // exactly the predicted dissipation (1/2)(1 - alpha^2) u_xx(0)^2.
        let tr = boundary_traces(&u, 0.0, 0.0).uxx0;
        let expected = 0.5 * (1.0 - 0.25) * tr * tr;
        let resid = energy_rate_check(&traj, alpha).unwrap();
        assert!((resid - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn rate_check_needs_three_snapshots() {
        let g = build_grid(32).unwrap();
        let alpha = DampingParam::new(0.0).unwrap();
        let u = quintic_pair(&g, 0.0);
        let traj = Trajectory::new(0.0, 1e-3, vec![u; 2], synthetic_meta(0.0, 32)).unwrap();
        assert!(matches!(
            energy_rate_check(&traj, alpha),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn rate_check_residual_refines_at_first_order_or_better() {
        let alpha = DampingParam::new(0.99).unwrap();
        let mut resid = Vec::new();
        for (n, dt) in [(64, 2e-3), (128, 1e-3), (256, 5e-4)] {
            let g = build_grid(n).unwrap();
            let u0 = quintic_pair(&g, 0.99);
            let traj = cn_run(&u0, alpha, dt, 0.4, 1);
            resid.push(energy_rate_check(&traj, alpha).unwrap());
        }
        for k in 0..resid.len() - 1 {
            let order = (resid[k] / resid[k + 1]).log2();
            assert!(
                order >= 1.0,
                "refinement {k}: residuals {:.3e} -> {:.3e}, order {order:.2}",
                resid[k],
                resid[k + 1]
            );
        }
    }

    #[test]
    fn trace_inequalities_hold_with_positive_slack_on_random_data() {
        let g = build_grid(64).unwrap();
        let alpha = DampingParam::new(0.5).unwrap();
        for (i, u0) in smooth_ensemble(&g, alpha, 20, 40).iter().enumerate() {
            let traj = cn_run(u0, alpha, 2e-5, 0.5, 1);
            let hid = hidden_regularity_check(&traj, alpha, 0.5).unwrap();
            let smo = l2h2_bound_check(&traj, alpha, 0.5).unwrap();
            let obs = weak_observability_check(&traj, alpha, 0.5).unwrap();
            assert!(hid.satisfied && hid.slack > 0.0, "member {i}: hidden slack {}", hid.slack);
            assert!(smo.satisfied && smo.slack > 0.0, "member {i}: smoothing slack {}", smo.slack);
            assert!(obs.satisfied && obs.slack > 0.0, "member {i}: observability slack {}", obs.slack);
        }
    }

    #[test]
    fn inequality_reports_scale_with_the_data() {
        let g = build_grid(64).unwrap();
        let alpha = DampingParam::new(0.3).unwrap();
        let u0 = crate::ensemble::smooth_field(&g, alpha, 7);
        let traj = cn_run(&u0, alpha, 2e-5, 0.1, 1);
        let mut doubled = traj.clone();
        for s in doubled.snapshots.iter_mut() {
            s.scale(2.0);
        }
        let (h1, h2) = (
            hidden_regularity_check(&traj, alpha, 0.1).unwrap(),
            hidden_regularity_check(&doubled, alpha, 0.1).unwrap(),
        );
        assert!((h2.lhs / h1.lhs - 4.0).abs() < 1e-9);
        assert!((h2.rhs() / h1.rhs() - 4.0).abs() < 1e-12);
        let (s1, s2) = (
            l2h2_bound_check(&traj, alpha, 0.1).unwrap(),
            l2h2_bound_check(&doubled, alpha, 0.1).unwrap(),
        );
        assert!((s2.lhs / s1.lhs - 2.0).abs() < 1e-12);
        assert!((s2.rhs() / s1.rhs() - 2.0).abs() < 1e-12);
        let (o1, o2) = (
            weak_observability_check(&traj, alpha, 0.1).unwrap(),
            weak_observability_check(&doubled, alpha, 0.1).unwrap(),
        );
        assert!((o2.slack / o1.slack - 4.0).abs() < 1e-6);
        assert!(o2.satisfied);
    }

    #[test]
    fn zero_run_satisfies_everything_with_zero_slack() {
        let g = build_grid(32).unwrap();
        let alpha = DampingParam::new(0.5).unwrap();
        let z = Field::zeros(&g);
        let traj =
            Trajectory::new(0.0, 0.05, vec![z; 11], synthetic_meta(0.5, 32)).unwrap();
        let hid = hidden_regularity_check(&traj, alpha, 0.5).unwrap();
        assert!(hid.satisfied && hid.lhs == 0.0 && hid.slack == 0.0);
        assert!(l2h2_bound_check(&traj, alpha, 0.5).unwrap().satisfied);
        assert!(weak_observability_check(&traj, alpha, 0.5).unwrap().satisfied);
        assert_eq!(energy_rate_check(&traj, alpha).unwrap(), 0.0);
    }

    #[test]
    fn smoothing_bound_coefficient_is_sqrt_five_thirds_at_alpha_zero_unit_window() {
        let g = build_grid(32).unwrap();
        let alpha = DampingParam::new(0.0).unwrap();
        let u = quintic_pair(&g, 0.0);
        let traj =
            Trajectory::new(0.0, 0.25, vec![u.clone(); 5], synthetic_meta(0.0, 32)).unwrap();
        let rep = l2h2_bound_check(&traj, alpha, 1.0).unwrap();
        let expected = (5.0_f64 / 3.0).sqrt() * u.l2_norm();
        assert!((rep.rhs() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn decay_chain_reproduces_closed_form_values() {
        let (gamma, nu) = decay_chain(1.0, 1.0).unwrap();
        assert!((gamma - 0.5).abs() < 1e-15);
        assert!((nu - std::f64::consts::LN_2).abs() < 1e-15);
        // Huge constants push gamma to the rounding edge of 1 and nu to 0
        // from above; nu keeps full relative accuracy via ln_1p even after
        // gamma itself has rounded to 1.
        let (g_big, nu_big) = decay_chain(1e300, 1.0).unwrap();
        assert!(g_big <= 1.0 && 1.0 - g_big <= 1e-12);
        assert!(nu_big > 0.0 && nu_big <= 1e-12);
        assert!(decay_chain(0.0, 1.0).is_err());
        assert!(decay_chain(1.0, 0.0).is_err());
    }

    #[test]
    fn decay_constants_certify_geometric_decay_on_an_ensemble() {
        let g = build_grid(64).unwrap();
        let alpha = DampingParam::new(0.5).unwrap();
        let ens: Vec<Trajectory> = smooth_ensemble(&g, alpha, 8, 900)
            .iter()
            .map(|u0| cn_run(u0, alpha, 1e-3, 2.5, 10))
            .collect();
        let dc = decay_constants(&ens, alpha, 0.5).unwrap();
        assert!(dc.c1 > 0.0);
        assert!(dc.gamma > 0.0 && dc.gamma < 1.0, "gamma {}", dc.gamma);
        assert!(dc.nu > 0.0);
        assert_eq!(dc.excluded, 0);
        assert!(dc.geometric_ok);
    }

    #[test]
    fn decay_rate_brackets_the_slowest_mode() {
        let g = build_grid(128).unwrap();
        let alpha = DampingParam::new(0.5).unwrap();
        let op = assemble(&g, alpha, false).unwrap();
        let omega = -op.spectral_abscissa().unwrap();
        let ens: Vec<Trajectory> = smooth_ensemble(&g, alpha, 20, 7000)
            .iter()
            .map(|u0| cn_run(u0, alpha, 5e-6, 0.05, 1))
            .collect();
        let dc = decay_constants(&ens, alpha, 0.01).unwrap();
        // Observability over a window much shorter than 1/omega sees only
        // the fraction of energy the trace can drain, so nu lands well below
        // omega but within a fixed factor of it.
        assert!(dc.nu <= 2.0 * omega, "nu {} vs omega {omega}", dc.nu);
        assert!(dc.nu >= omega / 50.0, "nu {} vs omega {omega}", dc.nu);
        assert!(dc.geometric_ok);
    }

    #[test]
    fn decay_constants_exclude_trace_free_members() {
        let g = build_grid(64).unwrap();
        let alpha = DampingParam::new(0.5).unwrap();
        let zero = Trajectory::new(
            0.0,
            0.05,
            vec![Field::zeros(&g); 31],
            synthetic_meta(0.5, 64),
        )
        .unwrap();
        assert!(matches!(
            decay_constants(&[zero.clone()], alpha, 0.5),
            Err(Error::InsufficientData { .. })
        ));
        let live = cn_run(&quintic_pair(&g, 0.5), alpha, 1e-3, 1.5, 10);
        let dc = decay_constants(&[zero, live], alpha, 0.5).unwrap();
        assert_eq!(dc.excluded, 1);
        assert!(dc.gamma < 1.0 && dc.geometric_ok);
    }

    #[test]
    fn energy_decays_overall_with_a_bounded_per_step_wobble() {
        // The discrete operator is not uniformly dissipative: closure terms
        // give a few stiff modes a slightly positive symmetric part, so
        // single steps can gain energy at the 1e-4 E(0) scale for rough
        // boundary-incompatible data. Net decay over a window still holds.
        let g = build_grid(64).unwrap();
        let dt = 2e-5;
        for a in [0.0, 0.5, 0.9] {
            let alpha = DampingParam::new(a).unwrap();
            for seed in 0..5 {
                let u0 = crate::ensemble::smooth_field(&g, alpha, 300 + seed);
                let traj = cn_run(&u0, alpha, dt, 0.05, 1);
                let e: Vec<f64> = traj.snapshots.iter().map(energy).collect();
                let worst_gain = e
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(0.0_f64, f64::max);
                assert!(
                    worst_gain <= 1e-2 * e[0],
                    "alpha {a} seed {seed}: per-step gain {worst_gain:.3e} vs E0 {:.3e}",
                    e[0]
                );
                assert!(e[e.len() - 1] <= e[0] * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn checks_reject_mismatched_runs_and_windows() {
        let g = build_grid(32).unwrap();
        let alpha = DampingParam::new(0.5).unwrap();
        let u = quintic_pair(&g, 0.5);
        let ok = Trajectory::new(0.0, 0.1, vec![u.clone(); 6], synthetic_meta(0.5, 32)).unwrap();

        let other = DampingParam::new(0.3).unwrap();
        assert!(matches!(
            hidden_regularity_check(&ok, other, 0.5),
            Err(Error::InvalidParam { .. })
        ));

        let mut forced_meta = synthetic_meta(0.5, 32);
        forced_meta.forcing = Some("sin(2 pi t)".into());
        let forced = Trajectory::new(0.0, 0.1, vec![u.clone(); 6], forced_meta).unwrap();
        assert!(weak_observability_check(&forced, alpha, 0.5).is_err());

        assert!(matches!(
            l2h2_bound_check(&ok, alpha, 0.123),
            Err(Error::InvalidParam { .. })
        ));
        assert!(matches!(
            hidden_regularity_check(&ok, alpha, 2.0),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            weak_observability_check(&ok, alpha, -0.5),
            Err(Error::InvalidParam { .. })
        ));
    }
}
