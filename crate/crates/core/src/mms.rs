//! Manufactured-solution verification. A closed-form u*(x,t) built from the
//! bubble p(x) = x^2 (1-x)^3 is injected as a source into the linear and
//! nonlinear steppers; the distance between the computed and exact states
//! under grid and step refinement gives the observed convergence orders.
//!
//! p satisfies p(0)=p(1)=p'(0)=p'(1)=0 and p''(1)=0, so u* sits in the
//! alpha = 0 operator domain and no boundary forcing is needed.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forcing::ForcingSignal;
use crate::mesh::{build_grid, Field};
use crate::nonlinear::{evolve_nonlinear, NonlinearRunConfig, SourceFn};
use crate::operator::{assemble, DampingParam};
use crate::semigroup::{LinearStepper, StepperConfig, Trajectory, TrajectoryMeta};

fn p(x: f64) -> f64 {
    x * x * (1.0 - x).powi(3)
}

fn dp(x: f64) -> f64 {
    2.0 * x - 9.0 * x * x + 12.0 * x.powi(3) - 5.0 * x.powi(4)
}

fn d3p(x: f64) -> f64 {
    -18.0 + 72.0 * x - 60.0 * x * x
}

// p''''' = -120 everywhere.

/// A closed-form solution with the sources that make the linear and the
/// full transport equations reproduce it exactly.
#[derive(Clone)]
pub struct Manufactured {
    pub name: &'static str,
    /// u*(x, t)
    pub solution: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// g with u*_t + u*_xxx - u*_xxxxx + u* u*_x = g
    pub source: SourceFn,
    /// g with u*_t + u*_xxx - u*_xxxxx = g
    pub linear_source: SourceFn,
}

/// u* = e^{-t} p(x): steady exponential relaxation.
pub fn decaying_bubble() -> Manufactured {
    Manufactured {
        name: "decaying-bubble",
        solution: Arc::new(|x, t| (-t).exp() * p(x)),
        source: Arc::new(|x, t| {
            (-t).exp() * (-p(x) + d3p(x) + 120.0) + (-2.0 * t).exp() * p(x) * dp(x)
        }),
        linear_source: Arc::new(|x, t| (-t).exp() * (-p(x) + d3p(x) + 120.0)),
    }
}

/// u* = sin(2 pi t) p(x): oscillation exercising the time discretization.
pub fn oscillating_bubble() -> Manufactured {
    let w = 2.0 * std::f64::consts::PI;
    Manufactured {
        name: "oscillating-bubble",
        solution: Arc::new(move |x, t| (w * t).sin() * p(x)),
        source: Arc::new(move |x, t| {
            let s = (w * t).sin();
            w * (w * t).cos() * p(x) + s * (d3p(x) + 120.0) + s * s * p(x) * dp(x)
        }),
        linear_source: Arc::new(move |x, t| {
            w * (w * t).cos() * p(x) + (w * t).sin() * (d3p(x) + 120.0)
        }),
    }
}

/// L2 distances between a trajectory and the exact solution it was
/// manufactured for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsError {
    pub final_l2: f64,
    pub max_l2: f64,
}

pub fn residual_mms(traj: &Trajectory, solution: &dyn Fn(f64, f64) -> f64) -> Result<MmsError> {
    if traj.is_empty() {
        return Err(Error::InsufficientData { what: "empty trajectory".into() });
    }
    let mut max_l2 = 0.0f64;
    let mut final_l2 = 0.0;
    for (j, snap) in traj.snapshots.iter().enumerate() {
        let t = traj.time(j);
        let mut diff = snap.clone();
        let exact = Field::from_fn(&snap.grid, |x| solution(x, t));
        diff.axpy(-1.0, &exact);
        let e = diff.l2_norm();
        max_l2 = max_l2.max(e);
        final_l2 = e;
    }
    Ok(MmsError { final_l2, max_l2 })
}

/// Errors and pairwise observed orders of a refinement sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    /// Refinement parameter per run: h for spatial sweeps, dt for temporal.
    pub params: Vec<f64>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

impl RefinementReport {
    fn from_pairs(params: Vec<f64>, errors: Vec<f64>) -> Self {
        let orders = params
            .windows(2)
            .zip(errors.windows(2))
            .map(|(p, e)| (e[0] / e[1]).ln() / (p[0] / p[1]).ln())
            .collect();
        RefinementReport { params, errors, orders }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// March the source-injected linear system u_t = A u + g from the exact
/// initial state and record the end state.
fn linear_run(case: &Manufactured, n: usize, cfg: StepperConfig, t_final: f64) -> Result<Field> {
    let grid = build_grid(n)?;
    let op = assemble(&grid, DampingParam::new(0.0)?, false)?;
    let stepper = LinearStepper::new(&op, cfg)?;
    let mut u = Field::from_fn(&grid, |x| (case.solution)(x, 0.0));
    let steps = ((t_final / cfg.dt).round() as usize).max(1);
    let sample = |t: f64| Field::from_fn(&grid, |x| (case.linear_source)(x, t));
    let mut g_now = sample(0.0);
    for k in 0..steps {
        let g_next = sample((k + 1) as f64 * cfg.dt);
        u = stepper.step_with_rhs(&u, &g_now, &g_next)?;
        g_now = g_next;
    }
    Ok(u)
}

fn nonlinear_run(case: &Manufactured, n: usize, cfg: StepperConfig, t_final: f64) -> Result<Field> {
    let grid = build_grid(n)?;
    let mut run = NonlinearRunConfig::new(DampingParam::new(0.0)?, ForcingSignal::Zero, cfg);
    run.source = Some(case.source.clone());
    let u0 = Field::from_fn(&grid, |x| (case.solution)(x, 0.0));
    let steps = ((t_final / cfg.dt).round() as usize).max(1);
    let traj = evolve_nonlinear(&u0, &run, (0.0, t_final), steps)?;
    Ok(traj.snapshots.last().unwrap().clone())
}

fn end_error(u: &Field, case: &Manufactured, t: f64) -> f64 {
    let exact = Field::from_fn(&u.grid, |x| (case.solution)(x, t));
    let mut d = u.clone();
    d.axpy(-1.0, &exact);
    d.l2_norm()
}

/// Error against the exact solution across grids at a fixed small step.
pub fn spatial_refinement(
    case: &Manufactured,
    ns: &[usize],
    cfg: StepperConfig,
    t_final: f64,
    linear: bool,
) -> Result<RefinementReport> {
    let mut hs = Vec::new();
    let mut errors = Vec::new();
    for &n in ns {
        let u = if linear {
            linear_run(case, n, cfg, t_final)?
        } else {
            nonlinear_run(case, n, cfg, t_final)?
        };
        hs.push(u.grid.h);
        errors.push(end_error(&u, case, t_final));
    }
    Ok(RefinementReport::from_pairs(hs, errors))
}

/// Error against a dt -> 0 reference (same grid, dt = min/8) across steps.
/// Differencing against the fine run isolates the time-stepping error from
/// the fixed spatial bias.
pub fn temporal_refinement(
    case: &Manufactured,
    n: usize,
    dts: &[f64],
    theta: f64,
    t_final: f64,
    linear: bool,
) -> Result<RefinementReport> {
    let dt_ref = dts.iter().copied().fold(f64::INFINITY, f64::min) / 8.0;
    let run = |dt: f64| -> Result<Field> {
        let cfg = StepperConfig::new(dt, theta)?;
        if linear {
            linear_run(case, n, cfg, t_final)
        } else {
            nonlinear_run(case, n, cfg, t_final)
        }
    };
    let reference = run(dt_ref)?;
    let mut errors = Vec::new();
    for &dt in dts {
        let u = run(dt)?;
        let mut d = u.clone();
        d.axpy(-1.0, &reference);
        errors.push(d.l2_norm());
    }
    Ok(RefinementReport::from_pairs(dts.to_vec(), errors))
}

/// Convenience wrapper: a trajectory of the nonlinear solver for one case,
/// for callers that want residual_mms over whole histories.
pub fn manufactured_trajectory(
    case: &Manufactured,
    n: usize,
    cfg: StepperConfig,
    t_final: f64,
    stride: usize,
) -> Result<Trajectory> {
    let grid = build_grid(n)?;
    let mut run = NonlinearRunConfig::new(DampingParam::new(0.0)?, ForcingSignal::Zero, cfg);
    run.source = Some(case.source.clone());
    let u0 = Field::from_fn(&grid, |x| (case.solution)(x, 0.0));
    evolve_nonlinear(&u0, &run, (0.0, t_final), stride)
}

/// Zero solution, zero source: the residual must vanish identically.
pub fn zero_case_residual(n: usize) -> Result<MmsError> {
    let grid = build_grid(n)?;
    let meta = TrajectoryMeta {
        alpha: 0.0,
        forcing: None,
        scheme: "static".into(),
        grid_n: n,
    };
    let traj = Trajectory::new(0.0, 1.0, vec![Field::zeros(&grid); 3], meta)?;
    residual_mms(&traj, &|_x, _t| 0.0)
}
