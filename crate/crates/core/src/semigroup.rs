//! Linear time stepping for u_t = A u: the theta-scheme, trajectory capture,
//! exponential-decay fitting, and the L2 -> H2 smoothing ratio.
//!
//! The implicit solve reuses one banded factorization per trajectory. The
//! decay fit works in the log domain with the amplitude factored out first,
//! so runs spanning hundreds of orders of magnitude stay inside f64 range.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::mesh::{sobolev_norm, Field, Grid};
use crate::operator::DiscreteOperator;

/// Fits ignore everything before this time; the early-time smoothing
/// transient is not log-linear and would bias the slope.
pub const FIT_WINDOW_START: f64 = 0.5;

/// Theta-scheme parameters. theta = 0.5 is the trapezoidal rule, theta = 1
/// implicit Euler; intermediate values interpolate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub theta: f64,
}

impl StepperConfig {
    pub fn new(dt: f64, theta: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParam { name: "dt", value: dt });
        }
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::InvalidParam { name: "theta", value: theta });
        }
        Ok(StepperConfig { dt, theta })
    }

    pub fn trapezoidal(dt: f64) -> Result<Self> {
        StepperConfig::new(dt, 0.5)
    }

    pub fn implicit_euler(dt: f64) -> Result<Self> {
        StepperConfig::new(dt, 1.0)
    }
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig { dt: 1e-3, theta: 0.5 }
    }
}

/// Provenance record carried by a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub alpha: f64,
    pub forcing: Option<String>,
    pub scheme: String,
    pub grid_n: usize,
}

impl TrajectoryMeta {
    pub fn homogeneous(alpha: f64, cfg: &StepperConfig, grid: &Grid) -> Self {
        TrajectoryMeta {
            alpha,
            forcing: None,
            scheme: format!("theta={}", cfg.theta),
            grid_n: grid.n,
        }
    }
}

/// Uniformly spaced snapshots of a run; snapshot j sits at time t0 + j*dt.
/// Here dt is the snapshot spacing, stride * (stepper dt) for strided runs.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub snapshots: Vec<Field>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, snapshots: Vec<Field>, meta: TrajectoryMeta) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InsufficientData { what: "trajectory with no snapshots".into() });
        }
        if !(dt > 0.0 && dt.is_finite() && t0.is_finite()) {
            return Err(Error::InvalidParam { name: "trajectory spacing", value: dt });
        }
        let g = &snapshots[0].grid;
        if !snapshots.iter().all(|s| Arc::ptr_eq(&s.grid, g) || s.grid == *g) {
            return Err(Error::GridMismatch);
        }
        Ok(Trajectory { t0, dt, snapshots, meta })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.snapshots.len() - 1)
    }
}

/// Least-squares exponential envelope: log-norm ~ log(C * ||u0||) - omega * t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub omega: f64,
    pub rmse: f64,
}

/// One theta-step: solves (I - theta*dt*A) u+ = (I + (1-theta)*dt*A) u.
/// Factors the shifted operator once; reuse across steps via `step`.
pub struct LinearStepper<'a> {
    op: &'a DiscreteOperator,
    cfg: StepperConfig,
    solver: crate::banded::RankOneSolver,
}

impl<'a> LinearStepper<'a> {
    pub fn new(op: &'a DiscreteOperator, cfg: StepperConfig) -> Result<Self> {
        let solver = op.implicit_solver(cfg.theta * cfg.dt)?;
        Ok(LinearStepper { op, cfg, solver })
    }

    pub fn config(&self) -> StepperConfig {
        self.cfg
    }

    /// Homogeneous step u -> u+.
    pub fn step(&self, u: &Field) -> Result<Field> {
        let mut rhs = if self.cfg.theta < 1.0 {
            let mut au = self.op.apply(u);
            au.scale((1.0 - self.cfg.theta) * self.cfg.dt);
            au.axpy(1.0, u);
            au
        } else {
            u.clone()
        };
        self.solver.solve_in_place(&mut rhs.values);
        if !rhs.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "theta-step result" });
        }
        Ok(rhs)
    }

    /// Step of u_t = A u + r(t) with the same theta weighting applied to the
    /// extra term: rhs picks up dt*(theta*r_next + (1-theta)*r_now).
    pub fn step_with_rhs(&self, u: &Field, r_now: &Field, r_next: &Field) -> Result<Field> {
        let mut rhs = if self.cfg.theta < 1.0 {
            let mut au = self.op.apply(u);
            au.scale((1.0 - self.cfg.theta) * self.cfg.dt);
            au.axpy(1.0, u);
            au
        } else {
            u.clone()
        };
        rhs.axpy(self.cfg.dt * (1.0 - self.cfg.theta), r_now);
        rhs.axpy(self.cfg.dt * self.cfg.theta, r_next);
        self.solver.solve_in_place(&mut rhs.values);
        if !rhs.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "theta-step result" });
        }
        Ok(rhs)
    }
}

/// Single theta-step without a cached factorization.
pub fn step_linear(u: &Field, op: &DiscreteOperator, cfg: StepperConfig) -> Result<Field> {
    LinearStepper::new(op, cfg)?.step(u)
}

/// March u_t = A u from u0 to t_final, recording every `stride`-th state
/// (snapshot 0 is u0 itself). t_final is rounded to a whole number of steps.
pub fn evolve_linear(
    u0: &Field,
    op: &DiscreteOperator,
    cfg: StepperConfig,
    t_final: f64,
    stride: usize,
) -> Result<Trajectory> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParam { name: "t_final", value: t_final });
    }
    if stride == 0 {
        return Err(Error::InvalidParam { name: "stride", value: 0.0 });
    }
    let steps = ((t_final / cfg.dt).round() as usize).max(1);
    let stepper = LinearStepper::new(op, cfg)?;
    let mut snapshots = Vec::with_capacity(steps / stride + 2);
    snapshots.push(u0.clone());
    let mut u = u0.clone();
    for i in 1..=steps {
        u = stepper.step(&u)?;
        if i % stride == 0 {
            snapshots.push(u.clone());
        }
    }
    let meta = TrajectoryMeta::homogeneous(op.alpha.alpha(), &cfg, &op.grid);
    Trajectory::new(0.0, cfg.dt * stride as f64, snapshots, meta)
}

/// Reference propagator expm(t*A) as a dense row-major matrix. Oracle only;
/// the size cap keeps the dense eigen/exponential work honest.
pub fn dense_propagator(op: &DiscreteOperator, t: f64) -> Result<Vec<f64>> {
    let n = op.grid.n;
    if n > 256 {
        return Err(Error::TooLargeForDense { n, limit: 256 });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParam { name: "t", value: t });
    }
    let a = DMatrix::from_row_slice(n, n, &op.dense()) * t;
    let e = expm(&a)?;
    Ok(e.transpose().as_slice().to_vec())
}

/// Apply a dense row-major matrix to a field.
pub fn apply_dense(m: &[f64], u: &Field) -> Field {
    let n = u.grid.n;
    debug_assert_eq!(m.len(), n * n);
    let mut out = Field::zeros(&u.grid);
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out.values[i] = row.iter().zip(&u.values).map(|(a, b)| a * b).sum();
    }
    out
}

/// log of the L2 norm with the amplitude factored out first, so fields with
/// |u| anywhere in f64 range never overflow when squared. None for u = 0.
pub fn log_l2_norm(u: &Field) -> Option<f64> {
    let s = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s == 0.0 {
        return None;
    }
    let sum: f64 = u.values
        .iter()
        .map(|v| {
            let w = v / s;
            w * w
        })
        .sum();
    Some(s.ln() + 0.5 * (u.grid.h * sum).ln())
}

/// log of the discrete H2 norm, amplitude factored out as in `log_l2_norm`.
/// Zero-Dirichlet traces are assumed (homogeneous runs).
pub fn log_h2_norm(u: &Field) -> Option<f64> {
    let s = u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s == 0.0 {
        return None;
    }
    let mut scaled = u.clone();
    scaled.scale(1.0 / s);
    let norm = sobolev_norm(&scaled, 2).ok()?;
    if norm == 0.0 {
        return None;
    }
    Some(s.ln() + norm.ln())
}

/// Least-squares line through log-norms of the trajectory on t >= 0.5.
/// norm_kind 0 fits the L2 norm, 2 the discrete H2 norm. C is normalized by
/// the initial norm so the fitted envelope reads C * exp(-omega t) * ||u0||.
pub fn fit_decay(traj: &Trajectory, norm_kind: usize) -> Result<DecayFit> {
    let log_norm: fn(&Field) -> Option<f64> = match norm_kind {
        0 => log_l2_norm,
        2 => log_h2_norm,
        k => return Err(Error::InvalidParam { name: "norm_kind", value: k as f64 }),
    };
    let log_u0 = log_norm(&traj.snapshots[0]).ok_or(Error::InsufficientData {
        what: "decay fit needs a nonzero initial snapshot".into(),
    })?;

    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (j, snap) in traj.snapshots.iter().enumerate() {
        let t = traj.time(j);
        if t < FIT_WINDOW_START - 1e-12 {
            continue;
        }
        if let Some(ln) = log_norm(snap) {
            pts.push((t, ln));
        }
    }
    if pts.len() < 10 {
        return Err(Error::InsufficientData {
            what: format!(
                "decay fit has {} usable snapshots past t={FIT_WINDOW_START}, needs 10",
                pts.len()
            ),
        });
    }

    let m = pts.len() as f64;
    let st: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let stt: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sty: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = m * stt - st * st;
    if det.abs() < 1e-12 * (m * stt).abs().max(1.0) {
        return Err(Error::InsufficientData { what: "decay fit times are degenerate".into() });
    }
    let slope = (m * sty - st * sy) / det;
    let intercept = (sy - slope * st) / m;
    let mse: f64 =
        pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m;

    Ok(DecayFit { c: (intercept - log_u0).exp(), omega: -slope, rmse: mse.sqrt() })
}

/// H2-over-initial-L2 amplification at time t, paired with the shape of the
/// smoothing bound sqrt(1/((1-alpha^2) t) + 1). An ensemble sup of
/// ratio/bound_shape estimates the constant in front.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingRatio {
    pub ratio: f64,
    pub bound_shape: f64,
}

pub fn smoothing_ratio(
    u0: &Field,
    op: &DiscreteOperator,
    t: f64,
    cfg: StepperConfig,
) -> Result<SmoothingRatio> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParam { name: "t", value: t });
    }
    let alpha = op.alpha.alpha();
    let bound_shape = (1.0 / ((1.0 - alpha * alpha) * t) + 1.0).sqrt();

    let n0 = u0.l2_norm();
    if n0 == 0.0 {
        return Ok(SmoothingRatio { ratio: 0.0, bound_shape });
    }
    let steps = ((t / cfg.dt).round() as usize).max(1);
    let stepper = LinearStepper::new(op, cfg)?;
    let mut u = u0.clone();
    for _ in 0..steps {
        u = stepper.step(&u)?;
    }
    let h2 = sobolev_norm(&u, 2)?;
    Ok(SmoothingRatio { ratio: h2 / n0, bound_shape })
}
