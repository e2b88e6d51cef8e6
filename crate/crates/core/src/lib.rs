//! Numerical laboratory for a fifth-order dispersive wave equation on (0,1)
//! with boundary damping u_xx(1,t) = alpha * u_xx(0,t) and boundary forcing
//! u(0,t) = phi(t).

pub mod error;
pub mod banded;
pub mod fd;
pub mod mesh;
pub mod operator;
pub mod expm;
pub mod semigroup;
pub mod forcing;
pub mod nonlinear;
pub mod mms;
pub mod duhamel;
pub mod ensemble;
pub mod energy;
pub mod recurrence;

pub use error::{Error, Result};
pub use mesh::{build_grid, BoundaryTraces, Field, Grid};
pub use semigroup::{DecayFit, StepperConfig, Trajectory, TrajectoryMeta};
pub use energy::{DecayConstants, ObservabilityReport};
pub use recurrence::{MasseraReport, RecurrenceKind, TranslationBound, TranslationScan};
