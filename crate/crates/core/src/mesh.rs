//! Uniform interior grid on (0,1), nodal fields, discrete L2/Sobolev norms
//! and one-sided boundary traces.
//!
//! Fields store values at the n interior nodes x_i = i*h, h = 1/(n+1).
//! Boundary values are not stored; they are implied by the active boundary
//! conditions and passed explicitly where a stencil needs them.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd::deriv_weights;

/// Uniform mesh of interior nodes on (0,1).
#[derive(Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

/// Build a grid with `n` interior nodes. Requires n >= 8 so that every
/// 7-point stencil fits without overlapping both boundaries.
pub fn build_grid(n: usize) -> Result<Arc<Grid>> {
    if n < 8 {
        return Err(Error::GridTooCoarse { n });
    }
    let h = 1.0 / (n as f64 + 1.0);
    let nodes = (1..=n).map(|i| i as f64 * h).collect();
    Ok(Arc::new(Grid { n, h, nodes }))
}

/// Nodal values of a real-valued function at the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field { grid: grid.clone(), values: vec![0.0; grid.n] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        Field { grid: grid.clone(), values }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::InsufficientData {
                what: format!("field has {} values, grid has {} nodes", values.len(), grid.n),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { what: "field values" });
        }
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// self += c * other
    pub fn axpy(&mut self, c: f64, other: &Field) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in self.values.iter_mut() {
            *a *= c;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// One-sided derivative approximations at the two endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTraces {
    pub ux0: f64,
    pub ux1: f64,
    pub uxx0: f64,
    pub uxx1: f64,
}

/// Discrete L2 pairing: trapezoid rule with zero boundary values, which
/// collapses to h * sum(u_i v_i).
pub fn l2_inner(u: &Field, v: &Field) -> Result<f64> {
    if !Arc::ptr_eq(&u.grid, &v.grid) && u.grid != v.grid {
        return Err(Error::GridMismatch);
    }
    let s: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(u.grid.h * s)
}

/// One-sided traces of u_x (5 nodes, 4th order) and u_xx (6 nodes, 4th order)
/// at both ends, given the Dirichlet values u(0) and u(1).
pub fn boundary_traces(u: &Field, dirichlet0: f64, dirichlet1: f64) -> BoundaryTraces {
    let n = u.grid.n;
    let h = u.grid.h;
    let v = &u.values;
    debug_assert!(n >= 5);

    // stencils on unit offsets, scaled by 1/h^m afterwards
    let w1 = deriv_weights(0.0, &[0.0, 1.0, 2.0, 3.0, 4.0], 1);
    let w2 = deriv_weights(0.0, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 2);

    let at = |k: usize| -> f64 {
        // value at offset k from the left end (k = 0 is the boundary)
        if k == 0 { dirichlet0 } else { v[k - 1] }
    };
    let at_r = |k: usize| -> f64 {
        // value at offset k inward from the right end
        if k == 0 { dirichlet1 } else { v[n - k] }
    };

    let ux0 = w1.iter().enumerate().map(|(k, w)| w * at(k)).sum::<f64>() / h;
    let uxx0 = w2.iter().enumerate().map(|(k, w)| w * at(k)).sum::<f64>() / (h * h);
    // mirrored stencil: odd derivatives flip sign
    let ux1 = -w1.iter().enumerate().map(|(k, w)| w * at_r(k)).sum::<f64>() / h;
    let uxx1 = w2.iter().enumerate().map(|(k, w)| w * at_r(k)).sum::<f64>() / (h * h);

    BoundaryTraces { ux0, ux1, uxx0, uxx1 }
}

/// Discrete Sobolev norm (||u||^2 + ... + ||u^(k)||^2)^(1/2) with zero
/// implied boundary values, k in {0, 1, 2}.
pub fn sobolev_norm(u: &Field, k: usize) -> Result<f64> {
    sobolev_norm_with_dirichlet(u, k, 0.0, 0.0)
}

/// Sobolev norm for fields with prescribed boundary values (forced runs have
/// u(0) = phi(t)). Interior derivatives are centered; endpoint values of each
/// integrand come from the boundary-trace stencils; integration is trapezoid.
pub fn sobolev_norm_with_dirichlet(u: &Field, k: usize, d0: f64, d1: f64) -> Result<f64> {
    if k > 2 {
        return Err(Error::UnsupportedSobolevOrder { k });
    }
    let n = u.grid.n;
    let h = u.grid.h;
    let v = &u.values;

    let trapz = |end0: f64, interior: &mut dyn Iterator<Item = f64>, end1: f64| -> f64 {
        h * (0.5 * end0 + interior.sum::<f64>() + 0.5 * end1)
    };

    let mut total = trapz(d0 * d0, &mut v.iter().map(|x| x * x), d1 * d1);

    if k >= 1 {
        let tr = boundary_traces(u, d0, d1);
        let val = |i: isize| -> f64 {
            if i == 0 {
                d0
            } else if i == n as isize + 1 {
                d1
            } else {
                v[i as usize - 1]
            }
        };
        let mut dsq = (1..=n as isize).map(|i| {
            let d = (val(i + 1) - val(i - 1)) / (2.0 * h);
            d * d
        });
        total += trapz(tr.ux0 * tr.ux0, &mut dsq, tr.ux1 * tr.ux1);
        if k == 2 {
            let mut ddsq = (1..=n as isize).map(|i| {
                let d = (val(i + 1) - 2.0 * val(i) + val(i - 1)) / (h * h);
                d * d
            });
            total += trapz(tr.uxx0 * tr.uxx0, &mut ddsq, tr.uxx1 * tr.uxx1);
        }
    }
    Ok(total.sqrt())
}

/// Polynomial extrapolation of the field to x=0 and x=1 from the nearest
/// five interior nodes. Used to measure implied boundary values.
pub fn end_values(u: &Field) -> (f64, f64) {
    let n = u.grid.n;
    let v = &u.values;
    let w = deriv_weights(0.0, &[1.0, 2.0, 3.0, 4.0, 5.0], 0);
    let left: f64 = w.iter().enumerate().map(|(k, wk)| wk * v[k]).sum();
    let right: f64 = w.iter().enumerate().map(|(k, wk)| wk * v[n - 1 - k]).sum();
    (left, right)
}
