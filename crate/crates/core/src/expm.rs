//! Dense matrix exponential by Pade approximation with scaling and squaring.
//!
//! Serves as the reference propagator for small problems: time steppers are
//! checked against expm(t*A) rather than against themselves. The algorithm
//! picks the lowest-degree diagonal Pade approximant whose backward-error
//! bound covers the 1-norm of the input, scaling by a power of two first
//! when even the degree-13 bound is exceeded.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

// largest 1-norms for which the degree-m approximant keeps backward error
// below unit roundoff
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Evaluate the degree-m Pade numerator split U (odd part) and V (even part)
/// for m in {3,5,7,9}; even_pows holds [A^2, A^4, A^6, A^8] as far as needed.
fn pade_small(a: &DMatrix<f64>, even_pows: &[DMatrix<f64>], b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut u_poly = &id * b[1];
    let mut v = &id * b[0];
    for (k, p) in even_pows.iter().enumerate() {
        u_poly += p * b[2 * k + 3];
        v += p * b[2 * k + 2];
    }
    (a * u_poly, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &B13;
    let u_hi = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u_lo = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = a * (u_hi + u_lo);
    let v_hi = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// Matrix exponential of a square real matrix.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::SolveFailed { what: "expm of a non-square matrix".into() });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "expm input" });
    }
    let norm = one_norm(a);

    let mut squarings = 0usize;
    let (u, v) = if norm <= THETA_9 {
        let a2 = a * a;
        if norm <= THETA_3 {
            pade_small(a, &[a2], &B3)
        } else {
            let a4 = &a2 * &a2;
            if norm <= THETA_5 {
                pade_small(a, &[a2, a4], &B5)
            } else {
                let a6 = &a2 * &a4;
                if norm <= THETA_7 {
                    pade_small(a, &[a2, a4, a6], &B7)
                } else {
                    let a8 = &a4 * &a4;
                    pade_small(a, &[a2, a4, a6, a8], &B9)
                }
            }
        }
    } else {
        squarings = ((norm / THETA_13).log2().ceil().max(0.0)) as usize;
        let scaled = a * (0.5f64.powi(squarings as i32));
        pade13(&scaled)
    };

    // r = (V - U)^{-1} (V + U)
    let q = &v - &u;
    let p = v + u;
    let lu = q.lu();
    let mut r = match lu.solve(&p) {
        Some(x) => x,
        None => return Err(Error::SolveFailed { what: "singular Pade denominator in expm".into() }),
    };
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "expm result" });
    }
    Ok(r)
}
