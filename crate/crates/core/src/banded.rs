//! Banded linear algebra: storage, matvec, LU with partial pivoting (LAPACK
//! gbtrf-style band storage) and a Sherman-Morrison wrapper for banded plus
//! rank-one systems.
//!
//! The boundary-coupled operator assembles to bandwidth (4,4) plus a rank-one
//! end-to-end correction, so every implicit step is one banded solve and two
//! dot products.

use crate::error::{Error, Result};

/// Row-major banded matrix: entry (i,j) is stored when |i - j| is within the
/// (kl, ku) band.
#[derive(Debug, Clone)]
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Banded { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let w = self.kl + self.ku + 1;
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * w + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[i * (self.kl + self.ku + 1) + (j + self.kl - i)] * x[j];
            }
            y[i] = s;
        }
    }

    /// out = a*I + c*self, same band profile.
    pub fn scale_shift(&self, c: f64, a: f64) -> Banded {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        for i in 0..self.n {
            let k = out.idx(i, i).unwrap();
            out.data[k] += a;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                d[i * self.n + j] = self.get(i, j);
            }
        }
        d
    }

    /// LU factorization with partial pivoting.
    pub fn factor(&self) -> Result<BandedLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let ldab = 2 * kl + ku + 1;
        // column-major band storage with kl extra rows for pivoting fill-in:
        // ab[j*ldab + (kl + ku + i - j)] = A[i][j]
        let mut ab = vec![0.0; n * ldab];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                ab[j * ldab + (kl + ku + i - j)] = self.get(i, j);
            }
        }
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let imax = (k + kl).min(n - 1);
            let mut p = k;
            let mut pmax = ab[k * ldab + (kl + ku)].abs();
            for i in (k + 1)..=imax {
                let v = ab[k * ldab + (kl + ku + i - k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::SolveFailed {
                    what: format!("banded LU breakdown at column {k}"),
                });
            }
            piv[k] = p;
            let jmax = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    ab.swap(j * ldab + (kl + ku + k - j), j * ldab + (kl + ku + p - j));
                }
            }
            let pivot = ab[k * ldab + (kl + ku)];
            for i in (k + 1)..=imax {
                let m = ab[k * ldab + (kl + ku + i - k)] / pivot;
                ab[k * ldab + (kl + ku + i - k)] = m;
                for j in (k + 1)..=jmax {
                    ab[j * ldab + (kl + ku + i - j)] -= m * ab[j * ldab + (kl + ku + k - j)];
                }
            }
        }
        Ok(BandedLu { n, kl, ku, ldab, ab, piv })
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let imax = (k + kl).min(n - 1);
            for i in (k + 1)..=imax {
                b[i] -= self.ab[k * ldab + (kl + ku + i - k)] * b[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + ku + kl).min(n - 1);
            let mut s = b[k];
            for j in (k + 1)..=jmax {
                s -= self.ab[j * ldab + (kl + ku + k - j)] * b[j];
            }
            b[k] = s / self.ab[k * ldab + (kl + ku)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solver for (B + p q^T) x = r via one banded factorization and a
/// Sherman-Morrison update.
#[derive(Debug, Clone)]
pub struct RankOneSolver {
    lu: BandedLu,
    binv_p: Vec<f64>,
    q: Vec<f64>,
    denom: f64,
}

impl RankOneSolver {
    pub fn new(b: &Banded, p: &[f64], q: &[f64]) -> Result<Self> {
        let lu = b.factor()?;
        let binv_p = lu.solve(p);
        let denom = 1.0 + dot(q, &binv_p);
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return Err(Error::SolveFailed {
                what: format!("Sherman-Morrison denominator {denom} is singular"),
            });
        }
        Ok(RankOneSolver { lu, binv_p, q: q.to_vec(), denom })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.lu.solve_in_place(x);
        let c = dot(&self.q, x) / self.denom;
        for (xi, bi) in x.iter_mut().zip(&self.binv_p) {
            *xi -= c * bi;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
