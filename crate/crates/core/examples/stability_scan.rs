//! Closure-stability survey across boundary stencil variants: spectral
//! abscissa, top eigenvalue of the symmetric part, and worst measured
//! per-step growth of the trapezoidal scheme over random initial data.
//!
//! Run with `cargo run --release -p kawahara-core --example stability_scan`.

use kawahara_core::mesh::{build_grid, Field};
use kawahara_core::operator::{assemble_with_closure, ClosureSpec, DampingParam, RowStencil};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn variants() -> Vec<(&'static str, ClosureSpec)> {
    let base = ClosureSpec::default();
    let mut out = Vec::new();

    out.push(("v00 baseline", base.clone()));

    let mut c = base.clone();
    c.rows.row1_d5 = RowStencil::interp(&[-1, 0, 1, 2, 3, 4, 5]);
    out.push(("v01 row1 d5 onesided", c));

    let mut c = base.clone();
    c.rows.row1_d3 = RowStencil::interp(&[-1, 0, 1, 2, 3]);
    c.rows.row1_d5 = RowStencil::interp(&[-1, 0, 1, 2, 3, 4, 5]);
    out.push(("v02 row1 ghostfree", c.clone()));

    let mut c3 = c.clone();
    c3.e3_left = vec![0, 1, 2, 3, 4, 5, 6];
    out.push(("v03 v02+e3l noghost", c3.clone()));

    let mut c4 = base.clone();
    c4.rows.rown_d5 = RowStencil::interp(&[-4, -3, -2, -1, 0, 1, 2]);
    c4.rows.rown1_d5 = RowStencil::interp(&[-2, -1, 0, 1, 2, 3, 4]);
    out.push(("v04 gR2 via row n-1", c4.clone()));

    let mut c5 = base.clone();
    c5.rows.rown_d3 = RowStencil::interp(&[-3, -2, -1, 0, 1]);
    out.push(("v05 rown d3 onesided", c5.clone()));

    let mut c6 = c.clone();
    c6.rows.rown_d5 = c4.rows.rown_d5.clone();
    c6.rows.rown1_d5 = c4.rows.rown1_d5.clone();
    out.push(("v06 v02+v04", c6.clone()));

    let mut c7 = c6.clone();
    c7.rows.rown_d3 = RowStencil::interp(&[-3, -2, -1, 0, 1]);
    out.push(("v07 v02+v04+v05", c7.clone()));

    let mut c8 = base.clone();
    c8.e1 = vec![-1, 0, 1, 2, 3, 4, 5, 6];
    c8.e2 = c8.e1.clone();
    c8.e3_right = vec![-2, -1, 0, 1, 2, 3, 4, 5];
    c8.e3_left = c8.e1.clone();
    out.push(("v08 elim 8-node", c8.clone()));

    let mut c9 = c.clone();
    c9.e1 = c8.e1.clone();
    c9.e2 = c8.e2.clone();
    c9.e3_right = c8.e3_right.clone();
    c9.e3_left = c8.e3_left.clone();
    out.push(("v09 v02+elim8", c9));

    let mut c10 = c4.clone();
    c10.rows.rown_d3 = RowStencil::interp(&[-3, -2, -1, 0, 1]);
    out.push(("v10 right all biased", c10.clone()));

    let mut c11 = base.clone();
    c11.rows.row1_d5 = RowStencil::interp(&[-1, 0, 1, 2, 3, 4, 5]);
    c11.rows.rown_d3 = RowStencil::interp(&[-3, -2, -1, 0, 1]);
    out.push(("v11 v01+v05", c11));

    let mut c13 = base.clone();
    c13.rows.row2_d5 = RowStencil::interp(&[-2, -1, 0, 1, 2, 3, 4]);
    out.push(("v13 row2 d5 biased", c13.clone()));

    let mut c14 = c13.clone();
    c14.rows.row1_d5 = RowStencil::interp(&[-1, 0, 1, 2, 3, 4, 5]);
    out.push(("v14 v13+v01", c14));

    let mut c15 = c3.clone();
    c15.rows.rown_d5 = c4.rows.rown_d5.clone();
    c15.rows.rown1_d5 = c4.rows.rown1_d5.clone();
    out.push(("v15 v03+v04", c15));

    let mut c17 = base.clone();
    c17.e3_right = vec![-2, -1, 0, 1, 2, 3, 4, 5];
    out.push(("v17 e3r 8-node", c17));

    let mut c19 = base.clone();
    c19.rows.rown_d5 = RowStencil::interp(&[-4, -3, -2, -1, 0, 1, 2, 3]);
    out.push(("v19 rown d5 8-node", c19));

    let mut c20 = base.clone();
    c20.rows.row1_d3 = RowStencil::interp(&[-1, 0, 1, 2, 3]);
    out.push(("v20 row1 d3 onesided", c20));

    let mut c21 = base.clone();
    c21.rows.row1_d5 = RowStencil::interp(&[-2, -1, 0, 1, 2, 3, 4, 5]);
    c21.rows.row2_d5 = RowStencil::interp(&[-3, -2, -1, 0, 1, 2, 3, 4]);
    c21.rows.rown1_d5 = RowStencil::interp(&[-4, -3, -2, -1, 0, 1, 2, 3]);
    c21.rows.rown_d5 = RowStencil::interp(&[-4, -3, -2, -1, 0, 1, 2, 3]);
    out.push(("v21 d5 rows 8-node", c21.clone()));

    let mut c22 = c21.clone();
    c22.e1 = c8.e1.clone();
    c22.e2 = c8.e2.clone();
    c22.e3_right = c8.e3_right.clone();
    c22.e3_left = c8.e3_left.clone();
    out.push(("v22 v21+elim8", c22));

    let mut c23 = c7.clone();
    c23.e3_left = vec![0, 1, 2, 3, 4, 5, 6];
    out.push(("v23 v07+e3l noghost", c23));

    out
}

fn main() {
    let dt = 1e-3;
    println!(
        "{:<22} {:>5} {:>5} | {:>12} {:>12} | {:>14} {:>16}",
        "variant", "n", "alpha", "abscissa", "max_im", "lam_max(sym)", "worst step"
    );
    for (name, spec) in variants() {
        for n in [32usize, 64, 128] {
            for alpha in [0.0, 0.9] {
                let g = build_grid(n).unwrap();
                let op = match assemble_with_closure(
                    &g,
                    DampingParam::new(alpha).unwrap(),
                    false,
                    spec.clone(),
                ) {
                    Ok(op) => op,
                    Err(e) => {
                        println!("{:<22} {:>5} {:>5.2} | invalid: {}", name, n, alpha, e);
                        continue;
                    }
                };
                let spectrum = op.spectrum().unwrap();
                let absc = spectrum[0].re;
                let max_im = spectrum.iter().map(|e| e.im.abs()).fold(0.0f64, f64::max);
                let lam_sym = op.symmetric_part_max_eigenvalue().unwrap_or(f64::NAN);

                // trapezoidal step growth over rough and smooth random data
                let solver = op.implicit_solver(0.5 * dt).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(42);
                let mut worst: f64 = 0.0;
                for k in 0..40 {
                    let u = if k < 20 {
                        Field::from_values(
                            &g,
                            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        )
                        .unwrap()
                    } else {
                        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        Field::from_fn(&g, |x| {
                            let env = x * x * (1.0 - x) * (1.0 - x);
                            env * a
                                .iter()
                                .enumerate()
                                .map(|(j, &c)| c * ((j + 1) as f64 * x).cos())
                                .sum::<f64>()
                        })
                    };
                    let mu = op.apply(&u);
                    let mut rhs: Vec<f64> =
                        u.values.iter().zip(&mu.values).map(|(a, b)| a + 0.5 * dt * b).collect();
                    solver.solve_in_place(&mut rhs);
                    let up = Field::from_values(&g, rhs).unwrap();
                    worst = worst.max(up.l2_norm() / u.l2_norm());
                }
                println!(
                    "{:<22} {:>5} {:>5.2} | {:>12.4e} {:>12.4e} | {:>14.4e} {:>16.12}",
                    name, n, alpha, absc, max_im, lam_sym, worst
                );
            }
        }
    }
}
