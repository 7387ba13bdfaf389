//! Dense symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit-shift
//! QL iteration, with accumulated transformations. The classic EISPACK
//! pair, ported to 0-based indexing.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, hypot, sqrt};

use crate::mat::Mat;
use crate::{Error, Result};

/// Eigenvalues in descending order; `vectors` column `i` pairs with
/// `values[i]`. Columns are orthonormal.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

/// Full eigendecomposition of a symmetric matrix. The lower triangle is
/// trusted; asymmetry beyond roundoff is the caller's responsibility.
pub fn symmetric_eigen(a: &Mat) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(
            "eigendecomposition requires a square matrix".into(),
        ));
    }
    let n = a.rows();
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 1 {
        return Ok(SymmetricEigen {
            values: vec![a[(0, 0)]],
            vectors: Mat::identity(1),
        });
    }
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, &mut z)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = z[(row, src)];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn tred2(z: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..i {
                scale += fabs(z[(i, k)]);
            }
            if scale == 0.0 {
                e[i] = z[(i, l)];
            } else {
                for k in 0..i {
                    z[(i, k)] /= scale;
                    h += z[(i, k)] * z[(i, k)];
                }
                let f = z[(i, l)];
                let g = if f >= 0.0 { -sqrt(h) } else { sqrt(h) };
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                let mut f_acc = 0.0;
                for j in 0..i {
                    z[(j, i)] = z[(i, j)] / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += z[(j, k)] * z[(i, k)];
                    }
                    for k in (j + 1)..i {
                        g_acc += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * z[(i, j)];
                }
                let hh = f_acc / (h + h);
                for j in 0..i {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * z[(i, k)];
                        z[(j, k)] -= delta;
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[(i, k)] * z[(k, j)];
                }
                for k in 0..i {
                    let delta = g * z[(k, i)];
                    z[(k, j)] -= delta;
                }
            }
        }
        d[i] = z[(i, i)];
        z[(i, i)] = 1.0;
        for j in 0..i {
            z[(j, i)] = 0.0;
            z[(i, j)] = 0.0;
        }
    }
}

fn tql2(d: &mut [f64], e: &mut [f64], z: &mut Mat) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = fabs(d[m]) + fabs(d[m + 1]);
                if fabs(e[m]) <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Convergence {
                    context: "symmetric QL iteration",
                    iterations: iter,
                    residual: fabs(e[l]),
                    trace: vec![],
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + copysign_mag(r, g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut restart = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    restart = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if restart {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `|a|` carrying the sign of `b`.
fn copysign_mag(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        fabs(a)
    } else {
        -fabs(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_symmetric(n: usize, rng: &mut StdRng) -> Mat {
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-2.0..2.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn residual(a: &Mat, eig: &SymmetricEigen) -> f64 {
        let n = a.rows();
        let mut worst = 0.0f64;
        for col in 0..n {
            let v: Vec<f64> = (0..n).map(|r| eig.vectors[(r, col)]).collect();
            let av = a.matvec(&v);
            for r in 0..n {
                worst = worst.max((av[r] - eig.values[col] * v[r]).abs());
            }
        }
        worst
    }

    #[test]
    fn two_by_two_circulant() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = symmetric_eigen(&a).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.vectors[(0, 0)].abs() - inv_sqrt2).abs() < 1e-14);
        assert!((eig.vectors[(1, 0)] - eig.vectors[(0, 0)]).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_sorted_descending() {
        let mut a = Mat::zeros(4, 4);
        for (i, v) in [0.5, -1.0, 3.0, 2.0].iter().enumerate() {
            a[(i, i)] = *v;
        }
        let eig = symmetric_eigen(&a).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 0.5, -1.0]);
    }

    #[test]
    fn random_matrices_satisfy_eigen_contract() {
        let mut rng = StdRng::seed_from_u64(41);
        for &n in &[2usize, 3, 5, 8, 20, 40] {
            let a = random_symmetric(n, &mut rng);
            let eig = symmetric_eigen(&a).unwrap();
            let scale = a.max_abs().max(1.0);
            assert!(
                residual(&a, &eig) < 1e-12 * scale * n as f64,
                "residual too large at n = {n}"
            );
            // Orthonormal columns.
            for c1 in 0..n {
                for c2 in c1..n {
                    let dot: f64 = (0..n)
                        .map(|r| eig.vectors[(r, c1)] * eig.vectors[(r, c2)])
                        .sum();
                    let expect = if c1 == c2 { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-11, "n {n} cols {c1},{c2}: {dot}");
                }
            }
            // Trace identity.
            let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
            let sum: f64 = eig.values.iter().sum();
            assert!((trace - sum).abs() < 1e-10 * scale * n as f64);
            // Sorted descending.
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn clustered_spectrum_is_handled() {
        // Nearly degenerate pair: projector structure must still come out.
        let mut a = Mat::identity(3);
        a[(0, 1)] = 1e-13;
        a[(1, 0)] = 1e-13;
        a[(2, 2)] = 0.5;
        let eig = symmetric_eigen(&a).unwrap();
        assert!(residual(&a, &eig) < 1e-12);
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[2] - 0.5).abs() < 1e-12);
    }
}
