//! Helpers shared by the integration tests: random fixtures and oracles that
//! do not go through the library's own linear algebra.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sarrs::DenseMatrix;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng)).unwrap()
}

/// Random matrix with orthonormal columns (Gram-Schmidt on a Gaussian draw).
pub fn orthonormal(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let g = gaussian(rows, cols, seed).into_dmatrix();
    let mut q = DMatrix::<f64>::zeros(rows, cols);
    for j in 0..cols {
        let mut v = g.column(j).into_owned();
        for _ in 0..2 {
            for k in 0..j {
                let d = q.column(k).dot(&v);
                v -= q.column(k) * d;
            }
        }
        let n = v.norm();
        q.set_column(j, &(v / n));
    }
    DenseMatrix::from_dmatrix(q).unwrap()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Group lasso objective `‖W − XB‖²/2 + λ Σ‖B_j‖`, computed entrywise.
pub fn group_lasso_objective(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64) -> f64 {
    let r = w - x * b;
    let fit = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    let pen: f64 = (0..b.nrows()).map(|j| b.row(j).norm()).sum();
    fit + lambda * pen
}

/// Accelerated proximal gradient on the group lasso; returns the final
/// iterate and the best objective seen.
pub fn fista_group_lasso(x: &DenseMatrix, w: &DenseMatrix, lambda: f64, iters: usize) -> (DMatrix<f64>, f64) {
    let x = x.as_dmatrix();
    let w = w.as_dmatrix();
    let (p, r) = (x.ncols(), w.ncols());
    let xtx = x.transpose() * x;
    let xtw = x.transpose() * w;
    let lip = jacobi_eigenvalues(&xtx).last().copied().unwrap().max(1e-12);
    let step = 1.0 / lip;
    let prox = |v: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = v.clone();
        for j in 0..p {
            let n = v.row(j).norm();
            let keep = if n > 0.0 { (1.0 - step * lambda / n).max(0.0) } else { 0.0 };
            for k in 0..r {
                out[(j, k)] = v[(j, k)] * keep;
            }
        }
        out
    };
    let mut b = DMatrix::<f64>::zeros(p, r);
    let mut z = b.clone();
    let mut t = 1.0f64;
    let mut best = group_lasso_objective(x, w, &b, lambda);
    for it in 0..iters {
        let grad = &xtx * &z - &xtw;
        let next = prox(&(&z - grad * step));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &b) * ((t - 1.0) / t_next);
        b = next;
        t = t_next;
        if it % 64 == 0 || it + 1 == iters {
            best = best.min(group_lasso_objective(x, w, &b, lambda));
        }
    }
    (b, best)
}
