#![allow(dead_code)]

use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use ::aqua::{DesignProblem, SymMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

/// Timed tests hold this so they do not share the CPU with each other.
pub fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn line(no: usize, what: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {no} ({what}): {} {detail}", if pass { "PASS" } else { "FAIL" });
}

/// Closed-form optimal matrices for weighing six items with `N` trials.
pub fn spring_mstar(a_optimal: bool, size: f64) -> SymMatrix<f64> {
    let (d, o) = if a_optimal {
        (size / 2.0, size / 5.0)
    } else {
        (4.0 * size / 7.0, 2.0 * size / 7.0)
    };
    SymMatrix::from_lower_fn(6, |i, j| if i == j { d } else { o })
}

pub fn relative_frobenius(a: &SymMatrix<f64>, b: &SymMatrix<f64>) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

/// `det^{1/m}` or `(tr M⁻¹/m)⁻¹` by Cholesky; zero when not positive definite.
pub fn positive_value(m: &DMatrix<f64>, a_optimal: bool) -> f64 {
    let k = m.nrows() as f64;
    let Some(ch) = m.clone().cholesky() else { return 0.0 };
    if a_optimal {
        k / ch.inverse().trace()
    } else {
        let l = ch.l();
        let logdet: f64 = (0..m.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum();
        (logdet / k).exp()
    }
}

fn regressor_rows(problem: &DesignProblem<f64>) -> Vec<DVector<f64>> {
    let f = problem.regressors().expect("single-response model");
    (0..f.nrows()).map(|i| f.row(i).transpose()).collect()
}

/// Best value over `restarts` random starts of point-by-point exchange with
/// the true criterion, for designs of `size` trials with replication.
pub fn exchange_best(problem: &DesignProblem<f64>, a_optimal: bool, size: usize, restarts: usize, seed: u64) -> f64 {
    let rows = regressor_rows(problem);
    let n = rows.len();
    let m = rows[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let info = |pts: &[usize]| {
        let mut acc = DMatrix::zeros(m, m);
        for &i in pts {
            acc.ger(1.0, &rows[i], &rows[i], 1.0);
        }
        acc
    };
    let mut best = 0.0f64;
    for _ in 0..restarts {
        let mut pts: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
        let mut cur = positive_value(&info(&pts), a_optimal);
        loop {
            let mut improved = false;
            for k in 0..size {
                let mut base = info(&pts);
                base.ger(-1.0, &rows[pts[k]], &rows[pts[k]], 1.0);
                for l in 0..n {
                    let mut cand = base.clone();
                    cand.ger(1.0, &rows[l], &rows[l], 1.0);
                    let v = positive_value(&cand, a_optimal);
                    if v > cur * (1.0 + 1e-12) {
                        cur = v;
                        pts[k] = l;
                        base = info(&pts);
                        base.ger(-1.0, &rows[pts[k]], &rows[pts[k]], 1.0);
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best = best.max(cur);
    }
    best
}

pub fn random_regressors(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DesignProblem<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    DesignProblem::from_rows(&rows).unwrap()
}

/// Strictly positive weights summing to `size`.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, size: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x * size / s).collect()
}
