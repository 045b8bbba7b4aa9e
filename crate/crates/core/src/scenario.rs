//! Generators for the benchmark problems: spring-balance weighing, the
//! constrained quadratic mixture model, and a synthetic tall subsampling task.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::DesignProblem;
use crate::polytope::{ConstraintSet, Sense};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Scenario<T: Scalar> {
    pub problem: DesignProblem<T>,
    pub constraints: ConstraintSet<T>,
    /// Symmetry orbits already encoded as equality rows in `constraints`.
    pub orbits: Vec<Vec<usize>>,
}

/// Index of the cube vertex `x` in [`spring_balance`] order.
pub fn vertex_index(x: &[u8]) -> usize {
    x.iter().enumerate().map(|(j, &b)| (b as usize) << j).sum()
}

/// All `2^m` vertices of the unit cube as regressors, with `1ᵀξ = size`.
pub fn spring_balance<T: Scalar>(m: usize, size: u64) -> Result<Scenario<T>> {
    if m == 0 || m > 20 {
        return Err(Error::BadParams(format!("spring balance needs 1 <= m <= 20, got {m}")));
    }
    let n = 1usize << m;
    let rows: Vec<Vec<T>> = (0..n)
        .map(|b| (0..m).map(|j| if (b >> j) & 1 == 1 { T::one() } else { T::zero() }).collect())
        .collect();
    let labels = (0..n)
        .map(|b| (0..m).map(|j| if (b >> j) & 1 == 1 { '1' } else { '0' }).collect())
        .collect();
    let problem = DesignProblem::from_rows(&rows)?
        .with_points(rows.clone())?
        .with_labels(labels)?;
    Ok(Scenario {
        problem,
        constraints: ConstraintSet::simplex(n, T::from_u64(size).expect("size representable")),
        orbits: Vec::new(),
    })
}

/// Mixture of the `j`-vertex designs with total size `size`:
/// `(1 − frac(s))·ζ_⌊s⌋ + frac(s)·ζ_⌊s⌋+1`.
pub fn neighbor_vertex<T: Scalar>(m: usize, s: f64, size: f64) -> Result<Vec<T>> {
    if !(0.0..=m as f64).contains(&s) || m == 0 || m > 20 {
        return Err(Error::BadParams(format!("need 0 <= s <= m, got s = {s}, m = {m}")));
    }
    let lo = s.floor() as usize;
    let frac = s - lo as f64;
    let n = 1usize << m;
    let mut w = vec![T::zero(); n];
    for (j, mass) in [(lo, 1.0 - frac), (lo + 1, frac)] {
        if mass <= 0.0 || j > m {
            continue;
        }
        let count = binomial(m, j);
        for (b, wb) in w.iter_mut().enumerate() {
            if b.count_ones() as usize == j {
                *wb += T::lit(mass * size / count);
            }
        }
    }
    Ok(w)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Seven-point D-optimal design for six items, `N/7` on each point.
pub const SPRING_D_SUPPORT: [[u8; 6]; 7] = [
    [1, 1, 0, 1, 0, 0],
    [0, 0, 1, 1, 1, 0],
    [0, 1, 1, 0, 0, 1],
    [1, 0, 0, 0, 1, 1],
    [1, 1, 1, 0, 1, 0],
    [1, 0, 1, 1, 0, 1],
    [0, 1, 0, 1, 1, 1],
];

/// Ten-point A-optimal design for six items, `N/10` on each point.
pub const SPRING_A_SUPPORT: [[u8; 6]; 10] = [
    [1, 1, 0, 1, 0, 0],
    [1, 0, 1, 1, 0, 0],
    [1, 0, 1, 0, 1, 0],
    [0, 1, 1, 0, 1, 0],
    [0, 1, 0, 1, 1, 0],
    [1, 1, 0, 0, 0, 1],
    [0, 1, 1, 0, 0, 1],
    [0, 0, 1, 1, 0, 1],
    [1, 0, 0, 0, 1, 1],
    [0, 0, 0, 1, 1, 1],
];

/// Uniform weights `size/|support|` on the given cube vertices (six items).
pub fn support_design<T: Scalar>(support: &[[u8; 6]], size: f64) -> Vec<T> {
    let mut w = vec![T::zero(); 64];
    for x in support {
        w[vertex_index(x)] = T::lit(size / support.len() as f64);
    }
    w
}

/// Largest symmetric size compatible with the marginal rows on a grid with
/// `levels` levels per factor; zero when no symmetric design fits.
pub fn scheffe_default_size(levels: usize) -> u64 {
    // k orbits use 3k distinct levels summing to k(levels − 1)
    let mut k = 0u64;
    while {
        let kk = k + 1;
        let need = 3 * kk * (3 * kk - 1) / 2;
        need <= kk * (levels as u64 - 1) && 3 * kk <= levels as u64
    } {
        k += 1;
    }
    3 * k
}

/// Quadratic mixture model on the simplex grid of the given step, with
/// at-most-once marginal rows, cyclic symmetry and `1ᵀξ = size`
/// (default: [`scheffe_default_size`]).
pub fn scheffe<T: Scalar>(step: f64, size: Option<u64>) -> Result<Scenario<T>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::BadParams(format!("step must lie in (0, 1], got {step}")));
    }
    let k = (1.0 / step).round();
    if (k * step - 1.0).abs() > 1e-9 {
        return Err(Error::BadParams(format!("step {step} does not divide 1")));
    }
    let k = k as usize;
    let mut grid = Vec::new();
    for a in 0..=k {
        for b in 0..=(k - a) {
            grid.push([a, b, k - a - b]);
        }
    }
    let n = grid.len();
    let index: HashMap<[usize; 3], usize> = grid.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let kf = k as f64;
    let points: Vec<Vec<T>> = grid
        .iter()
        .map(|g| g.iter().map(|&v| T::lit(v as f64 / kf)).collect())
        .collect();
    let rows: Vec<Vec<T>> = points
        .iter()
        .map(|x| vec![x[0], x[1], x[2], x[0] * x[1], x[0] * x[2], x[1] * x[2]])
        .collect();
    let labels = grid
        .iter()
        .map(|g| format!("({}, {}, {})", g[0] as f64 / kf, g[1] as f64 / kf, g[2] as f64 / kf))
        .collect();
    let problem = DesignProblem::from_rows(&rows)?.with_points(points)?.with_labels(labels)?;

    let mut cs = ConstraintSet::new(n);
    for factor in 0..3 {
        for level in 0..=k {
            let coeffs: Vec<(usize, T)> = grid
                .iter()
                .enumerate()
                .filter(|(_, g)| g[factor] == level)
                .map(|(i, _)| (i, T::one()))
                .collect();
            if !coeffs.is_empty() {
                cs.add_row(coeffs, Sense::Le, T::one())?;
            }
        }
    }
    let size = size.unwrap_or_else(|| scheffe_default_size(k + 1).max(3));
    cs.add_size(T::from_u64(size).expect("size representable"));

    let mut seen = vec![false; n];
    let mut orbits = Vec::new();
    for (i, g) in grid.iter().enumerate() {
        if seen[i] {
            continue;
        }
        let mut orbit = vec![i];
        seen[i] = true;
        let mut cur = *g;
        loop {
            cur = [cur[1], cur[2], cur[0]];
            let j = index[&cur];
            if j == i {
                break;
            }
            if !seen[j] {
                seen[j] = true;
                orbit.push(j);
            }
        }
        orbits.push(orbit);
    }
    let constraints = cs.add_symmetry_orbits(&orbits)?;
    Ok(Scenario {
        problem,
        constraints,
        orbits,
    })
}

#[derive(Debug, Clone)]
pub struct TallParams {
    pub n: usize,
    /// Number of regressors: intercept, quality, log price, then extra covariates.
    pub m: usize,
    pub strata: usize,
    pub seed: u64,
}

impl Default for TallParams {
    fn default() -> Self {
        Self {
            n: 20000,
            m: 3,
            strata: 10,
            seed: 0,
        }
    }
}

/// Synthetic analogue of constrained subsampling from a large catalogue:
/// exactly one item per stratum, a budget on total price, a lower bound on
/// average quality, and every item used at most once.
pub fn synthetic_tall<T: Scalar>(params: &TallParams) -> Result<Scenario<T>> {
    let TallParams { n, m, strata, seed } = *params;
    if m < 3 {
        return Err(Error::BadParams(format!("synthetic tall needs m >= 3, got {m}")));
    }
    if strata == 0 || n < 2 * strata {
        return Err(Error::BadParams(format!("need n >= 2·strata, got n = {n}, strata = {strata}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut quality = Vec::with_capacity(n);
    let mut price = Vec::with_capacity(n);
    let mut stratum = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let z: f64 = normal.sample(&mut rng);
        let q = (88.0 + 3.0 * z).clamp(80.0, 100.0);
        let lp = 3.3 + 0.12 * (q - 88.0) + 0.5 * normal.sample(&mut rng);
        let s = if i < strata { i } else { rng.random_range(0..strata) };
        let mut f = vec![1.0, (q - 88.0) / 3.0, lp - 3.3];
        for _ in 3..m {
            f.push(normal.sample(&mut rng));
        }
        quality.push(q);
        price.push(lp.exp());
        stratum.push(s);
        points.push(vec![T::lit(q), T::lit(lp.exp())]);
        rows.push(f.into_iter().map(T::lit).collect::<Vec<T>>());
    }
    let labels = (0..n).map(|i| format!("item{i}/s{}", stratum[i])).collect();
    let problem = DesignProblem::from_rows(&rows)?.with_points(points)?.with_labels(labels)?;

    let mut cs = ConstraintSet::new(n);
    cs.set_upper_all(T::one());
    for s in 0..strata {
        let coeffs = (0..n).filter(|&i| stratum[i] == s).map(|i| (i, T::one())).collect();
        cs.add_row(coeffs, Sense::Eq, T::one())?;
    }
    let budget = strata as f64 * 3.3f64.exp();
    cs.add_row(
        price.iter().enumerate().map(|(i, &p)| (i, T::lit(p))).collect(),
        Sense::Le,
        T::lit(budget),
    )?;
    let min_avg = 89.0;
    cs.add_ge_row(
        quality.iter().enumerate().map(|(i, &q)| (i, T::lit(q))).collect(),
        T::lit(min_avg * strata as f64),
    )?;
    Ok(Scenario {
        problem,
        constraints: cs,
        orbits: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{efficiency, Criterion};
    use crate::symlin::SymMatrix;

    #[test]
    fn sizes() {
        let sb = spring_balance::<f64>(6, 7).unwrap();
        assert_eq!((sb.problem.n(), sb.problem.m()), (64, 6));
        let s = scheffe::<f64>(0.025, None).unwrap();
        assert_eq!((s.problem.n(), s.problem.m()), (861, 6));
        let s = scheffe::<f64>(0.5, None).unwrap();
        assert_eq!(s.problem.n(), 6);
        let mut orbits: Vec<Vec<usize>> = s.orbits.iter().map(|o| {
            let mut o = o.clone();
            o.sort();
            o
        }).collect();
        orbits.sort();
        assert_eq!(orbits.len(), 2);
        assert!(orbits.iter().all(|o| o.len() == 3));
        assert!(scheffe::<f64>(0.3, None).is_err());
        assert!(spring_balance::<f64>(21, 1).is_err());
    }

    #[test]
    fn default_sizes_respect_level_sums() {
        assert_eq!(scheffe_default_size(11), 6);
        assert_eq!(scheffe_default_size(41), 27);
        assert_eq!(scheffe_default_size(3), 0);
    }

    #[test]
    fn table_designs_are_optimal() {
        let sb = spring_balance::<f64>(6, 7).unwrap();
        let n = 7.0;
        let md = sb.problem.info_from_weights(&support_design(&SPRING_D_SUPPORT, n)).unwrap();
        let target = SymMatrix::from_lower_fn(6, |i, j| if i == j { 4.0 * n / 7.0 } else { 2.0 * n / 7.0 });
        assert!(md.max_abs_diff(&target) < 1e-12);
        let ma = sb.problem.info_from_weights(&support_design(&SPRING_A_SUPPORT, 10.0)).unwrap();
        let target = SymMatrix::from_lower_fn(6, |i, j| if i == j { 5.0 } else { 2.0 });
        assert!(ma.max_abs_diff(&target) < 1e-12);
        let nv = neighbor_vertex::<f64>(6, 24.0 / 7.0, n).unwrap();
        assert_eq!(nv.iter().filter(|&&w| w > 0.0).count(), 35);
        let mn = sb.problem.info_from_weights(&nv).unwrap();
        assert!((efficiency(&Criterion::d(), &mn, &md).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(neighbor_vertex::<f64>(6, 3.0, 1.0).unwrap().iter().filter(|&&w| w > 0.0).count(), 20);
    }

    #[test]
    fn tall_is_deterministic_and_feasible() {
        let p = TallParams { n: 2000, ..Default::default() };
        let a = synthetic_tall::<f64>(&p).unwrap();
        let b = synthetic_tall::<f64>(&p).unwrap();
        assert_eq!(a.constraints, b.constraints);
        assert_eq!(a.problem.regressors(), b.problem.regressors());
        a.constraints.check_feasible().unwrap();
    }
}
