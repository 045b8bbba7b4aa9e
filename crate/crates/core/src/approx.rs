//! Optimal approximate designs and concave-QP relaxations by Frank–Wolfe.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::criteria::{phi, phi_gradient, Criterion};
use crate::error::{Error, Result};
use crate::model::{Design, DesignProblem};
use crate::polytope::{Basis, ConstraintSet, LpShape, LpSolver};
use crate::quadmodel::{dot, norm2, QuadModel};
use crate::scalar::Scalar;
use crate::symlin::{vech_doubled, SymMatrix};

#[derive(Debug, Clone)]
pub struct AdOptions {
    /// Stop when `(max gᵀs − gᵀξ)/gᵀξ` falls below this.
    pub gap_tol: f64,
    pub max_iter: usize,
    pub start_attempts: usize,
    pub seed: u64,
    pub away_steps: bool,
}

impl Default for AdOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            max_iter: 5000,
            start_attempts: 50,
            seed: 0,
            away_steps: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdSolution<T: Scalar> {
    pub design: Design<T>,
    pub info: SymMatrix<T>,
    pub value: T,
    /// Equivalence gap, on the scale of [`equivalence_gap`].
    pub gap: T,
    pub iterations: usize,
    pub converged: bool,
    /// Criterion value after every iteration.
    pub trace: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct QpOptions {
    /// Stop when the duality gap falls below `gap_tol·max(|φ|, 1)`.
    pub gap_tol: f64,
    /// Looser gap accepted once the value already exceeds the cutoff.
    pub branch_tol: f64,
    pub max_iter: usize,
    /// Move weight directly from the worst active vertex to the new one.
    pub pairwise: bool,
    /// Away steps, used when `pairwise` is off.
    pub away_steps: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            branch_tol: 1e-4,
            max_iter: 20000,
            pairwise: true,
            away_steps: true,
        }
    }
}

#[derive(Clone, Copy)]
enum Step {
    Toward,
    Away(usize),
    Pairwise(usize),
}

#[derive(Debug, Clone)]
pub struct QpRelaxation<T> {
    pub x: Vec<T>,
    pub value: T,
    /// `φ(x) + gap`, a certified bound on the relaxed (hence integer) optimum.
    pub upper_bound: T,
    pub iterations: usize,
    /// State for warm-starting a nearby relaxation.
    pub warm: QpWarmStart<T>,
}

/// Final LP basis and active vertices of a relaxation. A relaxation over
/// the same rows with other bounds restarts from the vertices that still
/// satisfy its bounds.
#[derive(Debug, Clone)]
pub struct QpWarmStart<T> {
    basis: Option<Basis>,
    verts: Vec<Vertex<T, QpData<T>>>,
}

impl<T: Scalar> QpWarmStart<T> {
    pub fn basis(&self) -> Option<&Basis> {
        self.basis.as_ref()
    }

    fn feasible_vertices(&self, lower: &[T], upper: &[T]) -> Vec<Vertex<T, QpData<T>>> {
        let tol = T::lit(1e-9);
        let raised: Vec<usize> = (0..lower.len()).filter(|&j| lower[j] > tol).collect();
        let mut out: Vec<_> = self
            .verts
            .iter()
            .filter(|v| {
                let inside = v.idx.iter().zip(&v.val).all(|(&j, &x)| x >= lower[j] - tol && x <= upper[j] + tol);
                inside
                    && raised.iter().all(|&j| match v.idx.binary_search(&j) {
                        Ok(p) => v.val[p] >= lower[j] - tol,
                        Err(_) => false,
                    })
            })
            .cloned()
            .collect();
        let total = out.iter().fold(T::zero(), |s, v| s + v.weight);
        if total > T::zero() {
            for v in &mut out {
                v.weight /= total;
            }
        }
        out
    }
}

/// Sparse polytope vertex with cached objective data.
#[derive(Debug, Clone)]
struct Vertex<T, C> {
    idx: Vec<usize>,
    val: Vec<T>,
    weight: T,
    data: C,
}

fn sparsify<T: Scalar>(x: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut idx = Vec::new();
    let mut val = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if v.abs() > T::lit(1e-12) {
            idx.push(i);
            val.push(v);
        }
    }
    (idx, val)
}

fn sparse_dot<T: Scalar>(g: &[T], idx: &[usize], val: &[T]) -> T {
    idx.iter().zip(val).fold(T::zero(), |s, (&i, &v)| s + g[i] * v)
}

struct ActiveSet<T, C> {
    verts: Vec<Vertex<T, C>>,
}

impl<T: Scalar, C: Clone> ActiveSet<T, C> {
    fn find(&self, idx: &[usize], val: &[T]) -> Option<usize> {
        self.verts.iter().position(|v| {
            v.idx == idx
                && v.val
                    .iter()
                    .zip(val)
                    .all(|(&a, &b)| (a - b).abs() <= T::lit(1e-9) * (T::one() + a.abs()))
        })
    }

    /// `λ ← (1−γ)λ`, then `γ` added to the vertex `(idx, val)`.
    fn toward(&mut self, idx: Vec<usize>, val: Vec<T>, data: impl FnOnce() -> C, gamma: T) {
        for v in &mut self.verts {
            v.weight *= T::one() - gamma;
        }
        match self.find(&idx, &val) {
            Some(j) => self.verts[j].weight += gamma,
            None => self.verts.push(Vertex {
                idx,
                val,
                weight: gamma,
                data: data(),
            }),
        }
        self.prune();
    }

    /// Moves weight `γ` from vertex `a` to the vertex `(idx, val)`.
    fn pairwise(&mut self, a: usize, idx: Vec<usize>, val: Vec<T>, data: impl FnOnce() -> C, gamma: T) {
        self.verts[a].weight -= gamma;
        match self.find(&idx, &val) {
            Some(j) => self.verts[j].weight += gamma,
            None => self.verts.push(Vertex {
                idx,
                val,
                weight: gamma,
                data: data(),
            }),
        }
        self.prune();
    }

    /// `λ ← (1+γ)λ`, then `γ` taken away from vertex `a`.
    fn away(&mut self, a: usize, gamma: T) {
        for v in &mut self.verts {
            v.weight *= T::one() + gamma;
        }
        self.verts[a].weight -= gamma;
        self.prune();
    }

    fn prune(&mut self) {
        self.verts.retain(|v| v.weight > T::lit(1e-14));
        let total = self.verts.iter().fold(T::zero(), |s, v| s + v.weight);
        for v in &mut self.verts {
            v.weight /= total;
        }
    }

    fn dense(&self, n: usize) -> Vec<T> {
        let mut x = vec![T::zero(); n];
        for v in &self.verts {
            for (&i, &val) in v.idx.iter().zip(&v.val) {
                x[i] += v.weight * val;
            }
        }
        x
    }
}

fn golden_section<T: Scalar>(f: impl Fn(T) -> T, upper: T) -> T {
    let r = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut lo, mut hi) = (T::zero(), upper);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..40 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    let (mut best, mut fbest) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    let fu = f(upper);
    if fu >= fbest {
        best = upper;
        fbest = fu;
    }
    if f(T::zero()) > fbest {
        best = T::zero();
    }
    best
}

/// Gradient of `ξ ↦ Φ(M(ξ))`: `g_i = tr(∇Φ(M) H_i)`.
fn design_gradient<T: Scalar>(hm: &DMatrix<T>, grad: &SymMatrix<T>) -> Vec<T> {
    let w: DVector<T> = vech_doubled(grad);
    (hm * w).iter().copied().collect()
}

fn info_of<T: Scalar>(problem: &DesignProblem<T>, idx: &[usize], val: &[T]) -> SymMatrix<T> {
    let mut m = SymMatrix::zeros(problem.m());
    for (&i, &v) in idx.iter().zip(val) {
        m.axpy(v, &problem.elementary()[i]);
    }
    m
}

/// Optimal approximate design of `c` over the relaxation of `cs`.
pub fn solve_ad<T: Scalar>(
    problem: &DesignProblem<T>,
    c: &Criterion<T>,
    cs: &ConstraintSet<T>,
    opts: &AdOptions,
) -> Result<AdSolution<T>> {
    let n = problem.n();
    if cs.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: cs.n() });
    }
    let mut lp = LpSolver::new(cs)?;
    let hm = problem.vech_matrix();
    let mf = T::from_usize_lossy(problem.m());
    let tol = T::lit(T::SINGULAR_TOL);

    // random vertices until their barycenter is nonsingular
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut active: ActiveSet<T, SymMatrix<T>> = ActiveSet { verts: Vec::new() };
    let mut started = false;
    for attempt in 0..opts.start_attempts.max(1) {
        let obj: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect();
        let sol = lp.maximize(&obj)?;
        let (idx, val) = sparsify(&sol.x);
        let k = T::from_usize_lossy(attempt + 1);
        active.toward(idx.clone(), val.clone(), || info_of(problem, &idx, &val), T::one() / k);
        let m = active
            .verts
            .iter()
            .fold(SymMatrix::zeros(problem.m()), |mut acc, v| {
                acc.axpy(v.weight, &v.data);
                acc
            });
        if m.is_nonsingular(tol) {
            started = true;
            break;
        }
    }
    if !started {
        return Err(Error::SingularStart {
            attempts: opts.start_attempts,
        });
    }

    let current_info = |active: &ActiveSet<T, SymMatrix<T>>| {
        active.verts.iter().fold(SymMatrix::zeros(problem.m()), |mut acc, v| {
            acc.axpy(v.weight, &v.data);
            acc
        })
    };

    let mut m = current_info(&active);
    let mut value = phi(c, &m);
    let mut trace = vec![value];
    let mut rel_gap = T::infinity();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let grad = phi_gradient(c, &m)?;
        let g = design_gradient(&hm, &grad);
        let gx = active
            .verts
            .iter()
            .fold(T::zero(), |s, v| s + v.weight * sparse_dot(&g, &v.idx, &v.val));
        let s = lp.maximize(&g)?;
        let fw_gap = s.value - gx;
        rel_gap = fw_gap / gx.abs();
        if rel_gap <= T::lit(opts.gap_tol) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut away = None;
        if opts.away_steps && active.verts.len() > 1 {
            let (a, ga) = active
                .verts
                .iter()
                .enumerate()
                .map(|(j, v)| (j, sparse_dot(&g, &v.idx, &v.val)))
                .fold((0, T::infinity()), |acc, x| if x.1 < acc.1 { x } else { acc });
            if gx - ga > fw_gap {
                away = Some(a);
            }
        }
        match away {
            Some(a) => {
                let lam = active.verts[a].weight;
                let gmax = lam / (T::one() - lam);
                let dir = m.sub(&active.verts[a].data);
                let gamma = golden_section(|x| phi(c, &m.add(&dir.scale(x))), gmax);
                if gamma <= T::zero() {
                    break;
                }
                active.away(a, gamma);
            }
            None => {
                let (idx, val) = sparsify(&s.x);
                let ms = info_of(problem, &idx, &val);
                let dir = ms.sub(&m);
                let gamma = golden_section(|x| phi(c, &m.add(&dir.scale(x))), T::one());
                if gamma <= T::zero() {
                    break;
                }
                active.toward(idx, val, || ms, gamma);
            }
        }
        m = current_info(&active);
        value = phi(c, &m);
        trace.push(value);
    }
    let x = active.dense(n);
    let info = problem.info_from_weights(&x)?;
    let value = phi(c, &info);
    Ok(AdSolution {
        design: Design::approximate(x.iter().map(|v| v.max(T::zero())).collect())?,
        info,
        value,
        gap: mf * rel_gap.max(T::zero()),
        iterations,
        converged,
        trace,
    })
}

/// Normalized first-order optimality gap `m·(max_{s∈P} gᵀs − gᵀξ)/gᵀξ`, where
/// `g_i = tr(∇Φ(M(ξ)) H_i)`. Zero exactly at an optimal approximate design.
pub fn equivalence_gap<T: Scalar>(
    problem: &DesignProblem<T>,
    c: &Criterion<T>,
    xi: &[T],
    cs: &ConstraintSet<T>,
) -> Result<T> {
    let m = problem.info_from_weights(xi)?;
    let grad = phi_gradient(c, &m)?;
    let g = design_gradient(&problem.vech_matrix(), &grad);
    let gx = dot(&g, xi);
    let best = LpSolver::new(cs)?.maximize(&g)?.value;
    Ok(T::from_usize_lossy(problem.m()) * (best - gx) / gx.abs())
}

/// Per-vertex cache for the QP: `hᵀv` and `Sᵀv`.
#[derive(Debug, Clone)]
struct QpData<T> {
    lin: T,
    sv: Vec<T>,
}

fn qp_data<T: Scalar>(q: &QuadModel<T>, idx: &[usize], val: &[T]) -> QpData<T> {
    let mut sv = vec![T::zero(); q.t()];
    let mut lin = T::zero();
    for (&i, &v) in idx.iter().zip(val) {
        lin += q.h()[i] * v;
        for (acc, &s) in sv.iter_mut().zip(q.s_row(i)) {
            *acc += v * s;
        }
    }
    QpData { lin, sv }
}

/// Maximizes `φ(ξ) = hᵀξ − |Sᵀξ|²` over the relaxation of `cs` with the given bounds.
pub fn solve_relaxed_qp<T: Scalar>(
    q: &QuadModel<T>,
    cs: &ConstraintSet<T>,
    lower: &[T],
    upper: &[T],
    opts: &QpOptions,
) -> Result<QpRelaxation<T>> {
    solve_relaxed_qp_with_cutoff(q, &LpShape::new(cs)?, lower, upper, opts, T::neg_infinity(), None)
}

/// As [`solve_relaxed_qp`] over a prepared [`LpShape`], optionally warm-started
/// from `warm`; stops as soon as the certified bound drops to `cutoff`.
pub fn solve_relaxed_qp_with_cutoff<T: Scalar>(
    q: &QuadModel<T>,
    shape: &LpShape<T>,
    lower: &[T],
    upper: &[T],
    opts: &QpOptions,
    cutoff: T,
    warm: Option<&QpWarmStart<T>>,
) -> Result<QpRelaxation<T>> {
    let n = q.n();
    if shape.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: shape.n() });
    }
    let mut lp = shape.solver(lower, upper, warm.and_then(QpWarmStart::basis))?;
    let two = T::lit(2.0);
    if q.t() == 0 {
        let first = lp.maximize(q.h())?;
        return Ok(QpRelaxation {
            value: first.value,
            upper_bound: first.value,
            x: first.x,
            iterations: 0,
            warm: QpWarmStart {
                basis: lp.basis(),
                verts: Vec::new(),
            },
        });
    }
    let kept = warm.map(|w| w.feasible_vertices(lower, upper)).unwrap_or_default();
    let verts = if kept.is_empty() {
        let first = lp.maximize(q.h())?;
        let (idx, val) = sparsify(&first.x);
        let data = qp_data(q, &idx, &val);
        vec![Vertex {
            idx,
            val,
            weight: T::one(),
            data,
        }]
    } else {
        kept
    };
    let mut active = ActiveSet { verts };
    let state = |active: &ActiveSet<T, QpData<T>>| {
        let mut sv = vec![T::zero(); q.t()];
        let mut lin = T::zero();
        for v in &active.verts {
            lin += v.weight * v.data.lin;
            for (acc, &s) in sv.iter_mut().zip(&v.data.sv) {
                *acc += v.weight * s;
            }
        }
        (lin, sv)
    };
    let mut iterations = 0;
    let mut upper_bound = T::infinity();
    let mut value;
    let mut g = vec![T::zero(); n];
    loop {
        let (lin, sv) = state(&active);
        value = lin - norm2(&sv);
        q.gradient_into(&sv, &mut g);
        let gx = lin - two * norm2(&sv);
        let s = lp.maximize(&g)?;
        let fw_gap = (s.value - gx).max(T::zero());
        upper_bound = upper_bound.min(value + fw_gap);
        let scale = value.abs().max(T::one());
        let settled = value > cutoff && fw_gap <= T::lit(opts.branch_tol) * scale;
        if fw_gap <= T::lit(opts.gap_tol) * scale || upper_bound <= cutoff || settled || iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let (a, ga) = active
            .verts
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.data.lin - two * dot(&v.data.sv, &sv)))
            .fold((0, T::infinity()), |acc, x| if x.1 < acc.1 { x } else { acc });
        let multi = active.verts.len() > 1;
        let step = if opts.pairwise && multi {
            Step::Pairwise(a)
        } else if opts.away_steps && multi && gx - ga > fw_gap {
            Step::Away(a)
        } else {
            Step::Toward
        };
        let (sidx, sval) = sparsify(&s.x);
        let sdata = qp_data(q, &sidx, &sval);
        let (slope, dsv, gmax) = match step {
            Step::Pairwise(a) => {
                let v = &active.verts[a];
                let dsv: Vec<T> = sdata.sv.iter().zip(&v.data.sv).map(|(&x, &y)| x - y).collect();
                (s.value - ga, dsv, v.weight)
            }
            Step::Away(a) => {
                let v = &active.verts[a];
                let dsv: Vec<T> = sv.iter().zip(&v.data.sv).map(|(&x, &y)| x - y).collect();
                (gx - ga, dsv, v.weight / (T::one() - v.weight))
            }
            Step::Toward => {
                let dsv: Vec<T> = sdata.sv.iter().zip(&sv).map(|(&x, &y)| x - y).collect();
                (fw_gap, dsv, T::one())
            }
        };
        let curv = norm2(&dsv);
        let gamma = if curv > T::zero() {
            (slope / (two * curv)).min(gmax)
        } else {
            gmax
        };
        if gamma <= T::zero() {
            break;
        }
        match step {
            Step::Pairwise(a) => active.pairwise(a, sidx, sval, || sdata, gamma),
            Step::Away(a) => active.away(a, gamma),
            Step::Toward => active.toward(sidx, sval, || sdata, gamma),
        }
    }
    let x = active.dense(n);
    let value = q.phi_quad(&x)?;
    Ok(QpRelaxation {
        x,
        value,
        upper_bound: upper_bound.max(value),
        iterations,
        warm: QpWarmStart {
            basis: lp.basis(),
            verts: active.verts,
        },
    })
}
