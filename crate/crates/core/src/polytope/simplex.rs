//! Bounded-variable primal simplex in revised form.
//!
//! The constraint matrix is kept column-wise and sparse; the basis inverse is
//! a dense `k×k` matrix updated by elementary row operations and rebuilt
//! periodically. Columns are the structural variables, one slack per row
//! (fixed at zero for equality rows) and, when phase 1 needs them, one
//! artificial per row. The solver keeps its basis between calls so a sequence
//! of objectives over the same polytope only pays for the pivots that the new
//! objective requires.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{ConstraintSet, Sense};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 50;
const REFRESH_AFTER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

enum Outcome {
    Optimal,
    Unbounded { entering: usize, dir: f64 },
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Maximize `cost`; basic variables stay within bounds.
    Objective,
    /// Reduce the total bound violation of the basic variables.
    Repair,
}

fn check_bounds<T: Scalar>(n: usize, lower: &[T], upper: &[T]) -> Result<()> {
    if lower.len() != n || upper.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: lower.len().min(upper.len()),
        });
    }
    for j in 0..n {
        if !lower[j].is_finite() {
            return Err(Error::BadParams(format!("variable {j} needs a finite lower bound")));
        }
        if lower[j] > upper[j] + T::lit(FEAS_TOL) {
            return Err(Error::Infeasible);
        }
    }
    Ok(())
}

/// Compressed columns of the row-scaled constraint matrix.
#[derive(Debug, Clone)]
struct Columns<T> {
    start: Vec<usize>,
    row: Vec<usize>,
    val: Vec<T>,
}

impl<T: Scalar> Columns<T> {
    #[inline]
    fn entries(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.start[j]..self.start[j + 1];
        self.row[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }
}

#[derive(Debug)]
struct Rows<T> {
    cols: Columns<T>,
    /// The same entries row by row: `(column, value)` per row.
    by_row: Vec<Vec<(usize, T)>>,
    rhs: Vec<T>,
    fixed_slack: Vec<bool>,
}

/// Rows scaled to unit max-coefficient, stored by column, with empty rows
/// checked and dropped.
fn scaled_rows<T: Scalar>(cs: &ConstraintSet<T>) -> Result<Rows<T>> {
    let n = cs.n();
    let mut entries: Vec<(usize, usize, T)> = Vec::new();
    let mut rhs = Vec::new();
    let mut fixed_slack = Vec::new();
    for row in cs.rows() {
        let scale = row.coeffs.iter().fold(T::zero(), |m, &(_, v)| m.max(v.abs()));
        if scale == T::zero() {
            let ok = match row.sense {
                Sense::Le => row.rhs >= -T::lit(FEAS_TOL),
                Sense::Eq => row.rhs.abs() <= T::lit(FEAS_TOL),
            };
            if !ok {
                return Err(Error::Infeasible);
            }
            continue;
        }
        let i = rhs.len();
        for &(j, v) in &row.coeffs {
            if v != T::zero() {
                entries.push((j, i, v / scale));
            }
        }
        rhs.push(row.rhs / scale);
        fixed_slack.push(row.sense == Sense::Eq);
    }
    let mut by_row = vec![Vec::new(); rhs.len()];
    for &(j, i, v) in &entries {
        by_row[i].push((j, v));
    }
    entries.sort_by_key(|&(j, i, _)| (j, i));
    let mut start = vec![0; n + 1];
    for &(j, _, _) in &entries {
        start[j + 1] += 1;
    }
    for j in 0..n {
        start[j + 1] += start[j];
    }
    Ok(Rows {
        cols: Columns {
            start,
            row: entries.iter().map(|e| e.1).collect(),
            val: entries.iter().map(|e| e.2).collect(),
        },
        by_row,
        rhs,
        fixed_slack,
    })
}

/// Basis of a solved program: enough to restart on the same rows with other bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    basic: Vec<usize>,
    at_upper: Vec<usize>,
}

/// Optimal vertex of a linear program.
#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
}

/// Row-scaled constraint matrix of a polytope, shared by every solver built
/// from it; solvers differ only in their bounds and basis.
#[derive(Debug, Clone)]
pub struct LpShape<T> {
    n: usize,
    rows: Arc<Rows<T>>,
}

impl<T: Scalar> LpShape<T> {
    pub fn new(cs: &ConstraintSet<T>) -> Result<Self> {
        Ok(Self {
            n: cs.n(),
            rows: Arc::new(scaled_rows(cs)?),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solver with the given bounds and a feasible basis. With `warm`, starts
    /// from that basis and repairs primal feasibility by minimizing the sum of
    /// infeasibilities, falling back to a cold start when the basis is
    /// singular or the repair gives up.
    pub fn solver(&self, lower: &[T], upper: &[T], warm: Option<&Basis>) -> Result<LpSolver<T>> {
        check_bounds(self.n, lower, upper)?;
        if let Some(basis) = warm {
            match self.warm(lower, upper, basis) {
                Ok(Some(s)) => return Ok(s),
                Ok(None) | Err(Error::Infeasible) | Err(Error::SingularMatrix { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        self.cold(lower, upper)
    }

    fn skeleton(&self, lower: &[T], upper: &[T], artificials: Vec<(usize, T)>) -> LpSolver<T> {
        let n = self.n;
        let k = self.rows.rhs.len();
        let ncols = n + k + artificials.len();
        let mut lo = lower.to_vec();
        let mut up = upper.to_vec();
        for &f in &self.rows.fixed_slack {
            lo.push(T::zero());
            up.push(if f { T::zero() } else { T::infinity() });
        }
        for _ in &artificials {
            lo.push(T::zero());
            up.push(T::infinity());
        }
        LpSolver {
            k,
            n,
            ncols,
            shape: Arc::clone(&self.rows),
            artificials,
            binv: vec![T::zero(); k * k],
            beta: vec![T::zero(); k],
            basis: vec![0; k],
            status: vec![Status::Lower; ncols],
            lo,
            up,
            cost: vec![T::zero(); ncols],
            since_refactor: 0,
            pivots: 0,
            y: vec![T::zero(); k],
            alpha: vec![T::zero(); k],
            sign: vec![T::zero(); k],
            d: vec![T::zero(); ncols],
        }
    }

    fn cold(&self, lower: &[T], upper: &[T]) -> Result<LpSolver<T>> {
        let n = self.n;
        let rows = &*self.rows;
        let k = rows.rhs.len();
        let mut resid = rows.rhs.clone();
        for j in 0..n {
            if lower[j] != T::zero() {
                for (i, v) in rows.cols.entries(j) {
                    resid[i] -= v * lower[j];
                }
            }
        }
        let mut artificials = Vec::new();
        let mut art_of_row = vec![None; k];
        for i in 0..k {
            if rows.fixed_slack[i] || resid[i] < T::zero() {
                let sign = if resid[i] < T::zero() { -T::one() } else { T::one() };
                art_of_row[i] = Some(artificials.len());
                artificials.push((i, sign));
            }
        }
        let mut solver = self.skeleton(lower, upper, artificials);
        for i in 0..k {
            let (col, sign) = match art_of_row[i] {
                Some(a) => (n + k + a, solver.artificials[a].1),
                None => (n + i, T::one()),
            };
            solver.basis[i] = col;
            solver.status[col] = Status::Basic;
            solver.binv[i * k + i] = sign;
            solver.beta[i] = resid[i] * sign;
        }
        solver.phase_one()?;
        Ok(solver)
    }

    fn warm(&self, lower: &[T], upper: &[T], basis: &Basis) -> Result<Option<LpSolver<T>>> {
        let k = self.rows.rhs.len();
        let limit = self.n + k;
        if basis.basic.len() != k || basis.basic.iter().chain(&basis.at_upper).any(|&j| j >= limit) {
            return Ok(None);
        }
        let mut solver = self.skeleton(lower, upper, Vec::new());
        for &j in &basis.at_upper {
            if solver.up[j].is_finite() {
                solver.status[j] = Status::Upper;
            }
        }
        for &b in &basis.basic {
            if solver.status[b] == Status::Basic {
                return Ok(None);
            }
            solver.status[b] = Status::Basic;
        }
        solver.basis = basis.basic.clone();
        solver.refactor()?;
        if let Outcome::Unbounded { .. } = solver.run(Mode::Repair)? {
            return Err(Error::Infeasible);
        }
        Ok(Some(solver))
    }
}

/// Warm-startable LP over one fixed polytope.
#[derive(Debug, Clone)]
pub struct LpSolver<T: Scalar> {
    k: usize,
    n: usize,
    ncols: usize,
    shape: Arc<Rows<T>>,
    /// `(row, sign)` of every artificial column, in column order.
    artificials: Vec<(usize, T)>,
    /// Row-major `k×k` inverse of the basis matrix.
    binv: Vec<T>,
    beta: Vec<T>,
    basis: Vec<usize>,
    status: Vec<Status>,
    lo: Vec<T>,
    up: Vec<T>,
    cost: Vec<T>,
    since_refactor: usize,
    pivots: usize,
    y: Vec<T>,
    alpha: Vec<T>,
    sign: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> LpSolver<T> {
    /// Builds the solver and finds a feasible basis.
    pub fn new(cs: &ConstraintSet<T>) -> Result<Self> {
        Self::with_bounds(cs, cs.lower(), cs.upper())
    }

    /// As [`LpSolver::new`] with the variable bounds replaced.
    pub fn with_bounds(cs: &ConstraintSet<T>, lower: &[T], upper: &[T]) -> Result<Self> {
        LpShape::new(cs)?.solver(lower, upper, None)
    }

    /// As [`LpSolver::with_bounds`], warm-started from `basis`.
    pub fn with_basis(cs: &ConstraintSet<T>, lower: &[T], upper: &[T], basis: &Basis) -> Result<Self> {
        LpShape::new(cs)?.solver(lower, upper, Some(basis))
    }

    /// Snapshot of the current basis, or `None` while an artificial is basic.
    pub fn basis(&self) -> Option<Basis> {
        let limit = self.n + self.k;
        if self.basis.iter().any(|&b| b >= limit) {
            return None;
        }
        Some(Basis {
            basic: self.basis.clone(),
            at_upper: (0..limit).filter(|&j| self.status[j] == Status::Upper).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total pivots performed so far.
    pub fn pivots(&self) -> usize {
        self.pivots
    }

    fn first_artificial(&self) -> usize {
        self.n + self.k
    }

    fn phase_one(&mut self) -> Result<()> {
        if self.artificials.is_empty() {
            return Ok(());
        }
        let fa = self.first_artificial();
        for j in fa..self.ncols {
            self.cost[j] = -T::one();
        }
        if let Outcome::Unbounded { .. } = self.run(Mode::Objective)? {
            return Err(Error::Infeasible);
        }
        self.refactor()?;
        let scale = self.shape.rhs.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let infeas = (0..self.k)
            .filter(|&i| self.basis[i] >= fa)
            .fold(T::zero(), |s, i| s + self.beta[i].max(T::zero()));
        if infeas > T::lit(1e-7) * scale {
            return Err(Error::Infeasible);
        }
        for j in fa..self.ncols {
            self.up[j] = T::zero();
            self.cost[j] = T::zero();
            if self.status[j] == Status::Upper {
                self.status[j] = Status::Lower;
            }
        }
        let k = self.k;
        for r in 0..k {
            if self.basis[r] < fa {
                continue;
            }
            self.beta[r] = T::zero();
            let mut best: Option<(usize, T)> = None;
            self.y.copy_from_slice(&self.binv[r * k..(r + 1) * k]);
            for j in 0..fa {
                if self.status[j] != Status::Basic && self.lo[j] < self.up[j] {
                    let v = self.col_dot(j, &self.y).abs();
                    if v > T::lit(PIVOT_TOL) && best.is_none_or(|(_, b)| v > b) {
                        best = Some((j, v));
                    }
                }
            }
            if let Some((q, _)) = best {
                let leaving = self.basis[r];
                self.ftran(q);
                let value = self.nonbasic_value(q);
                self.pivot(r, q);
                self.beta[r] = value;
                self.status[leaving] = Status::Lower;
            }
        }
        self.refactor()
    }

    #[inline]
    fn nonbasic_value(&self, j: usize) -> T {
        match self.status[j] {
            Status::Upper => self.up[j],
            _ => self.lo[j],
        }
    }

    /// `yᵀA_j` for any column.
    #[inline]
    fn col_dot(&self, j: usize, y: &[T]) -> T {
        if j < self.n {
            self.shape.cols.entries(j).fold(T::zero(), |s, (i, v)| s + y[i] * v)
        } else if j < self.n + self.k {
            y[j - self.n]
        } else {
            let (row, sign) = self.artificials[j - self.n - self.k];
            sign * y[row]
        }
    }

    /// `alpha ← B⁻¹A_j`.
    fn ftran(&mut self, j: usize) {
        let k = self.k;
        let n = self.n;
        let binv = &self.binv;
        let alpha = &mut self.alpha;
        if j < n {
            alpha.iter_mut().for_each(|v| *v = T::zero());
            let r = self.shape.cols.start[j]..self.shape.cols.start[j + 1];
            for (&l, &v) in self.shape.cols.row[r.clone()].iter().zip(&self.shape.cols.val[r]) {
                for i in 0..k {
                    alpha[i] += binv[i * k + l] * v;
                }
            }
        } else if j < n + k {
            let l = j - n;
            for i in 0..k {
                alpha[i] = binv[i * k + l];
            }
        } else {
            let (l, sign) = self.artificials[j - n - k];
            for i in 0..k {
                alpha[i] = sign * binv[i * k + l];
            }
        }
    }

    /// Basis change at row `r` with `alpha = B⁻¹A_q` already computed.
    fn pivot(&mut self, r: usize, q: usize) {
        let k = self.k;
        let inv = T::one() / self.alpha[r];
        for v in &mut self.binv[r * k..(r + 1) * k] {
            *v *= inv;
        }
        let (before, rest) = self.binv.split_at_mut(r * k);
        let (prow, after) = rest.split_at_mut(k);
        let mut i = 0;
        for row in before.chunks_exact_mut(k).chain(after.chunks_exact_mut(k)) {
            if i == r {
                i += 1;
            }
            let f = self.alpha[i];
            if f != T::zero() {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
            }
            i += 1;
        }
        self.basis[r] = q;
        self.status[q] = Status::Basic;
        self.since_refactor += 1;
        self.pivots += 1;
    }

    /// Rebuilds the basis inverse and basic values from the original data.
    fn refactor(&mut self) -> Result<()> {
        self.since_refactor = 0;
        let k = self.k;
        if k == 0 {
            return Ok(());
        }
        let (n, nk) = (self.n, self.n + self.k);
        let mut bmat = DMatrix::<T>::zeros(k, k);
        for (c, &b) in self.basis.iter().enumerate() {
            if b < n {
                for (i, v) in self.shape.cols.entries(b) {
                    bmat[(i, c)] = v;
                }
            } else if b < nk {
                bmat[(b - n, c)] = T::one();
            } else {
                let (row, sign) = self.artificials[b - nk];
                bmat[(row, c)] = sign;
            }
        }
        let inv = bmat.try_inverse().ok_or(Error::SingularMatrix { ratio: 0.0 })?;
        for i in 0..k {
            for l in 0..k {
                self.binv[i * k + l] = inv[(i, l)];
            }
        }
        let mut resid = self.shape.rhs.clone();
        for j in 0..self.ncols {
            if self.status[j] == Status::Basic {
                continue;
            }
            let xj = self.nonbasic_value(j);
            if xj == T::zero() {
                continue;
            }
            if j < n {
                for (i, v) in self.shape.cols.entries(j) {
                    resid[i] -= v * xj;
                }
            } else if j < nk {
                resid[j - n] -= xj;
            } else {
                let (row, sign) = self.artificials[j - nk];
                resid[row] -= sign * xj;
            }
        }
        for i in 0..k {
            let mut v = T::zero();
            for l in 0..k {
                v += self.binv[i * k + l] * resid[l];
            }
            let b = self.basis[i];
            let tol = T::lit(FEAS_TOL) * (T::one() + v.abs());
            if v < self.lo[b] && v > self.lo[b] - tol {
                v = self.lo[b];
            } else if v > self.up[b] && v < self.up[b] + tol {
                v = self.up[b];
            }
            self.beta[i] = v;
        }
        Ok(())
    }

    /// Marks violated basic variables; returns whether any is violated.
    fn mark_violations(&mut self) -> bool {
        let mut any = false;
        for i in 0..self.k {
            let b = self.basis[i];
            let tol = T::lit(FEAS_TOL) * (T::one() + self.beta[i].abs());
            self.sign[i] = if self.beta[i] < self.lo[b] - tol {
                T::one()
            } else if self.beta[i] > self.up[b] + tol {
                -T::one()
            } else {
                T::zero()
            };
            any |= self.sign[i] != T::zero();
        }
        any
    }

    /// Ratio test for entering column `q` moving in direction `dir`, with
    /// `alpha` already holding `B⁻¹A_q`. Returns the step and leaving row.
    fn ratio(&self, q: usize, dir: T, bland: bool) -> (T, Option<(usize, Status)>) {
        let ptol = T::lit(PIVOT_TOL);
        let mut theta = self.up[q] - self.lo[q];
        let mut leave: Option<(usize, Status, T)> = None;
        for i in 0..self.k {
            let alpha = dir * self.alpha[i];
            let b = self.basis[i];
            let s = self.sign[i];
            let (lim, to) = if s > T::zero() {
                if alpha < -ptol {
                    ((self.lo[b] - self.beta[i]) / -alpha, Status::Lower)
                } else {
                    continue;
                }
            } else if s < T::zero() {
                if alpha > ptol {
                    ((self.beta[i] - self.up[b]) / alpha, Status::Upper)
                } else {
                    continue;
                }
            } else if alpha > ptol {
                ((self.beta[i] - self.lo[b]) / alpha, Status::Lower)
            } else if alpha < -ptol && self.up[b].is_finite() {
                ((self.up[b] - self.beta[i]) / -alpha, Status::Upper)
            } else {
                continue;
            };
            let lim = lim.max(T::zero());
            let tie = T::lit(1e-12) * (T::one() + lim.abs());
            let better = if lim < theta - tie {
                true
            } else if (lim - theta).abs() <= tie {
                match leave {
                    Some((r, _, _)) if bland => b < self.basis[r],
                    Some((_, _, a)) => alpha.abs() > a,
                    None => false,
                }
            } else {
                false
            };
            if better {
                theta = lim;
                leave = Some((i, to, alpha.abs()));
            }
        }
        (theta, leave.map(|(r, to, _)| (r, to)))
    }

    /// Reduced costs `d = c − Aᵀy` of every column, row by row.
    fn reduced_costs(&mut self, mode: Mode) {
        let (n, k) = (self.n, self.k);
        let d = &mut self.d;
        if mode == Mode::Repair {
            d.iter_mut().for_each(|v| *v = T::zero());
        } else {
            d.copy_from_slice(&self.cost);
        }
        for (i, row) in self.shape.by_row.iter().enumerate() {
            let yi = self.y[i];
            if yi != T::zero() {
                for &(j, v) in row {
                    d[j] -= yi * v;
                }
            }
            d[n + i] -= yi;
        }
        for (a, &(row, sign)) in self.artificials.iter().enumerate() {
            d[n + k + a] -= sign * self.y[row];
        }
    }

    /// Dantzig pricing on the stored reduced costs; under `bland`, the
    /// lowest eligible index.
    fn price(&self, dtol: T, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (j, &dj) in self.d.iter().enumerate() {
            let score = match self.status[j] {
                Status::Lower if dj > dtol => dj,
                Status::Upper if dj < -dtol => -dj,
                _ => continue,
            };
            if self.lo[j] >= self.up[j] {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    /// `y = c_Bᵀ B⁻¹`, with the violation signs as `c_B` when repairing.
    fn dual(&mut self, mode: Mode) {
        let k = self.k;
        self.y.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..k {
            let cb = if mode == Mode::Repair { self.sign[i] } else { self.cost[self.basis[i]] };
            if cb != T::zero() {
                for l in 0..k {
                    self.y[l] += cb * self.binv[i * k + l];
                }
            }
        }
    }

    fn run(&mut self, mode: Mode) -> Result<Outcome> {
        let k = self.k;
        let nc = self.ncols;
        let cscale = match mode {
            Mode::Objective => self.cost.iter().fold(T::one(), |m, v| m.max(v.abs())),
            Mode::Repair => T::one(),
        };
        let dtol = T::lit(OPT_TOL) * cscale;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut fresh = false;
        let max_iter = 50 * (nc + k) + 1000;
        for _ in 0..max_iter {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                fresh = false;
            }
            let repairing = mode == Mode::Repair;
            if repairing {
                if !self.mark_violations() {
                    return Ok(Outcome::Optimal);
                }
            } else {
                self.sign.iter_mut().for_each(|v| *v = T::zero());
            }
            if repairing || !fresh {
                self.dual(mode);
                self.reduced_costs(mode);
                fresh = true;
            }
            let Some(q) = self.price(dtol, bland) else {
                return if repairing { Err(Error::Infeasible) } else { Ok(Outcome::Optimal) };
            };
            let dir = if self.status[q] == Status::Lower { T::one() } else { -T::one() };
            self.ftran(q);
            let (theta, leave) = self.ratio(q, dir, bland);
            if !theta.is_finite() {
                if repairing {
                    return Err(Error::Infeasible);
                }
                return Ok(Outcome::Unbounded {
                    entering: q,
                    dir: dir.to_f64_lossy(),
                });
            }
            if theta <= T::lit(1e-12) {
                degenerate += 1;
                if degenerate > DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            let step = theta * dir;
            if step != T::zero() {
                for i in 0..k {
                    let t = self.alpha[i];
                    if t != T::zero() {
                        self.beta[i] -= step * t;
                    }
                }
            }
            match leave {
                None => {
                    self.status[q] = if self.status[q] == Status::Lower {
                        Status::Upper
                    } else {
                        Status::Lower
                    };
                }
                Some((r, to)) => {
                    let entering_value = self.nonbasic_value(q) + step;
                    let leaving = self.basis[r];
                    self.pivot(r, q);
                    self.beta[r] = entering_value;
                    self.status[leaving] = to;
                    fresh = false;
                }
            }
        }
        Err(Error::BadParams("simplex iteration limit reached".into()))
    }

    /// Current values of the structural variables.
    pub fn solution(&self) -> Vec<T> {
        let mut x: Vec<T> = (0..self.n).map(|j| self.nonbasic_value(j)).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.beta[i].max(self.lo[b]).min(self.up[b]);
            }
        }
        x
    }

    /// Maximizes `cᵀx` starting from the current basis.
    pub fn maximize(&mut self, c: &[T]) -> Result<LpSolution<T>> {
        if c.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: c.len(),
            });
        }
        self.cost.iter_mut().for_each(|v| *v = T::zero());
        self.cost[..self.n].copy_from_slice(c);
        match self.run(Mode::Objective)? {
            Outcome::Optimal => {}
            Outcome::Unbounded { entering, dir } => {
                let mut ray = vec![0.0; self.n];
                if entering < self.n {
                    ray[entering] = dir;
                }
                for (i, &b) in self.basis.iter().enumerate() {
                    if b < self.n {
                        ray[b] = -dir * self.alpha[i].to_f64_lossy();
                    }
                }
                return Err(Error::Unbounded { entering, ray });
            }
        }
        if self.since_refactor >= REFRESH_AFTER {
            self.refactor()?;
            if let Outcome::Unbounded { .. } = self.run(Mode::Objective)? {
                return Err(Error::BadParams("numerical breakdown after refactorization".into()));
            }
        }
        let x = self.solution();
        let value = x.iter().zip(c).fold(T::zero(), |s, (&a, &b)| s + a * b);
        Ok(LpSolution { x, value })
    }
}
