//! Integer maximization of the quadratic surrogate.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::approx::{solve_relaxed_qp_with_cutoff, QpOptions, QpWarmStart};
use crate::error::{Error, Result};
use crate::model::Design;
use crate::polytope::{ConstraintSet, LpShape, Sense};
use crate::quadmodel::{ExchangeState, QuadModel};
use crate::scalar::Scalar;

const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KlOptions {
    /// Increase candidates per sweep.
    pub k: usize,
    /// Decrease candidates per sweep.
    pub l: usize,
    pub max_moves: usize,
}

impl Default for KlOptions {
    fn default() -> Self {
        Self {
            k: 16,
            l: 16,
            max_moves: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KlOutcome<T> {
    pub design: Vec<T>,
    pub value: T,
    pub moves: usize,
    /// Surrogate value after each accepted move, starting with the input.
    pub trace: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Relative gap at which the search stops.
    pub gap: f64,
    pub node_cap: usize,
    pub time_cap: Option<Duration>,
    pub threads: usize,
    pub integrality_tol: f64,
    pub kl: KlOptions,
    pub qp: QpOptions,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            node_cap: 100_000,
            time_cap: None,
            threads: 1,
            integrality_tol: 1e-6,
            kl: KlOptions::default(),
            qp: QpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Optimal,
    GapReached,
    NodeCap,
    TimeCap,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Optimal => "optimal",
            Termination::GapReached => "gap_reached",
            Termination::NodeCap => "node_cap",
            Termination::TimeCap => "time_cap",
        }
    }

    pub fn hit_cap(self) -> bool {
        matches!(self, Termination::NodeCap | Termination::TimeCap)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<T: Scalar> {
    pub design: Design<T>,
    pub value: T,
    pub upper_bound: T,
    pub gap: T,
    pub nodes: usize,
    pub improvements: usize,
    pub wall_time: Duration,
    pub termination: Termination,
    /// Every incumbent held during the search, oldest first.
    pub incumbents: Vec<Vec<T>>,
}

/// Column view of the constraint rows, for incremental activity updates.
struct Columns<T> {
    cols: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> Columns<T> {
    fn new(cs: &ConstraintSet<T>) -> Self {
        let mut cols = vec![Vec::new(); cs.n()];
        for (r, row) in cs.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                cols[j].push((r, a));
            }
        }
        Self { cols }
    }
}

fn row_ok<T: Scalar>(sense: Sense, act: T, rhs: T) -> bool {
    let tol = T::lit(FEAS_TOL) * T::one().max(rhs.abs());
    match sense {
        Sense::Le => act <= rhs + tol,
        Sense::Eq => (act - rhs).abs() <= tol,
    }
}

fn row_violation<T: Scalar>(sense: Sense, act: T, rhs: T) -> T {
    match sense {
        Sense::Le => (act - rhs).max(T::zero()),
        Sense::Eq => (act - rhs).abs(),
    }
}

/// Integral design near `xi_rel`: floor every integer weight, then repair the
/// rows greedily by unit steps, preferring the largest rounding residual.
/// Returns `None` when the greedy repair stalls.
pub fn round_incumbent<T: Scalar>(xi_rel: &[T], cs: &ConstraintSet<T>) -> Option<Vec<T>> {
    let n = cs.n();
    if xi_rel.len() != n {
        return None;
    }
    let eps = T::lit(FEAS_TOL);
    let int = cs.integer();
    let lo: Vec<T> = (0..n).map(|j| if int[j] { cs.lower()[j].ceil() } else { cs.lower()[j] }).collect();
    let up: Vec<T> = (0..n).map(|j| if int[j] { cs.upper()[j].floor() } else { cs.upper()[j] }).collect();
    let mut x: Vec<T> = (0..n)
        .map(|j| {
            if int[j] {
                (xi_rel[j] + eps).floor().max(lo[j]).min(up[j])
            } else {
                xi_rel[j]
            }
        })
        .collect();
    let cols = Columns::new(cs);
    let rows = cs.rows();
    let mut act: Vec<T> = rows.iter().map(|r| cs.row_activity(r, &x)).collect();
    let total = |act: &[T]| {
        rows.iter()
            .zip(act)
            .fold(T::zero(), |s, (r, &a)| s + row_violation(r.sense, a, r.rhs))
    };
    let step_delta = |act: &[T], j: usize, dir: T| {
        cols.cols[j].iter().fold(T::zero(), |s, &(r, a)| {
            let row = &rows[r];
            s + row_violation(row.sense, act[r] + dir * a, row.rhs) - row_violation(row.sense, act[r], row.rhs)
        })
    };
    let max_steps = 10 * n + 1000;
    for _ in 0..max_steps {
        if rows.iter().zip(&act).all(|(r, &a)| row_ok(r.sense, a, r.rhs)) {
            return Some(x);
        }
        let v = total(&act);
        let mut best: Option<(T, T, usize, T)> = None;
        for j in 0..n {
            if !int[j] || cols.cols[j].is_empty() {
                continue;
            }
            for dir in [T::one(), -T::one()] {
                let target = x[j] + dir;
                if target > up[j] || target < lo[j] {
                    continue;
                }
                let d = step_delta(&act, j, dir);
                if d >= -eps * T::one().max(v) {
                    continue;
                }
                let pref = dir * (xi_rel[j] - x[j]);
                let better = match best {
                    None => true,
                    Some((bd, bp, _, _)) => d < bd - eps || ((d - bd).abs() <= eps && pref > bp),
                };
                if better {
                    best = Some((d, pref, j, dir));
                }
            }
        }
        let (_, _, j, dir) = best?;
        x[j] += dir;
        for &(r, a) in &cols.cols[j] {
            act[r] += dir * a;
        }
    }
    None
}

/// Local search by single-trial moves `ξ + e_l − e_k`, additions and removals,
/// restricted to the `K` best increase and `L` best decrease candidates by the
/// surrogate gradient. Every accepted move keeps `cs` satisfied.
pub fn kl_exchange<T: Scalar>(
    q: &QuadModel<T>,
    cs: &ConstraintSet<T>,
    start: &[T],
    opts: &KlOptions,
) -> Result<KlOutcome<T>> {
    let n = q.n();
    if cs.n() != n || start.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: start.len().min(cs.n()) });
    }
    let report = cs.feasible(start, T::lit(FEAS_TOL), true)?;
    if !report.is_feasible() {
        return Err(Error::InfeasibleStart(format!("{:?}", report.violations[0])));
    }
    let cols = Columns::new(cs);
    let rows = cs.rows();
    let mut act: Vec<T> = rows.iter().map(|r| cs.row_activity(r, start)).collect();
    let mut state = ExchangeState::new(q, start.to_vec())?;
    let mut trace = vec![state.value()];
    let mut moves = 0;
    let one = T::one();

    let move_ok = |act: &[T], changes: &[(usize, T)]| {
        let mut touched: Vec<(usize, T)> = Vec::new();
        for &(j, dir) in changes {
            for &(r, a) in &cols.cols[j] {
                touched.push((r, dir * a));
            }
        }
        touched.sort_by_key(|&(r, _)| r);
        let mut i = 0;
        while i < touched.len() {
            let r = touched[i].0;
            let mut delta = T::zero();
            while i < touched.len() && touched[i].0 == r {
                delta += touched[i].1;
                i += 1;
            }
            if !row_ok(rows[r].sense, act[r] + delta, rows[r].rhs) {
                return false;
            }
        }
        true
    };

    while moves < opts.max_moves {
        let xi = state.design();
        let g = q.gradient_at(state.sv());
        let eps = T::lit(1e-12) * T::one().max(state.value().abs());
        let mut inc: Vec<usize> = (0..n).filter(|&j| xi[j] + one <= cs.upper()[j] + T::lit(FEAS_TOL)).collect();
        let mut dec: Vec<usize> = (0..n).filter(|&j| xi[j] - one >= cs.lower()[j] - T::lit(FEAS_TOL)).collect();
        top_by(&mut inc, opts.k, |a, b| g[b].partial_cmp(&g[a]).unwrap_or(Ordering::Equal));
        top_by(&mut dec, opts.l, |a, b| g[a].partial_cmp(&g[b]).unwrap_or(Ordering::Equal));

        // (delta, added, removed)
        let mut best: Option<(T, Option<usize>, Option<usize>)> = None;
        let mut consider = |delta: T, l: Option<usize>, k: Option<usize>, act: &[T]| {
            if delta <= eps || best.as_ref().is_some_and(|b| delta <= b.0) {
                return;
            }
            let mut changes = Vec::with_capacity(2);
            if let Some(l) = l {
                changes.push((l, one));
            }
            if let Some(k) = k {
                changes.push((k, -one));
            }
            if move_ok(act, &changes) {
                best = Some((delta, l, k));
            }
        };
        for &l in &inc {
            for &k in &dec {
                if l != k {
                    consider(state.exchange_delta(l, k)?, Some(l), Some(k), &act);
                }
            }
            consider(state.add_delta(l), Some(l), None, &act);
        }
        for &k in &dec {
            consider(state.remove_delta(k), None, Some(k), &act);
        }
        let Some((delta, l, k)) = best else { break };
        let before = state.value();
        match (l, k) {
            (Some(l), Some(k)) => {
                state.exchange(l, k)?;
            }
            (Some(l), None) => {
                state.add(l)?;
            }
            (None, Some(k)) => {
                state.remove(k)?;
            }
            (None, None) => unreachable!("a move changes at least one weight"),
        }
        for (j, dir) in [(l, one), (k, -one)] {
            if let Some(j) = j {
                for &(r, a) in &cols.cols[j] {
                    act[r] += dir * a;
                }
            }
        }
        moves += 1;
        if moves % 256 == 0 {
            state.refresh()?;
        }
        debug_assert!(state.value() > before || delta <= eps);
        trace.push(state.value());
    }
    state.refresh()?;
    let value = state.value();
    Ok(KlOutcome {
        design: state.into_design(),
        value,
        moves,
        trace,
    })
}

fn top_by(v: &mut Vec<usize>, k: usize, cmp: impl Fn(usize, usize) -> Ordering) {
    if v.len() > k {
        v.select_nth_unstable_by(k, |&a, &b| cmp(a, b));
        v.truncate(k);
    }
    v.sort_by(|&a, &b| cmp(a, b).then(a.cmp(&b)));
}

#[derive(Debug, Clone)]
struct Node<T> {
    bound: T,
    depth: usize,
    id: usize,
    overrides: Vec<(usize, T, T)>,
    /// Parent's final LP basis and active vertices.
    warm: Option<Arc<QpWarmStart<T>>>,
}

impl<T: Scalar> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Node<T> {}

impl<T: Scalar> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Node<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .partial_cmp(&other.bound)
            .unwrap_or(Ordering::Equal)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

struct Shared<T: Scalar> {
    heap: BinaryHeap<Node<T>>,
    incumbent: Option<(Vec<T>, T)>,
    history: Vec<Vec<T>>,
    busy: usize,
    nodes: usize,
    improvements: usize,
    pruned_max: T,
    next_id: usize,
    stop: Option<Termination>,
    error: Option<Error>,
}

struct Outcome<T> {
    children: Vec<(usize, T, T)>,
    bound: T,
    candidate: Option<(Vec<T>, T)>,
    error: Option<Error>,
    warm: Option<Arc<QpWarmStart<T>>>,
}

fn relative_gap<T: Scalar>(upper: T, value: T) -> T {
    (upper - value) / upper.abs().max(T::lit(1e-12))
}

struct Search<'a, T: Scalar> {
    q: &'a QuadModel<T>,
    cs: &'a ConstraintSet<T>,
    shape: LpShape<T>,
    opts: &'a BnbOptions,
}

impl<T: Scalar> Search<'_, T> {
    fn prunable(&self, bound: T, incumbent: Option<T>) -> bool {
        match incumbent {
            None => false,
            Some(v) => bound <= v || relative_gap(bound, v) <= T::lit(self.opts.gap),
        }
    }

    fn improve(&self, x: Vec<T>) -> Option<(Vec<T>, T)> {
        match kl_exchange(self.q, self.cs, &x, &self.opts.kl) {
            Ok(out) => Some((out.design, out.value)),
            Err(_) => self.q.phi_quad(&x).ok().map(|v| (x, v)),
        }
    }

    fn process(&self, node: &Node<T>, incumbent: Option<T>) -> Outcome<T> {
        let mut lower = self.cs.lower().to_vec();
        let mut upper = self.cs.upper().to_vec();
        for &(j, lo, up) in &node.overrides {
            lower[j] = lower[j].max(lo);
            upper[j] = upper[j].min(up);
        }
        let empty = Outcome {
            children: Vec::new(),
            bound: T::neg_infinity(),
            candidate: None,
            error: None,
            warm: None,
        };
        if (0..lower.len()).any(|j| lower[j] > upper[j]) {
            return empty;
        }
        let cutoff = match incumbent {
            Some(v) => v + T::lit(self.opts.gap) * v.abs(),
            None => T::neg_infinity(),
        };
        let rel = match solve_relaxed_qp_with_cutoff(self.q, &self.shape, &lower, &upper, &self.opts.qp, cutoff, node.warm.as_deref()) {
            Ok(rel) => rel,
            Err(Error::Infeasible) => return empty,
            Err(e) => return Outcome { error: Some(e), ..empty },
        };
        let bound = rel.upper_bound.min(node.bound);
        if self.prunable(bound, incumbent) {
            return Outcome { bound, ..empty };
        }

        let tol = T::lit(self.opts.integrality_tol);
        let int = self.cs.integer();
        let mut branch: Option<(usize, T, T)> = None;
        for (j, &v) in rel.x.iter().enumerate() {
            if !int[j] {
                continue;
            }
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac <= tol {
                continue;
            }
            let h = self.q.h()[j].abs();
            let better = match branch {
                None => true,
                Some((_, bf, bh)) => frac > bf + T::lit(1e-12) || ((frac - bf).abs() <= T::lit(1e-12) && h > bh),
            };
            if better {
                branch = Some((j, frac, h));
            }
        }

        let mut candidate = None;
        let rounded = match branch {
            None => {
                let x: Vec<T> = rel
                    .x
                    .iter()
                    .zip(int)
                    .map(|(&v, &i)| if i { v.round() } else { v })
                    .collect();
                match self.cs.feasible(&x, T::lit(FEAS_TOL), true) {
                    Ok(r) if r.is_feasible() => Some(x),
                    _ => round_incumbent(&rel.x, self.cs),
                }
            }
            Some(_) => round_incumbent(&rel.x, self.cs),
        };
        if let Some(x) = rounded {
            if let Ok(v) = self.q.phi_quad(&x) {
                if incumbent.is_none_or(|inc| v > inc) || branch.is_none() {
                    candidate = self.improve(x);
                }
            }
        }

        let mut children = Vec::new();
        if let Some((j, _, _)) = branch {
            let v = rel.x[j];
            children.push((j, lower[j], v.floor()));
            children.push((j, v.ceil(), upper[j]));
        }
        Outcome {
            children,
            bound,
            candidate,
            error: None,
            warm: Some(Arc::new(rel.warm)),
        }
    }
}

/// Best-first branch-and-bound on the concave-QP relaxation of the surrogate.
pub fn branch_and_bound<T: Scalar>(q: &QuadModel<T>, cs: &ConstraintSet<T>, opts: &BnbOptions) -> Result<SolveReport<T>> {
    if cs.n() != q.n() {
        return Err(Error::DimensionMismatch { expected: q.n(), found: cs.n() });
    }
    let start = Instant::now();
    let (cs_r, agg) = cs.aggregate()?;
    let q_r: Cow<QuadModel<T>> = if agg.is_trivial() {
        Cow::Borrowed(q)
    } else {
        Cow::Owned(q.aggregate(&agg.groups)?)
    };
    let search = Search {
        q: &q_r,
        cs: &cs_r,
        shape: LpShape::new(&cs_r)?,
        opts,
    };
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: T::infinity(),
        depth: 0,
        id: 0,
        overrides: Vec::new(),
        warm: None,
    });
    let shared = Mutex::new(Shared {
        heap,
        incumbent: None,
        history: Vec::new(),
        busy: 0,
        nodes: 0,
        improvements: 0,
        pruned_max: T::neg_infinity(),
        next_id: 1,
        stop: None,
        error: None,
    });
    let cv = Condvar::new();

    let worker = || loop {
        let (node, inc) = {
            let mut s = shared.lock().expect("search state lock");
            loop {
                if s.stop.is_some() {
                    return;
                }
                if s.nodes >= opts.node_cap {
                    s.stop = Some(Termination::NodeCap);
                    cv.notify_all();
                    return;
                }
                if opts.time_cap.is_some_and(|cap| start.elapsed() >= cap) {
                    s.stop = Some(Termination::TimeCap);
                    cv.notify_all();
                    return;
                }
                let inc = s.incumbent.as_ref().map(|i| i.1);
                if let Some(node) = s.heap.pop() {
                    if search.prunable(node.bound, inc) {
                        s.pruned_max = s.pruned_max.max(node.bound);
                        continue;
                    }
                    s.busy += 1;
                    s.nodes += 1;
                    break (node, inc);
                }
                if s.busy == 0 {
                    s.stop = Some(Termination::Optimal);
                    cv.notify_all();
                    return;
                }
                s = cv.wait(s).expect("search state lock");
            }
        };
        let out = search.process(&node, inc);
        let mut s = shared.lock().expect("search state lock");
        s.busy -= 1;
        if let Some(e) = out.error {
            s.error.get_or_insert(e);
            s.stop = Some(Termination::Optimal);
            cv.notify_all();
            return;
        }
        if let Some((x, v)) = out.candidate {
            if s.incumbent.as_ref().is_none_or(|i| v > i.1) {
                s.history.push(x.clone());
                s.incumbent = Some((x, v));
                s.improvements += 1;
            }
        }
        let inc = s.incumbent.as_ref().map(|i| i.1);
        if out.children.is_empty() || search.prunable(out.bound, inc) {
            if out.bound > T::neg_infinity() {
                s.pruned_max = s.pruned_max.max(out.bound);
            }
        } else {
            for (j, lo, up) in out.children {
                let mut overrides = node.overrides.clone();
                overrides.push((j, lo, up));
                let id = s.next_id;
                s.next_id += 1;
                s.heap.push(Node {
                    bound: out.bound,
                    depth: node.depth + 1,
                    id,
                    overrides,
                    warm: out.warm.clone(),
                });
            }
        }
        cv.notify_all();
    };

    let threads = opts.threads.max(1);
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(&worker);
            }
        });
    }

    let s = shared.into_inner().expect("search state lock");
    if let Some(e) = s.error {
        return Err(e);
    }
    let stop = s.stop.unwrap_or(Termination::Optimal);
    let Some((x, value)) = s.incumbent else {
        return Err(if stop.hit_cap() { Error::ResourceExhausted } else { Error::Infeasible });
    };
    let open_max = s.heap.iter().fold(T::neg_infinity(), |m, n| m.max(n.bound));
    let upper_bound = value.max(s.pruned_max).max(open_max);
    let gap = relative_gap(upper_bound, value);
    let termination = match stop {
        Termination::Optimal if gap > T::lit(1e-9) => Termination::GapReached,
        other => other,
    };
    let design = agg.expand(&x);
    let history = s.history.iter().map(|h| agg.expand(h)).collect();
    Ok(SolveReport {
        design: Design::new(design, true)?,
        value,
        upper_bound,
        gap,
        nodes: s.nodes,
        improvements: s.improvements,
        wall_time: start.elapsed(),
        termination,
        incumbents: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{solve_ad, AdOptions};
    use crate::criteria::Criterion;
    use crate::model::DesignProblem;
    use crate::symlin::SymMatrix;

    fn compositions(n: usize, total: u32) -> Vec<Vec<f64>> {
        if n == 1 {
            return vec![vec![total as f64]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(n - 1, total - first) {
                rest.insert(0, first as f64);
                out.push(rest);
            }
        }
        out
    }

    fn small_model() -> (QuadModel<f64>, ConstraintSet<f64>) {
        let p = DesignProblem::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, -0.5]]).unwrap();
        let cs = ConstraintSet::simplex(4, 3.0);
        let ad = solve_ad(&p, &Criterion::d(), &cs, &AdOptions::default()).unwrap();
        (QuadModel::build(&p, &Criterion::d(), &ad.info, 1e-10).unwrap(), cs)
    }

    #[test]
    fn rounding_examples() {
        let cs = ConstraintSet::simplex(3, 7.0);
        assert_eq!(round_incumbent(&[2.6, 2.6, 1.8], &cs), Some(vec![3.0, 2.0, 2.0]));
        assert_eq!(round_incumbent(&[3.0, 2.0, 2.0], &cs), Some(vec![3.0, 2.0, 2.0]));
        let mut cs = ConstraintSet::new(4);
        cs.set_upper_all(1.0);
        cs.add_dense_row(&[1.0, 2.0, 1.0, 3.0], Sense::Le, 3.0).unwrap();
        assert_eq!(round_incumbent(&[0.5, 0.75, 1.0, 0.2], &cs), Some(vec![0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn linear_surrogate_is_greedy() {
        let f: Vec<Vec<f64>> = (1..=10).map(|i| vec![(i as f64 * 0.37).sin() + 1.5]).collect();
        let p = DesignProblem::from_rows(&f).unwrap();
        let q = QuadModel::build(&p, &Criterion::d(), &SymMatrix::from_diagonal(&[3.0]), 1e-10).unwrap();
        assert_eq!(q.t(), 0);
        let mut cs = ConstraintSet::simplex(10, 7.0);
        cs.set_upper_all(2.0);
        let rep = branch_and_bound(&q, &cs, &BnbOptions::default()).unwrap();
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| q.h()[b].partial_cmp(&q.h()[a]).unwrap());
        let mut greedy = vec![0.0; 10];
        let mut left: f64 = 7.0;
        for i in order {
            let take = left.min(2.0);
            greedy[i] = take;
            left -= take;
        }
        assert_eq!(rep.design.weights(), &greedy[..]);
    }

    #[test]
    fn matches_exhaustive_on_small_simplex() {
        let (q, cs) = small_model();
        let best = compositions(4, 3)
            .into_iter()
            .map(|w| q.phi_quad(&w).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let rep = branch_and_bound(&q, &cs, &BnbOptions::default()).unwrap();
        assert!((rep.value - best).abs() <= 1e-9 * best.abs().max(1.0));
        assert!(rep.value <= rep.upper_bound + 1e-8);
        assert!(rep.gap >= -1e-9);
        let par = branch_and_bound(&q, &cs, &BnbOptions { threads: 3, ..Default::default() }).unwrap();
        assert!((par.value - rep.value).abs() < 1e-9);
    }

    #[test]
    fn kl_reaches_a_local_optimum() {
        let (q, cs) = small_model();
        let designs = compositions(4, 3);
        let is_local_opt = |w: &[f64]| {
            let v = q.phi_quad(w).unwrap();
            (0..4).all(|l| {
                (0..4).all(|k| {
                    if l == k || w[k] < 1.0 {
                        return true;
                    }
                    let mut x = w.to_vec();
                    x[l] += 1.0;
                    x[k] -= 1.0;
                    q.phi_quad(&x).unwrap() <= v + 1e-12
                })
            })
        };
        for start in &designs {
            let out = kl_exchange(&q, &cs, start, &KlOptions::default()).unwrap();
            assert!(is_local_opt(&out.design));
            for w in out.trace.windows(2) {
                assert!(w[1] > w[0]);
            }
            if is_local_opt(start) {
                assert_eq!(out.moves, 0);
                assert_eq!(&out.design, start);
            }
        }
        assert!(matches!(
            kl_exchange(&q, &cs, &[1.0, 0.0, 0.0, 0.0], &KlOptions::default()),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn caps_return_report_with_valid_bound() {
        let (q, cs) = small_model();
        let rep = branch_and_bound(&q, &cs, &BnbOptions { node_cap: 1, ..Default::default() }).unwrap();
        assert!(rep.value <= rep.upper_bound + 1e-8);
        let mut bad = ConstraintSet::simplex(4, 3.0);
        bad.set_upper_all(0.5);
        assert!(branch_and_bound(&q, &bad, &BnbOptions::default()).is_err());
    }
}
