//! The AQuA pipeline: anchor, surrogate, integer solve, report.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{solve_ad, solve_relaxed_qp, AdOptions};
use crate::criteria::{efficiency, phi, Criterion};
use crate::error::{Error, Result};
use crate::integer::{branch_and_bound, BnbOptions, SolveReport};
use crate::model::{Design, DesignProblem};
use crate::polytope::{lp_max, ConstraintSet, Sense};
use crate::quadmodel::QuadModel;
use crate::scalar::Scalar;
use crate::symlin::SymMatrix;

pub const SCHEMA: &str = "aqua/1";

#[derive(Debug, Clone)]
pub struct AquaOptions<T: Scalar> {
    /// Anchor matrix; computed by [`solve_ad`] when absent.
    pub anchor: Option<SymMatrix<T>>,
    /// Matrix the efficiency is reported against; defaults to the anchor.
    pub reference: Option<SymMatrix<T>>,
    pub ad: AdOptions,
    pub bnb: BnbOptions,
    pub factor_tol: f64,
}

impl<T: Scalar> Default for AquaOptions<T> {
    fn default() -> Self {
        Self {
            anchor: None,
            reference: None,
            ad: AdOptions::default(),
            bnb: BnbOptions::default(),
            factor_tol: T::FACTOR_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterRecord<T> {
    pub iteration: usize,
    /// True criterion value of the iterate.
    pub value: T,
    pub surrogate: T,
    /// Relative Frobenius change of the anchor produced by this iterate.
    pub anchor_change: T,
    pub integral: bool,
    pub weights: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct AquaResult<T: Scalar> {
    pub design: Design<T>,
    pub info: SymMatrix<T>,
    pub value: T,
    pub surrogate: T,
    pub anchor: SymMatrix<T>,
    pub anchor_value: T,
    /// `Φ(M(ξ))/Φ(M_ref)` on the positive scale, when a reference is known.
    pub efficiency: Option<T>,
    pub history: Vec<IterRecord<T>>,
    pub report: Option<SolveReport<T>>,
    pub converged: bool,
}

/// Exact design maximizing the quadratic surrogate built at the anchor.
pub fn aqua_solve<T: Scalar>(
    problem: &DesignProblem<T>,
    c: &Criterion<T>,
    cs: &ConstraintSet<T>,
    opts: &AquaOptions<T>,
) -> Result<AquaResult<T>> {
    let anchor = match &opts.anchor {
        Some(a) => a.clone(),
        None => solve_ad(problem, c, cs, &opts.ad)?.info,
    };
    let q = QuadModel::build(problem, c, &anchor, T::lit(opts.factor_tol))?;
    let report = branch_and_bound(&q, cs, &opts.bnb)?;
    let info = problem.info_matrix(&report.design)?;
    let reference = opts.reference.as_ref().unwrap_or(&anchor);
    let eff = efficiency(c, &info, reference)?;
    Ok(AquaResult {
        design: report.design.clone(),
        value: phi(c, &info),
        surrogate: report.value,
        anchor_value: phi(c, &anchor),
        anchor,
        info,
        efficiency: Some(eff),
        history: Vec::new(),
        report: Some(report),
        converged: true,
    })
}

#[derive(Debug, Clone)]
pub struct IterOptions<T: Scalar> {
    pub aqua: AquaOptions<T>,
    /// Points used for the rough first anchor.
    pub subsample_size: usize,
    pub seed: u64,
    /// Solve only the continuous surrogate until the anchor settles.
    pub relax_intermediate: bool,
    pub max_iter: usize,
    pub anchor_tol: f64,
}

impl<T: Scalar> Default for IterOptions<T> {
    fn default() -> Self {
        Self {
            aqua: AquaOptions::default(),
            subsample_size: 1500,
            seed: 0,
            relax_intermediate: false,
            max_iter: 10,
            anchor_tol: 1e-9,
        }
    }
}

fn restrict_constraints<T: Scalar>(cs: &ConstraintSet<T>, idx: &[usize]) -> Result<ConstraintSet<T>> {
    let mut pos = vec![usize::MAX; cs.n()];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let mut out = ConstraintSet::new(idx.len());
    for (k, &i) in idx.iter().enumerate() {
        out.set_bounds(k, cs.lower()[i], cs.upper()[i])?;
        out.set_integer(k, cs.integer()[i])?;
    }
    for row in cs.rows() {
        let coeffs = row
            .coeffs
            .iter()
            .filter(|(j, _)| pos[*j] != usize::MAX)
            .map(|&(j, v)| (pos[j], v))
            .collect();
        out.add_row(coeffs, row.sense, row.rhs)?;
    }
    Ok(out)
}

/// Rough anchor from an approximate design on a random subsample of points.
fn subsample_anchor<T: Scalar>(
    problem: &DesignProblem<T>,
    c: &Criterion<T>,
    cs: &ConstraintSet<T>,
    opts: &IterOptions<T>,
) -> Result<SymMatrix<T>> {
    let n = problem.n();
    let k = opts.subsample_size.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    let sub = problem.restrict(&idx)?;
    let ad = AdOptions {
        seed: opts.seed,
        ..opts.aqua.ad.clone()
    };
    let restricted = restrict_constraints(cs, &idx)
        .and_then(|sc| solve_ad(&sub, c, &sc, &ad));
    match restricted {
        Ok(sol) => Ok(sol.info),
        Err(Error::Infeasible | Error::SingularStart { .. } | Error::Unbounded { .. }) => {
            // size-only fallback, with the size the full constraint set allows
            let size = lp_max(&vec![T::one(); n], cs)?.value;
            let mut sc = ConstraintSet::new(k);
            for (j, &i) in idx.iter().enumerate() {
                sc.set_bounds(j, cs.lower()[i], cs.upper()[i])?;
            }
            sc.add_size(size);
            Ok(solve_ad(&sub, c, &sc, &ad)?.info)
        }
        Err(e) => Err(e),
    }
}

/// Repeats AQuA with the anchor replaced by the information matrix of the
/// previous iterate, until the design repeats or the anchor settles.
pub fn iterative_aqua<T: Scalar>(
    problem: &DesignProblem<T>,
    c: &Criterion<T>,
    cs: &ConstraintSet<T>,
    opts: &IterOptions<T>,
) -> Result<AquaResult<T>> {
    if opts.max_iter == 0 {
        return Err(Error::BadParams("max_iter must be positive".into()));
    }
    let tol = T::lit(T::SINGULAR_TOL);
    let mut anchor = match &opts.aqua.anchor {
        Some(a) => a.clone(),
        None => subsample_anchor(problem, c, cs, opts)?,
    };
    let mut history = vec![IterRecord {
        iteration: 0,
        value: phi(c, &anchor),
        surrogate: T::lit(f64::NAN),
        anchor_change: T::lit(f64::NAN),
        integral: false,
        weights: Vec::new(),
    }];
    let mut prev: Option<Vec<T>> = None;
    let mut final_pass = !opts.relax_intermediate;
    let mut converged = false;
    let mut best: Option<(Vec<T>, T, T, SolveReport<T>, SymMatrix<T>)> = None;
    let mut last: Option<(Vec<T>, T, T, SolveReport<T>, SymMatrix<T>)> = None;
    for j in 1..=opts.max_iter {
        let integral = final_pass || j == opts.max_iter;
        let q = QuadModel::build(problem, c, &anchor, T::lit(opts.aqua.factor_tol))?;
        let (x, surrogate, report) = if integral {
            let rep = branch_and_bound(&q, cs, &opts.aqua.bnb)?;
            (rep.design.weights().to_vec(), rep.value, Some(rep))
        } else {
            let rel = solve_relaxed_qp(&q, cs, cs.lower(), cs.upper(), &opts.aqua.bnb.qp)?;
            (rel.x, rel.value, None)
        };
        let info = problem.info_from_weights(&x)?;
        if !info.is_nonsingular(tol) {
            break;
        }
        let change = info.sub(&anchor).frobenius_norm() / anchor.frobenius_norm();
        let repeat = prev
            .as_ref()
            .is_some_and(|p| p.iter().zip(&x).all(|(a, b)| (*a - *b).abs() <= T::lit(1e-9)));
        let value = phi(c, &info);
        history.push(IterRecord {
            iteration: j,
            value,
            surrogate,
            anchor_change: change,
            integral,
            weights: x.clone(),
        });
        if let Some(rep) = report {
            let entry = (x.clone(), value, surrogate, rep, anchor.clone());
            if best.as_ref().is_none_or(|b| value > b.1) {
                best = Some(entry.clone());
            }
            last = Some(entry);
        }
        anchor = info;
        if opts.relax_intermediate && final_pass {
            break;
        }
        if repeat || change < T::lit(opts.anchor_tol) {
            converged = true;
            if integral {
                break;
            }
            final_pass = true;
        }
        prev = Some(x);
    }
    let chosen = if converged { last } else { best.or(last) };
    let Some((x, value, surrogate, report, used_anchor)) = chosen else {
        return Err(Error::SingularMatrix { ratio: 0.0 });
    };
    let info = problem.info_from_weights(&x)?;
    let eff = match &opts.aqua.reference {
        Some(r) => Some(efficiency(c, &info, r)?),
        None => None,
    };
    Ok(AquaResult {
        design: Design::new(x, true)?,
        info,
        value,
        surrogate,
        anchor_value: phi(c, &used_anchor),
        anchor: used_anchor,
        efficiency: eff,
        history,
        report: Some(report),
        converged,
    })
}

/// Apportions `size` trials to the support of `w`: ceilings of
/// `(N − s/2)·w_i/Σw`, then unit adjustments until the total is `N`.
pub fn efficient_rounding<T: Scalar>(w: &[T], size: u64) -> Result<Vec<u64>> {
    let s = w.len();
    if s == 0 || w.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::BadParams("weights must be positive and finite".into()));
    }
    if size < s as u64 {
        return Err(Error::TooFewTrials {
            support: s,
            trials: size as usize,
        });
    }
    let total = w.iter().fold(T::zero(), |a, &b| a + b);
    let base = T::from_u64(size).expect("size representable") - T::lit(s as f64 / 2.0);
    let mut counts: Vec<u64> = w
        .iter()
        .map(|&x| (base * x / total).ceil().to_f64_lossy().max(1.0) as u64)
        .collect();
    let ratio = |c: u64, x: T| T::from_u64(c).expect("count representable") / x;
    let mut sum: u64 = counts.iter().sum();
    while sum < size {
        let j = (0..s)
            .min_by(|&a, &b| ratio(counts[a], w[a]).partial_cmp(&ratio(counts[b], w[b])).unwrap())
            .expect("non-empty support");
        counts[j] += 1;
        sum += 1;
    }
    while sum > size {
        let j = (0..s)
            .max_by(|&a, &b| {
                ratio(counts[a] - 1, w[a])
                    .partial_cmp(&ratio(counts[b] - 1, w[b]))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .expect("non-empty support");
        counts[j] -= 1;
        sum -= 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicqpObjective {
    pub linear: Vec<f64>,
    pub aux_r: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicqpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: String,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicqpLinks {
    pub a_row: usize,
    pub b_row: usize,
    pub v_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicqpCone {
    #[serde(rename = "type")]
    pub kind: String,
    pub order: usize,
    pub links: MicqpLinks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicqpMetadata {
    pub anchor_criterion: String,
    pub p: u32,
    pub gamma: Option<f64>,
    pub a_scale: f64,
    pub c_offset: f64,
    #[serde(rename = "V_matrix")]
    pub v_matrix: Vec<Vec<f64>>,
}

/// Conic form of the surrogate problem. Variables are laid out as
/// `(ξ_1..ξ_n, v_1..v_t, r, a, b)`; without a quadratic part only `ξ` remains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicqpDocument {
    pub schema: String,
    pub n: usize,
    pub t: usize,
    pub objective: MicqpObjective,
    pub rows: Vec<MicqpRow>,
    /// `[lower, upper]` per variable; `null` is unbounded.
    pub bounds: Vec<(Option<f64>, Option<f64>)>,
    pub integrality: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<MicqpCone>,
    pub metadata: MicqpMetadata,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Orthogonal map taking `(1/2, r, Sᵀξ)` to the cone coordinates `(a, b, v)`.
pub fn rotation_matrix(t: usize) -> Vec<Vec<f64>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let d = t + 2;
    let mut v = vec![vec![0.0; d]; d];
    v[0][0] = h;
    v[0][1] = h;
    v[1][0] = h;
    v[1][1] = -h;
    for i in 2..d {
        v[i][i] = 1.0;
    }
    v
}

impl MicqpDocument {
    pub fn build<T: Scalar>(q: &QuadModel<T>, cs: &ConstraintSet<T>) -> Result<Self> {
        let (n, t) = (q.n(), q.t());
        if cs.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: cs.n() });
        }
        let f = |x: T| x.to_f64_lossy();
        let mut rows: Vec<MicqpRow> = cs
            .rows()
            .iter()
            .map(|r| MicqpRow {
                coeffs: r.coeffs.iter().map(|&(j, v)| (j, f(v))).collect(),
                sense: match r.sense {
                    Sense::Le => "<=".into(),
                    Sense::Eq => "=".into(),
                },
                rhs: f(r.rhs),
            })
            .collect();
        let mut bounds: Vec<(Option<f64>, Option<f64>)> =
            (0..n).map(|j| (finite(f(cs.lower()[j])), finite(f(cs.upper()[j])))).collect();
        let mut integrality = cs.integer().to_vec();
        let cone = if t > 0 {
            let (r, a, b) = (n + t, n + t + 1, n + t + 2);
            let s2 = 2.0 * std::f64::consts::SQRT_2;
            let a_row = rows.len();
            rows.push(MicqpRow {
                coeffs: vec![(r, -2.0), (a, s2)],
                sense: "=".into(),
                rhs: 1.0,
            });
            let b_row = rows.len();
            rows.push(MicqpRow {
                coeffs: vec![(r, 2.0), (b, s2)],
                sense: "=".into(),
                rhs: 1.0,
            });
            let mut v_rows = Vec::with_capacity(t);
            for k in 0..t {
                let mut coeffs: Vec<(usize, f64)> = (0..n)
                    .filter_map(|i| {
                        let s = f(q.s_row(i)[k]);
                        (s != 0.0).then_some((i, s))
                    })
                    .collect();
                coeffs.push((n + k, -1.0));
                v_rows.push(rows.len());
                rows.push(MicqpRow {
                    coeffs,
                    sense: "=".into(),
                    rhs: 0.0,
                });
            }
            bounds.extend(std::iter::repeat_n((None, None), t + 3));
            integrality.extend(std::iter::repeat_n(false, t + 3));
            Some(MicqpCone {
                kind: "second_order".into(),
                order: t + 2,
                links: MicqpLinks { a_row, b_row, v_rows },
            })
        } else {
            None
        };
        Ok(Self {
            schema: SCHEMA.into(),
            n,
            t,
            objective: MicqpObjective {
                linear: q.h().iter().map(|&x| f(x)).collect(),
                aux_r: t > 0,
            },
            rows,
            bounds,
            integrality,
            cone,
            metadata: MicqpMetadata {
                anchor_criterion: q.criterion().to_string(),
                p: q.p(),
                gamma: q.gamma().map(f),
                a_scale: f(q.scale()),
                c_offset: f(q.offset()),
                v_matrix: rotation_matrix(t),
            },
        })
    }

    pub fn variables(&self) -> usize {
        if self.t > 0 {
            self.n + self.t + 3
        } else {
            self.n
        }
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadParams(msg));
        if self.schema != SCHEMA {
            return bad(format!("unknown schema {:?}", self.schema));
        }
        let nv = self.variables();
        if self.objective.linear.len() != self.n {
            return bad("objective length differs from n".into());
        }
        if self.bounds.len() != nv || self.integrality.len() != nv {
            return bad(format!("bounds and integrality need {nv} entries"));
        }
        if self.objective.linear.iter().any(|x| !x.is_finite()) {
            return bad("objective has non-finite entries".into());
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.sense != "<=" && row.sense != "=" {
                return bad(format!("row {i} has sense {:?}", row.sense));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|&(j, v)| j >= nv || !v.is_finite()) {
                return bad(format!("row {i} is malformed"));
            }
        }
        for (j, (lo, up)) in self.bounds.iter().enumerate() {
            if let (Some(lo), Some(up)) = (lo, up) {
                if lo > up {
                    return bad(format!("variable {j} has empty bounds"));
                }
            }
        }
        let d = self.t + 2;
        let v = &self.metadata.v_matrix;
        if v.len() != d || v.iter().any(|r| r.len() != d) {
            return bad("V_matrix has the wrong order".into());
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| v[k][i] * v[k][j]).sum();
                if (dot - if i == j { 1.0 } else { 0.0 }).abs() > 1e-12 {
                    return bad("V_matrix is not orthogonal".into());
                }
            }
        }
        match (&self.cone, self.t) {
            (None, 0) => {
                if self.objective.aux_r {
                    return bad("aux_r without a cone".into());
                }
            }
            (Some(cone), t) if t > 0 => {
                let links = &cone.links;
                if cone.kind != "second_order" || cone.order != t + 2 || links.v_rows.len() != t {
                    return bad("cone block does not match t".into());
                }
                if !self.objective.aux_r {
                    return bad("cone present but aux_r is false".into());
                }
                let nr = self.rows.len();
                if links.a_row >= nr || links.b_row >= nr || links.v_rows.iter().any(|&r| r >= nr) {
                    return bad("cone links point past the rows".into());
                }
            }
            _ => return bad("cone block presence does not match t".into()),
        }
        Ok(())
    }

    /// Completes `ξ` to the auxiliary variables on the cone boundary and
    /// returns `(objective, a² − b² − |v|², a)`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<(f64, f64, f64)> {
        if xi.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: xi.len() });
        }
        let lin: f64 = self.objective.linear.iter().zip(xi).map(|(h, x)| h * x).sum();
        let Some(cone) = &self.cone else {
            return Ok((lin, 0.0, 0.0));
        };
        let (n, t) = (self.n, self.t);
        let (r_idx, a_idx, b_idx) = (n + t, n + t + 1, n + t + 2);
        let mut v = vec![0.0; t];
        for (k, &row) in cone.links.v_rows.iter().enumerate() {
            let row = &self.rows[row];
            let own = row.coeffs.iter().find(|c| c.0 == n + k).map_or(-1.0, |c| c.1);
            let s: f64 = row.coeffs.iter().filter(|c| c.0 < n).map(|&(i, c)| c * xi[i]).sum();
            v[k] = (row.rhs - s) / own;
        }
        let r: f64 = v.iter().map(|x| x * x).sum();
        let solve = |row: &MicqpRow, var: usize| {
            let coef = |j| row.coeffs.iter().find(|c| c.0 == j).map_or(0.0, |c| c.1);
            (row.rhs - coef(r_idx) * r) / coef(var)
        };
        let a = solve(&self.rows[cone.links.a_row], a_idx);
        let b = solve(&self.rows[cone.links.b_row], b_idx);
        Ok((lin - r, a * a - b * b - r, a))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        doc.validate()?;
        Ok(doc)
    }
}

/// Writes the conic form of the surrogate problem to `path`.
pub fn export_micqp<T: Scalar>(q: &QuadModel<T>, cs: &ConstraintSet<T>, path: &Path) -> Result<MicqpDocument> {
    let doc = MicqpDocument::build(q, cs)?;
    std::fs::write(path, doc.to_json()?)?;
    Ok(doc)
}
