//! Linear constraint sets on design weights and the LP oracle over them.

mod simplex;

pub use simplex::{Basis, LpShape, LpSolution, LpSolver};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

/// Sparse constraint row `Σ coeffs·ξ (≤ | =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row<T> {
    pub coeffs: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

/// `{ξ : Aξ ≤ b, A_eq ξ = b_eq, l ≤ ξ ≤ u}` with integrality flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T: Scalar> {
    n: usize,
    rows: Vec<Row<T>>,
    lower: Vec<T>,
    upper: Vec<T>,
    integer: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Row(usize),
    Lower(usize),
    Upper(usize),
    Integrality(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub amount: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_integrality_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::Integrality(_)))
    }
}

/// Points merged by the presolve: `ξ_i = z_{map[i]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregation {
    pub groups: Vec<Vec<usize>>,
    pub map: Vec<usize>,
}

impl Aggregation {
    pub fn identity(n: usize) -> Self {
        Self {
            groups: (0..n).map(|i| vec![i]).collect(),
            map: (0..n).collect(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.groups.len() == self.map.len()
    }

    pub fn expand<T: Copy>(&self, z: &[T]) -> Vec<T> {
        self.map.iter().map(|&g| z[g]).collect()
    }

    /// Group values of a design that is constant on every group.
    pub fn restrict<T: Copy>(&self, xi: &[T]) -> Vec<T> {
        self.groups.iter().map(|g| xi[g[0]]).collect()
    }
}

impl<T: Scalar> ConstraintSet<T> {
    /// Non-negative integer designs with no further restrictions.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: Vec::new(),
            lower: vec![T::zero(); n],
            upper: vec![T::infinity(); n],
            integer: vec![true; n],
        }
    }

    /// Designs of size `N`: `1ᵀξ = N`.
    pub fn simplex(n: usize, size: T) -> Self {
        let mut cs = Self::new(n);
        cs.add_size(size);
        cs
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Row<T>] {
        &self.rows
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn integer(&self) -> &[bool] {
        &self.integer
    }

    pub fn add_size(&mut self, size: T) {
        self.rows.push(Row {
            coeffs: (0..self.n).map(|j| (j, T::one())).collect(),
            sense: Sense::Eq,
            rhs: size,
        });
    }

    pub fn add_dense_row(&mut self, coeffs: &[T], sense: Sense, rhs: T) -> Result<()> {
        if coeffs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: coeffs.len(),
            });
        }
        let sparse = coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(j, &v)| (j, v))
            .collect();
        self.add_row(sparse, sense, rhs)
    }

    /// Adds a sparse row; repeated indices are summed and zeros dropped.
    pub fn add_row(&mut self, mut coeffs: Vec<(usize, T)>, sense: Sense, rhs: T) -> Result<()> {
        if let Some(&(j, _)) = coeffs.iter().find(|(j, _)| *j >= self.n) {
            return Err(Error::IndexOutOfRange { index: j, len: self.n });
        }
        if !rhs.is_finite() || coeffs.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::BadParams("constraint data must be finite".into()));
        }
        coeffs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, T)> = Vec::with_capacity(coeffs.len());
        for (j, v) in coeffs {
            match merged.last_mut() {
                Some((lj, lv)) if *lj == j => *lv += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|(_, v)| *v != T::zero());
        self.rows.push(Row {
            coeffs: merged,
            sense,
            rhs,
        });
        Ok(())
    }

    /// `Σ coeffs·ξ ≥ rhs`, stored as the negated `≤` row.
    pub fn add_ge_row(&mut self, coeffs: Vec<(usize, T)>, rhs: T) -> Result<()> {
        self.add_row(coeffs.into_iter().map(|(j, v)| (j, -v)).collect(), Sense::Le, -rhs)
    }

    pub fn set_bounds(&mut self, i: usize, lower: T, upper: T) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        if !lower.is_finite() || lower < T::zero() || upper < lower {
            return Err(Error::BadParams(format!("invalid bounds for variable {i}")));
        }
        self.lower[i] = lower;
        self.upper[i] = upper;
        Ok(())
    }

    /// Caps every weight, e.g. at 1 for designs without replication.
    pub fn set_upper_all(&mut self, upper: T) {
        for (u, &l) in self.upper.iter_mut().zip(&self.lower) {
            *u = upper.max(l);
        }
    }

    pub fn set_integer(&mut self, i: usize, integer: bool) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, len: self.n });
        }
        self.integer[i] = integer;
        Ok(())
    }

    pub fn set_all_integer(&mut self, integer: bool) {
        self.integer.iter_mut().for_each(|v| *v = integer);
    }

    pub fn row_activity(&self, row: &Row<T>, xi: &[T]) -> T {
        row.coeffs.iter().fold(T::zero(), |s, &(j, v)| s + v * xi[j])
    }

    /// Checks rows, bounds and, when `check_integrality`, integrality of flagged weights.
    pub fn feasible(&self, xi: &[T], tol: T, check_integrality: bool) -> Result<FeasibilityReport> {
        if xi.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: xi.len(),
            });
        }
        let mut violations = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(row, xi);
            let excess = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Eq => (act - row.rhs).abs(),
            };
            let scale = T::one().max(row.rhs.abs());
            if excess > tol * scale {
                violations.push(Violation {
                    kind: ViolationKind::Row(r),
                    amount: excess.to_f64_lossy(),
                });
            }
        }
        for j in 0..self.n {
            if xi[j] < self.lower[j] - tol {
                violations.push(Violation {
                    kind: ViolationKind::Lower(j),
                    amount: (self.lower[j] - xi[j]).to_f64_lossy(),
                });
            }
            if xi[j] > self.upper[j] + tol {
                violations.push(Violation {
                    kind: ViolationKind::Upper(j),
                    amount: (xi[j] - self.upper[j]).to_f64_lossy(),
                });
            }
            if check_integrality && self.integer[j] {
                let frac = (xi[j] - xi[j].round()).abs();
                if frac > tol {
                    violations.push(Violation {
                        kind: ViolationKind::Integrality(j),
                        amount: frac.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(FeasibilityReport { violations })
    }

    /// Forces equal weights within each orbit: `q − 1` equality rows per orbit of size `q`.
    pub fn add_symmetry_orbits(&self, orbits: &[Vec<usize>]) -> Result<Self> {
        let mut out = self.clone();
        for orbit in orbits {
            for &i in orbit {
                if i >= self.n {
                    return Err(Error::IndexOutOfRange { index: i, len: self.n });
                }
            }
            for w in orbit.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::BadParams("orbit lists an index twice".into()));
                }
                out.rows.push(Row {
                    coeffs: vec![(w[0], T::one()), (w[1], -T::one())],
                    sense: Sense::Eq,
                    rhs: T::zero(),
                });
            }
        }
        Ok(out)
    }

    /// Checks that the continuous relaxation is non-empty.
    pub fn check_feasible(&self) -> Result<()> {
        LpSolver::new(self).map(|_| ())
    }

    /// Merges variables tied by rows `a·ξ_i − a·ξ_j = 0` into one variable.
    pub fn aggregate(&self) -> Result<(Self, Aggregation)> {
        let n = self.n;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let is_tie = |row: &Row<T>| {
            row.sense == Sense::Eq
                && row.rhs == T::zero()
                && row.coeffs.len() == 2
                && row.coeffs[0].1 == -row.coeffs[1].1
        };
        let mut any = false;
        for row in &self.rows {
            if is_tie(row) {
                let a = find(&mut parent, row.coeffs[0].0);
                let b = find(&mut parent, row.coeffs[1].0);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
                any = true;
            }
        }
        if !any {
            return Ok((self.clone(), Aggregation::identity(n)));
        }
        let mut group_of_root = vec![usize::MAX; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut map = vec![0; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            if group_of_root[r] == usize::MAX {
                group_of_root[r] = groups.len();
                groups.push(Vec::new());
            }
            map[i] = group_of_root[r];
            groups[map[i]].push(i);
        }
        let g = groups.len();
        let mut out = Self::new(g);
        for (gi, members) in groups.iter().enumerate() {
            let lo = members.iter().fold(T::zero(), |m, &i| m.max(self.lower[i]));
            let up = members.iter().fold(T::infinity(), |m, &i| m.min(self.upper[i]));
            if lo > up {
                return Err(Error::Infeasible);
            }
            out.lower[gi] = lo;
            out.upper[gi] = up;
            out.integer[gi] = members.iter().any(|&i| self.integer[i]);
        }
        let mut seen: Vec<Row<T>> = Vec::new();
        for row in &self.rows {
            if is_tie(row) {
                continue;
            }
            let coeffs: Vec<(usize, T)> = row.coeffs.iter().map(|&(j, v)| (map[j], v)).collect();
            let mut tmp = Self::new(g);
            tmp.add_row(coeffs, row.sense, row.rhs)?;
            let reduced = tmp.rows.pop().expect("row just added");
            if reduced.coeffs.is_empty() {
                let ok = match reduced.sense {
                    Sense::Le => reduced.rhs >= T::zero(),
                    Sense::Eq => reduced.rhs == T::zero(),
                };
                if !ok {
                    return Err(Error::Infeasible);
                }
                continue;
            }
            if !seen.contains(&reduced) {
                seen.push(reduced);
            }
        }
        out.rows = seen;
        Ok((out, Aggregation { groups, map }))
    }
}

/// Maximizes `cᵀξ` over the continuous relaxation.
pub fn lp_max<T: Scalar>(c: &[T], cs: &ConstraintSet<T>) -> Result<LpSolution<T>> {
    LpSolver::new(cs)?.maximize(c)
}
