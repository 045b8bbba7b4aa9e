//! Regression models as lists of elementary information matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::symlin::{vech, vech_len, SymMatrix};

/// Relative tolerance on negative eigenvalues of user-supplied elementary matrices.
pub const ELEMENTARY_PSD_TOL: f64 = 1e-9;

/// A finite design space: one PSD elementary information matrix per point.
#[derive(Debug, Clone)]
pub struct DesignProblem<T: Scalar> {
    m: usize,
    elem: Vec<SymMatrix<T>>,
    regressors: Option<DMatrix<T>>,
    points: Option<Vec<Vec<T>>>,
    labels: Option<Vec<String>>,
}

impl<T: Scalar> DesignProblem<T> {
    /// Univariate-response model: `H_i = f_i f_iᵀ` for each row `f_i` of `f`.
    pub fn from_regressors(f: DMatrix<T>) -> Result<Self> {
        let (n, m) = f.shape();
        if n == 0 || m == 0 {
            return Err(Error::BadParams("regressor matrix must be non-empty".into()));
        }
        let elem = (0..n)
            .map(|i| {
                let row: Vec<T> = f.row(i).iter().copied().collect();
                SymMatrix::outer(&row)
            })
            .collect();
        Ok(Self {
            m,
            elem,
            regressors: Some(f),
            points: None,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: bad.len(),
            });
        }
        Self::from_regressors(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    /// General elementary matrices (grouped or multivariate observations).
    /// Slightly negative eigenvalues are clipped; clearly indefinite input is rejected.
    pub fn from_elementary(elem: Vec<SymMatrix<T>>) -> Result<Self> {
        let m = elem.first().map(SymMatrix::order).ok_or_else(|| {
            Error::BadParams("at least one elementary matrix is required".into())
        })?;
        let tol = T::lit(ELEMENTARY_PSD_TOL);
        let elem = elem
            .into_iter()
            .map(|h| {
                if h.order() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: h.order(),
                    });
                }
                h.clip_psd(tol)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            m,
            elem,
            regressors: None,
            points: None,
            labels: None,
        })
    }

    pub fn with_points(mut self, points: Vec<Vec<T>>) -> Result<Self> {
        if points.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: points.len(),
            });
        }
        self.points = Some(points);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.elem.len()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn elementary(&self) -> &[SymMatrix<T>] {
        &self.elem
    }

    pub fn regressors(&self) -> Option<&DMatrix<T>> {
        self.regressors.as_ref()
    }

    pub fn points(&self) -> Option<&[Vec<T>]> {
        self.points.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// The `n×s` matrix whose rows are `vech(H_i)`.
    pub fn vech_matrix(&self) -> DMatrix<T> {
        let s = vech_len(self.m);
        let mut out = DMatrix::zeros(self.n(), s);
        for (i, h) in self.elem.iter().enumerate() {
            let v = vech(h);
            for u in 0..s {
                out[(i, u)] = v[u];
            }
        }
        out
    }

    /// `M(ξ) = Σ ξ_i H_i`.
    pub fn info_matrix(&self, design: &Design<T>) -> Result<SymMatrix<T>> {
        self.info_from_weights(design.weights())
    }

    pub fn info_from_weights(&self, w: &[T]) -> Result<SymMatrix<T>> {
        if w.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: w.len(),
            });
        }
        let m = self.m;
        let mut acc = DMatrix::zeros(m, m);
        for (h, &wi) in self.elem.iter().zip(w) {
            if wi != T::zero() {
                for (a, b) in acc.iter_mut().zip(h.as_matrix().iter()) {
                    *a += wi * *b;
                }
            }
        }
        SymMatrix::new(acc)
    }

    /// Sub-problem on the listed points, in the given order.
    pub fn restrict(&self, idx: &[usize]) -> Result<Self> {
        for &i in idx {
            if i >= self.n() {
                return Err(Error::IndexOutOfRange { index: i, len: self.n() });
            }
        }
        Ok(Self {
            m: self.m,
            elem: idx.iter().map(|&i| self.elem[i].clone()).collect(),
            regressors: self
                .regressors
                .as_ref()
                .map(|f| DMatrix::from_fn(idx.len(), self.m, |r, c| f[(idx[r], c)])),
            points: self
                .points
                .as_ref()
                .map(|p| idx.iter().map(|&i| p[i].clone()).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i].clone()).collect()),
        })
    }

    /// Problem whose point `g` stands for the whole group `groups[g]` moving together.
    pub fn aggregate(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let mut elem = Vec::with_capacity(groups.len());
        for g in groups {
            let mut acc = SymMatrix::zeros(self.m);
            for &i in g {
                if i >= self.n() {
                    return Err(Error::IndexOutOfRange { index: i, len: self.n() });
                }
                acc.axpy(T::one(), &self.elem[i]);
            }
            elem.push(acc);
        }
        Ok(Self {
            m: self.m,
            elem,
            regressors: None,
            points: None,
            labels: None,
        })
    }
}

/// Non-negative trial weights over the design points.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T: Scalar> {
    weights: Vec<T>,
    integral: bool,
}

impl<T: Scalar> Design<T> {
    pub fn new(weights: Vec<T>, integral: bool) -> Result<Self> {
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= T::zero()) {
                return Err(Error::BadParams(format!("weight {i} is negative or NaN")));
            }
            if integral && (w - w.round()).abs() > T::lit(1e-9) {
                return Err(Error::BadParams(format!("weight {i} is not an integer")));
            }
        }
        Ok(Self { weights, integral })
    }

    pub fn approximate(weights: Vec<T>) -> Result<Self> {
        Self::new(weights, false)
    }

    pub fn exact(counts: &[u64]) -> Self {
        Self {
            weights: counts.iter().map(|&c| T::lit(c as f64)).collect(),
            integral: true,
        }
    }

    pub fn zeros(n: usize, integral: bool) -> Self {
        Self {
            weights: vec![T::zero(); n],
            integral,
        }
    }

    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    #[inline]
    pub fn is_integral(&self) -> bool {
        self.integral
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn size(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &w| a + w)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > T::zero())
            .collect()
    }

    /// Rounded counts for an integral design.
    pub fn counts(&self) -> Vec<i64> {
        self.weights
            .iter()
            .map(|w| w.round().to_i64().unwrap_or(0))
            .collect()
    }
}

/// `L = Σ η_j V_j` for a finite prediction region.
pub fn moment_matrix<T: Scalar>(v: &[SymMatrix<T>], eta: &[T]) -> Result<SymMatrix<T>> {
    if v.len() != eta.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: eta.len(),
        });
    }
    let m = v.first().map(SymMatrix::order).ok_or(Error::EmptyRegion)?;
    if eta.iter().any(|&e| !(e >= T::zero())) {
        return Err(Error::BadParams("region weights must be non-negative".into()));
    }
    if eta.iter().all(|&e| e == T::zero()) {
        return Err(Error::EmptyRegion);
    }
    let mut acc = SymMatrix::zeros(m);
    for (vj, &e) in v.iter().zip(eta) {
        if vj.order() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: vj.order(),
            });
        }
        acc.axpy(e, vj);
    }
    Ok(acc)
}

/// `L = (1/n) Σ f_i f_iᵀ` over the design space itself.
pub fn uniform_moment_matrix<T: Scalar>(problem: &DesignProblem<T>) -> Result<SymMatrix<T>> {
    let n = problem.n();
    let eta = vec![T::one() / T::from_usize_lossy(n); n];
    moment_matrix(problem.elementary(), &eta)
}

/// Inverse square root `L^{-1/2}` of a positive definite region matrix.
pub fn region_inv_sqrt<T: Scalar>(l: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    if !l.is_nonsingular(T::lit(T::SINGULAR_TOL)) {
        return Err(Error::SingularL);
    }
    Ok(l.spectral_map(|x| T::one() / x.sqrt()))
}

/// Transforms the model so that A-optimality in the result is I-optimality
/// with region matrix `L` in the original: `H̃_i = L^{-1/2} H_i L^{-1/2}`.
pub fn i_to_a<T: Scalar>(problem: &DesignProblem<T>, l: &SymMatrix<T>) -> Result<DesignProblem<T>> {
    if l.order() != problem.m() {
        return Err(Error::DimensionMismatch {
            expected: problem.m(),
            found: l.order(),
        });
    }
    let s_inv = region_inv_sqrt(l)?;
    let si = s_inv.as_matrix();
    let elem = problem
        .elementary()
        .iter()
        .map(|h| h.congruence(si))
        .collect();
    let regressors = problem.regressors().map(|f| f * si);
    Ok(DesignProblem {
        m: problem.m(),
        elem,
        regressors,
        points: problem.points.clone(),
        labels: problem.labels.clone(),
    })
}

/// Transforms a matrix from original to I→A coordinates: `L^{-1/2} M L^{-1/2}`.
pub fn transform_matrix<T: Scalar>(m: &SymMatrix<T>, l: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let s_inv = region_inv_sqrt(l)?;
    Ok(m.congruence(s_inv.as_matrix()))
}
