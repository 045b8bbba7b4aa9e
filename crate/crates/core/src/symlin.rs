//! Dense symmetric-matrix kernels for small orders.
//!
//! Half-vectorization uses the column-major lower triangle:
//! `(1,1), (2,1), ..., (m,1), (2,2), ..., (m,m)`. Every quantity expressed in
//! vech coordinates (duplication matrix, Kronecker sandwiches, linear terms)
//! shares this ordering.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A real symmetric matrix with bit-exact symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T: Scalar> {
    inner: DMatrix<T>,
}

impl<T: Scalar> SymMatrix<T> {
    /// Wraps a square matrix, rejecting any asymmetry.
    pub fn new(inner: DMatrix<T>) -> Result<Self> {
        if inner.nrows() != inner.ncols() {
            return Err(Error::DimensionMismatch {
                expected: inner.nrows(),
                found: inner.ncols(),
            });
        }
        if inner.nrows() == 0 {
            return Err(Error::BadParams("matrix order must be positive".into()));
        }
        let m = inner.nrows();
        for j in 0..m {
            for i in j + 1..m {
                if inner[(i, j)] != inner[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { inner })
    }

    /// Builds `(A + Aᵀ)/2`, which is exactly symmetric in floating point.
    pub fn symmetrize(a: &DMatrix<T>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "symmetrize needs a square matrix");
        let m = a.nrows();
        let half = T::lit(0.5);
        let inner = DMatrix::from_fn(m, m, |i, j| (a[(i, j)] + a[(j, i)]) * half);
        Self { inner }
    }

    /// Fills the lower triangle from `f(i, j)` with `i >= j` and mirrors it.
    pub fn from_lower_fn(m: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut inner = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in j..m {
                let v = f(i, j);
                inner[(i, j)] = v;
                inner[(j, i)] = v;
            }
        }
        Self { inner }
    }

    pub fn zeros(m: usize) -> Self {
        Self { inner: DMatrix::zeros(m, m) }
    }

    pub fn identity(m: usize) -> Self {
        Self { inner: DMatrix::identity(m, m) }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let m = d.len();
        Self::from_lower_fn(m, |i, j| if i == j { d[i] } else { T::zero() })
    }

    /// `f fᵀ`.
    pub fn outer(f: &[T]) -> Self {
        Self::from_lower_fn(f.len(), |i, j| f[i] * f[j])
    }

    /// Builds from a row-major slice of length `m*m`, requiring exact symmetry.
    pub fn from_row_slice(m: usize, data: &[T]) -> Result<Self> {
        if data.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(m, m, data))
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.inner[(i, j)]
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.inner
    }

    pub fn trace(&self) -> T {
        self.inner.trace()
    }

    /// `tr(self · other)` for symmetric arguments, i.e. the Frobenius inner product.
    pub fn dot(&self, other: &Self) -> T {
        self.inner.dot(&other.inner)
    }

    pub fn frobenius_norm(&self) -> T {
        self.inner.norm()
    }

    pub fn scale(&self, c: T) -> Self {
        Self { inner: &self.inner * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { inner: &self.inner + &other.inner }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { inner: &self.inner - &other.inner }
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: T, other: &Self) {
        for (a, b) in self.inner.iter_mut().zip(other.inner.iter()) {
            *a += c * *b;
        }
    }

    /// Plain product; generally not symmetric.
    pub fn mul(&self, other: &Self) -> DMatrix<T> {
        &self.inner * &other.inner
    }

    /// `B · self · Bᵀ` for a general square `B`, symmetrized.
    pub fn congruence(&self, b: &DMatrix<T>) -> Self {
        Self::symmetrize(&(b * &self.inner * b.transpose()))
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<T>, DMatrix<T>) {
        let eig = SymmetricEigen::new(self.inner.clone());
        let m = self.order();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = idx.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(m, m, |i, c| eig.eigenvectors[(i, idx[c])]);
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.eigen().0
    }

    /// `V f(Λ) Vᵀ` from one eigendecomposition.
    pub fn spectral_map(&self, f: impl Fn(T) -> T) -> Self {
        let (values, vectors) = self.eigen();
        spectral_rebuild(&values, &vectors, f)
    }

    /// Ratio smallest/largest eigenvalue; non-positive for singular or indefinite input.
    pub fn condition_ratio(&self) -> T {
        let ev = self.eigenvalues();
        let hi = ev[ev.len() - 1];
        if hi <= T::zero() {
            return T::zero();
        }
        ev[0] / hi
    }

    pub fn is_nonsingular(&self, rel_tol: T) -> bool {
        self.condition_ratio() > rel_tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    /// Clips eigenvalues to be non-negative, provided none is below `-tol·λmax`.
    pub fn clip_psd(&self, tol: T) -> Result<Self> {
        let (values, vectors) = self.eigen();
        let scale = values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if scale == T::zero() {
            return Ok(self.clone());
        }
        if values[0] < -tol * scale {
            return Err(Error::NotPsd {
                eigenvalue: values[0].to_f64_lossy(),
                scale: scale.to_f64_lossy(),
            });
        }
        if values[0] >= T::zero() {
            return Ok(self.clone());
        }
        Ok(spectral_rebuild(&values, &vectors, |l| l.max(T::zero())))
    }
}

fn spectral_rebuild<T: Scalar>(values: &[T], vectors: &DMatrix<T>, f: impl Fn(T) -> T) -> SymMatrix<T> {
    let mapped: Vec<T> = values.iter().map(|&l| f(l)).collect();
    rebuild_with_diagonal(&mapped, vectors)
}

/// `m(m+1)/2`.
#[inline]
pub fn vech_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of entry `(i, j)` (any order) inside `vech`.
#[inline]
pub fn vech_index(i: usize, j: usize, m: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * m - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Column-stacked lower triangle including the diagonal.
pub fn vech<T: Scalar>(m: &SymMatrix<T>) -> DVector<T> {
    let k = m.order();
    let mut out = Vec::with_capacity(vech_len(k));
    for j in 0..k {
        for i in j..k {
            out.push(m.get(i, j));
        }
    }
    DVector::from_vec(out)
}

/// `Gᵀ vec(N)`: the vech of `N` with off-diagonal entries doubled, so that
/// `tr(N M) = vech_doubled(N)ᵀ vech(M)`.
pub fn vech_doubled<T: Scalar>(n: &SymMatrix<T>) -> DVector<T> {
    let k = n.order();
    let two = T::lit(2.0);
    let mut out = Vec::with_capacity(vech_len(k));
    for j in 0..k {
        for i in j..k {
            out.push(if i == j { n.get(i, j) } else { two * n.get(i, j) });
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`vech`].
pub fn unvech<T: Scalar>(v: &[T], m: usize) -> Result<SymMatrix<T>> {
    if v.len() != vech_len(m) {
        return Err(Error::DimensionMismatch {
            expected: vech_len(m),
            found: v.len(),
        });
    }
    let mut pos = 0;
    let mut inner = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in j..m {
            inner[(i, j)] = v[pos];
            inner[(j, i)] = v[pos];
            pos += 1;
        }
    }
    Ok(SymMatrix { inner })
}

/// Column-stacked `vec`.
pub fn vec<T: Scalar>(m: &SymMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_matrix().as_slice())
}

/// The 0/1 matrix `G_m` with `G_m vech(M) = vec(M)`.
pub fn duplication_matrix<T: Scalar>(m: usize) -> DMatrix<T> {
    let s = vech_len(m);
    let mut g = DMatrix::zeros(m * m, s);
    for c in 0..m {
        for r in 0..m {
            g[(r + c * m, vech_index(r, c, m))] = T::one();
        }
    }
    g
}

/// `[M⁻¹, M⁻², …, M⁻ᵏ]` from one symmetric eigendecomposition.
pub fn neg_powers<T: Scalar>(m: &SymMatrix<T>, k: usize) -> Result<Vec<SymMatrix<T>>> {
    neg_powers_with_tol(m, k, T::lit(T::SINGULAR_TOL))
}

pub fn neg_powers_with_tol<T: Scalar>(m: &SymMatrix<T>, k: usize, rel_tol: T) -> Result<Vec<SymMatrix<T>>> {
    let (values, vectors) = m.eigen();
    let hi = values[values.len() - 1];
    let lo = values[0];
    if hi <= T::zero() || lo <= rel_tol * hi {
        let ratio = if hi > T::zero() { lo / hi } else { T::zero() };
        return Err(Error::SingularMatrix { ratio: ratio.to_f64_lossy() });
    }
    let inv: Vec<T> = values.iter().map(|&l| T::one() / l).collect();
    let mut out = Vec::with_capacity(k);
    let mut pw: Vec<T> = vec![T::one(); values.len()];
    for _ in 0..k {
        for (p, &iv) in pw.iter_mut().zip(&inv) {
            *p *= iv;
        }
        out.push(rebuild_with_diagonal(&pw, &vectors));
    }
    Ok(out)
}

fn rebuild_with_diagonal<T: Scalar>(diag: &[T], vectors: &DMatrix<T>) -> SymMatrix<T> {
    let m = diag.len();
    let mut scaled = vectors.clone();
    for (c, &d) in diag.iter().enumerate() {
        for i in 0..m {
            scaled[(i, c)] *= d;
        }
    }
    SymMatrix::symmetrize(&(scaled * vectors.transpose()))
}

/// `G_mᵀ (A ⊗ B) G_m`, the `s×s` matrix with
/// `vech(M)ᵀ R vech(M) = tr(B M A M)` for every symmetric `M`.
pub fn kron_sandwich<T: Scalar>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let m = a.order();
    if b.order() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: b.order(),
        });
    }
    let s = vech_len(m);
    // vec positions (row, col) covered by each vech slot
    let mut slots: Vec<[(usize, usize); 2]> = Vec::with_capacity(s);
    let mut twin: Vec<bool> = Vec::with_capacity(s);
    for j in 0..m {
        for i in j..m {
            slots.push([(i, j), (j, i)]);
            twin.push(i != j);
        }
    }
    let mut out = DMatrix::zeros(s, s);
    for u in 0..s {
        for v in 0..=u {
            let mut acc = T::zero();
            let nu = if twin[u] { 2 } else { 1 };
            let nv = if twin[v] { 2 } else { 1 };
            for &(r, c) in &slots[u][..nu] {
                for &(r2, c2) in &slots[v][..nv] {
                    acc += a.get(c, c2) * b.get(r, r2);
                }
            }
            out[(u, v)] = acc;
            out[(v, u)] = acc;
        }
    }
    Ok(SymMatrix { inner: out })
}

/// Rank-revealing factor `C̃` with `Q̃ ≈ C̃ C̃ᵀ`.
#[derive(Debug, Clone)]
pub struct PsdFactor<T: Scalar> {
    pub order: usize,
    pub rank: usize,
    pub factor: DMatrix<T>,
    pub residual: T,
}

/// Eigendecomposition-based factorization with eigenvalue clipping: eigenvalues
/// below `tol·λmax` are dropped, and an eigenvalue below `-tol·λmax` is an error.
pub fn psd_factor<T: Scalar>(q: &SymMatrix<T>, tol: T) -> Result<PsdFactor<T>> {
    psd_factor_scaled(q, tol, T::zero())
}

/// As [`psd_factor`], with thresholds relative to `max(λmax, reference)`. Use a
/// reference magnitude when `q` is a difference of terms that may cancel.
pub fn psd_factor_scaled<T: Scalar>(q: &SymMatrix<T>, tol: T, reference: T) -> Result<PsdFactor<T>> {
    let s = q.order();
    let (values, vectors) = q.eigen();
    let hi = values[s - 1].max(reference);
    let scale = values.iter().fold(reference, |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return Ok(PsdFactor {
            order: s,
            rank: 0,
            factor: DMatrix::zeros(s, 0),
            residual: T::zero(),
        });
    }
    if values[0] < -tol * hi.max(T::zero()) && values[0] < -tol * scale {
        return Err(Error::NotPsd {
            eigenvalue: values[0].to_f64_lossy(),
            scale: scale.to_f64_lossy(),
        });
    }
    let keep: Vec<usize> = (0..s).rev().filter(|&k| values[k] > tol * hi).collect();
    let t = keep.len();
    let mut factor = DMatrix::zeros(s, t);
    for (c, &k) in keep.iter().enumerate() {
        let sq = values[k].sqrt();
        for i in 0..s {
            factor[(i, c)] = vectors[(i, k)] * sq;
        }
    }
    let recon = &factor * factor.transpose();
    let residual = q
        .as_matrix()
        .iter()
        .zip(recon.iter())
        .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
    Ok(PsdFactor {
        order: s,
        rank: t,
        factor,
        residual,
    })
}
