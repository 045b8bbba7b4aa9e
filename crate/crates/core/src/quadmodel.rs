//! Quadratic surrogate `φ(ξ) = hᵀξ − |Sᵀξ|²` of a criterion around an anchor matrix.

use nalgebra::{DMatrix, DVector};

use crate::criteria::{phi, Criterion};
use crate::error::{Error, Result};
use crate::model::{i_to_a, transform_matrix, DesignProblem};
use crate::scalar::Scalar;
use crate::symlin::{kron_sandwich, neg_powers, psd_factor_scaled, vech_doubled, vech_len, SymMatrix};

/// Surrogate of a criterion, stored in low-rank form.
#[derive(Debug, Clone)]
pub struct QuadModel<T: Scalar> {
    criterion: Criterion<T>,
    anchor: SymMatrix<T>,
    p: u32,
    gamma: Option<T>,
    a: T,
    c: T,
    h_tilde: DVector<T>,
    q_tilde: SymMatrix<T>,
    c_tilde: DMatrix<T>,
    h: Vec<T>,
    /// Row-major `n×t`.
    s: Vec<T>,
    t: usize,
    row_norms: Vec<T>,
}

/// Scalars of the expansion: `Q̃ = k_f Σ_r (M^{-p-2+r} ⊗ M^{-r}) + k_h h̃h̃ᵀ/τ`.
#[derive(Debug, Clone, Copy)]
struct Expansion<T> {
    gamma: Option<T>,
    tau: T,
    k_f: T,
    k_h: T,
    a: T,
    c: T,
}

fn expansion<T: Scalar>(c: &Criterion<T>, mstar: &SymMatrix<T>, powers: &[SymMatrix<T>]) -> Result<Expansion<T>> {
    let m = mstar.order();
    let half = T::lit(0.5);
    let (p, gamma) = match c {
        Criterion::Positive { p } => (*p, T::one()),
        Criterion::Negative { p } => (*p, -T::one()),
        Criterion::Blend { p, gamma } => (*p, *gamma),
        Criterion::LogDet => (0, gamma_d(mstar)?),
        Criterion::I { .. } => (1, -T::one()),
    };
    let tau = if p == 0 {
        T::from_usize_lossy(m)
    } else {
        powers[p as usize - 1].trace()
    };
    let phi_plus = phi(&Criterion::Positive { p }, mstar);
    let phi_minus = phi(&Criterion::Negative { p }, mstar);
    let a_plus = phi_plus / tau;
    let a_minus = -T::lit(3.0) * phi_minus / tau;
    let c_minus = T::lit(3.0) * phi_minus;
    let wp = (T::one() + gamma) * half;
    let wm = (T::one() - gamma) * half;
    let a = wp * a_plus + wm * a_minus;
    let alpha_plus = wp * a_plus / a;
    let alpha_minus = wm * a_minus / a;
    let pf = T::lit(p as f64);
    let k_f = alpha_plus * half + alpha_minus / T::lit(6.0);
    let k_h = -alpha_plus * (pf + T::one()) * half + alpha_minus * (T::one() - pf) / T::lit(6.0);
    let (a, c_off) = match c {
        Criterion::LogDet => {
            let ld = phi(&Criterion::LogDet, mstar);
            (T::lit(2.0), ld - T::lit(1.5) * T::from_usize_lossy(m))
        }
        Criterion::I { .. } => {
            let mf = T::from_usize_lossy(m);
            (mf * a, mf * wm * c_minus)
        }
        _ => (a, wm * c_minus),
    };
    Ok(Expansion {
        gamma: match c {
            Criterion::I { .. } => None,
            _ => Some(gamma),
        },
        tau,
        k_f,
        k_h,
        a,
        c: c_off,
    })
}

fn checked_powers<T: Scalar>(mstar: &SymMatrix<T>, p: u32) -> Result<Vec<SymMatrix<T>>> {
    neg_powers(mstar, p as usize + 1)
}

impl<T: Scalar> QuadModel<T> {
    /// Expands `c` around `mstar`. I-criteria are expanded in the transformed model.
    pub fn build(problem: &DesignProblem<T>, c: &Criterion<T>, mstar: &SymMatrix<T>, tol: T) -> Result<Self> {
        if mstar.order() != problem.m() {
            return Err(Error::DimensionMismatch {
                expected: problem.m(),
                found: mstar.order(),
            });
        }
        let (work_problem, work_anchor);
        let (prob, anchor) = if let Criterion::I { l } = c {
            work_problem = i_to_a(problem, l)?;
            work_anchor = transform_matrix(mstar, l)?;
            (&work_problem, &work_anchor)
        } else {
            (problem, mstar)
        };
        let p = c.p();
        let powers = checked_powers(anchor, p)?;
        let ex = expansion(c, anchor, &powers)?;

        let w = &powers[p as usize];
        let h_tilde = vech_doubled(w);
        let s_len = vech_len(anchor.order());
        let mut kron = DMatrix::<T>::zeros(s_len, s_len);
        for r in 1..=(p as usize + 1) {
            kron += kron_sandwich(&powers[p as usize + 1 - r], &powers[r - 1])?.as_matrix();
        }
        let rank_one = &h_tilde * h_tilde.transpose();
        let reference = ex.k_f.abs() * kron.norm() + (ex.k_h / ex.tau).abs() * rank_one.norm();
        let q = kron * ex.k_f + rank_one * (ex.k_h / ex.tau);
        let q_tilde = SymMatrix::symmetrize(&q);
        let factor = psd_factor_scaled(&q_tilde, tol, reference)?;
        let c_tilde = factor.factor;
        let t = factor.rank;

        let hm = prob.vech_matrix();
        let h: Vec<T> = (&hm * &h_tilde).iter().copied().collect();
        let s_mat = &hm * &c_tilde;
        let n = prob.n();
        let mut s = Vec::with_capacity(n * t);
        for i in 0..n {
            for j in 0..t {
                s.push(s_mat[(i, j)]);
            }
        }
        let row_norms = (0..n)
            .map(|i| s[i * t..(i + 1) * t].iter().fold(T::zero(), |a, &x| a + x * x))
            .collect();
        Ok(Self {
            criterion: c.clone(),
            anchor: mstar.clone(),
            p,
            gamma: ex.gamma,
            a: ex.a,
            c: ex.c,
            h_tilde,
            q_tilde,
            c_tilde,
            h,
            s,
            t,
            row_norms,
        })
    }

    /// Model whose point `g` stands for the sum of the points in `groups[g]`.
    pub fn aggregate(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let t = self.t;
        let mut h = Vec::with_capacity(groups.len());
        let mut s = Vec::with_capacity(groups.len() * t);
        for g in groups {
            let mut hg = T::zero();
            let mut sg = vec![T::zero(); t];
            for &i in g {
                if i >= self.n() {
                    return Err(Error::IndexOutOfRange { index: i, len: self.n() });
                }
                hg += self.h[i];
                for (acc, &x) in sg.iter_mut().zip(self.s_row(i)) {
                    *acc += x;
                }
            }
            h.push(hg);
            s.extend(sg);
        }
        let row_norms = (0..groups.len())
            .map(|i| s[i * t..(i + 1) * t].iter().fold(T::zero(), |a, &x| a + x * x))
            .collect();
        Ok(Self {
            h,
            s,
            row_norms,
            ..self.clone()
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.h.len()
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn criterion(&self) -> &Criterion<T> {
        &self.criterion
    }

    pub fn anchor(&self) -> &SymMatrix<T> {
        &self.anchor
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Blend parameter actually used; log-det reports its `γ_d`.
    pub fn gamma(&self) -> Option<T> {
        self.gamma
    }

    pub fn scale(&self) -> T {
        self.a
    }

    pub fn offset(&self) -> T {
        self.c
    }

    pub fn h(&self) -> &[T] {
        &self.h
    }

    pub fn h_tilde(&self) -> &DVector<T> {
        &self.h_tilde
    }

    pub fn q_tilde(&self) -> &SymMatrix<T> {
        &self.q_tilde
    }

    pub fn c_tilde(&self) -> &DMatrix<T> {
        &self.c_tilde
    }

    #[inline]
    pub fn s_row(&self, i: usize) -> &[T] {
        &self.s[i * self.t..(i + 1) * self.t]
    }

    #[inline]
    pub fn row_norm2(&self, i: usize) -> T {
        self.row_norms[i]
    }

    pub fn s_matrix(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.n(), self.t, &self.s)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }

    /// `Sᵀξ`.
    pub fn sv(&self, w: &[T]) -> Result<Vec<T>> {
        self.check_len(w.len())?;
        let mut v = vec![T::zero(); self.t];
        for (i, &wi) in w.iter().enumerate() {
            if wi != T::zero() {
                for (acc, &x) in v.iter_mut().zip(self.s_row(i)) {
                    *acc += wi * x;
                }
            }
        }
        Ok(v)
    }

    pub fn linear(&self, w: &[T]) -> Result<T> {
        self.check_len(w.len())?;
        Ok(self.h.iter().zip(w).fold(T::zero(), |a, (&h, &x)| a + h * x))
    }

    pub fn phi_quad(&self, w: &[T]) -> Result<T> {
        let lin = self.linear(w)?;
        let v = self.sv(w)?;
        Ok(lin - norm2(&v))
    }

    /// `a·φ + c`, the approximation of the criterion value.
    pub fn report_value(&self, w: &[T]) -> Result<T> {
        Ok(self.a * self.phi_quad(w)? + self.c)
    }

    /// `∂φ/∂ξ_i = h_i − 2 S_i·ᵀ(Sᵀξ)`.
    pub fn gradient(&self, w: &[T]) -> Result<Vec<T>> {
        let v = self.sv(w)?;
        Ok(self.gradient_at(&v))
    }

    pub fn gradient_at(&self, v: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); self.n()];
        self.gradient_into(v, &mut g);
        g
    }

    /// [`QuadModel::gradient_at`] written into `out`.
    pub fn gradient_into(&self, v: &[T], out: &mut [T]) {
        let two = T::lit(2.0);
        if self.t == 0 {
            out.copy_from_slice(&self.h);
            return;
        }
        for ((o, &h), row) in out.iter_mut().zip(&self.h).zip(self.s.chunks_exact(self.t)) {
            *o = h - two * dot(row, v);
        }
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

/// `Σ_{r=1}^{p+1} tr(M*^{-r} H_i M*^{-p-2+r} H_j)`.
pub fn f_pair<T: Scalar>(mstar: &SymMatrix<T>, hi: &SymMatrix<T>, hj: &SymMatrix<T>, p: u32) -> Result<T> {
    let powers = checked_powers(mstar, p)?;
    Ok(f_pair_with(&powers, hi, hj, p))
}

fn f_pair_with<T: Scalar>(powers: &[SymMatrix<T>], hi: &SymMatrix<T>, hj: &SymMatrix<T>, p: u32) -> T {
    let mut acc = T::zero();
    for r in 1..=(p as usize + 1) {
        let left = powers[r - 1].mul(hi);
        let right = powers[p as usize + 1 - r].mul(hj);
        acc += (left * right).trace();
    }
    acc
}

/// `(1 − d²)/(1 + d²)` with `d = det(M*)^{1/m}`.
pub fn gamma_d<T: Scalar>(mstar: &SymMatrix<T>) -> Result<T> {
    let ev = mstar.eigenvalues();
    let lmax = *ev.last().unwrap_or(&T::zero());
    if lmax <= T::zero() || ev[0] <= T::lit(T::SINGULAR_TOL) * lmax {
        return Err(Error::SingularMatrix {
            ratio: mstar.condition_ratio().to_f64_lossy(),
        });
    }
    let m = T::from_usize_lossy(ev.len());
    let d = (ev.iter().fold(T::zero(), |a, &l| a + l.ln()) / m).exp();
    let d2 = d * d;
    Ok((T::one() - d2) / (T::one() + d2))
}

/// Element `Q_ij` of the dense quadratic form, computed entrywise. Test oracle only.
pub fn q_entry<T: Scalar>(
    problem: &DesignProblem<T>,
    c: &Criterion<T>,
    mstar: &SymMatrix<T>,
    i: usize,
    j: usize,
) -> Result<T> {
    for k in [i, j] {
        if k >= problem.n() {
            return Err(Error::IndexOutOfRange { index: k, len: problem.n() });
        }
    }
    let (work_problem, work_anchor);
    let (prob, anchor) = if let Criterion::I { l } = c {
        work_problem = i_to_a(problem, l)?;
        work_anchor = transform_matrix(mstar, l)?;
        (&work_problem, &work_anchor)
    } else {
        (problem, mstar)
    };
    let p = c.p();
    let powers = checked_powers(anchor, p)?;
    let ex = expansion(c, anchor, &powers)?;
    let hi = &prob.elementary()[i];
    let hj = &prob.elementary()[j];
    let w = &powers[p as usize];
    let h_i = w.dot(hi);
    let h_j = w.dot(hj);
    Ok(ex.k_f * f_pair_with(&powers, hi, hj, p) + ex.k_h * h_i * h_j / ex.tau)
}

/// Design with cached `Sᵀξ` for fast exchange moves.
#[derive(Debug, Clone)]
pub struct ExchangeState<'a, T: Scalar> {
    model: &'a QuadModel<T>,
    xi: Vec<T>,
    v: Vec<T>,
    value: T,
}

impl<'a, T: Scalar> ExchangeState<'a, T> {
    pub fn new(model: &'a QuadModel<T>, xi: Vec<T>) -> Result<Self> {
        let v = model.sv(&xi)?;
        let value = model.linear(&xi)? - norm2(&v);
        Ok(Self { model, xi, v, value })
    }

    pub fn design(&self) -> &[T] {
        &self.xi
    }

    pub fn into_design(self) -> Vec<T> {
        self.xi
    }

    pub fn sv(&self) -> &[T] {
        &self.v
    }

    pub fn value(&self) -> T {
        self.value
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.xi.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.xi.len() });
        }
        Ok(())
    }

    /// `φ(ξ + e_l − e_k) − φ(ξ)` without changing the state.
    pub fn exchange_delta(&self, l: usize, k: usize) -> Result<T> {
        self.check(l)?;
        self.check(k)?;
        if self.xi[k] < T::one() {
            return Err(Error::EmptyPoint(k));
        }
        if l == k {
            return Ok(T::zero());
        }
        let m = self.model;
        let (sl, sk) = (m.s_row(l), m.s_row(k));
        let two = T::lit(2.0);
        let mut cross = T::zero();
        let mut lk = T::zero();
        for j in 0..self.v.len() {
            cross += self.v[j] * (sl[j] - sk[j]);
            lk += sl[j] * sk[j];
        }
        Ok(m.h[l] - m.h[k] - two * cross - m.row_norms[l] + two * lk - m.row_norms[k])
    }

    /// `φ(ξ + e_l) − φ(ξ)`.
    pub fn add_delta(&self, l: usize) -> T {
        let m = self.model;
        m.h[l] - T::lit(2.0) * dot(&self.v, m.s_row(l)) - m.row_norms[l]
    }

    /// `φ(ξ − e_k) − φ(ξ)`.
    pub fn remove_delta(&self, k: usize) -> T {
        let m = self.model;
        -m.h[k] + T::lit(2.0) * dot(&self.v, m.s_row(k)) - m.row_norms[k]
    }

    /// Applies `ξ ← ξ + e_l − e_k` and returns the change in `φ`.
    pub fn exchange(&mut self, l: usize, k: usize) -> Result<T> {
        let delta = self.exchange_delta(l, k)?;
        if l != k {
            let (sl, sk) = (self.model.s_row(l), self.model.s_row(k));
            for j in 0..self.v.len() {
                self.v[j] += sl[j] - sk[j];
            }
            self.xi[l] += T::one();
            self.xi[k] -= T::one();
            self.value += delta;
        }
        Ok(delta)
    }

    pub fn add(&mut self, l: usize) -> Result<T> {
        self.check(l)?;
        let delta = self.add_delta(l);
        for (acc, &x) in self.v.iter_mut().zip(self.model.s_row(l)) {
            *acc += x;
        }
        self.xi[l] += T::one();
        self.value += delta;
        Ok(delta)
    }

    pub fn remove(&mut self, k: usize) -> Result<T> {
        self.check(k)?;
        if self.xi[k] < T::one() {
            return Err(Error::EmptyPoint(k));
        }
        let delta = self.remove_delta(k);
        for (acc, &x) in self.v.iter_mut().zip(self.model.s_row(k)) {
            *acc -= x;
        }
        self.xi[k] -= T::one();
        self.value += delta;
        Ok(delta)
    }

    /// Recomputes the caches from scratch.
    pub fn refresh(&mut self) -> Result<()> {
        self.v = self.model.sv(&self.xi)?;
        self.value = self.model.linear(&self.xi)? - norm2(&self.v);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::phi_gradient;
    use crate::symlin::kron_sandwich;
    use crate::testutil::random_spd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem<R: Rng>(rng: &mut R, n: usize, m: usize) -> DesignProblem<f64> {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        DesignProblem::from_rows(&rows).unwrap()
    }

    fn random_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(0.0..3.0)).collect()
    }

    #[test]
    fn m1_positive_d_is_linear() {
        let p = DesignProblem::<f64>::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let q = QuadModel::build(&p, &Criterion::d(), &SymMatrix::from_diagonal(&[3.0]), 1e-10).unwrap();
        assert_eq!(q.t(), 0);
        assert!((q.phi_quad(&[1.0, 2.0]).unwrap() - q.linear(&[1.0, 2.0]).unwrap()).abs() < 1e-15);
        assert!(q_entry(&p, &Criterion::d(), &SymMatrix::from_diagonal(&[3.0]), 0, 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn m1_negative_d_matches_hand_taylor() {
        let mu = 2.5;
        let p = DesignProblem::<f64>::from_rows(&[vec![1.0]]).unwrap();
        let c = Criterion::Negative { p: 0 };
        let q = QuadModel::build(&p, &c, &SymMatrix::from_diagonal(&[mu]), 1e-10).unwrap();
        assert!((q.scale() - 3.0 / mu).abs() < 1e-14);
        assert!((q.h_tilde()[0] - 1.0 / mu).abs() < 1e-14);
        assert!((q.q_tilde().get(0, 0) - 1.0 / (3.0 * mu * mu)).abs() < 1e-14);
        assert!((q.offset() + 3.0 / mu).abs() < 1e-14);
        for m in [0.5, 1.0, 2.0, 4.0] {
            let hand = 3.0 * m / (mu * mu) - m * m / (mu * mu * mu) - 3.0 / mu;
            assert!((q.report_value(&[m]).unwrap() - hand).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_d_values() {
        assert!(gamma_d(&SymMatrix::<f64>::identity(3)).unwrap().abs() < 1e-15);
        let g = gamma_d(&SymMatrix::<f64>::identity(3).scale(2.0)).unwrap();
        assert!((g + 0.6).abs() < 1e-14);
        let mut prev = 1.0;
        for d in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let g = gamma_d(&SymMatrix::<f64>::identity(2).scale(d)).unwrap();
            assert!(g < prev && g > -1.0 && g < 1.0);
            prev = g;
        }
    }

    #[test]
    fn logdet_blend_gives_quarter_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for m in 2..5 {
            let p = random_problem(&mut rng, 10, m);
            let ms = random_spd(&mut rng, m);
            let q = QuadModel::build(&p, &Criterion::LogDet, &ms, 1e-10).unwrap();
            let inv = neg_powers(&ms, 1).unwrap().remove(0);
            let k = kron_sandwich(&inv, &inv).unwrap().scale(0.25);
            assert!(q.q_tilde().max_abs_diff(&k) < 1e-10 * k.frobenius_norm());
            assert!((q.h_tilde() - vech_doubled(&inv)).amax() < 1e-12);
        }
    }

    #[test]
    fn f_pair_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_spd(&mut rng, 3);
        let i3 = SymMatrix::identity(3);
        let tr2 = h.dot(&h);
        assert!((f_pair(&i3, &h, &h, 0).unwrap() - tr2).abs() < 1e-12);
        assert!((f_pair(&i3, &h, &h, 1).unwrap() - 2.0 * tr2).abs() < 1e-12);
        let ms = random_spd(&mut rng, 3);
        let g = random_spd(&mut rng, 3);
        for p in 0..4 {
            let a = f_pair(&ms, &h, &g, p).unwrap();
            let b = f_pair(&ms, &g, &h, p).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    fn all_criteria(p: u32) -> Vec<Criterion<f64>> {
        let mut v = vec![Criterion::Positive { p }, Criterion::Negative { p }];
        for g in [-0.5, 0.0, 0.5] {
            v.push(Criterion::Blend { p, gamma: g });
        }
        v
    }

    #[test]
    fn low_rank_matches_entrywise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..12 {
            let m = 1 + trial % 4;
            let n = 5 + trial * 2;
            let prob = random_problem(&mut rng, n, m);
            let ms = random_spd(&mut rng, m);
            for p in 0..4 {
                for c in all_criteria(p).into_iter().chain([Criterion::LogDet]) {
                    let q = QuadModel::build(&prob, &c, &ms, 1e-12).unwrap();
                    let dense: Vec<Vec<f64>> = (0..n)
                        .map(|i| (0..n).map(|j| q_entry(&prob, &c, &ms, i, j).unwrap()).collect())
                        .collect();
                    for _ in 0..5 {
                        let w = random_weights(&mut rng, n);
                        let mut form = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                form += w[i] * w[j] * dense[i][j];
                            }
                        }
                        let low = norm2(&q.sv(&w).unwrap());
                        let lin = q.linear(&w).unwrap();
                        let tol = 1e-8 * form.abs().max(low) + 1e-14 * lin * lin;
                        assert!((form - low).abs() <= tol, "{c} {form} {low}");
                    }
                }
            }
        }
    }

    #[test]
    fn taylor_value_gradient_and_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..4 {
            let m = 2 + trial % 3;
            let n = 12;
            let prob = random_problem(&mut rng, n, m);
            let w0 = random_weights(&mut rng, n);
            let ms = prob.info_from_weights(&w0).unwrap();
            for p in 0..4 {
                let mut cs = all_criteria(p);
                cs.push(Criterion::LogDet);
                for c in cs {
                    let q = QuadModel::build(&prob, &c, &ms, 1e-12).unwrap();
                    let truth = phi(&c, &ms);
                    let approx = q.report_value(&w0).unwrap();
                    assert!((approx - truth).abs() <= 1e-9 * truth.abs().max(1.0), "{c}");

                    let grad = phi_gradient(&c, &ms).unwrap();
                    let qg = q.gradient(&w0).unwrap();
                    for i in 0..n {
                        let g = grad.dot(&prob.elementary()[i]);
                        assert!((q.scale() * qg[i] - g).abs() <= 1e-7 * g.abs().max(1e-3), "{c} grad {i}");
                    }

                    let eps = 1e-3;
                    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let at = |s: f64| {
                        let w: Vec<f64> = w0.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                        phi(&c, &prob.info_from_weights(&w).unwrap())
                    };
                    let second = (at(eps) - 2.0 * at(0.0) + at(-eps)) / (eps * eps);
                    let model = -2.0 * q.scale() * norm2(&q.sv(&d).unwrap());
                    assert!((second - model).abs() <= 5e-4 * model.abs().max(1e-6), "{c}: {second} vs {model}");
                }
            }
        }
    }

    #[test]
    fn blend_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let prob = random_problem(&mut rng, 15, 3);
        let ms = random_spd(&mut rng, 3);
        for p in 0..4 {
            let qp = QuadModel::build(&prob, &Criterion::Positive { p }, &ms, 1e-12).unwrap();
            let qm = QuadModel::build(&prob, &Criterion::Negative { p }, &ms, 1e-12).unwrap();
            for g in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let qg = QuadModel::build(&prob, &Criterion::Blend { p, gamma: g }, &ms, 1e-12).unwrap();
                for _ in 0..5 {
                    let w = random_weights(&mut rng, 15);
                    let lhs = qg.report_value(&w).unwrap();
                    let rhs = (1.0 + g) / 2.0 * qp.report_value(&w).unwrap()
                        + (1.0 - g) / 2.0 * qm.report_value(&w).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn exchange_deltas_match_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prob = random_problem(&mut rng, 20, 3);
        let ms = random_spd(&mut rng, 3);
        let q = QuadModel::build(&prob, &Criterion::a(), &ms, 1e-12).unwrap();
        let start: Vec<f64> = (0..20).map(|_| rng.random_range(0..4) as f64).collect();
        let mut st = ExchangeState::new(&q, start).unwrap();
        assert_eq!(st.exchange_delta(3, 3).unwrap_or(0.0), 0.0);
        let mut moves = 0;
        while moves < 1000 {
            let l = rng.random_range(0..20);
            let k = rng.random_range(0..20);
            if st.design()[k] < 1.0 {
                assert!(matches!(st.exchange_delta(l, k), Err(Error::EmptyPoint(_))));
                continue;
            }
            let before = q.phi_quad(st.design()).unwrap();
            let delta = st.exchange(l, k).unwrap();
            let after = q.phi_quad(st.design()).unwrap();
            assert!((after - before - delta).abs() <= 1e-10 * before.abs().max(1.0));
            moves += 1;
        }
        let fresh = q.sv(st.design()).unwrap();
        for (a, b) in fresh.iter().zip(st.sv()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_and_linear_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let prob = random_problem(&mut rng, 6, 2);
        let ms = random_spd(&mut rng, 2);
        let q = QuadModel::build(&prob, &Criterion::d(), &ms, 1e-12).unwrap();
        assert_eq!(q.phi_quad(&[0.0; 6]).unwrap(), 0.0);
        assert!(q.phi_quad(&[0.0; 5]).is_err());
    }

    #[test]
    fn aggregate_sums_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prob = random_problem(&mut rng, 6, 2);
        let ms = random_spd(&mut rng, 2);
        let q = QuadModel::build(&prob, &Criterion::a(), &ms, 1e-12).unwrap();
        let groups = vec![vec![0, 1], vec![2], vec![3, 4, 5]];
        let agg = q.aggregate(&groups).unwrap();
        let z = [1.5, 2.0, 0.5];
        let full = [1.5, 1.5, 2.0, 0.5, 0.5, 0.5];
        assert!((agg.phi_quad(&z).unwrap() - q.phi_quad(&full).unwrap()).abs() < 1e-12);
    }
}
