//! Kiefer's Φ_p criteria, their gradients and design efficiency.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::symlin::SymMatrix;

/// Optimality criterion. `p` is Kiefer's integer parameter: 0 is D, 1 is A.
#[derive(Debug, Clone, PartialEq)]
pub enum Criterion<T: Scalar> {
    /// `((1/m) tr M^{-p})^{-1/p}`, `det^{1/m}` for p = 0.
    Positive { p: u32 },
    /// `-((1/m) tr M^{-p})^{1/p}`, `-det^{-1/m}` for p = 0.
    Negative { p: u32 },
    /// `(1+γ)/2 Φ⁺ + (1-γ)/2 Φ⁻` with `0·∞ = 0`.
    Blend { p: u32, gamma: T },
    LogDet,
    /// Generalized I-optimality `-tr(M⁻¹ L)`.
    I { l: SymMatrix<T> },
}

impl<T: Scalar> Criterion<T> {
    pub fn d() -> Self {
        Criterion::Positive { p: 0 }
    }

    pub fn a() -> Self {
        Criterion::Positive { p: 1 }
    }

    pub fn blend(p: u32, gamma: T) -> Result<Self> {
        if !(gamma >= -T::one() && gamma <= T::one()) {
            return Err(Error::BadParams(format!(
                "blend parameter must lie in [-1, 1], got {}",
                gamma.to_f64_lossy()
            )));
        }
        Ok(Criterion::Blend { p, gamma })
    }

    pub fn i_optimality(l: SymMatrix<T>) -> Result<Self> {
        if !l.is_nonsingular(T::lit(T::SINGULAR_TOL)) || l.eigenvalues()[0] <= T::zero() {
            return Err(Error::SingularL);
        }
        Ok(Criterion::I { l })
    }

    /// Kiefer parameter; log-det behaves like p = 0 and I like p = 1.
    pub fn p(&self) -> u32 {
        match self {
            Criterion::Positive { p } | Criterion::Negative { p } | Criterion::Blend { p, .. } => *p,
            Criterion::LogDet => 0,
            Criterion::I { .. } => 1,
        }
    }

    pub fn gamma(&self) -> Option<T> {
        match self {
            Criterion::Positive { .. } => Some(T::one()),
            Criterion::Negative { .. } => Some(-T::one()),
            Criterion::Blend { gamma, .. } => Some(*gamma),
            _ => None,
        }
    }

    pub fn region(&self) -> Option<&SymMatrix<T>> {
        match self {
            Criterion::I { l } => Some(l),
            _ => None,
        }
    }
}

impl<T: Scalar> fmt::Display for Criterion<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Positive { p } => write!(f, "positive(p={p})"),
            Criterion::Negative { p } => write!(f, "negative(p={p})"),
            Criterion::Blend { p, gamma } => write!(f, "blend(p={p},gamma={})", gamma.to_f64_lossy()),
            Criterion::LogDet => write!(f, "logdet"),
            Criterion::I { .. } => write!(f, "I"),
        }
    }
}

/// Eigenvalues of `m`, or `None` when it is singular by the relative threshold.
fn regular_spectrum<T: Scalar>(m: &SymMatrix<T>) -> Option<Vec<T>> {
    let ev = m.eigenvalues();
    let lmax = *ev.last()?;
    let lmin = ev[0];
    if lmax <= T::zero() || lmin <= T::lit(T::SINGULAR_TOL) * lmax {
        None
    } else {
        Some(ev)
    }
}

/// `(1/m) tr M^{-p}` for p ≥ 1, or `det^{-1/m}` folded in as `exp(-mean ln λ)` for p = 0.
fn mean_neg_power<T: Scalar>(ev: &[T], p: u32) -> T {
    let m = T::from_usize_lossy(ev.len());
    if p == 0 {
        let s = ev.iter().fold(T::zero(), |a, &l| a + l.ln());
        (-s / m).exp()
    } else {
        let pi = p as i32;
        ev.iter().fold(T::zero(), |a, &l| a + l.powi(-pi)) / m
    }
}

fn phi_plus_spec<T: Scalar>(ev: &[T], p: u32) -> T {
    let s = mean_neg_power(ev, p);
    if p == 0 {
        T::one() / s
    } else {
        s.powf(-T::one() / T::lit(p as f64))
    }
}

fn phi_minus_spec<T: Scalar>(ev: &[T], p: u32) -> T {
    let s = mean_neg_power(ev, p);
    if p == 0 {
        -s
    } else {
        -s.powf(T::one() / T::lit(p as f64))
    }
}

/// Criterion value; singular matrices map to 0 (positive) or −∞.
pub fn phi<T: Scalar>(c: &Criterion<T>, m: &SymMatrix<T>) -> T {
    let Some(ev) = regular_spectrum(m) else {
        return match c {
            Criterion::Positive { .. } => T::zero(),
            Criterion::Blend { gamma, .. } if *gamma == T::one() => T::zero(),
            _ => T::neg_infinity(),
        };
    };
    let half = T::lit(0.5);
    match c {
        Criterion::Positive { p } => phi_plus_spec(&ev, *p),
        Criterion::Negative { p } => phi_minus_spec(&ev, *p),
        Criterion::Blend { p, gamma } => {
            (T::one() + *gamma) * half * phi_plus_spec(&ev, *p)
                + (T::one() - *gamma) * half * phi_minus_spec(&ev, *p)
        }
        Criterion::LogDet => ev.iter().fold(T::zero(), |a, &l| a + l.ln()),
        Criterion::I { l } => {
            let inv = m.spectral_map(|x| T::one() / x);
            -inv.dot(l)
        }
    }
}

/// Gradient of the criterion with respect to `M`; requires `M` nonsingular.
pub fn phi_gradient<T: Scalar>(c: &Criterion<T>, m: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let ev = regular_spectrum(m).ok_or_else(|| Error::SingularMatrix {
        ratio: m.condition_ratio().to_f64_lossy(),
    })?;
    let order = T::from_usize_lossy(m.order());
    let half = T::lit(0.5);
    let p = c.p();
    let pi = p as i32;
    let w = m.spectral_map(|x| x.powi(-pi - 1));
    let tau = if p == 0 {
        order
    } else {
        ev.iter().fold(T::zero(), |a, &l| a + l.powi(-pi))
    };
    Ok(match c {
        Criterion::Positive { .. } => w.scale(phi_plus_spec(&ev, p) / tau),
        Criterion::Negative { .. } => w.scale(-phi_minus_spec(&ev, p) / tau),
        Criterion::Blend { gamma, .. } => {
            let cp = (T::one() + *gamma) * half * phi_plus_spec(&ev, p);
            let cm = (T::one() - *gamma) * half * phi_minus_spec(&ev, p);
            w.scale((cp - cm) / tau)
        }
        Criterion::LogDet => w,
        Criterion::I { l } => {
            let inv = m.spectral_map(|x| T::one() / x);
            l.congruence(inv.as_matrix())
        }
    })
}

/// Positively homogeneous, non-negative equivalent of the criterion, used for efficiencies.
pub fn positive_equivalent<T: Scalar>(c: &Criterion<T>, m: &SymMatrix<T>) -> T {
    let Some(ev) = regular_spectrum(m) else {
        return T::zero();
    };
    match c {
        Criterion::I { l } => {
            let inv = m.spectral_map(|x| T::one() / x);
            T::one() / inv.dot(l)
        }
        _ => phi_plus_spec(&ev, c.p()),
    }
}

/// Efficiency of `m` relative to `mstar` on the positive scale.
pub fn efficiency<T: Scalar>(c: &Criterion<T>, m: &SymMatrix<T>, mstar: &SymMatrix<T>) -> Result<T> {
    let reference = positive_equivalent(c, mstar);
    if !(reference > T::zero()) || !reference.is_finite() {
        return Err(Error::UndefinedEfficiency(phi(c, mstar).to_f64_lossy()));
    }
    Ok(positive_equivalent(c, m) / reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_spd, random_sym};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ij(m: usize, a: f64, b: f64) -> SymMatrix<f64> {
        SymMatrix::from_lower_fn(m, |i, j| if i == j { a + b } else { b })
    }

    fn families(p: u32) -> Vec<Criterion<f64>> {
        vec![
            Criterion::Positive { p },
            Criterion::Negative { p },
            Criterion::Blend { p, gamma: 0.3 },
        ]
    }

    #[test]
    fn scalar_matrix_values() {
        for p in 0..4 {
            let v: f64 = phi(&Criterion::Positive { p }, &SymMatrix::identity(6).scale(2.0));
            assert!((v - 2.0).abs() < 1e-12);
            let v: f64 = phi(&Criterion::Negative { p }, &SymMatrix::identity(6).scale(2.0));
            assert!((v + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn a_value_on_table_two_matrix() {
        for n in [10.0, 20.0, 30.0] {
            let m = ij(6, 3.0 * n / 10.0, 2.0 * n / 10.0);
            let ev: [f64; 6] = [15.0, 3.0, 3.0, 3.0, 3.0, 3.0].map(|x| x * n / 10.0);
            let tr: f64 = ev.iter().map(|x| 1.0 / x).sum();
            assert!((tr - 52.0 / (3.0 * n)).abs() < 1e-12);
            let v = phi(&Criterion::a(), &m);
            assert!((v - 18.0 * n / 52.0).abs() < 1e-10 * v);
        }
    }

    #[test]
    fn d_value_on_table_one_matrix() {
        let m = ij(6, 2.0, 2.0);
        let v = phi(&Criterion::d(), &m);
        let expect = (64.0f64 * 7.0).powf(1.0 / 6.0);
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn singular_extended_values() {
        let s = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert_eq!(phi(&Criterion::d(), &s), 0.0);
        assert_eq!(phi(&Criterion::Negative { p: 1 }, &s), f64::NEG_INFINITY);
        assert_eq!(phi(&Criterion::Blend { p: 1, gamma: 1.0 }, &s), 0.0);
        assert_eq!(phi(&Criterion::Blend { p: 1, gamma: 0.0 }, &s), f64::NEG_INFINITY);
        assert_eq!(phi(&Criterion::LogDet, &s), f64::NEG_INFINITY);
        assert!(phi_gradient(&Criterion::<f64>::LogDet, &s).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = phi_gradient(&Criterion::a(), &SymMatrix::identity(4)).unwrap();
        assert!(g.max_abs_diff(&SymMatrix::identity(4).scale(0.25)) < 1e-14);
        let g = phi_gradient(&Criterion::LogDet, &SymMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert!(g.max_abs_diff(&SymMatrix::from_diagonal(&[0.5, 0.25])) < 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eps = 1e-5;
        for trial in 0..10 {
            let m = random_spd(&mut rng, 2 + trial % 4);
            let n = random_sym(&mut rng, m.order());
            let mut cs = vec![Criterion::LogDet, Criterion::i_optimality(random_spd(&mut rng, m.order())).unwrap()];
            for p in 0..4 {
                cs.extend(families(p));
            }
            for c in &cs {
                let fd = (phi(c, &m.add(&n.scale(eps))) - phi(c, &m.sub(&n.scale(eps)))) / (2.0 * eps);
                let an = phi_gradient(c, &m).unwrap().dot(&n);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{c}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn homogeneity_and_order_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m1 = random_spd(&mut rng, 4);
            let m2 = random_spd(&mut rng, 4);
            for p in 0..4 {
                let pos = Criterion::Positive { p };
                let neg = Criterion::Negative { p };
                let a = phi(&pos, &m1.scale(3.0));
                assert!((a - 3.0 * phi(&pos, &m1)).abs() < 1e-10 * a);
                let b = phi(&neg, &m1.scale(3.0));
                assert!((b - phi(&neg, &m1) / 3.0).abs() < 1e-10 * b.abs());
                let dp = phi(&pos, &m1) - phi(&pos, &m2);
                let dn = phi(&neg, &m1) - phi(&neg, &m2);
                assert_eq!(dp > 0.0, dn > 0.0);
            }
        }
    }

    #[test]
    fn concavity_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m1 = random_spd(&mut rng, 3);
            let m2 = random_spd(&mut rng, 3);
            for p in 0..4 {
                for c in families(p).into_iter().chain([Criterion::LogDet]) {
                    for lam in [0.25, 0.5, 0.75] {
                        let mix = m1.scale(lam).add(&m2.scale(1.0 - lam));
                        let lhs = phi(&c, &mix);
                        let rhs = lam * phi(&c, &m1) + (1.0 - lam) * phi(&c, &m2);
                        assert!(lhs >= rhs - 1e-9, "{c}");
                    }
                }
            }
        }
    }

    #[test]
    fn efficiency_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ms = random_spd(&mut rng, 4);
        for c in [Criterion::d(), Criterion::Negative { p: 2 }, Criterion::LogDet] {
            assert!((efficiency(&c, &ms, &ms).unwrap() - 1.0).abs() < 1e-12);
            assert!((efficiency(&c, &ms.scale(0.9), &ms).unwrap() - 0.9).abs() < 1e-12);
        }
        let neg = Criterion::Negative { p: 1 };
        let m = random_spd(&mut rng, 4);
        let e = efficiency(&neg, &m, &ms).unwrap();
        assert!((e - phi(&neg, &ms) / phi(&neg, &m)).abs() < 1e-12);
        let zero = SymMatrix::zeros(4);
        assert!(matches!(efficiency(&Criterion::d(), &m, &zero), Err(Error::UndefinedEfficiency(_))));
    }

    #[test]
    fn neighbor_vertex_d_efficiency() {
        let n = 10.0;
        let mstar = ij(6, 2.0 * n / 7.0, 2.0 * n / 7.0);
        let z3 = ij(6, 3.0 * n / 10.0, 2.0 * n / 10.0);
        // eigenvalue oracle: det^{1/6} from the spectra directly
        let d3 = (15.0f64 * 3f64.powi(5)).powf(1.0 / 6.0) * n / 10.0;
        let ds = (7.0f64).powf(1.0 / 6.0) * 2.0 * n / 7.0;
        let e = efficiency(&Criterion::d(), &z3, &mstar).unwrap();
        assert!((e - d3 / ds).abs() < 1e-12);
        assert!(e < 1.0 && e > 0.98);
    }
}
