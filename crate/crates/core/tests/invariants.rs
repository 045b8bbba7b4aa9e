use ::aqua::polytope::LpShape;
use ::aqua::symlin::{unvech, vech};
use ::aqua::{
    branch_and_bound, efficient_rounding, lp_max, phi, round_incumbent, solve_relaxed_qp, BnbOptions,
    ConstraintSet, Criterion, DesignProblem, ExchangeState, QpOptions, QuadModel, SymMatrix,
};
use proptest::prelude::*;

fn matrix(m: usize) -> impl Strategy<Value = SymMatrix<f64>> {
    prop::collection::vec(-5.0..5.0f64, m * m).prop_map(move |v| SymMatrix::from_lower_fn(m, |i, j| v[i * m + j]))
}

/// Regressor rows with at least `m` of them spanning the space.
fn problem(n: usize, m: usize) -> impl Strategy<Value = DesignProblem<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * m).prop_map(move |v| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = v[i * m..(i + 1) * m].to_vec();
                if i < m {
                    r[i] += 3.0;
                }
                r
            })
            .collect();
        DesignProblem::from_rows(&rows).unwrap()
    })
}

fn spd(m: usize) -> impl Strategy<Value = SymMatrix<f64>> {
    problem(2 * m, m).prop_map(|p| p.info_from_weights(&vec![1.0; p.n()]).unwrap())
}

/// Fractional knapsack: fill the best-paying coordinates first.
fn greedy_box_simplex(c: &[f64], upper: &[f64], size: f64) -> f64 {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].partial_cmp(&c[a]).unwrap());
    let mut left = size;
    let mut value = 0.0;
    for j in order {
        let take = upper[j].min(left);
        value += c[j] * take;
        left -= take;
    }
    value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vech_round_trips(m in 1usize..6, seed in matrix(5)) {
        let a = SymMatrix::from_lower_fn(m, |i, j| seed.get(i, j));
        let v = vech(&a);
        let back = unvech(v.as_slice(), m).unwrap();
        prop_assert_eq!(back.max_abs_diff(&a), 0.0);
    }

    #[test]
    fn positive_criteria_are_homogeneous(m in 1usize..5, p in 0u32..4, c in 0.1..10.0f64, mm in spd(4)) {
        let a = SymMatrix::from_lower_fn(m, |i, j| mm.get(i, j));
        let crit = Criterion::Positive { p };
        let lhs = phi(&crit, &a.scale(c));
        let rhs = c * phi(&crit, &a);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn criteria_are_monotone(p in 0u32..4, v in prop::collection::vec(-1.0..1.0f64, 3), mm in spd(3)) {
        let bumped = mm.add(&SymMatrix::outer(&v));
        for crit in [Criterion::Positive { p }, Criterion::Negative { p }] {
            prop_assert!(phi(&crit, &bumped) >= phi(&crit, &mm) - 1e-12 * phi(&crit, &mm).abs());
        }
    }

    #[test]
    fn efficient_rounding_apportions_exactly(
        w in prop::collection::vec(0.01..1.0f64, 1..15),
        extra in 0u64..100,
    ) {
        let size = w.len() as u64 + extra;
        let r = efficient_rounding(&w, size).unwrap();
        prop_assert_eq!(r.iter().sum::<u64>(), size);
        prop_assert!(r.iter().all(|&x| x >= 1));
        // no unit move from one point to another brings counts closer to proportional
        let lo = (0..w.len()).map(|i| r[i] as f64 / w[i]).fold(f64::INFINITY, f64::min);
        let hi = (0..w.len()).map(|i| (r[i] as f64 - 1.0) / w[i]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(hi <= lo * (1.0 + 1e-12));
    }

    #[test]
    fn exchange_deltas_match_recomputation(
        p in problem(8, 3),
        moves in prop::collection::vec((0usize..8, 0usize..8), 1..30),
        crit_a in any::<bool>(),
    ) {
        let c = if crit_a { Criterion::a() } else { Criterion::d() };
        let anchor = p.info_from_weights(&vec![1.0; 8]).unwrap();
        let q = QuadModel::build(&p, &c, &anchor, 1e-12).unwrap();
        let mut st = ExchangeState::new(&q, vec![2.0; 8]).unwrap();
        for (l, k) in moves {
            if k == l || st.design()[k] < 1.0 {
                continue;
            }
            let predicted = st.exchange_delta(l, k).unwrap();
            let before = q.phi_quad(st.design()).unwrap();
            st.exchange(l, k).unwrap();
            let after = q.phi_quad(st.design()).unwrap();
            prop_assert!((after - before - predicted).abs() <= 1e-9 * before.abs().max(1.0));
        }
    }

    #[test]
    fn lp_matches_fractional_knapsack(
        c in prop::collection::vec(-3.0..3.0f64, 2..20),
        up in prop::collection::vec(0.5..4.0f64, 20),
        frac in 0.05..0.95f64,
    ) {
        let n = c.len();
        let upper = &up[..n];
        let size = frac * upper.iter().sum::<f64>();
        let mut cs = ConstraintSet::simplex(n, size);
        for (j, &u) in upper.iter().enumerate() {
            cs.set_bounds(j, 0.0, u).unwrap();
        }
        let sol = lp_max(&c, &cs).unwrap();
        let oracle = greedy_box_simplex(&c, upper, size);
        prop_assert!((sol.value - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
        prop_assert!(cs.feasible(&sol.x, 1e-9, false).unwrap().is_feasible());
    }

    #[test]
    fn warm_start_agrees_with_cold_start(
        c in prop::collection::vec(-3.0..3.0f64, 12),
        cap in prop::collection::vec(0.0..2.0f64, 12),
    ) {
        let n = 12;
        let mut cs = ConstraintSet::simplex(n, 6.0);
        cs.add_row((0..6).map(|j| (j, 1.0)).collect(), ::aqua::Sense::Le, 4.0).unwrap();
        cs.set_upper_all(2.0);
        let shape = LpShape::new(&cs).unwrap();
        let mut first = shape.solver(cs.lower(), cs.upper(), None).unwrap();
        first.maximize(&c).unwrap();
        let basis = first.basis().unwrap();
        let upper: Vec<f64> = cap.iter().map(|&u| u.max(0.6)).collect();
        let cold = shape.solver(cs.lower(), &upper, None).and_then(|mut s| s.maximize(&c));
        let warm = shape.solver(cs.lower(), &upper, Some(&basis)).and_then(|mut s| s.maximize(&c));
        match (cold, warm) {
            (Ok(a), Ok(b)) => prop_assert!((a.value - b.value).abs() <= 1e-9 * a.value.abs().max(1.0)),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "cold {:?} vs warm {:?}", a.map(|s| s.value), b.map(|s| s.value)),
        }
    }

    #[test]
    fn rounded_incumbents_are_feasible(
        w in prop::collection::vec(0.0..3.0f64, 3..15),
        size in 3u32..20,
    ) {
        let n = w.len();
        let size = size as f64;
        let mut cs = ConstraintSet::simplex(n, size);
        cs.set_upper_all(size);
        let total: f64 = w.iter().sum::<f64>().max(1e-9);
        let rel: Vec<f64> = w.iter().map(|x| x * size / total).collect();
        if let Some(x) = round_incumbent(&rel, &cs) {
            prop_assert!(cs.feasible(&x, 1e-9, true).unwrap().is_feasible());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relaxation_bounds_the_integer_optimum(p in problem(6, 2), size in 2u32..6, crit_a in any::<bool>()) {
        let c = if crit_a { Criterion::a() } else { Criterion::d() };
        let size = size as f64;
        let anchor = p.info_from_weights(&vec![size / 6.0; 6]).unwrap();
        let q = QuadModel::build(&p, &c, &anchor, 1e-12).unwrap();
        let cs = ConstraintSet::simplex(6, size);
        let rel = solve_relaxed_qp(&q, &cs, cs.lower(), cs.upper(), &QpOptions::default()).unwrap();
        let int = branch_and_bound(&q, &cs, &BnbOptions::default()).unwrap();
        prop_assert!(rel.upper_bound >= int.value - 1e-9 * int.value.abs().max(1.0));
        prop_assert!(rel.value <= rel.upper_bound + 1e-12);
    }
}
