use approx::assert_relative_eq;
use proptest::prelude::*;

use pfgamma_core::energy::pairwise_sum;
use pfgamma_core::limit::{bar_limit_minimum, optimal_profile};
use pfgamma_core::*;

fn sym(n: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |a| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = a[i * n + j];
            }
        }
        SymMat::sym_part(n, &m)
    })
}

fn operators(n: usize) -> Vec<FirstOrderOperator> {
    vec![
        FirstOrderOperator::full_strain(n).unwrap(),
        FirstOrderOperator::deviatoric(n).unwrap(),
    ]
}

fn model() -> LimitModel {
    LimitModel::new(
        FirstOrderOperator::full_strain(1).unwrap(),
        BulkDensity::linear_elastic(1.0, 0.0, 1).unwrap(),
        PhaseParams::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coords_preserve_the_frobenius_product(a in sym(3), b in sym(3)) {
        assert_relative_eq!(a.coords().dot(&b.coords()), a.frob_dot(&b), epsilon = 1e-12);
        let back = a.coords().to_matrix();
        prop_assert!((back - a).norm() < 1e-14);
    }

    #[test]
    fn operators_are_linear_and_deviatoric_is_trace_free(a in sym(3), b in sym(3), s in -3.0..3.0f64) {
        for op in operators(3) {
            let lhs = op.apply(&(a * s + b));
            let rhs = op.apply(&a) * s + op.apply(&b);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
        let dev = FirstOrderOperator::deviatoric(3).unwrap();
        prop_assert!(dev.apply(&a).trace().abs() < 1e-12);
    }

    #[test]
    fn density_is_homogeneous_without_mu(xi in sym(2), s in 0.1..5.0f64, p in 1.5..4.0f64) {
        let d = BulkDensity::new(p, 0.0, HookeTensor::new(1.0, 0.7, 2).unwrap()).unwrap();
        assert_relative_eq!(d.eval(&(xi * s)), s.powf(p) * d.eval(&xi), max_relative = 1e-10, epsilon = 1e-14);
        assert_relative_eq!(d.recession(&xi), d.eval(&xi), max_relative = 1e-10, epsilon = 1e-14);
    }

    #[test]
    fn density_is_convex(a in sym(3), b in sym(3), mu in 0.0..1.0f64, p in 1.5..4.0f64) {
        let d = BulkDensity::new(p, mu, HookeTensor::new(1.0, 0.5, 3).unwrap()).unwrap();
        let mid = d.eval(&((a + b) * 0.5));
        prop_assert!(mid <= 0.5 * (d.eval(&a) + d.eval(&b)) + 1e-12);
        prop_assert!(d.eval(&a) >= 0.0);
    }

    #[test]
    fn energy_ignores_rigid_motions(
        seed in 0u64..1000,
        omega in -1.0..1.0f64,
        t in prop::array::uniform2(-1.0..1.0f64),
    ) {
        use rand::Rng;
        let grid = Grid::new(&[1.0, 0.7], &[6, 4]).unwrap();
        let params = EpsParams::new(0.2, 2.0, 1.0, 2.0, PsiSpec::default()).unwrap();
        let op = FirstOrderOperator::full_strain(2).unwrap();
        let density = BulkDensity::new(2.0, 0.1, HookeTensor::new(1.0, 0.3, 2).unwrap()).unwrap();
        let func = Functional::new(&grid, &params, &op, &density).unwrap();
        let mut rng = pfgamma_core::rng::stream(seed, 0);
        let mut f = GridField::new(&grid);
        f.u.iter_mut().for_each(|u| *u = rng.random_range(-0.5..0.5));
        f.v.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        let rigid = QuadraticField::rigid(vec![vec![0.0, omega], vec![-omega, 0.0]], &t).unwrap();
        let mut g = f.clone();
        for node in 0..grid.n_nodes() {
            let r = rigid.eval(&grid.node_coords(node)[..2]);
            g.u[2 * node] += r[0];
            g.u[2 * node + 1] += r[1];
        }
        assert_relative_eq!(func.energy(&f).total, func.energy(&g).total, max_relative = 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_the_naive_sum(xs in prop::collection::vec(-1e3..1e3f64, 0..300)) {
        let naive: f64 = xs.iter().sum();
        let scale: f64 = xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-12 * scale);
    }

    #[test]
    fn bar_minimum_is_elastic_or_partially_cracked(delta in 0.0..12.0f64) {
        let expected = f64::min(0.5 * delta * delta, 1.0 + std::f64::consts::SQRT_2 * delta);
        let got = bar_limit_minimum(&model(), 1.0, delta).unwrap().energy;
        prop_assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }

    #[test]
    fn profile_is_monotone_in_the_unit_interval(k in 3i32..10) {
        let eps = 2f64.powi(-k);
        let prof = optimal_profile(&PhaseParams::default(), eps, RhoRule::GeometricMean).unwrap();
        let mut prev = prof.eval(0.0);
        prop_assert!(prev.abs() < 1e-15);
        for i in 1..=400 {
            let w = prof.eval(prof.t_end * i as f64 / 400.0);
            prop_assert!(w >= prev && w <= 1.0);
            prev = w;
        }
    }

    #[test]
    fn snapshots_round_trip(cells in prop::collection::vec(1usize..5, 1..=3), seed in 0u64..100) {
        use rand::Rng;
        let extents: Vec<f64> = cells.iter().map(|&c| 0.25 * c as f64 + 0.1).collect();
        let grid = Grid::new(&extents, &cells).unwrap();
        let mut rng = pfgamma_core::rng::stream(seed, 1);
        let mut f = GridField::new(&grid);
        f.u.iter_mut().for_each(|u| *u = rng.random_range(-1e3..1e3));
        f.v.iter_mut().for_each(|v| *v = rng.random::<f64>());
        let (g2, f2) = pfgamma_core::snapshot::from_str(&pfgamma_core::snapshot::to_string(&grid, &f).unwrap()).unwrap();
        prop_assert_eq!(g2.cells(), grid.cells());
        prop_assert_eq!(f2.u, f.u);
        prop_assert_eq!(f2.v, f.v);
    }

    #[test]
    fn scenarios_round_trip_through_toml(delta in -10.0..10.0f64, seed in 0u64..1_000_000) {
        let mut s = Scenario::bar(delta);
        s.solver.seed = seed;
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.hash(), s.hash());
    }
}
