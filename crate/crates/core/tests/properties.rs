use proptest::prelude::*;

use spl_conjugacy::conjugate::{biconjugate, conjugate_at, Halfspace};
use spl_conjugacy::curriculum::{constrained_weights, CurriculumAction, CurriculumRegion, SolverOptions};
use spl_conjugacy::oracle::{grid_constrained_inf, random_concave, GridSpec};
use spl_conjugacy::regularizers::by_name;
use spl_conjugacy::sampled::uniform_grid;
use spl_conjugacy::{SPRegularizer, SampledFunction};

fn reg_strategy() -> impl Strategy<Value = SPRegularizer<f64>> {
    prop::sample::select(vec!["hard", "linear", "log", "exp"]).prop_map(|n| by_name(n).unwrap())
}

fn strict_strategy() -> impl Strategy<Value = SPRegularizer<f64>> {
    prop::sample::select(vec!["linear", "log", "exp"]).prop_map(|n| by_name(n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn latent_is_concave_and_nondecreasing(reg in reg_strategy(), lambda in 0.05f64..20.0, a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f = |l| reg.latent(lambda, l).unwrap();
        prop_assert!(f(lo) <= f(hi) + 1e-12);
        let mid = 0.5 * (lo + hi);
        prop_assert!(f(mid) >= 0.5 * (f(lo) + f(hi)) - 1e-9 * (1.0 + f(hi).abs()));
        prop_assert!(f(0.0).abs() <= 1e-12);
    }

    #[test]
    fn weights_stay_in_unit_interval_and_decrease(reg in reg_strategy(), lambda in 0.05f64..20.0, a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let w = |l| reg.weight(lambda, l).unwrap();
        prop_assert!((0.0..=1.0).contains(&w(lo)) && (0.0..=1.0).contains(&w(hi)));
        prop_assert!(w(hi) <= w(lo));
    }

    #[test]
    fn fenchel_inequality_holds_on_samples(seed in 0u64..10_000, l in -3.0f64..3.0) {
        let grid: Vec<f64> = uniform_grid(0.0, 1.0, 65);
        let g = random_concave(seed, &grid);
        let star = conjugate_at(&g, l);
        for (&v, &gv) in grid.iter().zip(g.values()) {
            prop_assert!(star <= v * l - gv + 1e-12);
        }
        let gg = biconjugate(&g).unwrap();
        for (a, b) in gg.values().iter().zip(g.values()) {
            prop_assert!(*a >= *b - 1e-9);
        }
    }

    #[test]
    fn raising_a_function_lowers_its_conjugate(seed in 0u64..10_000, bumps in prop::collection::vec(0.0f64..1.0, 65), l in -3.0f64..3.0) {
        let grid: Vec<f64> = uniform_grid(0.0, 1.0, 65);
        let g = random_concave(seed, &grid);
        let h = SampledFunction::new(grid.clone(), g.values().iter().zip(&bumps).map(|(a, b)| a + b).collect()).unwrap();
        prop_assert!(conjugate_at(&g, l) >= conjugate_at(&h, l));
    }

    #[test]
    fn curriculum_only_raises_the_latent_objective(reg in reg_strategy(), lambda in 0.2f64..5.0, l1 in 0.0f64..6.0, l2 in 0.0f64..6.0) {
        let region = CurriculumRegion::pairwise_order(2, 0, 1).unwrap();
        let action = CurriculumAction::new(reg.clone(), lambda, region, false).unwrap();
        let l = [l1, l2];
        let point = action.evaluate(&l).unwrap();
        prop_assert!(point.value >= action.latent(&l) - 1e-9);
        prop_assert!(point.weights[0] >= point.weights[1] - 1e-9);
        if l1 <= l2 {
            prop_assert!((point.value - action.latent(&l)).abs() <= 1e-9);
        }
    }

    #[test]
    fn constrained_weights_beat_every_feasible_grid_point(reg in strict_strategy(), lambda in 0.2f64..5.0, l1 in 0.0f64..6.0, l2 in 0.0f64..6.0, k0 in -1.0f64..1.0, k1 in 0.1f64..1.0, b in -0.5f64..0.5) {
        let region = CurriculumRegion::halfspace(Halfspace::new(vec![k0, k1], b).unwrap());
        let l = [l1, l2];
        let offset = reg.normalization_offset(lambda);
        let objective = |v: &[f64]| v.iter().zip(&l).map(|(&vi, &li)| vi * li + reg.r_sp(vi, lambda) - offset).sum::<f64>();
        let feasible = |v: &[f64]| v[0] * k0 + v[1] * k1 >= b;
        let Ok(oracle) = grid_constrained_inf(objective, &GridSpec::unit_cube(2, 81), Some(&feasible)) else {
            return Ok(());
        };
        let solved = constrained_weights(&reg, lambda, Some(&region), &l, &SolverOptions::default()).unwrap();
        prop_assert!(region.contains(&solved.weights, 1e-8));
        prop_assert!(solved.value <= oracle.value + 1e-8);
        prop_assert!((solved.value - objective(&solved.weights)).abs() <= 1e-8);
    }

    #[test]
    fn chain_orders_give_sorted_weights(reg in reg_strategy(), lambda in 0.2f64..5.0, l in prop::collection::vec(0.0f64..6.0, 2..7)) {
        let n = l.len();
        let hs: Vec<_> = (0..n - 1).map(|i| Halfspace::pairwise_order(n, i, i + 1).unwrap()).collect();
        let region = CurriculumRegion::intersection(n, hs).unwrap();
        let solved = constrained_weights(&reg, lambda, Some(&region), &l, &SolverOptions::default()).unwrap();
        prop_assert!(solved.weights.windows(2).all(|p| p[0] >= p[1] - 1e-12));
        let free = constrained_weights(&reg, lambda, None, &l, &SolverOptions::default()).unwrap();
        prop_assert!(solved.value >= free.value - 1e-9);
    }

    #[test]
    fn age_scaling_is_exact(reg in reg_strategy(), e in -4i32..5, l in 0.0f64..40.0) {
        let lambda = 2f64.powi(e);
        let lhs = reg.latent(lambda, l).unwrap();
        let rhs = lambda * reg.latent(1.0, l / lambda).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10);
    }
}
