use ni_core::instances::{generate, Instance, ProblemKind, RngSeed, Solution};
use ni_core::model::{Hyper, ModelParams};
use ni_core::operators::{apply, delta, neighborhood, OperatorKind};
use ni_core::training::{clip_gradient, discounted_return};
use proptest::prelude::*;

fn perm_of(sol: &Solution) -> Vec<usize> {
    sol.as_perm().unwrap().order().to_vec()
}

fn from_order(order: Vec<usize>) -> Solution {
    Solution::Perm(ni_core::instances::Permutation::new(order).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prp_complement_identity(n in 2usize..12, seed in any::<u64>()) {
        let inst = generate(ProblemKind::Prp, n, RngSeed(seed)).unwrap();
        let Instance::Prp(p) = &inst else { unreachable!() };
        let sol = inst.random_solution(&mut RngSeed(seed ^ 1).rng());
        let mut rev = perm_of(&sol);
        rev.reverse();
        let total: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| p.b(i, j)).sum();
        let lhs = inst.objective(&sol).unwrap() + inst.objective(&from_order(rev)).unwrap();
        prop_assert!((lhs - total).abs() <= 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn tsp_rotation_and_reversal(n in 3usize..15, seed in any::<u64>(), shift in 0usize..15) {
        let inst = generate(ProblemKind::Tsp, n, RngSeed(seed)).unwrap();
        let sol = inst.random_solution(&mut RngSeed(seed ^ 2).rng());
        let f = inst.objective(&sol).unwrap();
        let mut order = perm_of(&sol);
        order.rotate_left(shift % n);
        prop_assert!((inst.objective(&from_order(order.clone())).unwrap() - f).abs() <= 1e-12 * f.max(1.0));
        order.reverse();
        prop_assert!((inst.objective(&from_order(order)).unwrap() - f).abs() <= 1e-12 * f.max(1.0));
    }

    #[test]
    fn gpp_label_swap(n in 1usize..8, seed in any::<u64>()) {
        let n = 2 * n;
        let inst = generate(ProblemKind::Gpp, n, RngSeed(seed)).unwrap();
        let sol = inst.random_solution(&mut RngSeed(seed ^ 3).rng());
        let flipped: Vec<u8> = sol.as_part().unwrap().sides().iter().map(|s| 1 - s).collect();
        let other = Solution::Part(ni_core::instances::Bipartition::new(flipped).unwrap());
        prop_assert_eq!(inst.objective(&sol).unwrap(), inst.objective(&other).unwrap());
    }

    #[test]
    fn delta_matches_full_evaluation(seed in any::<u64>(), n in 4usize..11, which in 0usize..6) {
        let (problem, op) = [
            (ProblemKind::Prp, OperatorKind::Insert),
            (ProblemKind::Prp, OperatorKind::Swap),
            (ProblemKind::Prp, OperatorKind::AdjacentSwap),
            (ProblemKind::Tsp, OperatorKind::Reverse),
            (ProblemKind::Tsp, OperatorKind::TwoOpt),
            (ProblemKind::Gpp, OperatorKind::GppSwap),
        ][which];
        let n = if problem == ProblemKind::Gpp { n & !1 } else { n };
        let inst = generate(problem, n, RngSeed(seed)).unwrap();
        let sol = inst.random_solution(&mut RngSeed(seed ^ 4).rng());
        let f = inst.objective(&sol).unwrap();
        for a in neighborhood(op, &sol) {
            let full = inst.objective(&apply(op, &sol, a).unwrap()).unwrap() - f;
            let d = delta(&inst, &sol, op, a).unwrap();
            prop_assert!((d - full).abs() <= 1e-9 * f.abs().max(1.0), "{:?}: {} vs {}", a, d, full);
        }
    }

    #[test]
    fn discounted_return_is_linear(
        r in prop::collection::vec(-10.0f64..10.0, 1..20),
        s in prop::collection::vec(-10.0f64..10.0, 20),
        a in -3.0f64..3.0,
        gamma in 0.0f64..=1.0,
    ) {
        let s = &s[..r.len()];
        let mix: Vec<f64> = r.iter().zip(s).map(|(x, y)| a * x + y).collect();
        let (rr, rs, rm) = (discounted_return(&r, gamma), discounted_return(s, gamma), discounted_return(&mix, gamma));
        for t in 0..r.len() {
            prop_assert!((rm[t] - (a * rr[t] + rs[t])).abs() <= 1e-9 * (1.0 + rm[t].abs()));
        }
        prop_assert_eq!(*rr.last().unwrap(), *r.last().unwrap());
    }

    #[test]
    fn clipped_norm_is_bounded(seed in any::<u64>(), scale in 1e-3f32..1e3, max_norm in 1e-2f64..10.0) {
        let mut g = ModelParams::<f32>::init(Hyper::new(4, 1, ProblemKind::Gpp), RngSeed(seed));
        g.scale_trainable(scale);
        let before = g.trainable_norm();
        let reported = clip_gradient(&mut g, max_norm);
        prop_assert!((reported - before).abs() <= 1e-9 * before);
        let after = g.trainable_norm();
        prop_assert!(after <= max_norm * (1.0 + 1e-6) + 1e-6);
        if before <= max_norm {
            prop_assert_eq!(after, before);
        }
    }
}
