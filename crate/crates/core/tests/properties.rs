mod common;

use std::sync::Arc;

use proptest::prelude::*;

use brickseq::mask::{enumerate_valid, heuristic_stable, mask, mask_audit, MaskConfig, MaskContext, MaskVariant};
use brickseq::mcts::{plan_sequence, MctsConfig};
use brickseq::shapegen::{complexity, generate, GenConfig, SupportRule};
use brickseq::stability::{assess_stability, StabilityConfig};
use brickseq::validate::{replay_validate, ReplayOutcome};
use brickseq::{ActionSpace, AssemblyState, BrickCatalog, Cell, Dims, Inventory, VoxelGrid};

use common::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn apply_is_monotone_and_conserves_inventory(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cat = catalog();
        let dims = small_dims(&mut r);
        let initial = AssemblyState::new(random_target(&mut r, dims), random_inventory(&mut r, cat.len()), cat.clone()).unwrap();
        let (_, actions) = random_rollout(&mut r, &initial, MaskVariant::Intuitive, 10);
        let mut s = initial.clone();
        for a in &actions {
            let fp = s.footprint(a).unwrap();
            let next = s.apply(a).unwrap();
            prop_assert!(s.current().is_subset_of(next.current()));
            prop_assert_eq!(next.current().count(), s.current().count() + fp.len());
            prop_assert_eq!(next.step(), s.step() + 1);
            s = next;
        }
        for b in 0..cat.len() {
            let placed = actions.iter().filter(|a| a.brick == b).count() as u32;
            prop_assert_eq!(initial.inventory().get(b) - s.inventory().get(b), placed);
        }
        prop_assert_eq!(&s.graph().reconstruct(), s.current());
    }

    #[test]
    fn graph_reconstructs_current_shape(seed in any::<u64>()) {
        let s = random_state(seed);
        prop_assert_eq!(&s.graph().reconstruct(), s.current());
        prop_assert_eq!(s.graph().len(), s.step());
    }

    #[test]
    fn rewards_telescope_to_one(seed in 0u64..5000) {
        let cat = catalog();
        let inv = Inventory::uniform(cat.len(), 4);
        let g = generate(&GenConfig { steps_max: 12, ..GenConfig::new(Dims::new(4, 4, 3).unwrap(), inv.clone(), seed) }, &cat).unwrap();
        prop_assume!(!g.target.is_empty());
        let mut s = AssemblyState::new(g.target.clone(), inv, cat).unwrap();
        let mut total = 0.0;
        let mut cells = 0;
        for a in &g.witness {
            total += s.instant_reward(a).unwrap();
            cells += s.footprint(a).unwrap().len();
            s.apply_in_place(a).unwrap();
        }
        prop_assert!(s.is_complete());
        prop_assert_eq!(cells, g.target.count());
        prop_assert!((total - 1.0).abs() < 1e-9, "{}", total);
    }
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn mask_variants_nest(seed in any::<u64>()) {
        let s = random_state(seed);
        let cfgs = MaskVariant::ALL.map(MaskConfig::new);
        for a in ActionSpace::new(s.dims(), s.catalog().len()).actions() {
            let [intuitive, operable, heuristic, full, robot] = cfgs.each_ref().map(|c| mask(&s, &a, c).overall);
            prop_assert!(!operable || intuitive, "{a:?}");
            prop_assert!(!heuristic || operable, "{a:?}");
            prop_assert!(!full || heuristic, "{a:?}");
            prop_assert!(!robot || full, "{a:?}");
        }
    }

    #[test]
    fn short_circuit_agrees_with_full_audit(seed in any::<u64>()) {
        let s = random_state(seed);
        let cfg = MaskConfig::new(MaskVariant::Full);
        for a in ActionSpace::new(s.dims(), s.catalog().len()).actions() {
            let short = mask(&s, &a, &cfg);
            let full = mask_audit(&s, &a, &cfg);
            prop_assert_eq!(short.overall, full.overall, "{:?}", a);
            prop_assert_eq!(short.first_failure(), full.first_failure(), "{:?}", a);
        }
    }

    #[test]
    fn enumeration_is_deterministic_across_thread_counts(seed in any::<u64>()) {
        let s = random_state(seed);
        let cfg = MaskConfig::new(MaskVariant::Full);
        let reference = enumerate_valid(&s, &cfg);
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let bits = pool.install(|| MaskContext::new(&s, &cfg).enumerate());
            prop_assert_eq!(&bits, &reference);
        }
    }
}

fn dims_strategy() -> impl Strategy<Value = Dims> {
    (1usize..=4, 2usize..=6, 2usize..=4).prop_map(|(h, w, d)| Dims::new(h, w, d).unwrap())
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn stability_is_homogeneous(seed in any::<u64>(), dims in dims_strategy(), k in 0.05f64..20.0) {
        let (s, actions) = random_structure(seed, dims, 6);
        let cfg = StabilityConfig::default();
        let base = assess_stability(s.graph(), s.catalog(), &[], &cfg).unwrap();
        let heavy = Arc::new(BrickCatalog::default().with_unit_weight(k));
        let t = rebuild(dims, &actions, heavy);
        let scaled = assess_stability(t.graph(), t.catalog(), &[], &StabilityConfig { t_pull: cfg.t_pull * k, ..cfg }).unwrap();
        prop_assert_eq!(base.feasible, scaled.feasible);
        prop_assert_eq!(base.stable, scaled.stable);
        if let (Some(a), Some(b)) = (&base.scores, &scaled.scores) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x.raw - y.raw).abs() < 1e-6, "{} vs {}", x.raw, y.raw);
            }
        }
    }

    #[test]
    fn stability_is_mirror_symmetric(seed in any::<u64>(), dims in dims_strategy(), flip_x in any::<bool>()) {
        let (s, actions) = random_structure(seed, dims, 6);
        let cfg = StabilityConfig::default();
        let base = assess_stability(s.graph(), s.catalog(), &[], &cfg).unwrap();
        let m = rebuild(dims, &mirror(&actions, dims, s.catalog(), flip_x), catalog());
        if flip_x {
            prop_assert_eq!(&m.current().mirror_x(), s.current());
        }
        let mirrored = assess_stability(m.graph(), m.catalog(), &[], &cfg).unwrap();
        prop_assert_eq!(base.feasible, mirrored.feasible);
        if base.feasible {
            prop_assert!((base.max_score - mirrored.max_score).abs() < 1e-6, "{} vs {}", base.max_score, mirrored.max_score);
        }
    }

    #[test]
    fn more_capacity_never_destabilizes(seed in any::<u64>(), dims in dims_strategy(), t in 0.0f64..8.0, extra in 0.0f64..8.0) {
        let (s, _) = random_structure(seed, dims, 6);
        let weak = assess_stability(s.graph(), s.catalog(), &[], &StabilityConfig { t_pull: t, ..Default::default() }).unwrap();
        let strong = assess_stability(s.graph(), s.catalog(), &[], &StabilityConfig { t_pull: t + extra, ..Default::default() }).unwrap();
        prop_assert!(!weak.stable || strong.stable);
        prop_assert_eq!(weak.feasible, strong.feasible);
    }

    #[test]
    fn feasible_structures_are_grounded(seed in any::<u64>(), dims in dims_strategy()) {
        let (s, _) = random_structure(seed, dims, 6);
        let r = assess_stability(s.graph(), s.catalog(), &[], &StabilityConfig::default()).unwrap();
        if r.feasible {
            prop_assert!(s.graph().all_grounded());
        } else {
            prop_assert!(r.scores.is_none() && !r.stable);
        }
    }

    #[test]
    fn full_mask_pass_has_a_ground_path(seed in any::<u64>()) {
        let s = random_state(seed);
        let cfg = MaskConfig::new(MaskVariant::Full);
        for i in enumerate_valid(&s, &cfg).ones() {
            let a = ActionSpace::new(s.dims(), s.catalog().len()).action(i);
            prop_assert!(heuristic_stable(&s, &a));
        }
    }

    #[test]
    fn aligned_stacks_carry_no_tension(levels in 1usize..=4, brick in 0usize..8) {
        let cat = catalog();
        let t = cat.get(brick).unwrap();
        prop_assume!(t.len_x <= 2 && t.len_y <= 6);
        let dims = Dims::new(2, 6, 5).unwrap();
        let actions: Vec<_> = (0..levels).map(|z| brickseq::Action::new(brick, 0, 0, z, LANDSCAPE)).collect();
        let mut prev = 0.0;
        for n in 1..=levels {
            let s = rebuild(dims, &actions[..n], cat.clone());
            let r = assess_stability(s.graph(), s.catalog(), &[], &StabilityConfig::default()).unwrap();
            prop_assert!(r.stable);
            prop_assert!(r.max_score <= prev + 1e-12);
            prev = r.max_score;
        }
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn full_mask_plans_never_pass_through_unstable_prefixes(seed in 0u64..10_000) {
        let cat = catalog();
        let inv = Inventory::uniform(cat.len(), 4);
        let g = generate(&GenConfig { steps_max: 6, ..GenConfig::new(Dims::new(3, 4, 3).unwrap(), inv.clone(), seed) }, &cat).unwrap();
        prop_assume!(!g.target.is_empty());
        let initial = AssemblyState::new(g.target.clone(), inv, cat).unwrap();
        let cfg = MctsConfig { simulations_per_move: 20, seed, ..Default::default() };
        let plan = plan_sequence(&initial, &cfg, None).unwrap().plan;
        let mut s = initial.clone();
        for a in &plan.actions {
            prop_assert!(mask(&s, a, &cfg.mask).overall);
            s.apply_in_place(a).unwrap();
            let r = assess_stability(s.graph(), s.catalog(), &[], &cfg.mask.stability).unwrap();
            prop_assert!(r.stable);
        }
        prop_assert_eq!(plan_sequence(&initial, &cfg, None).unwrap().plan, plan);
    }

    #[test]
    fn full_replay_success_implies_weaker_replay_success(seed in 0u64..10_000) {
        let cat = catalog();
        let inv = Inventory::uniform(cat.len(), 4);
        let g = generate(&GenConfig { steps_max: 10, ..GenConfig::new(Dims::new(4, 4, 3).unwrap(), inv.clone(), seed) }, &cat).unwrap();
        prop_assume!(!g.target.is_empty());
        let initial = AssemblyState::new(g.target.clone(), inv, cat).unwrap();
        let full = replay_validate(&initial, &g.witness, &MaskConfig::new(MaskVariant::Full), false).unwrap();
        prop_assert_eq!(full.outcome, ReplayOutcome::ValidComplete);
        for v in [MaskVariant::Intuitive, MaskVariant::Operable, MaskVariant::Heuristic] {
            prop_assert_eq!(replay_validate(&initial, &g.witness, &MaskConfig::new(v), false).unwrap().outcome, ReplayOutcome::ValidComplete);
        }
    }

    #[test]
    fn replaying_the_accepted_prefix_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cat = catalog();
        let dims = small_dims(&mut r);
        let initial = AssemblyState::new(random_target(&mut r, dims), random_inventory(&mut r, cat.len()), cat).unwrap();
        let (_, actions) = random_rollout(&mut r, &initial, MaskVariant::Intuitive, 8);
        let cfg = MaskConfig::new(MaskVariant::Full);
        let first = replay_validate(&initial, &actions, &cfg, false).unwrap();
        let accepted = match first.outcome {
            ReplayOutcome::Violation { step, .. } => step,
            _ => actions.len(),
        };
        let again = replay_validate(&initial, &actions[..accepted], &cfg, false).unwrap();
        prop_assert_eq!(&again.verdicts[..], &first.verdicts[..accepted]);
        let violated = matches!(again.outcome, ReplayOutcome::Violation { .. });
        prop_assert!(!violated);
    }
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn unsupported_ratio_is_bounded_and_zero_iff_columns_filled(cells in prop::collection::vec((0usize..3, 0usize..3, 0usize..3), 1..20)) {
        let dims = Dims::new(3, 3, 3).unwrap();
        let g = VoxelGrid::from_cells(dims, cells.iter().map(|&(x, y, z)| Cell::new(x, y, z))).unwrap();
        let c = complexity(&g, SupportRule::FullColumn).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.c_s));
        let column_supported = g.cells().all(|c| (0..c.z).all(|z| g.get(Cell::new(c.x, c.y, z)).unwrap()));
        prop_assert_eq!(c.c_s == 0.0, column_supported);
        prop_assert_eq!(c.c_v, g.count());
    }
}
