use std::path::Path;

use morphnet_core::architectures::GateState;
use morphnet_core::harness::{nearest_target_correct, Language};
use morphnet_core::morphology::{find_ambiguity, generate_roots};
use morphnet_core::{DatasetSplit, Inventory, RuleKind, RuleSpec, Segment};
use proptest::prelude::*;

fn rule_kind() -> impl Strategy<Value = RuleKind> {
    prop::sample::select(RuleKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gate_columns_lie_on_the_simplex(biases in prop::collection::vec(-30.0f64..30.0, 6)) {
        let mut gates = GateState::new(2, 3);
        gates.bias.data_mut().copy_from_slice(&biases);
        let values = gates.values();
        for t in 0..3 {
            let sum: f64 = (0..2).map(|m| values.get(m, t)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!((0..2).all(|m| values.get(m, t) >= 0.0));
        }
        let usage: f64 = GateState::usage(&values).iter().sum();
        prop_assert!((usage - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gate_values_ignore_a_per_task_shift(
        biases in prop::collection::vec(-5.0f64..5.0, 6),
        shift in -50.0f64..50.0,
    ) {
        let mut a = GateState::new(2, 3);
        a.bias.data_mut().copy_from_slice(&biases);
        let mut b = a.clone();
        for m in 0..2 {
            b.bias.set(m, 1, a.bias.get(m, 1) + shift);
        }
        let (va, vb) = (a.values(), b.values());
        for (x, y) in va.data().iter().zip(vb.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_gradient_sums_to_zero_per_task(
        biases in prop::collection::vec(-3.0f64..3.0, 6),
        errors in prop::collection::vec(0.0f64..5.0, 6),
        lambda in 0.0f64..1.0,
    ) {
        let mut gates = GateState::new(2, 3);
        gates.bias.data_mut().copy_from_slice(&biases);
        let mut err = gates.bias.clone();
        err.data_mut().copy_from_slice(&errors);
        let values = gates.values();
        let grad = gates.bias_gradient(&values, &err, &[true, false, true], lambda);
        for t in 0..3 {
            let sum: f64 = (0..2).map(|m| grad.get(m, t)).sum();
            prop_assert!(sum.abs() < 1e-9);
        }
        prop_assert_eq!(grad.get(0, 1), 0.0);
        prop_assert_eq!(grad.get(1, 1), 0.0);
    }

    #[test]
    fn nearest_target_matches_distance_comparison(
        output in prop::collection::vec(0.0f64..1.0, 2..31),
        pick in any::<prop::sample::Index>(),
    ) {
        let correct = pick.index(output.len());
        let dist = |k: usize| -> f64 {
            output
                .iter()
                .enumerate()
                .map(|(i, &o)| (o - if i == k { 1.0 } else { 0.0 }).powi(2))
                .sum()
        };
        let expected = (0..output.len()).all(|k| k == correct || dist(correct) < dist(k));
        prop_assert_eq!(nearest_target_correct(&output, correct), expected);
    }

    #[test]
    fn phone_encodings_decode_to_themselves(
        index in any::<prop::sample::Index>(),
        noise in prop::collection::vec(-0.45f64..0.45, 12),
    ) {
        let inv = Inventory::with_nasals();
        let id = inv.ids().nth(index.index(inv.len())).unwrap();
        let clean = inv.encode(Segment::Phone(id)).unwrap();
        prop_assert_eq!(inv.nearest_phone(&clean, true).unwrap(), Segment::Phone(id));

        // a small perturbation of a single feature never crosses over
        let mut noisy = clean.clone();
        noisy[index.index(12)] += noise[0];
        prop_assert_eq!(inv.nearest_phone(&noisy, false).unwrap(), Segment::Phone(id));
    }

    #[test]
    fn generated_roots_are_unambiguous_under_every_rule(seed in 0u64..1000) {
        let inv = Inventory::with_nasals();
        let roots = generate_roots(seed, &inv).unwrap();
        prop_assert_eq!(roots.len(), 30);
        for kind in RuleKind::ALL {
            let rule = RuleSpec::standard(kind);
            prop_assert!(find_ambiguity(&rule, &kind.inventory(), &roots).unwrap().is_none());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dataset_text_round_trips(kind in rule_kind(), seed in 0u64..500) {
        let lang = Language::generate(kind, seed, false).unwrap();
        let ds = &lang.dataset;
        prop_assert!(ds.is_disjoint());
        let text = ds.to_text(&lang.inventory);
        let back = DatasetSplit::parse(&text, &lang.inventory, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, ds);

        // every root and slot value is seen in training
        for r in 0..ds.n_roots {
            prop_assert!(ds.train.iter().any(|w| w.root == r));
        }
        for (slot, &size) in ds.slot_sizes.iter().enumerate() {
            for v in 0..size {
                prop_assert!(ds.train.iter().any(|w| w.inflections[slot] == v));
            }
        }
    }
}
