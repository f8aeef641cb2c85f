use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use floydnet::attention::{pivotal_attention, AttentionParams, CombineOp, Kernel};
use floydnet::graph::io::write_edge_list;
use floydnet::graph::{
    apply_permutation, cycle_count_oracle, gen_random_graph, parse_edge_list, CountLevel,
    NodePermutation,
};
use floydnet::model::{predict, ModelConfig, ModelParams};
use floydnet::nn::Tensor;
use floydnet::train::clip_grad_norm;
use floydnet::wl::{refine, signature, Scheme};

fn combine_op(multiplicative: bool) -> CombineOp {
    if multiplicative {
        CombineOp::Multiplicative
    } else {
        CombineOp::Additive
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn streamed_kernel_matches_naive(
        seed in 0u64..10_000,
        n in 1usize..12,
        heads in 1usize..4,
        head_dim in 1usize..4,
        tile in 1usize..9,
        multiplicative in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = heads * head_dim;
        let p = AttentionParams::init(d, heads, &mut rng).unwrap();
        let r = Tensor::uniform(&[n, n, d], 1.0, &mut rng);
        let c = combine_op(multiplicative);
        let naive = pivotal_attention(&r, &p, c, Kernel::Naive).unwrap();
        let streamed = pivotal_attention(&r, &p, c, Kernel::Streamed { tile }).unwrap();
        prop_assert!(naive.max_abs_diff(&streamed) < 1e-10);
    }

    #[test]
    fn node_predictions_follow_relabeling(
        seed in 0u64..10_000,
        n in 2usize..7,
        order in 1usize..3,
        multiplicative in any::<bool>(),
    ) {
        let mut cfg = ModelConfig::new(2, 8, 2);
        cfg.order = order;
        cfg.combine = combine_op(multiplicative);
        cfg.readout = CountLevel::Node;
        cfg.seed = seed;
        let params = ModelParams::init(&cfg).unwrap();
        let g = gen_random_graph(n, 0.5, (1, 4), seed).unwrap();
        let pi = NodePermutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let base = predict(&g, &cfg, &params).unwrap();
        let moved = predict(&apply_permutation(&g, &pi).unwrap(), &cfg, &params).unwrap();
        for i in 0..n {
            prop_assert!((moved.data()[pi.apply(i)] - base.data()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn refinement_ignores_labels_and_only_splits(
        seed in 0u64..10_000,
        n in 1usize..7,
        scheme in prop_oneof![Just(Scheme::Wl1), Just(Scheme::Fwl(2)), Just(Scheme::Fwl(3))],
    ) {
        let g = gen_random_graph(n, 0.45, (1, 1), seed).unwrap();
        let pi = NodePermutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed ^ 2));
        let p = refine(&g, scheme).unwrap();
        let q = refine(&apply_permutation(&g, &pi).unwrap(), scheme).unwrap();
        prop_assert_eq!(signature(&p), signature(&q));
        prop_assert!(p.class_counts.windows(2).all(|w| w[0] <= w[1]));
        let mut used = vec![false; p.num_colors];
        for &c in &p.colors {
            used[c as usize] = true;
        }
        prop_assert!(used.iter().all(|&u| u));
    }

    #[test]
    fn cycle_counts_follow_relabeling(seed in 0u64..10_000, n in 3usize..9, len in 3usize..6) {
        let g = gen_random_graph(n, 0.5, (1, 1), seed).unwrap();
        let pi = NodePermutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed ^ 3));
        let base = cycle_count_oracle(&g, len, CountLevel::Node).unwrap();
        let moved = cycle_count_oracle(&apply_permutation(&g, &pi).unwrap(), len, CountLevel::Node).unwrap();
        for i in 0..n {
            prop_assert_eq!(moved[pi.apply(i)], base[i]);
        }
    }

    #[test]
    fn edge_lists_round_trip(seed in 0u64..10_000, n in 1usize..12, p in 0.0f64..1.0) {
        let g = gen_random_graph(n, p, (1, 20), seed).unwrap();
        prop_assert_eq!(parse_edge_list(&write_edge_list(&g)).unwrap(), g);
    }

    #[test]
    fn permutation_inverse_undoes_relabeling(seed in 0u64..10_000, n in 1usize..10) {
        let g = gen_random_graph(n, 0.5, (1, 5), seed).unwrap();
        let pi = NodePermutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed ^ 4));
        let back = apply_permutation(&apply_permutation(&g, &pi).unwrap(), &pi.inverse()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn clipping_caps_norm_and_keeps_direction(
        values in prop::collection::vec(-100.0f64..100.0, 1..40),
        max_norm in 0.01f64..10.0,
    ) {
        let split = values.len() / 2;
        let original = vec![Tensor::from_vec(values[..split].to_vec()), Tensor::from_vec(values[split..].to_vec())];
        let mut clipped = original.clone();
        let norm = clip_grad_norm(&mut clipped, max_norm);
        let after = clipped.iter().map(|g| g.dot(g)).sum::<f64>().sqrt();
        prop_assert!(after <= max_norm * (1.0 + 1e-12));
        let scale = if norm > max_norm { max_norm / norm } else { 1.0 };
        for (o, c) in original.iter().zip(&clipped) {
            for (a, b) in o.data().iter().zip(c.data()) {
                prop_assert!((a * scale - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
