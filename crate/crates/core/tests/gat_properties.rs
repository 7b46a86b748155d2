mod common;

use std::collections::HashSet;

use alterlink::data::{split_edges, Graph};
use alterlink::gat::{
    self, grad_check, link_loss_at, link_loss_gradient, Architecture, GatModel, TrainConfig,
};
use alterlink::seed;
use common::{random_graph, random_instance, small_arch};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn gradients_match_finite_differences_on_random_instances() {
    let mut arch_rng = seed::rng(99);
    for s in 0..12 {
        let arch = small_arch(&mut arch_rng);
        let inst = random_instance(s, &arch, 20);
        let report = grad_check(&inst.model, &inst.features, &inst.graph, &inst.pairs, &inst.labels, 1e-5, 1e-4).unwrap();
        assert!(report.passed, "instance {s} arch {arch:?}: {report:?}");
    }
}

/// Central differences at δ=1e-5 carry ~1e-11 of roundoff, which swamps the
/// relative error of the many ~1e-9 gradients in an 18k-parameter model.
/// Large components get the relative bound, tiny ones an absolute bound.
#[test]
fn gradients_match_for_default_architecture() {
    let inst = random_instance(4, &Architecture::default(), 6);
    let analytic = link_loss_gradient(&inst.model, &inst.features, &inst.graph, &inst.pairs, &inst.labels).unwrap();
    let numeric = gat::numeric_gradient(&inst.model.flatten(), 1e-5, |p| {
        link_loss_at(&inst.model, p, &inst.features, &inst.graph, &inst.pairs, &inst.labels)
    })
    .unwrap();
    assert_eq!(analytic.len(), inst.model.n_params());
    for (k, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        if a.abs() + n.abs() > 1e-6 {
            assert!(gat::relative_error(a, n) < 1e-4, "{}: {a} vs {n}", inst.model.param_name(k));
        } else {
            assert!((a - n).abs() < 1e-9, "{}: {a} vs {n}", inst.model.param_name(k));
        }
    }
}

#[test]
fn perturbed_gradient_is_caught_and_named() {
    let arch = Architecture {
        hidden_channels: 3,
        heads: 2,
        layers: 2,
        out_channels: 3,
        ..Architecture::default()
    };
    let inst = random_instance(11, &arch, 8);
    let mut analytic = link_loss_gradient(&inst.model, &inst.features, &inst.graph, &inst.pairs, &inst.labels).unwrap();
    let numeric = gat::numeric_gradient(&inst.model.flatten(), 1e-5, |p| {
        link_loss_at(&inst.model, p, &inst.features, &inst.graph, &inst.pairs, &inst.labels)
    })
    .unwrap();
    // largest W entry of the first head
    let w_len = inst.model.layers[0].heads[0].weight.len();
    let k = (0..w_len).max_by(|&a, &b| analytic[a].abs().total_cmp(&analytic[b].abs())).unwrap();
    analytic[k] *= 1.1;
    let report = gat::compare(&analytic, &numeric, 1e-4, |i| inst.model.param_name(i));
    assert!(!report.passed);
    assert_eq!(report.worst_index, k);
    assert!(report.worst_parameter.starts_with("layer1.head1.W["), "{}", report.worst_parameter);
}

#[test]
fn zero_step_is_rejected() {
    let inst = random_instance(1, &Architecture::default(), 5);
    assert!(grad_check(&inst.model, &inst.features, &inst.graph, &inst.pairs, &inst.labels, 0.0, 1e-4).is_err());
}

#[test]
fn zero_parameters_give_finite_gradients() {
    let inst = random_instance(2, &Architecture::default(), 8);
    let mut m = inst.model.clone();
    m.set_flat(&vec![0.0; m.n_params()]);
    let g = link_loss_gradient(&m, &inst.features, &inst.graph, &inst.pairs, &inst.labels).unwrap();
    assert!(g.iter().all(|v| v.is_finite()));
}

#[test]
fn default_architecture_widths() {
    let m = GatModel::init(30, &Architecture::default(), 0).unwrap();
    assert_eq!(m.widths(), vec![128, 128, 7]);
    let g = Graph::from_pairs(4, [(0, 1), (2, 3)]);
    let z = m.embed(&Array2::ones((4, 30)), &g).unwrap();
    assert_eq!(z.dim(), 7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn attention_rows_sum_to_one(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let arch = small_arch(&mut rng);
        let inst = random_instance(s, &arch, 12);
        let (_, state) = inst.model.forward(&inst.features, &inst.graph).unwrap();
        for layer in &state.layers {
            for head in &layer.heads {
                for i in 0..inst.graph.n() {
                    let start = inst.graph.offset(i);
                    let row = &head.alpha[start..start + inst.graph.neighbors(i).len()];
                    let sum: f64 = row.iter().sum();
                    prop_assert!((sum - 1.0).abs() < 1e-6);
                    prop_assert!(row.iter().all(|&a| a >= 0.0));
                }
            }
        }
    }

    #[test]
    fn receptive_field_is_local(s in any::<u64>(), hops in 1usize..4) {
        let mut rng = seed::rng(s);
        let arch = Architecture { layers: hops, ..small_arch(&mut rng) };
        let n = 12;
        let graph = random_graph(n, 0.15, &mut rng);
        let x = Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0));
        let model = GatModel::init(3, &arch, s).unwrap();
        let i = rng.random_range(0..n);
        let near: HashSet<usize> = graph.k_hop(&[i], hops).into_iter().collect();
        let mut x2 = x.clone();
        for j in (0..n).filter(|j| !near.contains(j)) {
            for c in 0..3 {
                x2[[j, c]] += rng.random_range(-5.0..5.0);
            }
        }
        let a = model.embed(&x, &graph).unwrap();
        let b = model.embed(&x2, &graph).unwrap();
        for c in 0..a.dim() {
            prop_assert_eq!(a.0[[i, c]], b.0[[i, c]]);
        }
    }

    #[test]
    fn forward_is_permutation_equivariant(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let arch = small_arch(&mut rng);
        let inst = random_instance(s, &arch, 15);
        let n = inst.graph.n();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            perm.swap(k, rng.random_range(0..=k));
        }
        let g2 = inst.graph.permuted(&perm);
        let mut x2 = Array2::zeros(inst.features.dim());
        for old in 0..n {
            x2.row_mut(perm[old]).assign(&inst.features.row(old));
        }
        let a = inst.model.embed(&inst.features, &inst.graph).unwrap();
        let b = inst.model.embed(&x2, &g2).unwrap();
        for old in 0..n {
            for c in 0..a.dim() {
                prop_assert!((a.0[[old, c]] - b.0[[perm[old], c]]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn self_loop_only_graph_embeds_nodes_independently() {
    let m = GatModel::init(3, &Architecture::default(), 5).unwrap();
    let g = Graph::from_pairs(4, []);
    let mut rng = seed::rng(5);
    let x = Array2::from_shape_simple_fn((4, 3), || rng.random_range(-1.0..1.0));
    let mut x2 = x.clone();
    x2.row_mut(2).fill(7.0);
    let a = m.embed(&x, &g).unwrap();
    let b = m.embed(&x2, &g).unwrap();
    for i in [0, 1, 3] {
        assert_eq!(a.row(i), b.row(i));
    }
}

fn ring_fixture() -> (Array2<f64>, Graph, Vec<(usize, usize)>) {
    let n = 40;
    let mut rng = seed::rng(17);
    let x = Array2::from_shape_simple_fn((n, 4), || rng.random_range(-1.0..1.0));
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).chain((0..n).step_by(3).map(|i| (i, (i + 7) % n))).collect();
    let g = Graph::from_pairs(n, pairs.clone());
    (x, g, pairs)
}

#[test]
fn training_is_deterministic_and_zero_epochs_is_identity() {
    let (x, g, pairs) = ring_fixture();
    let split = split_edges(&pairs, (0.6, 0.2, 0.2), 3).unwrap();
    let train_graph = Graph::from_pairs(g.n(), split.train.clone());
    let known: HashSet<_> = g.undirected_edges().into_iter().collect();
    let init = GatModel::init(4, &Architecture::default(), 1).unwrap();
    let cfg = TrainConfig {
        epochs: 15,
        seed: 9,
        ..TrainConfig::default()
    };
    let (a, ha) = gat::train(init.clone(), &x, &train_graph, &split, &known, &cfg).unwrap();
    let (b, hb) = gat::train(init.clone(), &x, &train_graph, &split, &known, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    let zero = TrainConfig { epochs: 0, ..cfg };
    let (c, hc) = gat::train(init.clone(), &x, &train_graph, &split, &known, &zero).unwrap();
    assert_eq!(c, init);
    assert!(hc.epochs.is_empty());
}

#[test]
fn invalid_training_config_is_rejected() {
    let (x, g, pairs) = ring_fixture();
    let split = split_edges(&pairs, (0.6, 0.2, 0.2), 3).unwrap();
    let init = GatModel::init(4, &Architecture::default(), 1).unwrap();
    let cfg = TrainConfig {
        lr: 0.0,
        ..TrainConfig::default()
    };
    assert!(gat::train(init, &x, &g, &split, &HashSet::new(), &cfg).is_err());
}
