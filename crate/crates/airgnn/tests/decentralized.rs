mod common;

use airgnn::channel::{sample_realization, ChannelModel};
use airgnn::decentralized::{
    count_transmissions, locality_audit, logged_transmissions, run_decentralized, run_decentralized_with,
    RoundSchedule, RunOptions,
};
use airgnn::graphs::{GraphShiftOperator, GraphSignal};
use airgnn::model::{forward, init_parameters, Architecture, InitScheme, Nonlinearity};
use airgnn::rng::substream;
use common::{random_graph, random_instance, random_signal};
use proptest::prelude::*;
use rand::seq::SliceRandom;

const AUDIT: RunOptions = RunOptions { audit: true, shuffle_seed: None, inject_nonlocal_read: None };

#[test]
fn order_five_networks_match_centralized_forward() {
    for seed in 0..10u64 {
        let n = 10 + 2 * seed as usize;
        let s = random_graph(n, 0.3, seed).normalize_by_spectral_radius().unwrap();
        let arch = Architecture::chain(&[2, 4, 3], &[5, 5], &[Nonlinearity::Relu, Nonlinearity::Tanh]).unwrap();
        let params = init_parameters(&arch.layers, InitScheme::UniformFanin, &mut substream(seed, "p", &[]));
        let model = ChannelModel::rayleigh(1.0, 20.0, 1.0).unwrap();
        let r = sample_realization(&s, &arch.layers, &model, seed, "c", &[]);
        let x = random_signal(n, 2, seed);
        let central = forward(&s, &x, &arch, &params, &r).unwrap().output;
        let (local, log) = run_decentralized_with(&s, &x, &arch, &params, &r, AUDIT).unwrap();
        assert!(central.max_abs_diff(&local) <= 1e-12);
        assert!(locality_audit(&log, &s));
        assert_eq!(logged_transmissions(&log), count_transmissions(&RoundSchedule::new(&arch), &s));
    }
}

#[test]
fn perturbing_one_component_leaves_the_other_alone() {
    // nodes 0..4 and 4..8 form two separate rings
    let edges: Vec<_> = (0..4).map(|i| (i, (i + 1) % 4)).chain((0..4).map(|i| (4 + i, 4 + (i + 1) % 4))).collect();
    let s = GraphShiftOperator::from_undirected_edges(8, &edges).unwrap().scaled(0.5);
    let arch = Architecture::chain(&[1, 3, 1], &[3, 3], &[Nonlinearity::Tanh, Nonlinearity::Identity]).unwrap();
    let params = init_parameters(&arch.layers, InitScheme::UniformFanin, &mut substream(1, "p", &[]));
    let model = ChannelModel::rayleigh(1.0, 20.0, 1.0).unwrap();
    let r = sample_realization(&s, &arch.layers, &model, 1, "c", &[]);
    let x = random_signal(8, 1, 1);
    let mut moved = x.clone();
    for i in 4..8 {
        moved.set(i, 0, moved.get(i, 0) + 3.0);
    }
    let a = run_decentralized(&s, &x, &arch, &params, &r).unwrap();
    let b = run_decentralized(&s, &moved, &arch, &params, &r).unwrap();
    for i in 0..4 {
        assert_eq!(a.node(i), b.node(i));
    }
    assert_ne!(a.node(5), b.node(5));
}

#[test]
fn injected_foreign_read_fails_the_audit() {
    let inst = random_instance(3, 10, [Nonlinearity::Relu, Nonlinearity::Tanh]);
    let arch = Architecture::chain(&[inst.x.features(), 2, 1], &[2, 1], &[Nonlinearity::Relu, Nonlinearity::Tanh]).unwrap();
    let params = init_parameters(&arch.layers, InitScheme::UniformFanin, &mut substream(3, "p", &[]));
    let r = sample_realization(&inst.s, &arch.layers, &ChannelModel::ideal(), 3, "c", &[]);
    let n = inst.s.n();
    let opts = RunOptions { inject_nonlocal_read: Some((0, n - 1)), ..AUDIT };
    let (_, log) = run_decentralized_with(&inst.s, &inst.x, &arch, &params, &r, opts).unwrap();
    assert!(!locality_audit(&log, &inst.s));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn decentralized_equals_centralized(seed in any::<u64>()) {
        let inst = random_instance(seed, 30, [Nonlinearity::Tanh, Nonlinearity::Relu]);
        let central = forward(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization).unwrap().output;
        let (local, log) = run_decentralized_with(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization, AUDIT).unwrap();
        prop_assert!(central.max_abs_diff(&local) <= 1e-12);
        prop_assert!(locality_audit(&log, &inst.s));
    }

    #[test]
    fn intra_round_order_does_not_matter(seed in any::<u64>(), shuffle in any::<u64>()) {
        let inst = random_instance(seed, 15, [Nonlinearity::Relu, Nonlinearity::Identity]);
        let (a, la) = run_decentralized_with(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization, AUDIT).unwrap();
        let opts = RunOptions { shuffle_seed: Some(shuffle), ..AUDIT };
        let (b, lb) = run_decentralized_with(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization, opts).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(locality_audit(&la, &inst.s), locality_audit(&lb, &inst.s));
    }

    #[test]
    fn transmission_count_ignores_relabeling(seed in any::<u64>(), n in 1usize..25, f in 1usize..4, k in 0usize..4) {
        let s = random_graph(n, 0.3, seed);
        let arch = Architecture::chain(&[f, 2], &[k], &[Nonlinearity::Identity]).unwrap();
        let sched = RoundSchedule::new(&arch);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut substream(seed, "perm", &[]));
        let count = count_transmissions(&sched, &s);
        prop_assert_eq!(count, count_transmissions(&sched, &s.permuted(&perm).unwrap()));
        prop_assert_eq!(count, k * f * s.num_edges());
        let wide = Architecture::chain(&[2 * f, 2], &[k], &[Nonlinearity::Identity]).unwrap();
        prop_assert_eq!(count_transmissions(&RoundSchedule::new(&wide), &s), 2 * count);
    }

    #[test]
    fn logged_deliveries_match_the_count(seed in any::<u64>()) {
        let inst = random_instance(seed, 12, [Nonlinearity::Tanh, Nonlinearity::Tanh]);
        let (_, log) = run_decentralized_with(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization, AUDIT).unwrap();
        prop_assert_eq!(logged_transmissions(&log), count_transmissions(&RoundSchedule::new(&inst.arch), &inst.s));
        let zero = GraphSignal::zeros(inst.s.n(), inst.x.features());
        prop_assert!(run_decentralized(&inst.s, &zero, &inst.arch, &inst.params, &inst.realization).is_ok());
    }
}
