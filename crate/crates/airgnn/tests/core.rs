mod common;

use airgnn::channel::{sample_realization, ChannelModel, ChannelRealization, FadingMode};
use airgnn::graphs::{GraphShiftOperator, GraphSignal};
use airgnn::model::{
    air_filter_apply, backward, forward, init_parameters, layer_forward, AirGnnParameters, Architecture,
    InitScheme, LayerShape, Nonlinearity,
};
use airgnn::rng::substream;
use common::{dense, random_graph, random_instance, random_signal, signal_matrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

const ACTS: [Nonlinearity; 3] = [Nonlinearity::Relu, Nonlinearity::Tanh, Nonlinearity::Identity];

/// Conventional polynomial-filter GNN on dense matrices: powers of S are
/// formed explicitly and the coefficient layout is read from the flat vector.
fn conventional_gnn(s: &GraphShiftOperator, x: &GraphSignal, arch: &Architecture, params: &AirGnnParameters) -> DMatrix<f64> {
    let sd = dense(s);
    let n = s.n();
    let mut h = signal_matrix(x);
    let mut offset = 0;
    for (sh, act) in arch.layers.iter().zip(&arch.activations) {
        let coeffs = &params.as_slice()[offset..offset + sh.num_coefficients()];
        offset += sh.num_coefficients();
        let mut out = DMatrix::zeros(n, sh.f_out);
        let mut power = DMatrix::identity(n, n);
        for k in 0..=sh.order {
            let w = DMatrix::from_fn(sh.f_in, sh.f_out, |g, f| coeffs[(g * sh.f_out + f) * (sh.order + 1) + k]);
            out += &power * &h * w;
            power = &sd * power;
        }
        h = out.map(|v| match act {
            Nonlinearity::Relu => v.max(0.0),
            Nonlinearity::Tanh => v.tanh(),
            Nonlinearity::Identity => v,
        });
    }
    h
}

fn assert_close(a: &GraphSignal, b: &DMatrix<f64>, tol: f64) {
    assert_eq!((a.n(), a.features()), b.shape());
    for i in 0..a.n() {
        for f in 0..a.features() {
            let d = (a.get(i, f) - b[(i, f)]).abs();
            assert!(d <= tol, "({i}, {f}): {} vs {} (diff {d:e})", a.get(i, f), b[(i, f)]);
        }
    }
}

fn fading_dense(s: &GraphShiftOperator, r: &ChannelRealization, layer: usize, hop: usize) -> DMatrix<f64> {
    dense(&r.layers[layer].hops[hop].fading[0].to_operator(s).unwrap())
}

#[test]
fn ideal_channels_reduce_to_conventional_gnn() {
    for seed in 0..50u64 {
        let acts = [ACTS[seed as usize % 3], ACTS[(seed as usize / 3) % 3]];
        let inst = random_instance(seed, 20, acts);
        let ideal = ChannelRealization::ideal(&inst.s, &inst.arch.layers);
        let tape = forward(&inst.s, &inst.x, &inst.arch, &inst.params, &ideal).unwrap();
        let oracle = conventional_gnn(&inst.s, &inst.x, &inst.arch, &inst.params);
        assert_close(&tape.output, &oracle, 1e-12);
    }
}

#[test]
fn ideal_filter_matches_polynomial_filter() {
    let s = random_graph(7, 0.5, 1).normalize_by_spectral_radius().unwrap();
    let x = random_signal(7, 2, 1);
    let alpha = [0.3, -1.2, 0.7, 0.05, 2.0];
    let shapes = [LayerShape::new(2, 2, 4)];
    let ideal = ChannelRealization::ideal(&s, &shapes);
    let (y, _) = air_filter_apply(&s, &x, &alpha, &ideal.layers[0].hops).unwrap();
    let sd = dense(&s);
    let mut oracle = DMatrix::zeros(7, 2);
    let mut p = DMatrix::identity(7, 7);
    for a in alpha {
        oracle += a * &p * signal_matrix(&x);
        p = &sd * p;
    }
    assert_close(&y, &oracle, 1e-12);
}

#[test]
fn recursive_filter_matches_expanded_signal_plus_noise_sum() {
    // x^(k) = H_k..H_1 x + sum_j H_k..H_{j+1} n_j, evaluated without recursion
    let s = GraphShiftOperator::from_undirected_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let model = ChannelModel::rayleigh(0.8, 5.0, 1.0).unwrap();
    let shapes = [LayerShape::new(1, 1, 2)];
    let r = sample_realization(&s, &shapes, &model, 3, "fixed", &[]);
    let hops = &r.layers[0].hops;
    let x = GraphSignal::from_column(vec![0.4, -1.1, 2.5]).unwrap();
    let alpha = [0.9, -0.6, 1.7];
    let (y, _) = air_filter_apply(&s, &x, &alpha, hops).unwrap();

    let h: Vec<DMatrix<f64>> = (0..2).map(|k| fading_dense(&s, &r, 0, k)).collect();
    let noise: Vec<DMatrix<f64>> = hops.iter().map(|hp| signal_matrix(&hp.noise)).collect();
    let xm = signal_matrix(&x);
    let product = |from: usize, to: usize| {
        // H_to ... H_from (1-based hop indices), identity when empty
        let mut m = DMatrix::identity(3, 3);
        for k in from..=to {
            m = &h[k - 1] * m;
        }
        m
    };
    let mut signal = DMatrix::zeros(3, 1);
    let mut accumulated_noise = DMatrix::zeros(3, 1);
    for (k, a) in alpha.iter().enumerate() {
        signal += *a * product(1, k) * &xm;
        for j in 1..=k {
            accumulated_noise += *a * product(j + 1, k) * &noise[j - 1];
        }
    }
    assert_close(&y, &(signal + accumulated_noise), 1e-12);
}

#[test]
fn layer_matches_naive_loops() {
    let s = random_graph(5, 0.6, 8);
    let model = ChannelModel::rayleigh(1.0, 10.0, 1.0).unwrap();
    let sh = LayerShape::new(3, 4, 3);
    let r = sample_realization(&s, &[sh], &model, 8, "layer", &[]);
    let params = init_parameters(&[sh], InitScheme::UniformFanin, &mut substream(8, "p", &[]));
    let x = random_signal(5, 3, 8);
    for act in ACTS {
        let (y, _) = layer_forward(&s, &x, params.bank(0), &r.layers[0].hops, act).unwrap();
        // stack[k][i][g]
        let mut stack = vec![(0..5).map(|i| (0..3).map(|g| x.get(i, g)).collect::<Vec<_>>()).collect::<Vec<_>>()];
        for hop in &r.layers[0].hops {
            let prev = stack.last().unwrap();
            let h = hop.fading[0].to_operator(&s).unwrap();
            let mut next = vec![vec![0.0; 3]; 5];
            for i in 0..5 {
                for g in 0..3 {
                    let mut acc = hop.noise.get(i, g);
                    for j in 0..5 {
                        acc += h.get(i, j) * prev[j][g];
                    }
                    next[i][g] = acc;
                }
            }
            stack.push(next);
        }
        for i in 0..5 {
            for f in 0..4 {
                let mut u = 0.0;
                for g in 0..3 {
                    for (k, z) in stack.iter().enumerate() {
                        u += params.bank(0).coeff(g, f, k) * z[i][g];
                    }
                }
                assert!((y.get(i, f) - act.apply(u)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn signal_and_noise_components_add_up_for_linear_networks() {
    for seed in 0..20u64 {
        let inst = random_instance(seed, 12, [Nonlinearity::Identity, Nonlinearity::Identity]);
        let full = forward(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization).unwrap().output;
        let quiet = inst.realization.without_noise();
        let signal = forward(&inst.s, &inst.x, &inst.arch, &inst.params, &quiet).unwrap().output;
        let zero = GraphSignal::zeros(inst.x.n(), inst.x.features());
        let noise = forward(&inst.s, &zero, &inst.arch, &inst.params, &inst.realization).unwrap().output;
        for ((a, b), c) in full.as_slice().iter().zip(signal.as_slice()).zip(noise.as_slice()) {
            assert!((a - (b + c)).abs() <= 1e-12);
        }
    }
}

#[test]
fn uniform_fanin_variance() {
    let sh = LayerShape::new(4, 250, 4);
    let draws = sh.num_coefficients();
    assert_eq!(draws, 5000);
    let mut total = Vec::new();
    for seed in 0..20 {
        let p = init_parameters(&[sh], InitScheme::UniformFanin, &mut substream(seed, "init", &[]));
        total.extend_from_slice(p.as_slice());
    }
    let b = 1.0 / ((4 * 5) as f64).sqrt();
    let mean = total.iter().sum::<f64>() / total.len() as f64;
    let var = total.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total.len() as f64;
    assert!(total.iter().all(|v| v.abs() <= b));
    assert!((var - b * b / 3.0).abs() / (b * b / 3.0) <= 0.02, "{var}");
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradient() {
    let inst = random_instance(4, 10, [Nonlinearity::Tanh, Nonlinearity::Relu]);
    let tape = forward(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization).unwrap();
    let zero = GraphSignal::zeros(tape.output.n(), tape.output.features());
    let g = backward(&tape, &inst.params, &zero).unwrap();
    assert!(g.as_slice().iter().all(|&v| v == 0.0));
}

fn objective(inst: &common::Instance, params: &AirGnnParameters, w: &GraphSignal) -> f64 {
    let y = forward(&inst.s, &inst.x, &inst.arch, params, &inst.realization).unwrap().output;
    y.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_matches_central_differences(seed in any::<u64>()) {
        let inst = random_instance(seed, 8, [Nonlinearity::Tanh, Nonlinearity::Tanh]);
        let tape = forward(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization).unwrap();
        let w = random_signal(tape.output.n(), tape.output.features(), seed ^ 7);
        let g = backward(&tape, &inst.params, &w).unwrap();
        let h = 1e-6;
        for idx in 0..inst.params.len() {
            let mut p = inst.params.clone();
            p.as_mut_slice()[idx] += h;
            let up = objective(&inst, &p, &w);
            p.as_mut_slice()[idx] -= 2.0 * h;
            let down = objective(&inst, &p, &w);
            let fd = (up - down) / (2.0 * h);
            let a = g.as_slice()[idx];
            // roundoff in the differences is about 1e-10 for unit-size
            // objectives; the floor keeps near-zero gradients out of the ratio
            let rel = (a - fd).abs() / fd.abs().max(a.abs()).max(1e-4);
            prop_assert!(rel <= 1e-5, "coefficient {idx}: analytic {a}, fd {fd}");
        }
    }

    #[test]
    fn fixed_realization_linear_network_is_linear_in_input(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let inst = random_instance(seed, 10, [Nonlinearity::Identity, Nonlinearity::Identity]);
        let quiet = inst.realization.without_noise();
        let y = random_signal(inst.x.n(), inst.x.features(), seed ^ 3);
        let mut comb = inst.x.clone();
        for (c, v) in comb.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *c = a * *c + b * v;
        }
        let f = |x: &GraphSignal| forward(&inst.s, x, &inst.arch, &inst.params, &quiet).unwrap().output;
        let (l, fx, fy) = (f(&comb), f(&inst.x), f(&y));
        for ((l, u), v) in l.as_slice().iter().zip(fx.as_slice()).zip(fy.as_slice()) {
            prop_assert!((l - (a * u + b * v)).abs() <= 1e-12 * l.abs().max(1.0), "{l} vs {}", a * u + b * v);
        }
    }

    #[test]
    fn forward_is_permutation_equivariant(seed in any::<u64>()) {
        let inst = random_instance(seed, 12, [Nonlinearity::Relu, Nonlinearity::Tanh]);
        let n = inst.s.n();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut substream(seed, "perm", &[]));
        let ps = inst.s.permuted(&perm).unwrap();
        let mut pr = inst.realization.clone();
        for hop in pr.layers.iter_mut().flat_map(|l| l.hops.iter_mut()) {
            for m in hop.fading.iter_mut() {
                m.gains = m.to_operator(&inst.s).unwrap().permuted(&perm).unwrap().values().to_vec();
            }
            hop.noise = hop.noise.permuted(&perm).unwrap();
        }
        let lhs = forward(&ps, &inst.x.permuted(&perm).unwrap(), &inst.arch, &inst.params, &pr).unwrap().output;
        let rhs = forward(&inst.s, &inst.x, &inst.arch, &inst.params, &inst.realization).unwrap().output.permuted(&perm).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }
}

#[test]
fn per_feature_fading_realizations_feed_each_input_its_own_gains() {
    let s = random_graph(6, 0.5, 2);
    let model = ChannelModel { per_feature_fading: true, ..ChannelModel::rayleigh(1.0, 20.0, 1.0).unwrap() }
        .with_mode(FadingMode::Multiply);
    let sh = LayerShape::new(2, 1, 1);
    let r = sample_realization(&s, &[sh], &model, 2, "pf", &[]);
    let hop = &r.layers[0].hops[0];
    assert_eq!(hop.fading.len(), 2);
    let x = random_signal(6, 2, 2);
    let mut params = AirGnnParameters::zeros(&[sh]);
    // only the one-hop term of input feature 1
    let idx = params.index_of(0, 1, 0, 1);
    params.as_mut_slice()[idx] = 1.0;
    let (y, _) = layer_forward(&s, &x, params.bank(0), &r.layers[0].hops, Nonlinearity::Identity).unwrap();
    let h1 = dense(&hop.fading[1].to_operator(&s).unwrap());
    let want = h1 * signal_matrix(&x).column(1) + signal_matrix(&hop.noise).column(1);
    for i in 0..6 {
        assert!((y.get(i, 0) - want[i]).abs() <= 1e-12);
    }
}
