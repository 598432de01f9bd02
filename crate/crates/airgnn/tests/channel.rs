use airgnn::channel::{
    air_shift, rayleigh, sample_fading, sample_realization, ChannelModel, FadingMatrix, FadingMode,
};
use airgnn::graphs::{ideal_shift, GraphShiftOperator, GraphSignal};
use airgnn::model::LayerShape;
use airgnn::rng::substream;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::PI;

fn random_graph(n: usize, p: f64, seed: u64) -> GraphShiftOperator {
    let mut rng = substream(seed, "test-graph", &[]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    GraphShiftOperator::from_undirected_edges(n, &edges).unwrap()
}

#[test]
fn rayleigh_moments_at_a_million_draws() {
    for delta in [0.5, 1.0, 2.0] {
        let mut rng = substream(11, "rayleigh", &[]);
        let draws = 1_000_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..draws {
            let h = rayleigh(delta, &mut rng);
            assert!(h >= 0.0);
            m1 += h;
            m2 += h * h;
        }
        m1 /= draws as f64;
        m2 /= draws as f64;
        let mean = delta * (PI / 2.0).sqrt();
        let second = 2.0 * delta * delta;
        assert!((m1 - mean).abs() / mean < 0.01, "delta {delta}: mean {m1} vs {mean}");
        assert!((m2 - second).abs() / second < 0.01, "delta {delta}: second moment {m2} vs {second}");
    }
}

#[test]
fn monte_carlo_air_shift_converges_to_scaled_nominal_shift() {
    let s = random_graph(10, 0.5, 2);
    let mut rng = substream(2, "x", &[]);
    let x = GraphSignal::from_column((0..10).map(|_| rng.random_range(0.5..1.5)).collect()).unwrap();
    let model = ChannelModel::rayleigh(1.0, 40.0, 1.0).unwrap();
    let zero = GraphSignal::zeros(10, 1);
    let draws = 100_000;
    let mut acc = vec![0.0; 10];
    let mut rng = substream(2, "fading", &[]);
    for _ in 0..draws {
        let h = sample_fading(&s, &model, &mut rng);
        let y = air_shift(&s, &x, &h, &zero).unwrap();
        for (a, v) in acc.iter_mut().zip(y.as_slice()) {
            *a += v;
        }
    }
    let target = ideal_shift(&s, &x).unwrap();
    let scale = (PI / 2.0).sqrt();
    for i in 0..10 {
        let want = scale * target.get(i, 0);
        let got = acc[i] / draws as f64;
        if want == 0.0 {
            assert_eq!(got, 0.0);
        } else {
            assert!((got - want).abs() / want.abs() <= 0.02, "node {i}: {got} vs {want}");
        }
    }
}

#[test]
fn multiply_mode_mean_scales_normalized_entries() {
    let s = random_graph(8, 0.6, 5).normalize_by_spectral_radius().unwrap();
    let model = ChannelModel::rayleigh(2.0, 40.0, 1.0).unwrap().with_mode(FadingMode::Multiply);
    let draws = 100_000;
    let mut acc = vec![0.0; s.nnz()];
    let mut rng = substream(5, "fading", &[]);
    for _ in 0..draws {
        let h = sample_fading(&s, &model, &mut rng);
        for (a, g) in acc.iter_mut().zip(&h.gains) {
            *a += g;
        }
    }
    let scale = 2.0 * (PI / 2.0).sqrt();
    for (a, v) in acc.iter().zip(s.values()) {
        let want = scale * v;
        assert!((a / draws as f64 - want).abs() / want <= 0.02);
    }
}

#[test]
fn noise_of_distinct_hops_is_uncorrelated() {
    let s = GraphShiftOperator::from_undirected_edges(2, &[(0, 1)]).unwrap();
    let model = ChannelModel::rayleigh(1.0, 0.0, 1.0).unwrap();
    let shapes = [LayerShape::new(1, 1, 2)];
    let draws = 100_000u64;
    let mut prods = Vec::with_capacity(draws as usize);
    for m in 0..draws {
        let r = sample_realization(&s, &shapes, &model, 17, "noise", &[m]);
        let a = r.layers[0].hops[0].noise.get(0, 0);
        let b = r.layers[0].hops[1].noise.get(0, 0);
        prods.push(a * b);
    }
    let mean = prods.iter().sum::<f64>() / draws as f64;
    let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se, "covariance {mean}, standard error {se}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_noise_air_shift_is_linear(seed in any::<u64>(), n in 1usize..12, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let s = random_graph(n, 0.5, seed);
        let model = ChannelModel::rayleigh(1.0, 40.0, 1.0).unwrap();
        let h = sample_fading(&s, &model, &mut substream(seed, "h", &[]));
        let mut rng = substream(seed, "xy", &[]);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let comb: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let zero = GraphSignal::zeros(n, 1);
        let f = |v: Vec<f64>| air_shift(&s, &GraphSignal::from_column(v).unwrap(), &h, &zero).unwrap();
        let (l, fx, fy) = (f(comb), f(x), f(y));
        for i in 0..n {
            prop_assert!((l.get(i, 0) - (a * fx.get(i, 0) + b * fy.get(i, 0))).abs() <= 1e-12);
        }
    }

    #[test]
    fn air_shift_is_jointly_permutation_equivariant(seed in any::<u64>(), n in 1usize..15) {
        // dyadic gains and integer signals keep sums exact in any order
        let s = random_graph(n, 0.4, seed);
        let mut rng = substream(seed, "values", &[]);
        let h = FadingMatrix { gains: s.values().iter().map(|_| rng.random_range(1u32..17) as f64 / 8.0).collect() };
        let x = GraphSignal::from_rows(n, 2, (0..2 * n).map(|_| rng.random_range(-8i32..9) as f64).collect()).unwrap();
        let noise = GraphSignal::from_rows(n, 2, (0..2 * n).map(|_| rng.random_range(-8i32..9) as f64 / 4.0).collect()).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let ps = s.permuted(&perm).unwrap();
        let ph = FadingMatrix { gains: h.to_operator(&s).unwrap().permuted(&perm).unwrap().values().to_vec() };
        let lhs = air_shift(&ps, &x.permuted(&perm).unwrap(), &ph, &noise.permuted(&perm).unwrap()).unwrap();
        let rhs = air_shift(&s, &x, &h, &noise).unwrap().permuted(&perm).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn fading_stays_on_support(seed in any::<u64>(), n in 1usize..12, delta in 0.1f64..3.0) {
        let s = random_graph(n, 0.4, seed);
        for mode in [FadingMode::Replace, FadingMode::Multiply] {
            let model = ChannelModel::rayleigh(delta, 20.0, 1.0).unwrap().with_mode(mode);
            let h = sample_fading(&s, &model, &mut substream(seed, "h", &[]));
            let op = h.to_operator(&s).unwrap();
            prop_assert_eq!(op.edges(), s.edges());
            prop_assert!(h.gains.iter().all(|&g| g >= 0.0));
        }
    }
}
