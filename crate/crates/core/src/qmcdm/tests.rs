use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::classical::{classical_from_maps, ClassicalConfig};
use crate::eval::roc_auc;
use crate::fuzzify::{fuzzify, FuzzifyConfig};
use crate::quantum::{run_circuit, CircuitParams};
use crate::synth::{gen_scene, SceneSpec};

struct Case {
    h: Hsi<f64>,
    maps: DegreeMaps<f64>,
    d_c: DegreeMap<f64>,
    reference: crate::hsi::Mask,
}

fn small_case(seed: u64, size: usize, bands: usize) -> Case {
    let spec = SceneSpec {
        height: size,
        width: size,
        bands,
        n_endmembers: 3,
        n_anomalies: 2,
        anomaly_size: 2,
        seed,
        ..SceneSpec::default()
    };
    let scene = gen_scene::<f64>(&spec).unwrap();
    let maps = fuzzify(&scene.cube, &FuzzifyConfig::default()).unwrap();
    let d_c = classical_from_maps(&maps, &ClassicalConfig::default()).unwrap().detection;
    Case {
        h: scene.cube,
        maps,
        d_c,
        reference: scene.reference,
    }
}

fn scalar(g: &mut Graph, v: f64) -> Var {
    g.param(&[1], vec![v]).unwrap()
}

fn map_var(g: &mut Graph, h: usize, w: usize, v: Vec<f64>) -> Var {
    g.constant(&[h, w, 1], v).unwrap()
}

fn channel_values(g: &Graph, v: Var, k: usize) -> Vec<f64> {
    let c = *g.shape(v).last().unwrap();
    g.value(v).iter().skip(k).step_by(c).copied().collect()
}

#[test]
fn fuzzify_equal_gaussians_and_zero_tokens_give_thirds() {
    let mut g = Graph::new();
    let f = map_var(&mut g, 1, 2, vec![0.5, 0.5]);
    let tokens = g.param(&[1, 2, 1], vec![0.0, 0.0]).unwrap();
    // both Gaussians underflow to exactly 0, matching the zero token logit
    let (m, s) = (scalar(&mut g, -50.0), scalar(&mut g, 0.05));
    let t = deep_fuzzify(&mut g, f, Some(tokens), (m, s), (m, s)).unwrap();
    for v in g.value(t) {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn fuzzify_saturates_on_dominant_logit() {
    let mut g = Graph::new();
    let f = map_var(&mut g, 1, 1, vec![0.9]);
    let tokens = g.param(&[1, 1, 1], vec![-60.0]).unwrap();
    let (m, s) = (scalar(&mut g, 0.9), scalar(&mut g, 0.05));
    let t = deep_fuzzify(&mut g, f, Some(tokens), (m, s), (m, s)).unwrap();
    // anomaly logit 1, background exp(-128) ~ 0, hesitancy -60
    let v = g.value(t);
    let e = 1f64.exp();
    let want = e / (e + (-128f64).exp().exp() + (-60f64).exp());
    assert!((v[0] - want).abs() < 1e-12);
    let mut g = Graph::new();
    let x = g.param(&[1, 1, 3], vec![50.0, 0.0, 0.0]).unwrap();
    let sm = g.softmax_channels(x);
    assert!(g.value(sm)[0] >= 1.0 - 1e-15);
}

#[test]
fn fuzzify_channels_sum_to_one_against_direct_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (h, w) = (3, 4);
        let fv: Vec<f64> = (0..h * w).map(|_| rng.gen()).collect();
        let tv: Vec<f64> = (0..h * w).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (ma, sa, mb, sb) = (rng.gen(), rng.gen_range(0.05..0.6), rng.gen(), rng.gen_range(0.05..0.6));
        let mut g = Graph::new();
        let f = map_var(&mut g, h, w, fv.clone());
        let tok = g.param(&[h, w, 1], tv.clone()).unwrap();
        let mfa = (scalar(&mut g, ma), scalar(&mut g, sa));
        let mfb = (scalar(&mut g, mb), scalar(&mut g, sb));
        let t = deep_fuzzify(&mut g, f, Some(tok), mfa, mfb).unwrap();
        let out = g.value(t);
        for p in 0..h * w {
            let logits = [
                (-(fv[p] - ma).powi(2) / (2.0 * sa * sa)).exp(),
                (-(1.0 - fv[p] - mb).powi(2) / (2.0 * sb * sb)).exp(),
                tv[p],
            ];
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            let sum: f64 = out[p * 3..p * 3 + 3].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for k in 0..3 {
                assert!((out[p * 3 + k] - logits[k].exp() / z).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn fuzzify_rejects_token_shape_mismatch() {
    let mut g = Graph::new();
    let f = map_var(&mut g, 2, 2, vec![0.1; 4]);
    let tok = g.param(&[2, 1, 1], vec![0.0; 2]).unwrap();
    let mf = (scalar(&mut g, 0.5), scalar(&mut g, 0.3));
    assert!(deep_fuzzify(&mut g, f, Some(tok), mf, mf).is_err());
}

#[test]
fn large_tokens_attenuate_anomaly_and_background_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (h, w) = (5, 5);
    let fv: Vec<f64> = (0..h * w).map(|_| rng.gen()).collect();
    let run = |token: f64| {
        let mut g = Graph::new();
        let f = map_var(&mut g, h, w, fv.clone());
        let tok = g.constant(&[h, w, 1], vec![token; h * w]).unwrap();
        let mfa = (scalar(&mut g, 0.7), scalar(&mut g, 0.2));
        let mfb = (scalar(&mut g, 0.4), scalar(&mut g, 0.3));
        let t = deep_fuzzify(&mut g, f, Some(tok), mfa, mfb).unwrap();
        (channel_values(&g, t, 0), channel_values(&g, t, 1))
    };
    let (a0, b0) = run(0.0);
    let (a5, b5) = run(5.0);
    for p in 0..h * w {
        assert!(a5[p] < a0[p], "pixel {p}");
        assert!(b5[p] < b0[p], "pixel {p}");
    }
}

#[test]
fn soft_matching_examples() {
    let mut g = Graph::new();
    let t = g.constant(&[1, 1, 3], vec![0.5, 0.3, 0.2]).unwrap();
    let ones = g.constant(&[1, 1, 3], vec![1.0; 3]).unwrap();
    let [r1, r2, r3] = deep_match_soft(&mut g, t, ones, t).unwrap();
    for (v, want) in g.value(r1).iter().zip([0.25, 0.09, 0.04]) {
        assert!((v - want).abs() < 1e-15);
    }
    for v in [r2, r3] {
        assert_eq!(g.value(v), g.value(t));
    }
    let sum: f64 = g.value(r1).iter().sum();
    assert!(sum <= 1.0);
}

#[test]
fn soft_matching_sum_at_most_one_for_random_stacks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut g = Graph::new();
    let mut stack = |g: &mut Graph| {
        let logits: Vec<f64> = (0..48).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let x = g.constant(&[4, 4, 3], logits).unwrap();
        g.softmax_channels(x)
    };
    let (m, gg, s) = (stack(&mut g), stack(&mut g), stack(&mut g));
    for r in deep_match_soft(&mut g, m, gg, s).unwrap() {
        for px in g.value(r).chunks(3) {
            assert!(px.iter().sum::<f64>() <= 1.0 + 1e-15);
        }
    }
    let bad = g.constant(&[4, 3, 3], vec![0.1; 36]).unwrap();
    assert!(deep_match_soft(&mut g, m, bad, s).is_err());
}

/// Conv MF whose output is `sigmoid(bias)` regardless of input.
fn constant_conv(g: &mut Graph, out_logit: f64) -> [Var; 4] {
    [
        g.param(&[4, 1], vec![0.0; 4]).unwrap(),
        g.param(&[4], vec![0.0; 4]).unwrap(),
        g.param(&[1, 4], vec![0.0; 4]).unwrap(),
        g.param(&[1], vec![out_logit]).unwrap(),
    ]
}

#[test]
fn crisp_matching_closed_forms() {
    let mut g = Graph::new();
    let maps = [0.2, 0.6, 0.9].map(|v| map_var(&mut g, 2, 2, vec![v; 4]));
    let half = constant_conv(&mut g, 0.0);
    let r4 = deep_match_crisp(&mut g, maps, &half).unwrap();
    let want = 1.0 / (1.0 + (-10.0f64 * (0.125 - 0.5)).exp());
    assert!((want - 0.0229).abs() < 1e-4);
    for v in g.value(r4) {
        assert!((v - want).abs() < 1e-15);
    }
    let off = constant_conv(&mut g, -800.0);
    let r = deep_match_crisp(&mut g, maps, &off).unwrap();
    let want0 = 1.0 / (1.0 + 5.0f64.exp());
    assert!((want0 - 0.0067).abs() < 1e-4);
    for v in g.value(r) {
        assert!((v - want0).abs() < 1e-15);
    }
}

#[test]
fn crisp_matching_symmetric_under_shared_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut g = Graph::new();
    let maps: Vec<Var> = (0..3).map(|_| {
        let v: Vec<f64> = (0..9).map(|_| rng.gen()).collect();
        map_var(&mut g, 3, 3, v)
    }).collect();
    let conv = [
        g.param(&[4, 1], (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        g.param(&[4], (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        g.param(&[1, 4], (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap(),
        g.param(&[1], vec![0.3]).unwrap(),
    ];
    let a = deep_match_crisp(&mut g, [maps[0], maps[1], maps[2]], &conv).unwrap();
    let b = deep_match_crisp(&mut g, [maps[2], maps[0], maps[1]], &conv).unwrap();
    for (x, y) in g.value(a).iter().zip(g.value(b)) {
        assert!((x - y).abs() < 1e-15);
        assert!((0.0..=1.0).contains(x));
    }
}

fn projectors(g: &mut Graph, fill: impl Fn(usize) -> f64) -> [(Var, Var); 4] {
    let mk = |g: &mut Graph, out: usize, inp: usize| {
        (
            g.param(&[out, inp], (0..out * inp).map(&fill).collect()).unwrap(),
            g.param(&[out], vec![0.0; out]).unwrap(),
        )
    };
    [mk(g, 1, 3), mk(g, 1, 3), mk(g, 1, 3), mk(g, 4, 5)]
}

#[test]
fn aggregation_with_zero_projectors_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut g = Graph::new();
    let soft: [Var; 3] = std::array::from_fn(|_| g.constant(&[2, 3, 3], (0..18).map(|_| rng.gen()).collect()).unwrap());
    let t4 = g.constant(&[2, 3, 1], vec![0.7; 6]).unwrap();
    let t5 = g.constant(&[2, 3, 1], vec![0.1; 6]).unwrap();
    let proj = projectors(&mut g, |_| 0.0);
    let a = aggregate_features(&mut g, &soft, t4, t5, &proj).unwrap();
    assert_eq!(g.shape(a), &[2, 3, 4]);
    assert!(g.value(a).iter().all(|&v| v == 0.0));
}

#[test]
fn aggregation_leaky_slope_on_single_input() {
    let mut g = Graph::new();
    // anomaly channels (0.5, 0, 0); background channels 1 so B sees 0; no hesitancy
    let soft0 = g.constant(&[1, 2, 3], vec![0.5, 1.0, 0.0, 0.5, 1.0, 0.0]).unwrap();
    let rest = g.constant(&[1, 2, 3], vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    let zero = g.constant(&[1, 2, 1], vec![0.0; 2]).unwrap();
    let mut proj = projectors(&mut g, |_| 0.0);
    // A = leaky(w * x) with w = +2 on pixel values, output projector picks A into channel 0
    proj[0].0 = g.param(&[1, 3], vec![2.0, 0.0, 0.0]).unwrap();
    let mut out_w = vec![0.0; 20];
    out_w[0] = 1.0;
    out_w[5] = -1.0;
    proj[3].0 = g.param(&[4, 5], out_w).unwrap();
    let a = aggregate_features(&mut g, &[soft0, rest, rest], zero, zero, &proj).unwrap();
    let v = g.value(a);
    assert!((v[0] - 1.0).abs() < 1e-15);
    assert!((v[1] + 0.2).abs() < 1e-15);
    assert_eq!(&v[2..4], &[0.0, 0.0]);
}

#[test]
fn band_selection_examples() {
    let (h, w, c) = (2, 2, 3);
    let cube_vals: Vec<f64> = (0..h * w * c).map(|i| 0.1 + i as f64 * 0.05).collect();
    let mut g = Graph::new();
    let cube = g.constant(&[h, w, c], cube_vals.clone()).unwrap();
    let neg = [
        g.param(&[c], vec![-1.0; c]).unwrap(),
        g.param(&[c], vec![0.0; c]).unwrap(),
        g.param(&[4, c], vec![0.3; 4 * c]).unwrap(),
        g.param(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
    ];
    let x = band_select(&mut g, cube, &neg).unwrap();
    for px in g.value(x).chunks(4) {
        assert_eq!(px, &[0.1, 0.2, 0.3, 0.4]);
    }
    let mut sel = vec![0.0; 4 * c];
    sel[2 * c + 1] = 1.0;
    let one = [
        g.param(&[c], vec![0.0, 1.0, 0.0]).unwrap(),
        g.param(&[c], vec![0.0; c]).unwrap(),
        g.param(&[4, c], sel).unwrap(),
        g.param(&[4], vec![0.0; 4]).unwrap(),
    ];
    let x = band_select(&mut g, cube, &one).unwrap();
    for p in 0..h * w {
        assert_eq!(g.value(x)[p * 4 + 2], cube_vals[p * c + 1]);
    }
    let short = [one[0], one[1], g.param(&[4, 2], vec![0.0; 8]).unwrap(), one[3]];
    assert!(band_select(&mut g, cube, &short).is_err());
}

#[test]
fn band_energy_reports_zero_for_suppressed_bands() {
    let h = Hsi::from_fn(3, 3, 4, |r, c, b| 0.2 + 0.1 * (r + c + b) as f64).unwrap();
    let mut p = NetworkParams::init(3, 3, 4, 1).unwrap();
    p.values[slot::BSM] = vec![1.0, -1.0, 2.0, -0.5];
    p.values[slot::BSM + 1] = vec![0.0, 0.0, 0.1, 0.0];
    let e = band_energy(&h, &p).unwrap();
    assert_eq!(e[1], 0.0);
    assert_eq!(e[3], 0.0);
    let mean_b0: f64 = (0..9).map(|i| h.pixel(i)[0]).sum::<f64>() / 9.0;
    assert!((e[0] - mean_b0).abs() < 1e-15);
    // band 2 is band 0 shifted by 0.2
    assert!((e[2] - (2.0 * (mean_b0 + 0.2) + 0.1)).abs() < 1e-12);
    let wrong = Hsi::from_fn(3, 3, 5, |_, _, _| 0.5).unwrap();
    assert!(band_energy(&wrong, &p).is_err());
}

fn random_qfd_inputs(g: &mut Graph, rng: &mut ChaCha8Rng, h: usize, w: usize) -> (Var, Var, [Var; 3], CircuitParams<f64>) {
    let feats = g.constant(&[h, w, 4], (0..h * w * 4).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    let bands = g.constant(&[h, w, 4], (0..h * w * 4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let cp = CircuitParams {
        angles: std::array::from_fn(|_| rng.gen_range(-3.0..3.0)),
        scale: rng.gen_range(0.5..2.0),
        offset: rng.gen_range(-0.5..0.5),
    };
    let circuit = [
        g.param(&[12], cp.angles.to_vec()).unwrap(),
        g.param(&[1], vec![cp.scale]).unwrap(),
        g.param(&[1], vec![cp.offset]).unwrap(),
    ];
    (feats, bands, circuit, cp)
}

#[test]
fn qfd_annihilation_and_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = Graph::new();
    let (h, w) = (3, 3);
    let (f, b, c, _) = random_qfd_inputs(&mut g, &mut rng, h, w);
    let ones = map_var(&mut g, h, w, vec![1.0; 9]);
    let zeros = map_var(&mut g, h, w, vec![0.0; 9]);
    let dead = compose_qfd(&mut g, f, b, c, ones, ones, false).unwrap();
    assert!(g.value(dead).iter().all(|&v| v == 0.0));
    let q = compose_qfd(&mut g, f, b, c, ones, zeros, false).unwrap();
    let z = g.add(f, b).unwrap();
    let raw = quantum_readout(&mut g, z, c[0], c[1], c[2], false).unwrap();
    assert_eq!(g.value(q), g.value(raw));
}

#[test]
fn qfd_batched_matches_per_pixel_pipeline() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (h, w) = (4, 5);
    let mut g = Graph::new();
    let (f, b, c, cp) = random_qfd_inputs(&mut g, &mut rng, h, w);
    let t4v: Vec<f64> = (0..h * w).map(|_| rng.gen()).collect();
    let t5v: Vec<f64> = (0..h * w).map(|_| rng.gen()).collect();
    let t4 = map_var(&mut g, h, w, t4v.clone());
    let t5 = map_var(&mut g, h, w, t5v.clone());
    for with_grad in [false, true] {
        let d = compose_qfd(&mut g, f, b, c, t4, t5, with_grad).unwrap();
        for p in 0..h * w {
            let z: [f64; 4] = std::array::from_fn(|q| g.value(f)[p * 4 + q] + g.value(b)[p * 4 + q]);
            let want = run_circuit(&z, &cp) * t4v[p] * (1.0 - t5v[p]);
            assert!((g.value(d)[p] - want).abs() < 1e-12);
        }
    }
    let bad = map_var(&mut g, h, w + 1, vec![0.5; h * (w + 1)]);
    assert!(compose_qfd(&mut g, f, b, c, bad, t5, false).is_err());
}

#[test]
fn loss_of_perfect_fit_and_half() {
    let case = small_case(1, 12, 6);
    let labels = pseudo_labels(&case.d_c, 0.1, 0.1).unwrap();
    let cfg = TrainConfig::default();
    let (h, w) = (case.d_c.height(), case.d_c.width());
    // labels on the mask, constant 0.5 elsewhere
    let fit: Vec<f64> = labels.target.iter().zip(&labels.mask).map(|(&t, &m)| if m { t } else { 0.5 }).collect();
    let mut g = Graph::new();
    let v = g.constant(&[h, w, 1], fit).unwrap();
    let bce = g.bce_masked(v, &labels.target, &labels.mask).unwrap();
    assert!(g.value(bce)[0] <= 1e-6);
    let tv = g.tv_penalty(v).unwrap();
    assert!(g.value(tv)[0] >= 0.0);

    let half = DegreeMap::filled(h, w, 0.5).unwrap();
    let loss = compute_loss(&half, &case.d_c, &cfg).unwrap();
    assert!((loss - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn pseudo_labels_pick_extremes() {
    let v: Vec<f64> = vec![0.0, 0.05, 0.1, 0.12, 0.15, 0.2, 0.22, 0.25, 0.9, 0.95];
    let d = DegreeMap::new(2, 5, v).unwrap();
    let l = pseudo_labels(&d, 0.5, 0.1).unwrap();
    // binarized: two ones, eight zeros -> top 1 labeled 1, bottom 1 labeled 0
    assert_eq!(l.count(), 2);
    assert!(l.mask[9] && l.target[9] == 1.0);
    assert!(l.mask[0] && l.target[0] == 0.0);
    let flat = DegreeMap::filled(2, 2, 0.3).unwrap();
    assert!(matches!(pseudo_labels(&flat, 0.1, 0.1), Err(Error::DegenerateSupervision(_))));
    assert!(matches!(
        compute_loss(&flat, &flat, &TrainConfig::default()),
        Err(Error::DegenerateSupervision(_))
    ));
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    for bad in [
        TrainConfig { epochs: 0, ..Default::default() },
        TrainConfig { lr: 0.0, ..Default::default() },
        TrainConfig { lambda_tv: -1.0, ..Default::default() },
        TrainConfig { e3: 0.0, ..Default::default() },
        TrainConfig { e4: 1.5, ..Default::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Argument(_))));
    }
}

#[test]
fn fusion_examples() {
    let d_c = DegreeMap::new(1, 3, vec![0.2f64, 0.0, 0.9]).unwrap();
    let ones = DegreeMap::filled(1, 3, 1.0).unwrap();
    assert_eq!(fuse_detections(&d_c, &ones).unwrap(), d_c);
    let q = DegreeMap::new(1, 3, vec![0.0, 0.8, 0.5]).unwrap();
    let d = fuse_detections(&d_c, &q).unwrap();
    assert_eq!(d.values()[0], 0.0);
    assert_eq!(d.values()[1], 0.0);
    assert!((d.values()[2] - 0.45).abs() < 1e-15);
    assert!(fuse_detections(&d_c, &DegreeMap::filled(3, 1, 1.0).unwrap()).is_err());
}

#[test]
fn parameter_budget_below_two_thousand() {
    for bands in [6, 30, 50, 224] {
        let p = NetworkParams::init(4, 4, bands, 0).unwrap();
        assert!(p.count_without_tokens() < 2000, "{bands} bands");
        assert_eq!(p.values[slot::ANGLES].len(), 12);
    }
}

fn flat_params(p: &NetworkParams) -> Vec<(usize, usize)> {
    p.values.iter().enumerate().flat_map(|(t, v)| (0..v.len()).map(move |i| (t, i))).collect()
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let case = small_case(2, 8, 6);
    let cfg = TrainConfig::default();
    let labels = pseudo_labels(&case.d_c, cfg.e3, cfg.e4).unwrap();
    let mut params = NetworkParams::init(8, 8, 6, 9).unwrap();
    // move off the zero-token plateau and the initial symmetric point
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..3 {
        for v in params.values[slot::TOKENS + k].iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    for v in params.values[slot::ANGLES].iter_mut() {
        *v = rng.gen_range(-1.5..1.5);
    }
    let (_, grads) = loss_and_gradients(&case.h, &case.maps, &params, &labels, &cfg).unwrap();

    let all = flat_params(&params);
    let mut picks: Vec<(usize, usize)> = Vec::new();
    while picks.len() < 4 {
        let i = rng.gen_range(0..12);
        if !picks.contains(&(slot::ANGLES, i)) {
            picks.push((slot::ANGLES, i));
        }
    }
    while picks.len() < 8 {
        let t = slot::TOKENS + rng.gen_range(0..3);
        let i = rng.gen_range(0..64);
        if !picks.contains(&(t, i)) {
            picks.push((t, i));
        }
    }
    while picks.len() < 50 {
        let pick = all[rng.gen_range(0..all.len())];
        if !picks.contains(&pick) {
            picks.push(pick);
        }
    }
    let loss_at = |p: &NetworkParams| {
        let fp = forward(&case.h, &case.maps, p, true, false).unwrap();
        let mut fp = fp;
        let l = loss_node(&mut fp.graph, fp.d_q, &labels, cfg.lambda_tv).unwrap();
        fp.graph.value(l)[0]
    };
    let step = 1e-6;
    let mut worst = 0.0f64;
    for &(t, i) in &picks {
        let mut plus = params.clone();
        plus.values[t][i] += step;
        let mut minus = params.clone();
        minus.values[t][i] -= step;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
        let analytic = grads[t][i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(rel);
        assert!(rel < 1e-3, "tensor {t} index {i}: analytic {analytic} numeric {numeric}");
    }
    assert!(worst < 1e-3);
}

#[test]
fn softmax_stacks_stay_normalised_during_training() {
    let case = small_case(3, 10, 6);
    let cfg = TrainConfig { epochs: 3, steps_per_epoch: 2, seed: 4, ..Default::default() };
    let labels = pseudo_labels(&case.d_c, cfg.e3, cfg.e4).unwrap();
    let mut params = NetworkParams::init(10, 10, 6, cfg.seed).unwrap();
    let mut adam = AdamState::with_lr(&params.sizes(), cfg.lr);
    for _ in 0..cfg.epochs * cfg.steps_per_epoch {
        let fp = forward(&case.h, &case.maps, &params, true, false).unwrap();
        for s in fp.stacks {
            for px in fp.graph.value(s).chunks(3) {
                assert!((px.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let (_, grads) = loss_and_gradients(&case.h, &case.maps, &params, &labels, &cfg).unwrap();
        adam_step(&mut params.values, &grads, &mut adam).unwrap();
        params.clamp_widths();
        assert!(params.values[slot::MF_WIDTH..slot::MF_WIDTH + 6].iter().all(|s| s[0] >= MIN_MF_WIDTH));
    }
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let case = small_case(5, 16, 8);
    let cfg = TrainConfig { seed: 3, ..Default::default() };
    let a = train(&case.h, &case.maps, &case.d_c, &cfg).unwrap();
    let b = train(&case.h, &case.maps, &case.d_c, &cfg).unwrap();
    assert_eq!(a.detection, b.detection);
    assert_eq!(a.loss_trace, b.loss_trace);
    assert_eq!(a.loss_trace.len(), cfg.epochs * cfg.steps_per_epoch + 1);
    assert!(a.loss_trace.last().unwrap() < a.loss_trace.first().unwrap());
    assert!(a.detection.values().iter().all(|v| (0.0..=1.0).contains(v)));
    let auc = roc_auc(&a.detection, &case.reference).unwrap().auc;
    assert!(auc > 0.9, "auc {auc}");
    let again = infer(&case.h, &case.maps, &a.params, true).unwrap();
    assert_eq!(again, a.detection);
}

#[test]
fn tv_weight_smooths_the_detection_map() {
    let case = small_case(7, 16, 8);
    let tv_of = |lambda_tv: f64| {
        let cfg = TrainConfig { lambda_tv, seed: 1, ..Default::default() };
        let out = train(&case.h, &case.maps, &case.d_c, &cfg).unwrap();
        let mut g = Graph::new();
        let v = g.constant(&[16, 16, 1], out.detection.into_values()).unwrap();
        let t = g.tv_penalty(v).unwrap();
        g.value(t)[0]
    };
    let (rough, smooth) = (tv_of(0.0), tv_of(5e-5));
    assert!(smooth < rough, "tv {smooth} vs {rough}");
}

#[test]
fn ablated_tokens_train_on_two_channel_stacks() {
    let case = small_case(5, 12, 6);
    let cfg = TrainConfig { epochs: 2, use_tokens: false, ..Default::default() };
    let out = train(&case.h, &case.maps, &case.d_c, &cfg).unwrap();
    assert!(out.params.values[slot::TOKENS].iter().all(|&t| t == 0.0));
    let fp = forward(&case.h, &case.maps, &out.params, false, false).unwrap();
    assert_eq!(fp.graph.shape(fp.stacks[0]), &[12, 12, 2]);
}

#[test]
fn saved_parameters_reproduce_inference() {
    let case = small_case(5, 12, 6);
    let cfg = TrainConfig { epochs: 2, ..Default::default() };
    let out = train(&case.h, &case.maps, &case.d_c, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    out.params.save(&path).unwrap();
    let loaded = NetworkParams::load(&path).unwrap();
    assert_eq!(infer(&case.h, &case.maps, &loaded, true).unwrap(), out.detection);
}
