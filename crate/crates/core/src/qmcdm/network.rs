//! Forward graph of the quantum decision network.

use rayon::prelude::*;

use crate::autodiff::{Graph, Var};
use crate::error::{shape_err, Error, Result};
use crate::fuzzify::DegreeMaps;
use crate::hsi::{DegreeMap, Hsi};
use crate::quantum::{circuit_gradient, encoding_angle, readout_probability, sigmoid, ANGLES, QUBITS};

use super::params::{slot, NetworkParams, DEEP_DIM};

/// Negative slope of every LeakyReLU in the network.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Trainable Gaussian MFs applied to a degree map and its complement, stacked
/// with the hesitancy logits and normalised by a channel softmax.
/// Without `tokens` the stack has two channels.
pub fn deep_fuzzify(
    g: &mut Graph,
    f: Var,
    tokens: Option<Var>,
    degree_mf: (Var, Var),
    complement_mf: (Var, Var),
) -> Result<Var> {
    let anomaly = g.gaussian_mf(f, degree_mf.0, degree_mf.1)?;
    let comp = g.one_minus(f);
    let background = g.gaussian_mf(comp, complement_mf.0, complement_mf.1)?;
    let stacked = match tokens {
        Some(h) => {
            if g.shape(h) != g.shape(f) {
                return Err(shape_err(format!("{:?}", g.shape(f)), format!("{:?}", g.shape(h))));
            }
            g.concat_channels(&[anomaly, background, h])?
        }
        None => g.concat_channels(&[anomaly, background])?,
    };
    Ok(g.softmax_channels(stacked))
}

/// Algebraic-product matching of the soft rules: `(M S, M G, G S)`.
pub fn deep_match_soft(g: &mut Graph, tm: Var, tg: Var, ts: Var) -> Result<[Var; 3]> {
    Ok([g.hadamard(tm, ts)?, g.hadamard(tm, tg)?, g.hadamard(tg, ts)?])
}

/// `1 -> 4 -> 1` stack of 1x1 maps with LeakyReLU between and a sigmoid on top.
/// `conv` holds `[w1, b1, w2, b2]`.
pub fn conv_mf(g: &mut Graph, x: Var, conv: &[Var; 4]) -> Result<Var> {
    let h = g.channel_linear(x, conv[0], conv[1])?;
    let h = g.leaky_relu(h, LEAKY_SLOPE);
    let o = g.channel_linear(h, conv[2], conv[3])?;
    Ok(g.sigmoid(o))
}

/// Soft-rounded product of one shared conv MF applied to each input map.
pub fn deep_match_crisp(g: &mut Graph, maps: [Var; 3], conv: &[Var; 4]) -> Result<Var> {
    let a = conv_mf(g, maps[0], conv)?;
    let b = conv_mf(g, maps[1], conv)?;
    let c = conv_mf(g, maps[2], conv)?;
    let ab = g.hadamard(a, b)?;
    let abc = g.hadamard(ab, c)?;
    Ok(g.soft_round(abc))
}

fn project(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.channel_linear(x, w, b)?;
    Ok(g.leaky_relu(y, LEAKY_SLOPE))
}

/// Channel shuffling of the rule stacks into anomaly / background / hesitancy
/// groups, one projector per group, then the final projector to four channels.
/// `proj` holds `(w, b)` for A, B, H and the output projector. Two-channel
/// stacks (tokens ablated) contribute a zero hesitancy feature.
pub fn aggregate_features(
    g: &mut Graph,
    soft: &[Var; 3],
    all_match: Var,
    none_match: Var,
    proj: &[(Var, Var); 4],
) -> Result<Var> {
    let group = |g: &mut Graph, k: usize| -> Result<Var> {
        let parts = [
            g.select_channel(soft[0], k)?,
            g.select_channel(soft[1], k)?,
            g.select_channel(soft[2], k)?,
        ];
        g.concat_channels(&parts)
    };
    let anomaly = group(g, 0)?;
    let a = project(g, anomaly, proj[0].0, proj[0].1)?;
    let background = group(g, 1)?;
    let background = g.one_minus(background);
    let b = project(g, background, proj[1].0, proj[1].1)?;
    let h = if *g.shape(soft[0]).last().unwrap_or(&0) > 2 {
        let hes = group(g, 2)?;
        project(g, hes, proj[2].0, proj[2].1)?
    } else {
        let shape = g.shape(all_match).to_vec();
        let n = g.value(all_match).len();
        g.constant(&shape, vec![0.0; n])?
    };
    let stacked = g.concat_channels(&[a, b, h, all_match, none_match])?;
    project(g, stacked, proj[3].0, proj[3].1)
}

/// Per-band scale and bias, ReLU, then a 1x1 map to four channels.
/// `bsm` holds `[depth_w, depth_b, w, b]`.
pub fn band_select(g: &mut Graph, cube: Var, bsm: &[Var; 4]) -> Result<Var> {
    let gated = gated_bands(g, cube, bsm)?;
    g.channel_linear(gated, bsm[2], bsm[3])
}

fn gated_bands(g: &mut Graph, cube: Var, bsm: &[Var; 4]) -> Result<Var> {
    let d = g.depthwise_scale(cube, bsm[0], bsm[1])?;
    Ok(g.relu(d))
}

/// Mean `|activation|` of every band after the gating ReLU.
pub fn band_energy(h: &Hsi<f64>, params: &NetworkParams) -> Result<Vec<f64>> {
    check_params(h, params)?;
    let (scale, bias) = (&params.values[slot::BSM], &params.values[slot::BSM + 1]);
    let c = h.bands();
    let mut energy = vec![0.0; c];
    for px in h.data().chunks(c) {
        for b in 0..c {
            energy[b] += (scale[b] * px[b] + bias[b]).max(0.0);
        }
    }
    let n = h.pixels() as f64;
    Ok(energy.into_iter().map(|e| e / n).collect())
}

/// Circuit readout for every pixel of a `[h, w, 4]` feature stack. With
/// `with_grad` the circuit derivatives are computed and attached.
pub fn quantum_readout(g: &mut Graph, z: Var, angles: Var, scale: Var, offset: Var, with_grad: bool) -> Result<Var> {
    let zs = g.shape(z).to_vec();
    if zs.last() != Some(&QUBITS) {
        return Err(Error::Graph(format!("quantum readout needs {QUBITS} channels, got {zs:?}")));
    }
    if g.shape(angles) != [ANGLES] || g.shape(scale) != [1] || g.shape(offset) != [1] {
        return Err(Error::Graph("quantum readout: bad circuit parameter shapes".into()));
    }
    let mut ang = [0.0; ANGLES];
    ang.copy_from_slice(g.value(angles));
    let (sc, off) = (g.value(scale)[0], g.value(offset)[0]);
    let feats = g.value(z).to_vec();
    let pixels = feats.len() / QUBITS;
    let encode = |p: usize| -> [f64; QUBITS] { std::array::from_fn(|q| encoding_angle(feats[p * QUBITS + q])) };
    let mut out_shape = zs.clone();
    *out_shape.last_mut().expect("non-empty") = 1;

    if !with_grad {
        let out: Vec<f64> = (0..pixels)
            .into_par_iter()
            .map(|p| sigmoid(sc * (2.0 * readout_probability(&encode(p), &ang) - 1.0) + off))
            .collect();
        return g.custom(&[z, angles, scale, offset], &out_shape, out, Box::new(|_| vec![]));
    }

    let grads: Vec<_> = (0..pixels).into_par_iter().map(|p| circuit_gradient(&encode(p), &ang)).collect();
    let out: Vec<f64> = grads.iter().map(|cg| sigmoid(sc * (2.0 * cg.probability - 1.0) + off)).collect();
    let outputs = out.clone();
    let backward = Box::new(move |up: &[f64]| {
        let mut gz = vec![0.0; pixels * QUBITS];
        let mut ga = vec![0.0; ANGLES];
        let (mut gs, mut go) = (0.0, 0.0);
        for p in 0..pixels {
            let o = outputs[p];
            let cg = &grads[p];
            let d_pre = up[p] * o * (1.0 - o);
            let d_prob = d_pre * 2.0 * sc;
            gs += d_pre * (2.0 * cg.probability - 1.0);
            go += d_pre;
            for k in 0..ANGLES {
                ga[k] += d_prob * cg.d_angles[k];
            }
            for q in 0..QUBITS {
                let s = sigmoid(feats[p * QUBITS + q]);
                gz[p * QUBITS + q] = d_prob * cg.d_encoding[q] * std::f64::consts::PI * s * (1.0 - s);
            }
        }
        vec![gz, ga, vec![gs], vec![go]]
    });
    g.custom(&[z, angles, scale, offset], &out_shape, out, backward)
}

/// `Q (.) T4 (.) (1 - T5)` with `Q` the circuit readout of `features + bands`.
pub fn compose_qfd(g: &mut Graph, features: Var, bands: Var, circuit: [Var; 3], all_match: Var, none_match: Var, with_grad: bool) -> Result<Var> {
    let z = g.add(features, bands)?;
    let q = quantum_readout(g, z, circuit[0], circuit[1], circuit[2], with_grad)?;
    let keep = g.one_minus(none_match);
    let qa = g.hadamard(q, all_match)?;
    g.hadamard(qa, keep)
}

/// Graph handles of one forward pass.
pub struct ForwardPass {
    pub graph: Graph,
    /// One leaf per parameter tensor, in [`slot`] order.
    pub params: Vec<Var>,
    pub stacks: [Var; 3],
    pub all_match: Var,
    pub none_match: Var,
    pub features: Var,
    pub bands: Var,
    pub d_q: Var,
}

impl ForwardPass {
    pub fn detection(&self) -> Result<DegreeMap<f64>> {
        let s = self.graph.shape(self.d_q);
        DegreeMap::clamped(s[0], s[1], self.graph.value(self.d_q).to_vec())
    }
}

fn check_params(h: &Hsi<f64>, params: &NetworkParams) -> Result<()> {
    if (params.height, params.width, params.bands) != (h.height(), h.width(), h.bands()) {
        return Err(shape_err(
            format!("{}x{}x{}", h.height(), h.width(), h.bands()),
            format!("parameters for {}x{}x{}", params.height, params.width, params.bands),
        ));
    }
    Ok(())
}

/// Builds the whole network for one cube and its membership maps.
pub fn forward(h: &Hsi<f64>, maps: &DegreeMaps<f64>, params: &NetworkParams, use_tokens: bool, with_grad: bool) -> Result<ForwardPass> {
    check_params(h, params)?;
    for m in maps.as_array() {
        if (m.height(), m.width()) != (h.height(), h.width()) {
            return Err(shape_err(
                format!("{}x{}", h.height(), h.width()),
                format!("{}x{}", m.height(), m.width()),
            ));
        }
    }
    let (height, width) = (h.height(), h.width());
    let mut g = Graph::new();
    let vars: Vec<Var> = params
        .shapes
        .iter()
        .zip(&params.values)
        .map(|(s, v)| g.param(s, v.clone()))
        .collect::<Result<_>>()?;
    let mut f = [vars[0]; 3];
    for (k, m) in maps.as_array().into_iter().enumerate() {
        f[k] = g.constant(&[height, width, 1], m.values().to_vec())?;
    }
    let mut stacks = [vars[0]; 3];
    for k in 0..3 {
        let mf = |i: usize| (vars[slot::MF_CENTER + i], vars[slot::MF_WIDTH + i]);
        let tokens = use_tokens.then(|| vars[slot::TOKENS + k]);
        stacks[k] = deep_fuzzify(&mut g, f[k], tokens, mf(2 * k), mf(2 * k + 1))?;
    }
    let soft = deep_match_soft(&mut g, stacks[0], stacks[1], stacks[2])?;
    let conv = |base: usize| -> [Var; 4] { std::array::from_fn(|i| vars[base + i]) };
    let all_match = deep_match_crisp(&mut g, f, &conv(slot::CONV_ALL))?;
    let comp = [g.one_minus(f[0]), g.one_minus(f[1]), g.one_minus(f[2])];
    let none_match = deep_match_crisp(&mut g, comp, &conv(slot::CONV_NONE))?;
    let proj = [slot::PROJ_A, slot::PROJ_B, slot::PROJ_H, slot::PROJ_OUT].map(|s| (vars[s], vars[s + 1]));
    let features = aggregate_features(&mut g, &soft, all_match, none_match, &proj)?;
    debug_assert_eq!(g.shape(features).last(), Some(&DEEP_DIM));
    let cube = g.constant(&[height, width, h.bands()], h.data().to_vec())?;
    let bands = band_select(&mut g, cube, &conv(slot::BSM))?;
    let circuit = [vars[slot::ANGLES], vars[slot::SCALE], vars[slot::OFFSET]];
    let d_q = compose_qfd(&mut g, features, bands, circuit, all_match, none_match, with_grad)?;
    Ok(ForwardPass {
        graph: g,
        params: vars,
        stacks,
        all_match,
        none_match,
        features,
        bands,
        d_q,
    })
}
