//! Self-supervised quantum-fuzzy decision network: deep fuzzification with
//! hesitancy tokens, deep rule matching, feature aggregation, band selection
//! and a 4-qubit circuit as defuzzifier.

pub mod network;
pub mod params;
#[cfg(test)]
mod tests;

pub use network::{
    aggregate_features, band_energy, band_select, compose_qfd, conv_mf, deep_fuzzify, deep_match_crisp, deep_match_soft,
    forward, quantum_readout, ForwardPass, LEAKY_SLOPE,
};
pub use params::{slot, NetworkParams, DEEP_DIM, MIN_MF_WIDTH};

use std::cmp::Ordering;

use crate::autodiff::{adam_step, AdamState, Graph, Var, DEFAULT_LEARNING_RATE};
use crate::classical::kmeans_binarize;
use crate::error::{Error, Result};
use crate::fuzzify::DegreeMaps;
use crate::hsi::{DegreeMap, Hsi};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Adam updates per epoch; one epoch is one pass over the whole image.
    pub steps_per_epoch: usize,
    pub lr: f64,
    pub lambda_tv: f64,
    pub e3: f64,
    pub e4: f64,
    pub seed: u64,
    pub use_tokens: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            steps_per_epoch: DEFAULT_STEPS_PER_EPOCH,
            lr: DEFAULT_LEARNING_RATE,
            lambda_tv: 5e-5,
            e3: 0.1,
            e4: 0.1,
            seed: 0,
            use_tokens: true,
        }
    }
}

pub const DEFAULT_STEPS_PER_EPOCH: usize = 5;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Argument("epochs and steps per epoch must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.lambda_tv >= 0.0) {
            return Err(Error::Argument(format!(
                "learning rate must be positive and TV weight nonnegative (lr {}, lambda {})",
                self.lr, self.lambda_tv
            )));
        }
        for (name, e) in [("e3", self.e3), ("e4", self.e4)] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1], got {e}")));
            }
        }
        Ok(())
    }
}

/// Pseudo labels drawn from the classical detection map.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    pub target: Vec<f64>,
    pub mask: Vec<bool>,
}

impl PseudoLabels {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Binarizes `d_c`, then labels the `ceil(e3 * ones)` highest-valued pixels 1
/// and the `ceil(e4 * zeros)` lowest-valued pixels 0.
pub fn pseudo_labels<T: Scalar>(d_c: &DegreeMap<T>, e3: f64, e4: f64) -> Result<PseudoLabels> {
    let binary = kmeans_binarize(d_c);
    let ones = binary.count_ones();
    let zeros = binary.len() - ones;
    if ones == 0 || zeros == 0 {
        return Err(Error::DegenerateSupervision(format!(
            "binarized classical map has {ones} anomaly and {zeros} background pixels; both classes are needed"
        )));
    }
    let v = d_c.values();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let k1 = ((e3 * ones as f64).ceil() as usize).min(v.len());
    let k0 = ((e4 * zeros as f64).ceil() as usize).min(v.len());
    let mut target = vec![0.0; v.len()];
    let mut mask = vec![false; v.len()];
    for &i in order.iter().take(k0) {
        mask[i] = true;
    }
    for &i in order.iter().rev().take(k1) {
        mask[i] = true;
        target[i] = 1.0;
    }
    Ok(PseudoLabels { target, mask })
}

/// Masked BCE against the pseudo labels plus `lambda` times the TV of `d_q`.
pub fn loss_node(g: &mut Graph, d_q: Var, labels: &PseudoLabels, lambda_tv: f64) -> Result<Var> {
    let bce = g.bce_masked(d_q, &labels.target, &labels.mask)?;
    let tv = g.tv_penalty(d_q)?;
    let tv = g.scalar_mul(tv, lambda_tv);
    g.add(bce, tv)
}

/// Loss value of a finished detection map.
pub fn compute_loss(d_q: &DegreeMap<f64>, d_c: &DegreeMap<f64>, cfg: &TrainConfig) -> Result<f64> {
    d_q.ensure_same_shape(d_c)?;
    let labels = pseudo_labels(d_c, cfg.e3, cfg.e4)?;
    let mut g = Graph::new();
    let v = g.constant(&[d_q.height(), d_q.width(), 1], d_q.values().to_vec())?;
    let loss = loss_node(&mut g, v, &labels, cfg.lambda_tv)?;
    Ok(g.value(loss)[0])
}

/// Outcome of training.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: NetworkParams,
    pub detection: DegreeMap<f64>,
    /// Loss before every update, then the loss of the final parameters.
    pub loss_trace: Vec<f64>,
}

/// Gradients of the training loss with respect to every parameter tensor.
pub fn loss_and_gradients(
    h: &Hsi<f64>,
    maps: &DegreeMaps<f64>,
    params: &NetworkParams,
    labels: &PseudoLabels,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut fp = forward(h, maps, params, cfg.use_tokens, true)?;
    let loss = loss_node(&mut fp.graph, fp.d_q, labels, cfg.lambda_tv)?;
    fp.graph.backward(loss)?;
    let grads = fp.params.iter().map(|&v| fp.graph.grad(v).to_vec()).collect();
    Ok((fp.graph.value(loss)[0], grads))
}

/// Full-image Adam training from a seeded initialisation.
pub fn train(h: &Hsi<f64>, maps: &DegreeMaps<f64>, d_c: &DegreeMap<f64>, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let labels = pseudo_labels(d_c, cfg.e3, cfg.e4)?;
    let mut params = NetworkParams::init(h.height(), h.width(), h.bands(), cfg.seed)?;
    let mut adam = AdamState::with_lr(&params.sizes(), cfg.lr);
    let mut loss_trace = Vec::with_capacity(cfg.epochs * cfg.steps_per_epoch + 1);
    for _ in 0..cfg.epochs * cfg.steps_per_epoch {
        let (loss, grads) = loss_and_gradients(h, maps, &params, &labels, cfg)?;
        loss_trace.push(loss);
        adam_step(&mut params.values, &grads, &mut adam)?;
        params.clamp_widths();
    }
    let mut fp = forward(h, maps, &params, cfg.use_tokens, false)?;
    let loss = loss_node(&mut fp.graph, fp.d_q, &labels, cfg.lambda_tv)?;
    loss_trace.push(fp.graph.value(loss)[0]);
    Ok(TrainOutput {
        detection: fp.detection()?,
        params,
        loss_trace,
    })
}

/// Detection map of already-trained parameters.
pub fn infer(h: &Hsi<f64>, maps: &DegreeMaps<f64>, params: &NetworkParams, use_tokens: bool) -> Result<DegreeMap<f64>> {
    forward(h, maps, params, use_tokens, false)?.detection()
}

/// Elementwise product of the classical and quantum detection maps.
pub fn fuse_detections<T: Scalar>(d_c: &DegreeMap<T>, d_q: &DegreeMap<T>) -> Result<DegreeMap<T>> {
    d_c.zip_with(d_q, |a, b| a * b)
}
