//! Feature extractor + classifier shared by the teacher and the student.
//!
//! Extractor: temporal convolution (same filters on every channel) → spatial
//! mixing across (filter, channel) rows → ELU → average pooling → flatten.
//! Classifier: one dense layer.

use crate::diffengine::{Graph, ModelParams, Tensor, Var};
use crate::error::{Error, Result};
use crate::fourier;
use crate::rng;
use crate::trial::TrialTensor;
use rand::Rng;

pub const TEMPORAL_W: &str = "extractor.temporal.weight";
pub const SPATIAL_W: &str = "extractor.spatial.weight";
pub const SPATIAL_B: &str = "extractor.spatial.bias";
pub const CLASSIFIER_W: &str = "classifier.weight";
pub const CLASSIFIER_B: &str = "classifier.bias";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BackboneConfig {
    pub n_channels: usize,
    pub n_samples: usize,
    pub kernel_len: usize,
    pub stride: usize,
    pub n_temporal: usize,
    pub n_spatial: usize,
    pub pool: usize,
    pub feature_dim: usize,
    pub n_classes: usize,
}

impl BackboneConfig {
    /// Desk-scale defaults: kernel 25, 8 temporal filters, 4 spatial filters, pool 8.
    pub fn desk_scale(n_channels: usize, n_samples: usize, n_classes: usize) -> Result<Self> {
        let mut cfg = Self {
            n_channels,
            n_samples,
            kernel_len: 25,
            stride: 1,
            n_temporal: 8,
            n_spatial: 4,
            pool: 8,
            feature_dim: 0,
            n_classes,
        };
        cfg.feature_dim = cfg.implied_feature_dim()?;
        Ok(cfg)
    }

    /// Pooled length times spatial filters.
    pub fn implied_feature_dim(&self) -> Result<usize> {
        if self.n_channels == 0 || self.n_temporal == 0 || self.n_spatial == 0 || self.stride == 0 || self.pool == 0 {
            return Err(Error::InvalidConfig(format!("zero-sized layer in {self:?}")));
        }
        if self.kernel_len == 0 || self.kernel_len > self.n_samples {
            return Err(Error::InvalidConfig(format!(
                "kernel {} does not fit {} samples",
                self.kernel_len, self.n_samples
            )));
        }
        let conv_len = (self.n_samples - self.kernel_len) / self.stride + 1;
        if conv_len < self.pool {
            return Err(Error::InvalidConfig(format!(
                "pool width {} exceeds conv output length {conv_len}",
                self.pool
            )));
        }
        Ok(self.n_spatial * (conv_len / self.pool))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 classes, got {}", self.n_classes)));
        }
        let implied = self.implied_feature_dim()?;
        if implied != self.feature_dim {
            return Err(Error::InvalidConfig(format!(
                "feature_dim {} but layers imply {implied}",
                self.feature_dim
            )));
        }
        Ok(())
    }

    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            (TEMPORAL_W, vec![self.n_temporal, self.kernel_len]),
            (SPATIAL_W, vec![self.n_spatial, self.n_temporal * self.n_channels]),
            (SPATIAL_B, vec![self.n_spatial]),
            (CLASSIFIER_W, vec![self.feature_dim, self.n_classes]),
            (CLASSIFIER_B, vec![self.n_classes]),
        ]
    }
}

/// Glorot-uniform weights, zero biases, from a stream keyed by `seed`.
pub fn build_network(config: &BackboneConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = rng::stream(seed, "init", &[]);
    let entries = config
        .param_shapes()
        .into_iter()
        .map(|(name, shape)| {
            let len = shape.iter().product();
            let data = if shape.len() == 1 {
                vec![0.0; len]
            } else {
                // Kernel rows are output units; matrices are (in × out) for the
                // classifier and (out × in) for the mixing layer.
                let (fan_in, fan_out) = match name {
                    CLASSIFIER_W => (shape[0], shape[1]),
                    _ => (shape[1], shape[0]),
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
            };
            Ok((name.to_string(), Tensor::new(shape, data)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelParams::from_tensors(entries))
}

/// Network parameters attached to a graph.
#[derive(Debug, Clone, Copy)]
pub struct NetworkVars {
    pub temporal: Var,
    pub spatial_w: Var,
    pub spatial_b: Var,
    pub classifier_w: Var,
    pub classifier_b: Var,
}

impl NetworkVars {
    /// Parameter vars in [`ModelParams`] order.
    pub fn all(&self) -> [Var; 5] {
        [self.temporal, self.spatial_w, self.spatial_b, self.classifier_w, self.classifier_b]
    }
}

/// Puts `params` on the graph, trainable or frozen.
pub fn attach(g: &mut Graph, config: &BackboneConfig, params: &ModelParams, trainable: bool) -> Result<NetworkVars> {
    check_params(config, params)?;
    let mut put = |name: &str| g.leaf(params.get(name).expect("checked").clone(), trainable);
    Ok(NetworkVars {
        temporal: put(TEMPORAL_W)?,
        spatial_w: put(SPATIAL_W)?,
        spatial_b: put(SPATIAL_B)?,
        classifier_w: put(CLASSIFIER_W)?,
        classifier_b: put(CLASSIFIER_B)?,
    })
}

/// Fails unless `params` holds exactly the tensors `config` implies, in order.
pub fn check_params(config: &BackboneConfig, params: &ModelParams) -> Result<()> {
    let want = config.param_shapes();
    if params.len() != want.len() {
        return Err(Error::InvalidConfig(format!(
            "expected {} parameter tensors, found {}",
            want.len(),
            params.len()
        )));
    }
    for ((name, shape), (have_name, t)) in want.iter().zip(params.iter()) {
        if *name != have_name || shape.as_slice() != t.shape() {
            return Err(Error::InvalidConfig(format!(
                "parameter `{have_name}` {:?} does not match `{name}` {shape:?}",
                t.shape()
            )));
        }
    }
    Ok(())
}

/// Stacks trials into a `(B×n×m)` tensor.
pub fn batch_tensor(config: &BackboneConfig, trials: &[&TrialTensor]) -> Result<Tensor> {
    if trials.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut data = Vec::with_capacity(trials.len() * config.n_channels * config.n_samples);
    for t in trials {
        if t.shape() != (config.n_channels, config.n_samples) {
            return Err(Error::InvalidInput(format!(
                "trial shape {:?} does not match network input ({}, {})",
                t.shape(),
                config.n_channels,
                config.n_samples
            )));
        }
        data.extend_from_slice(t.as_slice());
    }
    Tensor::new(vec![trials.len(), config.n_channels, config.n_samples], data)
}

/// Extractor output `(B×d)` for an input var of shape `(B×n×m)`.
pub fn features(g: &mut Graph, config: &BackboneConfig, vars: &NetworkVars, x: Var) -> Result<Var> {
    let conv = g.conv1d_time(x, vars.temporal, config.stride)?;
    let mixed = g.matmul(vars.spatial_w, conv)?;
    let biased = g.add_bias(mixed, vars.spatial_b)?;
    let act = g.elu(biased)?;
    let pooled = g.avg_pool1d(act, config.pool)?;
    g.flatten(pooled)
}

/// Classifier head on `(B×d)` features.
pub fn logits(g: &mut Graph, vars: &NetworkVars, feats: Var) -> Result<Var> {
    let z = g.matmul(feats, vars.classifier_w)?;
    g.add_bias(z, vars.classifier_b)
}

/// Inference-only feature matrix.
pub fn forward_features(config: &BackboneConfig, params: &ModelParams, batch: &[&TrialTensor]) -> Result<Tensor> {
    let mut g = Graph::new();
    let vars = attach(&mut g, config, params, false)?;
    let x = g.constant(batch_tensor(config, batch)?)?;
    let f = features(&mut g, config, &vars, x)?;
    Ok(g.value(f).clone())
}

/// Inference-only logits `(B×n_classes)`.
pub fn forward_logits(config: &BackboneConfig, params: &ModelParams, batch: &[&TrialTensor]) -> Result<Tensor> {
    let mut g = Graph::new();
    let vars = attach(&mut g, config, params, false)?;
    let x = g.constant(batch_tensor(config, batch)?)?;
    let f = features(&mut g, config, &vars, x)?;
    let z = logits(&mut g, &vars, f)?;
    Ok(g.value(z).clone())
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let c = logits.shape()[1];
    logits
        .data()
        .chunks_exact(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

/// Replaces each channel by its phase spectrum (radians, same length).
pub fn phase_input(trial: &TrialTensor) -> Result<TrialTensor> {
    trial.map_channels(|ch| Ok(fourier::dft(ch)?.phase))
}

/// Per-channel z-score. Channels with σ below `1e-12` are only centred.
pub fn zscore(trial: &TrialTensor) -> Result<TrialTensor> {
    trial.map_channels(|ch| {
        let n = ch.len() as f64;
        let mean = ch.iter().sum::<f64>() / n;
        let sd = (ch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let inv = if sd < 1e-12 { 1.0 } else { 1.0 / sd };
        Ok(ch.iter().map(|v| (v - mean) * inv).collect())
    })
}
