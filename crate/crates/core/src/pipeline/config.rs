//! Training hyperparameters and the flat `key = value` config format.

use crate::diffengine::{hex_digest, SgdState};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::BackboneConfig;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// How the swap-band width is chosen for each augmented pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaPolicy {
    Fixed(f64),
    /// Fresh draw from `(0, 0.5)` per pair.
    Uniform,
}

impl fmt::Display for AlphaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaPolicy::Fixed(a) => write!(f, "{a}"),
            AlphaPolicy::Uniform => f.write_str("uniform"),
        }
    }
}

impl FromStr for AlphaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(AlphaPolicy::Uniform);
        }
        let a: f64 = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("alpha must be `uniform` or a number, got `{s}`")))?;
        crate::fourier::check_alpha(a)?;
        Ok(AlphaPolicy::Fixed(a))
    }
}

/// Input the frozen teacher sees when producing distillation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistillTarget {
    /// `T_f(phase(ẋ))`: the teacher stays on its training distribution.
    PhaseOfAugmented,
    /// `T_f(ẋ)`: the raw augmented signal.
    RawAugmented,
}

impl fmt::Display for DistillTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistillTarget::PhaseOfAugmented => "phase-of-augmented",
            DistillTarget::RawAugmented => "raw-augmented",
        })
    }
}

impl FromStr for DistillTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase-of-augmented" => Ok(DistillTarget::PhaseOfAugmented),
            "raw-augmented" => Ok(DistillTarget::RawAugmented),
            _ => Err(Error::InvalidConfig(format!(
                "distill_target must be phase-of-augmented or raw-augmented, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub teacher_epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Epoch fractions at which the learning rate is multiplied by `lr_decay`.
    pub lr_decay_at: Vec<f64>,
    pub lr_decay: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub alpha_policy: AlphaPolicy,
    pub distill_target: DistillTarget,
    pub augment: bool,
    pub align: bool,
    /// Whether the teacher also trains on spectrally transferred batches.
    pub teacher_augment: bool,
    pub val_fraction: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub kernel_len: usize,
    pub stride: usize,
    pub n_temporal: usize,
    pub n_spatial: usize,
    pub pool: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 120,
            teacher_epochs: 120,
            batch_size: 32,
            base_lr: 0.005,
            lr_decay_at: vec![0.7, 0.9],
            lr_decay: 0.1,
            seed: 0,
            weights: LossWeights { gamma1: 1.0, gamma2: 1.0 },
            alpha_policy: AlphaPolicy::Uniform,
            distill_target: DistillTarget::PhaseOfAugmented,
            augment: true,
            align: true,
            teacher_augment: false,
            val_fraction: 0.2,
            band_lo_hz: 4.0,
            band_hi_hz: 40.0,
            kernel_len: 25,
            stride: 1,
            n_temporal: 8,
            n_spatial: 4,
            pool: 8,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "epochs",
    "teacher_epochs",
    "batch_size",
    "base_lr",
    "lr_decay_at",
    "lr_decay",
    "seed",
    "gamma1",
    "gamma2",
    "alpha",
    "distill_target",
    "augment",
    "align",
    "teacher_augment",
    "val_fraction",
    "band_lo_hz",
    "band_hi_hz",
    "kernel_len",
    "stride",
    "n_temporal",
    "n_spatial",
    "pool",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    /// Desk-scale schedule used for the synthetic benchmark: few epochs, a
    /// larger step, and the same decay points. The alignment term is tiny in
    /// absolute size at this feature width, hence the large `gamma2`.
    pub fn desk_preset() -> Self {
        Self {
            epochs: 12,
            teacher_epochs: 12,
            base_lr: 0.05,
            weights: LossWeights { gamma1: 0.3, gamma2: 10.0 },
            ..Self::default()
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "teacher_epochs" => self.teacher_epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "base_lr" => self.base_lr = parse(key, value)?,
            "lr_decay_at" => {
                self.lr_decay_at = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|v| parse(key, v.trim())).collect::<Result<_>>()?
                }
            }
            "lr_decay" => self.lr_decay = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "gamma1" => self.weights.gamma1 = parse(key, value)?,
            "gamma2" => self.weights.gamma2 = parse(key, value)?,
            "alpha" => self.alpha_policy = value.parse()?,
            "distill_target" => self.distill_target = value.parse()?,
            "augment" => self.augment = parse(key, value)?,
            "align" => self.align = parse(key, value)?,
            "teacher_augment" => self.teacher_augment = parse(key, value)?,
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "band_lo_hz" => self.band_lo_hz = parse(key, value)?,
            "band_hi_hz" => self.band_hi_hz = parse(key, value)?,
            "kernel_len" => self.kernel_len = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "n_temporal" => self.n_temporal = parse(key, value)?,
            "n_spatial" => self.n_spatial = parse(key, value)?,
            "pool" => self.pool = parse(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every setting of a config text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!("line {}: expected `key = value`", no + 1)));
            };
            self.set(key.trim(), value)
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Renders the config in the file format accepted by [`Self::apply_text`].
    pub fn to_text(&self) -> String {
        let decay: Vec<String> = self.lr_decay_at.iter().map(f64::to_string).collect();
        let pairs: [(&str, String); 22] = [
            ("epochs", self.epochs.to_string()),
            ("teacher_epochs", self.teacher_epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("base_lr", self.base_lr.to_string()),
            ("lr_decay_at", decay.join(",")),
            ("lr_decay", self.lr_decay.to_string()),
            ("seed", self.seed.to_string()),
            ("gamma1", self.weights.gamma1.to_string()),
            ("gamma2", self.weights.gamma2.to_string()),
            ("alpha", self.alpha_policy.to_string()),
            ("distill_target", self.distill_target.to_string()),
            ("augment", self.augment.to_string()),
            ("align", self.align.to_string()),
            ("teacher_augment", self.teacher_augment.to_string()),
            ("val_fraction", self.val_fraction.to_string()),
            ("band_lo_hz", self.band_lo_hz.to_string()),
            ("band_hi_hz", self.band_hi_hz.to_string()),
            ("kernel_len", self.kernel_len.to_string()),
            ("stride", self.stride.to_string()),
            ("n_temporal", self.n_temporal.to_string()),
            ("n_spatial", self.n_spatial.to_string()),
            ("pool", self.pool.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.epochs == 0 || self.teacher_epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad(format!("base_lr must be positive, got {}", self.base_lr));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        LossWeights::new(self.weights.gamma1, self.weights.gamma2)?;
        if let AlphaPolicy::Fixed(a) = self.alpha_policy {
            crate::fourier::check_alpha(a)?;
        }
        self.sgd(self.epochs)?;
        Ok(())
    }

    /// Alignment needs each represented domain to supply 2 rows per batch.
    pub fn check_domains(&self, n_domains: usize) -> Result<()> {
        if self.align_active() && self.batch_size < 2 * n_domains {
            return Err(Error::InvalidConfig(format!(
                "batch_size {} cannot hold 2 samples from each of {n_domains} domains",
                self.batch_size
            )));
        }
        Ok(())
    }

    pub fn distill_active(&self) -> bool {
        self.weights.gamma1 > 0.0
    }

    pub fn align_active(&self) -> bool {
        self.align && self.weights.gamma2 > 0.0
    }

    pub fn sgd(&self, max_epochs: usize) -> Result<SgdState> {
        let schedule = self.lr_decay_at.iter().map(|&f| (f, self.lr_decay)).collect();
        SgdState::new(self.base_lr, schedule, max_epochs)
    }

    pub fn backbone(&self, n_channels: usize, n_samples: usize, n_classes: usize) -> Result<BackboneConfig> {
        let mut cfg = BackboneConfig {
            n_channels,
            n_samples,
            kernel_len: self.kernel_len,
            stride: self.stride,
            n_temporal: self.n_temporal,
            n_spatial: self.n_spatial,
            pool: self.pool,
            feature_dim: 0,
            n_classes,
        };
        cfg.feature_dim = cfg.implied_feature_dim()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical text rendering.
    pub fn hash(&self) -> String {
        hex_digest(self.to_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let mut c = TrainConfig::desk_preset();
        c.alpha_policy = AlphaPolicy::Fixed(0.25);
        c.distill_target = DistillTarget::RawAugmented;
        c.lr_decay_at = vec![0.5];
        let mut back = TrainConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn comments_and_blank_lines() {
        let mut c = TrainConfig::default();
        c.apply_text("# header\n\nepochs = 7  # trailing\n gamma2=0.5\nalpha = uniform\n").unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.weights.gamma2, 0.5);
    }

    #[test]
    fn unknown_key_and_bad_values() {
        let mut c = TrainConfig::default();
        assert!(c.apply_text("epoch = 3").is_err());
        assert!(c.apply_text("epochs = three").is_err());
        assert!(c.apply_text("alpha = 0.7").is_err());
        assert!(c.apply_text("just words").is_err());
    }

    #[test]
    fn validation() {
        let mut c = TrainConfig::default();
        c.val_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.batch_size = 4;
        assert!(c.check_domains(3).is_err());
        c.align = false;
        assert!(c.check_domains(3).is_ok());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn desk_backbone() {
        let b = TrainConfig::default().backbone(4, 256, 2).unwrap();
        assert_eq!(b.feature_dim, 116);
    }
}
