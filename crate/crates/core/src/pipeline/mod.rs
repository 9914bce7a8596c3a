//! Teacher pre-training, student training and inference.

mod batches;
mod config;
mod train;

pub use batches::{augment_batch, make_batches, split_train_val, AugmentedBatch, Sample, SampleRef};
pub use config::{AlphaPolicy, DistillTarget, TrainConfig, CONFIG_KEYS};
pub use train::{predict, prepare, train_student, train_teacher, Checkpoint, EpochMetrics, TrainOutcome};

use crate::diffengine::ModelParams;
use crate::error::{Error, Result};
use crate::model::BackboneConfig;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Writes one JSON object per epoch.
pub fn write_metrics(path: impl AsRef<Path>, history: &[EpochMetrics]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for m in history {
        serde_json::to_writer(&mut out, m).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

impl Checkpoint {
    /// Parameters in the binary format at `path`, metadata in `path.meta`.
    pub fn save(&self, path: impl AsRef<Path>, config_hash: &str) -> Result<()> {
        let path = path.as_ref();
        self.params.save(path)?;
        let b = &self.backbone;
        let meta = format!(
            "val_accuracy = {}\nepoch = {}\nconfig_hash = {config_hash}\nparams_hash = {}\n\
             n_channels = {}\nn_samples = {}\nkernel_len = {}\nstride = {}\nn_temporal = {}\n\
             n_spatial = {}\npool = {}\nfeature_dim = {}\nn_classes = {}\n",
            self.val_accuracy,
            self.epoch,
            self.params.content_hash(),
            b.n_channels,
            b.n_samples,
            b.kernel_len,
            b.stride,
            b.n_temporal,
            b.n_spatial,
            b.pool,
            b.feature_dim,
            b.n_classes,
        );
        let side = sidecar_path(path);
        let mut f = std::fs::File::create(&side).map_err(|e| Error::io(&side, e))?;
        f.write_all(meta.as_bytes()).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let params = ModelParams::load(path)?;
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let get = |key: &str| -> Result<&str> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim())
                .ok_or_else(|| Error::Format(format!("{}: missing `{key}`", side.display())))
        };
        let num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad `{key}`", side.display())))
        };
        let backbone = BackboneConfig {
            n_channels: num("n_channels")?,
            n_samples: num("n_samples")?,
            kernel_len: num("kernel_len")?,
            stride: num("stride")?,
            n_temporal: num("n_temporal")?,
            n_spatial: num("n_spatial")?,
            pool: num("pool")?,
            feature_dim: num("feature_dim")?,
            n_classes: num("n_classes")?,
        };
        backbone.validate()?;
        crate::model::check_params(&backbone, &params)?;
        let val_accuracy = get("val_accuracy")?
            .parse()
            .map_err(|_| Error::Format(format!("{}: bad `val_accuracy`", side.display())))?;
        if let Ok(h) = get("params_hash") {
            if h != params.content_hash() {
                return Err(Error::Format(format!("{}: parameter hash does not match", path.display())));
            }
        }
        Ok(Self {
            backbone,
            params,
            val_accuracy,
            epoch: num("epoch")?,
        })
    }
}
