//! Teacher pre-training on phase inputs, student training with distillation
//! and alignment, and inference.

use super::batches::{augment_batch, make_batches, Sample, SampleRef};
use super::config::{DistillTarget, TrainConfig};
use crate::data::DomainDataset;
use crate::diffengine::{sgd_step, Graph, ModelParams, Tensor};
use crate::error::{Error, Result};
use crate::losses;
use crate::model::{self, BackboneConfig};
use crate::rng;
use crate::trial::TrialTensor;
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

/// Best-validation snapshot of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub backbone: BackboneConfig,
    pub params: ModelParams,
    pub val_accuracy: f64,
    pub epoch: usize,
}

/// One line of the metrics log. Inactive loss terms are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub loss_cls: f64,
    pub loss_mse: Option<f64>,
    pub loss_align: Option<f64>,
    pub loss_total: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochMetrics>,
    /// Every domain id that contributed a training sample.
    pub domains_seen: BTreeSet<String>,
    /// Batches that could not be augmented because they held one domain.
    pub augment_skips: usize,
    /// Batches where fewer than 2 domains had 2 rows, so alignment was skipped.
    pub align_skips: usize,
}

impl TrainOutcome {
    /// Zero-calibration audit: the held-out domain never reached training.
    pub fn assert_unseen(&self, held_out: &str) -> Result<()> {
        if self.domains_seen.contains(held_out) {
            return Err(Error::InvalidDataset(format!("held-out domain `{held_out}` was used in training")));
        }
        Ok(())
    }
}

fn check_inputs(train: &[DomainDataset], val: &[DomainDataset], config: &TrainConfig) -> Result<BackboneConfig> {
    config.validate()?;
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidDataset("no training domains".into()))?;
    for ds in train.iter().chain(val) {
        if ds.trial_shape() != first.trial_shape() || ds.n_classes() != first.n_classes() {
            return Err(Error::InvalidDataset(format!(
                "domain `{}` has shape {:?} with {} classes, expected {:?} with {}",
                ds.domain_id(),
                ds.trial_shape(),
                ds.n_classes(),
                first.trial_shape(),
                first.n_classes()
            )));
        }
    }
    if val.iter().all(DomainDataset::is_empty) {
        return Err(Error::InvalidDataset("validation set is empty".into()));
    }
    let (n, m) = first.trial_shape();
    config.backbone(n, m, first.n_classes())
}

fn failure(epoch: usize, e: Error) -> Error {
    match e {
        Error::Numeric { node } => Error::TrainingFailure {
            epoch,
            reason: format!("non-finite value at {node}"),
        },
        other => other,
    }
}

fn accuracy_on(backbone: &BackboneConfig, params: &ModelParams, trials: &[&TrialTensor], labels: &[usize]) -> Result<f64> {
    let mut correct = 0;
    for (chunk, lab) in trials.chunks(128).zip(labels.chunks(128)) {
        let pred = model::argmax_rows(&model::forward_logits(backbone, params, chunk)?);
        correct += pred.iter().zip(lab).filter(|(p, l)| p == l).count();
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Trials and labels of a list of datasets, optionally transformed.
fn flatten_sets(sets: &[DomainDataset], f: impl Fn(&TrialTensor) -> Result<TrialTensor>) -> Result<(Vec<TrialTensor>, Vec<usize>)> {
    let mut trials = Vec::new();
    let mut labels = Vec::new();
    for ds in sets {
        for (t, l) in ds.trials() {
            trials.push(f(t)?);
            labels.push(*l);
        }
    }
    Ok((trials, labels))
}

fn init_seed(config: &TrainConfig, role: &str) -> u64 {
    rng::derive(config.seed, &[rng::tag(role)])
}

/// One SGD step on `loss` with respect to the attached parameters.
fn apply_step(
    g: &Graph,
    loss: crate::diffengine::Var,
    vars: &model::NetworkVars,
    params: &mut ModelParams,
    sgd: &crate::diffengine::SgdState,
) -> Result<()> {
    let mut grads = g.backward(loss)?;
    let grads: Vec<Tensor> = vars
        .all()
        .iter()
        .map(|&v| grads.take(v).unwrap_or_else(|| Tensor::zeros(g.shape(v))))
        .collect();
    sgd_step(params, &grads, sgd)
}

struct Best {
    checkpoint: Option<Checkpoint>,
}

impl Best {
    fn offer(&mut self, backbone: BackboneConfig, params: &ModelParams, val_accuracy: f64, epoch: usize) {
        // Strictly better only, so ties keep the earlier epoch.
        if self.checkpoint.as_ref().map_or(true, |c| val_accuracy > c.val_accuracy) {
            self.checkpoint = Some(Checkpoint {
                backbone,
                params: params.clone(),
                val_accuracy,
                epoch,
            });
        }
    }
}

/// Cross-entropy on the phase spectra of the training trials; returns the
/// best-validation checkpoint.
pub fn train_teacher(train: &[DomainDataset], val: &[DomainDataset], config: &TrainConfig) -> Result<TrainOutcome> {
    let backbone = check_inputs(train, val, config)?;
    let epochs = config.teacher_epochs;
    let mut params = model::build_network(&backbone, init_seed(config, "teacher"))?;
    let mut sgd = config.sgd(epochs)?;
    let phases: Vec<Vec<TrialTensor>> = train
        .iter()
        .map(|ds| ds.trials().iter().map(|(t, _)| model::phase_input(t)).collect())
        .collect::<Result<_>>()?;
    let (val_x, val_y) = flatten_sets(val, model::phase_input)?;
    let val_refs: Vec<&TrialTensor> = val_x.iter().collect();

    let mut best = Best { checkpoint: None };
    let mut history = Vec::with_capacity(epochs);
    let mut seen = BTreeSet::new();
    let mut augment_skips = 0;
    for epoch in 0..epochs {
        sgd.set_epoch(epoch);
        let batches = make_batches(train, config.batch_size, rng::derive(config.seed, &[rng::tag("teacher")]), epoch, false)?;
        let mut loss_sum = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            seen.extend(batch.iter().map(|r| train[r.domain].domain_id().to_string()));
            let mut inputs: Vec<TrialTensor> = batch.iter().map(|r| phases[r.domain][r.index].clone()).collect();
            let mut labels: Vec<usize> = batch.iter().map(|r| train[r.domain].trials()[r.index].1).collect();
            if config.teacher_augment {
                let samples: Vec<Sample> = batch.iter().map(|r| r.load(train)).collect();
                let seed = rng::derive(config.seed, &[rng::tag("teacher-augment"), epoch as u64, b as u64]);
                let aug = augment_batch(&samples, config.alpha_policy, seed)?;
                augment_skips += aug.skipped as usize;
                for s in &aug.samples[aug.n_original..] {
                    inputs.push(model::phase_input(&s.trial)?);
                    labels.push(s.label);
                }
            }
            let refs: Vec<&TrialTensor> = inputs.iter().collect();
            let step = (|| {
                let mut g = Graph::new();
                let vars = model::attach(&mut g, &backbone, &params, true)?;
                let x = g.constant(model::batch_tensor(&backbone, &refs)?)?;
                let f = model::features(&mut g, &backbone, &vars, x)?;
                let z = model::logits(&mut g, &vars, f)?;
                let loss = losses::cross_entropy(&mut g, z, &labels)?;
                let value = g.value(loss).item();
                apply_step(&g, loss, &vars, &mut params, &sgd)?;
                Ok(value)
            })();
            loss_sum += step.map_err(|e| failure(epoch, e))?;
        }
        let loss_cls = loss_sum / batches.len() as f64;
        if !params.tensors().all(Tensor::is_finite) {
            return Err(Error::TrainingFailure { epoch, reason: "parameters became non-finite".into() });
        }
        let val_accuracy = accuracy_on(&backbone, &params, &val_refs, &val_y)?;
        best.offer(backbone, &params, val_accuracy, epoch);
        history.push(EpochMetrics {
            epoch,
            lr: sgd.lr(),
            loss_cls,
            loss_mse: None,
            loss_align: None,
            loss_total: loss_cls,
            val_accuracy,
        });
        log::debug!("teacher epoch {epoch}: loss {loss_cls:.4} val {val_accuracy:.3}");
    }
    if augment_skips > 0 {
        log::warn!("teacher: {augment_skips} single-domain batches were not augmented");
    }
    Ok(TrainOutcome {
        checkpoint: best.checkpoint.expect("at least one epoch"),
        history,
        domains_seen: seen,
        augment_skips,
        align_skips: 0,
    })
}

/// Input fed to the frozen teacher for a student-side sample.
fn teacher_view(target: DistillTarget, trial: &TrialTensor) -> Result<TrialTensor> {
    match target {
        DistillTarget::PhaseOfAugmented => model::phase_input(trial),
        DistillTarget::RawAugmented => Ok(trial.clone()),
    }
}

/// Student training: cross-entropy on originals ∪ transferred trials,
/// `γ1`-weighted feature distillation towards the frozen teacher, and
/// `γ2`-weighted covariance alignment across the domains of each batch.
pub fn train_student(
    train: &[DomainDataset],
    val: &[DomainDataset],
    teacher: &Checkpoint,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let backbone = check_inputs(train, val, config)?;
    config.check_domains(train.len())?;
    if config.distill_active() {
        if teacher.backbone != backbone {
            return Err(Error::InvalidConfig(format!(
                "teacher backbone {:?} differs from student backbone {:?}",
                teacher.backbone, backbone
            )));
        }
        model::check_params(&backbone, &teacher.params)?;
    }
    let teacher_hash = teacher.params.content_hash();
    let mut params = model::build_network(&backbone, init_seed(config, "student"))?;
    let mut sgd = config.sgd(config.epochs)?;
    let (val_x, val_y) = flatten_sets(val, |t| Ok(t.clone()))?;
    let val_refs: Vec<&TrialTensor> = val_x.iter().collect();

    // Targets for unaugmented trials never change, so compute them once.
    let mut cached_targets: HashMap<SampleRef, Vec<f64>> = HashMap::new();
    if config.distill_active() {
        for (d, ds) in train.iter().enumerate() {
            let views = ds
                .trials()
                .iter()
                .map(|(t, _)| teacher_view(config.distill_target, t))
                .collect::<Result<Vec<_>>>()?;
            for (start, chunk) in views.chunks(128).enumerate() {
                let refs: Vec<&TrialTensor> = chunk.iter().collect();
                let feats = model::forward_features(&backbone, &teacher.params, &refs)?;
                for i in 0..chunk.len() {
                    cached_targets.insert(SampleRef { domain: d, index: start * 128 + i }, feats.row(i).to_vec());
                }
            }
        }
    }

    let require_mix = config.augment || config.align_active();
    let mut best = Best { checkpoint: None };
    let mut history = Vec::with_capacity(config.epochs);
    let mut seen = BTreeSet::new();
    let (mut augment_skips, mut align_skips) = (0, 0);
    for epoch in 0..config.epochs {
        sgd.set_epoch(epoch);
        let batches = make_batches(train, config.batch_size, rng::derive(config.seed, &[rng::tag("student")]), epoch, require_mix)?;
        let (mut s_cls, mut s_mse, mut s_align, mut s_total) = (0.0, 0.0, 0.0, 0.0);
        for (b, batch) in batches.iter().enumerate() {
            seen.extend(batch.iter().map(|r| train[r.domain].domain_id().to_string()));
            let originals: Vec<Sample> = batch.iter().map(|r| r.load(train)).collect();
            let samples = if config.augment {
                let seed = rng::derive(config.seed, &[rng::tag("student-augment"), epoch as u64, b as u64]);
                let mut aug = augment_batch(&originals, config.alpha_policy, seed)?;
                augment_skips += aug.skipped as usize;
                for s in &mut aug.samples[aug.n_original..] {
                    s.trial = model::zscore(&s.trial)?;
                }
                aug.samples
            } else {
                originals
            };

            let step = (|| -> Result<(f64, Option<f64>, Option<f64>, f64)> {
                let refs: Vec<&TrialTensor> = samples.iter().map(|s| &s.trial).collect();
                let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
                let mut g = Graph::new();
                let vars = model::attach(&mut g, &backbone, &params, true)?;
                let x = g.constant(model::batch_tensor(&backbone, &refs)?)?;
                let feats = model::features(&mut g, &backbone, &vars, x)?;
                let z = model::logits(&mut g, &vars, feats)?;
                let cls = losses::cross_entropy(&mut g, z, &labels)?;

                let mse = if config.distill_active() {
                    let d = backbone.feature_dim;
                    let mut target = Vec::with_capacity(samples.len() * d);
                    for row in &cached_targets_for(batch, &cached_targets) {
                        target.extend_from_slice(row);
                    }
                    let fresh: Vec<TrialTensor> = samples[batch.len()..]
                        .iter()
                        .map(|s| teacher_view(config.distill_target, &s.trial))
                        .collect::<Result<_>>()?;
                    if !fresh.is_empty() {
                        let fresh_refs: Vec<&TrialTensor> = fresh.iter().collect();
                        target.extend(model::forward_features(&backbone, &teacher.params, &fresh_refs)?.into_data());
                    }
                    let t = g.constant(Tensor::new(vec![samples.len(), d], target)?)?;
                    Some(losses::mse_distill(&mut g, feats, t)?)
                } else {
                    None
                };

                let align = if config.align_active() {
                    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); train.len()];
                    for (i, s) in samples.iter().enumerate() {
                        groups[s.domain].push(i);
                    }
                    let vars_g = groups
                        .iter()
                        .filter(|rows| rows.len() >= 2)
                        .map(|rows| g.gather_rows(feats, rows))
                        .collect::<Result<Vec<_>>>()?;
                    if vars_g.len() >= 2 {
                        Some(losses::coral_align(&mut g, &vars_g)?)
                    } else {
                        None
                    }
                } else {
                    None
                };

                let total = losses::total_student_loss(&mut g, cls, mse, align, config.weights)?;
                let out = (
                    g.value(cls).item(),
                    mse.map(|v| g.value(v).item()),
                    align.map(|v| g.value(v).item()),
                    g.value(total).item(),
                );
                apply_step(&g, total, &vars, &mut params, &sgd)?;
                Ok(out)
            })();
            let (c, m, a, t) = step.map_err(|e| failure(epoch, e))?;
            s_cls += c;
            s_mse += m.unwrap_or(0.0);
            if let Some(a) = a {
                s_align += a;
            } else if config.align_active() {
                align_skips += 1;
            }
            s_total += t;
        }
        if !params.tensors().all(Tensor::is_finite) {
            return Err(Error::TrainingFailure { epoch, reason: "parameters became non-finite".into() });
        }
        let nb = batches.len() as f64;
        let val_accuracy = accuracy_on(&backbone, &params, &val_refs, &val_y)?;
        best.offer(backbone, &params, val_accuracy, epoch);
        history.push(EpochMetrics {
            epoch,
            lr: sgd.lr(),
            loss_cls: s_cls / nb,
            loss_mse: config.distill_active().then_some(s_mse / nb),
            loss_align: config.align_active().then_some(s_align / nb),
            loss_total: s_total / nb,
            val_accuracy,
        });
        log::debug!("student epoch {epoch}: total {:.4} val {val_accuracy:.3}", s_total / nb);
    }
    if augment_skips > 0 {
        log::warn!("student: {augment_skips} single-domain batches were not augmented");
    }
    if teacher.params.content_hash() != teacher_hash {
        return Err(Error::TrainingFailure {
            epoch: config.epochs,
            reason: "teacher parameters changed during student training".into(),
        });
    }
    Ok(TrainOutcome {
        checkpoint: best.checkpoint.expect("at least one epoch"),
        history,
        domains_seen: seen,
        augment_skips,
        align_skips,
    })
}

fn cached_targets_for<'a>(batch: &[SampleRef], cache: &'a HashMap<SampleRef, Vec<f64>>) -> Vec<&'a Vec<f64>> {
    batch.iter().map(|r| &cache[r]).collect()
}

/// Labels from the classifier head; no adaptation of any kind.
pub fn predict(checkpoint: &Checkpoint, trials: &[&TrialTensor]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(trials.len());
    for chunk in trials.chunks(128) {
        out.extend(model::argmax_rows(&model::forward_logits(&checkpoint.backbone, &checkpoint.params, chunk)?));
    }
    Ok(out)
}

/// Band-pass and z-score every domain with the configured band.
pub fn prepare(datasets: &[DomainDataset], config: &TrainConfig) -> Result<Vec<DomainDataset>> {
    datasets
        .iter()
        .map(|d| crate::data::preprocess(d, config.band_lo_hz, config.band_hi_hz))
        .collect()
}
