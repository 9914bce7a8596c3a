//! Leave-one-domain-out ablation over the four loss configurations.

use super::stats::accuracy;
use super::table::{ResultRow, ResultTable};
use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::pipeline::{self, EpochMetrics, TrainConfig};
use crate::trial::TrialTensor;
use rayon::prelude::*;

/// The four rows of the loss ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    /// Plain ERM: no auxiliary loss, no augmentation.
    Baseline,
    /// Distillation only, with augmentation.
    Scenario1,
    /// Alignment only, with augmentation.
    Scenario2,
    /// Both losses, with augmentation.
    Full,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Baseline, Arm::Scenario1, Arm::Scenario2, Arm::Full];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "erm",
            Arm::Scenario1 => "mse_only",
            Arm::Scenario2 => "align_only",
            Arm::Full => "knife",
        }
    }

    /// `base` with this arm's loss weights and augmentation switch. Weights
    /// that are on keep their value from `base`.
    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        let (mse, align) = match self {
            Arm::Baseline => (false, false),
            Arm::Scenario1 => (true, false),
            Arm::Scenario2 => (false, true),
            Arm::Full => (true, true),
        };
        if !mse {
            c.weights.gamma1 = 0.0;
        }
        if !align {
            c.weights.gamma2 = 0.0;
        }
        c.augment = self != Arm::Baseline;
        c
    }
}

/// Loss trace of one student run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub arm: Arm,
    pub seed: u64,
    pub held_out: String,
    pub history: Vec<EpochMetrics>,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub table: ResultTable,
    pub traces: Vec<RunTrace>,
    /// Teacher traces keyed by `(seed, held_out)`.
    pub teacher_traces: Vec<(u64, String, Vec<EpochMetrics>)>,
}

/// Trains every arm for every `(seed, held-out domain)` unit on the remaining
/// domains and scores it on the held-out one. One teacher is trained per unit
/// and shared by the arms that distill. A failed arm is recorded and the rest
/// continue. Units run on a pool of `jobs` workers.
pub fn run_ablation(
    datasets: &[DomainDataset],
    base: &TrainConfig,
    seeds: &[u64],
    arms: &[Arm],
    jobs: usize,
) -> Result<AblationReport> {
    if datasets.len() < 3 {
        return Err(Error::InvalidDataset(format!(
            "leave-one-domain-out needs >= 3 domains, got {}",
            datasets.len()
        )));
    }
    let mut ids: Vec<&str> = datasets.iter().map(DomainDataset::domain_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidDataset("domain ids must be unique".into()));
    }
    base.validate()?;
    let units: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..datasets.len()).map(move |h| (s, h)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let results: Vec<UnitResult> = pool.install(|| {
        units
            .par_iter()
            .map(|&(seed, h)| run_unit(datasets, base, seed, h, arms))
            .collect()
    });

    let mut table = ResultTable::new();
    let mut traces = Vec::new();
    let mut teacher_traces = Vec::new();
    for unit in results {
        if let Some(t) = unit.teacher_trace {
            teacher_traces.push((unit.seed, unit.held_out.clone(), t));
        }
        for (arm, outcome) in unit.arms {
            let accuracy = match outcome {
                Ok((acc, history)) => {
                    traces.push(RunTrace {
                        arm,
                        seed: unit.seed,
                        held_out: unit.held_out.clone(),
                        history,
                    });
                    Ok(acc)
                }
                Err(e) => Err(e),
            };
            table.push(ResultRow {
                method: arm.name().into(),
                held_out: unit.held_out.clone(),
                seed: unit.seed,
                accuracy,
            })?;
        }
    }
    Ok(AblationReport {
        table,
        traces,
        teacher_traces,
    })
}

struct UnitResult {
    seed: u64,
    held_out: String,
    teacher_trace: Option<Vec<EpochMetrics>>,
    arms: Vec<(Arm, std::result::Result<(f64, Vec<EpochMetrics>), String>)>,
}

fn run_unit(datasets: &[DomainDataset], base: &TrainConfig, seed: u64, h: usize, arms: &[Arm]) -> UnitResult {
    let held_out = datasets[h].domain_id().to_string();
    let mut config = base.clone();
    config.seed = seed;
    let sources: Vec<DomainDataset> = datasets
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != h)
        .map(|(_, d)| d.clone())
        .collect();
    let target: Vec<&TrialTensor> = datasets[h].trials().iter().map(|(t, _)| t).collect();
    let labels = datasets[h].labels();

    let split = pipeline::split_train_val(&sources, config.val_fraction, seed);
    let needs_teacher = arms.iter().any(|a| a.configure(&config).distill_active());
    let teacher = match (&split, needs_teacher) {
        (Ok((train, val)), true) => Some(pipeline::train_teacher(train, val, &config).and_then(|t| {
            t.assert_unseen(&held_out)?;
            Ok(t)
        })),
        _ => None,
    };
    let teacher_trace = teacher.as_ref().and_then(|t| t.as_ref().ok()).map(|t| t.history.clone());

    let arms = arms
        .iter()
        .map(|&arm| {
            let cfg = arm.configure(&config);
            let outcome = (|| -> Result<(f64, Vec<EpochMetrics>)> {
                let (train, val) = split.as_ref().map_err(|e| Error::InvalidDataset(e.to_string()))?;
                let fallback;
                let teacher_ckpt = match &teacher {
                    Some(Ok(t)) => &t.checkpoint,
                    Some(Err(e)) if cfg.distill_active() => {
                        return Err(Error::TrainingFailure { epoch: 0, reason: format!("teacher: {e}") })
                    }
                    _ => {
                        // Unused when distillation is off; any checkpoint of the right shape will do.
                        let (n, m) = train[0].trial_shape();
                        let backbone = cfg.backbone(n, m, train[0].n_classes())?;
                        fallback = pipeline::Checkpoint {
                            backbone,
                            params: crate::model::build_network(&backbone, 0)?,
                            val_accuracy: 0.0,
                            epoch: 0,
                        };
                        &fallback
                    }
                };
                let student = pipeline::train_student(train, val, teacher_ckpt, &cfg)?;
                student.assert_unseen(&held_out)?;
                let pred = pipeline::predict(&student.checkpoint, &target)?;
                Ok((accuracy(&pred, &labels)?, student.history))
            })();
            (arm, outcome.map_err(|e| e.to_string()))
        })
        .collect();
    UnitResult {
        seed,
        held_out,
        teacher_trace,
        arms,
    }
}
