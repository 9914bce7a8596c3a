//! Train/validation split, multi-domain mini-batches and spectral-transfer
//! augmentation.

use super::config::AlphaPolicy;
use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::fourier;
use crate::rng;
use crate::trial::TrialTensor;
use rand::seq::SliceRandom;
use rand::Rng;

/// A labeled trial tagged with the index of its source domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub trial: TrialTensor,
    pub label: usize,
    pub domain: usize,
}

/// Position of a trial inside a list of datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleRef {
    pub domain: usize,
    pub index: usize,
}

impl SampleRef {
    pub fn load(&self, datasets: &[DomainDataset]) -> Sample {
        let (trial, label) = &datasets[self.domain].trials()[self.index];
        Sample {
            trial: trial.clone(),
            label: *label,
            domain: self.domain,
        }
    }
}

/// Stratified per-domain, per-class split. Each domain keeps
/// `round(val_fraction · len)` validation trials, allocated to classes by
/// largest remainder.
pub fn split_train_val(
    datasets: &[DomainDataset],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<DomainDataset>, Vec<DomainDataset>)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::param("val_fraction", format!("must lie in (0, 1), got {val_fraction}")));
    }
    let mut train = Vec::with_capacity(datasets.len());
    let mut val = Vec::with_capacity(datasets.len());
    for (d, ds) in datasets.iter().enumerate() {
        let n = ds.len();
        let n_val = (val_fraction * n as f64).round() as usize;
        if n < 5 || n_val == 0 || n_val == n {
            return Err(Error::InvalidDataset(format!(
                "domain `{}` has {n} trials, too few to split at {val_fraction}",
                ds.domain_id()
            )));
        }
        let mut rng = rng::stream(seed, "split", &[d as u64]);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
        for (i, (_, l)) in ds.trials().iter().enumerate() {
            by_class[*l].push(i);
        }
        for idx in &mut by_class {
            idx.shuffle(&mut rng);
        }
        let quotas: Vec<f64> = by_class.iter().map(|v| v.len() as f64 * n_val as f64 / n as f64).collect();
        let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
        let mut short = n_val - take.iter().sum::<usize>();
        for c in order {
            if short == 0 {
                break;
            }
            if take[c] < by_class[c].len() {
                take[c] += 1;
                short -= 1;
            }
        }
        let mut val_idx: Vec<usize> = by_class.iter().zip(&take).flat_map(|(v, &k)| v[..k].iter().copied()).collect();
        let mut train_idx: Vec<usize> = by_class.iter().zip(&take).flat_map(|(v, &k)| v[k..].iter().copied()).collect();
        val_idx.sort_unstable();
        train_idx.sort_unstable();
        train.push(ds.subset(&train_idx));
        val.push(ds.subset(&val_idx));
    }
    Ok((train, val))
}

/// One epoch of batches. Each domain is shuffled on its own, then the domains
/// are interleaved in proportion to their size so that every batch mixes
/// them; the ragged tail is dropped.
///
/// With `require_mix`, every batch must hold at least 2 domains with at least
/// 2 samples each, otherwise a configuration error is returned.
pub fn make_batches(
    train: &[DomainDataset],
    batch_size: usize,
    seed: u64,
    epoch: usize,
    require_mix: bool,
) -> Result<Vec<Vec<SampleRef>>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    if require_mix && (train.len() < 2 || batch_size < 2 * train.len().min(2)) {
        return Err(Error::InvalidConfig(format!(
            "cannot mix domains: {} domain(s), batch_size {batch_size}",
            train.len()
        )));
    }
    let mut keyed: Vec<(f64, SampleRef)> = Vec::new();
    for (d, ds) in train.iter().enumerate() {
        let mut rng = rng::stream(seed, "batches", &[epoch as u64, d as u64]);
        let mut idx: Vec<usize> = (0..ds.len()).collect();
        idx.shuffle(&mut rng);
        let offset: f64 = rng.gen();
        let n = ds.len() as f64;
        keyed.extend(
            idx.into_iter()
                .enumerate()
                .map(|(j, index)| ((j as f64 + offset) / n, SampleRef { domain: d, index })),
        );
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.domain.cmp(&b.1.domain)));
    let batches: Vec<Vec<SampleRef>> = keyed
        .chunks_exact(batch_size)
        .map(|c| c.iter().map(|(_, r)| *r).collect())
        .collect();
    if batches.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} training samples do not fill one batch of {batch_size}",
            keyed.len()
        )));
    }
    if require_mix {
        for (b, batch) in batches.iter().enumerate() {
            let counts = domain_counts(batch.iter().map(|r| r.domain), train.len());
            let mixed = counts.iter().filter(|&&c| c > 0).count() >= 2 && counts.iter().all(|&c| c == 0 || c >= 2);
            if !mixed {
                return Err(Error::InvalidConfig(format!(
                    "batch {b} of epoch {epoch} has domain counts {counts:?}; need >= 2 domains with >= 2 samples each"
                )));
            }
        }
    }
    Ok(batches)
}

fn domain_counts(domains: impl Iterator<Item = usize>, n: usize) -> Vec<usize> {
    let mut counts = vec![0; n.max(1)];
    for d in domains {
        if d >= counts.len() {
            counts.resize(d + 1, 0);
        }
        counts[d] += 1;
    }
    counts
}

/// Originals followed by their spectrally transferred counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBatch {
    pub samples: Vec<Sample>,
    /// Number of originals at the front of `samples`.
    pub n_original: usize,
    /// Swap-band width used for each augmented sample, in order.
    pub alphas: Vec<f64>,
    /// Phase donor (index into the originals) of each augmented sample.
    pub donors: Vec<usize>,
    /// Set when the batch held a single domain and was returned unchanged.
    pub skipped: bool,
}

fn draw_alpha<R: Rng>(policy: AlphaPolicy, rng: &mut R) -> f64 {
    match policy {
        AlphaPolicy::Fixed(a) => a,
        AlphaPolicy::Uniform => loop {
            let a: f64 = rng.gen_range(0.0..0.5);
            if a > 0.0 {
                break a;
            }
        },
    }
}

/// Cross-domain spectral transfer. Samples are paired greedily in a shuffled
/// order with a partner from another domain, and each pair yields both
/// transfers; a sample left without a free partner borrows an already paired
/// one from another domain and yields only its own transfer. The output is
/// therefore exactly twice the input. Augmented samples keep the label and
/// domain of their phase donor.
pub fn augment_batch(batch: &[Sample], policy: AlphaPolicy, seed: u64) -> Result<AugmentedBatch> {
    if let AlphaPolicy::Fixed(a) = policy {
        fourier::check_alpha(a)?;
    }
    let n = batch.len();
    let single_domain = batch.windows(2).all(|w| w[0].domain == w[1].domain);
    if n < 2 || single_domain {
        return Ok(AugmentedBatch {
            samples: batch.to_vec(),
            n_original: n,
            alphas: Vec::new(),
            donors: Vec::new(),
            skipped: true,
        });
    }
    let mut rng = rng::stream(seed, "augment", &[]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut pairs = Vec::new();
    for (pos, &u) in order.iter().enumerate() {
        if partner[u].is_some() {
            continue;
        }
        if let Some(&v) = order[pos + 1..]
            .iter()
            .find(|&&v| partner[v].is_none() && batch[v].domain != batch[u].domain)
        {
            partner[u] = Some(v);
            partner[v] = Some(u);
            pairs.push((u, v, true));
        }
    }
    for &u in &order {
        if partner[u].is_none() {
            let others: Vec<usize> = order.iter().copied().filter(|&v| batch[v].domain != batch[u].domain).collect();
            let v = others[rng.gen_range(0..others.len())];
            pairs.push((u, v, false));
        }
    }

    let spectra = batch
        .iter()
        .map(|s| fourier::trial_spectra(&s.trial))
        .collect::<Result<Vec<_>>>()?;
    let m = batch[0].trial.n_samples();
    let mut samples = batch.to_vec();
    let mut alphas = Vec::with_capacity(n);
    let mut donors = Vec::with_capacity(n);
    for (u, v, both) in pairs {
        let alpha = draw_alpha(policy, &mut rng);
        let mask = fourier::make_mask(alpha, m)?;
        let mut emit = |base: usize, donor: usize| -> Result<()> {
            samples.push(Sample {
                trial: fourier::synthesize_transfer(&spectra[base], &spectra[donor], &mask)?,
                label: batch[base].label,
                domain: batch[base].domain,
            });
            alphas.push(alpha);
            donors.push(base);
            Ok(())
        };
        emit(u, v)?;
        if both {
            emit(v, u)?;
        }
    }
    Ok(AugmentedBatch {
        samples,
        n_original: n,
        alphas,
        donors,
        skipped: false,
    })
}
