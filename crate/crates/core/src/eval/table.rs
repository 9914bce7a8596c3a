//! Per-run accuracy rows and their aggregates.

use super::stats::{mean_std, paired_ttest};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub held_out: String,
    pub seed: u64,
    /// `Err` holds the failure message of a run that did not finish.
    pub accuracy: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
    /// Methods in first-seen order.
    methods: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub n: usize,
    pub failed: usize,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ResultRow) -> Result<()> {
        if let Ok(a) = row.accuracy {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidInput(format!("accuracy {a} outside [0, 1]")));
            }
        }
        if !self.methods.contains(&row.method) {
            self.methods.push(row.method.clone());
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mean and population std over the finished rows of `method`.
    pub fn aggregate(&self, method: &str) -> Aggregate {
        let vals: Vec<f64> = self.rows_of(method).filter_map(|r| r.accuracy.as_ref().ok().copied()).collect();
        let failed = self.rows_of(method).filter(|r| r.accuracy.is_err()).count();
        let (mean, std) = mean_std(&vals);
        Aggregate { mean, std, n: vals.len(), failed }
    }

    fn rows_of<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Mean accuracy per seed across held-out domains, seeds ascending.
    pub fn per_seed_means(&self, method: &str) -> BTreeMap<u64, f64> {
        let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
        for r in self.rows_of(method) {
            if let Ok(a) = r.accuracy {
                let e = acc.entry(r.seed).or_default();
                e.0 += a;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
    }

    /// Paired test of per-seed means, `a − b`, over seeds both methods finished.
    pub fn compare(&self, a: &str, b: &str) -> Result<super::TTest> {
        let (ma, mb) = (self.per_seed_means(a), self.per_seed_means(b));
        let (xa, xb): (Vec<f64>, Vec<f64>) = ma.iter().filter_map(|(s, &v)| mb.get(s).map(|&w| (v, w))).unzip();
        paired_ttest(&xa, &xb)
    }

    /// `method,held_out_domain,seed,accuracy`; failed runs have an empty accuracy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,held_out_domain,seed,accuracy\n");
        for r in &self.rows {
            let acc = r.accuracy.as_ref().map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{acc}", r.method, r.held_out, r.seed);
        }
        out
    }

    /// Reads the format written by [`to_csv`](Self::to_csv). An empty
    /// accuracy cell becomes a failed row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "method,held_out_domain,seed,accuracy" => {}
            _ => return Err(Error::Format("results csv: unexpected header".into())),
        }
        let mut table = Self::new();
        for (no, line) in lines.enumerate() {
            let bad = || Error::Format(format!("results csv row {}: `{line}`", no + 1));
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let [method, held_out, seed, acc] = cells[..] else {
                return Err(bad());
            };
            let accuracy = if acc.is_empty() {
                Err("failed".to_string())
            } else {
                Ok(acc.parse::<f64>().map_err(|_| bad())?)
            };
            table.push(ResultRow {
                method: method.into(),
                held_out: held_out.into(),
                seed: seed.parse().map_err(|_| bad())?,
                accuracy,
            })?;
        }
        Ok(table)
    }

    /// Mean/std per method, deltas against `baseline`, and two-sided paired
    /// p-values for every method pair.
    pub fn summary(&self, baseline: &str) -> String {
        let mut out = String::from("method                mean     std      delta    n  failed\n");
        let base = self.aggregate(baseline).mean;
        for m in &self.methods {
            let a = self.aggregate(m);
            let _ = writeln!(
                out,
                "{m:<20} {:>7.4}  {:>7.4}  {:>+7.4}  {:>3}  {}",
                a.mean,
                a.std,
                a.mean - base,
                a.n,
                a.failed
            );
        }
        out.push_str("\npaired t-test over per-seed means (two-sided)\n");
        for (i, a) in self.methods.iter().enumerate() {
            for b in &self.methods[i + 1..] {
                match self.compare(a, b) {
                    Ok(t) => {
                        let _ = writeln!(out, "{a} vs {b}: t = {:.4}, df = {}, p = {:.6}", t.t, t.df, t.p);
                    }
                    Err(e) => {
                        let _ = writeln!(out, "{a} vs {b}: {e}");
                    }
                }
            }
        }
        out
    }
}
