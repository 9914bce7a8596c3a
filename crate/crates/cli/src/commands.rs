use crate::provenance::{file_hash, Run};
use crate::svg::{LinePlot, Series};
use crate::{
    AblateArgs, AugmentArgs, Command, Common, DescribeArgs, ErdArgs, EvaluateArgs, Failure, Profile, SynthArgs,
    TrainFlags, TrainStudentArgs, TrainTeacherArgs, TtestArgs, UsageError,
};
use knife::data::{self, DomainDataset, SynthSpec, KTRL_MAGIC, PRESETS};
use knife::diffengine::{ModelParams, PARAMS_MAGIC};
use knife::eval::{self, Arm, ResultRow, ResultTable};
use knife::pipeline::{self, AlphaPolicy, Checkpoint, EpochMetrics, Sample, TrainConfig};
use knife::{rng, Error, Result};
use serde_json::json;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

type CmdResult = std::result::Result<(), Failure>;

pub fn run(command: Command, argv: &[String]) -> CmdResult {
    match command {
        Command::Synth(a) => synth(a, argv),
        Command::Augment(a) => augment(a, argv),
        Command::TrainTeacher(a) => train_teacher(a, argv),
        Command::TrainStudent(a) => train_student(a, argv),
        Command::Evaluate(a) => evaluate(a, argv),
        Command::Ablate(a) => ablate(a, argv),
        Command::Ttest(a) => ttest(a, argv),
        Command::Erdplot(a) => erdplot(a, argv),
        Command::Describe(a) => describe(a, argv),
    }
}

/// Profile, then `KNIFE_SEED`, then the config file, then flags. The flag
/// is true when anything above the profile chose the seed.
fn resolve_config(common: &Common, train: Option<&TrainFlags>) -> std::result::Result<(TrainConfig, bool), Failure> {
    let mut config = match common.profile {
        Profile::Desk => TrainConfig::desk_preset(),
        Profile::Full => TrainConfig::default(),
    };
    let mut explicit = false;
    if let Ok(v) = std::env::var("KNIFE_SEED") {
        config.seed = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("KNIFE_SEED must be an unsigned integer, got `{v}`")))?;
        explicit = true;
    }
    if let Some(path) = &common.config {
        let before = config.seed;
        config.apply_file(path)?;
        explicit |= config.seed != before;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.set(k.trim(), v)?;
        explicit |= k.trim() == "seed";
    }
    if let Some(t) = train {
        if let Some(v) = t.epochs {
            config.epochs = v;
            config.teacher_epochs = v;
        }
        if let Some(v) = t.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = t.gamma1 {
            config.weights.gamma1 = v;
        }
        if let Some(v) = t.gamma2 {
            config.weights.gamma2 = v;
        }
    }
    if let Some(s) = common.seed {
        config.seed = s;
        explicit = true;
    }
    config.validate()?;
    Ok((config, explicit))
}

fn out_dir(common: &Common, default: &str) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Files as given; directories contribute their `*.ktrl` files in name order.
fn expand_data(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "ktrl"))
                .collect();
            if found.is_empty() {
                return Err(Error::InvalidInput(format!("no .ktrl files in {}", p.display())));
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_data(paths: &[PathBuf]) -> Result<(Vec<PathBuf>, Vec<DomainDataset>)> {
    let files = expand_data(paths)?;
    let sets = files.iter().map(data::read_dataset).collect::<Result<Vec<_>>>()?;
    Ok((files, sets))
}

fn preset_spec(name: &str) -> std::result::Result<SynthSpec, Failure> {
    data::preset(name)
        .ok_or_else(|| UsageError(format!("unknown preset `{name}` (known: {})", PRESETS.join(", "))).into())
}

fn parse_alpha(flag: Option<&str>, config: &TrainConfig) -> Result<AlphaPolicy> {
    flag.map_or(Ok(config.alpha_policy), str::parse)
}

fn arm_by_name(name: &str) -> std::result::Result<Arm, Failure> {
    Arm::ALL
        .into_iter()
        .find(|a| a.name() == name)
        .ok_or_else(|| UsageError(format!("unknown arm `{name}` (known: erm, mse_only, align_only, knife)")).into())
}

fn synth(a: SynthArgs, argv: &[String]) -> CmdResult {
    let (config, explicit_seed) = resolve_config(&a.common, None)?;
    let mut inputs = Vec::new();
    let (name, mut spec) = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let spec: SynthSpec =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            inputs.push(path.clone());
            (None, spec)
        }
        None => {
            let name = a.preset.clone().unwrap_or_else(|| "phase2x4".into());
            let spec = preset_spec(&name)?;
            (Some(name), spec)
        }
    };
    if let Some(t) = a.trials {
        spec.trials_per_domain = t;
    }
    if explicit_seed {
        spec.seed = config.seed;
    }
    let sets = data::generate_synthetic(&spec)?;
    let out = out_dir(&a.common, "data")?;
    let mut outputs = Vec::new();
    let mut domains = Vec::new();
    for ds in &sets {
        let file = format!("{}.ktrl", ds.domain_id());
        let path = out.join(&file);
        data::write_dataset(ds, &path)?;
        domains.push(json!({
            "domain_id": ds.domain_id(),
            "file": file,
            "trials": ds.len(),
            "sha256": file_hash(&path)?,
        }));
        outputs.push(path);
    }
    let manifest = json!({ "preset": name, "spec": spec, "domains": domains });
    let manifest_path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write(&manifest_path, &(text + "\n"))?;
    outputs.push(manifest_path);
    Run {
        command: "synth",
        argv,
        config: &config,
        inputs,
        outputs,
        extra: json!({ "preset": name, "spec_seed": spec.seed, "trials_per_domain": spec.trials_per_domain }),
    }
    .write(&out)?;
    println!("wrote {} domains of {} trials to {}", sets.len(), spec.trials_per_domain, out.display());
    Ok(())
}

fn augment(a: AugmentArgs, argv: &[String]) -> CmdResult {
    let (config, _) = resolve_config(&a.common, None)?;
    let alpha = parse_alpha(a.alpha.as_deref(), &config)?;
    let (files, sets) = load_data(&a.data.data)?;
    let samples: Vec<Sample> = sets
        .iter()
        .enumerate()
        .flat_map(|(d, ds)| {
            ds.trials().iter().map(move |(t, l)| Sample {
                trial: t.clone(),
                label: *l,
                domain: d,
            })
        })
        .collect();
    let aug = pipeline::augment_batch(&samples, alpha, rng::derive(config.seed, &[rng::tag("augment")]))?;
    if aug.skipped {
        return Err(UsageError("augment needs trials from at least 2 domains".into()).into());
    }
    let out = out_dir(&a.common, "augmented")?;
    let mut csv = String::from("domain,trial,channel,alpha,euclidean,correlation\n");
    let mut per_domain: Vec<Vec<(usize, usize)>> = vec![Vec::new(); sets.len()];
    let mut sums = vec![(0.0, 0.0, 0usize, 0usize); sets.len()];
    for (i, s) in aug.samples[aug.n_original..].iter().enumerate() {
        let base = aug.donors[i];
        let original = &samples[base].trial;
        let offset: usize = sets[..s.domain].iter().map(|d| d.len()).sum();
        per_domain[s.domain].push((base - offset, aug.n_original + i));
        for ch in 0..original.n_channels() {
            let sim = data::similarity(original.channel(ch), s.trial.channel(ch))?;
            let corr = sim.correlation.ok();
            let e = &mut sums[s.domain];
            e.0 += sim.euclidean;
            e.2 += 1;
            if let Some(c) = corr {
                e.1 += c;
                e.3 += 1;
            }
            let corr = corr.map(|c| format!("{c:.6}")).unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{ch},{:.6},{:.6},{corr}",
                sets[s.domain].domain_id(),
                base - offset,
                aug.alphas[i],
                sim.euclidean
            );
        }
    }
    let mut outputs = Vec::new();
    for (d, ds) in sets.iter().enumerate() {
        let mut idx = per_domain[d].clone();
        idx.sort_unstable();
        let trials = idx
            .iter()
            .map(|&(_, j)| (aug.samples[j].trial.clone(), aug.samples[j].label))
            .collect();
        let transferred = DomainDataset::new(ds.domain_id(), ds.fs_hz(), ds.trial_shape(), ds.n_classes(), trials)?
            .with_class_names(ds.class_names().to_vec())?;
        let path = out.join(format!("{}_transfer.ktrl", ds.domain_id()));
        data::write_dataset(&transferred, &path)?;
        outputs.push(path);
        let (e, c, ne, nc) = sums[d];
        let corr = if nc > 0 { format!("{:.4}", c / nc as f64) } else { "n/a".into() };
        println!(
            "{}: {} trials, mean euclidean {:.4}, mean correlation {corr}",
            ds.domain_id(),
            ds.len(),
            e / ne.max(1) as f64
        );
    }
    let csv_path = out.join("similarity.csv");
    write(&csv_path, &csv)?;
    outputs.push(csv_path);
    Run {
        command: "augment",
        argv,
        config: &config,
        inputs: files,
        outputs,
        extra: json!({ "alpha": alpha.to_string() }),
    }
    .write(&out)?;
    Ok(())
}

fn print_domains(label: &str, ids: &BTreeSet<String>) {
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    println!("{label} trained on: {}", ids.join(", "));
}

fn train_teacher(a: TrainTeacherArgs, argv: &[String]) -> CmdResult {
    let (config, _) = resolve_config(&a.common, Some(&a.train))?;
    let (files, sets) = load_data(&a.data.data)?;
    let sets = pipeline::prepare(&sets, &config)?;
    let (train, val) = pipeline::split_train_val(&sets, config.val_fraction, config.seed)?;
    let outcome = pipeline::train_teacher(&train, &val, &config)?;
    let out = out_dir(&a.common, "teacher")?;
    let ckpt = out.join("teacher.knif");
    outcome.checkpoint.save(&ckpt, &config.hash())?;
    let metrics = out.join("teacher_metrics.jsonl");
    pipeline::write_metrics(&metrics, &outcome.history)?;
    let meta = sidecar(&ckpt);
    Run {
        command: "train-teacher",
        argv,
        config: &config,
        inputs: files,
        outputs: vec![ckpt.clone(), meta, metrics],
        extra: json!({}),
    }
    .write(&out)?;
    print_domains("teacher", &outcome.domains_seen);
    println!(
        "best val accuracy {:.4} at epoch {}; saved {}",
        outcome.checkpoint.val_accuracy,
        outcome.checkpoint.epoch,
        ckpt.display()
    );
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn train_student(a: TrainStudentArgs, argv: &[String]) -> CmdResult {
    let (base, _) = resolve_config(&a.common, Some(&a.train))?;
    let arm = arm_by_name(&a.arm)?;
    let config = arm.configure(&base);
    let teacher = Checkpoint::load(&a.teacher)?;
    let (mut files, sets) = load_data(&a.data.data)?;
    let sets = pipeline::prepare(&sets, &config)?;
    let (train, val) = pipeline::split_train_val(&sets, config.val_fraction, config.seed)?;
    let outcome = pipeline::train_student(&train, &val, &teacher, &config)?;
    let out = out_dir(&a.common, "student")?;
    let ckpt = out.join("student.knif");
    outcome.checkpoint.save(&ckpt, &config.hash())?;
    let metrics = out.join("student_metrics.jsonl");
    pipeline::write_metrics(&metrics, &outcome.history)?;
    files.push(a.teacher.clone());
    Run {
        command: "train-student",
        argv,
        config: &config,
        inputs: files,
        outputs: vec![ckpt.clone(), sidecar(&ckpt), metrics],
        extra: json!({ "arm": arm.name() }),
    }
    .write(&out)?;
    print_domains("student", &outcome.domains_seen);
    println!(
        "{}: best val accuracy {:.4} at epoch {}; saved {}",
        arm.name(),
        outcome.checkpoint.val_accuracy,
        outcome.checkpoint.epoch,
        ckpt.display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs, argv: &[String]) -> CmdResult {
    let (config, _) = resolve_config(&a.common, None)?;
    let ckpt = Checkpoint::load(&a.model)?;
    let (mut files, sets) = load_data(&a.data.data)?;
    let sets = pipeline::prepare(&sets, &config)?;
    let mut table = ResultTable::new();
    for ds in &sets {
        let trials: Vec<_> = ds.trials().iter().map(|(t, _)| t).collect();
        let pred = pipeline::predict(&ckpt, &trials)?;
        let acc = eval::accuracy(&pred, &ds.labels())?;
        println!("{}: accuracy {acc:.4} over {} trials", ds.domain_id(), ds.len());
        table.push(ResultRow {
            method: a.name.clone(),
            held_out: ds.domain_id().into(),
            seed: config.seed,
            accuracy: Ok(acc),
        })?;
    }
    let out = out_dir(&a.common, "eval")?;
    let csv = out.join("results.csv");
    write(&csv, &table.to_csv())?;
    files.push(a.model.clone());
    Run {
        command: "evaluate",
        argv,
        config: &config,
        inputs: files,
        outputs: vec![csv],
        extra: json!({ "name": a.name }),
    }
    .write(&out)?;
    Ok(())
}

fn ablate(a: AblateArgs, argv: &[String]) -> CmdResult {
    let (config, _) = resolve_config(&a.common, Some(&a.train))?;
    let arms = a.arms.iter().map(|n| arm_by_name(n)).collect::<std::result::Result<Vec<_>, _>>()?;
    if a.seeds == 0 {
        return Err(UsageError("--seeds must be at least 1".into()).into());
    }
    let (inputs, raw, source) = if a.data.is_empty() {
        let name = a.preset.clone().unwrap_or_else(|| "phase2x4".into());
        let mut spec = preset_spec(&name)?;
        if let Some(t) = a.trials {
            spec.trials_per_domain = t;
        }
        let sets = data::generate_synthetic(&spec)?;
        (Vec::new(), sets, json!({ "preset": name, "trials_per_domain": spec.trials_per_domain }))
    } else {
        let (files, sets) = load_data(&a.data)?;
        (files, sets, json!({ "preset": null }))
    };
    let sets = pipeline::prepare(&raw, &config)?;
    let seeds: Vec<u64> = (0..a.seeds).map(|i| config.seed.wrapping_add(i)).collect();
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = eval::run_ablation(&sets, &config, &seeds, &arms, jobs)?;

    let out = out_dir(&a.common, "ablation")?;
    let mut outputs = Vec::new();
    let csv = out.join("results.csv");
    write(&csv, &report.table.to_csv())?;
    outputs.push(csv);
    let summary = report.table.summary(Arm::Baseline.name());
    let summary_path = out.join("summary.txt");
    write(&summary_path, &summary)?;
    outputs.push(summary_path);

    let metrics_dir = out.join("metrics");
    std::fs::create_dir_all(&metrics_dir).map_err(|e| Error::io(&metrics_dir, e))?;
    for t in &report.traces {
        let p = metrics_dir.join(format!("{}_s{}_{}.jsonl", t.arm.name(), t.seed, t.held_out));
        pipeline::write_metrics(&p, &t.history)?;
        outputs.push(p);
    }
    for (seed, held_out, history) in &report.teacher_traces {
        let p = metrics_dir.join(format!("teacher_s{seed}_{held_out}.jsonl"));
        pipeline::write_metrics(&p, history)?;
        outputs.push(p);
    }
    for &arm in &arms {
        let histories: Vec<&[EpochMetrics]> = report
            .traces
            .iter()
            .filter(|t| t.arm == arm)
            .map(|t| t.history.as_slice())
            .collect();
        if let Some(svg) = loss_plot(arm.name(), &histories) {
            let p = out.join(format!("losses_{}.svg", arm.name()));
            write(&p, &svg)?;
            outputs.push(p);
        }
    }
    Run {
        command: "ablate",
        argv,
        config: &config,
        inputs,
        outputs,
        extra: json!({
            "data": source,
            "seeds": seeds,
            "arms": arms.iter().map(|a| a.name()).collect::<Vec<_>>(),
        }),
    }
    .write(&out)?;
    print!("{summary}");
    Ok(())
}

/// Mean per-epoch loss components across runs, each scaled by its first
/// epoch so the curves share an axis.
fn loss_plot(arm: &str, histories: &[&[EpochMetrics]]) -> Option<String> {
    let epochs = histories.iter().map(|h| h.len()).min()?;
    if epochs == 0 {
        return None;
    }
    let mean_of = |f: &dyn Fn(&EpochMetrics) -> Option<f64>| -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(epochs);
        for e in 0..epochs {
            let vals: Option<Vec<f64>> = histories.iter().map(|h| f(&h[e])).collect();
            let vals = vals?;
            out.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        let first = out[0];
        (first > 0.0).then(|| out.iter().map(|v| v / first).collect())
    };
    let x: Vec<f64> = (1..=epochs).map(|e| e as f64).collect();
    let mut series = Vec::new();
    for (name, f) in [
        ("classification", &(|m: &EpochMetrics| Some(m.loss_cls)) as &dyn Fn(&EpochMetrics) -> Option<f64>),
        ("distillation", &|m: &EpochMetrics| m.loss_mse),
        ("alignment", &|m: &EpochMetrics| m.loss_align),
    ] {
        if let Some(y) = mean_of(f) {
            series.push(Series { name: name.into(), y });
        }
    }
    Some(
        LinePlot {
            title: format!("{arm}: mean loss relative to epoch 1"),
            x_label: "epoch".into(),
            y_label: "loss / first-epoch loss".into(),
            x,
            series,
        }
        .render(),
    )
}

fn ttest(a: TtestArgs, argv: &[String]) -> CmdResult {
    let (config, _) = resolve_config(&a.common, None)?;
    let mut inputs = Vec::new();
    let (label, result) = if let Some(path) = &a.results {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table = ResultTable::from_csv(&text)?;
        let (ma, mb) = (a.a.clone().unwrap_or_default(), a.b.clone().unwrap_or_default());
        for m in [&ma, &mb] {
            if !table.methods().contains(m) {
                return Err(Error::InvalidInput(format!("method `{m}` not in {}", path.display())).into());
            }
        }
        inputs.push(path.clone());
        (format!("{ma} vs {mb} (per-seed means)"), table.compare(&ma, &mb)?)
    } else if !a.x.is_empty() {
        ("x vs y".to_string(), eval::paired_ttest(&a.x, &a.y)?)
    } else {
        return Err(UsageError("ttest needs --results with --a/--b, or --x with --y".into()).into());
    };
    let line = format!(
        "{label}: mean diff {:+.6}, t = {:.6}, df = {}, p = {:.6} (two-sided)\n",
        result.mean_diff, result.t, result.df, result.p
    );
    print!("{line}");
    if a.common.out.is_some() {
        let out = out_dir(&a.common, "")?;
        let p = out.join("ttest.txt");
        write(&p, &line)?;
        Run {
            command: "ttest",
            argv,
            config: &config,
            inputs,
            outputs: vec![p],
            extra: json!({ "a": a.a, "b": a.b }),
        }
        .write(&out)?;
    }
    Ok(())
}

fn erdplot(a: ErdArgs, argv: &[String]) -> CmdResult {
    let (config, _) = resolve_config(&a.common, None)?;
    let alpha = parse_alpha(a.alpha.as_deref(), &config)?;
    let (inputs, sets, source) = if a.data.is_empty() {
        let name = a.preset.clone().unwrap_or_else(|| "erd2x4".into());
        let sets = data::generate_synthetic(&preset_spec(&name)?)?;
        (Vec::new(), sets, json!(name))
    } else {
        let (files, sets) = load_data(&a.data)?;
        (files, sets, json!(null))
    };
    let recon = eval::transfer_reconstruct(&sets, alpha, rng::derive(config.seed, &[rng::tag("erd")]))?;
    let raw = eval::pool(&sets, "raw")?;
    let transferred = eval::pool(&recon, "transferred")?;
    let channels = if a.channels.is_empty() { (0..raw.n_channels()).collect() } else { a.channels.clone() };
    let band = (a.band[0], a.band[1]);
    let report = eval::erd_ers_report(&raw, &transferred, &channels, band)?;

    let out = out_dir(&a.common, "erd")?;
    let mut outputs = Vec::new();
    let text = report.to_text();
    let p = out.join("erd_report.txt");
    write(&p, &text)?;
    outputs.push(p);
    let p = out.join("erd_series.csv");
    write(&p, &report.series_csv())?;
    outputs.push(p);
    let upper = (band.1 * 3.0).min(raw.fs_hz() / 2.0);
    let keep: Vec<usize> = (0..report.freqs.len()).filter(|&k| report.freqs[k] <= upper).collect();
    for &ch in &channels {
        let mut series = Vec::new();
        for (c, class, [r, t]) in &report.series {
            if *c != ch {
                continue;
            }
            for (kind, psd) in [("raw", r), ("transferred", t)] {
                series.push(Series {
                    name: format!("class {class} {kind}"),
                    y: keep.iter().map(|&k| psd[k].max(1e-300).log10()).collect(),
                });
            }
        }
        let svg = LinePlot {
            title: format!("channel {ch}: class-mean PSD, band {}-{} Hz", band.0, band.1),
            x_label: "frequency (Hz)".into(),
            y_label: "log10 power".into(),
            x: keep.iter().map(|&k| report.freqs[k]).collect(),
            series,
        }
        .render();
        let p = out.join(format!("erd_ch{ch}.svg"));
        write(&p, &svg)?;
        outputs.push(p);
    }
    Run {
        command: "erdplot",
        argv,
        config: &config,
        inputs,
        outputs,
        extra: json!({ "preset": source, "channels": channels, "band_hz": [band.0, band.1], "alpha": alpha.to_string() }),
    }
    .write(&out)?;
    print!("{text}");
    Ok(())
}

fn describe(a: DescribeArgs, argv: &[String]) -> CmdResult {
    let (config, _) = resolve_config(&a.common, None)?;
    let mut text = String::new();
    for path in &a.files {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let _ = writeln!(text, "== {}", path.display());
        if bytes.starts_with(KTRL_MAGIC) {
            let ds = DomainDataset::from_bytes(&bytes)?;
            let _ = write!(text, "{ds}");
        } else if bytes.starts_with(PARAMS_MAGIC) {
            let params = ModelParams::from_bytes(&bytes)?;
            let _ = writeln!(text, "parameters: {} tensors, {} values", params.len(), params.count());
            for (name, t) in params.iter() {
                let _ = writeln!(text, "  {name}: {:?}", t.shape());
            }
            let _ = writeln!(text, "sha256: {}", params.content_hash());
            if sidecar(path).exists() {
                let ckpt = Checkpoint::load(path)?;
                let _ = writeln!(
                    text,
                    "val_accuracy: {}\nepoch: {}\nbackbone: {:?}",
                    ckpt.val_accuracy, ckpt.epoch, ckpt.backbone
                );
            }
        } else {
            return Err(Error::Format(format!("{}: not a KTRL or parameter file", path.display())).into());
        }
    }
    print!("{text}");
    if a.common.out.is_some() {
        let out = out_dir(&a.common, "")?;
        let p = out.join("describe.txt");
        write(&p, &text)?;
        Run {
            command: "describe",
            argv,
            config: &config,
            inputs: a.files.clone(),
            outputs: vec![p],
            extra: json!({}),
        }
        .write(&out)?;
    }
    Ok(())
}
