use std::path::{Path, PathBuf};

use hetesn::bench::{
    compare_variants, generate_mc_task, memory_capacity, synthetic::N_CHANNELS, synthetic_split, BenchTask, MCResult,
    McSplit,
};
use hetesn::dsp::io::{read_feat, read_labels, read_wav, write_feat, write_labels};
use hetesn::dsp::FeatureExtractor;
use hetesn::pipeline::{
    build_reservoir_for, evaluate, grid_search, load_manifest, load_split, mean_std, run_trials, split_by_speaker,
    train_model, write_grid_csv, write_model_csv, write_trial_csv, DatasetManifest, ExperimentConfig, ManifestEntry,
    Split, TrainedModel, TrialResult,
};
use hetesn::readout::RidgeConfig;
use hetesn::reservoir::{spectral_radius, ModelContainer, Variant};
use hetesn::{Error, Result};
use rayon::prelude::*;

use crate::args::{Command, GlobalArgs};

pub fn run(global: &GlobalArgs, command: &Command) -> Result<()> {
    let cfg = load_config(global)?;
    let out = global.out.as_deref();
    match command {
        Command::Extract { input } => extract(&cfg, input, out.unwrap_or(Path::new("features"))),
        Command::Train { data } => {
            let manifest = resolve_manifest(&cfg, data.manifest.as_deref())?;
            train(&cfg, &manifest, out.unwrap_or(Path::new("model.esnm")))
        }
        Command::Eval { data, model } => {
            let manifest = resolve_manifest(&cfg, data.manifest.as_deref())?;
            let out = out.unwrap_or(Path::new("results.csv"));
            match model {
                Some(path) => eval_model(&manifest, path, out),
                None => eval_trials(&cfg, &manifest, out),
            }
        }
        Command::Grid { data } => {
            let manifest = resolve_manifest(&cfg, data.manifest.as_deref())?;
            grid(&cfg, &manifest, out.unwrap_or(Path::new("grid.csv")))
        }
        Command::BenchMc { length, max_lag, min_lag, compare_delays, curve } => bench_mc(
            &cfg,
            McArgs { length: *length, max_lag: *max_lag, min_lag: *min_lag },
            compare_delays.as_deref(),
            curve.as_deref(),
            out.unwrap_or(Path::new("mc.csv")),
        ),
        Command::BenchSynth { classes, train_frames, test_frames, task_seed } => bench_synth(
            &cfg,
            (*classes, *train_frames, *test_frames, *task_seed),
            out.unwrap_or(Path::new("synth.csv")),
        ),
        Command::Inspect { path } => inspect(path),
    }
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &global.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = global.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary(rate: f64) {
    println!("mean_frame_rate={rate:.4}%");
}

/// Loads the manifest and applies a speaker split when the config asks for
/// one; otherwise the manifest's own split column is used.
fn resolve_manifest(cfg: &ExperimentConfig, flag: Option<&Path>) -> Result<DatasetManifest> {
    let path = flag
        .or(cfg.data.manifest.as_deref())
        .ok_or_else(|| Error::config("no manifest: pass --manifest or set data.manifest"))?;
    let manifest = load_manifest(path)?;
    let d = &cfg.data;
    let manifest = match d.train_speakers {
        Some(train_n) => {
            let test_n = d.test_speakers.unwrap_or(manifest.speakers().len().saturating_sub(train_n));
            split_by_speaker(&manifest, train_n, test_n, d.val_fraction, d.split_seed)?
        }
        None => manifest,
    };
    if manifest.entries.iter().all(|e| e.split.is_none()) {
        return Err(Error::config(format!(
            "{} assigns no splits; add a split column or set data.train_speakers",
            path.display()
        )));
    }
    Ok(manifest)
}

fn load(manifest: &DatasetManifest, split: Split, cfg: &ExperimentConfig) -> Result<Vec<hetesn::pipeline::Utterance>> {
    let data = load_split(manifest, split, &cfg.features)?;
    if data.is_empty() {
        return Err(Error::config(format!("the {split} split is empty")));
    }
    log::info!("{split}: {} utterances, {} frames", data.len(), data.iter().map(|u| u.n_frames()).sum::<usize>());
    Ok(data)
}

fn speaker_of(stem: &str) -> &str {
    stem.split(['_', '-']).next().filter(|s| !s.is_empty()).unwrap_or(stem)
}

/// Entries for a directory of WAV files: `<stem>.wav` with `<stem>.lab`,
/// speaker taken from the stem up to the first `_` or `-`.
fn scan_wav_dir(dir: &Path) -> Result<DatasetManifest> {
    let mut wavs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    let entries = wavs
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            ManifestEntry {
                id: stem.clone(),
                label_path: p.with_extension("lab"),
                speaker: speaker_of(&stem).to_string(),
                data_path: p,
                split: None,
            }
        })
        .collect();
    Ok(DatasetManifest { entries })
}

fn extract_one(cfg: &ExperimentConfig, entry: &ManifestEntry, out_dir: &Path) -> Result<ManifestEntry> {
    let signal = read_wav(&entry.data_path)?;
    let features = FeatureExtractor::new(cfg.features.clone(), signal.sample_rate)?.extract(&signal, &entry.id)?;
    let labels = read_labels(&entry.label_path)?;
    if labels.len() != features.n_frames() {
        return Err(Error::Alignment { expected: features.n_frames(), found: labels.len() });
    }
    let feat_path = out_dir.join(format!("{}.feat", entry.id));
    let lab_path = out_dir.join(format!("{}.lab", entry.id));
    write_feat(&feat_path, &features)?;
    write_labels(&lab_path, &labels)?;
    Ok(ManifestEntry { data_path: feat_path, label_path: lab_path, ..entry.clone() })
}

fn extract(cfg: &ExperimentConfig, input: &Path, out_dir: &Path) -> Result<()> {
    let source = if input.is_dir() { scan_wav_dir(input)? } else { load_manifest(input)? };
    if source.entries.is_empty() {
        return Err(Error::config(format!("no WAV files found in {}", input.display())));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let results: Vec<Result<ManifestEntry>> = source
        .entries
        .par_iter()
        .map(|e| extract_one(cfg, e, out_dir).map_err(|err| err.in_utterance(&e.id)))
        .collect();
    let mut entries = Vec::new();
    let mut first_error = None;
    for (entry, r) in source.entries.iter().zip(results) {
        match r {
            Ok(e) => entries.push(e),
            Err(err) => {
                log::error!("{}: {err}", entry.data_path.display());
                first_error.get_or_insert(err);
            }
        }
    }
    let manifest_path = out_dir.join("manifest.tsv");
    DatasetManifest { entries }.write(&manifest_path)?;
    log::info!("wrote {}", manifest_path.display());
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn train(cfg: &ExperimentConfig, manifest: &DatasetManifest, out: &Path) -> Result<()> {
    let data = load(manifest, Split::Train, cfg)?;
    let model = train_model(cfg, cfg.master_seed, &data)?;
    model.save(out)?;
    log::info!("saved {} ({} trainable parameters)", out.display(), model.n_params());
    let validation = load_split(manifest, Split::Validation, &cfg.features)?;
    let (name, scored) = if validation.is_empty() { ("training", &data) } else { ("validation", &validation) };
    let counts = evaluate(&model, scored)?;
    log::info!("{name} frames: {} of {} correct", counts.correct, counts.total);
    summary(counts.rate());
    Ok(())
}

fn eval_model(manifest: &DatasetManifest, path: &Path, out: &Path) -> Result<()> {
    let model = TrainedModel::load(path)?;
    let test = load_split(manifest, Split::Test, &model.feature_config())?;
    if test.is_empty() {
        return Err(Error::config("the test split is empty"));
    }
    let counts = evaluate(&model, &test)?;
    let seed = model.meta.get("trial.seed").and_then(|s| s.parse().ok()).unwrap_or(0);
    let result = TrialResult::from_rates(vec![seed], vec![counts.rate()], None, model.n_params());
    write_model_csv(out, &model, &result)?;
    summary(result.mean);
    Ok(())
}

fn eval_trials(cfg: &ExperimentConfig, manifest: &DatasetManifest, out: &Path) -> Result<()> {
    let train = load(manifest, Split::Train, cfg)?;
    let test = load(manifest, Split::Test, cfg)?;
    let result = run_trials(cfg, &train, &test)?;
    write_trial_csv(out, cfg, &result)?;
    log::info!("rates {:?}, std {:.4}", result.rates, result.std);
    summary(result.mean);
    Ok(())
}

fn grid(cfg: &ExperimentConfig, manifest: &DatasetManifest, out: &Path) -> Result<()> {
    if cfg.grid.is_empty() {
        return Err(Error::config("no grid axes: set grid.<key> = [..] in the config"));
    }
    let train = load(manifest, Split::Train, cfg)?;
    let validation = load(manifest, Split::Validation, cfg)?;
    let rows = grid_search(cfg, &train, &validation)?;
    write_grid_csv(out, &rows)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        log::warn!("{failed} of {} grid points failed", rows.len());
    }
    let best = rows
        .iter()
        .find(|r| r.outcome.is_ok())
        .ok_or_else(|| Error::Numerical { step: 0, msg: "every grid point failed".into() })?;
    let settings: Vec<String> = best.settings.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("best: {}", settings.join(" "));
    summary(best.mean().unwrap_or_default());
    Ok(())
}

struct McArgs {
    length: usize,
    max_lag: usize,
    min_lag: usize,
}

fn bench_mc(
    cfg: &ExperimentConfig,
    a: McArgs,
    compare: Option<&[usize]>,
    curve: Option<&Path>,
    out: &Path,
) -> Result<()> {
    if a.min_lag == 0 || a.min_lag > a.max_lag {
        return Err(Error::config(format!("lag range {}..={} is empty", a.min_lag, a.max_lag)));
    }
    let task = generate_mc_task(a.length, a.max_lag, cfg.master_seed)?;
    let split = McSplit::for_task(&task);
    if let Some(delays) = compare {
        let mut flat = cfg.clone();
        flat.variant = Variant::Shallow;
        flat.n_layers = 1;
        flat.delays = None;
        flat.group_sizes = None;
        let hetero =
            ExperimentConfig { variant: Variant::HeteroShallow, delays: Some(delays.to_vec()), ..flat.clone() };
        let variants = [("shallow".to_string(), flat), (format!("hetero_shallow[{delays:?}]"), hetero)];
        let bench = BenchTask::MemoryCapacity { task, split, lags: a.min_lag..=a.max_lag };
        let report = compare_variants(&bench, &variants, cfg.n_seeds)?;
        report.write_csv(out)?;
        println!("hetero_wins={}/{} mean_mc_diff={:.6}", report.wins[1], report.seeds.len(), report.mean_diff(1));
        return Ok(());
    }
    let ridge = RidgeConfig::new(cfg.gamma)?;
    let results: Vec<(u64, MCResult)> = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.trial_seed(k);
            let reservoir = build_reservoir_for(cfg, 1, seed)?;
            memory_capacity(&reservoir, &task, split, &ridge)
                .map(|r| (seed, r))
                .map_err(|e| Error::Trial { seed, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mut text = String::from("seed,total,score");
    for k in 1..=a.max_lag {
        text.push_str(&format!(",mc_{k}"));
    }
    text.push('\n');
    for (seed, r) in &results {
        text.push_str(&format!("{seed},{:.6},{:.6}", r.total, r.sum_over(a.min_lag..=a.max_lag)));
        for v in &r.per_lag {
            text.push_str(&format!(",{v:.6}"));
        }
        text.push('\n');
    }
    std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
    if let Some(path) = curve {
        let per_lag = (0..a.max_lag).map(|k| mean_std(&results.iter().map(|r| r.1.per_lag[k]).collect::<Vec<_>>()).0);
        let mean = MCResult { per_lag: per_lag.collect(), total: 0.0 };
        mean.write_curve(path)?;
    }
    let totals: Vec<f64> = results.iter().map(|r| r.1.total).collect();
    println!("mean_total_mc={:.6}", mean_std(&totals).0);
    Ok(())
}

fn bench_synth(
    cfg: &ExperimentConfig,
    (classes, train_n, test_n, task_seed): (usize, usize, usize, u64),
    out: &Path,
) -> Result<()> {
    let (train, test) = synthetic_split(classes, train_n, test_n, task_seed)?;
    let mut cfg = cfg.clone();
    cfg.n_classes = classes;
    cfg.features.n_filters = N_CHANNELS;
    let result = run_trials(&cfg, &train.utterances, &test.utterances)?;
    write_trial_csv(out, &cfg, &result)?;
    log::info!("rates {:?}, std {:.4}", result.rates, result.std);
    summary(result.mean);
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"ESNM") {
        let c = ModelContainer::decode(&bytes)?;
        let r = &c.reservoir;
        println!("model: {} with {} inputs, tap {:?}", r.variant(), r.n_in(), r.tap());
        for (i, l) in r.layers().iter().enumerate() {
            let rho = spectral_radius(l.weights.recurrent())?;
            println!(
                "layer {i}: size {}, rho {rho:.9} (target {}), leak {}, delay {}, nnz {}, seed {}",
                l.size(),
                l.config.spectral_radius,
                l.config.leak_rate,
                l.config.delay,
                l.weights.recurrent().nnz(),
                l.config.seed
            );
        }
        if let Some(p) = r.partition() {
            println!("sub-groups: sizes {:?}, delays {:?}", p.sizes(), p.delays());
        }
        match &c.readout {
            Some(w) => {
                println!("readout: {} outputs x {} inputs ({} parameters)", w.n_outputs(), w.input_dim(), w.n_params())
            }
            None => println!("readout: none"),
        }
        for (k, v) in &c.meta {
            println!("{k} = {v}");
        }
    } else if bytes.starts_with(b"FEAT") {
        let f = read_feat(path, "")?;
        println!("features: {} frames x {} channels", f.n_frames(), f.n_features());
        for (j, col) in f.values.column_iter().enumerate() {
            let (m, s) = mean_std(&col.iter().copied().collect::<Vec<_>>());
            println!("channel {j}: mean {m:.6}, std {s:.6}");
        }
    } else {
        let m = load_manifest(path)?;
        println!("manifest: {} utterances, {} speakers", m.entries.len(), m.speakers().len());
        for s in [Split::Train, Split::Validation, Split::Test] {
            println!("{s}: {} utterances, {} speakers", m.split(s).len(), m.speakers_in(s).len());
        }
    }
    Ok(())
}
