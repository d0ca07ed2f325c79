//! Training, frame-level evaluation and seed-averaged trials.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::dsp::features::{stack_rows, FeatureConfig, FeatureExtractor};
use crate::dsp::io::{read_feat, read_labels, read_wav};
use crate::error::{Error, Result};
use crate::readout::{assemble_rows, classify, predict_rows, ReadoutWeights, RidgeAccumulator, RidgeConfig};
use crate::reservoir::{ModelContainer, Reservoir};

/// Frame features (`T x n_features`, before context stacking) and their
/// labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub features: DMatrix<f64>,
    pub labels: Vec<u32>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, features: DMatrix<f64>, labels: Vec<u32>) -> Result<Self> {
        let id = id.into();
        if features.nrows() != labels.len() {
            return Err(Error::Alignment { expected: features.nrows(), found: labels.len() }.in_utterance(&id));
        }
        Ok(Self { id, features, labels })
    }

    pub fn n_frames(&self) -> usize {
        self.labels.len()
    }
}

fn is_wav(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Loads one manifest entry. `.wav` files go through the feature extractor;
/// anything else is read as a feature file.
pub fn load_utterance(entry: &ManifestEntry, features: &FeatureConfig) -> Result<Utterance> {
    let load = || -> Result<Utterance> {
        let fm = if is_wav(&entry.data_path) {
            let signal = read_wav(&entry.data_path)?;
            FeatureExtractor::new(features.clone(), signal.sample_rate)?.extract(&signal, &entry.id)?
        } else {
            read_feat(&entry.data_path, &entry.id)?
        };
        let labels = read_labels(&entry.label_path)?;
        if labels.len() != fm.n_frames() {
            return Err(Error::Alignment { expected: fm.n_frames(), found: labels.len() });
        }
        Ok(Utterance { id: entry.id.clone(), features: fm.values, labels })
    };
    load().map_err(|e| e.in_utterance(&entry.id))
}

/// Loads every utterance of a split, in manifest order.
pub fn load_split(manifest: &DatasetManifest, split: Split, features: &FeatureConfig) -> Result<Vec<Utterance>> {
    manifest.split(split).par_iter().map(|e| load_utterance(e, features)).collect()
}

/// A reservoir with its trained readout and the framing needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub reservoir: Reservoir,
    pub readout: ReadoutWeights,
    pub context_width: usize,
    pub context_center: usize,
    pub washout: usize,
    pub n_classes: usize,
    /// Extra settings carried into the container (feature front-end, seed).
    pub meta: BTreeMap<String, String>,
}

/// Samples the reservoir of one trial, sized for context-stacked features.
pub fn build_reservoir(cfg: &ExperimentConfig, trial_seed: u64) -> Result<Reservoir> {
    build_reservoir_for(cfg, cfg.input_dim(), trial_seed)
}

/// Samples a reservoir from `cfg` for an arbitrary input dimension.
pub fn build_reservoir_for(cfg: &ExperimentConfig, n_in: usize, trial_seed: u64) -> Result<Reservoir> {
    cfg.validate()?;
    Ok(Reservoir::build(cfg.variant, n_in, &cfg.layer_configs(trial_seed), cfg.partition()?)?.with_tap(cfg.tap))
}

/// `[context rows | states]` for one utterance, after `washout` frames.
fn design_rows(
    reservoir: &Reservoir,
    features: &DMatrix<f64>,
    width: usize,
    center: usize,
    washout: usize,
) -> Result<DMatrix<f64>> {
    let ctx = stack_rows(features, width, center)?;
    let states = reservoir.run_sequence(&ctx.rows, washout)?;
    let t = ctx.rows.nrows();
    assemble_rows(&ctx.rows.rows(washout, t - washout).into_owned(), &states)
}

/// Trains a readout on top of a fixed reservoir. Utterances are processed
/// in parallel in fixed-size chunks and summed in manifest order, so the
/// result does not depend on the number of threads.
pub fn train_readout(reservoir: Reservoir, cfg: &ExperimentConfig, train: &[Utterance]) -> Result<TrainedModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set has no utterances".into()));
    }
    let (width, center) = (cfg.context_width, cfg.center());
    let dim = cfg.input_dim() + reservoir.state_dim();
    let mut acc = RidgeAccumulator::new(dim, cfg.n_classes);
    const CHUNK: usize = 16;
    for chunk in train.chunks(CHUNK) {
        let rows: Vec<Option<DMatrix<f64>>> = chunk
            .par_iter()
            .map(|u| {
                if u.n_frames() <= cfg.washout {
                    log::warn!("utterance {}: {} frames do not outlast the washout, skipped", u.id, u.n_frames());
                    return Ok(None);
                }
                design_rows(&reservoir, &u.features, width, center, cfg.washout)
                    .map(Some)
                    .map_err(|e| e.in_utterance(&u.id))
            })
            .collect::<Result<_>>()?;
        for (u, z) in chunk.iter().zip(rows) {
            if let Some(z) = z {
                acc.add_labeled(&z, &u.labels[cfg.washout..]).map_err(|e| e.in_utterance(&u.id))?;
            }
        }
    }
    let readout = acc.solve(&RidgeConfig::new(cfg.gamma)?)?;
    let mut meta = BTreeMap::new();
    let f = &cfg.features;
    meta.insert("features.frame_ms".into(), f.frame.frame_ms.to_string());
    meta.insert("features.overlap_ms".into(), f.frame.overlap_ms.to_string());
    if let Some(n) = f.frame.fft_size {
        meta.insert("features.fft_size".into(), n.to_string());
    }
    meta.insert("features.n_filters".into(), f.n_filters.to_string());
    meta.insert("features.log_floor".into(), f.log_floor.to_string());
    meta.insert("features.normalize".into(), f.normalize.to_string());
    meta.insert("ridge.gamma".into(), cfg.gamma.to_string());
    Ok(TrainedModel {
        reservoir,
        readout,
        context_width: width,
        context_center: center,
        washout: cfg.washout,
        n_classes: cfg.n_classes,
        meta,
    })
}

/// Samples a reservoir from `trial_seed` and trains its readout.
pub fn train_model(cfg: &ExperimentConfig, trial_seed: u64, train: &[Utterance]) -> Result<TrainedModel> {
    let reservoir = build_reservoir(cfg, trial_seed)?;
    let mut model = train_readout(reservoir, cfg, train)?;
    model.meta.insert("trial.seed".into(), trial_seed.to_string());
    Ok(model)
}

const KEY_WIDTH: &str = "features.context_width";
const KEY_CENTER: &str = "features.context_center";
const KEY_WASHOUT: &str = "train.washout";
const KEY_CLASSES: &str = "data.n_classes";

impl TrainedModel {
    /// Trainable parameters: the entries of `W_out`.
    pub fn n_params(&self) -> usize {
        self.readout.n_params()
    }

    /// Frame features expected per row before context stacking.
    pub fn n_features(&self) -> usize {
        self.reservoir.n_in() / self.context_width
    }

    /// One class per frame. Every frame is scored; the washout only applies
    /// to training.
    pub fn predict_frames(&self, features: &DMatrix<f64>) -> Result<Vec<u32>> {
        if features.ncols() * self.context_width != self.reservoir.n_in() {
            return Err(Error::shape(format!(
                "model expects {} features per frame, data has {}",
                self.n_features(),
                features.ncols()
            )));
        }
        let z = design_rows(&self.reservoir, features, self.context_width, self.context_center, 0)?;
        let scores = predict_rows(&self.readout, &z)?;
        scores.row_iter().map(|r| classify(&r.iter().copied().collect::<Vec<_>>()).map(|c| c as u32)).collect()
    }

    pub fn to_container(&self) -> ModelContainer {
        let mut meta = self.meta.clone();
        meta.insert(KEY_WIDTH.into(), self.context_width.to_string());
        meta.insert(KEY_CENTER.into(), self.context_center.to_string());
        meta.insert(KEY_WASHOUT.into(), self.washout.to_string());
        meta.insert(KEY_CLASSES.into(), self.n_classes.to_string());
        ModelContainer { reservoir: self.reservoir.clone(), readout: Some(self.readout.clone()), meta }
    }

    pub fn from_container(c: ModelContainer) -> Result<Self> {
        let readout = c.readout.ok_or_else(|| Error::Format { kind: "ESNM1", msg: "model has no readout".into() })?;
        let get = |k: &str| -> Result<usize> {
            c.meta
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format { kind: "ESNM1", msg: format!("missing or invalid metadata {k}") })
        };
        let (context_width, context_center, washout, n_classes) =
            (get(KEY_WIDTH)?, get(KEY_CENTER)?, get(KEY_WASHOUT)?, get(KEY_CLASSES)?);
        if context_width == 0 || context_center >= context_width || !c.reservoir.n_in().is_multiple_of(context_width) {
            return Err(Error::Format { kind: "ESNM1", msg: "context framing disagrees with the reservoir".into() });
        }
        if readout.n_outputs() != n_classes || readout.input_dim() != c.reservoir.n_in() + c.reservoir.state_dim() {
            return Err(Error::Format { kind: "ESNM1", msg: "readout shape disagrees with the reservoir".into() });
        }
        let mut meta = c.meta;
        for k in [KEY_WIDTH, KEY_CENTER, KEY_WASHOUT, KEY_CLASSES] {
            meta.remove(k);
        }
        Ok(Self { reservoir: c.reservoir, readout, context_width, context_center, washout, n_classes, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(ModelContainer::load(path)?)
    }

    /// Front-end settings recorded at training time (defaults for anything
    /// missing).
    pub fn feature_config(&self) -> FeatureConfig {
        let mut f = FeatureConfig::default();
        let get = |k: &str| self.meta.get(k);
        if let Some(v) = get("features.frame_ms").and_then(|v| v.parse().ok()) {
            f.frame.frame_ms = v;
        }
        if let Some(v) = get("features.overlap_ms").and_then(|v| v.parse().ok()) {
            f.frame.overlap_ms = v;
        }
        f.frame.fft_size = get("features.fft_size").and_then(|v| v.parse().ok());
        if let Some(v) = get("features.n_filters").and_then(|v| v.parse().ok()) {
            f.n_filters = v;
        }
        if let Some(v) = get("features.log_floor").and_then(|v| v.parse().ok()) {
            f.log_floor = v;
        }
        if let Some(v) = get("features.normalize").and_then(|v| v.parse().ok()) {
            f.normalize = v;
        }
        f
    }
}

/// `100 * matches / len`.
pub fn frame_recognition_rate(predicted: &[u32], reference: &[u32]) -> Result<f64> {
    if predicted.len() != reference.len() {
        return Err(Error::Alignment { expected: reference.len(), found: predicted.len() });
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput("no frames to score".into()));
    }
    let hits = predicted.iter().zip(reference).filter(|(a, b)| a == b).count();
    Ok(100.0 * hits as f64 / reference.len() as f64)
}

/// Pooled frame counts over a test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalCounts {
    pub correct: usize,
    pub total: usize,
}

impl EvalCounts {
    /// Micro-averaged rate in percent.
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

/// Scores every frame of every utterance and pools the counts, so longer
/// utterances weigh more (micro-average).
pub fn evaluate(model: &TrainedModel, test: &[Utterance]) -> Result<EvalCounts> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test set has no utterances".into()));
    }
    let per: Vec<EvalCounts> = test
        .par_iter()
        .map(|u| {
            let pred = model.predict_frames(&u.features).map_err(|e| e.in_utterance(&u.id))?;
            let correct = pred.iter().zip(&u.labels).filter(|(a, b)| a == b).count();
            Ok(EvalCounts { correct, total: u.n_frames() })
        })
        .collect::<Result<_>>()?;
    Ok(per
        .iter()
        .fold(EvalCounts::default(), |a, c| EvalCounts { correct: a.correct + c.correct, total: a.total + c.total }))
}

/// Per-seed rates and their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seeds: Vec<u64>,
    /// Frame recognition rates in percent, one per seed.
    pub rates: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std: f64,
    /// Mean wall-clock training seconds per seed; `None` when no training
    /// happened (evaluation of a saved model).
    pub train_seconds: Option<f64>,
    pub n_params: usize,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl TrialResult {
    pub fn from_rates(seeds: Vec<u64>, rates: Vec<f64>, train_seconds: Option<f64>, n_params: usize) -> Self {
        let (mean, std) = mean_std(&rates);
        Self { seeds, rates, mean, std, train_seconds, n_params }
    }
}

/// Trains and evaluates `cfg.n_seeds` independent reservoirs, trial `k`
/// using seed `master_seed + k`. Trials run in parallel on the current rayon
/// pool; results are reported in seed order.
pub fn run_trials(cfg: &ExperimentConfig, train: &[Utterance], test: &[Utterance]) -> Result<TrialResult> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.n_seeds).map(|k| cfg.trial_seed(k)).collect();
    let outcomes: Vec<(f64, f64, usize)> = seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> Result<(f64, f64, usize)> {
                let start = Instant::now();
                let model = train_model(cfg, seed, train)?;
                let secs = start.elapsed().as_secs_f64();
                let counts = evaluate(&model, test)?;
                log::info!("seed {seed}: {:.2}% of {} frames", counts.rate(), counts.total);
                Ok((counts.rate(), secs, model.n_params()))
            };
            run().map_err(|e| Error::Trial { seed, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let rates = outcomes.iter().map(|o| o.0).collect();
    let secs = outcomes.iter().map(|o| o.1).sum::<f64>() / outcomes.len() as f64;
    Ok(TrialResult::from_rates(seeds, rates, Some(secs), outcomes[0].2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::Variant;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toy_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n_classes: 3,
            context_width: 1,
            n_seeds: 2,
            layer: crate::reservoir::LayerConfig { size: 20, ..Default::default() },
            features: FeatureConfig { n_filters: 2, ..Default::default() },
            ..Default::default()
        }
    }

    /// Class `c` frames sit near a fixed point, so any reservoir separates them.
    fn toy_utterance(id: &str, labels: &[u32]) -> Utterance {
        let f = DMatrix::from_fn(labels.len(), 2, |t, j| {
            let c = labels[t] as f64;
            if j == 0 {
                c
            } else {
                1.0 - c
            }
        });
        Utterance::new(id, f, labels.to_vec()).unwrap()
    }

    #[test]
    fn rates() {
        assert_eq!(frame_recognition_rate(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        assert_eq!(frame_recognition_rate(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(frame_recognition_rate(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 75.0);
        assert!(frame_recognition_rate(&[1], &[1, 2]).is_err());
        assert!(frame_recognition_rate(&[], &[]).is_err());
    }

    #[test]
    fn mean_std_single_and_many() {
        assert_eq!(mean_std(&[42.0]), (42.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5);
        assert_abs_diff_eq!(s, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn trains_a_separable_toy_task_to_perfection() {
        let cfg = toy_cfg();
        let train = vec![toy_utterance("a", &[0, 0, 1, 1, 2, 2, 0, 1, 2]), toy_utterance("b", &[2, 2, 1, 0])];
        let model = train_model(&cfg, 3, &train).unwrap();
        assert_eq!(evaluate(&model, &train).unwrap().rate(), 100.0);
        assert_eq!(model.n_params(), 3 * (2 + 20));
        let again = train_model(&cfg, 3, &train).unwrap();
        assert_eq!(model.readout, again.readout);
    }

    #[test]
    fn container_roundtrip_preserves_predictions() {
        let cfg = ExperimentConfig { variant: Variant::HeteroShallow, ..toy_cfg() };
        let train = vec![toy_utterance("a", &[0, 1, 2, 2, 1, 0])];
        let model = train_model(&cfg, 1, &train).unwrap();
        let back =
            TrainedModel::from_container(ModelContainer::decode(&model.to_container().encode()).unwrap()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.feature_config().n_filters, 2);
    }

    #[test]
    fn washout_shortens_training_rows() {
        let cfg = ExperimentConfig { washout: 3, ..toy_cfg() };
        let train = vec![toy_utterance("a", &[0, 1, 2, 2, 1, 0, 1]), toy_utterance("short", &[1, 2])];
        let model = train_model(&cfg, 1, &train).unwrap();
        // All frames are scored at evaluation time.
        assert_eq!(evaluate(&model, &train).unwrap().total, 9);
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let cfg = toy_cfg();
        let model = train_model(&cfg, 1, &[toy_utterance("a", &[0, 1, 2])]).unwrap();
        let wrong = Utterance::new("w", DMatrix::zeros(3, 5), vec![0, 0, 0]).unwrap();
        let e = evaluate(&model, &[wrong]).unwrap_err();
        assert!(e.is_config(), "{e}");
    }

    #[test]
    fn micro_average_weights_by_frames() {
        // 10 frames all right, 90 frames all wrong: pooled 10%, not 50%.
        let cfg = toy_cfg();
        let model = train_model(&cfg, 1, &[toy_utterance("a", &[0, 1, 2, 0, 1, 2])]).unwrap();
        let mut right = toy_utterance("r", &[1; 10]);
        right.labels = model.predict_frames(&right.features).unwrap();
        let mut wrong = toy_utterance("w", &[1; 90]);
        wrong.labels = model.predict_frames(&wrong.features).unwrap().iter().map(|c| (c + 1) % 3).collect();
        let c = evaluate(&model, &[right, wrong]).unwrap();
        assert_eq!((c.correct, c.total), (10, 100));
        assert_abs_diff_eq!(c.rate(), 10.0);
    }

    #[test]
    fn trials_are_reproducible_and_wrap_seed_errors() {
        let cfg = toy_cfg();
        let data = vec![toy_utterance("a", &[0, 1, 2, 2, 1, 0])];
        let a = run_trials(&cfg, &data, &data).unwrap();
        let b = run_trials(&cfg, &data, &data).unwrap();
        assert_eq!((a.seeds.clone(), a.rates.clone()), (b.seeds, b.rates));
        assert_eq!(a.seeds, vec![0, 1]);
        let bad = Utterance::new("bad", DMatrix::zeros(2, 2), vec![0, 7]).unwrap();
        let e = run_trials(&cfg, &[bad], &data).unwrap_err();
        assert!(matches!(e, Error::Trial { seed: 0, .. }), "{e}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pooled_rate_equals_rate_of_concatenation(
            lens in proptest::collection::vec(1usize..20, 1..5),
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut r = crate::rng::seeded(seed);
            let cfg = toy_cfg();
            let model = train_model(&cfg, 2, &[toy_utterance("a", &[0, 1, 2, 0, 1, 2])]).unwrap();
            let set: Vec<Utterance> = lens
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let labels: Vec<u32> = (0..n).map(|_| r.random_range(0..3)).collect();
                    let mut u = toy_utterance(&i.to_string(), &labels);
                    u.labels = (0..n).map(|_| r.random_range(0..3)).collect();
                    u
                })
                .collect();
            let pooled = evaluate(&model, &set).unwrap().rate();
            let mut pred = Vec::new();
            let mut refs = Vec::new();
            for u in &set {
                pred.extend(model.predict_frames(&u.features).unwrap());
                refs.extend(u.labels.iter().copied());
            }
            prop_assert_eq!(pooled, frame_recognition_rate(&pred, &refs).unwrap());
        }
    }
}
