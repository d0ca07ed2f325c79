//! Paired comparison of reservoir variants: every variant sees the same
//! seeds and data, and differences are taken seed by seed.

use std::ops::RangeInclusive;
use std::path::Path;

use rayon::prelude::*;

use super::mc::{memory_capacity, MCTask, McSplit};
use crate::error::{Error, Result};
use crate::pipeline::{build_reservoir_for, evaluate, mean_std, train_model, ExperimentConfig, Utterance};
use crate::readout::RidgeConfig;

/// What each variant is scored on.
#[derive(Debug, Clone)]
pub enum BenchTask {
    /// Summed `MC_k` over `lags`.
    MemoryCapacity { task: MCTask, split: McSplit, lags: RangeInclusive<usize> },
    /// Frame recognition rate on `test` after training on `train`.
    Frames { train: Vec<Utterance>, test: Vec<Utterance> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub names: Vec<String>,
    pub seeds: Vec<u64>,
    /// `scores[variant][seed]`.
    pub scores: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// `diffs[variant][seed] = scores[variant][seed] - scores[0][seed]`.
    pub diffs: Vec<Vec<f64>>,
    /// Seeds on which the variant scores strictly above the baseline.
    pub wins: Vec<usize>,
}

impl ComparisonReport {
    pub fn mean_diff(&self, variant: usize) -> f64 {
        mean_std(&self.diffs[variant]).0
    }

    /// One row per variant: name, per-seed scores, mean, mean paired
    /// difference to the baseline and wins.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("variant");
        for s in &self.seeds {
            text.push_str(&format!(",seed_{s}"));
        }
        text.push_str(",mean,mean_diff,wins\n");
        for (v, name) in self.names.iter().enumerate() {
            text.push_str(name);
            for s in &self.scores[v] {
                text.push_str(&format!(",{s:.6}"));
            }
            text.push_str(&format!(",{:.6},{:.6},{}\n", self.means[v], self.mean_diff(v), self.wins[v]));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn score(task: &BenchTask, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    match task {
        BenchTask::MemoryCapacity { task, split, lags } => {
            let reservoir = build_reservoir_for(cfg, 1, seed)?;
            let mc = memory_capacity(&reservoir, task, *split, &RidgeConfig::new(cfg.gamma)?)?;
            Ok(mc.sum_over(lags.clone()))
        }
        BenchTask::Frames { train, test } => Ok(evaluate(&train_model(cfg, seed, train)?, test)?.rate()),
    }
}

/// Scores every variant on seeds `master_seed + k`, `k < n_seeds`, where
/// `master_seed` is taken from the first variant. The first variant is the
/// baseline for differences and wins.
pub fn compare_variants(
    task: &BenchTask,
    variants: &[(String, ExperimentConfig)],
    n_seeds: usize,
) -> Result<ComparisonReport> {
    if variants.len() < 2 {
        return Err(Error::config("a comparison needs at least 2 variants"));
    }
    if n_seeds == 0 {
        return Err(Error::config("a comparison needs at least 1 seed"));
    }
    let seeds: Vec<u64> = (0..n_seeds).map(|k| variants[0].1.trial_seed(k)).collect();
    let jobs: Vec<(usize, u64)> = (0..variants.len()).flat_map(|v| seeds.iter().map(move |&s| (v, s))).collect();
    let flat: Vec<f64> = jobs
        .par_iter()
        .map(|&(v, seed)| score(task, &variants[v].1, seed).map_err(|e| Error::Trial { seed, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    let scores: Vec<Vec<f64>> = flat.chunks(n_seeds).map(<[f64]>::to_vec).collect();
    let means = scores.iter().map(|s| mean_std(s).0).collect();
    let diffs: Vec<Vec<f64>> = scores.iter().map(|s| s.iter().zip(&scores[0]).map(|(a, b)| a - b).collect()).collect();
    let wins = diffs.iter().map(|d| d.iter().filter(|&&x| x > 0.0).count()).collect();
    Ok(ComparisonReport { names: variants.iter().map(|v| v.0.clone()).collect(), seeds, scores, means, diffs, wins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::mc::generate_mc_task;
    use crate::reservoir::Variant;

    fn mc_task() -> BenchTask {
        let task = generate_mc_task(1500, 10, 1).unwrap();
        let split = McSplit::for_task(&task);
        BenchTask::MemoryCapacity { task, split, lags: 1..=10 }
    }

    fn small(variant: Variant) -> ExperimentConfig {
        let mut c = ExperimentConfig { variant, ..Default::default() };
        c.layer.size = 30;
        if variant == Variant::HeteroShallow {
            c.delays = Some(vec![0, 2, 4]);
        }
        c
    }

    #[test]
    fn identical_variants_have_zero_differences() {
        let v = vec![("a".to_string(), small(Variant::Shallow)), ("b".to_string(), small(Variant::Shallow))];
        let r = compare_variants(&mc_task(), &v, 3).unwrap();
        assert_eq!(r.diffs[1], vec![0.0; 3]);
        assert_eq!(r.wins, vec![0, 0]);
        assert_eq!(r.mean_diff(1), 0.0);
    }

    #[test]
    fn differences_are_paired_by_seed() {
        let v = vec![("flat".to_string(), small(Variant::Shallow)), ("het".to_string(), small(Variant::HeteroShallow))];
        let r = compare_variants(&mc_task(), &v, 3).unwrap();
        for k in 0..3 {
            assert_eq!(r.diffs[1][k], r.scores[1][k] - r.scores[0][k]);
        }
        assert_eq!(r.seeds, vec![0, 1, 2]);
    }

    #[test]
    fn needs_two_variants() {
        let v = vec![("a".to_string(), small(Variant::Shallow))];
        assert!(compare_variants(&mc_task(), &v, 3).is_err());
    }
}
