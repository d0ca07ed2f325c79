//! The short-term memory-capacity task: recall the input `k` steps back
//! with a linear readout, scored by squared correlation on held-out data.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::readout::{assemble_rows, predict_rows, RidgeAccumulator, RidgeConfig};
use crate::reservoir::{CsrMatrix, Layer, LayerConfig, LayerWeights, Reservoir, Variant};
use crate::rng;

/// Default half-width of the uniform input.
pub const DEFAULT_AMPLITUDE: f64 = 0.8;

/// An i.i.d. uniform scalar input sequence and the largest lag to recall.
#[derive(Debug, Clone, PartialEq)]
pub struct MCTask {
    pub input: Vec<f64>,
    pub max_lag: usize,
    pub seed: u64,
}

/// `T` values uniform on `[-0.8, 0.8]`. Requires `T >= 10 K`.
pub fn generate_mc_task(t: usize, max_lag: usize, seed: u64) -> Result<MCTask> {
    generate_mc_task_with(t, max_lag, seed, DEFAULT_AMPLITUDE)
}

pub fn generate_mc_task_with(t: usize, max_lag: usize, seed: u64, amplitude: f64) -> Result<MCTask> {
    if max_lag == 0 {
        return Err(Error::config("memory capacity needs a maximum lag of at least 1"));
    }
    if t < 10 * max_lag {
        return Err(Error::config(format!("sequence length {t} below 10 x max lag {max_lag}")));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::config(format!("input amplitude {amplitude} must be positive")));
    }
    let mut r = rng::seeded(seed);
    let input = (0..t).map(|_| r.random_range(-amplitude..=amplitude)).collect();
    Ok(MCTask { input, max_lag, seed })
}

/// How the sequence is cut: the first `washout` steps are discarded (they
/// also guarantee every target `u(t-k)` exists), the next `train_len` fit
/// the readout and the rest are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSplit {
    pub washout: usize,
    pub train_len: usize,
}

impl McSplit {
    /// Washout `max(K, 100)`, then half of the remainder for training.
    pub fn for_task(task: &MCTask) -> Self {
        let washout = task.max_lag.max(100).min(task.input.len() / 4);
        Self { washout, train_len: (task.input.len() - washout) / 2 }
    }

    fn check(&self, task: &MCTask) -> Result<()> {
        if self.washout < task.max_lag {
            return Err(Error::config(format!("washout {} shorter than max lag {}", self.washout, task.max_lag)));
        }
        if self.train_len == 0 || self.washout + self.train_len + 2 > task.input.len() {
            return Err(Error::config(format!(
                "washout {} + training {} leave too few test steps of {}",
                self.washout,
                self.train_len,
                task.input.len()
            )));
        }
        Ok(())
    }
}

/// Per-lag scores `MC_k`, `k = 1..K`, and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MCResult {
    pub per_lag: Vec<f64>,
    pub total: f64,
}

impl MCResult {
    fn new(per_lag: Vec<f64>) -> Self {
        let total = per_lag.iter().sum();
        Self { per_lag, total }
    }

    /// Sum of `MC_k` over `lags` (1-based, inclusive).
    pub fn sum_over(&self, lags: std::ops::RangeInclusive<usize>) -> f64 {
        lags.filter_map(|k| k.checked_sub(1).and_then(|i| self.per_lag.get(i))).sum()
    }

    /// Writes `lag,score` lines with a header.
    pub fn write_curve(&self, path: &std::path::Path) -> Result<()> {
        let mut text = String::from("lag,mc\n");
        for (i, v) in self.per_lag.iter().enumerate() {
            text.push_str(&format!("{},{v:.9}\n", i + 1));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Squared Pearson correlation; 0 when either side has no variance.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let tiny = 1e-24 * n as f64;
    if saa <= tiny || sbb <= tiny {
        return 0.0;
    }
    (sab * sab / (saa * sbb)).clamp(0.0, 1.0)
}

/// Trains one linear readout per lag on `[u(t); x(t)]` and scores it on the
/// held-out part of the sequence.
pub fn memory_capacity(reservoir: &Reservoir, task: &MCTask, split: McSplit, ridge: &RidgeConfig) -> Result<MCResult> {
    mc_impl(reservoir, task, split, ridge, None)
}

/// Null model: the same readouts fitted and scored against targets
/// permuted in time, which destroys any relation to the state.
pub fn memory_capacity_shuffled(
    reservoir: &Reservoir,
    task: &MCTask,
    split: McSplit,
    ridge: &RidgeConfig,
    shuffle_seed: u64,
) -> Result<MCResult> {
    mc_impl(reservoir, task, split, ridge, Some(shuffle_seed))
}

fn mc_impl(
    reservoir: &Reservoir,
    task: &MCTask,
    split: McSplit,
    ridge: &RidgeConfig,
    shuffle: Option<u64>,
) -> Result<MCResult> {
    split.check(task)?;
    if reservoir.n_in() != 1 {
        return Err(Error::shape(format!("memory capacity drives 1 input, reservoir takes {}", reservoir.n_in())));
    }
    let t = task.input.len();
    let k_max = task.max_lag;
    let inputs = DMatrix::from_column_slice(t, 1, &task.input);
    let states = reservoir.run_sequence(&inputs, split.washout)?;
    let z = assemble_rows(&inputs.rows(split.washout, t - split.washout).into_owned(), &states)?;
    // Row r of z is time washout + r; target column k-1 holds u(t - k).
    let mut y = DMatrix::from_fn(z.nrows(), k_max, |r, k| task.input[split.washout + r - (k + 1)]);
    let (n_train, n_test) = (split.train_len, z.nrows() - split.train_len);
    if let Some(seed) = shuffle {
        let mut r = rng::seeded(seed);
        for (start, len) in [(0, n_train), (n_train, n_test)] {
            let mut perm: Vec<usize> = (start..start + len).collect();
            perm.shuffle(&mut r);
            let block = y.rows(start, len).into_owned();
            for (i, &p) in perm.iter().enumerate() {
                y.row_mut(p).copy_from(&block.row(i));
            }
        }
    }
    let mut acc = RidgeAccumulator::new(z.ncols(), k_max);
    acc.add_rows(&z.rows(0, n_train).into_owned(), &y.rows(0, n_train).into_owned())?;
    let w = acc.solve(ridge)?;
    let pred = predict_rows(&w, &z.rows(n_train, n_test).into_owned())?;
    let per_lag = (0..k_max)
        .map(|k| {
            let p: Vec<f64> = pred.column(k).iter().copied().collect();
            let target: Vec<f64> = y.column(k).rows(n_train, n_test).iter().copied().collect();
            squared_correlation(&p, &target)
        })
        .collect();
    Ok(MCResult::new(per_lag))
}

/// A `K + 1` register shift line: neuron 0 receives `0.01 u(t)` and neuron
/// `i` copies neuron `i - 1` from the previous step, with leak 1. The small
/// input gain keeps `tanh` near-linear, so neuron `k` holds `u(t - k)`
/// almost exactly.
pub fn delay_line_reservoir(max_lag: usize) -> Result<Reservoir> {
    let n = max_lag + 1;
    let triplets: Vec<(u32, u32, f64)> = (1..n).map(|i| (i as u32, (i - 1) as u32, 1.0)).collect();
    let w = CsrMatrix::from_triplets(n, n, &triplets)?;
    let mut w_in = DMatrix::zeros(n, 1);
    w_in[(0, 0)] = 0.01;
    let weights = LayerWeights::new(w, w_in, vec![0.0; n])?;
    // The shift is nilpotent; the recorded radius is nominal.
    let config = LayerConfig {
        size: n,
        spectral_radius: 1.0,
        leak_rate: 1.0,
        input_scale: 0.01,
        bias_scale: 0.0,
        connectivity: 1.0,
        ..LayerConfig::default()
    };
    Reservoir::from_layers(Variant::Shallow, 1, vec![Layer { config, weights }], None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::LayerConfig;

    fn shallow(n: usize, seed: u64) -> Reservoir {
        let cfg = LayerConfig { size: n, seed, ..Default::default() };
        Reservoir::build(Variant::Shallow, 1, &[cfg], None).unwrap()
    }

    #[test]
    fn task_generation() {
        let a = generate_mc_task(1000, 10, 4).unwrap();
        assert_eq!(a, generate_mc_task(1000, 10, 4).unwrap());
        assert!(a.input.iter().all(|v| v.abs() <= 0.8));
        // Uniform on [-0.8, 0.8] has sd 0.8/sqrt(3); the mean of 1000 draws
        // has sd 0.8/sqrt(3000).
        let mean = a.input.iter().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 3.0 * 0.8 / 3000f64.sqrt(), "{mean}");
        assert!(generate_mc_task(99, 10, 0).is_err());
    }

    #[test]
    fn correlation_oracle() {
        assert!((squared_correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((squared_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(squared_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        // x = (1,2,3,4), y = (1,3,2,4): cov 1.0, var_x = var_y = 1.25 -> r = 0.8.
        assert!((squared_correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn delay_line_recalls_exactly_its_lags() {
        let k = 8;
        let task = generate_mc_task(2000, k + 4, 1).unwrap();
        let res = memory_capacity(
            &delay_line_reservoir(k).unwrap(),
            &task,
            McSplit::for_task(&task),
            &RidgeConfig::new(1e-8).unwrap(),
        )
        .unwrap();
        for (i, v) in res.per_lag.iter().enumerate() {
            if i < k {
                assert!(*v >= 0.99, "lag {}: {v}", i + 1);
            } else {
                assert!(*v < 0.05, "lag {}: {v}", i + 1);
            }
        }
    }

    #[test]
    fn scores_are_bounded_and_nulls_vanish() {
        let task = generate_mc_task(3000, 30, 2).unwrap();
        let split = McSplit::for_task(&task);
        let res = shallow(50, 3);
        let ridge = RidgeConfig::default();
        let mc = memory_capacity(&res, &task, split, &ridge).unwrap();
        assert!(mc.per_lag.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(mc.total <= 50.0 * 1.05);
        assert!(mc.per_lag[0] > 0.5, "{:?}", mc.per_lag);
        let null = memory_capacity_shuffled(&res, &task, split, &ridge, 9).unwrap();
        assert!(null.per_lag.iter().all(|v| *v <= 0.05), "{:?}", null.per_lag);
    }

    #[test]
    fn total_is_monotone_in_max_lag_on_fixed_data() {
        let res = shallow(30, 5);
        let base = generate_mc_task(2000, 20, 6).unwrap();
        let split = McSplit { washout: 100, train_len: 900 };
        let mut last = 0.0;
        for k in [1, 2, 5, 10, 20] {
            let task = MCTask { max_lag: k, ..base.clone() };
            let mc = memory_capacity(&res, &task, split, &RidgeConfig::default()).unwrap();
            assert!(mc.total >= last - 1e-12);
            last = mc.total;
        }
    }

    #[test]
    fn rejects_bad_splits_and_inputs() {
        let task = generate_mc_task(500, 10, 0).unwrap();
        let res = shallow(10, 0);
        let r = RidgeConfig::default();
        assert!(memory_capacity(&res, &task, McSplit { washout: 5, train_len: 100 }, &r).is_err());
        assert!(memory_capacity(&res, &task, McSplit { washout: 10, train_len: 490 }, &r).is_err());
        let two = Reservoir::build(Variant::Shallow, 2, &[LayerConfig::default()], None).unwrap();
        assert!(memory_capacity(&two, &task, McSplit::for_task(&task), &r).unwrap_err().is_config());
    }
}
