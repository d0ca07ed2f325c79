//! A synthetic frame-labelled classification task shaped like the speech
//! setting: 18-channel frames, contiguous class segments of 20-50 frames,
//! segments shuffled into utterances.
//!
//! Each class drives every channel with its own stationary AR(2) process of
//! unit variance, offset by a class-specific mean. The mean separation is
//! small against the noise so single frames are ambiguous and temporal
//! context matters.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::pipeline::Utterance;
use crate::rng;

pub const N_CHANNELS: usize = 18;
pub const MIN_SEGMENT: usize = 20;
pub const MAX_SEGMENT: usize = 50;
/// Standard deviation of the class means, per channel.
pub const MEAN_SPREAD: f64 = 0.35;
const SEGMENTS_PER_UTTERANCE: usize = 8;
const BURN_IN: usize = 50;

/// AR(2) parameters of one class and channel:
/// `s(t) = a1 s(t-1) + a2 s(t-2) + sigma e(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArChannel {
    pub mean: f64,
    pub a1: f64,
    pub a2: f64,
    pub sigma: f64,
}

impl ArChannel {
    /// Poles at `r e^{+-i w}`, noise scaled for unit stationary variance.
    pub fn from_poles(mean: f64, r: f64, w: f64) -> Self {
        let (a1, a2) = (2.0 * r * w.cos(), -r * r);
        let gamma0 = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2).powi(2) - a1 * a1));
        Self { mean, a1, a2, sigma: (1.0 / gamma0).sqrt() }
    }
}

/// Generator parameters, frozen by the task seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    /// `classes[c][channel]`.
    pub classes: Vec<Vec<ArChannel>>,
}

impl ClassParams {
    pub fn sample(n_classes: usize, seed: u64) -> Self {
        let mut r = rng::seeded(rng::derive(seed, 0));
        let classes = (0..n_classes)
            .map(|_| {
                (0..N_CHANNELS)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut r);
                        let mean = MEAN_SPREAD * z;
                        let radius = r.random_range(0.5..0.9);
                        let angle = r.random_range(0.0..std::f64::consts::PI);
                        ArChannel::from_poles(mean, radius, angle)
                    })
                    .collect()
            })
            .collect();
        Self { classes }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrameTask {
    pub params: ClassParams,
    pub utterances: Vec<Utterance>,
    pub seed: u64,
}

impl SyntheticFrameTask {
    pub fn n_frames(&self) -> usize {
        self.utterances.iter().map(Utterance::n_frames).sum()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.params.n_classes()];
        for l in self.utterances.iter().flat_map(|u| &u.labels) {
            counts[*l as usize] += 1;
        }
        counts
    }
}

/// Splits `total` frames into segment lengths within `[20, 50]` (a single
/// shorter segment when `total < 20`).
fn segment_lengths(total: usize, r: &mut impl Rng) -> Vec<usize> {
    if total <= MAX_SEGMENT {
        return vec![total];
    }
    let m = total.div_ceil((MIN_SEGMENT + MAX_SEGMENT) / 2);
    let mut lens: Vec<usize> = (0..m).map(|i| total / m + usize::from(i < total % m)).collect();
    // Random transfers keep the sum and the bounds.
    for _ in 0..4 * m {
        let (i, j) = (r.random_range(0..m), r.random_range(0..m));
        let room = (lens[i] - MIN_SEGMENT).min(MAX_SEGMENT - lens[j]);
        if i != j && room > 0 {
            let d = r.random_range(1..=room);
            lens[i] -= d;
            lens[j] += d;
        }
    }
    lens
}

/// `frames_per_class` frames of every class, generated with fresh noise
/// from `data_seed` using fixed class parameters.
pub fn generate_with_params(
    params: &ClassParams,
    frames_per_class: usize,
    data_seed: u64,
) -> Result<SyntheticFrameTask> {
    if params.n_classes() < 2 {
        return Err(Error::config("a classification task needs at least 2 classes"));
    }
    if frames_per_class == 0 {
        return Err(Error::config("frames_per_class must be positive"));
    }
    let mut r = rng::seeded(data_seed);
    let mut segments: Vec<(u32, usize)> = Vec::new();
    for c in 0..params.n_classes() {
        segments.extend(segment_lengths(frames_per_class, &mut r).into_iter().map(|l| (c as u32, l)));
    }
    segments.shuffle(&mut r);
    let mut utterances = Vec::new();
    for (u_idx, group) in segments.chunks(SEGMENTS_PER_UTTERANCE).enumerate() {
        let t: usize = group.iter().map(|s| s.1).sum();
        let mut features = DMatrix::zeros(t, N_CHANNELS);
        let mut labels = Vec::with_capacity(t);
        let mut row = 0;
        for &(class, len) in group {
            for (ch, p) in params.classes[class as usize].iter().enumerate() {
                let (mut s1, mut s2) = (0.0, 0.0);
                for step in 0..BURN_IN + len {
                    let e: f64 = StandardNormal.sample(&mut r);
                    let s = p.a1 * s1 + p.a2 * s2 + p.sigma * e;
                    (s2, s1) = (s1, s);
                    if step >= BURN_IN {
                        features[(row + step - BURN_IN, ch)] = p.mean + s;
                    }
                }
            }
            labels.extend(std::iter::repeat_n(class, len));
            row += len;
        }
        utterances.push(Utterance::new(format!("synth{u_idx:04}"), features, labels)?);
    }
    Ok(SyntheticFrameTask { params: params.clone(), utterances, seed: data_seed })
}

/// A task with parameters and data both determined by `seed`.
pub fn generate_synthetic_frames(n_classes: usize, frames_per_class: usize, seed: u64) -> Result<SyntheticFrameTask> {
    if n_classes < 2 {
        return Err(Error::config("a classification task needs at least 2 classes"));
    }
    let params = ClassParams::sample(n_classes, seed);
    let mut task = generate_with_params(&params, frames_per_class, rng::derive(seed, 1))?;
    task.seed = seed;
    Ok(task)
}

/// Training and held-out test data sharing class parameters, drawn with
/// independent noise.
pub fn synthetic_split(
    n_classes: usize,
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<(SyntheticFrameTask, SyntheticFrameTask)> {
    let train = generate_synthetic_frames(n_classes, train_per_class, seed)?;
    let test = generate_with_params(&train.params, test_per_class, rng::derive(seed, 2))?;
    Ok((train, test))
}
