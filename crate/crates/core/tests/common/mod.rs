//! Toy speech-like data shared by the integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hetesn::dsp::io::{write_labels, write_wav};
use hetesn::dsp::{AudioSignal, FrameSpec};

pub const SAMPLE_RATE: u32 = 16_000;
pub const N_CLASSES: u32 = 3;

/// A tone sequence with one class per 0.1 s segment; class `c` sounds at
/// `400 * (c + 1)` Hz. Returns the signal and one label per frame.
pub fn toy_utterance(seed: u32, n_segments: usize) -> (AudioSignal, Vec<u32>) {
    let seg = SAMPLE_RATE as usize / 10;
    let n = seg * n_segments;
    let class_of = |s: usize| ((s as u32 + seed) * 7 + s as u32 / 2) % N_CLASSES;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let f = 400.0 * (class_of(i / seg) + 1) as f64;
            let t = i as f64 / SAMPLE_RATE as f64;
            0.5 * (2.0 * std::f64::consts::PI * f * t).sin() + 0.01 * ((i as f64 * 12.9898 + seed as f64).sin())
        })
        .collect();
    let spec = FrameSpec::default();
    let hop = spec.hop_len(SAMPLE_RATE);
    let len = spec.frame_len(SAMPLE_RATE);
    let labels = (0..spec.frame_count(n, SAMPLE_RATE))
        .map(|t| class_of(((t * hop + len / 2) / seg).min(n_segments - 1)))
        .collect();
    (AudioSignal::new(samples, SAMPLE_RATE).unwrap(), labels)
}

/// Writes `<speaker>_<k>.wav` / `.lab` pairs into `dir`.
pub fn write_toy_corpus(dir: &Path, speakers: &[&str], per_speaker: usize) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    let mut paths = Vec::new();
    for (s, spk) in speakers.iter().enumerate() {
        for k in 0..per_speaker {
            let (sig, labels) = toy_utterance((s * per_speaker + k) as u32, 6);
            let wav = dir.join(format!("{spk}_{k}.wav"));
            write_wav(&wav, &sig).unwrap();
            write_labels(&wav.with_extension("lab"), &labels).unwrap();
            paths.push(wav);
        }
    }
    paths
}

/// Assigns speakers to splits in a feature manifest written by `extract`.
pub fn assign_splits(manifest: &Path, splits: &[(&str, &str)]) {
    let text = std::fs::read_to_string(manifest).unwrap();
    let out: String = text
        .lines()
        .map(|l| {
            let spk = l.split('\t').nth(3).unwrap();
            let split = splits.iter().find(|(s, _)| *s == spk).map(|(_, p)| *p).unwrap();
            format!("{l}\t{split}\n")
        })
        .collect();
    std::fs::write(manifest, out).unwrap();
}

pub const TOY_CONFIG: &str = "\
model.variant = \"shallow\"
layer.size = 40
features.context_width = 3
data.n_classes = 3
trials.n_seeds = 2
";

pub fn hetesn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetesn")).args(args).current_dir(cwd).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
