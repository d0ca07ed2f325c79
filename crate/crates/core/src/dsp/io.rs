//! Audio, feature and label files.
//!
//! `FEAT1` layout (little-endian): `b"FEAT"`, version byte `1`, `u32` frame
//! count, `u32` feature count, then `T * n_features` `f32` values row-major.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::features::FeatureMatrix;
use super::framing::AudioSignal;
use crate::error::{Error, Result};

const FEAT_MAGIC: &[u8; 4] = b"FEAT";
const FEAT_VERSION: u8 = 1;

/// Reads a mono 16-bit PCM WAV file.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let wav_err = |msg: String| Error::Wav { path: path.to_path_buf(), msg };
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(wav_err(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(format!(
            "expected 16-bit integer PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    AudioSignal::new(samples, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV file, clipping samples to [-1, 1].
pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |e: hound::Error| Error::Wav { path: path.to_path_buf(), msg: e.to_string() };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &signal.samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

pub fn encode_feat(features: &FeatureMatrix) -> Vec<u8> {
    let (t, nf) = features.values.shape();
    let mut out = Vec::with_capacity(13 + 4 * t * nf);
    out.extend_from_slice(FEAT_MAGIC);
    out.push(FEAT_VERSION);
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(nf as u32).to_le_bytes());
    for r in 0..t {
        for c in 0..nf {
            out.extend_from_slice(&(features.values[(r, c)] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_feat(bytes: &[u8], utterance_id: &str) -> Result<FeatureMatrix> {
    let bad = |msg: &str| Error::Format { kind: "FEAT1", msg: msg.to_string() };
    if bytes.len() < 13 || &bytes[..4] != FEAT_MAGIC {
        return Err(bad("missing FEAT magic"));
    }
    if bytes[4] != FEAT_VERSION {
        return Err(bad(&format!("unsupported version {}", bytes[4])));
    }
    let t = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let nf = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let body = &bytes[13..];
    if body.len() != 4 * t * nf {
        return Err(bad(&format!("expected {} payload bytes, found {}", 4 * t * nf, body.len())));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    FeatureMatrix::new(DMatrix::from_row_iterator(t, nf, values), utterance_id)
}

pub fn write_feat(path: &Path, features: &FeatureMatrix) -> Result<()> {
    fs::write(path, encode_feat(features)).map_err(|e| Error::io(path, e))
}

pub fn read_feat(path: &Path, utterance_id: &str) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    decode_feat(&bytes, utterance_id)
}

/// One integer class id per line. Blank lines are ignored.
pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<u32>().map_err(|_| Error::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("label {line:?} is not a nonnegative integer"),
        })?;
        labels.push(v);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}
