//! Dataset manifests: one utterance per line, tab-separated
//! `id  data_path  label_path  speaker  [split]`.
//!
//! Relative paths are resolved against the manifest's directory. Blank lines
//! and lines starting with `#` are ignored. The optional split column is one
//! of `train`, `validation` (or `val`) and `test`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    /// A `.wav` file or a feature file.
    pub data_path: PathBuf,
    pub label_path: PathBuf,
    pub speaker: String,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

fn manifest_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Manifest { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Reads and validates a manifest file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base, path)
}

/// Parses manifest text, resolving relative paths against `base`. `source`
/// names the manifest in error messages.
pub fn parse_manifest(text: &str, base: &Path, source: &Path) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !(4..=5).contains(&fields.len()) || fields[..4].iter().any(|f| f.is_empty()) {
            return Err(manifest_err(
                source,
                line_no,
                format!("expected 4 or 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let split = match fields.get(4) {
            Some(s) if !s.is_empty() => {
                Some(s.parse::<Split>().map_err(|e| manifest_err(source, line_no, e.to_string()))?)
            }
            _ => None,
        };
        if let Some(first) = seen.insert(fields[0].to_string(), line_no) {
            return Err(manifest_err(
                source,
                line_no,
                format!("duplicate utterance id {:?} (first on line {first})", fields[0]),
            ));
        }
        let resolve = |p: &str| base.join(p);
        let entry = ManifestEntry {
            id: fields[0].to_string(),
            data_path: resolve(fields[1]),
            label_path: resolve(fields[2]),
            speaker: fields[3].to_string(),
            split,
        };
        for p in [&entry.data_path, &entry.label_path] {
            if !p.is_file() {
                return Err(manifest_err(source, line_no, format!("missing file {}", p.display())));
            }
        }
        entries.push(entry);
        lines.push(line_no);
    }
    let manifest = DatasetManifest { entries };
    if let Err((idx, msg)) = manifest.check_speaker_splits() {
        return Err(manifest_err(source, lines[idx], msg));
    }
    Ok(manifest)
}

impl DatasetManifest {
    /// Index of the first entry whose speaker already appeared in another
    /// split, with a message.
    fn check_speaker_splits(&self) -> std::result::Result<(), (usize, String)> {
        let mut assigned: HashMap<&str, Split> = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            let Some(split) = e.split else { continue };
            match assigned.insert(&e.speaker, split) {
                Some(prev) if prev != split => {
                    return Err((i, format!("speaker {:?} appears in both {prev} and {split}", e.speaker)));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// True when no speaker appears in more than one split.
    pub fn is_speaker_disjoint(&self) -> bool {
        self.check_speaker_splits().is_ok()
    }

    /// Distinct speakers in sorted order.
    pub fn speakers(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.speaker.as_str()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Some(split)).collect()
    }

    pub fn speakers_in(&self, split: Split) -> BTreeSet<&str> {
        self.split(split).into_iter().map(|e| e.speaker.as_str()).collect()
    }

    /// Writes the manifest with paths relative to `path`'s directory where
    /// possible, so the file stays valid when the directory moves.
    pub fn write(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\t{}", e.id, rel(&e.data_path), rel(&e.label_path), e.speaker));
            if let Some(s) = e.split {
                out.push('\t');
                out.push_str(s.as_str());
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Assigns speaker-disjoint splits. Speakers are shuffled with `seed`; the
/// first `train_n` become training speakers, of which
/// `round(train_n * val_fraction)` are moved to validation, and the next
/// `test_n` become test speakers. Remaining speakers are left unassigned.
pub fn split_by_speaker(
    manifest: &DatasetManifest,
    train_n: usize,
    test_n: usize,
    val_fraction: f64,
    seed: u64,
) -> Result<DatasetManifest> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::config(format!("validation fraction {val_fraction} outside [0, 1)")));
    }
    let mut speakers = manifest.speakers();
    if train_n + test_n > speakers.len() {
        return Err(Error::config(format!(
            "{train_n} train + {test_n} test speakers requested, manifest has {}",
            speakers.len()
        )));
    }
    speakers.shuffle(&mut rng::seeded(seed));
    let n_val = (train_n as f64 * val_fraction).round() as usize;
    let mut assignment: BTreeMap<&str, Split> = BTreeMap::new();
    for (i, s) in speakers.iter().enumerate() {
        let split = if i < train_n - n_val {
            Split::Train
        } else if i < train_n {
            Split::Validation
        } else if i < train_n + test_n {
            Split::Test
        } else {
            continue;
        };
        assignment.insert(s, split);
    }
    let entries = manifest
        .entries
        .iter()
        .map(|e| ManifestEntry { split: assignment.get(e.speaker.as_str()).copied(), ..e.clone() })
        .collect();
    Ok(DatasetManifest { entries })
}
