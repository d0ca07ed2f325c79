use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Mono audio with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Frame geometry in milliseconds. Lengths in samples are rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub frame_ms: f64,
    pub overlap_ms: f64,
    /// `None` picks the smallest power of two holding one frame.
    pub fft_size: Option<usize>,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self { frame_ms: 23.0, overlap_ms: 12.5, fft_size: None }
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    // ms * rate first keeps values like 517.5 exact before rounding.
    (ms * sample_rate as f64 / 1000.0 + 0.5).floor() as usize
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms > 0.0) || !(self.overlap_ms > 0.0) {
            return Err(Error::config("frame_ms and overlap_ms must be positive"));
        }
        if self.overlap_ms >= self.frame_ms {
            return Err(Error::config(format!(
                "overlap {} ms must be shorter than frame {} ms",
                self.overlap_ms, self.frame_ms
            )));
        }
        if let Some(n) = self.fft_size {
            if n == 0 || !n.is_power_of_two() {
                return Err(Error::config(format!("fft size {n} is not a power of two")));
            }
        }
        Ok(())
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.frame_ms, sample_rate)
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.frame_ms - self.overlap_ms, sample_rate)
    }

    pub fn resolved_fft_size(&self, sample_rate: u32) -> Result<usize> {
        let frame_len = self.frame_len(sample_rate);
        match self.fft_size {
            Some(n) if n < frame_len => {
                Err(Error::config(format!("fft size {n} is smaller than the frame length {frame_len}")))
            }
            Some(n) => Ok(n),
            None => Ok(frame_len.next_power_of_two()),
        }
    }

    /// Number of whole frames in a signal of `n` samples.
    pub fn frame_count(&self, n: usize, sample_rate: u32) -> usize {
        let (len, hop) = (self.frame_len(sample_rate), self.hop_len(sample_rate));
        if n < len || hop == 0 {
            return 0;
        }
        (n - len) / hop + 1
    }
}

/// Splits a signal into overlapping frames. Trailing samples that do not fill
/// a whole frame are dropped.
pub fn frame_signal(signal: &AudioSignal, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let len = spec.frame_len(signal.sample_rate);
    let hop = spec.hop_len(signal.sample_rate);
    if len == 0 || hop == 0 {
        return Err(Error::config("frame or hop length rounds to zero samples"));
    }
    if signal.samples.len() < len {
        return Err(Error::EmptyInput(format!(
            "signal of {} samples is shorter than one frame ({len} samples)",
            signal.samples.len()
        )));
    }
    let count = spec.frame_count(signal.samples.len(), signal.sample_rate);
    Ok((0..count).map(|i| signal.samples[i * hop..i * hop + len].to_vec()).collect())
}

pub fn hamming_coefficient(n: usize, len: usize) -> f64 {
    if len == 1 {
        return 1.0;
    }
    0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos()
}

pub fn hamming_window(frame: &[f64]) -> Result<Vec<f64>> {
    if frame.is_empty() {
        return Err(Error::EmptyInput("hamming window of an empty frame".into()));
    }
    let len = frame.len();
    Ok(frame.iter().enumerate().map(|(n, &v)| v * hamming_coefficient(n, len)).collect())
}

/// Reusable FFT plan producing one-sided power spectra.
///
/// The output has `fft_size / 2 + 1` bins holding |X[k]|^2 with no doubling,
/// so `X[0]^2 + 2 * sum(X[1..N/2]^2) + X[N/2]^2 == N * sum(x^2)`.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    fft_size: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer").field("fft_size", &self.fft_size).finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(fft_size: usize) -> Result<Self> {
        if fft_size == 0 || !fft_size.is_power_of_two() {
            return Err(Error::config(format!("fft size {fft_size} is not a power of two")));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Ok(Self { fft_size, fft })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn power(&self, windowed: &[f64]) -> Result<Vec<f64>> {
        if windowed.len() > self.fft_size {
            return Err(Error::config(format!(
                "fft size {} is smaller than the frame length {}",
                self.fft_size,
                windowed.len()
            )));
        }
        let mut buf: Vec<Complex<f64>> = windowed
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.fft_size)
            .collect();
        self.fft.process(&mut buf);
        Ok(buf[..self.n_bins()].iter().map(|c| c.norm_sqr()).collect())
    }
}

pub fn power_spectrum(windowed: &[f64], fft_size: usize) -> Result<Vec<f64>> {
    SpectrumAnalyzer::new(fft_size)?.power(windowed)
}
