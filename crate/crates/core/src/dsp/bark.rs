//! Bark-scale triangular filterbanks.

use crate::error::{Error, Result};

/// A Hz <-> Bark mapping. Both directions must be monotone increasing.
pub trait BarkScale: Send + Sync {
    fn hz_to_bark(&self, hz: f64) -> f64;
    fn bark_to_hz(&self, bark: f64) -> f64;
}

/// Traunmüller (1990): `z = 26.81 f / (1960 + f) - 0.53`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Traunmuller;

impl BarkScale for Traunmuller {
    fn hz_to_bark(&self, hz: f64) -> f64 {
        26.81 * hz / (1960.0 + hz) - 0.53
    }

    fn bark_to_hz(&self, bark: f64) -> f64 {
        1960.0 * (bark + 0.53) / (26.28 - bark)
    }
}

/// Zwicker & Terhardt (1980): `z = 13 atan(0.00076 f) + 3.5 atan((f / 7500)^2)`.
/// The inverse has no closed form and is found by bisection.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zwicker;

impl BarkScale for Zwicker {
    fn hz_to_bark(&self, hz: f64) -> f64 {
        13.0 * (0.00076 * hz).atan() + 3.5 * (hz / 7500.0).powi(2).atan()
    }

    fn bark_to_hz(&self, bark: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0e6_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.hz_to_bark(mid) < bark {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `n_filters` triangular filters over the one-sided spectrum bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// Row-major, `n_filters x n_bins`.
    weights: Vec<f64>,
    n_filters: usize,
    n_bins: usize,
    centers_hz: Vec<f64>,
}

impl FilterBank {
    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Builds a bank from explicit weights (rows of equal length). Centers
    /// are taken as the weighted mean bin index of each row.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_filters = rows.len();
        let n_bins = rows.first().map_or(0, Vec::len);
        if n_filters == 0 || n_bins == 0 || rows.iter().any(|r| r.len() != n_bins) {
            return Err(Error::shape("filterbank rows must be non-empty and of equal length"));
        }
        if rows.iter().flatten().any(|&w| !(w >= 0.0)) {
            return Err(Error::config("filterbank weights must be nonnegative"));
        }
        let centers_hz = rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().enumerate().map(|(k, w)| k as f64 * w).sum::<f64>() / s
            })
            .collect();
        Ok(Self { weights: rows.concat(), n_filters, n_bins, centers_hz })
    }
}

pub fn build_bark_filterbank(sample_rate: u32, n_filters: usize, fft_size: usize) -> Result<FilterBank> {
    build_filterbank_with(&Traunmuller, sample_rate, n_filters, fft_size)
}

/// Triangles with centers equally spaced in Bark between 0 Hz and Nyquist.
/// Filter `i` rises from center `i-1` to center `i` and falls to center
/// `i+1`, where the outer edges are 0 Hz and Nyquist.
pub fn build_filterbank_with(
    scale: &dyn BarkScale,
    sample_rate: u32,
    n_filters: usize,
    fft_size: usize,
) -> Result<FilterBank> {
    if n_filters == 0 {
        return Err(Error::config("filterbank needs at least one filter"));
    }
    if sample_rate == 0 || fft_size < 2 || !fft_size.is_power_of_two() {
        return Err(Error::config(format!("invalid filterbank geometry: rate {sample_rate}, fft size {fft_size}")));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let (lo, hi) = (scale.hz_to_bark(0.0), scale.hz_to_bark(nyquist));
    let step = (hi - lo) / (n_filters + 1) as f64;
    let mut edges: Vec<f64> = (0..n_filters + 2).map(|i| scale.bark_to_hz(lo + step * i as f64)).collect();
    edges[0] = 0.0;
    edges[n_filters + 1] = nyquist;

    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut weights = vec![0.0; n_filters * n_bins];
    for i in 0..n_filters {
        let (left, center, right) = (edges[i], edges[i + 1], edges[i + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f < right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            weights[i * n_bins + k] = w;
        }
        if weights[i * n_bins..(i + 1) * n_bins].iter().all(|&w| w <= 0.0) {
            return Err(Error::config(format!(
                "filter {i} ({left:.1}-{right:.1} Hz) covers no FFT bin; \
                 {n_filters} filters is too many for fft size {fft_size}"
            )));
        }
    }
    Ok(FilterBank { weights, n_filters, n_bins, centers_hz: edges[1..=n_filters].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn traunmuller_at_1khz() {
        // 26.81 * 1000 / 2960 - 0.53
        assert_abs_diff_eq!(Traunmuller.hz_to_bark(1000.0), 8.527_432_432, epsilon = 1e-8);
    }

    #[test]
    fn scales_invert() {
        for hz in [0.0, 50.0, 440.0, 1000.0, 4000.0, 11_250.0] {
            assert_abs_diff_eq!(Traunmuller.bark_to_hz(Traunmuller.hz_to_bark(hz)), hz, epsilon = 1e-9);
            assert_abs_diff_eq!(Zwicker.bark_to_hz(Zwicker.hz_to_bark(hz)), hz, epsilon = 1e-6);
        }
    }

    #[test]
    fn eighteen_filters_at_22500() {
        let bank = build_bark_filterbank(22_500, 18, 1024).unwrap();
        assert_eq!(bank.n_filters(), 18);
        assert_eq!(bank.n_bins(), 513);
        for i in 0..18 {
            assert!(bank.row(i).iter().all(|&w| w >= 0.0));
            assert!(bank.row(i).iter().sum::<f64>() > 0.0);
        }
        assert!(bank.centers_hz().windows(2).all(|w| w[0] < w[1]));
        // Every bin strictly between DC and Nyquist belongs to some filter.
        for k in 1..512 {
            assert!((0..18).any(|i| bank.row(i)[k] > 0.0), "bin {k} uncovered");
        }
    }

    #[test]
    fn adjacent_filters_meet_at_centers() {
        let bank = build_bark_filterbank(16_000, 10, 4096).unwrap();
        // Filters overlap by half: weights of neighbours sum to one between centers.
        let bin_hz = 16_000.0 / 4096.0;
        let c = bank.centers_hz();
        for i in 0..9 {
            for k in 0..bank.n_bins() {
                let f = k as f64 * bin_hz;
                if f > c[i] && f < c[i + 1] {
                    assert_abs_diff_eq!(bank.row(i)[k] + bank.row(i + 1)[k], 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn zwicker_is_injectable() {
        let bank = build_filterbank_with(&Zwicker, 22_500, 18, 1024).unwrap();
        assert_eq!(bank.n_filters(), 18);
        assert!(bank.centers_hz().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn too_many_filters_for_resolution() {
        assert!(matches!(build_bark_filterbank(8000, 64, 16), Err(Error::Config(_))));
        assert!(build_bark_filterbank(8000, 0, 256).is_err());
    }
}
