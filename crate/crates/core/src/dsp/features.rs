use nalgebra::DMatrix;

use super::bark::{build_filterbank_with, BarkScale, FilterBank, Traunmuller};
use super::framing::{frame_signal, hamming_window, AudioSignal, FrameSpec, SpectrumAnalyzer};
use crate::error::{Error, Result};

pub const DEFAULT_LOG_FLOOR: f64 = 1e-10;
const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Per-utterance `T x n_features` log filterbank energies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    pub utterance_id: String,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, utterance_id: impl Into<String>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical { step: 0, msg: "non-finite feature value".into() });
        }
        Ok(Self { values, utterance_id: utterance_id.into() })
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

/// `out[i] = ln(max(sum_k bank[i,k] * spectrum[k], floor))`.
pub fn lhcb_features(spectrum: &[f64], bank: &FilterBank, floor: f64) -> Result<Vec<f64>> {
    if spectrum.len() != bank.n_bins() {
        return Err(Error::shape(format!(
            "spectrum has {} bins, filterbank expects {}",
            spectrum.len(),
            bank.n_bins()
        )));
    }
    Ok((0..bank.n_filters())
        .map(|i| {
            let e: f64 = bank.row(i).iter().zip(spectrum).map(|(w, p)| w * p).sum();
            e.max(floor).ln()
        })
        .collect())
}

/// Per-channel z-scoring over the frames of one utterance, using the
/// unbiased variance. Channels with variance below 1e-12 are only centered.
pub fn normalize_features(features: &FeatureMatrix) -> Result<FeatureMatrix> {
    let t = features.n_frames();
    if t < 2 {
        return Err(Error::InsufficientFrames { needed: 2, found: t });
    }
    let mut values = features.values.clone();
    for mut col in values.column_iter_mut() {
        let mean = col.iter().sum::<f64>() / t as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
        let scale = if var < DEGENERATE_VARIANCE { 1.0 } else { var.sqrt() };
        for v in col.iter_mut() {
            *v = (*v - mean) / scale;
        }
    }
    Ok(FeatureMatrix { values, utterance_id: features.utterance_id.clone() })
}

/// Frames stacked with their temporal neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSequence {
    /// `T x (n_features * width)`.
    pub rows: DMatrix<f64>,
    pub width: usize,
    pub center_index: usize,
}

pub fn default_center(width: usize) -> usize {
    width / 2
}

/// Row `t` concatenates frames `t - c .. t - c + width - 1` (edge
/// replicated), with `c = center`. Labels pass through unchanged.
pub fn stack_context(
    features: &FeatureMatrix,
    width: usize,
    center: usize,
    labels: &[u32],
) -> Result<(ContextSequence, Vec<u32>)> {
    if width == 0 {
        return Err(Error::config("context width must be at least 1"));
    }
    if center >= width {
        return Err(Error::config(format!("context center {center} outside width {width}")));
    }
    let t = features.n_frames();
    if labels.len() != t {
        return Err(Error::Alignment { expected: t, found: labels.len() });
    }
    Ok((stack_rows(&features.values, width, center)?, labels.to_vec()))
}

/// Context stacking without labels, for inference.
pub fn stack_rows(values: &DMatrix<f64>, width: usize, center: usize) -> Result<ContextSequence> {
    let (t, nf) = values.shape();
    if t == 0 {
        return Err(Error::EmptyInput("no frames to stack".into()));
    }
    if width == 0 || center >= width {
        return Err(Error::config(format!("invalid context width {width} / center {center}")));
    }
    let mut rows = DMatrix::zeros(t, nf * width);
    for r in 0..t {
        for j in 0..width {
            let src = (r + j).saturating_sub(center).min(t - 1);
            for f in 0..nf {
                rows[(r, j * nf + f)] = values[(src, f)];
            }
        }
    }
    Ok(ContextSequence { rows, width, center_index: center })
}

/// Front-end settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub frame: FrameSpec,
    pub n_filters: usize,
    pub log_floor: f64,
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { frame: FrameSpec::default(), n_filters: 18, log_floor: DEFAULT_LOG_FLOOR, normalize: true }
    }
}

/// Audio to LHCB features for one sample rate. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    sample_rate: u32,
    bank: FilterBank,
    analyzer: SpectrumAnalyzer,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig, sample_rate: u32) -> Result<Self> {
        Self::with_scale(config, sample_rate, &Traunmuller)
    }

    pub fn with_scale(config: FeatureConfig, sample_rate: u32, scale: &dyn BarkScale) -> Result<Self> {
        config.frame.validate()?;
        let fft_size = config.frame.resolved_fft_size(sample_rate)?;
        let bank = build_filterbank_with(scale, sample_rate, config.n_filters, fft_size)?;
        let analyzer = SpectrumAnalyzer::new(fft_size)?;
        Ok(Self { config, sample_rate, bank, analyzer })
    }

    pub fn filterbank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn extract(&self, signal: &AudioSignal, utterance_id: &str) -> Result<FeatureMatrix> {
        if signal.sample_rate != self.sample_rate {
            return Err(Error::config(format!(
                "extractor built for {} Hz, signal is {} Hz",
                self.sample_rate, signal.sample_rate
            )));
        }
        let frames = frame_signal(signal, &self.config.frame)?;
        let mut values = DMatrix::zeros(frames.len(), self.bank.n_filters());
        for (t, frame) in frames.iter().enumerate() {
            let spectrum = self.analyzer.power(&hamming_window(frame)?)?;
            let row = lhcb_features(&spectrum, &self.bank, self.config.log_floor)?;
            for (i, v) in row.into_iter().enumerate() {
                values[(t, i)] = v;
            }
        }
        let raw = FeatureMatrix::new(values, utterance_id)?;
        if self.config.normalize {
            normalize_features(&raw)
        } else {
            Ok(raw)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fm(rows: usize, cols: usize, data: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(DMatrix::from_row_slice(rows, cols, data), "u").unwrap()
    }

    #[test]
    fn lhcb_floor_and_single_bin() {
        let bank = FilterBank::from_rows(vec![vec![0.0, 1.0, 0.0]]).unwrap();
        let out = lhcb_features(&[0.0, 2.0, 5.0], &bank, DEFAULT_LOG_FLOOR).unwrap();
        assert_abs_diff_eq!(out[0], 2.0f64.ln(), epsilon = 1e-15);
        let zero = lhcb_features(&[0.0; 3], &bank, DEFAULT_LOG_FLOOR).unwrap();
        assert_eq!(zero[0], 1e-10f64.ln());
        assert!(matches!(lhcb_features(&[0.0; 4], &bank, 1e-10), Err(Error::Shape(_))));
    }

    #[test]
    fn normalize_two_frames() {
        let out = normalize_features(&fm(2, 2, &[1.0, 5.0, 3.0, 5.0])).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(out.values[(0, 0)], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(out.values[(1, 0)], s, epsilon = 1e-15);
        // Constant channel is centered only.
        assert_eq!(out.values[(0, 1)], 0.0);
        assert_eq!(out.values[(1, 1)], 0.0);
        assert!(matches!(normalize_features(&fm(1, 2, &[1.0, 2.0])), Err(Error::InsufficientFrames { .. })));
    }

    #[test]
    fn normalize_is_idempotent() {
        let data: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let once = normalize_features(&fm(20, 2, &data)).unwrap();
        let twice = normalize_features(&once).unwrap();
        for (a, b) in once.values.iter().zip(twice.values.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn context_edge_replication() {
        let f = fm(3, 1, &[10.0, 20.0, 30.0]);
        let (ctx, labels) = stack_context(&f, 3, 1, &[0, 1, 2]).unwrap();
        assert_eq!(ctx.rows.row(0).iter().copied().collect::<Vec<_>>(), vec![10.0, 10.0, 20.0]);
        assert_eq!(ctx.rows.row(2).iter().copied().collect::<Vec<_>>(), vec![20.0, 30.0, 30.0]);
        assert_eq!(labels, vec![0, 1, 2]);
    }

    #[test]
    fn context_width_14_of_18() {
        let f = FeatureMatrix::new(DMatrix::from_fn(30, 18, |r, c| (r * 18 + c) as f64), "u").unwrap();
        let (ctx, _) = stack_context(&f, 14, default_center(14), &[0; 30]).unwrap();
        assert_eq!(ctx.rows.shape(), (30, 252));
        assert_eq!(ctx.center_index, 7);
        // The labeled frame sits in slot 7.
        assert_eq!(ctx.rows[(10, 7 * 18)], f.values[(10, 0)]);
    }

    #[test]
    fn context_errors() {
        let f = fm(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(stack_context(&f, 3, 1, &[0, 1]), Err(Error::Alignment { .. })));
        assert!(stack_context(&f, 0, 0, &[0, 1, 2]).is_err());
        assert!(stack_context(&f, 3, 3, &[0, 1, 2]).is_err());
    }

    proptest! {
        #[test]
        fn normalized_moments(data in prop::collection::vec(-50.0f64..50.0, 6..120)) {
            let rows = data.len() / 3;
            let f = fm(rows, 3, &data[..rows * 3]);
            let out = normalize_features(&f).unwrap();
            for c in 0..3 {
                let col = f.values.column(c);
                let m = col.mean();
                let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (rows - 1) as f64;
                let o = out.values.column(c);
                let om = o.mean();
                prop_assert!(om.abs() <= 1e-10);
                if var >= 1e-12 {
                    let ov = o.iter().map(|v| (v - om).powi(2)).sum::<f64>() / (rows - 1) as f64;
                    prop_assert!((ov - 1.0).abs() <= 1e-8);
                }
            }
        }

        #[test]
        fn width_one_is_identity(data in prop::collection::vec(-5.0f64..5.0, 4..80)) {
            let rows = data.len() / 2;
            let f = fm(rows, 2, &data[..rows * 2]);
            let labels: Vec<u32> = (0..rows as u32).collect();
            let (ctx, l) = stack_context(&f, 1, 0, &labels).unwrap();
            prop_assert_eq!(&ctx.rows, &f.values);
            prop_assert_eq!(l, labels);
        }
    }
}
