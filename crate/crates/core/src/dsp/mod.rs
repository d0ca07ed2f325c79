//! Speech front-end: audio to normalized LHCB (log Hamming critical band)
//! features with stacked temporal context.

pub mod bark;
pub mod features;
pub mod framing;
pub mod io;

pub use bark::{build_bark_filterbank, build_filterbank_with, BarkScale, FilterBank, Traunmuller, Zwicker};
pub use features::{
    default_center, lhcb_features, normalize_features, stack_context, stack_rows, ContextSequence, FeatureConfig,
    FeatureExtractor, FeatureMatrix, DEFAULT_LOG_FLOOR,
};
pub use framing::{frame_signal, hamming_window, power_spectrum, AudioSignal, FrameSpec, SpectrumAnalyzer};
