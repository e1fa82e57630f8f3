//! Dataset to model samples: time encodings, fixed-interval scaling,
//! forecast noise, sliding windows and chronological splits.

pub mod features;
pub mod scaling;
pub mod windows;

pub use features::{
    encode_time_features, future_features, past_features, target_features, TimeFeatures, FEATURE_LAYOUT_VERSION,
    TIME_FEATURES, WEATHER_FEATURES,
};
pub use scaling::{Scaled, ScalerSpec};
pub use windows::{
    add_forecast_noise, build_windows, prepare, split_boundaries, split_chronological, window_count, write_manifest,
    DatasetSplits, FeatureTable, PipelineConfig, WindowedSample, Windows,
};
