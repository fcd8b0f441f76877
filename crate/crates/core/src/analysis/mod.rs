//! Fake-vs-real corpus measurements with significance tests.

pub mod measures;
pub mod report;
pub mod stats;

pub use measures::{color_richness, quantize_channel, text_dynamism, text_visual_jsd, text_visual_jsd_features, Normalization};
pub use report::{audio_sentiment_distribution, corpus_report, AnalysisReport, Direction, DistributionObservation, SentimentObservation};
pub use stats::{js_divergence, kolmogorov_sf, ks_test, two_proportion_z_test, welch_t_test, TestResult, WelchResult};
