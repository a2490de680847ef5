//! Breathing-rate estimation and breathing-pattern classification for
//! multichannel respiratory recordings: dataset I/O and synthesis, cleaning
//! and windowing, periodogram rate estimates, window features, three
//! classifiers and cross-validated evaluation with reports and charts.

pub mod dataset;
pub mod matrix;
pub mod rng;
pub mod preprocess;
pub mod spectral;
pub mod features;
pub mod models;
pub mod eval;
pub mod pipeline;
pub mod svg;
