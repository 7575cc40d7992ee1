//! Passage-of-time perception from wearable biosignals.
//!
//! Signal preprocessing, windowed feature extraction, time-perception
//! labeling, subject-exclusive model training and Shapley explanations.
//! A synthetic cohort generator stands in for the private recordings.

pub mod data;
pub mod dsp;
pub mod rng;
pub mod synth;
pub mod spectral;
pub mod stats;
pub mod features;
pub mod labeling;
pub mod ml;
pub mod explain;

pub use data::{DataError, FeatureMatrix, FeatureRow, Modality, Segment, SegmentClass, Session, SignalChannel};
pub use explain::{Attribution, ExplainError, FeatureRank};
pub use labeling::{LabelError, LabeledDataset, PotpLabel, PotpThresholds, StateLabel, TimeError};
pub use ml::{Algorithm, Dataset, MlError, ModelArtifact, PipelineConfig, PipelineResult, SplitPlan, Task};
pub use synth::{GroundTruth, Scenario};
