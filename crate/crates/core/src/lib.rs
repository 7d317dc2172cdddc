//! Lightweight CNN face liveness detection.
//!
//! Layers with hand-written forward and backward passes, the ~170k-parameter
//! liveness network, its LVW1 weight format, a data pipeline with a synthetic
//! spoof corpus, and presentation attack detection metrics.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod inference;
pub mod layers;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod tensor;
pub mod train;
pub mod weights;

pub use data::{AttackType, BBox, CorpusManifest, Dataset, Distance, FaceSample, Label, Split};
pub use error::{Error, Result};
pub use inference::{analyze, decode_image, Verdict};
pub use layers::Mode;
pub use metrics::{compute_report, select_threshold, EvalReport, ScoredSample};
pub use net::{expected_param_count, ArchConfig, InputScaling, LivenessNet, Prediction};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use tensor::{Real, Tensor};
pub use train::{train, TrainConfig};
