//! Occlusion dataset synthesis and robustness tooling for action recognition.
//!
//! The pipeline pastes a tracked occluder over the actor in every frame of a
//! clip, measures how much of the actor it hides, erases the actor under
//! segmentation masks to produce counterfactual clips, and provides the loss
//! math for training on factual/counterfactual prediction pairs. A reporting
//! layer turns model prediction dumps into accuracy tables.
//!
//! Modules map onto pipeline stages:
//!
//! - [`occluder`]: RGBA occluder assets and seeded sampling
//! - [`track`]: actor bounding-box tracks and gap filling
//! - [`compositor`]: scaling, placement and alpha compositing
//! - [`metrics`]: occlusion degree, area ratio and duration ratio
//! - [`counterfactual`]: mask-driven actor erasure
//! - [`car`]: corrected prediction, combined loss and gradients
//! - [`dataset`]: annotation CSV and clip manifest
//! - [`report`]: top-k accuracy and robustness tables
//! - [`jobs`]: batch jobs behind the command-line tool

pub mod car;
pub mod compositor;
pub mod counterfactual;
pub mod dataset;
pub mod exec;
pub mod frames;
pub mod jobs;
pub mod metrics;
pub mod occluder;
pub mod report;
pub mod rng;
pub mod track;

pub use car::{LabelDistribution, LossConfig, PredictionPair};
pub use compositor::{synthesize_clip, Frame, OcclusionSpec, Placement};
pub use exec::Exec;
pub use occluder::{Category, OccluderAsset, OccluderCatalog};
pub use track::{ActorTrack, BoundingBox};
