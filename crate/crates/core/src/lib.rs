//! Radio mapping with a large intelligent surface (LIS): uplink channel
//! synthesis, matched-filter radio maps, low-rank plus sparse separation of
//! LoS and NLoS energy, shape segmentation, density clustering and passive
//! element localization, with a seeded Monte Carlo harness.
//!
//! Pipeline for one realization:
//!
//! ```text
//! Scenario --observe--> Y (N x K) --build_stack--> R (K x N)
//!   --pcp_solve--> L + S --reduce_nlos--> NLoS map --kmeans2--> mask
//!   --trace_shapes--> shapes --dbscan/classify--> detections --> LA, DR
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod inference;
pub mod io;
pub mod radiomap;
pub mod rng;
pub mod rpca;
pub mod scenario;
pub mod segmentation;

pub use channel::{ChannelModel, ChannelObservation, NlosPhase};
pub use error::{Error, Result, Stage};
pub use harness::{
    run_campaign, run_pipeline, CampaignResult, PipelineOutput, PipelineParams, RunConfig,
    ScenarioSource,
};
pub use inference::{Class, ClusterSet, DetectionReport, InferenceParams, Thresholds};
pub use radiomap::{FilterParams, MatchedFilter, RadioMapStack, Weighting};
pub use rpca::{NlosMap, PcpOptions, RpcaDecomposition};
pub use scenario::{ActiveUser, LisArray, PassiveElement, PeClass, Room, Scenario, ScenarioParams};
pub use segmentation::{BinaryMask, Shape, ShapeSet};
