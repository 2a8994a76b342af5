//! Any-resolution tiling plans, visual token budgets, and deterministic
//! compilation of multimodal instruction-tuning mixtures.

pub mod batching;
pub mod conversation;
pub mod datastore;
pub mod error;
pub mod evalprompts;
pub mod featuremap;
pub mod geometry;
pub mod mixture;
pub mod prompts;

pub use batching::{plan_batches, Batch, BatchPlan};
pub use conversation::{Conversation, ImageRef, Modality, Role, TokenCounter, Turn, WhitespaceCounter};
pub use error::{Error, Result};
pub use evalprompts::Registry;
pub use featuremap::{EncoderProfile, LayoutPlan, TokenSequence};
pub use geometry::{CandidateSet, GridShape, ImageDim, TilingPlan};
pub use mixture::MixtureManifest;
