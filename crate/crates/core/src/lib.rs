//! Gossip-built Gradient overlays: topology construction, analysis of the
//! convergence chain, and a mesh live-streaming simulator that samples
//! parents either uniformly or from the Gradient overlay.
//!
//! Module map:
//!
//! - [`overlay`]: utility classes, similar views, the X metric and the
//!   gradient-convergence predicate.
//! - [`schedule`]: peer-sampling probability sequences.
//! - [`gossip`]: the view-improvement protocol, convergence runs and Monte
//!   Carlo sweeps over independent chains.
//! - [`markov`]: transition matrices, the closed-form eigen system, exact and
//!   spectral distribution evolution, schedule classification and hitting
//!   times.
//! - [`streaming`]: auction-matched mesh streaming under churn.
//!
//! Data-parallel sweeps go through [`Execution`]; with the `parallel`
//! feature disabled every sweep runs sequentially and produces the same
//! results.

pub mod gossip;
pub mod markov;
pub mod overlay;
pub mod par;
pub mod rng;
pub mod schedule;
pub mod streaming;

pub use overlay::{NodeId, UtilityConfig};
pub use par::Execution;
pub use schedule::SamplingSchedule;
