//! Benchmark engine for temporal causal discovery: SCM sampling, assumption
//! violations, discovery baselines, metrics, and the evaluation harness.

pub mod discovery;
pub mod ensemble;
pub mod error;
pub mod funclib;
pub mod generator;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod numeric;
pub mod rng;
pub mod scm;
pub mod violations;

pub use error::{Error, Result};
pub use generator::{Plan, SampleRecord};
pub use scm::{GroundTruth, Regime, ScmSpec};
pub use violations::{ScheduleVariant, ViolationConfig, ViolationId};
