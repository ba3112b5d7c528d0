//! On-disk formats: binary tensor container, batch manifests, plan
//! configuration, results CSV, ensemble model files, and report emission.
//! Every writer is deterministic (sorted keys, fixed field order, no
//! timestamps) so identical inputs produce identical bytes.

pub mod config;
pub mod manifest;
pub mod model;
pub mod report;
pub mod results;
pub mod tensor;
