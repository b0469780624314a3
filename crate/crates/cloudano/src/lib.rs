//! Neuro-symbolic anomaly detection for cloud telemetry.
//!
//! The pipeline runs in two stages. A fast metrics agent screens sampled
//! telemetry (cpu, gpu, memory, disk and network throughput) for anomalous
//! patterns; only when it raises a hypothesis does the slower log agent read
//! the host's log lines and a decision-maker produce a typed verdict. A
//! symbolic verifier then checks the verdict against a regex-and-threshold
//! ruleset and, on mismatch, sends the agents back for a bounded number of
//! retests before accepting, correcting, or abstaining.
//!
//! The crate also ships a seeded benchmark generator that emits labeled
//! anomaly cases and deceptively anomalous-looking normal cases, reference
//! baseline detectors, an evaluation harness (accuracy, type-aware accuracy,
//! false positive rate), and a report renderer.
//!
//! Backends are pluggable behind the [`backend::Backend`] trait: a real HTTP
//! chat-completion client, a deterministic oracle mock that answers from the
//! same symbolic rules the verifier uses, and fault-injection mocks for
//! robustness testing.

pub mod agents;
pub mod backend;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod mock;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod report;
pub mod verifier;

pub use error::{Error, Result};
