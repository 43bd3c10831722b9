//! Detection of sparse heterogeneous mixtures in two-sample problems.
//!
//! Given a control sample from `F` and a test sample from
//! `G = (1 - ε) F + ε F(· - μ)`, this crate computes the two-sample higher
//! criticism statistic alongside the Wilcoxon, one-sided Smirnov, tail-run
//! and oracle likelihood-ratio statistics; calibrates them; evaluates the
//! detection boundaries of generalized Gaussian models; and runs Monte Carlo
//! power studies.

pub mod calibration;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod special;
pub mod statistics;
pub mod theory;

pub use calibration::{LrtModel, NullTable, PMethod, PValue};
pub use distributions::{DenseParam, GGParams, MixtureAlt, SparseParam};
pub use error::{Error, Result};
pub use experiments::{Figure, PowerCurve, RunOptions, ScenarioConfig};
pub use statistics::{StatValue, TestKind, TwoSample};
