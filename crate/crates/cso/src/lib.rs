//! Continuous simulation optimization test bench.
//!
//! Implements the adversarial objective-function constructions behind the
//! variance dichotomy, the information-theoretic checks (probability
//! transport, hitting-time invariance, pigeonhole bounds), two-regime
//! lower-bound formulas with switching budgets, three budget-constrained
//! optimizers, and a deterministic parallel experiment harness.
//!
//! Modules follow the problem structure:
//!
//! - [`geometry`]: max-norm cells, flat grids, the base-5 nested hierarchy
//!   and its selection sets;
//! - [`objectives`]: the constructed objective families, test functions,
//!   envelope certification, and the near-optimality profiler;
//! - [`simulation`]: the noisy observation channel with budget accounting
//!   and reproducible key-derived streams;
//! - [`optimizers`]: uniform search, finite-difference stochastic
//!   approximation, and a hierarchical tree-search optimizer;
//! - [`bounds`]: effective dimension, lower-bound envelopes, switching
//!   budgets;
//! - [`verification`]: Monte Carlo forms of the change-of-measure lemmas;
//! - [`harness`]: experiment configs, macro-replication, aggregation, and
//!   CSV emission.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod objectives;
pub mod optimizers;
pub mod simulation;
pub mod verification;

pub use error::{Error, Result};
