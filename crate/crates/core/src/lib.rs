//! Order acceptance and scheduling (OAS) on a single machine with
//! sequence-dependent setup times and time windows.
//!
//! The crate provides the problem model under earliest-start scheduling, the
//! Sparrow memetic solver (a biased random-key genetic algorithm whose
//! population is improved by one adaptive large neighbourhood search pass per
//! member and generation), a benchmark instance generator with property
//! analytics, an exact enumeration oracle for small instances and an
//! experiment harness.
//!
//! ```
//! use sparrow_core::instances::{generate, GenSpec};
//! use sparrow_core::solver::{solve, SolverConfig};
//!
//! let instance = generate(&GenSpec::cesaret(10, 0.5, 0.5, 7)).unwrap();
//! let config = SolverConfig { max_iterations: 20, ..SolverConfig::default() };
//! let result = solve(&instance, &config).unwrap();
//! assert!(sparrow_core::model::validate(&instance, &result.best).is_empty());
//! ```

pub mod alns;
pub mod brkga;
pub mod error;
pub mod harness;
pub mod insertion;
pub mod instances;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod slack;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Instance, Order, Schedule};
pub use solver::{solve, SolveResult, SolverConfig};
