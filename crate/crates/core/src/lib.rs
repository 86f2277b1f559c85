//! Causal behaviour modelling for groups of agents.
//!
//! The pipeline has five stages, each a module:
//!
//! - [`data`]: catalogs of behaviour and context variables, event-log
//!   ingestion, binary series construction, deduplication and a synthetic
//!   generator with a planted lagged graph.
//! - [`discovery`]: lagged causal graph recovery with a conditional mutual
//!   information test, PC-style parent selection and MCI validation.
//! - [`inference`]: a single message-passing layer constrained to the
//!   discovered graph, trained by gradient descent, plus a strength-softmax
//!   ablation and a first-order Markov baseline.
//! - [`simulation`]: autoregressive rollouts of one agent (context replayed)
//!   or of the whole group (neighbour behaviour recomputed every tick).
//! - [`evaluation`]: accuracy, mutual information, snippet embedding with
//!   classical MDS and k-means, a real-vs-simulated discriminator and
//!   transition flows.
//!
//! [`pipeline`] wires the stages into file-based commands used by the `cbm`
//! binary; [`cli`] parses its arguments.

pub mod cli;
pub mod data;
pub mod discovery;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod pipeline;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
