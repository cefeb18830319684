//! Memory-one iterated prisoner's dilemma on complex networks.
//!
//! Modules, bottom-up:
//!
//! * [`strategy`]: payoff matrices, memory-one strategies, ZD completion and
//!   the named catalog.
//! * [`markov`]: long-run payoffs of a strategy pair, analytic and simulated.
//! * [`graph`]: random regular and Barabási–Albert generators, degree
//!   assortativity and assortativity-targeted rewiring.
//! * [`engine`]: population state and one-round-per-edge game play.
//! * [`evolve`]: death-birth Moran and strategy adoption updates, and the
//!   seeded run loop.
//! * [`experiment`]: scenario presets, replicate scheduling, aggregation and
//!   output files.

pub mod engine;
pub mod evolve;
pub mod experiment;
pub mod graph;
pub mod markov;
pub mod rng;
pub mod strategy;

pub use engine::Population;
pub use graph::Network;
pub use strategy::{MemoryOneStrategy, Outcome, PayoffMatrix};
