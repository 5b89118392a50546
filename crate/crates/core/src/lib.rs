//! Model-based design of stochastic policies for robot swarms.
//!
//! A fitness model maps the swarm's local-state distribution to global
//! fitness and yields the desired local states; a transition model built from
//! logged state changes turns any policy into a Markov chain whose PageRank
//! rates how often robots sit in desired states. Policies are optimized on
//! that score without simulating, then checked for deadlock-prone states and
//! evaluated in the bundled simulator.
//!
//! Modules, bottom up: [`sim`] (arenas, robots, fitness), [`datalog`]
//! (randomized runs into datasets), [`micromacro`] (fitness model and
//! desired-state extraction), [`transition`] and [`pagerank`], [`evolve`]
//! (genetic algorithm), [`verify`], [`pipeline`] and [`cli`].

pub mod cli;
pub mod datalog;
pub mod error;
pub mod evolve;
pub mod io;
pub mod micromacro;
pub mod pagerank;
pub mod pipeline;
pub mod sim;
pub mod transition;
pub mod types;
pub mod verify;

pub use error::{Error, Result};
pub use types::*;
