//! Simulation and analysis toolkit for biased binary opinion dynamics on
//! undirected graphs.
//!
//! Every node holds an opinion in {0, 1}. One step of the process picks a
//! node uniformly at random; with probability `alpha` the node adopts
//! opinion 1 outright, otherwise it applies an update rule — majority over
//! its neighborhood (exact ties resolved by a fair coin) or voter (copy a
//! uniformly random neighbor). For `alpha > 0` the all-ones state is the
//! unique absorbing state, and the quantity of interest is the absorption
//! time `tau`.
//!
//! The crate is organized around five pieces:
//!
//! * [`graph`] — compact undirected graphs, generators, and edge-list I/O;
//! * [`dynamics`] — opinion states and the single-node update rules;
//! * [`engine`] — seeded runs, absorption detection, and parallel ensembles;
//! * [`analysis`] — closed-form expectations, birth–death utilities, and
//!   exact brute-force oracles for small instances;
//! * [`harness`] — alpha sweeps, threshold detection, file output, and the
//!   self-check suite behind `opdyn verify`.
//!
//! Reproducibility policy: all randomness flows through ChaCha8 seeded from
//! a user-supplied `u64`. Run `i` of an ensemble uses stream `i` of the
//! ensemble seed, so results are independent of thread count and identical
//! across the parallel and sequential builds.

pub mod analysis;
pub mod dynamics;
pub mod engine;
pub mod graph;
pub mod harness;
pub mod verify;

pub use dynamics::{OpinionState, UpdateRule};
pub use engine::{EnsembleStats, RunConfig, RunResult};
pub use graph::{Graph, GraphSpec};
