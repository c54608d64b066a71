//! GALAXY: graph-based batch active learning for extremely imbalanced pools.

pub mod bisection;
pub mod cli;
pub mod engine;
pub mod error;
pub mod formats;
pub mod graph_builder;
pub mod labels;
pub mod linear_graph;
pub mod pool_sim;
pub mod scores;
pub mod server;
pub mod strategies;

pub use engine::{galaxy_select_batch, GalaxySession, Oracle, Query, ScoreProvider};
pub use error::{Error, Result};
pub use labels::{ClassId, ExampleId, LabeledSet};
pub use linear_graph::{GraphSet, Path};
pub use scores::ScoreMatrix;
pub use strategies::{Batch, Provenance, Strategy};
