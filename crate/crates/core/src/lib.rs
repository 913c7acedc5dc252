//! Soft tree containment: decide whether a phylogenetic network softly
//! displays a phylogenetic tree.
//!
//! The pipeline is [`reduction::preprocess`] followed by [`solver::solve`].
//! The [`oracle`] module provides exhaustive reference answers for small
//! instances.

pub mod canon;
pub mod extension;
pub mod generate;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod reduction;
pub mod solver;

use thiserror::Error;

pub use extension::{default_extension, validate_extension, CutKind, TreeExtension};
pub use graph::{arc, tree_leaf_isomorphic, ArcKey, Digraph, Item, PhyloClass, Rewrite, VertexId};
pub use reduction::{preprocess, AugmentedInstance};
pub use solver::{solve, SolveOptions, Verdict};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Rewrite(#[from] graph::RewriteError),
    #[error(transparent)]
    Extension(#[from] extension::ExtensionError),
    #[error(transparent)]
    Reduction(#[from] reduction::ReductionError),
    #[error(transparent)]
    Solve(#[from] solver::SolveError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Parse(#[from] io::ParseError),
    #[error(transparent)]
    Generate(#[from] generate::GenerateError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
