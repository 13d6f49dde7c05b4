//! Sociomatrices, centralities, community detection and graph export.

mod centrality;
mod churn;
mod export;
mod louvain;
mod matrix;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use centrality::{
    influence, mediation, popularity, suggest_influencers, suggest_mediators, Centrality, CentralityVector, DAMPING,
    INFLUENCE_MAX_ITERATIONS, INFLUENCE_TOLERANCE,
};
pub use churn::{wave_churn, TieChurn};
pub use export::{gexf, node_link, sex_color, zone_size, GraphLink, GraphNode, NodeAttributes, NodeLinkGraph, Rgb};
pub use louvain::{louvain, louvain_dense, modularity, modularity_of, symmetrized, Partition, GAIN_TOLERANCE, LOUVAIN_RESTARTS, LOUVAIN_SEED, PERTURBATIONS_PER_RUN, POLISH_MAX_NODES};
pub use matrix::{build_matrix, build_two_mode, MatrixMode, Sociomatrix};

use crate::scalar::{RealScalar, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnaError {
    #[error("edge endpoint `{0}` is not a node")]
    UnknownEndpoint(String),
    #[error("self loop on `{0}`")]
    SelfLoop(String),
    #[error("negative weight on {from} -> {to}")]
    NegativeWeight { from: String, to: String },
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: String, to: String },
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("measure requires a one-mode matrix")]
    NotOneMode,
}

/// All per-node measures for one relation in one wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult<F> {
    pub relation: String,
    pub wave_id: String,
    pub nodes: Vec<String>,
    pub popularity: CentralityVector<F>,
    pub mediation: CentralityVector<F>,
    pub influence: CentralityVector<F>,
    pub partition: Partition<F>,
}

impl<F: RealScalar> AnalysisResult<F> {
    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn measure(&self, which: Centrality) -> &CentralityVector<F> {
        match which {
            Centrality::Popularity => &self.popularity,
            Centrality::Mediation => &self.mediation,
            Centrality::Influence => &self.influence,
        }
    }
}

pub fn analyze<W: Scalar, F: RealScalar>(m: &Sociomatrix<W>) -> Result<AnalysisResult<F>, SnaError> {
    Ok(AnalysisResult {
        relation: m.relation().to_string(),
        wave_id: m.wave_id().to_string(),
        nodes: m.rows().to_vec(),
        popularity: popularity(m)?,
        mediation: mediation(m)?,
        influence: influence(m)?,
        partition: louvain(m)?,
    })
}
