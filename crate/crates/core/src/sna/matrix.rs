use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::SnaError;
use crate::roster::EdgeList;
use crate::scalar::{RealScalar, Scalar};
use crate::Score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixMode {
    OneMode,
    TwoMode,
}

/// Directed, weighted adjacency matrix. Rows are respondents; columns are the
/// same respondents (one-mode) or external entities (two-mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Sociomatrix<W = Score> {
    mode: MatrixMode,
    relation: String,
    wave_id: String,
    rows: Vec<String>,
    cols: Vec<String>,
    row_index: HashMap<String, usize>,
    col_index: HashMap<String, usize>,
    weights: Vec<W>,
}

fn index_of(ids: &[String]) -> Result<HashMap<String, usize>, SnaError> {
    let mut map = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(SnaError::DuplicateNode(id.clone()));
        }
    }
    Ok(map)
}

impl<W: Scalar> Sociomatrix<W> {
    fn build(edges: &EdgeList<W>, mode: MatrixMode, rows: Vec<String>, cols: Vec<String>) -> Result<Self, SnaError> {
        let row_index = index_of(&rows)?;
        let col_index = index_of(&cols)?;
        let mut weights = vec![W::zero(); rows.len() * cols.len()];
        for e in &edges.edges {
            let i = *row_index.get(&e.source).ok_or_else(|| SnaError::UnknownEndpoint(e.source.clone()))?;
            let j = *col_index.get(&e.target).ok_or_else(|| SnaError::UnknownEndpoint(e.target.clone()))?;
            if mode == MatrixMode::OneMode && i == j {
                return Err(SnaError::SelfLoop(e.source.clone()));
            }
            if e.weight < W::zero() {
                return Err(SnaError::NegativeWeight { from: e.source.clone(), to: e.target.clone() });
            }
            let cell = &mut weights[i * cols.len() + j];
            if !cell.is_zero() {
                return Err(SnaError::DuplicateEdge { from: e.source.clone(), to: e.target.clone() });
            }
            *cell = e.weight.clone();
        }
        Ok(Sociomatrix {
            mode,
            relation: edges.relation.clone(),
            wave_id: edges.wave_id.clone(),
            rows,
            cols,
            row_index,
            col_index,
            weights,
        })
    }

    pub fn mode(&self) -> MatrixMode {
        self.mode
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn wave_id(&self) -> &str {
        &self.wave_id
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.row_index.get(id).copied()
    }

    pub fn col_of(&self, id: &str) -> Option<usize> {
        self.col_index.get(id).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> &W {
        &self.weights[i * self.cols.len() + j]
    }

    pub fn weight(&self, source: &str, target: &str) -> Option<&W> {
        Some(self.get(self.row_of(source)?, self.col_of(target)?))
    }

    pub fn has_tie(&self, i: usize, j: usize) -> bool {
        *self.get(i, j) > W::zero()
    }

    /// Positive-weight edges in row-major order.
    pub fn to_edge_list(&self) -> EdgeList<W> {
        let mut out = EdgeList::new(&self.relation, &self.wave_id);
        for (i, src) in self.rows.iter().enumerate() {
            for (j, dst) in self.cols.iter().enumerate() {
                let w = self.get(i, j);
                if *w > W::zero() {
                    out.push(src.clone(), dst.clone(), w.clone());
                }
            }
        }
        out
    }

    pub(crate) fn require_one_mode(&self) -> Result<(), SnaError> {
        match self.mode {
            MatrixMode::OneMode => Ok(()),
            MatrixMode::TwoMode => Err(SnaError::NotOneMode),
        }
    }

    /// Out-neighbour lists over ties with positive weight.
    pub(crate) fn out_adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.rows.len()).map(|i| (0..self.cols.len()).filter(|&j| self.has_tie(i, j)).collect()).collect()
    }

    pub(crate) fn in_adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.cols.len()).map(|j| (0..self.rows.len()).filter(|&i| self.has_tie(i, j)).collect()).collect()
    }

    pub(crate) fn dense<F: RealScalar>(&self) -> Vec<Vec<F>> {
        (0..self.rows.len())
            .map(|i| {
                (0..self.cols.len())
                    .map(|j| F::from_f64(self.get(i, j).to_f64_lossy()).unwrap_or_else(F::zero))
                    .collect()
            })
            .collect()
    }
}

/// Square sociomatrix over `nodes` (order defines the index).
pub fn build_matrix<W: Scalar>(edges: &EdgeList<W>, nodes: &[String]) -> Result<Sociomatrix<W>, SnaError> {
    Sociomatrix::build(edges, MatrixMode::OneMode, nodes.to_vec(), nodes.to_vec())
}

/// Rectangular respondents × entities sociomatrix.
pub fn build_two_mode<W: Scalar>(
    edges: &EdgeList<W>,
    rows: &[String],
    cols: &[String],
) -> Result<Sociomatrix<W>, SnaError> {
    Sociomatrix::build(edges, MatrixMode::TwoMode, rows.to_vec(), cols.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn w(v: i64) -> Score {
        Score::from_integer(v.into())
    }

    #[test]
    fn empty_edge_list_is_zero_matrix() {
        let m = build_matrix(&EdgeList::<Score>::new("f", "w"), &ids(&["A", "B", "C"])).unwrap();
        assert_eq!(m.shape(), (3, 3));
        assert!((0..3).all(|i| (0..3).all(|j| m.get(i, j) == &w(0))));
    }

    #[test]
    fn directed_edge_is_not_mirrored() {
        let mut e = EdgeList::new("f", "w");
        e.push("A", "B", w(2));
        let m = build_matrix(&e, &ids(&["A", "B"])).unwrap();
        assert_eq!(m.weight("A", "B"), Some(&w(2)));
        assert_eq!(m.weight("B", "A"), Some(&w(0)));
        assert_eq!(m.to_edge_list(), e);
    }

    #[test]
    fn two_mode_is_rectangular() {
        let mut e = EdgeList::new("venue", "w");
        e.push("S1", "P2", w(1));
        let m = build_two_mode(&e, &ids(&["S1", "S2", "S3"]), &ids(&["P1", "P2"])).unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m.mode(), MatrixMode::TwoMode);
        assert_eq!(m.weight("S1", "P2"), Some(&w(1)));
    }

    #[test]
    fn rejects_bad_edges() {
        let nodes = ids(&["A", "B"]);
        let mut e = EdgeList::new("f", "w");
        e.push("A", "Z", w(1));
        assert_eq!(build_matrix(&e, &nodes).unwrap_err(), SnaError::UnknownEndpoint("Z".into()));
        let mut e = EdgeList::new("f", "w");
        e.push("A", "A", w(1));
        assert_eq!(build_matrix(&e, &nodes).unwrap_err(), SnaError::SelfLoop("A".into()));
        let mut e = EdgeList::new("f", "w");
        e.push("A", "B", w(1));
        e.push("A", "B", w(2));
        assert!(matches!(build_matrix(&e, &nodes), Err(SnaError::DuplicateEdge { .. })));
        assert!(matches!(build_matrix(&EdgeList::<Score>::new("f", "w"), &ids(&["A", "A"])), Err(SnaError::DuplicateNode(_))));
    }
}
