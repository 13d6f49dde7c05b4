use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Sociomatrix, SnaError};
use crate::scalar::{RealScalar, Scalar};

pub const DAMPING: f64 = 0.85;
pub const INFLUENCE_TOLERANCE: f64 = 1e-9;
pub const INFLUENCE_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centrality {
    Popularity,
    Mediation,
    Influence,
}

impl Centrality {
    pub const ALL: [Centrality; 3] = [Centrality::Popularity, Centrality::Mediation, Centrality::Influence];

    pub fn name(self) -> &'static str {
        match self {
            Centrality::Popularity => "popularity",
            Centrality::Mediation => "mediation",
            Centrality::Influence => "influence",
        }
    }

    pub fn normalization(self) -> &'static str {
        match self {
            Centrality::Popularity => "raw in-degree",
            Centrality::Mediation => "betweenness / ((n-1)(n-2))",
            Centrality::Influence => "sums to 1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityVector<F> {
    pub measure: Centrality,
    pub normalization: String,
    pub values: Vec<F>,
}

impl<F> CentralityVector<F> {
    fn new(measure: Centrality, values: Vec<F>) -> Self {
        CentralityVector { measure, normalization: measure.normalization().to_string(), values }
    }
}

/// Number of incoming ties with positive weight.
pub fn popularity<W: Scalar, F: RealScalar>(m: &Sociomatrix<W>) -> Result<CentralityVector<F>, SnaError> {
    m.require_one_mode()?;
    let values = m.in_adjacency().iter().map(|inc| F::from_usize(inc.len()).unwrap_or_else(F::nan)).collect();
    Ok(CentralityVector::new(Centrality::Popularity, values))
}

/// Directed shortest-path betweenness over unweighted ties (Brandes).
pub fn mediation<W: Scalar, F: RealScalar>(m: &Sociomatrix<W>) -> Result<CentralityVector<F>, SnaError> {
    m.require_one_mode()?;
    let n = m.rows().len();
    let mut bc = vec![F::zero(); n];
    if n < 3 {
        return Ok(CentralityVector::new(Centrality::Mediation, bc));
    }
    let adj = m.out_adjacency();
    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![F::zero(); n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![F::zero(); n];
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        stack.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = F::zero();
            dist[v] = usize::MAX;
            delta[v] = F::zero();
        }
        sigma[s] = F::one();
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] = sigma[w] + sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] = delta[v] + sigma[v] / sigma[w] * (F::one() + delta[w]);
            }
            if w != s {
                bc[w] = bc[w] + delta[w];
            }
        }
    }
    let scale = F::from_usize((n - 1) * (n - 2)).unwrap_or_else(F::one);
    Ok(CentralityVector::new(Centrality::Mediation, bc.into_iter().map(|b| b / scale).collect()))
}

/// Damped random-walk centrality over weighted ties. Nodes without outgoing
/// ties spread their mass uniformly.
pub fn influence<W: Scalar, F: RealScalar>(m: &Sociomatrix<W>) -> Result<CentralityVector<F>, SnaError> {
    m.require_one_mode()?;
    let n = m.rows().len();
    if n == 0 {
        return Ok(CentralityVector::new(Centrality::Influence, Vec::new()));
    }
    let w: Vec<Vec<F>> = m.dense();
    let out_weight: Vec<F> = w.iter().map(|row| row.iter().copied().sum()).collect();
    let nf = F::from_usize(n).unwrap_or_else(F::one);
    let d = F::from_f64(DAMPING).unwrap_or_else(F::one);
    let tol = F::from_f64(INFLUENCE_TOLERANCE).unwrap_or_else(F::epsilon);
    let base = (F::one() - d) / nf;
    let mut x = vec![F::one() / nf; n];
    let mut next = vec![F::zero(); n];
    for _ in 0..INFLUENCE_MAX_ITERATIONS {
        let dangling: F = (0..n).filter(|&u| out_weight[u] <= F::zero()).map(|u| x[u]).sum();
        let spread = base + d * dangling / nf;
        next.iter_mut().for_each(|v| *v = spread);
        for u in 0..n {
            if out_weight[u] <= F::zero() {
                continue;
            }
            let share = d * x[u] / out_weight[u];
            for v in 0..n {
                if w[u][v] > F::zero() {
                    next[v] = next[v] + share * w[u][v];
                }
            }
        }
        let change: F = x.iter().zip(&next).map(|(a, b)| (*a - *b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change < tol {
            break;
        }
    }
    Ok(CentralityVector::new(Centrality::Influence, x))
}

fn rank_desc<F: RealScalar>(ids: &[String], mut cands: Vec<(usize, F)>, k: usize) -> Vec<String> {
    cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| ids[a.0].cmp(&ids[b.0])));
    cands.into_iter().take(k).map(|(i, _)| ids[i].clone()).collect()
}

/// Up to `k` out-neighbours of `node`, highest influence first.
pub fn suggest_influencers<W: Scalar, F: RealScalar>(
    m: &Sociomatrix<W>,
    influence: &CentralityVector<F>,
    node: &str,
    k: usize,
) -> Result<Vec<String>, SnaError> {
    m.require_one_mode()?;
    let v = m.row_of(node).ok_or_else(|| SnaError::UnknownNode(node.to_string()))?;
    let cands = m.out_adjacency()[v].iter().map(|&j| (j, influence.values[j])).collect();
    Ok(rank_desc(m.rows(), cands, k))
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                q.push_back(w);
            }
        }
    }
    dist
}

/// Up to `k` nodes lying on shortest paths that reach `node`, ranked by the
/// number of sources whose shortest paths to `node` pass through them.
pub fn suggest_mediators<W: Scalar>(m: &Sociomatrix<W>, node: &str, k: usize) -> Result<Vec<String>, SnaError> {
    m.require_one_mode()?;
    let v = m.row_of(node).ok_or_else(|| SnaError::UnknownNode(node.to_string()))?;
    let n = m.rows().len();
    let to_v = bfs(&m.in_adjacency(), v);
    let adj = m.out_adjacency();
    let mut counts = vec![0usize; n];
    for s in (0..n).filter(|&s| s != v) {
        let from_s = bfs(&adj, s);
        if from_s[v] == usize::MAX {
            continue;
        }
        for w in (0..n).filter(|&w| w != s && w != v) {
            if from_s[w] != usize::MAX && to_v[w] != usize::MAX && from_s[w] + to_v[w] == from_s[v] {
                counts[w] += 1;
            }
        }
    }
    let cands = counts.into_iter().enumerate().filter(|&(_, c)| c > 0).map(|(w, c)| (w, c as f64)).collect();
    Ok(rank_desc(m.rows(), cands, k))
}
