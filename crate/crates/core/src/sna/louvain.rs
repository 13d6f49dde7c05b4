use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Sociomatrix, SnaError};
use crate::scalar::{RealScalar, Scalar};

pub const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition<F> {
    /// Community index per node, numbered by first appearance in node order.
    pub membership: Vec<usize>,
    pub modularity: F,
}

impl<F> Partition<F> {
    pub fn community_count(&self) -> usize {
        self.membership.iter().max().map_or(0, |m| m + 1)
    }

    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (i, &c) in self.membership.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// `(W + Wᵀ) / 2` as dense floats.
pub fn symmetrized<W: Scalar, F: RealScalar>(m: &Sociomatrix<W>) -> Result<Vec<Vec<F>>, SnaError> {
    m.require_one_mode()?;
    let w: Vec<Vec<F>> = m.dense();
    let n = w.len();
    let half = F::from_f64(0.5).unwrap_or_else(F::one);
    Ok((0..n).map(|i| (0..n).map(|j| (w[i][j] + w[j][i]) * half).collect()).collect())
}

/// Newman modularity of `membership` over a symmetric weight matrix.
pub fn modularity_of<F: RealScalar>(a: &[Vec<F>], membership: &[usize]) -> F {
    let k: Vec<F> = a.iter().map(|row| row.iter().copied().sum()).collect();
    let two_m: F = k.iter().copied().sum();
    if two_m <= F::zero() {
        return F::zero();
    }
    let groups = membership.iter().max().map_or(0, |m| m + 1);
    let mut internal = vec![F::zero(); groups];
    let mut total = vec![F::zero(); groups];
    for (i, row) in a.iter().enumerate() {
        total[membership[i]] = total[membership[i]] + k[i];
        for (j, &aij) in row.iter().enumerate() {
            if membership[i] == membership[j] {
                internal[membership[i]] = internal[membership[i]] + aij;
            }
        }
    }
    internal.iter().zip(&total).map(|(&l, &t)| l / two_m - (t / two_m) * (t / two_m)).sum()
}

pub fn modularity<W: Scalar, F: RealScalar>(m: &Sociomatrix<W>, membership: &[usize]) -> Result<F, SnaError> {
    Ok(modularity_of(&symmetrized::<W, F>(m)?, membership))
}

struct Level<F> {
    /// Neighbour lists without self loops.
    adj: Vec<Vec<(usize, F)>>,
    self_loop: Vec<F>,
    degree: Vec<F>,
}

impl<F: RealScalar> Level<F> {
    fn from_dense(a: &[Vec<F>]) -> Self {
        let n = a.len();
        let mut adj = vec![Vec::new(); n];
        let mut self_loop = vec![F::zero(); n];
        for (i, row) in a.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if w > F::zero() {
                    if i == j {
                        self_loop[i] = w;
                    } else {
                        adj[i].push((j, w));
                    }
                }
            }
        }
        let degree = (0..n).map(|i| adj[i].iter().map(|&(_, w)| w).sum::<F>() + self_loop[i]).collect();
        Level { adj, self_loop, degree }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase from `comm`. Returns the community of each node.
    fn local_moves(&self, mut comm: Vec<usize>, two_m: F, eps: F) -> Vec<usize> {
        let n = self.len();
        let mut tot = vec![F::zero(); n];
        let mut size = vec![0usize; n];
        for (i, &c) in comm.iter().enumerate() {
            tot[c] = tot[c] + self.degree[i];
            size[c] += 1;
        }
        let mut link = vec![F::zero(); n];
        let mut touched: Vec<usize> = Vec::new();
        loop {
            let mut moved = false;
            for i in 0..n {
                let ki = self.degree[i];
                let old = comm[i];
                tot[old] = tot[old] - ki;
                size[old] -= 1;
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if link[c] == F::zero() && !touched.contains(&c) {
                        touched.push(c);
                    }
                    link[c] = link[c] + w;
                }
                touched.sort_unstable();
                let gain = |c: usize, link_c: F| link_c - ki * tot[c] / two_m;
                let mut best = old;
                let mut best_gain = gain(old, link[old]);
                for &c in &touched {
                    if c == old {
                        continue;
                    }
                    let g = gain(c, link[c]);
                    if g > best_gain + eps {
                        best = c;
                        best_gain = g;
                    }
                }
                if size[old] > 0 && F::zero() > best_gain + eps {
                    // leaving for an empty community beats every neighbour
                    best = size.iter().position(|&s| s == 0).unwrap_or(old);
                }
                for &c in &touched {
                    link[c] = F::zero();
                }
                touched.clear();
                tot[best] = tot[best] + ki;
                size[best] += 1;
                if best != old {
                    comm[i] = best;
                    moved = true;
                }
            }
            if !moved {
                return comm;
            }
        }
    }

    fn aggregate(&self, comm: &[usize], groups: usize) -> Self {
        let mut dense = vec![vec![F::zero(); groups]; groups];
        for i in 0..self.len() {
            let ci = comm[i];
            dense[ci][ci] = dense[ci][ci] + self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                dense[ci][comm[j]] = dense[ci][comm[j]] + w;
            }
        }
        Level::from_dense(&dense)
    }
}

fn renumber(comm: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; comm.len()];
    let mut next = 0;
    for c in comm.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
    next
}

/// Runs of the node-order restart loop used by [`louvain`].
pub const LOUVAIN_RESTARTS: usize = 16;

/// Largest graph that gets fine tuning and perturbation rounds.
pub const POLISH_MAX_NODES: usize = 256;

/// Perturbation rounds per restart in the final iterated local search.
pub const PERTURBATIONS_PER_RUN: usize = 16;

/// Seed of the fixed node-order permutations and perturbations.
pub const LOUVAIN_SEED: u64 = 0x5eed_1a7e;

/// Louvain community detection on the symmetrised matrix.
///
/// Each run is multilevel Louvain with refinement: after a coarser level is
/// solved its partition is projected back and node moves are re-run at the
/// finer level. The first run visits nodes in index order, later runs use
/// fixed pseudo-random orders. On graphs up to [`POLISH_MAX_NODES`] every run
/// is polished by Kernighan-Lin sweeps and community merges, and a seeded
/// perturbation search follows. The highest modularity wins, the earliest
/// candidate on ties; moves need a strictly positive gain and ties between
/// targets go to the lowest community index, so results are deterministic.
pub fn louvain<W: Scalar, F: RealScalar>(m: &Sociomatrix<W>) -> Result<Partition<F>, SnaError> {
    let a = symmetrized::<W, F>(m)?;
    Ok(louvain_dense(&a, LOUVAIN_RESTARTS))
}

fn solve<F: RealScalar>(level: &Level<F>, two_m: F, eps: F) -> Vec<usize> {
    let n = level.len();
    let mut comm = level.local_moves((0..n).collect(), two_m, eps);
    let groups = renumber(&mut comm);
    if groups == n {
        return comm;
    }
    let coarse = solve(&level.aggregate(&comm, groups), two_m, eps);
    let projected: Vec<usize> = comm.iter().map(|&c| coarse[c]).collect();
    let mut refined = level.local_moves(projected, two_m, eps);
    renumber(&mut refined);
    refined
}

fn single_run<F: RealScalar>(a: &[Vec<F>], order: &[usize], two_m: F, eps: F) -> Vec<usize> {
    let permuted: Vec<Vec<F>> = order.iter().map(|&i| order.iter().map(|&j| a[i][j]).collect()).collect();
    let local = solve(&Level::from_dense(&permuted), two_m, eps);
    let mut membership = vec![0; a.len()];
    for (pos, &node) in order.iter().enumerate() {
        membership[node] = local[pos];
    }
    renumber(&mut membership);
    membership
}

/// Kernighan-Lin style fine tuning on the original graph: every node is moved
/// exactly once per sweep, always taking the best available move (even a
/// losing one, including into an empty community), and the best intermediate
/// partition is kept. Sweeps repeat while they improve modularity.
fn fine_tune<F: RealScalar>(a: &[Vec<F>], mut membership: Vec<usize>, two_m: F, eps: F) -> Vec<usize> {
    let n = a.len();
    let k: Vec<F> = a.iter().map(|r| r.iter().copied().sum()).collect();
    let two = F::one() + F::one();
    let mut best_q = modularity_of(a, &membership);
    loop {
        let mut state = membership.clone();
        let mut tot = vec![F::zero(); n];
        let mut size = vec![0usize; n];
        for i in 0..n {
            tot[state[i]] = tot[state[i]] + k[i];
            size[state[i]] += 1;
        }
        let mut moved = vec![false; n];
        let mut q = best_q;
        let mut improved = false;
        for _ in 0..n {
            let mut choice: Option<(F, usize, usize)> = None;
            for i in (0..n).filter(|&i| !moved[i]) {
                let from = state[i];
                let mut link = vec![F::zero(); n];
                for j in (0..n).filter(|&j| j != i) {
                    link[state[j]] = link[state[j]] + a[i][j];
                }
                let empty = size.iter().position(|&s| s == 0);
                for c in 0..n {
                    let candidate = c != from && (size[c] > 0 || (Some(c) == empty && size[from] > 1));
                    if !candidate {
                        continue;
                    }
                    let delta = two * (link[c] - link[from]) / two_m
                        - two * k[i] * (tot[c] - tot[from] + k[i]) / (two_m * two_m);
                    if choice.is_none_or(|(best, _, _)| delta > best + eps) {
                        choice = Some((delta, i, c));
                    }
                }
            }
            let Some((delta, i, c)) = choice else { break };
            let from = state[i];
            tot[from] = tot[from] - k[i];
            size[from] -= 1;
            tot[c] = tot[c] + k[i];
            size[c] += 1;
            state[i] = c;
            moved[i] = true;
            q = q + delta;
            if q > best_q + eps {
                best_q = modularity_of(a, &state);
                membership = state.clone();
                improved = true;
            }
        }
        if !improved {
            renumber(&mut membership);
            match best_merge(a, &membership, best_q, eps) {
                Some((merged, q)) => {
                    membership = merged;
                    best_q = q;
                }
                None => return membership,
            }
        }
    }
}

/// The best strictly improving merge of two communities, if any.
fn best_merge<F: RealScalar>(a: &[Vec<F>], membership: &[usize], q: F, eps: F) -> Option<(Vec<usize>, F)> {
    let groups = membership.iter().max().map_or(0, |m| m + 1);
    let mut best: Option<(Vec<usize>, F)> = None;
    for x in 0..groups {
        for y in x + 1..groups {
            let merged: Vec<usize> = membership.iter().map(|&c| if c == y { x } else { c }).collect();
            let mq = modularity_of(a, &merged);
            let bar = best.as_ref().map_or(q, |b| b.1);
            if mq > bar + eps {
                best = Some((merged, mq));
            }
        }
    }
    best.map(|(mut m, q)| {
        renumber(&mut m);
        (m, q)
    })
}

/// Louvain over a symmetric weight matrix with `runs` node orders (at least one).
pub fn louvain_dense<F: RealScalar>(a: &[Vec<F>], runs: usize) -> Partition<F> {
    let n = a.len();
    let two_m: F = a.iter().flat_map(|r| r.iter().copied()).sum();
    if two_m <= F::zero() {
        return Partition { membership: (0..n).collect(), modularity: F::zero() };
    }
    let eps = F::from_f64(GAIN_TOLERANCE).unwrap_or_else(F::epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(LOUVAIN_SEED);
    let polish = n <= POLISH_MAX_NODES;
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<Partition<F>> = None;
    for run in 0..runs.max(1) {
        if run > 0 {
            order.shuffle(&mut rng);
        }
        let mut membership = single_run(a, &order, two_m, eps);
        if polish {
            membership = fine_tune(a, membership, two_m, eps);
        }
        renumber(&mut membership);
        let modularity = modularity_of(a, &membership);
        if best.as_ref().is_none_or(|b| modularity > b.modularity + eps) {
            best = Some(Partition { membership, modularity });
        }
    }
    let mut best = best.expect("at least one run");
    if !polish {
        return best;
    }
    let level = Level::from_dense(a);
    for round in 0..runs.max(1) * PERTURBATIONS_PER_RUN {
        let candidate: Vec<usize> = if round % 2 == 0 {
            let mut c = best.membership.clone();
            for _ in 0..(n / 4).max(1) {
                let node = rng.gen_range(0..n);
                c[node] = rng.gen_range(0..n);
            }
            c
        } else {
            let k = 2 + round % 4 / 2;
            (0..n).map(|_| rng.gen_range(0..k.min(n))).collect()
        };
        let moved = level.local_moves(candidate, two_m, eps);
        let mut membership = fine_tune(a, moved, two_m, eps);
        renumber(&mut membership);
        let modularity = modularity_of(a, &membership);
        if modularity > best.modularity + eps {
            best = Partition { membership, modularity };
        }
    }
    best
}
