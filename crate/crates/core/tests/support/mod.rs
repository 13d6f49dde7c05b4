//! Independent reference implementations used by the property and acceptance
//! tests. Nothing here calls into the library's evaluators or graph code.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

// ---------------------------------------------------------------- formulas

pub const ITEMS: [&str; 6] = ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6"];
pub const FUNCS: [&str; 5] = ["sum", "mean", "min", "max", "count_answered"];

#[derive(Debug, Clone)]
pub enum Tree {
    Num(Q),
    Ref(String),
    Call { func: &'static str, args: Vec<String>, range: bool },
    Bin(char, Box<Tree>, Box<Tree>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    Missing(String),
    DivZero,
}

fn random_literal<R: Rng>(rng: &mut R) -> Q {
    if rng.gen_bool(0.25) {
        q(rng.gen_range(0..20), 2)
    } else {
        q(rng.gen_range(0..10), 1)
    }
}

fn random_call<R: Rng>(rng: &mut R) -> Tree {
    let func = FUNCS[rng.gen_range(0..FUNCS.len())];
    if rng.gen_bool(0.4) {
        let a = rng.gen_range(1..=ITEMS.len());
        let b = rng.gen_range(a..=ITEMS.len());
        Tree::Call { func, args: (a..=b).map(|i| format!("Q{i}")).collect(), range: true }
    } else {
        let k = rng.gen_range(1..=4);
        let args = (0..k).map(|_| ITEMS[rng.gen_range(0..ITEMS.len())].to_string()).collect();
        Tree::Call { func, args, range: false }
    }
}

/// A random formula tree of depth at most `depth`.
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize) -> Tree {
    if depth <= 1 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..10) {
            0..=3 => Tree::Num(random_literal(rng)),
            4..=6 => Tree::Ref(ITEMS[rng.gen_range(0..ITEMS.len())].to_string()),
            _ => random_call(rng),
        };
    }
    let op = ['+', '-', '*', '/'][rng.gen_range(0..4)];
    Tree::Bin(op, Box::new(random_tree(rng, depth - 1)), Box::new(random_tree(rng, depth - 1)))
}

pub fn tree_depth(t: &Tree) -> usize {
    match t {
        Tree::Bin(_, l, r) => 1 + tree_depth(l).max(tree_depth(r)),
        _ => 1,
    }
}

fn prec(op: char) -> u8 {
    if op == '+' || op == '-' {
        1
    } else {
        2
    }
}

fn literal_text(v: &Q) -> String {
    if v.is_integer() {
        v.to_integer().to_string()
    } else {
        // halves only
        let twice = (v * q(2, 1)).to_integer();
        format!("{}.5", &twice / 2)
    }
}

/// Source text with the minimal parentheses implied by precedence and left
/// associativity.
pub fn render(t: &Tree) -> String {
    match t {
        Tree::Num(v) => literal_text(v),
        Tree::Ref(r) => r.clone(),
        Tree::Call { func, args, range } => {
            if *range {
                format!("{func}({}..{})", args[0], args[args.len() - 1])
            } else {
                format!("{func}({})", args.join(", "))
            }
        }
        Tree::Bin(op, l, r) => {
            let wrap = |child: &Tree, right: bool| {
                let s = render(child);
                match child {
                    Tree::Bin(c, _, _) if prec(*c) < prec(*op) || (right && prec(*c) == prec(*op)) => format!("({s})"),
                    _ => s,
                }
            };
            format!("{} {op} {}", wrap(l, false), wrap(r, true))
        }
    }
}

/// Reference semantics: bare references, sum, min and max need every item;
/// mean and count_answered skip missing items (mean of nothing is missing);
/// errors surface in left-to-right order.
pub fn eval_tree(t: &Tree, answers: &BTreeMap<String, Q>) -> Result<Q, TreeError> {
    match t {
        Tree::Num(v) => Ok(v.clone()),
        Tree::Ref(r) => answers.get(r).cloned().ok_or_else(|| TreeError::Missing(r.clone())),
        Tree::Call { func, args, .. } => {
            let present: Vec<Q> = args.iter().filter_map(|a| answers.get(a).cloned()).collect();
            let first_missing = args.iter().find(|a| !answers.contains_key(*a)).cloned();
            match *func {
                "count_answered" => Ok(q(present.len() as i64, 1)),
                "mean" => {
                    if present.is_empty() {
                        Err(TreeError::Missing(args[0].clone()))
                    } else {
                        let total = present.iter().fold(Q::zero(), |a, b| a + b);
                        Ok(total / q(present.len() as i64, 1))
                    }
                }
                _ => {
                    if let Some(m) = first_missing {
                        return Err(TreeError::Missing(m));
                    }
                    let mut it = present.into_iter();
                    let first = it.next().expect("calls have arguments");
                    Ok(match *func {
                        "sum" => it.fold(first, |a, b| a + b),
                        "min" => it.fold(first, |a, b| if b < a { b } else { a }),
                        _ => it.fold(first, |a, b| if b > a { b } else { a }),
                    })
                }
            }
        }
        Tree::Bin(op, l, r) => {
            let a = eval_tree(l, answers)?;
            let b = eval_tree(r, answers)?;
            match op {
                '+' => Ok(a + b),
                '-' => Ok(a - b),
                '*' => Ok(a * b),
                _ if b.is_zero() => Err(TreeError::DivZero),
                _ => Ok(a / b),
            }
        }
    }
}

pub fn random_answers<R: Rng>(rng: &mut R) -> BTreeMap<String, Q> {
    let mut out = BTreeMap::new();
    for id in ITEMS {
        if rng.gen_bool(0.8) {
            let v = if rng.gen_bool(0.2) { q(rng.gen_range(-6..7), 2) } else { q(rng.gen_range(-3..7), 1) };
            out.insert(id.to_string(), v);
        }
    }
    out
}

// ------------------------------------------------------------------ graphs

pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

pub fn in_degrees(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut d = vec![0; n];
    for &(_, j) in edges {
        d[j] += 1;
    }
    d
}

fn all_shortest_paths(n: usize, adj: &[Vec<bool>], s: usize, t: usize, len: usize) -> Vec<Vec<usize>> {
    fn walk(adj: &[Vec<bool>], path: &mut Vec<usize>, t: usize, len: usize, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().expect("non-empty");
        if path.len() - 1 == len {
            if last == t {
                out.push(path.clone());
            }
            return;
        }
        for next in 0..adj.len() {
            if adj[last][next] && !path.contains(&next) {
                path.push(next);
                walk(adj, path, t, len, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(n);
    path.push(s);
    walk(adj, &mut path, t, len, &mut out);
    out
}

/// Betweenness by enumerating every shortest path, normalised by (n-1)(n-2).
pub fn brute_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    let mut adj = vec![vec![false; n]; n];
    for &(i, j) in edges {
        adj[i][j] = true;
    }
    // Floyd-Warshall hop distances
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if adj[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    for s in 0..n {
        for t in 0..n {
            if s == t || d[s][t] >= inf {
                continue;
            }
            let paths = all_shortest_paths(n, &adj, s, t, d[s][t]);
            let total = paths.len() as f64;
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                let through = paths.iter().filter(|p| p.contains(&v)).count() as f64;
                out[v] += through / total;
            }
        }
    }
    let scale = ((n - 1) * (n - 2)) as f64;
    out.iter().map(|b| b / scale).collect()
}

/// Power iteration on the explicit dense Google matrix.
pub fn dense_pagerank(w: &[Vec<f64>], damping: f64) -> Vec<f64> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        let out: f64 = w[i].iter().sum();
        for j in 0..n {
            let step = if out > 0.0 { w[i][j] / out } else { 1.0 / nf };
            g[i][j] = damping * step + (1.0 - damping) / nf;
        }
    }
    let mut x = vec![1.0 / nf; n];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n).map(|j| (0..n).map(|i| x[i] * g[i][j]).sum()).collect();
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}

/// (W + Wᵀ) / 2 from a directed 0/1 edge list.
pub fn symmetric(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j) in edges {
        a[i][j] += 0.5;
        a[j][i] += 0.5;
    }
    a
}

/// Q = 1/2m Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j).
pub fn modularity_direct(a: &[Vec<f64>], membership: &[usize]) -> f64 {
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if membership[i] == membership[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Best modularity over every set partition (restricted growth strings).
pub fn best_modularity(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    let mut rgs = vec![0usize; n];
    loop {
        best = best.max(modularity_direct(a, &rgs));
        // next restricted growth string
        let mut i = n - 1;
        loop {
            let max_prefix = rgs[..i].iter().copied().max().unwrap_or(0);
            if i > 0 && rgs[i] <= max_prefix {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
            if i <= 1 {
                return best;
            }
            i -= 1;
        }
    }
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == v && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn abs_diff(a: &Q, b: &Q) -> Q {
    (a - b).abs()
}
