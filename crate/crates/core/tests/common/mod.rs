#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use mogen::{NodeId, Path, PathMultiset, Vocabulary};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn vocabulary(n: usize) -> Arc<Vocabulary> {
    Arc::new(Vocabulary::from_labels((0..n).map(|i| format!("v{i}"))).unwrap())
}

/// Unconstrained random node sequences with random frequencies.
pub fn random_corpus(
    rng: &mut impl Rng,
    n_nodes: usize,
    n_paths: usize,
    max_len: usize,
    max_freq: u64,
) -> PathMultiset {
    let paths = (0..n_paths)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            let nodes = (0..len)
                .map(|_| NodeId(rng.random_range(0..n_nodes as u32)))
                .collect();
            Path::new(nodes, rng.random_range(1..=max_freq))
        })
        .collect();
    PathMultiset::new(vocabulary(n_nodes), paths).unwrap()
}

/// Merged frequencies of each distinct node sequence.
pub fn empirical(s: &PathMultiset) -> BTreeMap<Vec<NodeId>, u64> {
    let mut out = BTreeMap::new();
    for p in s.paths() {
        *out.entry(p.nodes.clone()).or_insert(0) += p.frequency;
    }
    out
}

/// A 10-node style graph where every node has `out_degree` distinct successors.
pub fn regular_graph(rng: &mut impl Rng, n: usize, out_degree: usize) -> Vec<Vec<u32>> {
    (0..n as u32)
        .map(|v| {
            let others: Vec<u32> = (0..n as u32).filter(|&u| u != v).collect();
            let mut succ: Vec<u32> = others.choose_multiple(rng, out_degree).copied().collect();
            succ.sort_unstable();
            succ
        })
        .collect()
}

/// A random walk process whose next step depends on the last `order` nodes.
///
/// Each history picks a preferred successor which is taken with probability
/// `bias`; the walk stops after each node with probability `stop`.
pub struct PlantedProcess {
    pub order: usize,
    pub graph: Vec<Vec<u32>>,
    pub bias: f64,
    pub stop: f64,
    preferred: HashMap<Vec<u32>, usize>,
    rng: ChaCha8Rng,
}

impl PlantedProcess {
    pub fn new(seed: u64, order: usize, n_nodes: usize, out_degree: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = regular_graph(&mut rng, n_nodes, out_degree);
        Self {
            order,
            graph,
            bias: 0.9,
            stop: 0.1,
            preferred: HashMap::new(),
            rng,
        }
    }

    fn step(&mut self, history: &[u32]) -> u32 {
        let window = history[history.len().saturating_sub(self.order)..].to_vec();
        let last = *history.last().unwrap() as usize;
        let degree = self.graph[last].len();
        let rng = &mut self.rng;
        let preferred = *self
            .preferred
            .entry(window)
            .or_insert_with(|| rng.random_range(0..degree));
        let idx = if self.rng.random_bool(self.bias) || degree == 1 {
            preferred
        } else {
            let other = self.rng.random_range(0..degree - 1);
            if other >= preferred {
                other + 1
            } else {
                other
            }
        };
        self.graph[last][idx]
    }

    pub fn path(&mut self) -> Vec<u32> {
        let n = self.graph.len() as u32;
        let mut nodes = vec![self.rng.random_range(0..n)];
        while !self.rng.random_bool(self.stop) {
            let next = self.step(&nodes);
            nodes.push(next);
        }
        nodes
    }

    pub fn corpus(&mut self, n_paths: usize) -> PathMultiset {
        let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for _ in 0..n_paths {
            *counts.entry(self.path()).or_insert(0) += 1;
        }
        let paths = counts
            .into_iter()
            .map(|(nodes, f)| Path::new(nodes.into_iter().map(NodeId).collect(), f))
            .collect();
        PathMultiset::new(vocabulary(self.graph.len()), paths).unwrap()
    }
}

/// Memoryless random walks with geometric lengths of the given mean.
pub fn random_walk_corpus(
    seed: u64,
    n_nodes: usize,
    out_degree: usize,
    n_paths: usize,
    mean_len: f64,
) -> PathMultiset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = regular_graph(&mut rng, n_nodes, out_degree);
    let stop = 1.0 / mean_len;
    let paths = (0..n_paths)
        .map(|_| {
            let mut v = rng.random_range(0..n_nodes as u32);
            let mut nodes = vec![NodeId(v)];
            while !rng.random_bool(stop) {
                v = *graph[v as usize].choose(&mut rng).unwrap();
                nodes.push(NodeId(v));
            }
            Path::new(nodes, 1)
        })
        .collect();
    PathMultiset::new(vocabulary(n_nodes), paths).unwrap()
}

/// The five-path toy network: A,B -> C -> D -> E,F, plus a path A -> C.
pub fn toy_corpus(acde: u64, acdf: u64, bcde: u64, bcdf: u64, ac: u64) -> PathMultiset {
    let vocab = Arc::new(Vocabulary::from_labels(["A", "B", "C", "D", "E", "F"]).unwrap());
    let ids = |labels: &[&str]| vocab.resolve(labels).unwrap();
    let paths: Vec<Path> = [
        (ids(&["A", "C", "D", "E"]), acde),
        (ids(&["A", "C", "D", "F"]), acdf),
        (ids(&["B", "C", "D", "E"]), bcde),
        (ids(&["B", "C", "D", "F"]), bcdf),
        (ids(&["A", "C"]), ac),
    ]
    .into_iter()
    .filter(|(_, f)| *f > 0)
    .map(|(n, f)| Path::new(n, f))
    .collect();
    PathMultiset::new(vocab, paths).unwrap()
}

pub fn report(criterion: u32, name: &str, pass: bool, detail: impl std::fmt::Display) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("{verdict} criterion {criterion:>2} [{name}]: {detail}");
}
