//! Null-distribution samplers.
//!
//! * `col`: every column is independently permuted over the rows, so column
//!   margins are kept exactly and row margins float.
//! * `swap`: checkerboard swaps `(r1,c1),(r2,c2) -> (r1,c2),(r2,c1)` on a copy of
//!   the original; both margins are kept exactly.
//! * `graph`: per-graph edge swaps `(a,b),(c,d) -> (a,d),(c,b)`, skipping any
//!   swap that would create a self-loop or a parallel edge. Degrees are kept.
//!
//! Ensemble member `i` is always produced from the original dataset with the
//! RNG stream `(seed, i)`, so members are exchangeable and can be generated in
//! any order.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{BinaryDataset, Graph, GraphTransactionSet};
use crate::error::{Error, Result};
use crate::rng;

/// Swap attempts per cell used when a swap randomizer has no explicit count.
pub const DEFAULT_SWAPS_PER_CELL: usize = 4;
/// Edge-swap attempts per graph used when none are given.
pub const DEFAULT_GRAPH_ATTEMPTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomizerKind {
    Col,
    Swap,
    GraphEdgeSwap,
}

impl RandomizerKind {
    pub fn name(self) -> &'static str {
        match self {
            RandomizerKind::Col => "col",
            RandomizerKind::Swap => "swap",
            RandomizerKind::GraphEdgeSwap => "graph",
        }
    }
}

impl fmt::Display for RandomizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RandomizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "col" => Ok(Self::Col),
            "swap" => Ok(Self::Swap),
            "graph" | "graph-edge-swap" => Ok(Self::GraphEdgeSwap),
            other => Err(Error::invalid(format!("unknown randomizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizerSpec {
    pub kind: RandomizerKind,
    /// Swap attempts (per dataset for `swap`, per graph for `graph`). `None`
    /// selects the documented default.
    pub attempts: Option<usize>,
    pub seed: u64,
}

impl RandomizerSpec {
    pub fn new(kind: RandomizerKind, attempts: Option<usize>, seed: u64) -> Result<Self> {
        let spec = Self {
            kind,
            attempts,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attempts == Some(0) && self.kind != RandomizerKind::Col {
            return Err(Error::invalid("attempts must be >= 1 for swap randomizers"));
        }
        Ok(())
    }

    pub fn swap_attempts(&self, d: &BinaryDataset) -> usize {
        self.attempts
            .unwrap_or(DEFAULT_SWAPS_PER_CELL * d.n_cells())
            .max(1)
    }

    pub fn graph_attempts(&self) -> usize {
        self.attempts.unwrap_or(DEFAULT_GRAPH_ATTEMPTS)
    }

    /// Ensemble member `index` for a binary dataset.
    pub fn randomize(&self, d: &BinaryDataset, index: u64) -> Result<BinaryDataset> {
        let mut rng = rng::stream(self.seed, index);
        match self.kind {
            RandomizerKind::Col => Ok(randomize_col(d, &mut rng)),
            RandomizerKind::Swap => Ok(randomize_swap(d, self.swap_attempts(d), &mut rng).0),
            RandomizerKind::GraphEdgeSwap => Err(Error::invalid(
                "graph randomizer cannot be applied to a binary dataset",
            )),
        }
    }

    /// Ensemble member `index` for a graph transaction set.
    pub fn randomize_graphs(
        &self,
        g: &GraphTransactionSet,
        index: u64,
    ) -> Result<GraphTransactionSet> {
        match self.kind {
            RandomizerKind::GraphEdgeSwap => {
                let mut rng = rng::stream(self.seed, index);
                Ok(randomize_graph(g, self.graph_attempts(), &mut rng).0)
            }
            other => Err(Error::invalid(format!(
                "{other} randomizer cannot be applied to graph transactions"
            ))),
        }
    }
}

/// Outcome counters for a swap chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SwapStats {
    pub attempted: usize,
    pub accepted: usize,
}

impl SwapStats {
    pub fn rejected(&self) -> usize {
        self.attempted - self.accepted
    }
}

/// Permutes each column uniformly over the rows.
pub fn randomize_col<R: Rng + ?Sized>(d: &BinaryDataset, rng: &mut R) -> BinaryDataset {
    let n = d.n_rows();
    let mut rows: Vec<Vec<u32>> = d.row_margins().iter().map(|_| Vec::new()).collect();
    for (c, &k) in d.col_margins().iter().enumerate() {
        if k == 0 {
            continue;
        }
        for r in index::sample(rng, n, k) {
            rows[r].push(c as u32);
        }
    }
    d.replace_rows(rows)
}

enum CellSet {
    Dense { bits: Vec<u64>, cols: usize },
    Sparse { set: HashSet<u64>, cols: usize },
}

// Above this many matrix cells the membership bitmap is not worth it.
const DENSE_LIMIT: usize = 1 << 27;

impl CellSet {
    fn new(d: &BinaryDataset) -> Self {
        let cols = d.n_cols();
        if d.n_rows().saturating_mul(cols) <= DENSE_LIMIT {
            let mut bits = vec![0u64; (d.n_rows() * cols).div_ceil(64)];
            for (r, c) in d.cells() {
                let k = r * cols + c as usize;
                bits[k / 64] |= 1 << (k % 64);
            }
            CellSet::Dense { bits, cols }
        } else {
            let set = d
                .cells()
                .map(|(r, c)| (r * cols) as u64 + c as u64)
                .collect();
            CellSet::Sparse { set, cols }
        }
    }

    fn contains(&self, r: u32, c: u32) -> bool {
        match self {
            CellSet::Dense { bits, cols } => {
                let k = r as usize * cols + c as usize;
                bits[k / 64] & (1 << (k % 64)) != 0
            }
            CellSet::Sparse { set, cols } => set.contains(&(r as u64 * *cols as u64 + c as u64)),
        }
    }

    fn set(&mut self, r: u32, c: u32, on: bool) {
        match self {
            CellSet::Dense { bits, cols } => {
                let k = r as usize * *cols + c as usize;
                if on {
                    bits[k / 64] |= 1 << (k % 64);
                } else {
                    bits[k / 64] &= !(1 << (k % 64));
                }
            }
            CellSet::Sparse { set, cols } => {
                let k = r as u64 * *cols as u64 + c as u64;
                if on {
                    set.insert(k);
                } else {
                    set.remove(&k);
                }
            }
        }
    }
}

/// Runs `attempts` checkerboard swap attempts starting from `d`.
pub fn randomize_swap<R: Rng + ?Sized>(
    d: &BinaryDataset,
    attempts: usize,
    rng: &mut R,
) -> (BinaryDataset, SwapStats) {
    let mut cells: Vec<(u32, u32)> = d.cells().map(|(r, c)| (r as u32, c)).collect();
    let mut stats = SwapStats {
        attempted: attempts,
        accepted: 0,
    };
    if cells.len() >= 2 {
        let mut present = CellSet::new(d);
        let n = cells.len();
        for _ in 0..attempts {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let (r1, c1) = cells[i];
            let (r2, c2) = cells[j];
            if r1 == r2 || c1 == c2 || present.contains(r1, c2) || present.contains(r2, c1) {
                continue;
            }
            present.set(r1, c1, false);
            present.set(r2, c2, false);
            present.set(r1, c2, true);
            present.set(r2, c1, true);
            cells[i] = (r1, c2);
            cells[j] = (r2, c1);
            stats.accepted += 1;
        }
    }
    let mut rows = vec![Vec::new(); d.n_rows()];
    for (r, c) in cells {
        rows[r as usize].push(c);
    }
    rows.iter_mut().for_each(|r| r.sort_unstable());
    (d.replace_rows(rows), stats)
}

fn swap_graph<R: Rng + ?Sized>(g: &Graph, attempts: usize, rng: &mut R) -> (Graph, SwapStats) {
    let mut edges: Vec<(u32, u32)> = g.edges().to_vec();
    let labels = g.edge_labels().to_vec();
    let mut stats = SwapStats {
        attempted: attempts,
        accepted: 0,
    };
    let m = edges.len();
    if m >= 2 {
        let mut present: HashSet<(u32, u32)> = edges.iter().copied().collect();
        let norm = |u: u32, v: u32| (u.min(v), u.max(v));
        for _ in 0..attempts {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            if i == j {
                continue;
            }
            let (a, b) = edges[i];
            let (mut c, mut d) = edges[j];
            // Both pairings are reachable by orienting the second edge at random.
            if rng.random_bool(0.5) {
                std::mem::swap(&mut c, &mut d);
            }
            if a == d || c == b {
                continue;
            }
            let e1 = norm(a, d);
            let e2 = norm(c, b);
            if present.contains(&e1) || present.contains(&e2) {
                continue;
            }
            present.remove(&edges[i]);
            present.remove(&edges[j]);
            present.insert(e1);
            present.insert(e2);
            edges[i] = e1;
            edges[j] = e2;
            stats.accepted += 1;
        }
    }
    (g.with_edges(edges, labels), stats)
}

/// Applies `attempts_per_graph` edge-swap attempts to every graph.
pub fn randomize_graph<R: Rng + ?Sized>(
    g: &GraphTransactionSet,
    attempts_per_graph: usize,
    rng: &mut R,
) -> (GraphTransactionSet, SwapStats) {
    let mut total = SwapStats::default();
    let graphs = g
        .graphs
        .iter()
        .map(|graph| {
            let (out, s) = swap_graph(graph, attempts_per_graph, rng);
            total.attempted += s.attempted;
            total.accepted += s.accepted;
            out
        })
        .collect();
    (GraphTransactionSet { graphs }, total)
}

/// `n` independent randomizations of `d`, evaluated in parallel.
pub fn sample_ensemble(
    d: &BinaryDataset,
    spec: &RandomizerSpec,
    n: usize,
) -> Result<Vec<BinaryDataset>> {
    if n == 0 {
        return Err(Error::invalid("n must be ≥ 1"));
    }
    spec.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| spec.randomize(d, i))
        .collect()
}

pub fn sample_graph_ensemble(
    g: &GraphTransactionSet,
    spec: &RandomizerSpec,
    n: usize,
) -> Result<Vec<GraphTransactionSet>> {
    if n == 0 {
        return Err(Error::invalid("n must be ≥ 1"));
    }
    spec.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| spec.randomize_graphs(g, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_graphs;
    use std::collections::BTreeSet;

    fn ds(rows: Vec<Vec<u32>>, cols: usize) -> BinaryDataset {
        BinaryDataset::from_rows(rows, cols).unwrap()
    }

    #[test]
    fn col_on_all_zeros_is_identity() {
        let d = BinaryDataset::zeros(4, 3);
        let out = randomize_col(&d, &mut rng::stream(1, 0));
        assert_eq!(out, d);
    }

    #[test]
    fn col_keeps_column_margins() {
        let d = ds(vec![vec![0], vec![0], vec![]], 2);
        for seed in 0..1000 {
            let out = randomize_col(&d, &mut rng::stream(seed, 0));
            assert_eq!(out.col_margins(), &[2, 0]);
        }
        let d = ds(vec![vec![0], vec![0]], 2);
        for seed in 0..1000 {
            let out = randomize_col(&d, &mut rng::stream(seed, 0));
            assert_eq!(out.col_margins(), &[2, 0]);
        }
    }

    #[test]
    fn single_swap_on_identity() {
        let d = ds(vec![vec![0], vec![1]], 2);
        let mut found = false;
        for seed in 0..32 {
            let (out, stats) = randomize_swap(&d, 1, &mut rng::stream(seed, 0));
            if stats.accepted == 1 {
                assert_eq!(out.rows(), &[vec![1], vec![0]]);
                found = true;
            } else {
                assert_eq!(out, d);
            }
        }
        assert!(found);
    }

    #[test]
    fn swap_reaches_every_permutation_matrix() {
        // Reachable states of the 3x3 identity under margin-preserving swaps are
        // exactly the 6 permutation matrices.
        let d = ds(vec![vec![0], vec![1], vec![2]], 3);
        let mut seen = BTreeSet::new();
        for seed in 0..300 {
            let (out, _) = randomize_swap(&d, 50, &mut rng::stream(seed, 0));
            assert_eq!(out.row_margins(), &[1, 1, 1]);
            assert_eq!(out.col_margins(), &[1, 1, 1]);
            seen.insert(out.rows().to_vec());
        }
        let mut perms = BTreeSet::new();
        for p in [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ] {
            perms.insert(p.iter().map(|&c| vec![c]).collect::<Vec<_>>());
        }
        assert_eq!(seen, perms);
    }

    #[test]
    fn path_graph_degrees_kept() {
        let g = parse_graphs("t 0\nv 0 a\nv 1 a\nv 2 a\ne 0 1 x\ne 1 2 x\n").unwrap();
        let (out, stats) = randomize_graph(&g, 500, &mut rng::stream(3, 0));
        assert_eq!(out.graphs[0].degree_sequence(), vec![1, 2, 1]);
        // Adjacent edges can only swap into a self-loop or a duplicate.
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn two_disjoint_edges_outcomes() {
        let g = parse_graphs("t 0\nv 0 a\nv 1 b\nv 2 c\nv 3 d\ne 0 1 x\ne 2 3 x\n").unwrap();
        let allowed: BTreeSet<BTreeSet<(u32, u32)>> =
            [[(0, 1), (2, 3)], [(0, 3), (1, 2)], [(0, 2), (1, 3)]]
                .iter()
                .map(|s| s.iter().copied().collect())
                .collect();
        let mut seen = BTreeSet::new();
        for seed in 0..200 {
            let (out, _) = randomize_graph(&g, 1, &mut rng::stream(seed, 0));
            let edges: BTreeSet<(u32, u32)> = out.graphs[0].edges().iter().copied().collect();
            assert!(allowed.contains(&edges), "{edges:?}");
            assert!(out.graphs[0].is_simple());
            seen.insert(edges);
        }
        assert_eq!(seen, allowed);
    }

    #[test]
    fn ensemble_contract() {
        let d = ds(vec![vec![0, 1], vec![1, 2], vec![0, 2], vec![2]], 3);
        let spec = RandomizerSpec::new(RandomizerKind::Swap, Some(20), 9).unwrap();
        assert!(sample_ensemble(&d, &spec, 0).is_err());
        let a = sample_ensemble(&d, &spec, 16).unwrap();
        let b = sample_ensemble(&d, &spec, 16).unwrap();
        assert_eq!(a, b);
        // Members depend only on their index.
        assert_eq!(a[5], spec.randomize(&d, 5).unwrap());
        assert!(RandomizerSpec::new(RandomizerKind::Swap, Some(0), 0).is_err());
        assert!(spec
            .randomize_graphs(&GraphTransactionSet::default(), 0)
            .is_err());
    }

    #[test]
    fn sparse_membership_path_matches_dense() {
        // Shape large enough to force the hash-set representation.
        let cols = 1 << 16;
        let rows = (DENSE_LIMIT / cols) + 1;
        let mut r: Vec<Vec<u32>> = vec![Vec::new(); rows];
        r[0] = vec![0, 5];
        r[1] = vec![1];
        r[rows - 1] = vec![7, 9];
        let d = ds(r, cols);
        let (out, stats) = randomize_swap(&d, 200, &mut rng::stream(0, 0));
        assert!(stats.accepted > 0);
        assert_eq!(out.row_margins(), d.row_margins());
        assert_eq!(out.col_margins(), d.col_margins());
    }
}
