//! Isolation forest over fixed-length feature vectors. Trees are grown on
//! subsamples drawn without replacement; per-tree RNG seeds derive from the
//! master seed and the tree index, so results are reproducible regardless of
//! build order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Forest construction parameters.
#[derive(Debug, Clone)]
pub struct ForestOptions {
    /// Number of trees to grow.
    pub trees: usize,
    /// Subsample size per tree (capped at the data size).
    pub subsample: usize,
    /// Master RNG seed.
    pub seed: u64,
    /// Cap on tree depth; `None` applies the usual `ceil(log2(subsample))`.
    pub height_limit: Option<usize>,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            trees: 100,
            subsample: 256,
            seed: 42,
            height_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Internal {
        dim: usize,
        split: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Depth of the leaf `x` lands in, plus the subtree-size adjustment for
    /// unsplit leaves.
    fn path_length(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        let mut depth = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { size } => return depth as f64 + expected_path_length(*size),
                Node::Internal {
                    dim,
                    split,
                    left,
                    right,
                } => {
                    idx = if x[*dim] < *split { *left } else { *right };
                    depth += 1;
                }
            }
        }
    }
}

/// Average unsuccessful-search path length of a binary search tree over `n`
/// points; normalizes isolation depths.
pub fn expected_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let nf = n as f64;
            2.0 * ((nf - 1.0).ln() + EULER_MASCHERONI) - 2.0 * (nf - 1.0) / nf
        }
    }
}

/// A trained isolation forest.
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
    subsample: usize,
}

impl Forest {
    /// Grows `opts.trees` isolation trees over `data` (rows are points).
    pub fn fit(data: &[Vec<f64>], opts: &ForestOptions) -> Forest {
        assert!(!data.is_empty(), "isolation forest needs data");
        let psi = opts.subsample.min(data.len()).max(1);
        let limit = opts
            .height_limit
            .unwrap_or_else(|| (psi as f64).log2().ceil().max(0.0) as usize);
        let trees = (0..opts.trees)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(opts.seed, i));
                let sample = rand::seq::index::sample(&mut rng, data.len(), psi).into_vec();
                let mut nodes = Vec::new();
                build(data, sample, 0, limit, &mut rng, &mut nodes);
                Tree { nodes }
            })
            .collect();
        Forest {
            trees,
            subsample: psi,
        }
    }

    /// Anomaly score in [0, 1]; higher means easier to isolate.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mean_path: f64 = self
            .trees
            .iter()
            .map(|t| t.path_length(x))
            .sum::<f64>()
            / self.trees.len() as f64;
        2f64.powf(-mean_path / expected_path_length(self.subsample))
    }
}

fn tree_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Recursively grows one tree; returns the arena index of the created node.
fn build(
    data: &[Vec<f64>],
    points: Vec<usize>,
    depth: usize,
    limit: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    if depth >= limit || points.len() <= 1 {
        nodes.push(Node::Leaf { size: points.len() });
        return nodes.len() - 1;
    }
    let dims = data[points[0]].len();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); dims];
    for &p in &points {
        for (range, &value) in ranges.iter_mut().zip(&data[p]) {
            range.0 = range.0.min(value);
            range.1 = range.1.max(value);
        }
    }
    let mut candidates = Vec::new();
    for (d, (lo, hi)) in ranges.into_iter().enumerate() {
        if hi > lo {
            candidates.push((d, lo, hi));
        }
    }
    if candidates.is_empty() {
        // All remaining points are identical; nothing can split them.
        nodes.push(Node::Leaf { size: points.len() });
        return nodes.len() - 1;
    }
    let (dim, lo, hi) = candidates[rng.gen_range(0..candidates.len())];
    let split = rng.gen_range(lo..hi);
    let (left_pts, right_pts): (Vec<usize>, Vec<usize>) =
        points.into_iter().partition(|&p| data[p][dim] < split);

    let idx = nodes.len();
    nodes.push(Node::Leaf { size: 0 }); // placeholder until children exist
    let left = build(data, left_pts, depth + 1, limit, rng, nodes);
    let right = build(data, right_pts, depth + 1, limit, rng, nodes);
    nodes[idx] = Node::Internal {
        dim,
        split,
        left,
        right,
    };
    idx
}
