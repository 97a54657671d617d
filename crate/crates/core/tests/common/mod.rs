//! Brute-force oracles shared by the property suites and the acceptance run.
#![allow(dead_code)]

use mcgl::datasets::{Dataset, Split};
use mcgl::graph::{classify_edges, noise_rate, reduce_noise};
use mcgl::models::mc_sample_path;
use mcgl::nn::{
    adam_step, backward, finite_diff_check, forward, softmax_cross_entropy, AdamState, Dropout,
    MlpParams,
};
use mcgl::{DenseMatrix, Features, Graph, NormalizationMode, NormalizedAdjacency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdos-Renyi graph, each pair kept with probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

pub fn random_dense(rows: usize, cols: usize, r: &mut impl Rng) -> DenseMatrix {
    let v = (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    DenseMatrix::from_vec(rows, cols, v).unwrap()
}

/// `A + I` as nested vectors, built straight from the edge list.
pub fn dense_adjacency_with_loops(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

pub fn dense_normalized(g: &Graph, mode: NormalizationMode) -> Vec<Vec<f64>> {
    let a = dense_adjacency_with_loops(g);
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != 0.0 {
                out[i][j] = match mode {
                    NormalizationMode::Symmetric => a[i][j] / (deg[i].sqrt() * deg[j].sqrt()),
                    NormalizationMode::RowStochastic => a[i][j] / deg[i],
                };
            }
        }
    }
    out
}

pub fn dense_mul(a: &[Vec<f64>], h: &DenseMatrix) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..h.cols())
                .map(|c| row.iter().enumerate().map(|(j, w)| w * h.get(j, c)).sum())
                .collect()
        })
        .collect()
}

pub fn max_diff(a: &[Vec<f64>], b: &DenseMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - b.get(i, j)).abs());
        }
    }
    worst
}

/// Row `root` of `(D^-1 (A + I))^k`.
pub fn transition_row(g: &Graph, root: usize, k: usize) -> Vec<f64> {
    let p = dense_normalized(g, NormalizationMode::RowStochastic);
    let n = p.len();
    let mut dist = vec![0.0; n];
    dist[root] = 1.0;
    for _ in 0..k {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += dist[i] * p[i][j];
            }
        }
        dist = next;
    }
    dist
}

#[derive(Debug)]
pub struct ChiSquare {
    pub statistic: f64,
    pub critical: f64,
    pub df: usize,
    /// Samples that landed on a node the oracle gives zero mass.
    pub impossible: usize,
}

impl ChiSquare {
    pub fn passes(&self) -> bool {
        self.impossible == 0 && (self.df == 0 || self.statistic <= self.critical)
    }
}

/// Goodness of fit of `samples` walk end points from `root` against the
/// matrix-power row, at the 99% level. Cells with expected count below 5
/// are pooled.
pub fn chi_square_walks(g: &Graph, root: usize, k: usize, samples: usize, seed: u64) -> ChiSquare {
    let expected = transition_row(g, root, k);
    let mut counts = vec![0usize; g.num_nodes()];
    let mut r = rng(seed);
    for _ in 0..samples {
        counts[mc_sample_path(g, root, k, true, &mut r)] += 1;
    }
    let mut impossible = 0;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for (p, &c) in expected.iter().zip(&counts) {
        let e = p * samples as f64;
        if *p <= 1e-15 {
            impossible += c;
        } else if e < 5.0 {
            pooled.0 += e;
            pooled.1 += c as f64;
        } else {
            cells.push((e, c as f64));
        }
    }
    if pooled.0 > 0.0 {
        cells.push(pooled);
    }
    let statistic = cells.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let df = cells.len().saturating_sub(1);
    let critical = if df == 0 {
        0.0
    } else {
        ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99)
    };
    ChiSquare {
        statistic,
        critical,
        df,
        impossible,
    }
}

/// `y_i^(k) = sum_{j in N_i + i} y_j^(k-1) / (deg_i + 1)`, evaluated node by node
/// without any matrix.
pub fn recursive_scores(g: &Graph, y0: &DenseMatrix, node: usize, depth: usize) -> Vec<f64> {
    if depth == 0 {
        return y0.row(node).to_vec();
    }
    let mut members = g.neighbor_slice(node).to_vec();
    members.push(node);
    let w = 1.0 / members.len() as f64;
    let mut acc = vec![0.0; y0.cols()];
    for j in members {
        for (a, v) in acc.iter_mut().zip(recursive_scores(g, y0, j, depth - 1)) {
            *a += w * v;
        }
    }
    acc
}

pub fn random_params(dims: &[usize], r: &mut ChaCha8Rng) -> MlpParams {
    let mut p = MlpParams::glorot(dims, r).unwrap();
    for layer in &mut p.layers {
        for b in &mut layer.bias {
            *b = r.gen_range(-0.5..0.5);
        }
    }
    p
}

/// Worst relative gradient error of a random `d x h x c` MLP against central
/// differences.
pub fn random_mlp_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = r.gen_range(1..=8);
    let h = r.gen_range(1..=16);
    let c = r.gen_range(2..=4);
    let n = r.gen_range(3..=8);
    let p = random_params(&[d, h, c], &mut r);
    let x = Features::Dense(random_dense(n, d, &mut r));
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..c)).collect();
    finite_diff_check(&p, &x, &labels, 1e-6).unwrap()
}

/// Losses before each of the first `steps` Adam updates on two linearly
/// separable blobs.
pub fn adam_losses(seed: u64, steps: usize) -> Vec<f64> {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..20 {
        let y = i % 2;
        let centre = if y == 0 { -2.0 } else { 2.0 };
        rows.push(vec![centre + r.gen_range(-0.5..0.5), centre + r.gen_range(-0.5..0.5)]);
        labels.push(y);
    }
    let x = Features::Dense(DenseMatrix::from_rows(&rows).unwrap());
    let mask = vec![true; labels.len()];
    let mut p = MlpParams::glorot(&[2, 8, 2], &mut r).unwrap();
    let mut state = AdamState::new(&p);
    let mut losses = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        let (logits, cache) = forward(&p, &x, Dropout::Off, None).unwrap();
        let (loss, dlogits) = softmax_cross_entropy(&logits, &labels, &mask).unwrap();
        losses.push(loss);
        let grads = backward(&p, &cache, &dlogits, None).unwrap();
        adam_step(&mut p, &grads, &mut state, 0.01, 0.0).unwrap();
    }
    losses
}

/// Fraction of sampled `(leaf, root)` pairs whose labels agree.
pub fn pseudo_label_purity(
    g: &Graph,
    labels: &[usize],
    roots: &[usize],
    k: usize,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut r = rng(seed);
    let mut pure = 0;
    for _ in 0..samples {
        let root = roots[r.gen_range(0..roots.len())];
        let leaf = mc_sample_path(g, root, k, true, &mut r);
        pure += usize::from(labels[leaf] == labels[root]);
    }
    pure as f64 / samples as f64
}

/// Labels that are constant on every connected component, so no edge is bad.
pub fn component_labels(g: &Graph, classes: usize) -> Vec<usize> {
    g.connected_components().iter().map(|c| c % classes).collect()
}

pub fn random_labels(n: usize, classes: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(0..classes)).collect()
}

/// Outcome of one reduce_noise call checked against its contract.
#[derive(Debug)]
pub struct ReductionCheck {
    pub target: f64,
    pub achieved: f64,
    pub good_preserved: bool,
    pub minimal: bool,
    pub idempotent: bool,
}

impl ReductionCheck {
    pub fn passes(&self) -> bool {
        self.achieved <= self.target + 1e-12 && self.good_preserved && self.minimal && self.idempotent
    }
}

pub fn check_reduction(g: &Graph, labels: &[usize], fraction: f64, seed: u64) -> ReductionCheck {
    let before = classify_edges(g, labels).unwrap();
    let target = noise_rate(g, labels).unwrap() * fraction;
    let reduced = reduce_noise(g, labels, target, seed).unwrap();
    let after = classify_edges(&reduced, labels).unwrap();
    let achieved = if reduced.num_edges() == 0 {
        0.0
    } else {
        noise_rate(&reduced, labels).unwrap()
    };
    let removed = before.bad_edges.len() - after.bad_edges.len();
    // One fewer removal would still be above the target.
    let minimal = removed == 0 || {
        let bad = after.bad_edges.len() + 1;
        let total = reduced.num_edges() + 1;
        bad as f64 / total as f64 > target
    };
    let idempotent = reduced.num_edges() == 0
        || reduce_noise(&reduced, labels, achieved, seed + 1).unwrap() == reduced;
    ReductionCheck {
        target,
        achieved,
        good_preserved: after.good_edges == before.good_edges,
        minimal,
        idempotent,
    }
}

/// Dataset over `g` with every node in training and no validation set.
pub fn all_train_dataset(g: Graph, x: DenseMatrix, labels: Vec<usize>) -> Dataset {
    let n = g.num_nodes();
    let split = Split {
        train: (0..n).collect(),
        val: vec![],
        test: vec![],
    };
    Dataset::new("toy", g, Features::Dense(x), labels, split).unwrap()
}

pub fn normalized(g: &Graph, mode: NormalizationMode) -> NormalizedAdjacency {
    NormalizedAdjacency::new(g, mode)
}
