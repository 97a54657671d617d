//! Two-class point clouds in the plane with clean kNN graphs. Features are
//! the 2-d coordinates.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::seeded;
use crate::tensor::{DenseMatrix, Features};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    GraphXor,
    Circles,
    Communities,
    LargeVariance,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::GraphXor => "graph_xor",
            SynthKind::Circles => "circles",
            SynthKind::Communities => "communities",
            SynthKind::LargeVariance => "large_variance",
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SynthKind> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "graph_xor" | "xor" => Ok(SynthKind::GraphXor),
            "circles" => Ok(SynthKind::Circles),
            "communities" => Ok(SynthKind::Communities),
            "large_variance" => Ok(SynthKind::LargeVariance),
            _ => Err(Error::input(format!(
                "unknown generator '{s}' (expected graph-xor, circles, communities or large-variance)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub seed: u64,
    /// Per-class Gaussian variance (communities, large_variance).
    pub variance: f64,
    /// Neighbors per node in the kNN edge policy.
    pub k: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
    /// Satellite communities per class (communities only).
    pub satellites: usize,
    /// Share of each class placed in its major community.
    pub major_fraction: f64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            kind,
            n,
            seed,
            variance: if kind == SynthKind::LargeVariance { 2.0 } else { 1.0 },
            k: 3,
            train_per_class: 5,
            val_per_class: 5,
            satellites: 3,
            major_fraction: 0.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == SynthKind::GraphXor {
            return Ok(());
        }
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::input(format!(
                "n must be even and at least 4, got {}",
                self.n
            )));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::input("variance must be positive"));
        }
        if self.k == 0 {
            return Err(Error::input("k must be positive"));
        }
        if !(self.major_fraction > 0.0 && self.major_fraction <= 1.0) {
            return Err(Error::input("major_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    match spec.kind {
        SynthKind::GraphXor => gen_graph_xor(),
        SynthKind::Circles => circles(spec),
        SynthKind::Communities => communities(spec),
        SynthKind::LargeVariance => gaussians(spec),
    }
}

/// Four corners of the unit square, XOR labels, edges joining equal labels.
/// All four nodes are training nodes.
pub fn gen_graph_xor() -> Result<Dataset> {
    let x = DenseMatrix::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ])?;
    let graph = Graph::new(4, &[(0, 3), (1, 2)])?;
    let split = Split {
        train: vec![0, 1, 2, 3],
        val: vec![],
        test: vec![],
    };
    Dataset::new("graph_xor", graph, Features::Dense(x), vec![0, 1, 1, 0], split)
}

/// Class 0 uniform on the disk `r ≤ 1`, class 1 uniform on the annulus
/// `1 ≤ r ≤ √2`; both regions have area π.
pub fn gen_circles(n: usize, seed: u64) -> Result<Dataset> {
    generate(&SynthSpec::new(SynthKind::Circles, n, seed))
}

/// Gaussian classes at (−1,−1) and (1,1), each cut into a major community and
/// angular satellite sectors; edges stay inside communities and training
/// nodes come from the major communities only.
pub fn gen_communities(n: usize, seed: u64) -> Result<Dataset> {
    generate(&SynthSpec::new(SynthKind::Communities, n, seed))
}

/// Gaussian classes at (−1,−1) and (1,1) with variance 2.
pub fn gen_large_variance(n: usize, seed: u64) -> Result<Dataset> {
    generate(&SynthSpec::new(SynthKind::LargeVariance, n, seed))
}

const CENTERS: [[f64; 2]; 2] = [[-1.0, -1.0], [1.0, 1.0]];

fn labels_for(n: usize) -> Vec<usize> {
    (0..n).map(|i| usize::from(i >= n / 2)).collect()
}

fn circles(spec: &SynthSpec) -> Result<Dataset> {
    let mut rng = seeded(spec.seed);
    let labels = labels_for(spec.n);
    let mut points = Vec::with_capacity(spec.n);
    for &y in &labels {
        let u: f64 = rng.gen();
        let r = if y == 0 { u.sqrt() } else { (1.0 + u).sqrt() };
        let theta = rng.gen_range(0.0..2.0 * PI);
        points.push([r * theta.cos(), r * theta.sin()]);
    }
    let edges = knn_edges(&points, &labels, spec.k);
    let split = class_split(&labels, None, spec, &mut rng);
    assemble("circles", points, labels, edges, split)
}

fn gaussian_points(spec: &SynthSpec, labels: &[usize], rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let normal = Normal::new(0.0, spec.variance.sqrt()).expect("positive variance");
    labels
        .iter()
        .map(|&y| {
            let c = CENTERS[y];
            [c[0] + normal.sample(rng), c[1] + normal.sample(rng)]
        })
        .collect()
}

fn gaussians(spec: &SynthSpec) -> Result<Dataset> {
    let mut rng = seeded(spec.seed);
    let labels = labels_for(spec.n);
    let points = gaussian_points(spec, &labels, &mut rng);
    let edges = knn_edges(&points, &labels, spec.k);
    let split = class_split(&labels, None, spec, &mut rng);
    assemble(spec.kind.name(), points, labels, edges, split)
}

fn communities(spec: &SynthSpec) -> Result<Dataset> {
    let mut rng = seeded(spec.seed);
    let labels = labels_for(spec.n);
    let points = gaussian_points(spec, &labels, &mut rng);
    // Community id = class * (1 + satellites) + sector; sector 0 is major.
    let groups_per_class = 1 + spec.satellites;
    let mut community = vec![0usize; spec.n];
    let mut is_major = vec![false; spec.n];
    for class in 0..2 {
        let c = CENTERS[class];
        let mut members: Vec<usize> = (0..spec.n).filter(|&i| labels[i] == class).collect();
        let angle = |i: usize| (points[i][1] - c[1]).atan2(points[i][0] - c[0]);
        members.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)).then(a.cmp(&b)));
        let m = members.len();
        let n_major = ((m as f64 * spec.major_fraction).round() as usize).clamp(1, m);
        let sats = spec.satellites.min(m - n_major);
        for (pos, &i) in members.iter().enumerate() {
            let sector = if pos < n_major || sats == 0 {
                0
            } else {
                1 + (pos - n_major) * sats / (m - n_major)
            };
            community[i] = class * groups_per_class + sector;
            is_major[i] = sector == 0;
        }
    }
    let edges = knn_edges(&points, &community, spec.k);
    let split = class_split(&labels, Some(&is_major), spec, &mut rng);
    assemble("communities", points, labels, edges, split)
}

/// Per-class split: training nodes drawn from `eligible` nodes when given,
/// validation from the rest of the class, everything else is test.
fn class_split(
    labels: &[usize],
    eligible: Option<&[bool]>,
    spec: &SynthSpec,
    rng: &mut impl Rng,
) -> Split {
    let mut split = Split::default();
    for class in 0..2 {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut pool: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| eligible.map_or(true, |e| e[i]))
            .collect();
        pool.shuffle(rng);
        let train: Vec<usize> = pool.iter().copied().take(spec.train_per_class).collect();
        let mut rest: Vec<usize> = members.into_iter().filter(|i| !train.contains(i)).collect();
        rest.shuffle(rng);
        let n_val = spec.val_per_class.min(rest.len());
        split.train.extend(&train);
        split.val.extend(&rest[..n_val]);
        split.test.extend(&rest[n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split
}

fn assemble(
    name: &str,
    points: Vec<[f64; 2]>,
    labels: Vec<usize>,
    edges: Vec<(usize, usize)>,
    split: Split,
) -> Result<Dataset> {
    let n = points.len();
    let x = DenseMatrix::from_vec(n, 2, points.into_iter().flatten().collect())?;
    let graph = Graph::new(n, &edges)?;
    Dataset::new(name, graph, Features::Dense(x), labels, split)
}

/// Undirected kNN edges: every node links to its `k` nearest points within
/// the same `group` (Euclidean, ties to the lower id).
pub fn knn_edges(points: &[[f64; 2]], group: &[usize], k: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(points.len() * k);
    for i in 0..points.len() {
        let mut cands: Vec<(f64, usize)> = (0..points.len())
            .filter(|&j| j != i && group[j] == group[i])
            .map(|j| {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                (dx * dx + dy * dy, j)
            })
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(cands.iter().take(k).map(|&(_, j)| (i.min(j), i.max(j))));
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}
