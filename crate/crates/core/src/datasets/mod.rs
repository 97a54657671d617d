//! Node classification datasets: synthetic point clouds with clean kNN graphs,
//! the Planetoid citation graphs, the MS Academic co-authorship graph, and a
//! plain-text interchange format.

mod npz;
mod pickle;
mod planetoid;
mod synthetic;
mod text;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::models::TrainingData;
use crate::rng::seeded;
use crate::tensor::Features;

pub use npz::{load_coauthor, load_coauthor_file, read_npz, NpyArray, COAUTHOR_FILES};
pub use pickle::{unpickle, PickleValue};
pub use planetoid::{load_planetoid, load_planetoid_with, PlanetoidName, PlanetoidOptions};
pub use synthetic::{
    gen_circles, gen_communities, gen_graph_xor, gen_large_variance, generate, knn_edges,
    SynthKind, SynthSpec,
};
pub use text::{read_text_dataset, write_text_dataset};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Ids in range and the three sets pairwise disjoint (and duplicate-free).
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.len());
        for (name, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in ids {
                if i >= num_nodes {
                    return Err(Error::input(format!(
                        "{name} id {i} out of range for {num_nodes} nodes"
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::input(format!("node {i} appears twice in the split")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: Features,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        features: Features,
        labels: Vec<usize>,
        split: Split,
    ) -> Result<Dataset> {
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let d = Dataset {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
            split,
        };
        d.view().validate()?;
        Ok(d)
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn view(&self) -> TrainingData<'_> {
        self.view_with_graph(&self.graph)
    }

    /// Same features, labels and split over a different edge set.
    pub fn view_with_graph<'a>(&'a self, graph: &'a Graph) -> TrainingData<'a> {
        TrainingData {
            graph,
            features: &self.features,
            labels: &self.labels,
            num_classes: self.num_classes,
            split: &self.split,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// `per_class` random training nodes from every class, then `n_val` and
/// `n_test` nodes drawn from what is left.
pub fn make_split(
    labels: &[usize],
    per_class: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<Split> {
    let mut rng = seeded(seed);
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut train = Vec::with_capacity(per_class * num_classes);
    let mut in_train = vec![false; labels.len()];
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.len() < per_class {
            return Err(Error::input(format!(
                "class {c} has {} nodes, {per_class} requested for training",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for &i in &members[..per_class] {
            train.push(i);
            in_train[i] = true;
        }
    }
    let mut rest: Vec<usize> = (0..labels.len()).filter(|&i| !in_train[i]).collect();
    if rest.len() < n_val + n_test {
        return Err(Error::input(format!(
            "{} nodes remain after training selection, {} requested for val+test",
            rest.len(),
            n_val + n_test
        )));
    }
    rest.shuffle(&mut rng);
    train.sort_unstable();
    let mut val = rest[..n_val].to_vec();
    let mut test = rest[n_val..n_val + n_test].to_vec();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}

/// Real datasets this crate can load from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealDataset {
    Cora,
    CiteSeer,
    PubMed,
    MsAcademic,
}

impl RealDataset {
    pub const ALL: [RealDataset; 4] = [
        RealDataset::Cora,
        RealDataset::CiteSeer,
        RealDataset::PubMed,
        RealDataset::MsAcademic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RealDataset::Cora => "cora",
            RealDataset::CiteSeer => "citeseer",
            RealDataset::PubMed => "pubmed",
            RealDataset::MsAcademic => "ms_academic",
        }
    }

    pub fn parse(s: &str) -> Option<RealDataset> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cora" => Some(RealDataset::Cora),
            "citeseer" => Some(RealDataset::CiteSeer),
            "pubmed" => Some(RealDataset::PubMed),
            "ms_academic" | "msacademic" | "coauthor" | "coauthor_cs" => {
                Some(RealDataset::MsAcademic)
            }
            _ => None,
        }
    }
}

/// Seed used for the generated MS Academic split.
pub const DEFAULT_SPLIT_SEED: u64 = 0;

/// Resolves `name` under `root`. A plain-text triple `<name>.edges` (in `root`
/// or `root/<name>`) wins; otherwise the native format of a known real
/// dataset is read.
pub fn load_dataset(root: &Path, name: &str) -> Result<Dataset> {
    for dir in [root.to_path_buf(), root.join(name)] {
        if dir.join(format!("{name}.edges")).is_file() {
            return read_text_dataset(&dir, name);
        }
    }
    match RealDataset::parse(name) {
        Some(RealDataset::MsAcademic) => load_coauthor(root, DEFAULT_SPLIT_SEED),
        Some(real) => {
            let which = match real {
                RealDataset::Cora => PlanetoidName::Cora,
                RealDataset::CiteSeer => PlanetoidName::CiteSeer,
                _ => PlanetoidName::PubMed,
            };
            load_planetoid(root, which)
        }
        None => Err(Error::input(format!(
            "no dataset '{name}' under {}: expected {name}.edges or a known dataset name",
            root.display()
        ))),
    }
}

/// First existing file among `candidates` (relative to `root`), or an
/// ingestion error naming the first candidate.
pub(crate) fn find_file(root: &Path, candidates: &[PathBuf]) -> Result<PathBuf> {
    for c in candidates {
        let p = root.join(c);
        if p.is_file() {
            return Ok(p);
        }
    }
    let first = root.join(&candidates[0]);
    Err(Error::ingestion(&first, "file not found"))
}
