//! Reader for the `ind.<name>.*` Planetoid files (CORA, CiteSeer, PubMed).
//!
//! Layout: `x`/`y` are the labeled training rows, `allx`/`ally` every
//! non-test row, `tx`/`ty` the test rows in the order listed by
//! `test.index`, and `graph` a `{node: [neighbors]}` dict. Train is the first
//! `len(y)` nodes, validation the next 500, test the ids in `test.index`.

use std::fs;
use std::path::{Path, PathBuf};

use super::pickle::{to_adjacency_lists, to_csr, to_ndarray, unpickle, PickleValue};
use super::{find_file, Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{CsrMatrix, Features};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanetoidName {
    Cora,
    CiteSeer,
    PubMed,
}

impl PlanetoidName {
    pub fn stem(self) -> &'static str {
        match self {
            PlanetoidName::Cora => "cora",
            PlanetoidName::CiteSeer => "citeseer",
            PlanetoidName::PubMed => "pubmed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanetoidOptions {
    pub stem: String,
    /// Some CiteSeer nodes have no test row; pad the test block with zero
    /// rows so that node ids stay contiguous.
    pub fill_test_gaps: bool,
    pub val_size: usize,
}

pub fn load_planetoid(dir: &Path, name: PlanetoidName) -> Result<Dataset> {
    load_planetoid_with(
        dir,
        &PlanetoidOptions {
            stem: name.stem().to_string(),
            fill_test_gaps: name == PlanetoidName::CiteSeer,
            val_size: 500,
        },
    )
}

fn candidates(stem: &str, part: &str) -> Vec<PathBuf> {
    let file = format!("ind.{stem}.{part}");
    let mut cap = stem.to_string();
    if let Some(f) = cap.get_mut(..1) {
        f.make_ascii_uppercase();
    }
    vec![
        PathBuf::from(&file),
        PathBuf::from(stem).join(&file),
        PathBuf::from("planetoid").join(&file),
        PathBuf::from(cap).join("raw").join(&file),
    ]
}

fn read_pickle(dir: &Path, stem: &str, part: &str) -> Result<(PathBuf, PickleValue)> {
    let path = find_file(dir, &candidates(stem, part))?;
    let bytes = fs::read(&path).map_err(|e| Error::ingestion(&path, e.to_string()))?;
    let v = unpickle(&bytes).map_err(|e| Error::ingestion(&path, e.to_string()))?;
    Ok((path, v))
}

fn read_matrix(dir: &Path, stem: &str, part: &str) -> Result<CsrMatrix> {
    let (path, v) = read_pickle(dir, stem, part)?;
    to_csr(&v).map_err(|e| Error::ingestion(&path, e))
}

/// One label per row: argmax of the one-hot row, 0 for all-zero rows.
fn read_labels(dir: &Path, stem: &str, part: &str) -> Result<Vec<usize>> {
    let (path, v) = read_pickle(dir, stem, part)?;
    let a = to_ndarray(&v).map_err(|e| Error::ingestion(&path, e))?;
    if a.shape.len() != 2 {
        return Err(Error::ingestion(&path, format!("label array has shape {:?}", a.shape)));
    }
    let cols = a.shape[1];
    Ok(a.values
        .chunks(cols.max(1))
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

pub fn load_planetoid_with(dir: &Path, opts: &PlanetoidOptions) -> Result<Dataset> {
    let stem = opts.stem.as_str();
    let x = read_matrix(dir, stem, "x")?;
    let y = read_labels(dir, stem, "y")?;
    let tx = read_matrix(dir, stem, "tx")?;
    let ty = read_labels(dir, stem, "ty")?;
    let allx = read_matrix(dir, stem, "allx")?;
    let ally = read_labels(dir, stem, "ally")?;
    let (graph_path, graph_v) = read_pickle(dir, stem, "graph")?;
    let lists = to_adjacency_lists(&graph_v).map_err(|e| Error::ingestion(&graph_path, e))?;

    let index_path = find_file(dir, &candidates(stem, "test.index"))?;
    let test_order: Vec<usize> = fs::read_to_string(&index_path)
        .map_err(|e| Error::ingestion(&index_path, e.to_string()))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::ingestion(&index_path, format!("bad test index: {e}")))?;
    if test_order.is_empty() {
        return Err(Error::ingestion(&index_path, "no test ids"));
    }
    let mut test_sorted = test_order.clone();
    test_sorted.sort_unstable();

    let cols = allx.cols();
    if tx.cols() != cols || x.cols() != cols {
        return Err(Error::ingestion(dir.join(format!("ind.{stem}.tx")), "feature widths differ"));
    }
    if tx.rows() != ty.len() || allx.rows() != ally.len() || x.rows() != y.len() {
        return Err(Error::ingestion(
            dir.join(format!("ind.{stem}.ty")),
            "feature and label row counts differ",
        ));
    }
    if tx.rows() != test_order.len() {
        return Err(Error::ingestion(
            &index_path,
            format!("{} test ids for {} test rows", test_order.len(), tx.rows()),
        ));
    }

    // Test block rows, indexed by position in the sorted test range.
    let base = allx.rows();
    let (lo, hi) = (test_sorted[0], *test_sorted.last().unwrap());
    if lo < base {
        return Err(Error::ingestion(
            &index_path,
            format!("test id {lo} overlaps the {base} non-test rows"),
        ));
    }
    let block_len = if opts.fill_test_gaps { hi + 1 - base } else { tx.rows() };
    let mut block_rows: Vec<Option<usize>> = vec![None; block_len];
    let mut block_labels = vec![0usize; block_len];
    for (k, &t) in test_sorted.iter().enumerate() {
        let slot = if opts.fill_test_gaps { t - base } else { k };
        block_rows[slot] = Some(k);
        block_labels[slot] = ty[k];
    }
    let n = base + block_len;

    // stacked[r] for r < base is allx[r]; otherwise block row r - base.
    // The k-th listed test node takes stacked row `sorted[k]`.
    let mut source: Vec<usize> = (0..n).collect();
    for (k, &node) in test_order.iter().enumerate() {
        if node >= n || test_sorted[k] >= n {
            return Err(Error::ingestion(
                &index_path,
                format!("test id {node} outside the test block {base}..{n}"),
            ));
        }
        source[node] = test_sorted[k];
    }
    let stacked_label = |r: usize| if r < base { ally[r] } else { block_labels[r - base] };
    let labels: Vec<usize> = source.iter().map(|&r| stacked_label(r)).collect();

    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    indptr.push(0);
    for &r in &source {
        let row: Vec<(usize, f64)> = if r < base {
            allx.row(r).collect()
        } else {
            match block_rows[r - base] {
                Some(k) => tx.row(k).collect(),
                None => Vec::new(),
            }
        };
        for (c, v) in row {
            indices.push(c);
            values.push(v);
        }
        indptr.push(indices.len());
    }
    let features = CsrMatrix::new(n, cols, indptr, indices, values)
        .map_err(|e| Error::ingestion(dir.join(format!("ind.{stem}.allx")), e.to_string()))?;

    let mut pairs = Vec::new();
    for (u, nbrs) in &lists {
        for &v in nbrs {
            if *u != v {
                pairs.push((*u, v));
            }
        }
    }
    let graph = Graph::new(n, &pairs).map_err(|e| Error::ingestion(&graph_path, e.to_string()))?;

    let n_train = y.len();
    if n_train + opts.val_size > n {
        return Err(Error::ingestion(
            dir.join(format!("ind.{stem}.y")),
            format!("{n_train} train + {} val exceed {n} nodes", opts.val_size),
        ));
    }
    let split = Split {
        train: (0..n_train).collect(),
        val: (n_train..n_train + opts.val_size).collect(),
        test: test_sorted,
    };
    Dataset::new(stem, graph, Features::Sparse(features).row_normalized(), labels, split)
        .map_err(|e| Error::ingestion(dir.join(format!("ind.{stem}.x")), e.to_string()))
}
