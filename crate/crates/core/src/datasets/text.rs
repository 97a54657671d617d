//! Plain-text dataset triple: `<name>.edges`, `<name>.features.csv`,
//! `<name>.labels.csv` and `<name>.split.json`.

use std::fs;
use std::path::Path;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::{format_edge_list, parse_edge_list, Graph};
use crate::tensor::{DenseMatrix, Features};

pub fn write_text_dataset(dir: &Path, d: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |suffix: &str, body: String| {
        let p = dir.join(format!("{}.{suffix}", d.name));
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("edges", format_edge_list(&d.graph))?;

    let x = d.features.to_dense();
    let mut csv = String::with_capacity(x.values().len() * 8);
    for r in 0..x.rows() {
        let row: Vec<String> = x.row(r).iter().map(|v| format!("{v}")).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write("features.csv", csv)?;

    let labels: String = d.labels.iter().map(|y| format!("{y}\n")).collect();
    write("labels.csv", labels)?;

    let split = serde_json::to_string_pretty(&d.split)
        .map_err(|e| Error::Internal(format!("split encode: {e}")))?;
    write("split.json", split + "\n")
}

pub fn read_text_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    let path = |suffix: &str| dir.join(format!("{name}.{suffix}"));
    let read = |suffix: &str| {
        let p = path(suffix);
        fs::read_to_string(&p).map_err(|e| Error::ingestion(&p, e.to_string()))
    };

    let edges_text = read("edges")?;
    let (declared, pairs) =
        parse_edge_list(&edges_text).map_err(|e| Error::ingestion(path("edges"), e.to_string()))?;

    let feat_text = read("features.csv")?;
    let mut rows = Vec::new();
    for (ln, line) in feat_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::ingestion(path("features.csv"), format!("line {}: {e}", ln + 1)))?;
        rows.push(row);
    }
    let x = DenseMatrix::from_rows(&rows)
        .map_err(|e| Error::ingestion(path("features.csv"), e.to_string()))?;

    let label_text = read("labels.csv")?;
    let labels = label_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(ln, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| Error::ingestion(path("labels.csv"), format!("line {}: {e}", ln + 1)))
        })
        .collect::<Result<Vec<usize>>>()?;

    let split: Split = serde_json::from_str(&read("split.json")?)
        .map_err(|e| Error::ingestion(path("split.json"), e.to_string()))?;

    let n = labels.len();
    if x.rows() != n {
        return Err(Error::ingestion(
            path("features.csv"),
            format!("{} feature rows for {n} labels", x.rows()),
        ));
    }
    if declared > n {
        return Err(Error::ingestion(
            path("edges"),
            format!("edge list declares {declared} nodes, labels cover {n}"),
        ));
    }
    let graph = Graph::new(n, &pairs).map_err(|e| Error::ingestion(path("edges"), e.to_string()))?;
    Dataset::new(name, graph, Features::auto(x), labels, split)
        .map_err(|e| Error::ingestion(dir.join(name), e.to_string()))
}
