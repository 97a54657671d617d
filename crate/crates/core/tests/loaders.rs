use std::path::PathBuf;

use mcgl::datasets::{
    load_coauthor, load_dataset, load_planetoid_with, PlanetoidOptions,
};
use mcgl::Error;
use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn expected(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn ids(v: &Value) -> Vec<usize> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap() as usize)
        .collect()
}

fn check_planetoid(stem: &str, fill_test_gaps: bool) {
    let dir = fixtures().join("planetoid");
    let want = expected(dir.join(format!("{stem}.expected.json")));
    let d = load_planetoid_with(
        &dir,
        &PlanetoidOptions {
            stem: stem.into(),
            fill_test_gaps,
            val_size: 2,
        },
    )
    .unwrap();
    assert_eq!(d.num_nodes(), want["num_nodes"].as_u64().unwrap() as usize);
    assert_eq!(d.labels, ids(&want["labels"]));
    assert_eq!(d.split.train, ids(&want["train"]));
    assert_eq!(d.split.val, ids(&want["val"]));
    assert_eq!(d.split.test, ids(&want["test"]));
    let edges: Vec<(usize, usize)> = want["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let p = ids(e);
            (p[0], p[1])
        })
        .collect();
    assert_eq!(d.graph.edges(), edges.as_slice());
    let x = d.features.to_dense();
    for (r, row) in want["features"].as_array().unwrap().iter().enumerate() {
        for (c, v) in row.as_array().unwrap().iter().enumerate() {
            let diff = (x.get(r, c) - v.as_f64().unwrap()).abs();
            assert!(diff <= 1e-12, "{stem} feature ({r},{c}) differs by {diff}");
        }
    }
}

#[test]
fn planetoid_protocol2_matches_reference() {
    check_planetoid("tiny", false);
}

#[test]
fn planetoid_protocol0_with_test_gaps_matches_reference() {
    check_planetoid("gappy", true);
}

#[test]
fn planetoid_missing_part_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("planetoid");
    for part in ["x", "y", "tx", "ty", "allx", "graph", "test.index"] {
        let name = format!("ind.tiny.{part}");
        std::fs::copy(src.join(&name), dir.path().join(&name)).unwrap();
    }
    let err = load_planetoid_with(
        dir.path(),
        &PlanetoidOptions {
            stem: "tiny".into(),
            fill_test_gaps: false,
            val_size: 2,
        },
    )
    .unwrap_err();
    match err {
        Error::Ingestion { path, .. } => assert!(path.ends_with("ind.tiny.ally")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn planetoid_corrupt_file_is_ingestion_error() {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("planetoid");
    for part in ["x", "y", "tx", "ty", "allx", "ally", "graph", "test.index"] {
        let name = format!("ind.tiny.{part}");
        std::fs::copy(src.join(&name), dir.path().join(&name)).unwrap();
    }
    std::fs::write(dir.path().join("ind.tiny.tx"), b"\x80\x02garbage").unwrap();
    let err = load_planetoid_with(
        dir.path(),
        &PlanetoidOptions {
            stem: "tiny".into(),
            fill_test_gaps: false,
            val_size: 2,
        },
    )
    .unwrap_err();
    assert!(matches!(err, Error::Ingestion { ref path, .. } if path.ends_with("ind.tiny.tx")));
}

#[test]
fn coauthor_archive_matches_reference() {
    let dir = fixtures().join("coauthor");
    let want = expected(dir.join("ms_academic.expected.json"));
    let d = load_coauthor(&dir, 0).unwrap();
    assert_eq!(d.num_nodes(), 600);
    assert_eq!(d.graph.num_edges(), want["num_edges"].as_u64().unwrap() as usize);
    assert_eq!(2 * d.graph.num_edges(), want["stored_entries"].as_u64().unwrap() as usize);
    assert_eq!(d.labels, ids(&want["labels"]));
    assert_eq!(d.split.train.len(), 60);
    assert_eq!(d.split.test.len(), 40);
    assert_eq!(d.split.val.len(), 500);
    let x = d.features.to_dense();
    for (r, row) in want["features"].as_array().unwrap().iter().enumerate() {
        for (c, v) in row.as_array().unwrap().iter().enumerate() {
            assert!((x.get(r, c) - v.as_f64().unwrap()).abs() <= 1e-12);
        }
    }
    let by_name = load_dataset(&dir, "ms_academic").unwrap();
    assert_eq!(by_name, d);
}
