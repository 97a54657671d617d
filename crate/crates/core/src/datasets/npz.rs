//! `.npz` archives (zip of `.npy` files) and the MS Academic loader.
//!
//! The MS Academic archive stores the adjacency and attribute matrices in CSR
//! pieces: `adj_data`, `adj_indices`, `adj_indptr`, `adj_shape`, the same
//! four `attr_*` fields, and `labels`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use super::pickle::decode_numeric;
use super::{find_file, make_split, Dataset};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{CsrMatrix, Features};

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl NpyArray {
    fn to_indices(&self, field: &str) -> std::result::Result<Vec<usize>, String> {
        self.values
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(format!("{field}: {v} is not a valid index"))
                }
            })
            .collect()
    }
}

/// Parses one `.npy` payload. Object arrays are rejected.
pub(crate) fn parse_npy(bytes: &[u8]) -> std::result::Result<NpyArray, String> {
    if bytes.len() < 10 || &bytes[..6] != b"\x93NUMPY" {
        return Err("missing .npy magic".into());
    }
    let major = bytes[6];
    let (header_len, start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err("truncated .npy header".into());
            }
            (u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, 12)
        }
        v => return Err(format!("unsupported .npy version {v}")),
    };
    let header = bytes
        .get(start..start + header_len)
        .ok_or("truncated .npy header")?;
    let header = std::str::from_utf8(header).map_err(|e| e.to_string())?;
    let descr = header_field(header, "descr").ok_or("header lacks descr")?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"').to_string();
    if descr.contains('O') {
        return Err("object arrays are not supported".into());
    }
    let fortran = header_field(header, "fortran_order").ok_or("header lacks fortran_order")?;
    let shape_text = header_field(header, "shape").ok_or("header lacks shape")?;
    let shape = shape_text
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| format!("bad shape {shape_text}: {e}")))
        .collect::<std::result::Result<Vec<usize>, String>>()?;
    let mut values = decode_numeric(&descr, &bytes[start + header_len..])?;
    let count: usize = shape.iter().product();
    if values.len() != count {
        return Err(format!("{} items for shape {shape:?}", values.len()));
    }
    if fortran.trim() == "True" && shape.len() == 2 {
        let (r, c) = (shape[0], shape[1]);
        let mut c_order = vec![0.0; values.len()];
        for i in 0..r {
            for j in 0..c {
                c_order[i * c + j] = values[j * r + i];
            }
        }
        values = c_order;
    }
    Ok(NpyArray { shape, values })
}

/// Extracts the raw text of `'key': value` from a numpy header dict.
fn header_field<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let pat_a = format!("'{key}':");
    let pat_b = format!("\"{key}\":");
    let start = header
        .find(&pat_a)
        .map(|i| i + pat_a.len())
        .or_else(|| header.find(&pat_b).map(|i| i + pat_b.len()))?;
    let rest = header[start..].trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}'])?
    };
    Some(rest[..end].trim())
}

/// Reads the requested arrays from an `.npz` archive.
pub fn read_npz(path: &Path, fields: &[&str]) -> Result<BTreeMap<String, NpyArray>> {
    let file = File::open(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    let mut archive =
        zip::ZipArchive::new(file).map_err(|e| Error::ingestion(path, format!("not a zip archive: {e}")))?;
    let mut out = BTreeMap::new();
    for &field in fields {
        let mut entry = archive
            .by_name(&format!("{field}.npy"))
            .map_err(|_| Error::ingestion(path, format!("archive has no `{field}` array")))?;
        let mut bytes = Vec::with_capacity(entry.size() as usize);
        entry
            .read_to_end(&mut bytes)
            .map_err(|e| Error::ingestion(path, format!("{field}: {e}")))?;
        let arr = parse_npy(&bytes).map_err(|e| Error::ingestion(path, format!("{field}: {e}")))?;
        out.insert(field.to_string(), arr);
    }
    Ok(out)
}

fn csr_from_fields(
    path: &Path,
    arrays: &BTreeMap<String, NpyArray>,
    prefix: &str,
) -> Result<CsrMatrix> {
    let get = |f: &str| &arrays[&format!("{prefix}_{f}")];
    let bad = |m: String| Error::ingestion(path, m);
    let shape = get("shape").to_indices("shape").map_err(bad)?;
    if shape.len() != 2 {
        return Err(Error::ingestion(path, format!("{prefix}_shape must have 2 entries")));
    }
    let indptr = get("indptr").to_indices("indptr").map_err(bad)?;
    let indices = get("indices").to_indices("indices").map_err(bad)?;
    CsrMatrix::new(shape[0], shape[1], indptr, indices, get("data").values.clone())
        .map_err(|e| Error::ingestion(path, format!("{prefix}: {e}")))
}

pub const COAUTHOR_FILES: [&str; 4] = [
    "ms_academic.npz",
    "ms_academic_cs.npz",
    "coauthor_cs.npz",
    "coauthor-cs.npz",
];

/// Loads MS Academic with a seeded 20-per-class / 500 / rest split.
pub fn load_coauthor(dir: &Path, split_seed: u64) -> Result<Dataset> {
    let candidates: Vec<PathBuf> = COAUTHOR_FILES
        .iter()
        .flat_map(|f| [PathBuf::from(f), PathBuf::from("ms_academic").join(f)])
        .collect();
    let path = find_file(dir, &candidates)?;
    load_coauthor_file(&path, split_seed)
}

pub fn load_coauthor_file(path: &Path, split_seed: u64) -> Result<Dataset> {
    let mut fields = Vec::new();
    for prefix in ["adj", "attr"] {
        for part in ["data", "indices", "indptr", "shape"] {
            fields.push(format!("{prefix}_{part}"));
        }
    }
    fields.push("labels".into());
    let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
    let arrays = read_npz(path, &refs)?;

    let adj = csr_from_fields(path, &arrays, "adj")?;
    let attr = csr_from_fields(path, &arrays, "attr")?;
    let labels = arrays["labels"]
        .to_indices("labels")
        .map_err(|m| Error::ingestion(path, m))?;
    let n = labels.len();
    if adj.rows() != n || adj.cols() != n || attr.rows() != n {
        return Err(Error::ingestion(
            path,
            format!(
                "{n} labels, adjacency {}x{}, attributes with {} rows",
                adj.rows(),
                adj.cols(),
                attr.rows()
            ),
        ));
    }
    let mut pairs = Vec::with_capacity(adj.nnz());
    for u in 0..n {
        for (v, w) in adj.row(u) {
            if u != v && w != 0.0 {
                pairs.push((u, v));
            }
        }
    }
    let graph = Graph::new(n, &pairs).map_err(|e| Error::ingestion(path, e.to_string()))?;
    let per_class = 20;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let n_val = 500;
    let n_test = n.saturating_sub(per_class * num_classes + n_val);
    let split = make_split(&labels, per_class, n_val, n_test, split_seed)
        .map_err(|e| Error::ingestion(path, e.to_string()))?;
    Dataset::new("ms_academic", graph, Features::Sparse(attr).row_normalized(), labels, split)
        .map_err(|e| Error::ingestion(path, e.to_string()))
}
