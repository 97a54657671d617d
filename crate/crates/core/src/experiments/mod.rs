//! Repeated, seeded training runs over a grid of (noise level, depth) cells.
//!
//! Every cell trains `repeats` models with seeds `base_seed + r`, so the same
//! repeat index uses the same seed in every cell. When a cell asks for a
//! lower noise rate, bad edges are removed once per cell (seeded by the rate)
//! and that graph is shared by all repeats unless `resample_per_repeat` is set.

mod presets;

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::graph::{noise_rate, reduce_noise, Graph};
use crate::models::{accuracy_on, train_model, McglOptions, ModelKind};
use crate::nn::TrainConfig;
use crate::rng::derive_seed;

pub use presets::{
    generic_preset, preset, preset_for, DEFAULT_DEPTH, FULL_BATCH_MAX_EPOCHS,
    FULL_BATCH_PATIENCE, MCGL_MAX_EPOCHS, MCGL_PATIENCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NoiseRate,
    Depth,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NoiseRate => "noise_rate",
            SweepAxis::Depth => "depth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub dataset: String,
    pub model: ModelKind,
    pub axis: SweepAxis,
    /// Target noise rates (noise axis) or depths (depth axis), ascending.
    pub values: Vec<f64>,
    /// Depth sweeps only: noise levels to repeat the sweep at; `None` keeps
    /// the original graph.
    pub noise_levels: Vec<Option<f64>>,
    pub config: TrainConfig,
    pub mcgl: McglOptions,
    pub repeats: usize,
    pub base_seed: u64,
    pub resample_per_repeat: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::input("repeats must be at least 1"));
        }
        if self.values.is_empty() {
            return Err(Error::input("sweep has no axis values"));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("axis values must be strictly ascending"));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::input("axis values must be finite and non-negative"));
        }
        match self.axis {
            SweepAxis::NoiseRate => {
                if self.values.iter().any(|&v| v > 1.0) {
                    return Err(Error::input("noise rates are fractions in [0, 1]"));
                }
            }
            SweepAxis::Depth => {
                if self.values.iter().any(|v| v.fract() != 0.0) {
                    return Err(Error::input("depths must be whole numbers"));
                }
                if self.noise_levels.is_empty() {
                    return Err(Error::input("depth sweep needs at least one noise level"));
                }
            }
        }
        self.config.validate()
    }

    /// `(target noise rate, depth)` for every cell, in output order.
    fn cells(&self) -> Vec<(Option<f64>, usize)> {
        match self.axis {
            SweepAxis::NoiseRate => self
                .values
                .iter()
                .map(|&r| (Some(r), self.config.depth))
                .collect(),
            SweepAxis::Depth => self
                .noise_levels
                .iter()
                .flat_map(|&lvl| self.values.iter().map(move |&k| (lvl, k as usize)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub dataset: String,
    pub model: ModelKind,
    pub axis: SweepAxis,
    pub value: f64,
    /// Requested noise rate; `None` is the unmodified graph.
    pub target_noise_rate: Option<f64>,
    pub achieved_noise_rate: f64,
    pub depth: usize,
    pub fingerprint: String,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Seconds per run; kept out of serialized records so they stay
    /// byte-reproducible.
    #[serde(skip)]
    pub wall_clock_secs: Vec<f64>,
}

impl ExperimentRecord {
    pub fn series_label(&self) -> String {
        match (self.axis, self.target_noise_rate) {
            (SweepAxis::Depth, None) => format!("{} original noise", self.model),
            (SweepAxis::Depth, Some(r)) => format!("{} noise {:.0}%", self.model, r * 100.0),
            (SweepAxis::NoiseRate, _) => self.model.to_string(),
        }
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::input("no values to summarize"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Hex sha256 over everything that determines a dataset's training inputs.
pub fn dataset_digest(d: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(d.name.as_bytes());
    h.update((d.num_nodes() as u64).to_le_bytes());
    for &(u, v) in d.graph.edges() {
        h.update((u as u64).to_le_bytes());
        h.update((v as u64).to_le_bytes());
    }
    for &y in &d.labels {
        h.update((y as u64).to_le_bytes());
    }
    for ids in [&d.split.train, &d.split.val, &d.split.test] {
        h.update((ids.len() as u64).to_le_bytes());
        for &i in ids.iter() {
            h.update((i as u64).to_le_bytes());
        }
    }
    let x = d.features.to_dense();
    h.update((x.cols() as u64).to_le_bytes());
    for v in x.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    dataset_digest: &'a str,
    model: ModelKind,
    config: &'a TrainConfig,
    mcgl: Option<&'a McglOptions>,
    target_noise_rate: Option<f64>,
    depth: usize,
    seeds: &'a [u64],
    graph_seeds: &'a [u64],
}

fn fingerprint(input: &FingerprintInput<'_>) -> String {
    let json = serde_json::to_vec(input).expect("fingerprint input serializes");
    hex::encode(Sha256::digest(json))
}

/// Seed for removing bad edges down to `rate`.
pub fn graph_seed(base_seed: u64, rate: f64, repeat: Option<usize>) -> u64 {
    let s = derive_seed(base_seed ^ 0x6772_6170_6865_6469, rate.to_bits());
    match repeat {
        Some(r) => derive_seed(s, r as u64),
        None => s,
    }
}

struct Job {
    cell: usize,
    graph: usize,
    seed: u64,
}

/// Runs every cell of `spec` on `dataset` using up to `jobs` worker threads.
/// Output order (and content) does not depend on `jobs`.
pub fn run_sweep(spec: &SweepSpec, dataset: &Dataset, jobs: usize) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    if dataset.split.test.is_empty() {
        return Err(Error::input("dataset has no test nodes"));
    }
    let original_rate = noise_rate(&dataset.graph, &dataset.labels)?;
    let cells = spec.cells();
    for &(target, _) in &cells {
        if let Some(r) = target {
            if r > original_rate + 1e-12 {
                return Err(Error::input(format!(
                    "target noise rate {r:.4} exceeds the original rate {original_rate:.4}"
                )));
            }
        }
    }

    // Edited graphs: index 0 is the original; one per (cell[, repeat]) otherwise.
    let mut graphs: Vec<Graph> = vec![dataset.graph.clone()];
    let mut graph_seeds: Vec<Vec<u64>> = Vec::with_capacity(cells.len());
    let mut plan = Vec::new();
    for (c, &(target, _)) in cells.iter().enumerate() {
        let mut seeds_for_cell = Vec::new();
        let shared = match target {
            Some(r) if !spec.resample_per_repeat => {
                let s = graph_seed(spec.base_seed, r, None);
                seeds_for_cell.push(s);
                graphs.push(reduce_noise(&dataset.graph, &dataset.labels, r, s)?);
                Some(graphs.len() - 1)
            }
            Some(_) => None,
            None => Some(0),
        };
        for rep in 0..spec.repeats {
            let g = match (shared, target) {
                (Some(g), _) => g,
                (None, Some(r)) => {
                    let s = graph_seed(spec.base_seed, r, Some(rep));
                    seeds_for_cell.push(s);
                    graphs.push(reduce_noise(&dataset.graph, &dataset.labels, r, s)?);
                    graphs.len() - 1
                }
                (None, None) => 0,
            };
            plan.push(Job {
                cell: c,
                graph: g,
                seed: spec.base_seed.wrapping_add(rep as u64),
            });
        }
        graph_seeds.push(seeds_for_cell);
    }

    let run_job = |job: &Job| -> Result<(f64, f64)> {
        let (_, depth) = cells[job.cell];
        let graph = &graphs[job.graph];
        let mut cfg = spec.config.clone();
        cfg.seed = job.seed;
        cfg.depth = depth;
        let mut mcgl = spec.mcgl.clone();
        if spec.axis == SweepAxis::Depth && spec.model == ModelKind::McglUm {
            mcgl.infer_depth = depth;
        }
        let start = Instant::now();
        let (model, _) = train_model(spec.model, &dataset.view_with_graph(graph), &cfg, &mcgl)?;
        let preds = model.predict(graph, &dataset.features)?;
        let acc = accuracy_on(&preds, &dataset.labels, &dataset.split.test)?;
        Ok((acc, start.elapsed().as_secs_f64()))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<(f64, f64)>> = pool.install(|| plan.par_iter().map(run_job).collect());

    let digest = dataset_digest(dataset);
    let mut records = Vec::with_capacity(cells.len());
    let mut it = plan.iter().zip(outcomes);
    for (c, &(target, depth)) in cells.iter().enumerate() {
        let mut seeds = Vec::with_capacity(spec.repeats);
        let mut accs = Vec::with_capacity(spec.repeats);
        let mut secs = Vec::with_capacity(spec.repeats);
        let mut achieved = Vec::new();
        for _ in 0..spec.repeats {
            let (job, outcome) = it.next().expect("one outcome per job");
            debug_assert_eq!(job.cell, c);
            let (acc, t) = outcome?;
            seeds.push(job.seed);
            accs.push(acc);
            secs.push(t);
            achieved.push(noise_rate(&graphs[job.graph], &dataset.labels)?);
        }
        let (mean, std) = mean_std(&accs)?;
        let (achieved_mean, _) = mean_std(&achieved)?;
        let mut cfg = spec.config.clone();
        cfg.depth = depth;
        cfg.seed = spec.base_seed;
        let fp = fingerprint(&FingerprintInput {
            dataset_digest: &digest,
            model: spec.model,
            config: &cfg,
            mcgl: (spec.model == ModelKind::McglUm).then_some(&spec.mcgl),
            target_noise_rate: target,
            depth,
            seeds: &seeds,
            graph_seeds: &graph_seeds[c],
        });
        let value = match spec.axis {
            SweepAxis::NoiseRate => target.unwrap_or(original_rate),
            SweepAxis::Depth => depth as f64,
        };
        records.push(ExperimentRecord {
            dataset: spec.dataset.clone(),
            model: spec.model,
            axis: spec.axis,
            value,
            target_noise_rate: target,
            achieved_noise_rate: achieved_mean,
            depth,
            fingerprint: fp,
            seeds,
            accuracies: accs,
            mean,
            std,
            wall_clock_secs: secs,
        });
    }
    Ok(records)
}

/// Noise sweep: one cell per target rate, depth fixed by the config.
pub fn run_noise_sweep(spec: &SweepSpec, dataset: &Dataset, jobs: usize) -> Result<Vec<ExperimentRecord>> {
    if spec.axis != SweepAxis::NoiseRate {
        return Err(Error::input("run_noise_sweep needs a noise_rate axis"));
    }
    run_sweep(spec, dataset, jobs)
}

/// Depth sweep of GCN* at every requested noise level.
pub fn run_depth_sweep(spec: &SweepSpec, dataset: &Dataset, jobs: usize) -> Result<Vec<ExperimentRecord>> {
    if spec.axis != SweepAxis::Depth {
        return Err(Error::input("run_depth_sweep needs a depth axis"));
    }
    if spec.model != ModelKind::GcnStar {
        return Err(Error::input("depth sweeps run GCN*"));
    }
    if spec.values.iter().any(|&k| k > 15.0) {
        return Err(Error::input("depths must lie in 0..=15"));
    }
    run_sweep(spec, dataset, jobs)
}

/// `mean±std` in percentage points with two decimals.
pub fn format_pct(mean: f64, std: f64) -> String {
    format!("{:.2}±{:.2}", mean * 100.0, std * 100.0)
}

/// Grid with one row per axis value and one column per series.
pub fn summarize(records: &[ExperimentRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::input("no records to summarize"));
    }
    let mut series: Vec<String> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for r in records {
        if r.accuracies.is_empty() {
            return Err(Error::input("record without accuracies"));
        }
        let s = r.series_label();
        if !series.contains(&s) {
            series.push(s);
        }
        if !values.iter().any(|v| *v == r.value) {
            values.push(r.value);
        }
    }
    values.sort_by(f64::total_cmp);
    let axis = records[0].axis;
    let mut out = String::new();
    let _ = write!(out, "{:<12}", axis.name());
    for s in &series {
        let _ = write!(out, " | {s:^24}");
    }
    out.push('\n');
    for v in values {
        let label = match axis {
            SweepAxis::NoiseRate => format!("{:.2}%", v * 100.0),
            SweepAxis::Depth => format!("K={v}"),
        };
        let _ = write!(out, "{label:<12}");
        for s in &series {
            let cell = records
                .iter()
                .find(|r| r.value == v && &r.series_label() == s)
                .map(|r| {
                    let (m, sd) = mean_std(&r.accuracies).expect("non-empty");
                    format_pct(m, sd)
                })
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, " | {cell:^24}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Flat CSV; `mean`/`std` in percentage points. The trailing `noise`
/// column names the noise level of depth-sweep rows.
pub fn to_csv(records: &[ExperimentRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::input("no records to summarize"));
    }
    let mut out = String::from("dataset,model,axis,value,mean,std,n,noise\n");
    for r in records {
        let (m, sd) = mean_std(&r.accuracies)?;
        let noise = match r.target_noise_rate {
            Some(t) => format!("{t}"),
            None => "original".into(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{},{}",
            r.dataset,
            r.model,
            r.axis.name(),
            r.value,
            m * 100.0,
            sd * 100.0,
            r.accuracies.len(),
            noise
        );
    }
    Ok(out)
}

/// `(label, points)` series for line plots, in first-seen order.
pub fn plot_series(records: &[ExperimentRecord]) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        let label = r.series_label();
        let x = match r.axis {
            SweepAxis::NoiseRate => r.value * 100.0,
            SweepAxis::Depth => r.value,
        };
        let point = (x, r.mean * 100.0);
        match out.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push(point),
            None => out.push((label, vec![point])),
        }
    }
    for (_, pts) in &mut out {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}
