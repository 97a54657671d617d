use std::path::{Path, PathBuf};
use std::time::Instant;

use mcgl::datasets::{generate as gen_dataset, load_dataset, write_text_dataset, Dataset, SynthKind, SynthSpec};
use mcgl::experiments::{
    dataset_digest, graph_seed, plot_series, preset_for, run_depth_sweep, run_noise_sweep, summarize, to_csv,
    ExperimentRecord, SweepAxis, SweepSpec,
};
use mcgl::graph::{classify_edges, noise_rate as rate_of, reduce_noise as reduce};
use mcgl::models::{accuracy_on, train_model, McglOptions, ModelKind, TrainedModel};
use mcgl::nn::TrainConfig;
use mcgl::svg::{line_chart, scatter_plot};
use serde_json::{json, Value};

use crate::keys::Settings;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn timestamp() -> String {
    chrono::Local::now().format("%Y%m%d-%H%M%S-%3f").to_string()
}

fn data_dir(s: &mut Settings) -> PathBuf {
    let dir = s
        .raw("data_dir")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("MCGL_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    s.set("data_dir", dir.display());
    dir
}

fn load(s: &mut Settings) -> Result<Dataset> {
    let dir = data_dir(s);
    let name = s.str("dataset")?.to_string();
    load_dataset(&dir, &name).map_err(|e| {
        if dir.is_dir() {
            CliError::Lib(e)
        } else {
            CliError::usage(format!("data directory {} does not exist ({e})", dir.display()))
        }
    })
}

/// Fails if any of `paths` exists and overwriting was not requested.
fn check_fresh(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(CliError::usage(format!(
                "{} already exists (pass --force to overwrite)",
                p.display()
            )));
        }
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| mcgl::Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| mcgl::Error::io(path, e).into())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// `<out_dir>/<output>` or `<out_dir>/<default>_<timestamp>`.
fn output_stem(s: &Settings, default: &str) -> Result<PathBuf> {
    let dir = PathBuf::from(s.str("out_dir")?);
    Ok(match s.raw("output") {
        Some(o) => dir.join(o),
        None => dir.join(format!("{default}_{}", timestamp())),
    })
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(suffix);
    PathBuf::from(p)
}

fn parse_list<T: std::str::FromStr>(s: &Settings, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.str(key)?
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|e| CliError::usage(format!("bad entry `{t}` in `{key}`: {e}")))
        })
        .collect()
}

fn parse_depths(s: &Settings) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in s.str("depths")?.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let bad = || CliError::usage(format!("bad depth `{part}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad())?;
                let b: usize = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                out.extend((a..=b).map(|k| k as f64));
            }
            None => out.push(part.parse::<usize>().map_err(|_| bad())? as f64),
        }
    }
    Ok(out)
}

/// Preset for `(dataset, model)` with every key given by the user applied.
fn train_config(s: &Settings, dataset: &str, model: ModelKind) -> Result<TrainConfig> {
    let mut c = preset_for(dataset, model);
    if let Some(v) = s.parse_opt("hidden_units")? {
        c.hidden_units = v;
    }
    if let Some(v) = s.parse_opt("learning_rate")? {
        c.learning_rate = v;
    }
    if let Some(v) = s.parse_opt("weight_decay")? {
        c.weight_decay = v;
    }
    if let Some(v) = s.parse_opt("dropout")? {
        c.dropout = v;
    }
    if let Some(v) = s.parse_opt("batch_size")? {
        c.batch_size = v;
    }
    if let Some(v) = s.parse_opt("depth")? {
        c.depth = v;
    }
    if let Some(v) = s.parse_opt("max_epochs")? {
        c.max_epochs = v;
    }
    if let Some(v) = s.parse_opt("patience")? {
        c.patience = v;
    }
    c.seed = s.parse("seed")?;
    c.validate()?;
    Ok(c)
}

fn record_config(s: &mut Settings, c: &TrainConfig) {
    s.set("hidden_units", c.hidden_units);
    s.set("learning_rate", c.learning_rate);
    s.set("weight_decay", c.weight_decay);
    s.set("dropout", c.dropout);
    s.set("batch_size", c.batch_size);
    s.set("depth", c.depth);
    s.set("max_epochs", c.max_epochs);
    s.set("patience", c.patience);
}

fn mcgl_options(s: &Settings) -> Result<McglOptions> {
    let opts = McglOptions {
        infer_depth: s.parse("infer_depth")?,
        include_self: s.parse("include_self")?,
        inference_mode: s.parse::<mcgl::NormalizationMode>("inference_mode")?,
        aggregation: s.parse("aggregation")?,
        batches_per_epoch: s.parse("batches_per_epoch")?,
    };
    if opts.batches_per_epoch == 0 {
        return Err(CliError::usage("batches_per_epoch must be positive"));
    }
    Ok(opts)
}

fn points(d: &Dataset) -> Option<Vec<(f64, f64)>> {
    let x = d.features.to_dense();
    (x.cols() == 2).then(|| (0..x.rows()).map(|i| (x.get(i, 0), x.get(i, 1))).collect())
}

fn dataset_files(dir: &Path, name: &str) -> Vec<PathBuf> {
    ["edges", "features.csv", "labels.csv", "split.json"]
        .iter()
        .map(|ext| dir.join(format!("{name}.{ext}")))
        .collect()
}

pub fn generate(mut s: Settings) -> Result<()> {
    let kind: SynthKind = s.parse("kind")?;
    let mut spec = SynthSpec::new(kind, s.parse("n")?, s.parse("seed")?);
    if let Some(v) = s.parse_opt("variance")? {
        spec.variance = v;
    }
    spec.k = s.parse("knn")?;
    spec.train_per_class = s.parse("train_per_class")?;
    spec.val_per_class = s.parse("val_per_class")?;
    spec.satellites = s.parse("satellites")?;
    spec.major_fraction = s.parse("major_fraction")?;
    s.set("variance", spec.variance);
    let mut d = gen_dataset(&spec)?;
    let name = s.raw("name").map(str::to_string).unwrap_or_else(|| d.name.clone());
    d.name = name.clone();
    let out = PathBuf::from(s.str("out_dir")?);
    let svg_path = out.join(format!("{name}.svg"));
    let mut files = dataset_files(&out, &name);
    files.push(svg_path.clone());
    check_fresh(&files, s.parse("force")?)?;
    std::fs::create_dir_all(&out).map_err(|e| mcgl::Error::io(&out, e))?;
    write_text_dataset(&out, &d)?;
    let pts = points(&d).expect("synthetic datasets are 2-d");
    let mut highlight = vec![false; d.num_nodes()];
    for &i in &d.split.train {
        highlight[i] = true;
    }
    let title = format!("{name} (n={}, seed={})", d.num_nodes(), spec.seed);
    write(&svg_path, &scatter_plot(&title, &pts, &d.labels, &highlight, d.graph.edges()))?;
    println!(
        "wrote {name}: {} nodes, {} edges, train/val/test {}/{}/{}",
        d.num_nodes(),
        d.graph.num_edges(),
        d.split.train.len(),
        d.split.val.len(),
        d.split.test.len()
    );
    Ok(())
}

fn acc_or_null(preds: &[usize], labels: &[usize], ids: &[usize]) -> Result<Value> {
    if ids.is_empty() {
        return Ok(Value::Null);
    }
    Ok(json!(accuracy_on(preds, labels, ids)?))
}

pub fn train(mut s: Settings) -> Result<()> {
    let model: ModelKind = s.parse("model")?;
    let d = load(&mut s)?;
    let mut cfg = train_config(&s, &d.name, model)?;
    cfg.seed = s.parse("seed")?;
    record_config(&mut s, &cfg);
    let opts = mcgl_options(&s)?;
    let graph = match s.parse_opt::<f64>("noise_rate")? {
        Some(r) => reduce(&d.graph, &d.labels, r, graph_seed(cfg.seed, r, None))?,
        None => d.graph.clone(),
    };
    let stem = output_stem(&s, &format!("{}_{}_train", d.name, model))?;
    let files = [
        with_suffix(&stem, ".json"),
        with_suffix(&stem, ".model.json"),
        with_suffix(&stem, ".timing.json"),
    ];
    check_fresh(&files, s.parse("force")?)?;

    let start = Instant::now();
    let (trained, report) = train_model(model, &d.view_with_graph(&graph), &cfg, &opts)?;
    let secs = start.elapsed().as_secs_f64();
    let preds = trained.predict(&graph, &d.features)?;
    let metrics = json!({
        "command": "train",
        "config": s.to_json(),
        "dataset": d.name,
        "dataset_digest": dataset_digest(&d),
        "model": model.name(),
        "noise_rate": rate_of(&graph, &d.labels).ok(),
        "num_edges": graph.num_edges(),
        "report": report,
        "accuracy": {
            "train": acc_or_null(&preds, &d.labels, &d.split.train)?,
            "val": acc_or_null(&preds, &d.labels, &d.split.val)?,
            "test": acc_or_null(&preds, &d.labels, &d.split.test)?,
        },
    });
    write(&files[0], &pretty(&metrics))?;
    write(&files[1], &trained.to_json()?)?;
    write(
        &files[2],
        &pretty(&json!({"timestamp": chrono::Local::now().to_rfc3339(), "train_secs": secs})),
    )?;
    println!(
        "{} on {}: test {} after {} epochs -> {}",
        model,
        d.name,
        metrics["accuracy"]["test"],
        report.epochs_run,
        files[0].display()
    );
    Ok(())
}

pub fn infer(mut s: Settings) -> Result<()> {
    let path = PathBuf::from(s.str("checkpoint")?);
    let text = std::fs::read_to_string(&path).map_err(|e| mcgl::Error::io(&path, e))?;
    let model = TrainedModel::from_json(&text)?;
    let d = load(&mut s)?;
    let stem = output_stem(&s, &format!("{}_{}_infer", d.name, model.kind()))?;
    let out = with_suffix(&stem, ".json");
    check_fresh(std::slice::from_ref(&out), s.parse("force")?)?;
    let preds = model.predict(&d.graph, &d.features)?;
    let v = json!({
        "command": "infer",
        "config": s.to_json(),
        "dataset": d.name,
        "model": model.kind().name(),
        "accuracy": {"test": acc_or_null(&preds, &d.labels, &d.split.test)?},
        "predictions": preds,
    });
    write(&out, &pretty(&v))?;
    println!("test {} -> {}", v["accuracy"]["test"], out.display());
    Ok(())
}

fn write_sweep(
    s: &Settings,
    stem: &Path,
    specs: &[SweepSpec],
    records: &[ExperimentRecord],
    secs: f64,
    x_label: &str,
) -> Result<()> {
    let files = [
        with_suffix(stem, ".json"),
        with_suffix(stem, ".csv"),
        with_suffix(stem, ".svg"),
        with_suffix(stem, ".timing.json"),
    ];
    let body = json!({
        "command": if records[0].axis == SweepAxis::NoiseRate { "sweep-noise" } else { "sweep-depth" },
        "config": s.to_json(),
        "specs": specs,
        "records": records,
    });
    write(&files[0], &pretty(&body))?;
    write(&files[1], &to_csv(records)?)?;
    let title = format!("{} accuracy vs {x_label}", records[0].dataset);
    write(&files[2], &line_chart(&title, x_label, "accuracy (%)", &plot_series(records)))?;
    let per_record: Vec<Value> = records
        .iter()
        .map(|r| json!({"series": r.series_label(), "value": r.value, "wall_clock_secs": r.wall_clock_secs}))
        .collect();
    write(
        &files[3],
        &pretty(&json!({"timestamp": chrono::Local::now().to_rfc3339(), "total_secs": secs, "records": per_record})),
    )?;
    print!("{}", summarize(records)?);
    println!("-> {}", files[0].display());
    Ok(())
}

fn sweep_files(stem: &Path) -> Vec<PathBuf> {
    [".json", ".csv", ".svg", ".timing.json"]
        .iter()
        .map(|x| with_suffix(stem, x))
        .collect()
}

pub fn sweep_noise(mut s: Settings) -> Result<()> {
    let d = load(&mut s)?;
    let models: Vec<ModelKind> = parse_list(&s, "models")?;
    if models.is_empty() {
        return Err(CliError::usage("no models to sweep"));
    }
    let mut rates: Vec<f64> = parse_list(&s, "rates")?;
    rates.sort_by(f64::total_cmp);
    let opts = mcgl_options(&s)?;
    let names: Vec<&str> = models.iter().map(|m| m.name()).collect();
    let stem = output_stem(&s, &format!("{}_{}_noise_rate", d.name, names.join("-")))?;
    check_fresh(&sweep_files(&stem), s.parse("force")?)?;
    let jobs = s.parse("jobs")?;
    let start = Instant::now();
    let mut specs = Vec::new();
    let mut records = Vec::new();
    for model in models {
        let spec = SweepSpec {
            dataset: d.name.clone(),
            model,
            axis: SweepAxis::NoiseRate,
            values: rates.clone(),
            noise_levels: vec![],
            config: train_config(&s, &d.name, model)?,
            mcgl: opts.clone(),
            repeats: s.parse("repeats")?,
            base_seed: s.parse("seed")?,
            resample_per_repeat: s.parse("resample_per_repeat")?,
        };
        records.extend(run_noise_sweep(&spec, &d, jobs)?);
        specs.push(spec);
    }
    write_sweep(&s, &stem, &specs, &records, start.elapsed().as_secs_f64(), "noise rate (%)")
}

pub fn sweep_depth(mut s: Settings) -> Result<()> {
    let d = load(&mut s)?;
    let model: ModelKind = s.parse("model")?;
    let depths = parse_depths(&s)?;
    let mut levels = Vec::new();
    for t in s.str("noise_levels")?.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        levels.push(match t {
            "original" => None,
            r => Some(
                r.parse::<f64>()
                    .map_err(|e| CliError::usage(format!("bad noise level `{r}`: {e}")))?,
            ),
        });
    }
    let stem = output_stem(&s, &format!("{}_{}_depth", d.name, model))?;
    check_fresh(&sweep_files(&stem), s.parse("force")?)?;
    let spec = SweepSpec {
        dataset: d.name.clone(),
        model,
        axis: SweepAxis::Depth,
        values: depths,
        noise_levels: levels,
        config: train_config(&s, &d.name, model)?,
        mcgl: McglOptions::default(),
        repeats: s.parse("repeats")?,
        base_seed: s.parse("seed")?,
        resample_per_repeat: s.parse("resample_per_repeat")?,
    };
    let start = Instant::now();
    let records = run_depth_sweep(&spec, &d, s.parse("jobs")?)?;
    write_sweep(&s, &stem, &[spec], &records, start.elapsed().as_secs_f64(), "depth K")
}

pub fn noise_rate(mut s: Settings) -> Result<()> {
    let d = load(&mut s)?;
    let part = classify_edges(&d.graph, &d.labels)?;
    let v = json!({
        "dataset": d.name,
        "num_nodes": d.num_nodes(),
        "num_edges": d.graph.num_edges(),
        "good_edges": part.good_edges.len(),
        "bad_edges": part.bad_edges.len(),
        "noise_rate": rate_of(&d.graph, &d.labels)?,
    });
    print!("{}", pretty(&v));
    Ok(())
}

pub fn reduce_noise(mut s: Settings) -> Result<()> {
    let d = load(&mut s)?;
    let target: f64 = s.parse("target")?;
    let seed: u64 = s.parse("seed")?;
    let name = s
        .raw("name")
        .map(str::to_string)
        .unwrap_or_else(|| format!("{}_noise{}", d.name, s.raw("target").unwrap_or_default()));
    let out = PathBuf::from(s.str("out_dir")?);
    check_fresh(&dataset_files(&out, &name), s.parse("force")?)?;
    let before = rate_of(&d.graph, &d.labels)?;
    let graph = reduce(&d.graph, &d.labels, target, seed)?;
    let removed = d.graph.num_edges() - graph.num_edges();
    let edited = Dataset::new(name.clone(), graph, d.features.clone(), d.labels.clone(), d.split.clone())?;
    std::fs::create_dir_all(&out).map_err(|e| mcgl::Error::io(&out, e))?;
    write_text_dataset(&out, &edited)?;
    let after = if edited.graph.num_edges() == 0 {
        0.0
    } else {
        rate_of(&edited.graph, &edited.labels)?
    };
    print!(
        "{}",
        pretty(&json!({"dataset": name, "original_rate": before, "achieved_rate": after, "removed_edges": removed}))
    );
    Ok(())
}

pub fn plot(s: Settings) -> Result<()> {
    let input = PathBuf::from(s.str("input")?);
    let text = std::fs::read_to_string(&input).map_err(|e| mcgl::Error::io(&input, e))?;
    let body: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{} is not JSON: {e}", input.display())))?;
    let records: Vec<ExperimentRecord> = serde_json::from_value(body["records"].clone())
        .map_err(|e| CliError::usage(format!("{} has no sweep records: {e}", input.display())))?;
    if records.is_empty() {
        return Err(CliError::usage("no records to plot"));
    }
    let output = s
        .raw("output")
        .map(PathBuf::from)
        .unwrap_or_else(|| input.with_extension("svg"));
    check_fresh(std::slice::from_ref(&output), s.parse("force")?)?;
    let x_label = match records[0].axis {
        SweepAxis::NoiseRate => "noise rate (%)",
        SweepAxis::Depth => "depth K",
    };
    let title = s
        .raw("title")
        .map(str::to_string)
        .unwrap_or_else(|| format!("{} accuracy vs {x_label}", records[0].dataset));
    write(&output, &line_chart(&title, x_label, "accuracy (%)", &plot_series(&records)))?;
    println!("-> {}", output.display());
    Ok(())
}
