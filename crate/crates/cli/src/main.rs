//! `mcgl` command-line tool. Exit codes: 0 success, 2 input or config error,
//! 3 dataset ingestion error, 4 internal error.

mod commands;
mod keys;

use std::process::ExitCode;

use clap::{Arg, Command};

use keys::{Fallback::*, Key, DATA_DIR, FORCE, JOBS, MCGL_KEYS, OUTPUT, OUT_DIR, SEED, TRAIN_KEYS};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(mcgl::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                mcgl::Error::Input(_) | mcgl::Error::UndefinedRate | mcgl::Error::Io { .. } => 2,
                mcgl::Error::Ingestion { .. } => 3,
                mcgl::Error::Internal(_) => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "input error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<mcgl::Error> for CliError {
    fn from(e: mcgl::Error) -> CliError {
        CliError::Lib(e)
    }
}

const fn k(name: &'static str, help: &'static str, default: keys::Fallback) -> Key {
    Key {
        name,
        help,
        default,
        flag: false,
    }
}

const RESAMPLE: Key = Key {
    name: "resample_per_repeat",
    help: "edit the graph separately for every repeat",
    default: Value("false"),
    flag: true,
};

fn generate_keys() -> Vec<Key> {
    vec![
        k("kind", "graph-xor, circles, communities or large-variance", Required),
        k("n", "number of nodes (even, at least 4)", Value("60")),
        SEED,
        k("variance", "per-class Gaussian variance", Derived("1, or 2 for large-variance")),
        k("knn", "neighbors per node in the kNN edge policy", Value("3")),
        k("train_per_class", "training nodes per class", Value("5")),
        k("val_per_class", "validation nodes per class", Value("5")),
        k("satellites", "satellite communities per class (communities)", Value("3")),
        k("major_fraction", "share of a class in its major community (communities)", Value("0.6")),
        k("name", "dataset name used for the output files", Derived("kind")),
        OUT_DIR,
        FORCE,
    ]
}

fn train_keys() -> Vec<Key> {
    let mut v = vec![
        k("model", "gcn, gcn-star or mcgl-um", Required),
        k("dataset", "dataset name under data_dir", Required),
        DATA_DIR,
        k("noise_rate", "train on a graph with bad edges removed down to this rate", Derived("original graph")),
        SEED,
    ];
    v.extend(TRAIN_KEYS);
    v.extend(MCGL_KEYS);
    v.extend([OUT_DIR, OUTPUT, FORCE]);
    v
}

fn infer_keys() -> Vec<Key> {
    vec![
        k("checkpoint", "model checkpoint written by `train`", Required),
        k("dataset", "dataset name under data_dir", Required),
        DATA_DIR,
        OUT_DIR,
        OUTPUT,
        FORCE,
    ]
}

fn sweep_noise_keys() -> Vec<Key> {
    let mut v = vec![
        k("dataset", "dataset name under data_dir", Required),
        DATA_DIR,
        k("models", "comma-separated models", Value("mcgl-um,gcn")),
        k("rates", "comma-separated target noise rates", Value("0,0.03,0.06,0.09,0.12,0.15,0.18")),
        k("repeats", "seeds per cell", Value("10")),
        SEED,
        JOBS,
        RESAMPLE,
    ];
    v.extend(TRAIN_KEYS);
    v.extend(MCGL_KEYS);
    v.extend([OUT_DIR, OUTPUT, FORCE]);
    v
}

fn sweep_depth_keys() -> Vec<Key> {
    let mut v = vec![
        k("dataset", "dataset name under data_dir", Required),
        DATA_DIR,
        k("model", "model to sweep (gcn-star)", Value("gcn-star")),
        k("depths", "depths as a list or range, e.g. 0-15 or 0,2,4", Value("0-15")),
        k("noise_levels", "comma-separated noise levels; `original` keeps the graph", Value("original,0.1,0")),
        k("repeats", "seeds per cell", Value("10")),
        SEED,
        JOBS,
        RESAMPLE,
    ];
    v.extend(TRAIN_KEYS.into_iter().filter(|k| k.name != "depth"));
    v.extend([OUT_DIR, OUTPUT, FORCE]);
    v
}

fn noise_rate_keys() -> Vec<Key> {
    vec![k("dataset", "dataset name under data_dir", Required), DATA_DIR]
}

fn reduce_noise_keys() -> Vec<Key> {
    vec![
        k("dataset", "dataset name under data_dir", Required),
        DATA_DIR,
        k("target", "noise rate to reduce to", Required),
        SEED,
        k("name", "name of the edited dataset", Derived("<dataset>_noise<target>")),
        OUT_DIR,
        FORCE,
    ]
}

fn plot_keys() -> Vec<Key> {
    vec![
        k("input", "sweep JSON written by sweep-noise or sweep-depth", Required),
        k("output", "SVG path", Derived("input with .svg extension")),
        k("title", "chart title", Derived("dataset and axis")),
        FORCE,
    ]
}

struct Sub {
    name: &'static str,
    about: &'static str,
    keys: Vec<Key>,
    positionals: &'static [&'static str],
}

fn subcommands() -> Vec<Sub> {
    vec![
        Sub { name: "generate", about: "Write a synthetic dataset and its scatter plot", keys: generate_keys(), positionals: &["kind"] },
        Sub { name: "train", about: "Train one model and write metrics and a checkpoint", keys: train_keys(), positionals: &["model", "dataset"] },
        Sub { name: "infer", about: "Predict with a checkpoint", keys: infer_keys(), positionals: &["checkpoint", "dataset"] },
        Sub { name: "sweep-noise", about: "Accuracy against reduced noise rates", keys: sweep_noise_keys(), positionals: &["dataset"] },
        Sub { name: "sweep-depth", about: "GCN* accuracy against propagation depth", keys: sweep_depth_keys(), positionals: &["dataset"] },
        Sub { name: "noise-rate", about: "Print the share of bad edges", keys: noise_rate_keys(), positionals: &["dataset"] },
        Sub { name: "reduce-noise", about: "Write a copy of a dataset with bad edges removed", keys: reduce_noise_keys(), positionals: &["dataset"] },
        Sub { name: "plot", about: "Redraw the line chart of a sweep", keys: plot_keys(), positionals: &["input"] },
    ]
}

fn positional_id(key: &str) -> String {
    format!("{key}_pos")
}

fn cli(subs: &[Sub]) -> Command {
    let mut cmd = Command::new("mcgl")
        .about("Node classification with GCN, GCN* and MCGL-UM")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for s in subs {
        let mut sc = Command::new(s.name).about(s.about);
        for (i, p) in s.positionals.iter().enumerate() {
            sc = sc.arg(
                Arg::new(positional_id(p))
                    .index(i + 1)
                    .value_name(p.to_uppercase())
                    .help(format!("same as --{}", keys::flag_name(p))),
            );
        }
        cmd = cmd.subcommand(keys::with_keys(sc, &s.keys));
    }
    cmd
}

fn run() -> Result<(), CliError> {
    let subs = subcommands();
    let matches = match cli(&subs).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Ok(()),
                _ => Err(CliError::usage("invalid command line")),
            };
        }
    };
    let (name, m) = matches.subcommand().expect("subcommand required");
    let sub = subs.iter().find(|s| s.name == name).expect("known subcommand");
    let ids: Vec<String> = sub.positionals.iter().map(|p| positional_id(p)).collect();
    let pos: Vec<(&str, &str)> = ids.iter().map(String::as_str).zip(sub.positionals.iter().copied()).collect();
    let settings = keys::Settings::resolve(m, &sub.keys, &pos)?;
    match name {
        "generate" => commands::generate(settings),
        "train" => commands::train(settings),
        "infer" => commands::infer(settings),
        "sweep-noise" => commands::sweep_noise(settings),
        "sweep-depth" => commands::sweep_depth(settings),
        "noise-rate" => commands::noise_rate(settings),
        "reduce-noise" => commands::reduce_noise(settings),
        "plot" => commands::plot(settings),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(&e, CliError::Usage(m) if m == "invalid command line") {
                eprintln!("mcgl: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_every_key_and_config_accepts_it() {
        let subs = subcommands();
        let mut root = cli(&subs);
        for s in &subs {
            let help = root
                .find_subcommand_mut(s.name)
                .expect("registered")
                .render_long_help()
                .to_string();
            let mut file = String::new();
            for key in &s.keys {
                assert!(help.contains(&format!("--{}", keys::flag_name(key.name))), "{} {}", s.name, key.name);
                file.push_str(&format!("{} = x\n", key.name));
            }
            let parsed = keys::parse_config(&file, &s.keys, std::path::Path::new("t")).unwrap();
            assert_eq!(parsed.len(), s.keys.len());
        }
    }

    #[test]
    fn positionals_are_keys() {
        for s in subcommands() {
            for p in s.positionals {
                assert!(s.keys.iter().any(|k| k.name == *p), "{} {p}", s.name);
            }
        }
    }
}
