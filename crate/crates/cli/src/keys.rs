//! Configuration keys. Each key is accepted as `--key-name` on the command
//! line and as `key_name = value` in a config file; flags win over the file,
//! the file wins over defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::CliError;

#[derive(Clone, Copy)]
pub enum Fallback {
    Value(&'static str),
    /// Must be given somewhere.
    Required,
    /// Filled in by the command (dataset preset, derived name, env var).
    Derived(&'static str),
}

#[derive(Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    pub default: Fallback,
    pub flag: bool,
}

const fn key(name: &'static str, help: &'static str, default: Fallback) -> Key {
    Key {
        name,
        help,
        default,
        flag: false,
    }
}

const fn switch(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        default: Fallback::Value("false"),
        flag: true,
    }
}

use Fallback::{Derived, Required, Value};

pub const DATA_DIR: Key = key("data_dir", "dataset root", Derived("$MCGL_DATA_DIR, else ."));
pub const OUT_DIR: Key = key("out_dir", "directory for outputs", Value("."));
pub const OUTPUT: Key = key(
    "output",
    "output file stem; default <dataset>_<model>_<axis>_<timestamp>",
    Derived("timestamped"),
);
pub const FORCE: Key = switch("force", "overwrite existing outputs");
pub const JOBS: Key = key("jobs", "worker threads for sweeps", Value("1"));
pub const SEED: Key = key("seed", "random seed (base seed for sweeps)", Value("0"));

pub const TRAIN_KEYS: [Key; 8] = [
    key("hidden_units", "hidden layer width", Derived("dataset preset")),
    key("learning_rate", "Adam learning rate", Derived("dataset preset")),
    key("weight_decay", "L2 penalty on weights", Derived("dataset preset")),
    key("dropout", "dropout rate in [0, 1)", Derived("dataset preset")),
    key("batch_size", "MCGL-UM batch size", Derived("dataset preset")),
    key("depth", "sampling depth (MCGL-UM) or propagation depth (GCN*)", Derived("dataset preset")),
    key("max_epochs", "epoch budget", Derived("dataset preset")),
    key("patience", "early-stopping patience in epochs", Derived("dataset preset")),
];

pub const MCGL_KEYS: [Key; 5] = [
    key("infer_depth", "MCGL-UM inference propagation steps", Value("2")),
    key("include_self", "count a node among its own neighbors when sampling", Value("true")),
    key("inference_mode", "MCGL-UM inference adjacency: row_stochastic or symmetric", Value("row_stochastic")),
    key("aggregation", "MCGL-UM aggregates probabilities or logits", Value("probabilities")),
    key("batches_per_epoch", "MCGL-UM batches per epoch", Value("100")),
];

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn key_name(text: &str) -> String {
    text.trim().replace('-', "_")
}

/// Adds one flag per key plus `--config`.
pub fn with_keys(mut cmd: Command, keys: &[Key]) -> Command {
    cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("flat `key = value` file; any key below may appear in it"),
    );
    for k in keys {
        let default = match k.default {
            Value(v) => format!(" [default: {v}]"),
            Required => " [required]".to_string(),
            Derived(d) => format!(" [default: {d}]"),
        };
        let mut arg = Arg::new(k.name)
            .long(flag_name(k.name))
            .help(format!("{}{default}", k.help));
        if k.flag {
            arg = arg
                .num_args(0..=1)
                .default_missing_value("true")
                .value_name("BOOL");
        } else {
            arg = arg.value_name("VALUE").action(ArgAction::Set);
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str, keys: &[Key], origin: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("{}:{}: expected `key = value`", origin.display(), i + 1))
        })?;
        let k = key_name(k);
        if !keys.iter().any(|key| key.name == k) {
            return Err(CliError::usage(format!(
                "{}:{}: unknown key `{k}`",
                origin.display(),
                i + 1
            )));
        }
        let v = v.trim().trim_matches('"').to_string();
        out.insert(k, v);
    }
    Ok(out)
}

/// The fully resolved key/value map of one invocation.
#[derive(Debug, Clone)]
pub struct Settings {
    pub values: BTreeMap<String, String>,
}

impl Settings {
    /// Defaults, then the config file, then flags, then positionals.
    pub fn resolve(
        m: &ArgMatches,
        keys: &[Key],
        positionals: &[(&str, &str)],
    ) -> Result<Settings, CliError> {
        let mut values = BTreeMap::new();
        for k in keys {
            if let Value(v) = k.default {
                values.insert(k.name.to_string(), v.to_string());
            }
        }
        if let Some(path) = m.get_one::<String>("config") {
            let path = Path::new(path);
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            values.extend(parse_config(&text, keys, path)?);
        }
        for k in keys {
            if let Some(v) = m.get_one::<String>(k.name) {
                values.insert(k.name.to_string(), v.clone());
            }
        }
        for (id, k) in positionals {
            if let Some(v) = m.get_one::<String>(id) {
                values.insert(k.to_string(), v.clone());
            }
        }
        for k in keys {
            if matches!(k.default, Required) && !values.contains_key(k.name) {
                return Err(CliError::usage(format!("missing required key `{}`", k.name)));
            }
        }
        Ok(Settings { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn str(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::usage(format!("missing required key `{key}`")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.str(key)?;
        v.parse()
            .map_err(|e| CliError::usage(format!("bad value `{v}` for `{key}`: {e}")))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: [Key; 2] = [
        key("learning_rate", "lr", Value("0.01")),
        switch("force", "f"),
    ];

    #[test]
    fn config_accepts_either_spelling() {
        let m = parse_config("# c\nlearning-rate = 0.5\n\nforce = \"true\"\n", &KEYS, Path::new("x")).unwrap();
        assert_eq!(m["learning_rate"], "0.5");
        assert_eq!(m["force"], "true");
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(parse_config("speed = 3", &KEYS, Path::new("x")).is_err());
        assert!(parse_config("no equals sign", &KEYS, Path::new("x")).is_err());
    }

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "learning_rate = 0.2\n").unwrap();
        let cmd = with_keys(Command::new("t"), &KEYS);
        let m = cmd
            .clone()
            .try_get_matches_from(["t", "--config", cfg.to_str().unwrap()])
            .unwrap();
        let s = Settings::resolve(&m, &KEYS, &[]).unwrap();
        assert_eq!(s.str("learning_rate").unwrap(), "0.2");
        assert_eq!(s.str("force").unwrap(), "false");
        let m = cmd
            .try_get_matches_from(["t", "--config", cfg.to_str().unwrap(), "--learning-rate", "0.3", "--force"])
            .unwrap();
        let s = Settings::resolve(&m, &KEYS, &[]).unwrap();
        assert_eq!(s.str("learning_rate").unwrap(), "0.3");
        assert!(s.parse::<bool>("force").unwrap());
    }
}
