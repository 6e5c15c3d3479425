//! Per-command key schemas and layered configuration loading.
//!
//! Values are resolved from schema defaults, then the config file (flat TOML:
//! top-level keys plus an optional section named after the command), then
//! `W2SLAB_SEED`, then `--set key=value` overrides.

use std::collections::BTreeMap;
use std::path::Path;

use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Str,
    FloatList,
    StrList,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Int => "integer",
            Kind::Float => "number",
            Kind::Bool => "boolean",
            Kind::Str => "string",
            Kind::FloatList => "list of numbers",
            Kind::StrList => "list of strings",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    /// TOML literal, or `None` for keys that are unset by default.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: Some(default),
        help,
    }
}

pub const COMMANDS: [&str; 4] = ["verify", "ridge", "classify", "bias-variance"];

const VERIFY: &[KeySpec] = &[
    key("seed", Kind::Int, "0", "master seed for all suites"),
    KeySpec {
        name: "tolerance",
        kind: Kind::Float,
        default: None,
        help: "replaces every suite tolerance when set",
    },
    key("scenarios", Kind::Int, "100", "random finite scenarios per geometry"),
    key("triples", Kind::Int, "1000", "random triples per geometry"),
    key("pairs", Kind::Int, "10000", "random pairs per geometry for nonnegativity"),
    key("lemma_sets", Kind::Int, "4", "sample sets checked by grid search"),
    key("grid_step", Kind::Float, "1e-3", "grid spacing of the minimizer search"),
    key("prop1_constructions", Kind::Int, "50", "random constructions for the entropy-gap check"),
    key("bias_variance_draws", Kind::Int, "100", "random ensembles for the bias-variance identity"),
];

const RIDGE: &[KeySpec] = &[
    key("seed", Kind::Int, "0", "seed shared by every grid cell"),
    key("d_w", Kind::Int, "200", "teacher dimension"),
    key("gammas", Kind::FloatList, "[1.5, 2.0, 4.0]", "capacity ratios d_s/d_w, each > 1"),
    key("eta0s", Kind::FloatList, "[0.5, 1.0]", "scaled ridge coefficients, each > 0"),
    key("n_ratio", Kind::Float, "20.0", "sample ratio n/d_w"),
    key("b", Kind::Float, "1.0", "teacher weight budget"),
    key("trials", Kind::Int, "50", "independent draws per cell"),
    key("bound_factor", Kind::Float, "1.1", "allowed factor over the closed-form bound"),
    key("tolerance", Kind::Float, "1e-6", "allowed |quadrature - closed form|"),
];

const PIPELINE: &[KeySpec] = &[
    key("seed", Kind::Int, "0", "master seed"),
    key("d", Kind::Int, "16", "input dimension"),
    key("separation", Kind::Float, "2.0", "distance of each class mean from the origin"),
    key("sigma", Kind::Float, "1.0", "per-coordinate noise scale"),
    key("n_train", Kind::Int, "64", "teacher training split size"),
    key("n_pseudo", Kind::Int, "1000", "pseudo-label split size"),
    key("n_test", Kind::Int, "2000", "test split size"),
    key("d_w", Kind::Int, "8", "input coordinates seen by the weak model"),
    key("capacity_ratio", Kind::Int, "8", "strong features per weak feature"),
    key("init_scale", Kind::Float, "1.0", "scale of the strong model initialization"),
    key("teacher_steps", Kind::Int, "500", "teacher optimizer steps"),
    key("teacher_lr", Kind::Float, "0.1", "teacher learning rate"),
    key("teacher_batch", Kind::Int, "32", "teacher batch size"),
    key("teacher_optimizer", Kind::Str, "\"sgd\"", "sgd or adam"),
    key("student_steps", Kind::Int, "500", "student optimizer steps"),
    key("student_lr", Kind::Float, "0.03", "student learning rate"),
    key("student_batch", Kind::Int, "32", "student batch size"),
    key("student_optimizer", Kind::Str, "\"adam\"", "sgd or adam"),
    key("cace_eta", Kind::Float, "20.0", "confidence quantile (percent) for the CACE threshold"),
    key("sl_lambda_rce", Kind::Float, "1.0", "RCE weight of the SL loss"),
    key("sl_lambda_ce", Kind::Float, "1.0", "CE weight of the SL loss"),
    key("aux_beta_max", Kind::Float, "0.5", "final weak-label weight of the AUX loss"),
    key("aux_warmup", Kind::Float, "0.2", "fraction of steps over which the AUX weight ramps up"),
    key("swap_capacities", Kind::Bool, "false", "train the strong model as teacher"),
];

const CLASSIFY: &[KeySpec] = &[
    key("losses", Kind::StrList, "[\"ce\", \"rce\"]", "losses: ce, rce, kl, rkl, cace, sl, aux"),
    key("alphas", Kind::FloatList, "[0.0, 0.001, 0.01, 0.1, 1.0]", "smoothing levels in [0, 1]"),
    key("repeats", Kind::Int, "3", "repeats per cell"),
];

const BIAS_VARIANCE: &[KeySpec] = &[
    key("k", Kind::Int, "4", "rounds of fresh data"),
    key("n_splits", Kind::Int, "4", "disjoint split pairs per round"),
    key("loss", Kind::Str, "\"ce\"", "student loss"),
    key("alpha", Kind::Float, "1.0", "smoothing level"),
    key("tolerance", Kind::Float, "1e-9", "allowed |bias + variance - mean CE|"),
];

pub fn schema(command: &str) -> Vec<KeySpec> {
    match command {
        "verify" => VERIFY.to_vec(),
        "ridge" => RIDGE.to_vec(),
        "classify" => PIPELINE.iter().chain(CLASSIFY).copied().collect(),
        "bias-variance" => PIPELINE.iter().chain(BIAS_VARIANCE).copied().collect(),
        other => panic!("no schema for command {other}"),
    }
}

/// Help text listing every key with its default.
pub fn schema_help(command: &str) -> String {
    let mut out = String::from("Configuration keys (default in brackets):\n");
    for k in schema(command) {
        let default = k.default.unwrap_or("unset");
        out.push_str(&format!("  {:<20} {} [{}]\n", k.name, k.help, default));
    }
    out.push_str("\nW2SLAB_SEED overrides `seed`; --set overrides both the file and the environment.");
    out
}

/// Fully resolved key/value configuration of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: String,
    values: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    pub fn load(command: &str, file: Option<&Path>, sets: &[String], env_seed: Option<&str>) -> Result<Self> {
        let specs = schema(command);
        let mut values = BTreeMap::new();
        for k in &specs {
            if let Some(lit) = k.default {
                values.insert(k.name.to_string(), parse_literal(lit).expect("schema defaults are valid"));
            }
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let table: Table = text
                .parse()
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            for (name, value) in table {
                match value {
                    Value::Table(section) if name == command => {
                        for (k, v) in section {
                            assign(&specs, &mut values, &k, v, &format!("[{command}] in {}", path.display()))?;
                        }
                    }
                    Value::Table(_) if COMMANDS.contains(&name.as_str()) => {}
                    Value::Table(_) => return Err(CliError::config(format!("unknown section [{name}]"))),
                    v => assign(&specs, &mut values, &name, v, &path.display().to_string())?,
                }
            }
        }
        if let Some(seed) = env_seed {
            let v = parse_literal(seed.trim()).map_err(|_| CliError::config(format!("W2SLAB_SEED={seed} is not an integer")))?;
            assign(&specs, &mut values, "seed", v, "W2SLAB_SEED")?;
        }
        for s in sets {
            let (k, raw) = s
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("--set expects key=value, got {s:?}")))?;
            let v = parse_literal(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
            assign(&specs, &mut values, k.trim(), v, "--set")?;
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("key {key} has no value"))
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.get(key).as_integer().expect("integer key") as u64
    }

    pub fn usize(&self, key: &str) -> usize {
        self.u64(key) as usize
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).as_float().expect("float key")
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_float)
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().expect("bool key")
    }

    pub fn str(&self, key: &str) -> &str {
        self.get(key).as_str().expect("string key")
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        let arr = self.get(key).as_array().expect("list key");
        arr.iter().map(|v| v.as_float().expect("float entries")).collect()
    }

    pub fn str_list(&self, key: &str) -> Vec<String> {
        let arr = self.get(key).as_array().expect("list key");
        arr.iter().map(|v| v.as_str().expect("string entries").to_string()).collect()
    }
}

fn parse_literal(raw: &str) -> std::result::Result<Value, toml::de::Error> {
    let mut t: Table = format!("v = {raw}").parse()?;
    Ok(t.remove("v").expect("single key"))
}

fn assign(specs: &[KeySpec], values: &mut BTreeMap<String, Value>, key: &str, v: Value, origin: &str) -> Result<()> {
    let spec = specs
        .iter()
        .find(|s| s.name == key)
        .ok_or_else(|| CliError::config(format!("unknown key {key:?} ({origin})")))?;
    let coerced = coerce(spec.kind, v)
        .ok_or_else(|| CliError::config(format!("key {key:?} expects a {} ({origin})", spec.kind.name())))?;
    values.insert(key.to_string(), coerced);
    Ok(())
}

fn coerce(kind: Kind, v: Value) -> Option<Value> {
    let float = |v: &Value| match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    };
    match (kind, v) {
        (Kind::Int, Value::Integer(i)) if i >= 0 => Some(Value::Integer(i)),
        (Kind::Float, v) => float(&v).map(Value::Float),
        (Kind::Bool, Value::Boolean(b)) => Some(Value::Boolean(b)),
        (Kind::Str, Value::String(s)) => Some(Value::String(s)),
        (Kind::FloatList, Value::Array(a)) => a.iter().map(|x| float(x).map(Value::Float)).collect::<Option<_>>().map(Value::Array),
        (Kind::FloatList, Value::String(s)) => split_list(&s)
            .map(|x| x.parse().ok().map(Value::Float))
            .collect::<Option<_>>()
            .map(Value::Array),
        (Kind::FloatList, v @ (Value::Float(_) | Value::Integer(_))) => float(&v).map(|f| Value::Array(vec![Value::Float(f)])),
        (Kind::StrList, Value::Array(a)) => a
            .into_iter()
            .map(|x| matches!(x, Value::String(_)).then_some(x))
            .collect::<Option<_>>()
            .map(Value::Array),
        (Kind::StrList, Value::String(s)) => Some(Value::Array(split_list(&s).map(|x| Value::String(x.to_string())).collect())),
        _ => None,
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}
