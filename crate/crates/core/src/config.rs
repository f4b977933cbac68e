//! Plain-text `key=value` configuration shared by the command-line tool and
//! the C bindings. Lines may hold one pair each; `#` starts a comment and
//! blank lines are skipped. Unknown keys are rejected so typos fail loudly
//! instead of silently falling back to defaults.

use crate::encoder::{Activation, Arch, EncoderConfig};
use crate::trainer::{OptimizerKind, TrainConfig};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    /// key -> (value, source line; 0 for programmatic overrides).
    entries: BTreeMap<String, (String, usize)>,
    source: String,
}

impl KvConfig {
    pub fn parse(text: &str, source: &str) -> Result<KvConfig> {
        let mut config = KvConfig {
            entries: BTreeMap::new(),
            source: source.to_string(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    msg: format!("expected key=value, got `{content}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    msg: "empty key".into(),
                });
            }
            if let Some((_, first)) = config.entries.get(key) {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    msg: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            config
                .entries
                .insert(key.to_string(), (value.to_string(), line));
        }
        Ok(config)
    }

    pub fn load(path: &str) -> Result<KvConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        KvConfig::parse(&text, path)
    }

    /// Inserts or replaces a key programmatically (command-line overrides).
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries
            .insert(key.trim().to_string(), (value.trim().to_string(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy holding only the listed keys.
    pub fn retain_keys(&self, keys: &[&str]) -> KvConfig {
        KvConfig {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keys.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            source: self.source.clone(),
        }
    }

    /// All pairs as `key=value` lines in sorted key order.
    pub fn echo_lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|(k, (v, _))| format!("{k}={v}"))
            .collect()
    }

    fn bad_value(&self, key: &str, msg: String) -> Error {
        let line = self.entries.get(key).map_or(0, |(_, l)| *l);
        Error::Parse {
            path: self.source.clone(),
            line,
            msg: format!("key `{key}`: {msg}"),
        }
    }

    /// Fails if any key is not in `allowed`.
    pub fn require_known(&self, allowed: &[&str]) -> Result<()> {
        for (key, (_, line)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Parse {
                    path: self.source.clone(),
                    line: *line,
                    msg: format!("unknown key `{key}`"),
                });
            }
        }
        Ok(())
    }

    fn parse_with<T, F>(&self, key: &str, what: &str, f: F) -> Result<Option<T>>
    where
        F: FnOnce(&str) -> Option<T>,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => f(raw)
                .map(Some)
                .ok_or_else(|| self.bad_value(key, format!("expected {what}, got `{raw}`"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, "a number", |raw| raw.parse::<f64>().ok())
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, "a non-negative integer", |raw| {
            raw.parse::<usize>().ok()
        })
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, "a non-negative integer", |raw| raw.parse::<u64>().ok())
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.parse_with(key, "true/false/1/0", |raw| match raw {
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            _ => None,
        })
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(key, "comma-separated numbers", |raw| {
            raw.split(',')
                .map(|part| part.trim().parse::<f64>().ok())
                .collect::<Option<Vec<f64>>>()
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.u64(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        Ok(self.bool(key)?.unwrap_or(default))
    }
}

pub const TRAIN_KEYS: &[&str] = &[
    "preset",
    "epochs",
    "lr",
    "alpha",
    "beta",
    "rate",
    "delta",
    "neg_pairs",
    "optimizer",
    "seed",
    "arch",
    "hidden",
    "k",
    "norm",
    "activation",
    "dim_out",
    "row_normalize",
];

/// Builds a training configuration from key=value pairs. A `preset` key
/// selects a named baseline first; every other key then overrides one field.
pub fn train_config_from_kv(kv: &KvConfig) -> Result<TrainConfig> {
    kv.require_known(TRAIN_KEYS)?;
    let mut config = match kv.get("preset") {
        Some(name) => crate::trainer::preset(name)?,
        None => TrainConfig::default(),
    };
    if let Some(raw) = kv.get("arch") {
        config.encoder.arch = match raw {
            "sgc" => Arch::Sgc,
            "gcn2" => {
                let hidden = match config.encoder.arch {
                    Arch::Gcn2 { hidden } => hidden,
                    Arch::Sgc => EncoderConfig::default().dim_out,
                };
                Arch::Gcn2 { hidden }
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "arch must be sgc or gcn2, got `{other}`"
                )))
            }
        };
    }
    if let Some(hidden) = kv.usize("hidden")? {
        match &mut config.encoder.arch {
            Arch::Gcn2 { hidden: h } => *h = hidden,
            Arch::Sgc => {
                return Err(Error::InvalidParameter(
                    "hidden only applies to arch=gcn2".into(),
                ))
            }
        }
    }
    if let Some(k) = kv.usize("k")? {
        config.encoder.k = k;
    }
    if let Some(raw) = kv.get("norm") {
        config.encoder.norm_kind = raw.parse()?;
    }
    if let Some(raw) = kv.get("activation") {
        config.encoder.activation = Activation::from_str(raw)?;
    }
    if let Some(dim_out) = kv.usize("dim_out")? {
        config.encoder.dim_out = dim_out;
    }
    if let Some(flag) = kv.bool("row_normalize")? {
        config.encoder.row_normalize_output = flag;
    }
    if let Some(epochs) = kv.usize("epochs")? {
        config.epochs = epochs;
    }
    config.lr = kv.f64_or("lr", config.lr)?;
    config.alpha = kv.f64_or("alpha", config.alpha)?;
    config.beta = kv.f64_or("beta", config.beta)?;
    config.rate = kv.f64_or("rate", config.rate)?;
    config.delta = kv.usize_or("delta", config.delta)?;
    if let Some(neg_pairs) = kv.usize("neg_pairs")? {
        config.neg_pairs = Some(neg_pairs);
    }
    if let Some(raw) = kv.get("optimizer") {
        config.optimizer = OptimizerKind::from_str(raw)?;
    }
    config.seed = kv.u64_or("seed", config.seed)?;
    Ok(config)
}

pub const CSBM_KEYS: &[&str] = &[
    "n",
    "p1",
    "p2",
    "q",
    "mu1",
    "mu2",
    "sigma",
    "seed",
    "enforce_ordering",
];

/// Builds synthetic-graph parameters from key=value pairs. `n`, `p1`, `p2`,
/// and `q` are required; features default to opposite means along one axis.
pub fn csbm_params_from_kv(kv: &KvConfig) -> Result<crate::csbm::CsbmParams> {
    kv.require_known(CSBM_KEYS)?;
    let require = |key: &str| {
        kv.get(key)
            .map(str::to_owned)
            .ok_or_else(|| Error::InvalidParameter(format!("missing required key `{key}`")))
    };
    require("n")?;
    require("p1")?;
    require("p2")?;
    require("q")?;
    let mu1 = kv.f64_list("mu1")?.unwrap_or_else(|| vec![1.0, 0.0]);
    let mu2 = kv.f64_list("mu2")?.unwrap_or_else(|| vec![-1.0, 0.0]);
    let params = crate::csbm::CsbmParams {
        n: kv.usize("n")?.unwrap(),
        p1: kv.f64("p1")?.unwrap(),
        p2: kv.f64("p2")?.unwrap(),
        q: kv.f64("q")?.unwrap(),
        mu1,
        mu2,
        sigma: kv.f64_or("sigma", 1.0)?,
        seed: kv.u64_or("seed", 0)?,
        enforce_ordering: kv.bool_or("enforce_ordering", true)?,
    };
    params.validate()?;
    Ok(params)
}
