//! Experiment configuration, read from a flat `key = value` file or a JSON object.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extremes::Centering;
use crate::norm::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rng::Distribution;
use crate::structured::{Family, MatrixSpec};

use super::Statistic;

pub const DEFAULT_PROBES: [f64; 3] = [0.05, 0.5, 0.95];
pub const DEFAULT_REFERENCE_P_BASE: usize = 1000;

const KNOWN_KEYS: &[&str] = &[
    "family",
    "symmetric",
    "p",
    "n",
    "dist",
    "replicates",
    "base_seed",
    "seed",
    "statistics",
    "quantile_probes",
    "tol",
    "max_iter",
    "centering",
    "threads",
    "ratios",
    "reference_p_base",
    "raw_samples",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub symmetric: bool,
    pub p: usize,
    /// Ignored by ratio sweeps, which set `n = ⌊p / ratio⌋`.
    pub n: usize,
    pub dist: Distribution,
    pub replicates: usize,
    pub base_seed: u64,
    pub statistics: Vec<Statistic>,
    pub quantile_probes: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub centering: Centering,
    /// Worker threads; `None` uses the available parallelism.
    #[serde(skip)]
    pub threads: Option<usize>,
    /// When nonempty, the experiment is a sweep over `p/n`.
    pub ratios: Vec<f64>,
    pub reference_p_base: usize,
    #[serde(skip)]
    pub raw_samples: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(family: Family, p: usize, n: usize, replicates: usize) -> Self {
        Self {
            family,
            symmetric: false,
            p,
            n,
            dist: Distribution::Gaussian,
            replicates,
            base_seed: 0,
            statistics: vec![Statistic::ScaledNorm],
            quantile_probes: DEFAULT_PROBES.to_vec(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            centering: Centering::HalfN,
            threads: None,
            ratios: Vec::new(),
            reference_p_base: DEFAULT_REFERENCE_P_BASE,
            raw_samples: None,
        }
    }

    pub fn spec(&self) -> MatrixSpec {
        MatrixSpec {
            family: self.family,
            symmetric: self.symmetric,
            p: self.p,
            n: self.n,
            dist: self.dist,
            seed: self.base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::Config("no statistics requested".into()));
        }
        if let Some(q) = self.quantile_probes.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(Error::Config(format!("quantile probe {q} outside (0, 1)")));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Config(format!("ratio {r} outside (0, 1]")));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::Config("need tol > 0 and max_iter ≥ 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.ratios.is_empty() {
            self.spec().validate()?;
            if self.n < 2 {
                return Err(Error::Config("n must be at least 2".into()));
            }
        } else if self.p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Accepts either a JSON object or `key = value` lines (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        let entries = if text.trim_start().starts_with('{') {
            json_entries(text)?
        } else {
            key_value_entries(text)?
        };
        Self::from_entries(entries)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        if let Some(bad) = entries.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{bad}`")));
        }
        let get = |k: &str| entries.get(k).map(String::as_str);
        let p: usize = parse_req(get("p"), "p")?;
        let ratios: Vec<f64> = match get("ratios") {
            Some(s) => parse_list(s, "ratios")?,
            None => Vec::new(),
        };
        let n: usize = match get("n") {
            Some(s) => parse_one(s, "n")?,
            None if !ratios.is_empty() => p,
            None => return Err(Error::Config("missing key `n`".into())),
        };
        let family = match get("family") {
            Some(s) => parse_one(s, "family")?,
            None => Family::Circulant,
        };
        let mut cfg = Self::new(family, p, n, parse_opt(get("replicates"), "replicates")?.unwrap_or(1000));
        cfg.ratios = ratios;
        if let Some(v) = get("symmetric") {
            cfg.symmetric = parse_bool(v)?;
        }
        if let Some(v) = get("dist") {
            cfg.dist = parse_one(v, "dist")?;
        }
        if get("base_seed").is_some() && get("seed").is_some() {
            return Err(Error::Config("give only one of `base_seed` and `seed`".into()));
        }
        if let Some(v) = get("base_seed").or(get("seed")) {
            cfg.base_seed = parse_one(v, "base_seed")?;
        }
        if let Some(v) = get("statistics") {
            cfg.statistics = parse_list(v, "statistics")?;
        }
        if let Some(v) = get("quantile_probes") {
            cfg.quantile_probes = parse_list(v, "quantile_probes")?;
        }
        if let Some(v) = parse_opt(get("tol"), "tol")? {
            cfg.tol = v;
        }
        if let Some(v) = parse_opt(get("max_iter"), "max_iter")? {
            cfg.max_iter = v;
        }
        if let Some(v) = get("centering") {
            cfg.centering = parse_one(v, "centering")?;
        }
        cfg.threads = parse_opt(get("threads"), "threads")?;
        if let Some(v) = parse_opt(get("reference_p_base"), "reference_p_base")? {
            cfg.reference_p_base = v;
        }
        cfg.raw_samples = get("raw_samples").map(PathBuf::from);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn key_value_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().to_string();
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

fn json_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config("JSON config must be an object".into()))?;
    obj.iter()
        .map(|(k, v)| Ok((k.clone(), json_scalar(k, v)?)))
        .collect()
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String> {
    use serde_json::Value;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => Ok(items
            .iter()
            .map(|x| json_scalar(key, x))
            .collect::<Result<Vec<_>>>()?
            .join(",")),
        _ => Err(Error::Config(format!("unsupported value for `{key}`"))),
    }
}

fn parse_one<T: FromStr>(s: &str, key: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{s}` for `{key}`")))
}

fn parse_req<T: FromStr>(s: Option<&str>, key: &str) -> Result<T> {
    parse_one(s.ok_or_else(|| Error::Config(format!("missing key `{key}`")))?, key)
}

fn parse_opt<T: FromStr>(s: Option<&str>, key: &str) -> Result<Option<T>> {
    s.map(|v| parse_one(v, key)).transpose()
}

fn parse_list<T: FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| parse_one(x, key))
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("bad boolean `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_json_agree() {
        let flat = "family = toeplitz\np = 16\nn = 32  # comment\nreplicates = 10\nseed = 9\n\
                    statistics = scaled_norm, centered_norm_sq\nquantile_probes = 0.1,0.9\n";
        let json = r#"{"family":"toeplitz","p":16,"n":32,"replicates":10,"seed":9,
                      "statistics":["scaled_norm","centered_norm_sq"],"quantile_probes":[0.1,0.9]}"#;
        let a = ExperimentConfig::parse(flat).unwrap();
        let b = ExperimentConfig::parse(json).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.base_seed, 9);
        assert_eq!(a.statistics, vec![Statistic::ScaledNorm, Statistic::CenteredNormSq]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::parse("p = 4\nn = 8\nbogus = 1").is_err());
        assert!(ExperimentConfig::parse("p = 4").is_err());
        assert!(ExperimentConfig::parse("p = 9\nn = 8").is_err());
        assert!(ExperimentConfig::parse("p = 4\nn = 8\nquantile_probes = 0, 0.5").is_err());
        assert!(ExperimentConfig::parse("p = 4\nn = 8\nreplicates = 0").is_err());
        assert!(ExperimentConfig::parse("p = 4\nn 8").is_err());
        assert!(ExperimentConfig::parse("{\"p\": 4, \"n\": {}}").is_err());
    }

    #[test]
    fn sweep_needs_no_n() {
        let cfg = ExperimentConfig::parse("p = 20\nratios = 1.0, 0.5").unwrap();
        assert_eq!(cfg.ratios, vec![1.0, 0.5]);
    }
}
