//! Run configuration: a flat `key = value` file merged with flags, parsed
//! and validated before anything runs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qgrad::sampler::amplitude_cap_from_env;
use qgrad::EstimatorConfig;

use crate::args::{Command, RunArgs, KEYS};
use crate::error::{CliError, CliResult};

/// Seeds used when neither `seed` nor `seeds` is given.
pub const DEFAULT_SEED_COUNT: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: &'static str,
    pub function: Option<String>,
    pub method: Option<String>,
    pub epsilon: f64,
    pub rho: f64,
    pub bound: Option<f64>,
    pub sparsity: Option<usize>,
    pub nonzeros: Option<usize>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub estimator: EstimatorConfig,
    pub m_range: RangeInclusive<usize>,
    pub k_span: usize,
    pub n_range: RangeInclusive<usize>,
    pub x_values: Vec<f64>,
    pub fraction_samples: usize,
    pub dims: Vec<usize>,
    pub sparse_dims: Vec<usize>,
    pub epsilons: Vec<f64>,
}

/// Parse a config file: one `key = value` per line, `#` comments.
pub fn parse_config_file(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", no + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key {key:?}", no + 1)));
        }
    }
    Ok(map)
}

/// Config file entries with command-line flags layered on top.
pub fn merged_settings(args: &RunArgs) -> CliResult<BTreeMap<String, String>> {
    let mut map = match &args.config {
        Some(path) => parse_config_file(&read_config(path)?)?,
        None => BTreeMap::new(),
    };
    for (key, value) in args.given() {
        map.insert(key.to_string(), value.to_string());
    }
    Ok(map)
}

fn read_config(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

struct Settings(BTreeMap<String, String>);

impl Settings {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn get<T>(&self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("--{key} {v:?}: {e}"))))
            .transpose()
    }

    fn positive(&self, key: &str) -> CliResult<Option<f64>> {
        match self.get::<f64>(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(CliError::Usage(format!("--{key} must be positive, got {v}")))
            }
            other => Ok(other),
        }
    }

    fn list<T>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let items = v
            .split(',')
            .map(|s| s.trim().parse::<T>().map_err(|e| CliError::Usage(format!("--{key} {v:?}: {e}"))))
            .collect::<CliResult<Vec<T>>>()?;
        if items.is_empty() {
            return Err(CliError::Usage(format!("--{key} is empty")));
        }
        Ok(Some(items))
    }

    fn range(&self, key: &str, default: RangeInclusive<usize>) -> CliResult<RangeInclusive<usize>> {
        let Some(v) = self.raw(key) else { return Ok(default) };
        let (lo, hi) = v
            .split_once("..=")
            .or_else(|| v.split_once(".."))
            .ok_or_else(|| CliError::Usage(format!("--{key} {v:?}: expected lo..hi")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Usage(format!("--{key} {v:?}: {e}")))
        };
        let range = parse(lo)?..=parse(hi)?;
        if range.is_empty() || *range.start() == 0 {
            return Err(CliError::Usage(format!("--{key} {v:?} is empty or starts at 0")));
        }
        Ok(range)
    }

    fn flag(&self, key: &str) -> CliResult<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }
}

impl RunConfig {
    pub fn from_command(command: &Command) -> CliResult<Self> {
        Self::from_settings(command.name(), merged_settings(command.args())?)
    }

    pub fn from_settings(command: &'static str, settings: BTreeMap<String, String>) -> CliResult<Self> {
        let s = Settings(settings);

        let seeds = match (s.get::<u64>("seed")?, s.raw("seeds")) {
            (Some(_), Some(_)) => return Err(CliError::Usage("give --seed or --seeds, not both".into())),
            (Some(seed), None) => vec![seed],
            (None, Some(v)) if v.contains(',') => s.list::<u64>("seeds")?.unwrap_or_default(),
            (None, Some(_)) => {
                let count = s.get::<u64>("seeds")?.unwrap_or(0);
                if count == 0 {
                    return Err(CliError::Usage("--seeds must be at least 1".into()));
                }
                (0..count).collect()
            }
            (None, None) => (0..DEFAULT_SEED_COUNT).collect(),
        };

        let jobs = s.get::<usize>("jobs")?.unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }

        let mut estimator = EstimatorConfig {
            amplitude_cap: amplitude_cap_from_env(),
            ..EstimatorConfig::default()
        };
        let e = &mut estimator;
        if let Some(v) = s.positive("repetition-constant")? {
            e.repetition_constant = v;
        }
        if let Some(v) = s.positive("modulus-constant")? {
            e.modulus_constant = v;
        }
        if let Some(v) = s.positive("probe-constant")? {
            e.probe_constant = v;
        }
        if let Some(v) = s.positive("measurement-constant")? {
            e.measurement_constant = v;
        }
        if let Some(v) = s.positive("eta")? {
            e.eta = v;
        }
        if let Some(v) = s.get("log-base")? {
            e.log_base = v;
        }
        if let Some(v) = s.get("amplitude-cap")? {
            e.amplitude_cap = v;
        }
        if let Some(v) = s.get("path")? {
            e.sparse_path = v;
        }
        e.n_samples = s.get("samples")?;
        e.delta = s.positive("delta")?;
        e.kappa = s.positive("kappa")?;
        e.radius = s.positive("radius")?;
        e.half_width = s.get("half-width")?;
        e.scale = s.positive("scale")?;
        e.scaled_probes = s.flag("scaled-probes")?;
        e.modulus = s.get("modulus")?;
        e.probes = s.get("probes")?;
        e.measurements = s.get("measurements")?;
        e.shrink_probes = s.flag("shrink-probes")?;

        let method = s.raw("method").map(str::to_string);
        if let Some(m) = &method {
            if !matches!(m.as_str(), "spectral" | "findiff" | "finite-difference") {
                return Err(CliError::Usage(format!("--method must be spectral or findiff, got {m:?}")));
            }
        }

        let config = RunConfig {
            command,
            function: s.raw("function").map(str::to_string),
            method,
            epsilon: s.positive("epsilon")?.unwrap_or(0.1),
            rho: s.positive("rho")?.unwrap_or(0.1),
            bound: s.positive("bound")?,
            sparsity: s.get("sparsity")?,
            nonzeros: s.get("nonzeros")?,
            seeds,
            out: s.raw("out").map(PathBuf::from),
            jobs,
            estimator,
            m_range: s.range("m-range", 1..=8)?,
            k_span: s.get("k-span")?.unwrap_or(6),
            n_range: s.range("n-range", 4..=24)?,
            x_values: s.list("x-values")?.unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.3]),
            fraction_samples: s.get("fraction-samples")?.unwrap_or(100_000),
            dims: s.list("dims")?.unwrap_or_else(|| vec![2, 3]),
            sparse_dims: s.list("sparse-dims")?.unwrap_or_else(|| vec![4, 8, 16]),
            epsilons: s.list("epsilons")?.unwrap_or_else(|| vec![0.2, 0.1, 0.05]),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        if self.rho >= 1.0 {
            return Err(CliError::Usage(format!("--rho must be below 1, got {}", self.rho)));
        }
        let needs_function = matches!(self.command, "gradient" | "hessian" | "sparse-hessian");
        if needs_function && self.function.is_none() {
            return Err(CliError::Usage(format!("{} needs --function", self.command)));
        }
        if self.command == "sparse-hessian" && self.sparsity.is_none() && self.nonzeros.is_none() {
            return Err(CliError::Usage("sparse-hessian needs --sparsity or --nonzeros".into()));
        }
        if self.sparsity.is_some() && self.nonzeros.is_some() {
            return Err(CliError::Usage("give --sparsity or --nonzeros, not both".into()));
        }
        if self.sparsity == Some(0) || self.nonzeros == Some(0) {
            return Err(CliError::Usage("sparsity must be at least 1".into()));
        }
        if self.dims.iter().chain(&self.sparse_dims).any(|&d| d < 2) {
            return Err(CliError::Usage("ledger dimensions must be at least 2".into()));
        }
        if self.x_values.iter().any(|x| !x.is_finite()) || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(CliError::Usage("sweep values must be finite, accuracies positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn settings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn config_file_syntax() {
        let map = parse_config_file("# run\nfunction = poly_d2\n\nepsilon=0.05 # tight\n").unwrap();
        assert_eq!(map["function"], "poly_d2");
        assert_eq!(map["epsilon"], "0.05");
        assert!(parse_config_file("colour = red").is_err());
        assert!(parse_config_file("epsilon").is_err());
        assert!(parse_config_file("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn seed_forms() {
        let c = RunConfig::from_settings("verify-bounds", settings(&[("seeds", "3")])).unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2]);
        let c = RunConfig::from_settings("verify-bounds", settings(&[("seeds", "7, 2")])).unwrap();
        assert_eq!(c.seeds, vec![7, 2]);
        let c = RunConfig::from_settings("verify-bounds", settings(&[("seed", "9")])).unwrap();
        assert_eq!(c.seeds, vec![9]);
        assert!(RunConfig::from_settings("verify-bounds", settings(&[("seed", "1"), ("seeds", "2")])).is_err());
        assert!(RunConfig::from_settings("verify-bounds", settings(&[("seeds", "0")])).is_err());
    }

    #[test]
    fn overrides_reach_the_estimator_config() {
        let c = RunConfig::from_settings(
            "gradient",
            settings(&[
                ("function", "poly_d2"),
                ("samples", "12"),
                ("modulus", "11"),
                ("repetition-constant", "4"),
                ("log-base", "2"),
                ("scaled-probes", "true"),
            ]),
        )
        .unwrap();
        assert_eq!(c.estimator.n_samples, Some(12));
        assert_eq!(c.estimator.modulus, Some(11));
        assert_eq!(c.estimator.repetition_constant, 4.0);
        assert_eq!(c.estimator.log_base, qgrad::LogBase::Two);
        assert!(c.estimator.scaled_probes);
    }

    #[test]
    fn invalid_settings_are_usage_errors() {
        for pairs in [
            &[("epsilon", "-1")][..],
            &[("rho", "1.5")],
            &[("m-range", "5..2")],
            &[("n-range", "0..4")],
            &[("method", "magic")],
            &[("jobs", "0")],
            &[("dims", "1,2")],
        ] {
            let r = RunConfig::from_settings("verify-bounds", settings(pairs));
            assert!(matches!(r, Err(CliError::Usage(_))), "{pairs:?}");
        }
        assert!(RunConfig::from_settings("gradient", settings(&[])).is_err());
        assert!(RunConfig::from_settings("sparse-hessian", settings(&[("function", "quad_sparse_d8")])).is_err());
    }

    proptest! {
        /// Rendering any key subset as a file and parsing it back is lossless.
        #[test]
        fn config_files_round_trip(picks in proptest::collection::btree_map(0..KEYS.len(), "[a-z0-9.,:_-]{1,12}", 0..12)) {
            let map: BTreeMap<String, String> = picks.into_iter().map(|(i, v)| (KEYS[i].to_string(), v)).collect();
            let text: String = map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
            prop_assert_eq!(parse_config_file(&text).unwrap(), map);
        }
    }
}
