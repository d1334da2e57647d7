//! Experiment ids, parameter schema and the key=value config format.
//!
//! Precedence, lowest to highest: experiment defaults, `--config` file,
//! command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const SPEC_VERSION: &str = "1";

/// Keys written into the metadata header that are informational only.
const INFO_KEYS: [&str; 5] = [
    "experiment",
    "spec_version",
    "gaussian",
    "non_coprime",
    "note",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` is not a parameter of {experiment}")]
    NotApplicable {
        key: String,
        experiment: &'static str,
    },
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("config file {path}: line {line}: {msg}")]
    Syntax {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file is for experiment `{found}`, not `{expected}`")]
    WrongExperiment {
        found: String,
        expected: &'static str,
    },
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    OffsetSweep,
    NoiseBias,
    NoiseVar,
    CustomSweep,
}

pub const ALL_KEYS: [&str; 12] = [
    "bits",
    "delta",
    "amp-min",
    "amp-max",
    "amp-steps",
    "lambda",
    "n",
    "records",
    "seed",
    "sigma",
    "offset",
    "out",
];

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::Fig1,
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Fig4,
        Experiment::Fig5,
        Experiment::Fig6,
        Experiment::Fig7,
        Experiment::Fig8,
        Experiment::OffsetSweep,
        Experiment::NoiseBias,
        Experiment::NoiseVar,
        Experiment::CustomSweep,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Fig6 => "fig6",
            Experiment::Fig7 => "fig7",
            Experiment::Fig8 => "fig8",
            Experiment::OffsetSweep => "offset-sweep",
            Experiment::NoiseBias => "noise-bias",
            Experiment::NoiseVar => "noise-var",
            Experiment::CustomSweep => "custom-sweep",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.id() == id)
    }

    /// Keys the experiment accepts; `out` is always accepted.
    pub fn keys(self) -> &'static [&'static str] {
        use Experiment::*;
        match self {
            Fig1 => &[
                "bits",
                "delta",
                "amp-min",
                "amp-max",
                "amp-steps",
                "n",
                "records",
                "seed",
            ],
            Fig2 => &[
                "bits",
                "delta",
                "amp-min",
                "amp-max",
                "amp-steps",
                "lambda",
                "n",
                "records",
                "seed",
            ],
            Fig3 => &["bits", "amp-min", "amp-max", "amp-steps", "lambda", "n"],
            Fig4 | Fig6 => &["bits", "amp-steps", "lambda", "n", "records", "seed"],
            Fig5 | Fig7 => &["bits", "delta", "amp-min", "lambda", "n", "records", "seed"],
            Fig8 => &[
                "bits",
                "delta",
                "amp-min",
                "amp-max",
                "amp-steps",
                "lambda",
                "n",
                "records",
                "seed",
            ],
            OffsetSweep => &["bits", "amp-steps", "lambda", "n", "offset"],
            NoiseBias | NoiseVar => &[
                "bits",
                "amp-steps",
                "lambda",
                "n",
                "records",
                "seed",
                "sigma",
            ],
            CustomSweep => &[
                "bits",
                "delta",
                "amp-min",
                "amp-max",
                "amp-steps",
                "lambda",
                "n",
                "records",
                "seed",
                "sigma",
                "offset",
            ],
        }
    }

    fn defaults(self) -> Params {
        use Experiment::*;
        let mut p = Params {
            bits: vec![10],
            delta: None,
            amp_min: None,
            amp_max: None,
            amp_steps: 50,
            lambda: vec![201],
            n: vec![2000],
            records: None,
            seed: 1,
            sigma: vec![0.0],
            offset: vec![0.0],
            out: None,
        };
        match self {
            Fig1 => {
                p.bits = vec![3];
                p.n = vec![200];
                p.records = Some(15_000);
            }
            Fig2 => {
                p.bits = vec![13];
                p.lambda = vec![201, 200];
                p.amp_steps = 20;
                p.records = Some(5000);
            }
            Fig3 => {
                p.bits = vec![4, 6, 8, 12];
                p.amp_steps = 40;
            }
            Fig4 => {
                p.bits = (2..=12).collect();
                p.amp_steps = 400;
                p.records = Some(2000);
            }
            Fig5 | Fig7 => {
                p.n = (3..=300).collect();
                p.lambda = vec![1];
            }
            Fig6 => {
                p.bits = (4..=12).collect();
                p.lambda = vec![539];
                p.amp_steps = 20;
                p.records = Some(5000);
            }
            Fig8 => {
                p.n = vec![500];
                p.lambda = vec![137];
                p.amp_steps = 100;
                p.records = Some(5000);
            }
            OffsetSweep => {
                p.bits = vec![4, 6];
                p.amp_steps = 100;
                p.offset = (0..=10).map(|j| j as f64 / 10.0 - 0.5).collect();
            }
            NoiseBias | NoiseVar => {
                p.bits = (4..=10).collect();
                p.amp_steps = 20;
                p.sigma = vec![0.0, 0.2, 0.4, 0.6];
                p.records = Some(if self == NoiseBias { 2000 } else { 5000 });
            }
            CustomSweep => {
                p.bits = vec![8];
                p.n = vec![64];
                p.lambda = vec![7];
                p.amp_steps = 20;
                p.records = Some(2000);
            }
        }
        p
    }
}

/// Resolved parameters. `sigma` and `offset` are in units of the step.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub bits: Vec<u32>,
    pub delta: Option<f64>,
    pub amp_min: Option<f64>,
    pub amp_max: Option<f64>,
    pub amp_steps: usize,
    pub lambda: Vec<u64>,
    pub n: Vec<usize>,
    /// `None` selects `max(5000, 1e6 / N)` per record length.
    pub records: Option<usize>,
    pub seed: u64,
    pub sigma: Vec<f64>,
    pub offset: Vec<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: Params,
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_one<T: std::str::FromStr>(key: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| bad(key, format!("`{s}`: {e}")))
}

/// Comma-separated list; integer items may be inclusive ranges `a..b`.
fn parse_int_list<T>(key: &str, s: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr + Copy + TryFrom<u64>,
    T::Err: std::fmt::Display,
{
    let mut out = Vec::new();
    for item in s.split(',') {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (u64, u64) = (parse_one(key, a)?, parse_one(key, b)?);
            if a > b {
                return Err(bad(key, format!("empty range `{item}`")));
            }
            for v in a..=b {
                out.push(T::try_from(v).map_err(|_| bad(key, format!("{v} out of range")))?);
            }
        } else {
            out.push(parse_one(key, item)?);
        }
    }
    if out.is_empty() {
        return Err(bad(key, "empty list"));
    }
    Ok(out)
}

fn parse_float_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_finite(key, x)).collect()
}

fn parse_finite(key: &str, s: &str) -> Result<f64> {
    let v: f64 = parse_one(key, s)?;
    if !v.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(v)
}

fn parse_optional(key: &str, s: &str) -> Result<Option<f64>> {
    if s.trim() == "auto" {
        Ok(None)
    } else {
        parse_finite(key, s).map(Some)
    }
}

impl Params {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "bits" => self.bits = parse_int_list(key, value)?,
            "delta" => self.delta = parse_optional(key, value)?,
            "amp-min" => self.amp_min = parse_optional(key, value)?,
            "amp-max" => self.amp_max = parse_optional(key, value)?,
            "amp-steps" => self.amp_steps = parse_one(key, value)?,
            "lambda" => self.lambda = parse_int_list(key, value)?,
            "n" => self.n = parse_int_list(key, value)?,
            "records" => {
                self.records = if value.trim() == "auto" {
                    None
                } else {
                    Some(parse_one(key, value)?)
                };
            }
            "seed" => self.seed = parse_one(key, value)?,
            "sigma" => self.sigma = parse_float_list(key, value)?,
            "offset" => self.offset = parse_float_list(key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Records for a given record length.
    pub fn records_for(&self, n: usize) -> usize {
        self.records
            .unwrap_or_else(|| quantsine_core::mc::default_replicates(n))
    }
}

/// Key/value pairs from a config file (or a CSV written by this tool).
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    // a CSV output carries its parameters on `#@` lines; the data rows are skipped
    let is_csv = text.lines().any(|l| l.starts_with("#@"));
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.strip_prefix("#@") {
            Some(rest) => rest.trim(),
            None if raw.trim_start().starts_with('#') || raw.trim().is_empty() || is_csv => {
                continue
            }
            None => raw.trim(),
        };
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                path: path.into(),
                line: i + 1,
                msg: "expected key=value".into(),
            });
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Defaults, then `file` entries, then `flags`.
    pub fn resolve(
        experiment: Experiment,
        file: &[(String, String)],
        flags: &[(String, String)],
    ) -> Result<Self> {
        let mut params = experiment.defaults();
        for (k, v) in file {
            if INFO_KEYS.contains(&k.as_str()) {
                if k == "experiment" && v != experiment.id() {
                    return Err(ConfigError::WrongExperiment {
                        found: v.clone(),
                        expected: experiment.id(),
                    });
                }
                continue;
            }
            Self::apply(experiment, &mut params, k, v)?;
        }
        for (k, v) in flags {
            Self::apply(experiment, &mut params, k, v)?;
        }
        let cfg = Self { experiment, params };
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(experiment: Experiment, params: &mut Params, key: &str, value: &str) -> Result<()> {
        if !ALL_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if key != "out" && !experiment.keys().contains(&key) {
            return Err(ConfigError::NotApplicable {
                key: key.to_string(),
                experiment: experiment.id(),
            });
        }
        params.set(key, value)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        let e = self.experiment;
        let single = |key: &str, len: usize| {
            if len == 1 {
                Ok(())
            } else {
                Err(bad(key, format!("{} takes a single value", e.id())))
            }
        };
        use Experiment::*;
        if p.bits.iter().any(|&b| !(1..=30).contains(&b)) {
            return Err(bad("bits", "must lie in 1..=30"));
        }
        if let Some(d) = p.delta {
            if !(d > 0.0 && d < 2.0) {
                return Err(bad("delta", "must lie in (0, 2)"));
            }
        }
        if p.amp_steps == 0 {
            return Err(bad("amp-steps", "must be >= 1"));
        }
        if p.n.iter().any(|&n| n < 3) {
            return Err(bad("n", "record length must be >= 3"));
        }
        if p.lambda.contains(&0) {
            return Err(bad("lambda", "must be >= 1"));
        }
        if p.records.is_some_and(|r| r < 2) {
            return Err(bad("records", "must be >= 2"));
        }
        if p.sigma.iter().any(|&s| s < 0.0) {
            return Err(bad("sigma", "must be >= 0"));
        }
        if p.offset.iter().any(|&d| d.abs() > 0.5) {
            return Err(bad("offset", "must lie in [-1/2, 1/2] (units of the step)"));
        }
        if let (Some(lo), Some(hi)) = (p.amp_min, p.amp_max) {
            if !(0.0 <= lo && lo <= hi) {
                return Err(bad("amp-min", "need 0 <= amp-min <= amp-max"));
            }
        }
        if p.amp_min.is_some_and(|a| a < 0.0) || p.amp_max.is_some_and(|a| a <= 0.0) {
            return Err(bad("amp-min", "amplitudes must be >= 0"));
        }
        match e {
            Fig2 => {
                if p.lambda.len() != 2 {
                    return Err(bad("lambda", "fig2 compares exactly two values"));
                }
            }
            _ => single("lambda", p.lambda.len())?,
        }
        if !matches!(e, Fig5 | Fig7) {
            single("n", p.n.len())?;
        }
        if matches!(e, Fig1 | Fig2 | Fig5 | Fig7 | Fig8 | CustomSweep) {
            single("bits", p.bits.len())?;
        }
        if !matches!(e, NoiseBias | NoiseVar) {
            single("sigma", p.sigma.len())?;
        }
        if e != OffsetSweep {
            single("offset", p.offset.len())?;
        }
        if matches!(e, Fig5 | Fig7) {
            let l = p.lambda[0];
            if let Some(&n) =
                p.n.iter()
                    .find(|&&n| quantsine_core::signal::gcd(l, n as u64) != 1)
            {
                return Err(bad(
                    "lambda",
                    format!(
                        "{} needs lambda coprime to every n; gcd({l}, {n}) != 1",
                        e.id()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Quantizer steps, one per entry of `bits` (or the single `delta`).
    pub fn steps(&self) -> Vec<(Option<u32>, f64)> {
        match self.params.delta {
            Some(d) => vec![(None, d)],
            None => self
                .params
                .bits
                .iter()
                .map(|&b| (Some(b), 2f64.powi(1 - b as i32)))
                .collect(),
        }
    }

    /// Metadata lines (without the `#@ ` prefix) that reproduce this run.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let join = |v: Vec<String>| v.join(",");
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |x| format!("{x:?}"));
        let mut m = vec![
            ("experiment".to_string(), self.experiment.id().to_string()),
            ("spec_version".to_string(), SPEC_VERSION.to_string()),
        ];
        for &key in self.experiment.keys() {
            let v = match key {
                "bits" => join(p.bits.iter().map(u32::to_string).collect()),
                "delta" => opt(p.delta),
                "amp-min" => opt(p.amp_min),
                "amp-max" => opt(p.amp_max),
                "amp-steps" => p.amp_steps.to_string(),
                "lambda" => join(p.lambda.iter().map(u64::to_string).collect()),
                "n" => compact_ints(&p.n),
                "records" => p.records.map_or("auto".to_string(), |r| r.to_string()),
                "seed" => p.seed.to_string(),
                "sigma" => join(p.sigma.iter().map(|x| format!("{x:?}")).collect()),
                "offset" => join(p.offset.iter().map(|x| format!("{x:?}")).collect()),
                _ => unreachable!("schema key {key}"),
            };
            m.push((key.to_string(), v));
        }
        m
    }
}

/// `3,4,5,9` -> `3..5,9`.
fn compact_ints(v: &[usize]) -> String {
    let mut s = String::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
            j += 1;
        }
        if !s.is_empty() {
            s.push(',');
        }
        if j > i + 1 {
            let _ = write!(s, "{}..{}", v[i], v[j]);
        } else {
            let _ = write!(s, "{}", v[i]);
            if j == i + 1 {
                let _ = write!(s, ",{}", v[j]);
            }
        }
        i = j + 1;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn flags_override_file() {
        let cfg = ExperimentConfig::resolve(
            Experiment::Fig3,
            &kv(&[("bits", "4,6")]),
            &kv(&[("bits", "8")]),
        )
        .unwrap();
        assert_eq!(cfg.params.bits, vec![8]);
    }

    #[test]
    fn ranges_and_compaction_round_trip() {
        let v: Vec<usize> = parse_int_list("n", "3..6,9,11,12").unwrap();
        assert_eq!(v, vec![3, 4, 5, 6, 9, 11, 12]);
        assert_eq!(compact_ints(&v), "3..6,9,11,12");
    }

    #[test]
    fn unknown_and_inapplicable_keys_are_rejected() {
        let e = ExperimentConfig::resolve(Experiment::Fig1, &kv(&[("colour", "red")]), &[])
            .unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey(_)));
        let e =
            ExperimentConfig::resolve(Experiment::Fig1, &[], &kv(&[("sigma", "0.2")])).unwrap_err();
        assert!(matches!(e, ConfigError::NotApplicable { .. }));
        let e = ExperimentConfig::resolve(Experiment::Fig1, &[], &kv(&[("n", "ten")])).unwrap_err();
        assert!(matches!(e, ConfigError::BadValue { .. }));
    }

    #[test]
    fn coprimality_is_checked_for_n_sweeps() {
        let e =
            ExperimentConfig::resolve(Experiment::Fig5, &[], &kv(&[("lambda", "3")])).unwrap_err();
        assert!(e.to_string().contains("coprime"));
    }

    #[test]
    fn metadata_reproduces_params() {
        let cfg = ExperimentConfig::resolve(
            Experiment::CustomSweep,
            &[],
            &kv(&[("delta", "0.03"), ("sigma", "0.1")]),
        )
        .unwrap();
        let again =
            ExperimentConfig::resolve(Experiment::CustomSweep, &cfg.metadata(), &[]).unwrap();
        assert_eq!(cfg.params, again.params);
    }
}
