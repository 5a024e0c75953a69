//! Experiment configuration.
//!
//! The config file is flat `key = value` text. Blank lines and lines
//! starting with `#` are ignored; list values are comma separated. Unknown
//! keys and repeated keys are errors. Values resolve as
//! flag > config file > built-in default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qrobust_core::attacks::AttackSpec;
use qrobust_core::{AnsatzKind, AttackKind};

use crate::error::{HarnessError, Result};

pub const KEYS: [&str; 13] = [
    "seed",
    "ansatz",
    "epochs",
    "batch_size",
    "learning_rate",
    "attack",
    "eps_grid",
    "train_count",
    "test_count",
    "stratified",
    "metric_samples",
    "metric_bins",
    "out",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub ansatz_kinds: Vec<AnsatzKind>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub attacks: Vec<AttackKind>,
    pub eps_grid: Vec<f64>,
    pub train_count: usize,
    pub test_count: usize,
    pub stratified: bool,
    pub metric_samples: usize,
    pub metric_bins: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            ansatz_kinds: AnsatzKind::ALL.to_vec(),
            epochs: 30,
            batch_size: 4,
            learning_rate: 0.001,
            attacks: AttackKind::ALL.to_vec(),
            eps_grid: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
            train_count: 500,
            test_count: 200,
            stratified: true,
            metric_samples: qrobust_core::metrics::DEFAULT_SAMPLES,
            metric_bins: qrobust_core::metrics::DEFAULT_BINS,
            out_dir: PathBuf::from("results"),
        }
    }
}

/// A partial configuration: whatever one source (file or flags) sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub ansatz_kinds: Option<Vec<AnsatzKind>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub attacks: Option<Vec<AttackKind>>,
    pub eps_grid: Option<Vec<f64>>,
    pub train_count: Option<usize>,
    pub test_count: Option<usize>,
    pub stratified: Option<bool>,
    pub metric_samples: Option<usize>,
    pub metric_bins: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| HarnessError::Config(format!("invalid value {raw:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

impl ConfigOverrides {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        let mut seen = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(HarnessError::Config(format!(
                    "line {}: duplicate key {key}",
                    lineno + 1
                )));
            }
            seen.push(key);
            out.set(key, value)
                .map_err(|e| HarnessError::Config(format!("line {}: {}", lineno + 1, strip(e))))?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = Some(parse_value(key, value)?),
            "ansatz" => self.ansatz_kinds = Some(parse_list(key, value)?),
            "epochs" => self.epochs = Some(parse_value(key, value)?),
            "batch_size" => self.batch_size = Some(parse_value(key, value)?),
            "learning_rate" => self.learning_rate = Some(parse_value(key, value)?),
            "attack" => self.attacks = Some(parse_list(key, value)?),
            "eps_grid" => self.eps_grid = Some(parse_list(key, value)?),
            "train_count" => self.train_count = Some(parse_value(key, value)?),
            "test_count" => self.test_count = Some(parse_value(key, value)?),
            "stratified" => self.stratified = Some(parse_value(key, value)?),
            "metric_samples" => self.metric_samples = Some(parse_value(key, value)?),
            "metric_bins" => self.metric_bins = Some(parse_value(key, value)?),
            "out" => self.out_dir = Some(PathBuf::from(value)),
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// `self` with every field that `other` sets replaced.
    pub fn merge(self, other: ConfigOverrides) -> Self {
        Self {
            seed: other.seed.or(self.seed),
            ansatz_kinds: other.ansatz_kinds.or(self.ansatz_kinds),
            epochs: other.epochs.or(self.epochs),
            batch_size: other.batch_size.or(self.batch_size),
            learning_rate: other.learning_rate.or(self.learning_rate),
            attacks: other.attacks.or(self.attacks),
            eps_grid: other.eps_grid.or(self.eps_grid),
            train_count: other.train_count.or(self.train_count),
            test_count: other.test_count.or(self.test_count),
            stratified: other.stratified.or(self.stratified),
            metric_samples: other.metric_samples.or(self.metric_samples),
            metric_bins: other.metric_bins.or(self.metric_bins),
            out_dir: other.out_dir.or(self.out_dir),
        }
    }
}

fn strip(e: HarnessError) -> String {
    match e {
        HarnessError::Config(m) => m,
        other => other.to_string(),
    }
}

impl ExperimentConfig {
    /// Defaults, then the file, then the flags.
    pub fn resolve(file: ConfigOverrides, flags: ConfigOverrides) -> Result<Self> {
        let o = file.merge(flags);
        let d = Self::default();
        let config = Self {
            seed: o.seed.unwrap_or(d.seed),
            ansatz_kinds: o.ansatz_kinds.unwrap_or(d.ansatz_kinds),
            epochs: o.epochs.unwrap_or(d.epochs),
            batch_size: o.batch_size.unwrap_or(d.batch_size),
            learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
            attacks: o.attacks.unwrap_or(d.attacks),
            eps_grid: o.eps_grid.unwrap_or(d.eps_grid),
            train_count: o.train_count.unwrap_or(d.train_count),
            test_count: o.test_count.unwrap_or(d.test_count),
            stratified: o.stratified.unwrap_or(d.stratified),
            metric_samples: o.metric_samples.unwrap_or(d.metric_samples),
            metric_bins: o.metric_bins.unwrap_or(d.metric_bins),
            out_dir: o.out_dir.unwrap_or(d.out_dir),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive and finite");
        }
        if self.train_count == 0 || self.test_count == 0 {
            return fail("train_count and test_count must be positive");
        }
        if self.eps_grid.first() != Some(&0.0) {
            return fail("eps_grid must start at 0");
        }
        if self.eps_grid.windows(2).any(|w| w[1] <= w[0]) {
            return fail("eps_grid must be strictly increasing");
        }
        for &eps in &self.eps_grid {
            AttackSpec::fgsm(eps)
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.attacks.is_empty() {
            return fail("at least one attack is required");
        }
        if has_duplicates(&self.attacks) || has_duplicates(&self.ansatz_kinds) {
            return fail("attack and ansatz lists must not repeat entries");
        }
        if self.metric_samples < 2 || self.metric_bins < 2 {
            return fail("metric_samples and metric_bins must be at least 2");
        }
        Ok(())
    }

    /// Canonical text form; parses back to the same config.
    pub fn to_text(&self) -> String {
        let join = |items: Vec<String>| items.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(
            s,
            "ansatz = {}",
            join(self.ansatz_kinds.iter().map(|k| k.to_string()).collect())
        );
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(
            s,
            "attack = {}",
            join(self.attacks.iter().map(|a| a.to_string()).collect())
        );
        let _ = writeln!(
            s,
            "eps_grid = {}",
            join(self.eps_grid.iter().map(|e| e.to_string()).collect())
        );
        let _ = writeln!(s, "train_count = {}", self.train_count);
        let _ = writeln!(s, "test_count = {}", self.test_count);
        let _ = writeln!(s, "stratified = {}", self.stratified);
        let _ = writeln!(s, "metric_samples = {}", self.metric_samples);
        let _ = writeln!(s, "metric_bins = {}", self.metric_bins);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        s
    }
}

fn has_duplicates<T: PartialEq>(items: &[T]) -> bool {
    items
        .iter()
        .enumerate()
        .any(|(i, a)| items[..i].contains(a))
}
