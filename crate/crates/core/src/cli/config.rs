use std::path::{Path, PathBuf};

use crate::agent::TrainConfig;
use crate::baselines::{CurveKind, DEFAULT_EXPONENT};
use crate::codec::Qp;
use crate::env::DEFAULT_ALPHA;
use crate::error::{Error, Result};
use crate::semantics::FileOracleMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleChoice {
    Proxy,
    Files,
}

impl std::str::FromStr for OracleChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proxy" => Ok(OracleChoice::Proxy),
            "files" => Ok(OracleChoice::Files),
            _ => Err(Error::invalid(format!("unknown oracle `{s}` (proxy or files)"))),
        }
    }
}

/// Everything a command needs. Built from defaults, then a `key = value`
/// file, then command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub frames: Option<PathBuf>,
    pub maps: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub oracle: OracleChoice,
    pub map_mode: FileOracleMode,
    pub alpha_s: f64,
    pub alphas: Vec<f64>,
    pub anchor_qp: Qp,
    pub train_fraction: f64,
    pub train: TrainConfig,
    pub global_branch: bool,
    pub baseline: Option<CurveKind>,
    pub exponent: f64,
    pub uniform_qp: Option<Qp>,
    pub anchor_qps: Vec<Qp>,
    pub handcrafted_qp_mins: Vec<Qp>,
    pub correlation_trials: usize,
}

fn qps(values: &[u8]) -> Vec<Qp> {
    values.iter().map(|&v| Qp::new(v).expect("valid qp")).collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            frames: None,
            maps: None,
            cache: None,
            model: None,
            out: None,
            oracle: OracleChoice::Proxy,
            map_mode: FileOracleMode::PerQp,
            alpha_s: DEFAULT_ALPHA,
            alphas: vec![0.0, 5.0, 10.0, 20.0, 50.0],
            anchor_qp: Qp::new(22).expect("qp"),
            train_fraction: 0.8,
            train: TrainConfig::default(),
            global_branch: true,
            baseline: None,
            exponent: DEFAULT_EXPONENT,
            uniform_qp: None,
            anchor_qps: qps(&[22, 27, 32, 37, 42, 47, 51]),
            handcrafted_qp_mins: qps(&[22, 27, 32, 37, 42]),
            correlation_trials: 50,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn parse_qp(key: &str, value: &str) -> Result<Qp> {
    Qp::new(parse(key, value)?)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::invalid(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "frames",
    "maps",
    "cache",
    "model",
    "out",
    "oracle",
    "map_mode",
    "alpha",
    "alphas",
    "anchor_qp",
    "train_fraction",
    "steps",
    "learning_rate",
    "gamma",
    "batch",
    "target_sync_every",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay_steps",
    "replay_capacity",
    "global_branch",
    "baseline",
    "exponent",
    "uniform_qp",
    "anchor_qps",
    "handcrafted_qp_mins",
    "correlation_trials",
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "frames" => self.frames = Some(v.into()),
            "maps" => self.maps = Some(v.into()),
            "cache" => self.cache = Some(v.into()),
            "model" => self.model = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "oracle" => self.oracle = v.parse()?,
            "map_mode" => {
                self.map_mode = match v {
                    "static" => FileOracleMode::Static,
                    "per-qp" => FileOracleMode::PerQp,
                    _ => return Err(Error::invalid(format!("`map_mode`: static or per-qp, got `{v}`"))),
                }
            }
            "alpha" => self.alpha_s = parse(key, v)?,
            "alphas" => self.alphas = parse_list(key, v)?,
            "anchor_qp" => self.anchor_qp = parse_qp(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "steps" => self.train.steps = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "gamma" => self.train.gamma = parse(key, v)?,
            "batch" => self.train.batch_size = parse(key, v)?,
            "target_sync_every" => self.train.target_sync_every = parse(key, v)?,
            "epsilon_start" => self.train.epsilon_start = parse(key, v)?,
            "epsilon_end" => self.train.epsilon_end = parse(key, v)?,
            "epsilon_decay_steps" => self.train.epsilon_decay_steps = parse(key, v)?,
            "replay_capacity" => self.train.replay_capacity = parse(key, v)?,
            "global_branch" => self.global_branch = parse_bool(key, v)?,
            "baseline" => self.baseline = Some(v.parse()?),
            "exponent" => self.exponent = parse(key, v)?,
            "uniform_qp" => self.uniform_qp = Some(parse_qp(key, v)?),
            "anchor_qps" => self.anchor_qps = parse_list::<u8>(key, v)?.into_iter().map(Qp::new).collect::<Result<_>>()?,
            "handcrafted_qp_mins" => {
                self.handcrafted_qp_mins = parse_list::<u8>(key, v)?.into_iter().map(Qp::new).collect::<Result<_>>()?
            }
            "correlation_trials" => self.correlation_trials = parse(key, v)?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        self.train.seed = self.seed;
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key = value`"))?;
            self.set(key.trim(), value).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("no {what} given (flag --{what} or config key `{what}`)")))
    }
}
