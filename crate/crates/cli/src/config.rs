//! Plain `key=value` experiment configuration.
//!
//! ```text
//! # comments and blank lines are ignored; [block] headers are optional
//! [model]
//! d = 100
//! kernel = gaussian:1
//! g = poly:0,1;0,0.6;0,-0.5
//! [data]
//! n_train = 1000
//! ```
//!
//! Keys may appear in any block. Unknown keys and out-of-range values are
//! rejected while parsing.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use lik_core::{KernelSpec, LatentModel, SignalFn, SignalKind};

use crate::CliError;

/// Truncation threshold for the Gram estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaChoice {
    Auto,
    Fixed(f64),
}

impl FromStr for DeltaChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s.trim() == "auto" {
            return Ok(DeltaChoice::Auto);
        }
        let v: f64 = parse_num("delta", s)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::usage(format!("delta must be positive or 'auto', got {s}")));
        }
        Ok(DeltaChoice::Fixed(v))
    }
}

impl std::fmt::Display for DeltaChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeltaChoice::Auto => f.write_str("auto"),
            DeltaChoice::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // model
    pub d: usize,
    pub r: usize,
    pub kernel: KernelSpec,
    pub g: SignalKind,
    pub g_standardize: bool,
    pub sigma_xi: f64,
    // data
    pub n_train: usize,
    pub n_test: usize,
    pub k: usize,
    pub seed: u64,
    /// Number of consecutive seeds averaged by `sweep`.
    pub seeds: usize,
    // kestim
    pub delta: DeltaChoice,
    pub hints: Vec<PathBuf>,
    pub betas: Vec<f64>,
    pub hint_exp: bool,
    // gest
    pub ell: usize,
    pub c: f64,
    // pvel
    pub eta: f64,
    pub rounds: usize,
    // eval
    pub nw_lag: usize,
    pub quantile: f64,
    pub weights: Option<PathBuf>,
    pub horizon: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            d: 100,
            r: 2,
            kernel: KernelSpec::Gaussian { sigma: 1.0 },
            g: SignalKind::Polynomial { coeffs: vec![vec![0.0, 1.0], vec![0.0, 0.6], vec![0.0, -0.5]] },
            g_standardize: true,
            sigma_xi: 1.0,
            n_train: 1000,
            n_test: 0,
            k: 5,
            seed: 0,
            seeds: 5,
            delta: DeltaChoice::Auto,
            hints: Vec::new(),
            betas: Vec::new(),
            hint_exp: false,
            ell: 10,
            c: 0.5,
            eta: 0.1,
            rounds: 50,
            nw_lag: 4,
            quantile: 0.2,
            weights: None,
            horizon: 5.0,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "d", "r", "kernel", "sigma", "g", "g_standardize", "sigma_xi", "n_train", "n", "n_test", "k",
    "seed", "seeds", "delta", "hints", "betas", "hint_exp", "ell", "c", "eta", "rounds", "nw_lag",
    "quantile", "weights", "horizon",
];

/// Keys that take a single number, usable as a sweep axis.
pub const NUMERIC_KEYS: &[&str] = &[
    "d", "r", "sigma", "sigma_xi", "n_train", "n", "n_test", "k", "seed", "delta", "ell", "c",
    "eta", "rounds", "nw_lag", "quantile", "horizon",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("config key '{key}': cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::usage(format!("config key '{key}': expected true/false, got '{v}'"))),
    }
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("config key '{key}' must be positive, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<usize, CliError> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::usage(format!("config key '{key}' must be >= {min}, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("config line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("io: cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key, validating the value on its own.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "d" => self.d = at_least(key, parse_num(key, v)?, 2)?,
            "r" => self.r = at_least(key, parse_num(key, v)?, 1)?,
            "kernel" => self.kernel = v.parse().map_err(CliError::from)?,
            "sigma" => {
                let s = positive(key, parse_num(key, v)?)?;
                match &mut self.kernel {
                    KernelSpec::Gaussian { sigma } => *sigma = s,
                    other => {
                        return Err(CliError::usage(format!("'sigma' only applies to the gaussian kernel, not {other}")))
                    }
                }
            }
            "g" => self.g = v.parse().map_err(CliError::from)?,
            "g_standardize" => self.g_standardize = parse_bool(key, v)?,
            "sigma_xi" => {
                let s: f64 = parse_num(key, v)?;
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(CliError::usage(format!("sigma_xi must be >= 0, got {s}")));
                }
                self.sigma_xi = s;
            }
            "n_train" | "n" => self.n_train = at_least(key, parse_num(key, v)?, 1)?,
            "n_test" => self.n_test = parse_num(key, v)?,
            "k" => self.k = at_least(key, parse_num(key, v)?, 1)?,
            "seed" => self.seed = parse_num(key, v)?,
            "seeds" => self.seeds = at_least(key, parse_num(key, v)?, 1)?,
            "delta" => self.delta = v.parse()?,
            "hints" => self.hints = list(v).map(PathBuf::from).collect(),
            "betas" => self.betas = list(v).map(|b| parse_num(key, b)).collect::<Result<_, _>>()?,
            "hint_exp" => self.hint_exp = parse_bool(key, v)?,
            "ell" => self.ell = at_least(key, parse_num(key, v)?, 2)?,
            "c" => self.c = positive(key, parse_num(key, v)?)?,
            "eta" => self.eta = positive(key, parse_num(key, v)?)?,
            "rounds" => self.rounds = at_least(key, parse_num(key, v)?, 1)?,
            "nw_lag" => self.nw_lag = parse_num(key, v)?,
            "quantile" => {
                let q: f64 = parse_num(key, v)?;
                if !(q > 0.0 && q <= 1.0) {
                    return Err(CliError::usage(format!("quantile must lie in (0, 1], got {q}")));
                }
                self.quantile = q;
            }
            "weights" => self.weights = Some(PathBuf::from(v)),
            "horizon" => self.horizon = positive(key, parse_num(key, v)?)?,
            _ => return Err(CliError::usage(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Checks that need more than one key.
    pub fn validate(&self) -> Result<(), CliError> {
        let min_dim = self.g.min_dim();
        if self.k < min_dim {
            return Err(CliError::usage(format!("signal '{}' needs k >= {min_dim}, got k={}", self.g, self.k)));
        }
        if self.hints.len() != self.betas.len() {
            return Err(CliError::usage(format!(
                "{} hint paths but {} betas",
                self.hints.len(),
                self.betas.len()
            )));
        }
        Ok(())
    }

    pub fn signal(&self) -> Result<SignalFn, CliError> {
        let g = if self.g_standardize && !self.g.is_constant() {
            SignalFn::standardized(self.g.clone(), self.k)?
        } else {
            SignalFn::new(self.g.clone(), self.k)?
        };
        Ok(g)
    }

    pub fn latent_model(&self) -> Result<LatentModel, CliError> {
        Ok(LatentModel::new(self.d, self.r, self.kernel, self.signal()?, self.sigma_xi, self.seed)?)
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_blocks_and_comments() {
        let cfg = ExperimentConfig::parse(
            "[model]\nd = 50 # entities\nkernel=imq:1:0.5\n\n[data]\nn_train=300\nk=3\n[kestim]\ndelta=0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.d, 50);
        assert_eq!(cfg.kernel, KernelSpec::Imq { c: 1.0, alpha: 0.5 });
        assert_eq!(cfg.n_train, 300);
        assert_eq!(cfg.delta, DeltaChoice::Fixed(0.01));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        for bad in ["foo=1", "d=1", "ell=1", "quantile=0", "quantile=1.5", "eta=-1", "delta=0", "c=nan", "d"] {
            assert!(ExperimentConfig::parse(bad).is_err(), "{bad}");
        }
        assert!(ExperimentConfig::parse("kernel=inner\nsigma=2").is_err());
        assert!(ExperimentConfig::parse("g=poly:1;1;1\nk=2").is_err());
        assert!(ExperimentConfig::parse("hints=a.csv,b.csv\nbetas=1").is_err());
    }

    #[test]
    fn sigma_key_sets_bandwidth() {
        let cfg = ExperimentConfig::parse("kernel=gaussian\nsigma=2.5").unwrap();
        assert_eq!(cfg.kernel, KernelSpec::Gaussian { sigma: 2.5 });
    }

    #[test]
    fn every_numeric_key_is_settable() {
        for key in NUMERIC_KEYS {
            let mut cfg = ExperimentConfig::default();
            let v = if *key == "quantile" { "0.5" } else { "3" };
            cfg.set(key, v).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
        assert!(NUMERIC_KEYS.iter().all(|k| KEYS.contains(k)));
    }
}
