//! Run configuration: a flat `key = value` file overridden by command-line flags.

use ncorr_core::contour::{BigF, ContourSpec};
use ncorr_core::error::NcorrError;
use ncorr_core::test_functions::PhiSpec;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Compare,
    Sample,
    VerifyJstar,
    Decay,
    Zeta,
    Plotdata,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self, NcorrError> {
        Ok(match s {
            "compare" => Command::Compare,
            "sample" => Command::Sample,
            "verify-jstar" => Command::VerifyJstar,
            "decay" => Command::Decay,
            "zeta" => Command::Zeta,
            "plotdata" => Command::Plotdata,
            other => {
                return Err(NcorrError::Config(format!(
                    "unknown command {other:?} (expected compare, sample, verify-jstar, decay, zeta or plotdata)"
                )))
            }
        })
    }
}

/// Fully resolved configuration; serialized into every output record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    #[serde(rename = "N")]
    pub n_matrix: usize,
    /// `None` lets the zeta command pick the largest scale the data support.
    #[serde(rename = "T")]
    pub t_weight: Option<f64>,
    pub q: f64,
    pub phi_width: f64,
    pub phi_eps: f64,
    pub phi_amplitude: f64,
    pub g_width: f64,
    pub delta: f64,
    pub tmax: Option<f64>,
    pub nodes: usize,
    pub matrices: usize,
    pub seed: u64,
    pub methods: Vec<String>,
    pub deltas: Vec<f64>,
    pub profile_width: f64,
    pub zeros: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub force_conjectural: bool,
}

pub const DEFAULT_METHODS: &str = "mc,determinant,contour,rs_main";
pub const KNOWN_METHODS: [&str; 5] = ["mc", "determinant", "contour", "contour_full", "rs_main"];

/// Raw `key -> value` settings, file first and flags layered on top.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

const KEYS: [&str; 20] = [
    "command",
    "n",
    "N",
    "T",
    "q",
    "phi_width",
    "phi_eps",
    "phi_amplitude",
    "g_width",
    "delta",
    "tmax",
    "nodes",
    "matrices",
    "seed",
    "methods",
    "deltas",
    "profile_width",
    "zeros",
    "out",
    "tolerance",
];

fn canonical_key(key: &str) -> Option<String> {
    let k = key.trim().replace('-', "_");
    if k == "force_conjectural" || KEYS.contains(&k.as_str()) {
        Some(k)
    } else {
        None
    }
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, NcorrError> {
        let text = fs::read_to_string(path)
            .map_err(|e| NcorrError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, NcorrError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| NcorrError::Config(format!("config line {}: expected key = value", i + 1)))?;
            s.set(k, v.trim())
                .map_err(|e| NcorrError::Config(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), NcorrError> {
        let k = canonical_key(key).ok_or_else(|| NcorrError::Config(format!("unknown key {key:?}")))?;
        self.values.insert(k, value.to_string());
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, NcorrError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| NcorrError::Config(format!("invalid value {v:?} for {key}"))),
        }
    }

    fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, NcorrError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Applies defaults and checks every constraint the commands rely on.
    pub fn resolve(&self) -> Result<RunConfig, NcorrError> {
        let command = Command::parse(
            self.values
                .get("command")
                .ok_or_else(|| NcorrError::Config("no command given (use --command)".into()))?,
        )?;
        let list = |key: &str, default: &str| -> Vec<String> {
            self.values
                .get(key)
                .map(String::as_str)
                .unwrap_or(default)
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        };
        let deltas = list("deltas", "0.2,0.3,0.4,0.5,0.6")
            .iter()
            .map(|d| d.parse::<f64>().map_err(|_| NcorrError::Config(format!("invalid δ {d:?} in deltas"))))
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = RunConfig {
            command,
            n: self.get_or("n", 2)?,
            n_matrix: self.get_or("N", 20)?,
            t_weight: self.get("T")?,
            q: self.get_or("q", 1.0)?,
            phi_width: self.get_or("phi_width", 0.9)?,
            phi_eps: self.get_or("phi_eps", 0.2)?,
            phi_amplitude: self.get_or("phi_amplitude", 1.0)?,
            g_width: self.get_or("g_width", 1.0)?,
            delta: self.get_or("delta", 0.4)?,
            tmax: self.get("tmax")?,
            nodes: self.get_or("nodes", 64)?,
            matrices: self.get_or("matrices", 1000)?,
            seed: self.get_or("seed", 1)?,
            methods: list("methods", DEFAULT_METHODS),
            deltas,
            profile_width: self.get_or("profile_width", 0.9)?,
            zeros: self.get::<String>("zeros")?.map(PathBuf::from),
            out: self.get::<String>("out")?.map(PathBuf::from),
            tolerance: self.get("tolerance")?,
            force_conjectural: self.get_or("force_conjectural", false)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), NcorrError> {
        let bad = |msg: String| Err(NcorrError::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.n_matrix == 0 {
            return bad("N must be at least 1".into());
        }
        if let Some(t) = self.t_weight {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("T must be positive, got {t}"));
            }
        }
        if self.matrices == 0 {
            return bad("matrices must be at least 1".into());
        }
        if self.nodes < 4 {
            return bad(format!("nodes must be at least 4, got {}", self.nodes));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0) {
                return bad(format!("tolerance must be non-negative, got {t}"));
            }
        }
        for m in &self.methods {
            if !KNOWN_METHODS.contains(&m.as_str()) {
                return bad(format!("unknown method {m:?} (known: {})", KNOWN_METHODS.join(", ")));
            }
        }
        if self.command == Command::Compare && self.methods.len() < 2 {
            return bad("compare needs at least two methods".into());
        }
        if self.command == Command::Zeta && self.zeros.is_none() {
            return bad("the zeta command needs --zeros".into());
        }
        Ok(())
    }

    pub fn phi(&self) -> Result<PhiSpec, NcorrError> {
        PhiSpec::new(self.n, self.q, self.phi_eps, self.phi_width, self.phi_amplitude)
    }

    pub fn t_or_default(&self) -> f64 {
        self.t_weight.unwrap_or(10.0)
    }

    pub fn big_f(&self) -> Result<BigF, NcorrError> {
        BigF::uniform(self.phi()?, self.g_width, self.n_matrix, self.t_or_default())
    }

    pub fn contour_spec(&self) -> ContourSpec {
        ContourSpec { t_max: self.tmax, ..ContourSpec::with_delta(self.delta) }
    }
}
