//! Experiment configuration.
//!
//! A flat `key = value` file, one setting per line, `#` starts a comment.
//! Values from the command line override the file, which overrides the
//! built-in defaults. Lists are comma separated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::{TorusRadii, TorusSampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    Sphere,
    Torus,
    /// A graph supplied on the command line; no ground truth.
    External,
}

impl std::str::FromStr for Manifold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sphere" | "s2" => Ok(Manifold::Sphere),
            "torus" | "t2" => Ok(Manifold::Torus),
            "external" => Ok(Manifold::External),
            other => Err(Error::param(format!("unknown manifold {other:?}"))),
        }
    }
}

impl Manifold {
    pub fn name(self) -> &'static str {
        match self {
            Manifold::Sphere => "sphere",
            Manifold::Torus => "torus",
            Manifold::External => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum WeightMode {
    Unit,
    /// `w_ij = exp(-d²_ij / σ)` from the ground-truth geodesic distance.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Vdm,
    Dm,
}

impl std::str::FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vdm" => Ok(Baseline::Vdm),
            "dm" => Ok(Baseline::Dm),
            other => Err(Error::param(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Parse a comma-separated baseline list; `none` or empty gives no baselines.
pub fn parse_baselines(s: &str) -> Result<Vec<Baseline>> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    let mut out = s.split(',').map(str::parse).collect::<Result<Vec<Baseline>>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::param(format!("{key}: cannot parse {t:?}")))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::param(format!("{key}: cannot parse {s:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub manifold: Manifold,
    pub n: usize,
    pub kappa_build: usize,
    pub kappa_search: usize,
    /// Rewiring probabilities; one report set per value.
    pub p: Vec<f64>,
    pub seed: u64,
    pub kmax: u32,
    /// Eigenpairs per frequency, also used for the DM and VDM baselines.
    pub mk: usize,
    pub t: u32,
    pub fft_len: usize,
    pub weights: WeightMode,
    pub baselines: Vec<Baseline>,
    pub out: PathBuf,
    /// Input graph for the external manifold, or to bypass generation.
    pub graph: Option<PathBuf>,
    pub torus_major: f64,
    pub torus_minor: f64,
    pub torus_sampling: TorusSampling,
    /// Frequencies for `spectrum`.
    pub spectrum_k: Vec<u32>,
    /// Eigenvalues per spectral report.
    pub spectrum_m: usize,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            manifold: Manifold::Sphere,
            n: 10_000,
            kappa_build: 150,
            kappa_search: 50,
            p: vec![1.0],
            seed: 0,
            kmax: 50,
            mk: 50,
            t: 1,
            fft_len: 1024,
            weights: WeightMode::Unit,
            baselines: vec![Baseline::Vdm, Baseline::Dm],
            out: PathBuf::from("out"),
            graph: None,
            torus_major: 1.0,
            torus_minor: 0.2,
            torus_sampling: TorusSampling::AreaUniform,
            spectrum_k: vec![1, 2, 5],
            spectrum_m: 30,
            workers: 0,
            tol: 1e-8,
        }
    }
}

impl Serialize for TorusSampling {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(torus_sampling_name(*self))
    }
}

fn torus_sampling_name(mode: TorusSampling) -> &'static str {
    match mode {
        TorusSampling::AreaUniform => "area",
        TorusSampling::ParameterUniform => "parameter",
    }
}

/// Keys accepted in config files and by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "manifold",
    "n",
    "kappa_build",
    "kappa_search",
    "p",
    "seed",
    "kmax",
    "mk",
    "t",
    "fft_len",
    "weights",
    "sigma",
    "baselines",
    "out",
    "graph",
    "torus_major",
    "torus_minor",
    "torus_sampling",
    "spectrum_k",
    "spectrum_m",
    "workers",
    "tol",
];

impl ExperimentConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "manifold" => self.manifold = v.parse()?,
            "n" => self.n = parse_value(key, v)?,
            "kappa_build" => self.kappa_build = parse_value(key, v)?,
            "kappa_search" | "kappa" => self.kappa_search = parse_value(key, v)?,
            "p" => self.p = parse_list(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "kmax" => self.kmax = parse_value(key, v)?,
            "mk" => self.mk = parse_value(key, v)?,
            "t" => self.t = parse_value(key, v)?,
            "fft_len" => self.fft_len = parse_value(key, v)?,
            "weights" => {
                self.weights = match v.to_ascii_lowercase().as_str() {
                    "unit" => WeightMode::Unit,
                    "gaussian" => WeightMode::Gaussian {
                        sigma: match self.weights {
                            WeightMode::Gaussian { sigma } => sigma,
                            WeightMode::Unit => f64::NAN,
                        },
                    },
                    other => return Err(Error::param(format!("unknown weight mode {other:?}"))),
                }
            }
            "sigma" => {
                self.weights = WeightMode::Gaussian {
                    sigma: parse_value(key, v)?,
                }
            }
            "baselines" => self.baselines = parse_baselines(v)?,
            "out" => self.out = PathBuf::from(v),
            "graph" => self.graph = (!v.is_empty()).then(|| PathBuf::from(v)),
            "torus_major" => self.torus_major = parse_value(key, v)?,
            "torus_minor" => self.torus_minor = parse_value(key, v)?,
            "torus_sampling" => {
                self.torus_sampling = match v.to_ascii_lowercase().as_str() {
                    "area" => TorusSampling::AreaUniform,
                    "parameter" => TorusSampling::ParameterUniform,
                    other => {
                        return Err(Error::param(format!(
                            "torus_sampling must be area or parameter, got {other:?}"
                        )))
                    }
                }
            }
            "spectrum_k" => self.spectrum_k = parse_list(key, v)?,
            "spectrum_m" => self.spectrum_m = parse_value(key, v)?,
            "workers" => self.workers = parse_value(key, v)?,
            "tol" => self.tol = parse_value(key, v)?,
            other => return Err(Error::param(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Apply every setting of a config file body.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_str(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn torus_radii(&self) -> Result<TorusRadii> {
        TorusRadii::new(self.torus_major, self.torus_minor)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::param(msg));
        if self.manifold != Manifold::External && self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.manifold == Manifold::External && self.graph.is_none() {
            return fail("the external manifold needs a graph file".into());
        }
        if self.manifold != Manifold::External
            && (self.kappa_build == 0 || self.kappa_build >= self.n)
        {
            return fail(format!("kappa_build must satisfy 1 ≤ κ < n, got {}", self.kappa_build));
        }
        if self.kappa_search == 0 || (self.manifold != Manifold::External && self.kappa_search >= self.n) {
            return fail(format!("kappa_search must satisfy 1 ≤ κ < n, got {}", self.kappa_search));
        }
        if self.p.is_empty() {
            return fail("p needs at least one value".into());
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return fail(format!("p must lie in [0, 1], got {p}"));
        }
        if self.kmax == 0 {
            return fail("kmax must be at least 1".into());
        }
        if self.mk == 0 || (self.manifold != Manifold::External && self.mk > self.n) {
            return fail(format!("mk must satisfy 1 ≤ mk ≤ n, got {}", self.mk));
        }
        if self.t == 0 {
            return fail("t must be at least 1".into());
        }
        if !self.fft_len.is_power_of_two() || self.fft_len < 4 * self.kmax as usize {
            return fail(format!(
                "fft_len must be a power of two ≥ 4·kmax = {}, got {}",
                4 * self.kmax,
                self.fft_len
            ));
        }
        if let WeightMode::Gaussian { sigma } = self.weights {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return fail("gaussian weights need a positive sigma".into());
            }
            if self.manifold == Manifold::External {
                return fail("gaussian weights need ground-truth distances".into());
            }
        }
        if self.manifold == Manifold::Torus {
            self.torus_radii()?;
        }
        if self.spectrum_k.iter().any(|&k| k == 0) {
            return fail("spectrum_k entries must be at least 1".into());
        }
        if self.spectrum_m == 0 {
            return fail("spectrum_m must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }

    /// The resolved configuration as JSON, embedded in every report.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }

    /// Render as a config file that reproduces `self`.
    pub fn to_file_string(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("manifold", self.manifold.name().into());
        kv("n", self.n.to_string());
        kv("kappa_build", self.kappa_build.to_string());
        kv("kappa_search", self.kappa_search.to_string());
        kv("p", join(self.p.iter().map(|p| p.to_string()).collect()));
        kv("seed", self.seed.to_string());
        kv("kmax", self.kmax.to_string());
        kv("mk", self.mk.to_string());
        kv("t", self.t.to_string());
        kv("fft_len", self.fft_len.to_string());
        match self.weights {
            WeightMode::Unit => kv("weights", "unit".into()),
            WeightMode::Gaussian { sigma } => kv("sigma", sigma.to_string()),
        }
        let bl: Vec<String> = self
            .baselines
            .iter()
            .map(|b| match b {
                Baseline::Vdm => "vdm".to_string(),
                Baseline::Dm => "dm".to_string(),
            })
            .collect();
        kv("baselines", if bl.is_empty() { "none".into() } else { join(bl) });
        kv("out", self.out.display().to_string());
        if let Some(g) = &self.graph {
            kv("graph", g.display().to_string());
        }
        kv("torus_major", self.torus_major.to_string());
        kv("torus_minor", self.torus_minor.to_string());
        kv("torus_sampling", torus_sampling_name(self.torus_sampling).into());
        kv("spectrum_k", join(self.spectrum_k.iter().map(|k| k.to_string()).collect()));
        kv("spectrum_m", self.spectrum_m.to_string());
        kv("workers", self.workers.to_string());
        kv("tol", format!("{:e}", self.tol));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.kmax, cfg.mk, cfg.t, cfg.kappa_search), (50, 50, 1, 50));
    }

    #[test]
    fn file_parsing_and_precedence() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_str("# sweep\nn = 300\np = 1, 0.4,0.1\nbaselines = dm\nkmax = 5 # few\n")
            .unwrap();
        assert_eq!(cfg.n, 300);
        assert_eq!(cfg.p, vec![1.0, 0.4, 0.1]);
        assert_eq!(cfg.baselines, vec![Baseline::Dm]);
        assert_eq!(cfg.kmax, 5);
        // later (command-line) settings win
        cfg.set("kmax", "7").unwrap();
        assert_eq!(cfg.kmax, 7);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(cfg.apply_str("n = 5\nbogus = 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(cfg.apply_str("n 5\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(cfg.apply_str("n = -4\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig {
            n: 100,
            kappa_build: 10,
            kappa_search: 10,
            kmax: 5,
            mk: 10,
            ..Default::default()
        };
        ok.validate().unwrap();
        let bad = [
            ExperimentConfig { p: vec![1.5], ..ok.clone() },
            ExperimentConfig { kappa_search: 100, ..ok.clone() },
            ExperimentConfig { kmax: 0, ..ok.clone() },
            ExperimentConfig { mk: 0, ..ok.clone() },
            ExperimentConfig { t: 0, ..ok.clone() },
            ExperimentConfig { fft_len: 12, ..ok.clone() },
            ExperimentConfig { kmax: 300, ..ok.clone() },
            ExperimentConfig { weights: WeightMode::Gaussian { sigma: f64::NAN }, ..ok.clone() },
            ExperimentConfig { manifold: Manifold::External, ..ok.clone() },
            ExperimentConfig { manifold: Manifold::Torus, torus_major: 0.1, ..ok.clone() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn file_string_round_trip() {
        let cfg = ExperimentConfig {
            n: 321,
            p: vec![1.0, 0.25],
            weights: WeightMode::Gaussian { sigma: 0.3 },
            baselines: vec![],
            torus_sampling: TorusSampling::ParameterUniform,
            graph: Some("g.txt".into()),
            ..Default::default()
        };
        let mut back = ExperimentConfig::default();
        back.apply_str(&cfg.to_file_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
