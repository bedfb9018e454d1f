//! Experiment configuration.
//!
//! ```toml
//! cs = 7.0            # required; t0, t1, c1, c2, ys, w are optional
//! ensemble = "masses.csv"   # or density = "rho.csv"; neither means one unit mass at 0
//!
//! [simulate]
//! u = 0.5             # constant control, or tstar = 1.2 for a bang-bang control
//! samples = 401
//!
//! [sweep]
//! grid = 1024
//! trials = 0
//!
//! [verify]
//! tstar = 1.1609      # default: refined sweep optimum
//!
//! [converge]
//! levels = [16, 64, 256, 1024]
//! schedule = [1e2, 1e3, 1e4, 1e5]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use follicle_core::measure::{InitialMeasure, DEFAULT_NODES};
use follicle_core::optimizer::{Problem, DEFAULT_GRID, DEFAULT_SEED};
use follicle_core::regularized::MAX_INDEX;
use follicle_core::report::{read_density_csv, read_ensemble_csv};
use follicle_core::{Ensemble, ModelParams, Particle};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    cs: f64,
    t0: Option<f64>,
    t1: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    ys: Option<f64>,
    w: Option<f64>,
    ensemble: Option<PathBuf>,
    density: Option<PathBuf>,
    nodes: Option<usize>,
    #[serde(default)]
    simulate: SimulateOptions,
    #[serde(default)]
    sweep: SweepOptions,
    #[serde(default)]
    verify: VerifyOptions,
    #[serde(default)]
    converge: ConvergeOptions,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    pub u: Option<f64>,
    pub tstar: Option<f64>,
    pub samples: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            u: None,
            tstar: None,
            samples: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub grid: usize,
    /// Random step controls for the falsification run; 0 skips it.
    pub trials: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            trials: 0,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub tstar: Option<f64>,
    /// Sample points of the certificate checks.
    pub samples: usize,
    /// Sweep grid used to locate the optimum when `tstar` is absent.
    pub grid: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tstar: None,
            samples: 2001,
            grid: DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeOptions {
    pub levels: Vec<usize>,
    pub reference_nodes: usize,
    pub schedule: Vec<f64>,
    pub particle: usize,
    /// Switch of the bang-bang control; default: the `u = w` crossing time
    /// of the studied mass (or of maturity 0 for a density).
    pub tstar: Option<f64>,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        Self {
            levels: vec![16, 64, 256, 1024],
            reference_nodes: 100,
            schedule: vec![1e2, 1e3, 1e4, 1e5],
            particle: 0,
            tstar: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub problem: Problem,
    pub simulate: SimulateOptions,
    pub sweep: SweepOptions,
    pub verify: VerifyOptions,
    pub converge: ConvergeOptions,
    /// SHA-256 of the config text and of every referenced data file.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    /// Parses `text`; data paths are relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: Raw = toml::from_str(text)?;
        let mut params = ModelParams::standard(raw.cs);
        let overrides = [
            (&mut params.t0, raw.t0),
            (&mut params.t1, raw.t1),
            (&mut params.c1, raw.c1),
            (&mut params.c2, raw.c2),
            (&mut params.ys, raw.ys),
            (&mut params.w, raw.w),
        ];
        for (slot, value) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        params.validate()?;

        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let problem = match (&raw.ensemble, &raw.density) {
            (Some(_), Some(_)) => bail!("give either `ensemble` or `density`, not both"),
            (Some(file), None) => {
                let path = base.join(file);
                let data = fs::read_to_string(&path)
                    .with_context(|| format!("cannot read ensemble {}", path.display()))?;
                hasher.update(data.as_bytes());
                let ens = read_ensemble_csv(&data, &params)
                    .with_context(|| format!("in ensemble {}", path.display()))?;
                Problem::Particles(ens)
            }
            (None, Some(file)) => {
                let path = base.join(file);
                let data = fs::read_to_string(&path)
                    .with_context(|| format!("cannot read density {}", path.display()))?;
                hasher.update(data.as_bytes());
                let grid = read_density_csv(&data, &params)
                    .with_context(|| format!("in density {}", path.display()))?;
                let nodes = raw.nodes.unwrap_or(DEFAULT_NODES);
                if !(1..=1000).contains(&nodes) {
                    bail!("nodes = {nodes} outside [1, 1000]");
                }
                let rho0 = InitialMeasure::density_with_rule(grid, &params, nodes, nodes)?;
                Problem::Measure { params, rho0 }
            }
            (None, None) => Problem::Particles(Ensemble::single(params, Particle::new(0.0, 0.0, 1.0))?),
        };
        if raw.nodes.is_some() && raw.density.is_none() {
            bail!("`nodes` only applies to a density problem");
        }

        let cfg = Self {
            params,
            problem,
            simulate: raw.simulate,
            sweep: raw.sweep,
            verify: raw.verify,
            converge: raw.converge,
            hash: hasher
                .finalize()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect(),
        };
        cfg.check_ranges()?;
        Ok(cfg)
    }

    fn check_ranges(&self) -> Result<()> {
        let p = &self.params;
        let in_horizon = |name: &str, t: Option<f64>| -> Result<()> {
            match t {
                Some(t) if !(t >= p.t0 && t <= p.t1) => {
                    bail!("{name} = {t} outside [{}, {}]", p.t0, p.t1)
                }
                _ => Ok(()),
            }
        };
        let s = &self.simulate;
        if s.u.is_some() && s.tstar.is_some() {
            bail!("simulate: give either `u` or `tstar`, not both");
        }
        if let Some(u) = s.u {
            if !(u >= p.w && u <= 1.0) {
                bail!("simulate.u = {u} outside [{}, 1]", p.w);
            }
        }
        in_horizon("simulate.tstar", s.tstar)?;
        in_horizon("verify.tstar", self.verify.tstar)?;
        in_horizon("converge.tstar", self.converge.tstar)?;
        for (name, n, lo, hi) in [
            ("simulate.samples", s.samples, 2, 1_000_000),
            ("sweep.grid", self.sweep.grid, 2, 1_000_000),
            ("sweep.trials", self.sweep.trials, 0, 10_000_000),
            ("verify.samples", self.verify.samples, 3, 1_000_000),
            ("verify.grid", self.verify.grid, 2, 1_000_000),
            ("converge.reference_nodes", self.converge.reference_nodes, 1, 1000),
        ] {
            if !(lo..=hi).contains(&n) {
                bail!("{name} = {n} outside [{lo}, {hi}]");
            }
        }
        let c = &self.converge;
        if c.levels.is_empty() || c.levels.iter().any(|&n| n == 0 || n > 1_000_000) {
            bail!("converge.levels must be nonempty with entries in [1, 1000000]");
        }
        if c.schedule.is_empty() || c.schedule.iter().any(|&i| !(1.0..=MAX_INDEX).contains(&i)) {
            bail!("converge.schedule must be nonempty with entries in [1, {MAX_INDEX}]");
        }
        Ok(())
    }

    pub fn ensemble(&self) -> Option<&Ensemble> {
        match &self.problem {
            Problem::Particles(e) => Some(e),
            Problem::Measure { .. } => None,
        }
    }

    pub fn with_grid(mut self, grid: Option<usize>) -> Result<Self> {
        if let Some(n) = grid {
            if !(2..=1_000_000).contains(&n) {
                bail!("--grid {n} outside [2, 1000000]");
            }
            self.sweep.grid = n;
            self.verify.grid = n;
        }
        Ok(self)
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.sweep.seed = s;
        }
        self
    }
}
