//! Run configuration: JSON file, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use holotel_core::{GridSpec, OpaParams, QuadConfig};
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpaBlock {
    pub sigma: f64,
    pub delta0: f64,
    pub gvm: f64,
    pub gvd: f64,
    pub diffraction: f64,
    pub pump_phase: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub omega_p: f64,
}

impl Default for OpaBlock {
    fn default() -> Self {
        let p = OpaParams::default();
        OpaBlock {
            sigma: p.sigma,
            delta0: p.delta0,
            gvm: p.gvm,
            gvd: p.gvd,
            diffraction: p.diffraction,
            pump_phase: p.pump_phase,
            omega1: p.omega1,
            omega2: p.omega2,
            omega_p: p.omega_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub delta: f64,
    pub t_window: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub origin: [f64; 3],
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            delta: 1.0,
            t_window: 1.0,
            nx: 1,
            ny: 1,
            nt: 1,
            origin: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McBlock {
    pub samples: usize,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Default for McBlock {
    fn default() -> Self {
        McBlock {
            samples: 10_000,
            seed: None,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadBlock {
    pub tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadBlock {
    fn default() -> Self {
        let q = QuadConfig::default();
        QuadBlock {
            tol: q.tol,
            max_subdivisions: q.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompBlock {
    pub degree: usize,
    pub budget: usize,
}

impl Default for CompBlock {
    fn default() -> Self {
        CompBlock {
            degree: 2,
            budget: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub opa: OpaBlock,
    pub grid: GridBlock,
    pub mc: McBlock,
    pub quadrature: QuadBlock,
    pub compensation: CompBlock,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            opa: OpaBlock::default(),
            grid: GridBlock::default(),
            mc: McBlock::default(),
            quadrature: QuadBlock::default(),
            compensation: CompBlock::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub sigma: Option<f64>,
    pub delta0: Option<f64>,
    pub gvm: Option<f64>,
    pub gvd: Option<f64>,
    pub pump_phase: Option<f64>,
    pub pixel_size: Option<f64>,
    pub t_window: Option<f64>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(
                if key == "." { String::new() } else { key },
                e.inner().to_string(),
            )
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// File (or defaults), overrides, then validation.
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(over);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        set(&mut self.out, o.out.clone());
        if o.seed.is_some() {
            self.mc.seed = o.seed;
        }
        if o.threads.is_some() {
            self.mc.threads = o.threads;
        }
        set(&mut self.opa.sigma, o.sigma);
        set(&mut self.opa.delta0, o.delta0);
        set(&mut self.opa.gvm, o.gvm);
        set(&mut self.opa.gvd, o.gvd);
        set(&mut self.opa.pump_phase, o.pump_phase);
        set(&mut self.grid.delta, o.pixel_size);
        set(&mut self.grid.t_window, o.t_window);
        set(&mut self.mc.samples, o.samples);
        set(&mut self.quadrature.tol, o.tol);
    }

    pub fn validate(&self) -> Result<()> {
        self.opa().validate().map_err(keyed)?;
        self.grid().validate().map_err(keyed)?;
        self.quad().validate().map_err(keyed)?;
        if self.mc.samples < 2 {
            return Err(Error::config("mc.samples", "must be at least 2"));
        }
        if self.mc.threads == Some(0) {
            return Err(Error::config("mc.threads", "must be at least 1"));
        }
        if !(1..=4).contains(&self.compensation.degree) {
            return Err(Error::config("compensation.degree", "must be in 1..=4"));
        }
        if self.compensation.budget == 0 {
            return Err(Error::config("compensation.budget", "must be at least 1"));
        }
        Ok(())
    }

    pub fn opa(&self) -> OpaParams {
        let o = &self.opa;
        OpaParams {
            sigma: o.sigma,
            delta0: o.delta0,
            gvm: o.gvm,
            gvd: o.gvd,
            diffraction: o.diffraction,
            pump_phase: o.pump_phase,
            omega1: o.omega1,
            omega2: o.omega2,
            omega_p: o.omega_p,
        }
    }

    pub fn grid(&self) -> GridSpec {
        let g = &self.grid;
        let mut spec = GridSpec::new(g.delta, g.t_window, g.nx, g.ny, g.nt);
        spec.origin = g.origin;
        spec
    }

    pub fn quad(&self) -> QuadConfig {
        QuadConfig {
            tol: self.quadrature.tol,
            max_subdivisions: self.quadrature.max_subdivisions,
        }
    }

    /// Seed of a stochastic run; there is no fallback.
    pub fn seed(&self) -> Result<u64> {
        self.mc
            .seed
            .ok_or_else(|| Error::config("mc.seed", "required for stochastic subcommands"))
    }
}

fn keyed(e: holotel_core::Error) -> Error {
    match e {
        holotel_core::Error::InvalidParameter { name, reason } => Error::config(name, reason),
        other => other.into(),
    }
}
