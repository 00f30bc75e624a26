//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use holotel_core::{
    added_noise_covariance, apply_compensation, diagonal_scan, ellipse, ellipse_dispersion_scan,
    optimize_compensation, Cell, CellPair, CompensationProfile, Field, GridSpec, SpectralPoint,
};

use crate::config::{Overrides, RunConfig};
use crate::error::{Error, Result};
use crate::formats::{self, write_csv};
use crate::mc::{estimate_sweep, McCase, SpectralGrid};
use crate::pgm::Encoding;
use crate::teleport::{grid_for, load_stack, teleport};

#[derive(Debug, Parser)]
#[command(
    name = "holotel",
    version,
    about = "Holographic teleportation noise analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub delta0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gvm: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gvd: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pump_phase: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pixel_size: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t_window: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tol: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            threads: self.threads,
            sigma: self.sigma,
            delta0: self.delta0,
            gvm: self.gvm,
            gvd: self.gvd,
            pump_phase: self.pump_phase,
            pixel_size: self.pixel_size,
            t_window: self.t_window,
            samples: self.samples,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Field-2 ellipse orientation and squeezing versus frequency.
    Ellipse {
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        omega_min: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        omega_max: f64,
        #[arg(long, default_value_t = 201)]
        count: usize,
    },
    /// Diagonal added noise over pixel sizes and observation times.
    Scan {
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50")]
        deltas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "10,1,0.1")]
        t_values: Vec<f64>,
        /// Compensation profile JSON.
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Added-noise covariance of every cell pair of the grid.
    Covariance {
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Monte Carlo estimate against the quadrature covariance.
    McValidate {
        #[arg(long, value_delimiter = ',', default_value = "0,1.0471975511965976")]
        phis: Vec<f64>,
    },
    /// Optimizes a dispersive compensation profile.
    Compensate {
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Teleports a PGM image (one file per time bin).
    Teleport {
        #[arg(long, required = true, value_name = "PATH")]
        image: Vec<PathBuf>,
        /// Mean photon number of a full-scale pixel.
        #[arg(long, default_value_t = 100.0)]
        scale: f64,
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
}

/// Outcome of a successful run: artifacts written, and whether a
/// validation step passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub passed: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Core(holotel_core::Error::QuadratureNotConverged { .. }) => 3,
        _ => 2,
    }
}

/// Unordered cell pairs of a grid, each once.
pub fn grid_pairs(grid: &GridSpec) -> Vec<CellPair> {
    let cells: Vec<Cell> = (0..grid.nt)
        .flat_map(|b| (0..grid.pixels()).map(move |p| Cell::new(p, b)))
        .collect();
    let mut pairs = Vec::new();
    for (i, &a) in cells.iter().enumerate() {
        for &b in &cells[i..] {
            pairs.push(CellPair::new(a, b));
        }
    }
    pairs
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.overrides())?;
    let stochastic = matches!(
        cli.command,
        Command::McValidate { .. } | Command::Teleport { .. }
    );
    if stochastic {
        cfg.seed()?;
    }
    match cfg.mc.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("mc.threads", e.to_string()))?
            .install(|| dispatch(&cli.command, &cfg)),
        None => dispatch(&cli.command, &cfg),
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(cfg.out.join(name))
}

fn profile(path: Option<&Path>) -> Result<Option<CompensationProfile>> {
    path.map(formats::read_profile).transpose()
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.opa();
    let grid = cfg.grid();
    let quad = cfg.quad();
    let mut artifacts = Vec::new();
    let mut passed = true;
    match cmd {
        Command::Ellipse {
            omega_min,
            omega_max,
            count,
        } => {
            let rows = ellipse_dispersion_scan(&params, *omega_min, *omega_max, *count)?;
            let path = out_path(cfg, "ellipse.csv")?;
            write_csv(
                &path,
                &formats::ELLIPSE_HEADER,
                &formats::ellipse_rows(&rows),
            )?;
            artifacts.push(path);
        }
        Command::Scan {
            deltas,
            t_values,
            profile: p,
        } => {
            let comp = profile(p.as_deref())?;
            let rows = diagonal_scan(&params, deltas, t_values, comp.as_ref(), &quad)?;
            let path = out_path(cfg, "scan.csv")?;
            write_csv(&path, &formats::SCAN_HEADER, &formats::scan_rows(&rows))?;
            artifacts.push(path);
        }
        Command::Covariance { profile: p } => {
            let comp = profile(p.as_deref())?;
            let table =
                added_noise_covariance(&params, &grid, &grid_pairs(&grid), comp.as_ref(), &quad)?;
            let path = out_path(cfg, "covariance.csv")?;
            write_csv(
                &path,
                &formats::COVARIANCE_HEADER,
                &formats::covariance_rows(&table),
            )?;
            artifacts.push(path);
        }
        Command::McValidate { phis } => {
            let pairs = grid_pairs(&grid);
            let exact = added_noise_covariance(&params, &grid, &pairs, None, &quad)?;
            let c_diag = exact
                .entries
                .iter()
                .filter(|e| e.pair.a == e.pair.b)
                .map(|e| e.value.abs())
                .fold(0.0, f64::max);
            let case = McCase {
                params,
                comp: None,
                grid,
                pairs: pairs.clone(),
                phis: phis.clone(),
            };
            let lattice = SpectralGrid::for_grid(&grid)?;
            let tables = estimate_sweep(&lattice, &[case], cfg.mc.samples, cfg.seed()?)?;
            let mut rows = Vec::new();
            for (phi, table) in phis.iter().zip(&tables[0]) {
                for (q, m) in exact.entries.iter().zip(&table.entries) {
                    let se = m.stderr.unwrap_or(0.0);
                    let quad_err = quad.tol * q.value.abs().max(c_diag);
                    let combined = (se * se + quad_err * quad_err).sqrt();
                    let ok = (m.value - q.value).abs() <= 3.0 * combined;
                    passed &= ok;
                    rows.push(vec![
                        q.pair.a.pixel.to_string(),
                        q.pair.a.bin.to_string(),
                        q.pair.b.pixel.to_string(),
                        q.pair.b.bin.to_string(),
                        format!("{phi}"),
                        format!("{}", q.value),
                        format!("{}", m.value),
                        format!("{se}"),
                        if ok { "pass" } else { "fail" }.to_string(),
                    ]);
                }
            }
            let path = out_path(cfg, "mc_validate.csv")?;
            write_csv(
                &path,
                &[
                    "j", "i", "jp", "ip", "phi", "c_quad", "c_mc", "stderr", "result",
                ],
                &rows,
            )?;
            artifacts.push(path);
        }
        Command::Compensate { degree, budget } => {
            let degree = degree.unwrap_or(cfg.compensation.degree);
            let budget = budget.unwrap_or(cfg.compensation.budget);
            let single = GridSpec::single(grid.delta, grid.t_window);
            let run = optimize_compensation(&params, &single, degree, budget, &quad)?;
            let json = out_path(cfg, "profile.json")?;
            formats::write_profile(&json, &run.profile)?;
            artifacts.push(json);

            let summary = out_path(cfg, "compensation.csv")?;
            write_csv(
                &summary,
                &["case", "c_diag"],
                &[
                    vec!["uncompensated".into(), format!("{}", run.uncompensated)],
                    vec!["compensated".into(), format!("{}", run.objective)],
                ],
            )?;
            artifacts.push(summary);

            let count = 201;
            let rows: Vec<Vec<String>> = (0..count)
                .map(|k| {
                    let omega = -5.0 + 10.0 * k as f64 / (count - 1) as f64;
                    let before = ellipse(&params, Field::Two, SpectralPoint::temporal(omega));
                    let after = apply_compensation(before, &run.profile, omega);
                    vec![
                        format!("{omega}"),
                        format!("{}", before.psi),
                        format!("{}", after.psi),
                    ]
                })
                .collect();
            let curve = out_path(cfg, "compensation_ellipse.csv")?;
            write_csv(&curve, &["omega", "psi_before", "psi_after"], &rows)?;
            artifacts.push(curve);
        }
        Command::Teleport {
            image,
            scale,
            profile: p,
        } => {
            let comp = profile(p.as_deref())?;
            let paths: Vec<&Path> = image.iter().map(PathBuf::as_path).collect();
            let plane = load_stack(&paths, *scale)?;
            let mut tgrid = grid_for(&plane, grid.delta, grid.t_window);
            tgrid.origin = grid.origin;
            let result = teleport(
                &plane,
                &params,
                comp.as_ref(),
                &tgrid,
                &quad,
                cfg.seed()?,
                cfg.mc.samples,
            )?;
            for (label, img) in [("mean", &result.mean), ("sample", &result.sample)] {
                for bin in 0..img.nt {
                    let name = if img.nt == 1 {
                        format!("{label}.pgm")
                    } else {
                        format!("{label}_{bin:03}.pgm")
                    };
                    let path = out_path(cfg, &name)?;
                    img.to_gray(bin).write(&path, Encoding::Raw)?;
                    artifacts.push(path);
                }
            }
            let path = out_path(cfg, "fidelity.csv")?;
            write_csv(
                &path,
                &formats::FIDELITY_HEADER,
                &formats::fidelity_rows(&tgrid, result.c_diag, &result.fidelity),
            )?;
            artifacts.push(path);
        }
    }
    Ok(Outcome { artifacts, passed })
}
