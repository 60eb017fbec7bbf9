//! Drives one simulation from a config and writes its artifacts:
//! `diag.csv`, `snap_<t>.vtk` files and `manifest.txt`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use surfphase_core::ch::{bernoulli_ic, ChSolver};
use surfphase_core::nsch::{NschSolver, NschState};
use surfphase_core::simulation::{Diagnostics, Model, Schedule};
use surfphase_core::Discretization;

use crate::config::{ModelChoice, SimulationConfig};
use crate::error::{AppError, Result};
use crate::vtk::{sample_state, write_vtk_surface};

pub const DIAG_COLUMNS: &str = "t,dt,E_lyap,mass,E_kin,u_normal_l2,div_l2,res_step1,res_step2,wall_ms";

pub fn discretize(cfg: &SimulationConfig) -> Result<Discretization> {
    Ok(Discretization::new(cfg.surface(), cfg.geometry())?)
}

pub fn build_model<'a>(cfg: &SimulationConfig, d: &'a Discretization) -> Result<Model<'a>> {
    Ok(match cfg.model {
        ModelChoice::Ch => Model::CahnHilliard(ChSolver::new(d, cfg.potential(), cfg.stab, cfg.linalg)?),
        ModelChoice::Nsch => Model::NavierStokesCahnHilliard(NschSolver::new(
            d,
            cfg.potential(),
            cfg.mixture(),
            cfg.stab,
            cfg.linalg,
        )?),
    })
}

pub fn schedule(cfg: &SimulationConfig, max_steps: Option<usize>) -> Schedule {
    Schedule {
        t_end: cfg.t_end,
        dt0: cfg.dt0,
        adaptive: cfg.controller(),
        max_steps,
        stop_every: Some(cfg.every_t),
    }
}

/// What to write besides `diag.csv`.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub max_steps: Option<usize>,
    pub snapshots: bool,
    /// File name of the diagnostics log inside `output.dir`.
    pub diag_name: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { max_steps: None, snapshots: true, diag_name: "diag.csv".into() }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub accepted: usize,
    pub rejected: usize,
    pub final_state: NschState,
    pub diag_path: PathBuf,
    pub snapshots: Vec<(f64, String)>,
    /// Every logged row, the initial state first.
    pub rows: Vec<Diagnostics>,
}

fn csv_row(d: &Diagnostics, wall_clock: bool) -> String {
    let wall = if wall_clock { d.wall_ms } else { 0.0 };
    format!(
        "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
        d.t, d.dt, d.e_lyap, d.mass, d.e_kin, d.u_normal_l2, d.div_l2, d.res_step1, d.res_step2, wall
    )
}

/// `t,E_lyap` pairs from a diag file written by [`run`].
pub fn read_energy_log(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let bad = || AppError::invalid("diag", format!("{} is not a diagnostics log", path.display()));
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let mut cols = line.split(',');
        let t: f64 = cols.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let e: f64 = cols.nth(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        out.push((t, e));
    }
    Ok(out)
}

struct Manifest {
    path: PathBuf,
    run_id: String,
    hash: String,
    entries: Vec<(f64, String)>,
}

impl Manifest {
    /// Rewrites the whole manifest through a temporary file and a rename.
    fn save(&self) -> Result<()> {
        let mut s = format!("# run_id {}\n# config_hash {}\nt,file\n", self.run_id, self.hash);
        for (t, f) in &self.entries {
            s.push_str(&format!("{t:?},{f}\n"));
        }
        let tmp = self.path.with_extension("txt.tmp");
        std::fs::write(&tmp, s).map_err(|e| AppError::io(&tmp, e))?;
        std::fs::rename(&tmp, &self.path).map_err(|e| AppError::io(&self.path, e))
    }
}

pub fn run(cfg: &SimulationConfig, opts: &RunOptions) -> Result<RunReport> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let hash = cfg.hash();
    let d = discretize(cfg)?;
    info!("{d:?}");
    let model = build_model(cfg, &d)?;
    let c0 = bernoulli_ic(&d.p1, cfg.ic_a, cfg.seed)?.values;

    let diag_path = dir.join(&opts.diag_name);
    let file = File::create(&diag_path).map_err(|e| AppError::io(&diag_path, e))?;
    let mut diag = BufWriter::new(file);
    let io = |e| AppError::io(&diag_path, e);
    writeln!(diag, "# config_hash {hash} seed {}", cfg.seed).map_err(io)?;
    writeln!(diag, "{DIAG_COLUMNS}").map_err(io)?;

    let mut manifest = Manifest {
        path: dir.join("manifest.txt"),
        run_id: format!("{hash}-seed{}", cfg.seed),
        hash: hash.clone(),
        entries: Vec::new(),
    };
    let mut rows = Vec::new();
    let every = cfg.every_t;
    let mut next_snap = 0.0;
    let snapshot = |state: &NschState, manifest: &mut Manifest| -> Result<()> {
        let mut name = format!("snap_{:.4}.vtk", state.t);
        if manifest.entries.iter().any(|(_, f)| *f == name) {
            name = format!("snap_{:.4}_{}.vtk", state.t, manifest.entries.len());
        }
        let (tris, fields) = sample_state(&d, state);
        let title = format!("surfphase t={:?} config_hash={hash}", state.t);
        write_vtk_surface(&dir.join(&name), &title, &tris, &fields)?;
        manifest.entries.push((state.t, name));
        manifest.save()
    };

    // the observer can only return core errors, so output failures are
    // parked here and surfaced after the run stops
    let mut failure = None;
    let summary = model.run(model.initial_state(c0), &schedule(cfg, opts.max_steps), |state, row| {
        let mut record = || -> Result<()> {
            writeln!(diag, "{}", csv_row(row, cfg.wall_clock)).and_then(|_| diag.flush()).map_err(io)?;
            rows.push(*row);
            if opts.snapshots && state.t >= next_snap - 1e-9 * every {
                snapshot(state, &mut manifest)?;
                next_snap = ((state.t + 1e-9 * every) / every).floor() * every + every;
            }
            Ok(())
        };
        record().map_err(|e| {
            failure = Some(e);
            surfphase_core::Error::Config("output failed".into())
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let summary = summary?;
    if opts.snapshots && manifest.entries.last().is_some_and(|(t, _)| *t != summary.state.t) {
        snapshot(&summary.state, &mut manifest)?;
    }
    Ok(RunReport {
        accepted: summary.accepted,
        rejected: summary.rejected,
        final_state: summary.state,
        diag_path,
        snapshots: manifest.entries,
        rows,
    })
}
