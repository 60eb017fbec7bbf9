//! The non-`run` subcommands: geometry and solver convergence studies and
//! seed sweeps.

use std::fmt::Write as _;

use log::info;
use surfphase_core::forms::{assemble_a_c, assemble_mass};
use surfphase_core::linalg::solve;
use surfphase_core::{Discretization, Point3};

use crate::config::{SimulationConfig, SurfaceChoice};
use crate::error::{AppError, Result};
use crate::runner::{self, RunOptions};

pub const STUDY_LEVELS: [u32; 3] = [2, 3, 4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryRow {
    pub level: u32,
    pub h: f64,
    pub area: f64,
    /// `|Gamma_h| - |Gamma|` when the exact area is known, otherwise the
    /// difference to the next level (NaN on the last one).
    pub area_error: f64,
    /// Largest angle between a patch normal and the exact normal at the
    /// patch centroid.
    pub normal_error: f64,
}

pub fn geometry_study(cfg: &SimulationConfig, levels: &[u32]) -> Result<Vec<GeometryRow>> {
    let surface = cfg.surface();
    let mut rows = Vec::new();
    for &level in levels {
        let d = Discretization::new(surface.clone(), SimulationConfig { level, ..cfg.clone() }.geometry())?;
        let mut normal_error: f64 = 0.0;
        for p in &d.patches {
            let n = surface.normal(&p.centroid())?;
            normal_error = normal_error.max(p.normal.dot(&n).clamp(-1.0, 1.0).acos());
        }
        rows.push(GeometryRow { level, h: d.max_h(), area: d.area(), area_error: f64::NAN, normal_error });
    }
    match surface.exact_area() {
        Some(exact) => rows.iter_mut().for_each(|r| r.area_error = r.area - exact),
        None => {
            for i in 0..rows.len().saturating_sub(1) {
                rows[i].area_error = rows[i].area - rows[i + 1].area;
            }
        }
    }
    Ok(rows)
}

/// `log2(e_coarse / e_fine)` between consecutive entries.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0].abs() / w[1].abs()).log2()).collect()
}

pub fn geometry_table(rows: &[GeometryRow]) -> String {
    let area_orders = observed_orders(&rows.iter().map(|r| r.area_error).collect::<Vec<_>>());
    let normal_orders = observed_orders(&rows.iter().map(|r| r.normal_error).collect::<Vec<_>>());
    let mut s = String::from("level,h,area,area_error,area_order,normal_error,normal_order\n");
    for (i, r) in rows.iter().enumerate() {
        let order = |o: &[f64]| if i == 0 { String::new() } else { format!("{:.3}", o[i - 1]) };
        let _ = writeln!(
            s,
            "{},{:.6},{:.10},{:.3e},{},{:.3e},{}",
            r.level,
            r.h,
            r.area,
            r.area_error,
            order(&area_orders),
            r.normal_error,
            order(&normal_orders)
        );
    }
    s
}

/// Solves `(I - Laplace_G) u = 3 x1` on the unit sphere with the `a_c`
/// discretization at `eps = 1` and returns `||u_h - x1||` on `Gamma_h`.
/// The data and the exact solution are extended off the sphere along rays.
pub fn manufactured_error(cfg: &SimulationConfig, level: u32) -> Result<f64> {
    if cfg.surface != SurfaceChoice::Sphere {
        return Err(AppError::invalid("surface", "the manufactured solution needs the unit sphere"));
    }
    let d = Discretization::new(cfg.surface(), SimulationConfig { level, ..cfg.clone() }.geometry())?;
    let exact = |x: &Point3| x[0] / x.norm();
    let m = assemble_mass(&d, |_, _| 1.0);
    let a = assemble_a_c(&d, 1.0, &cfg.stab)?;
    let k = m.lin_comb(1.0, &a, 1.0);
    let mut rhs = vec![0.0; d.p1.n_dofs()];
    for (pi, q, w) in d.surface_points() {
        let pq = &d.quad[pi];
        let f = 3.0 * exact(&pq.points[q]);
        for (i, &n) in d.p1.tet_nodes(pq.active_index).iter().enumerate() {
            rhs[n] += w * f * pq.p1[q][i];
        }
    }
    let u = solve(&k, &rhs, &cfg.linalg)?.x;
    let err = d.integrate(|pi, q| (d.p1_value(&u, pi, q) - exact(&d.quad[pi].points[q])).powi(2));
    Ok(err.sqrt())
}

pub fn convergence_table(cfg: &SimulationConfig, levels: &[u32]) -> Result<(Vec<f64>, String)> {
    let errors = levels.iter().map(|&l| manufactured_error(cfg, l)).collect::<Result<Vec<_>>>()?;
    let orders = observed_orders(&errors);
    let mut s = String::from("level,l2_error,order\n");
    for (i, (l, e)) in levels.iter().zip(&errors).enumerate() {
        let order = if i == 0 { String::new() } else { format!("{:.3}", orders[i - 1]) };
        let _ = writeln!(s, "{l},{e:.6e},{order}");
    }
    Ok((errors, s))
}

/// Runs seeds `0..n` and averages the Lyapunov energy over the runs at the
/// output times (multiples of `output.every_t` and the final time).
pub fn seed_sweep(cfg: &SimulationConfig, n: u64, max_steps: Option<usize>) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(AppError::invalid("--n", "must be at least 1"));
    }
    let on_grid = |t: f64| t == cfg.t_end || (t / cfg.every_t).round() * cfg.every_t == t;
    let mut sums: Vec<(f64, f64, u64)> = Vec::new();
    for seed in 0..n {
        let run_cfg = SimulationConfig { seed, ..cfg.clone() };
        let opts = RunOptions { max_steps, snapshots: false, diag_name: format!("diag_seed{seed}.csv") };
        let report = runner::run(&run_cfg, &opts)?;
        info!("seed {seed}: {} steps", report.accepted);
        for row in report.rows.iter().filter(|r| on_grid(r.t)) {
            match sums.iter_mut().find(|s| s.0 == row.t) {
                Some(s) => {
                    s.1 += row.e_lyap;
                    s.2 += 1;
                }
                None => sums.push((row.t, row.e_lyap, 1)),
            }
        }
    }
    sums.sort_by(|a, b| a.0.total_cmp(&b.0));
    // a time only counts if every run reached it
    let mean: Vec<(f64, f64)> = sums.iter().filter(|s| s.2 == n).map(|s| (s.0, s.1 / n as f64)).collect();
    let mut text = format!("# config_hash {} runs {n}\nt,mean_E_lyap\n", cfg.hash());
    for (t, e) in &mean {
        let _ = writeln!(text, "{t:?},{e:?}");
    }
    let path = cfg.output_dir.join("mean_energy.csv");
    std::fs::write(&path, text).map_err(|e| AppError::io(&path, e))?;
    Ok(mean)
}
