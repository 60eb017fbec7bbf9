//! `section.key = value` configuration files.
//!
//! Every key has a default, so an empty file is a valid configuration. The
//! canonical rendering (all keys, sorted, shortest round-trip floats) is what
//! gets hashed into output headers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use surfphase_core::ch::{AdaptiveController, MobilityModel, PotentialParams};
use surfphase_core::forms::StabilizationParams;
use surfphase_core::linalg::SolverOptions;
use surfphase_core::nsch::MixtureParams;
use surfphase_core::{BoundingBox, GeometryOptions, LevelSetSurface};

use crate::error::{AppError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceChoice {
    Sphere,
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelChoice {
    Ch,
    Nsch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub surface: SurfaceChoice,
    pub torus_r: f64,
    pub torus_r_min: f64,
    pub torus_r_max: f64,

    pub level: u32,
    pub extra_surface_levels: u32,
    pub box_half_width: f64,

    pub model: ModelChoice,
    pub epsilon: f64,
    pub diffusivity: f64,
    pub gamma_c: f64,
    /// `None` picks degenerate for CH and constant for NSCH.
    pub mobility: Option<MobilityModel>,
    pub constant_mobility: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub sigma_gamma: f64,

    pub ic_a: f64,
    pub seed: u64,

    pub t_end: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub tol_dt: f64,
    pub adaptive: bool,

    pub stab: StabilizationParams,
    pub linalg: SolverOptions,
    pub surface_order: u32,
    pub volume_order: u32,
    pub use_exact_normals: bool,

    pub output_dir: PathBuf,
    pub every_t: f64,
    /// Real timings in `diag.csv`; off by default so logs are reproducible.
    pub wall_clock: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let ctl = AdaptiveController::default();
        Self {
            surface: SurfaceChoice::Sphere,
            torus_r: 1.0,
            torus_r_min: 0.3,
            torus_r_max: 0.6,
            level: 3,
            extra_surface_levels: 0,
            box_half_width: 5.0 / 3.0,
            model: ModelChoice::Ch,
            epsilon: 0.02,
            diffusivity: 0.02,
            gamma_c: 1.0,
            mobility: None,
            constant_mobility: 0.02,
            rho1: 3.0,
            rho2: 1.0,
            eta1: 0.01,
            eta2: 0.0008,
            sigma_gamma: 0.04,
            ic_a: 0.5,
            seed: 0,
            t_end: 1.0,
            dt0: 1e-3,
            dt_min: ctl.dt_min,
            dt_max: ctl.dt_max,
            tol_dt: ctl.tol,
            adaptive: true,
            stab: StabilizationParams::default(),
            linalg: SolverOptions::default(),
            surface_order: 4,
            volume_order: 2,
            use_exact_normals: false,
            output_dir: PathBuf::from("out"),
            every_t: 1.0,
            wall_clock: false,
        }
    }
}

const KEYS: &[&str] = &[
    "surface",
    "torus.R",
    "torus.r_min",
    "torus.r_max",
    "mesh.level",
    "mesh.extra_surface_levels",
    "mesh.box_half_width",
    "model",
    "phys.epsilon",
    "phys.D",
    "phys.gamma_c",
    "phys.mobility",
    "phys.M",
    "phys.rho1",
    "phys.rho2",
    "phys.eta1",
    "phys.eta2",
    "phys.sigma_gamma",
    "ic.a",
    "ic.seed",
    "time.T",
    "time.dt0",
    "time.dt_min",
    "time.dt_max",
    "time.tol_dt",
    "time.adaptive",
    "stab.tau_mu_scale",
    "stab.tau_c_scale",
    "stab.tau_scale",
    "stab.beta_u_scale",
    "stab.beta_p_scale",
    "stab.grad_div",
    "linalg.rtol",
    "linalg.max_iter",
    "linalg.direct_threshold",
    "quadrature.surface_order",
    "quadrature.volume_order",
    "geometry.use_exact_normals",
    "output.dir",
    "output.every_t",
    "output.wall_clock",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| AppError::invalid(key, format!("cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(AppError::invalid(key, format!("expected true or false, got {value:?}"))),
    }
}

fn mobility_name(m: MobilityModel) -> &'static str {
    match m {
        MobilityModel::Degenerate => "degenerate",
        MobilityModel::Constant => "constant",
    }
}

impl SimulationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(AppError::Parse { line: i + 1, msg: format!("expected `key = value`, got {line:?}") });
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(AppError::Parse { line: i + 1, msg: format!("duplicate key `{key}`") });
            }
            cfg.set(key, value).map_err(|e| match e {
                AppError::Invalid { key, msg } => AppError::Parse { line: i + 1, msg: format!("`{key}`: {msg}") },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "surface" => {
                self.surface = match v {
                    "sphere" => SurfaceChoice::Sphere,
                    "torus" => SurfaceChoice::Torus,
                    _ => return Err(AppError::invalid(key, format!("expected sphere or torus, got {v:?}"))),
                }
            }
            "torus.R" => self.torus_r = parse_value(key, v)?,
            "torus.r_min" => self.torus_r_min = parse_value(key, v)?,
            "torus.r_max" => self.torus_r_max = parse_value(key, v)?,
            "mesh.level" => self.level = parse_value(key, v)?,
            "mesh.extra_surface_levels" => self.extra_surface_levels = parse_value(key, v)?,
            "mesh.box_half_width" => self.box_half_width = parse_value(key, v)?,
            "model" => {
                self.model = match v {
                    "ch" => ModelChoice::Ch,
                    "nsch" => ModelChoice::Nsch,
                    _ => return Err(AppError::invalid(key, format!("expected ch or nsch, got {v:?}"))),
                }
            }
            "phys.epsilon" => self.epsilon = parse_value(key, v)?,
            "phys.D" => self.diffusivity = parse_value(key, v)?,
            "phys.gamma_c" => self.gamma_c = parse_value(key, v)?,
            "phys.mobility" => {
                self.mobility = Some(match v {
                    "degenerate" => MobilityModel::Degenerate,
                    "constant" => MobilityModel::Constant,
                    _ => return Err(AppError::invalid(key, format!("expected degenerate or constant, got {v:?}"))),
                })
            }
            "phys.M" => self.constant_mobility = parse_value(key, v)?,
            "phys.rho1" => self.rho1 = parse_value(key, v)?,
            "phys.rho2" => self.rho2 = parse_value(key, v)?,
            "phys.eta1" => self.eta1 = parse_value(key, v)?,
            "phys.eta2" => self.eta2 = parse_value(key, v)?,
            "phys.sigma_gamma" => self.sigma_gamma = parse_value(key, v)?,
            "ic.a" => self.ic_a = parse_value(key, v)?,
            "ic.seed" => self.seed = parse_value(key, v)?,
            "time.T" => self.t_end = parse_value(key, v)?,
            "time.dt0" => self.dt0 = parse_value(key, v)?,
            "time.dt_min" => self.dt_min = parse_value(key, v)?,
            "time.dt_max" => self.dt_max = parse_value(key, v)?,
            "time.tol_dt" => self.tol_dt = parse_value(key, v)?,
            "time.adaptive" => self.adaptive = parse_bool(key, v)?,
            "stab.tau_mu_scale" => self.stab.tau_mu_scale = parse_value(key, v)?,
            "stab.tau_c_scale" => self.stab.tau_c_scale = parse_value(key, v)?,
            "stab.tau_scale" => self.stab.tau_scale = parse_value(key, v)?,
            "stab.beta_u_scale" => self.stab.beta_u_scale = parse_value(key, v)?,
            "stab.beta_p_scale" => self.stab.beta_p_scale = parse_value(key, v)?,
            "stab.grad_div" => self.stab.grad_div = parse_value(key, v)?,
            "linalg.rtol" => self.linalg.rtol = parse_value(key, v)?,
            "linalg.max_iter" => self.linalg.max_iter = parse_value(key, v)?,
            "linalg.direct_threshold" => self.linalg.direct_threshold = parse_value(key, v)?,
            "quadrature.surface_order" => self.surface_order = parse_value(key, v)?,
            "quadrature.volume_order" => self.volume_order = parse_value(key, v)?,
            "geometry.use_exact_normals" => self.use_exact_normals = parse_bool(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "output.every_t" => self.every_t = parse_value(key, v)?,
            "output.wall_clock" => self.wall_clock = parse_bool(key, v)?,
            _ => return Err(AppError::invalid(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("torus.R", self.torus_r),
            ("torus.r_min", self.torus_r_min),
            ("mesh.box_half_width", self.box_half_width),
            ("phys.epsilon", self.epsilon),
            ("phys.D", self.diffusivity),
            ("phys.gamma_c", self.gamma_c),
            ("phys.M", self.constant_mobility),
            ("phys.rho2", self.rho2),
            ("phys.eta1", self.eta1),
            ("phys.eta2", self.eta2),
            ("time.dt0", self.dt0),
            ("time.dt_min", self.dt_min),
            ("time.tol_dt", self.tol_dt),
            ("stab.tau_mu_scale", self.stab.tau_mu_scale),
            ("stab.tau_c_scale", self.stab.tau_c_scale),
            ("stab.tau_scale", self.stab.tau_scale),
            ("stab.beta_u_scale", self.stab.beta_u_scale),
            ("stab.beta_p_scale", self.stab.beta_p_scale),
            ("linalg.rtol", self.linalg.rtol),
            ("output.every_t", self.every_t),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AppError::invalid(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.rho1 >= self.rho2) {
            return Err(AppError::invalid("phys.rho1", format!("must be >= phys.rho2, got {}", self.rho1)));
        }
        if !(self.sigma_gamma >= 0.0) {
            return Err(AppError::invalid("phys.sigma_gamma", format!("must be non-negative, got {}", self.sigma_gamma)));
        }
        if !(self.stab.grad_div >= 0.0) {
            return Err(AppError::invalid("stab.grad_div", format!("must be non-negative, got {}", self.stab.grad_div)));
        }
        if !(self.torus_r_max >= self.torus_r_min) {
            return Err(AppError::invalid("torus.r_max", "must be >= torus.r_min"));
        }
        if !(self.torus_r_max < self.torus_r) {
            return Err(AppError::invalid("torus.r_max", "must be smaller than torus.R"));
        }
        if !(0.0..=1.0).contains(&self.ic_a) {
            return Err(AppError::invalid("ic.a", format!("must lie in [0, 1], got {}", self.ic_a)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(AppError::invalid("time.T", format!("must be non-negative, got {}", self.t_end)));
        }
        if !(self.dt_max >= self.dt_min) {
            return Err(AppError::invalid("time.dt_max", "must be >= time.dt_min"));
        }
        if self.linalg.max_iter == 0 {
            return Err(AppError::invalid("linalg.max_iter", "must be positive"));
        }
        if self.level > 7 {
            return Err(AppError::invalid("mesh.level", format!("{} is beyond what fits in memory", self.level)));
        }
        self.potential().validate().map_err(|e| AppError::invalid("phys", e.to_string()))?;
        Ok(())
    }

    pub fn surface(&self) -> LevelSetSurface {
        match self.surface {
            SurfaceChoice::Sphere => LevelSetSurface::unit_sphere(),
            SurfaceChoice::Torus => LevelSetSurface::asymmetric_torus(self.torus_r, self.torus_r_min, self.torus_r_max),
        }
    }

    pub fn geometry(&self) -> GeometryOptions {
        GeometryOptions {
            level: self.level,
            extra_surface_levels: self.extra_surface_levels,
            bbox: BoundingBox::centered(self.box_half_width),
            surface_order: self.surface_order,
            volume_order: self.volume_order,
            use_exact_normals: self.use_exact_normals,
        }
    }

    pub fn mobility_model(&self) -> MobilityModel {
        self.mobility.unwrap_or(match self.model {
            ModelChoice::Ch => MobilityModel::Degenerate,
            ModelChoice::Nsch => MobilityModel::Constant,
        })
    }

    pub fn potential(&self) -> PotentialParams {
        let mobility_scale = match self.model {
            ModelChoice::Ch => self.diffusivity,
            ModelChoice::Nsch => self.constant_mobility,
        };
        PotentialParams { epsilon: self.epsilon, mobility_scale, mobility: self.mobility_model(), gamma_c: self.gamma_c }
    }

    pub fn mixture(&self) -> MixtureParams {
        MixtureParams {
            rho1: self.rho1,
            rho2: self.rho2,
            eta1: self.eta1,
            eta2: self.eta2,
            sigma_gamma: self.sigma_gamma,
        }
    }

    pub fn controller(&self) -> Option<AdaptiveController> {
        self.adaptive.then_some(AdaptiveController { tol: self.tol_dt, dt_min: self.dt_min, dt_max: self.dt_max })
    }

    fn value_of(&self, key: &str) -> String {
        let f = |v: f64| format!("{v:?}");
        match key {
            "surface" => match self.surface {
                SurfaceChoice::Sphere => "sphere".into(),
                SurfaceChoice::Torus => "torus".into(),
            },
            "torus.R" => f(self.torus_r),
            "torus.r_min" => f(self.torus_r_min),
            "torus.r_max" => f(self.torus_r_max),
            "mesh.level" => self.level.to_string(),
            "mesh.extra_surface_levels" => self.extra_surface_levels.to_string(),
            "mesh.box_half_width" => f(self.box_half_width),
            "model" => match self.model {
                ModelChoice::Ch => "ch".into(),
                ModelChoice::Nsch => "nsch".into(),
            },
            "phys.epsilon" => f(self.epsilon),
            "phys.D" => f(self.diffusivity),
            "phys.gamma_c" => f(self.gamma_c),
            "phys.mobility" => mobility_name(self.mobility_model()).into(),
            "phys.M" => f(self.constant_mobility),
            "phys.rho1" => f(self.rho1),
            "phys.rho2" => f(self.rho2),
            "phys.eta1" => f(self.eta1),
            "phys.eta2" => f(self.eta2),
            "phys.sigma_gamma" => f(self.sigma_gamma),
            "ic.a" => f(self.ic_a),
            "ic.seed" => self.seed.to_string(),
            "time.T" => f(self.t_end),
            "time.dt0" => f(self.dt0),
            "time.dt_min" => f(self.dt_min),
            "time.dt_max" => f(self.dt_max),
            "time.tol_dt" => f(self.tol_dt),
            "time.adaptive" => self.adaptive.to_string(),
            "stab.tau_mu_scale" => f(self.stab.tau_mu_scale),
            "stab.tau_c_scale" => f(self.stab.tau_c_scale),
            "stab.tau_scale" => f(self.stab.tau_scale),
            "stab.beta_u_scale" => f(self.stab.beta_u_scale),
            "stab.beta_p_scale" => f(self.stab.beta_p_scale),
            "stab.grad_div" => f(self.stab.grad_div),
            "linalg.rtol" => f(self.linalg.rtol),
            "linalg.max_iter" => self.linalg.max_iter.to_string(),
            "linalg.direct_threshold" => self.linalg.direct_threshold.to_string(),
            "quadrature.surface_order" => self.surface_order.to_string(),
            "quadrature.volume_order" => self.volume_order.to_string(),
            "geometry.use_exact_normals" => self.use_exact_normals.to_string(),
            "output.dir" => self.output_dir.display().to_string(),
            "output.every_t" => f(self.every_t),
            "output.wall_clock" => self.wall_clock.to_string(),
            _ => unreachable!("unlisted key {key}"),
        }
    }

    /// All keys with their effective values, one `key = value` per line.
    pub fn canonical(&self) -> String {
        let mut keys = KEYS.to_vec();
        keys.sort_unstable();
        let mut s = String::new();
        for k in keys {
            let _ = writeln!(s, "{k} = {}", self.value_of(k));
        }
        s
    }

    /// First 16 hex digits of the SHA-256 of the physics-relevant part of
    /// [`canonical`](Self::canonical). Output location and timing switches
    /// are left out so moving a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for line in self.canonical().lines().filter(|l| !l.starts_with("output.")) {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(&h.finalize()[..8])
    }
}
