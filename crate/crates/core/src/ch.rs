//! Linear, stabilized BDF1 time stepping for the surface Cahn-Hilliard model.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::fespace::{DofMap, FieldVector, SpaceKind};
use crate::forms::{assemble_a_c, assemble_a_mu, assemble_mass, StabilizationParams};
use crate::linalg::{solve_cached, CsrMatrix, SolverOptions, SymbolicCache};

/// `f0(c) = c^2 (1 - c)^2 / 4`.
pub fn double_well(c: f64) -> f64 {
    0.25 * c * c * (1.0 - c) * (1.0 - c)
}

/// `f0'(c) = c (1 - c)(1 - 2c) / 2`.
pub fn dwell_prime(c: f64) -> f64 {
    0.5 * c * (1.0 - c) * (1.0 - 2.0 * c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MobilityModel {
    /// `D max(c (1 - c), 0)` with the concentration of the previous step.
    Degenerate,
    /// The constant `D`.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialParams {
    pub epsilon: f64,
    /// Mobility scale `D` (or the constant mobility `M`).
    pub mobility_scale: f64,
    pub mobility: MobilityModel,
    pub gamma_c: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self { epsilon: 0.02, mobility_scale: 0.02, mobility: MobilityModel::Degenerate, gamma_c: 1.0 }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.mobility_scale > 0.0) {
            return Err(Error::Config(format!("mobility must be positive, got {}", self.mobility_scale)));
        }
        if !(self.gamma_c >= 0.0) {
            return Err(Error::Config(format!("gamma_c must be non-negative, got {}", self.gamma_c)));
        }
        Ok(())
    }

    /// Mobility at a given (lagged) concentration.
    pub fn mobility_at(&self, c: f64) -> f64 {
        match self.mobility {
            MobilityModel::Constant => self.mobility_scale,
            MobilityModel::Degenerate => {
                let c = c.clamp(0.0, 1.0);
                self.mobility_scale * (c * (1.0 - c)).max(0.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChState {
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
    pub t: f64,
}

impl ChState {
    pub fn new(c: Vec<f64>) -> Self {
        let mu = vec![0.0; c.len()];
        Self { c, mu, t: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ChStepResult {
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
    pub residual: f64,
}

/// Assembles and solves one step of the split Cahn-Hilliard system. The
/// mass matrix and `a_c` are assembled once; `a_mu` depends on the lagged
/// concentration when the mobility is degenerate.
pub struct ChSolver<'a> {
    pub disc: &'a Discretization,
    pub params: PotentialParams,
    pub stab: StabilizationParams,
    pub solver: SolverOptions,
    mass: CsrMatrix,
    a_c: CsrMatrix,
    a_mu_constant: Option<CsrMatrix>,
    lu_cache: SymbolicCache,
}

impl<'a> ChSolver<'a> {
    pub fn new(
        disc: &'a Discretization,
        params: PotentialParams,
        stab: StabilizationParams,
        solver: SolverOptions,
    ) -> Result<Self> {
        params.validate()?;
        let mass = assemble_mass(disc, |_, _| 1.0);
        let a_c = assemble_a_c(disc, params.epsilon, &stab)?;
        let a_mu_constant = match params.mobility {
            MobilityModel::Constant => Some(assemble_a_mu(disc, |_, _| params.mobility_scale, &stab)?),
            MobilityModel::Degenerate => None,
        };
        Ok(Self { disc, params, stab, solver, mass, a_c, a_mu_constant, lu_cache: SymbolicCache::default() })
    }

    pub fn mass_matrix(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn a_mu(&self, c: &[f64]) -> Result<CsrMatrix> {
        match &self.a_mu_constant {
            Some(a) => Ok(a.clone()),
            None => assemble_a_mu(self.disc, |pi, q| self.params.mobility_at(self.disc.p1_value(c, pi, q)), &self.stab),
        }
    }

    /// `F_i = int f0'(c) phi_i ds`.
    fn potential_load(&self, c: &[f64]) -> Vec<f64> {
        let d = self.disc;
        let mut f = vec![0.0; d.p1.n_dofs()];
        for (pi, pq) in d.quad.iter().enumerate() {
            let nodes = d.p1.tet_nodes(pq.active_index);
            for q in 0..pq.weights.len() {
                let w = pq.weights[q] * dwell_prime(d.p1_value(c, pi, q));
                for i in 0..4 {
                    f[nodes[i]] += w * pq.p1[q][i];
                }
            }
        }
        f
    }

    /// One step without transport.
    pub fn step(&self, state: &ChState, dt: f64) -> Result<ChStepResult> {
        self.step_with_transport(state, dt, None)
    }

    /// Block system for `(c, mu)` at the new time level.
    pub fn system(&self, state: &ChState, dt: f64, transport: Option<&CsrMatrix>) -> Result<(CsrMatrix, Vec<f64>)> {
        let n = self.disc.p1.n_dofs();
        let eps = self.params.epsilon;
        let g = self.params.gamma_c / eps;
        let a_mu = self.a_mu(&state.c)?;
        let top_left = match transport {
            Some(c) => self.mass.lin_comb(1.0, c, dt),
            None => self.mass.clone(),
        };
        let top_right = a_mu.scaled(dt);
        let bottom_left = self.mass.lin_comb(-g, &self.a_c, -1.0);
        let system = CsrMatrix::block(&[vec![Some(&top_left), Some(&top_right)], vec![Some(&bottom_left), Some(&self.mass)]]);
        let mc = self.mass.mul_vec(&state.c);
        let load = self.potential_load(&state.c);
        let mut rhs = Vec::with_capacity(2 * n);
        rhs.extend_from_slice(&mc);
        rhs.extend(load.iter().zip(&mc).map(|(f, m)| f / eps - g * m));
        Ok((system, rhs))
    }

    /// One step; `transport` is the scalar convection matrix of the frozen
    /// velocity, added to the concentration block.
    pub fn step_with_transport(&self, state: &ChState, dt: f64, transport: Option<&CsrMatrix>) -> Result<ChStepResult> {
        let n = self.disc.p1.n_dofs();
        let (system, rhs) = self.system(state, dt, transport)?;
        let sol = solve_cached(&system, &rhs, &self.solver, &self.lu_cache)?;
        let (c, mu) = sol.x.split_at(n);
        let result = ChStepResult { c: c.to_vec(), mu: mu.to_vec(), residual: sol.residual };
        FieldVector::new(SpaceKind::P1Scalar, result.c.clone()).ensure_finite("concentration")?;
        self.check_mass(&state.c, &result.c)?;
        Ok(result)
    }

    fn check_mass(&self, before: &[f64], after: &[f64]) -> Result<()> {
        let m = self.mass.row_sums();
        let m0: f64 = before.iter().zip(&m).map(|(c, w)| c * w).sum();
        let m1: f64 = after.iter().zip(&m).map(|(c, w)| c * w).sum();
        let scale = m0.abs().max(1e-12 * self.disc.area());
        let drift = (m1 - m0).abs() / scale;
        if drift > 1e-6 {
            return Err(Error::MassDrift { drift });
        }
        debug!("mass drift {drift:.2e}");
        Ok(())
    }
}

/// Independent Bernoulli(`a`) values at every P1 node, reproducible per seed.
pub fn bernoulli_ic(dofmap: &DofMap, a: f64, seed: u64) -> Result<FieldVector> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Config(format!("Bernoulli probability must lie in [0, 1], got {a}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..dofmap.n_dofs()).map(|_| if rng.gen_bool(a) { 1.0 } else { 0.0 }).collect();
    Ok(FieldVector::new(dofmap.kind, values))
}

/// Step-size control on the largest nodal change of the concentration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveController {
    pub tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for AdaptiveController {
    fn default() -> Self {
        Self { tol: 0.1, dt_min: 1e-5, dt_max: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepDecision {
    Accept { next_dt: f64 },
    Reject { retry_dt: f64 },
}

impl AdaptiveController {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("time.tol_dt must be positive, got {}", self.tol)));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::Config(format!("need 0 < time.dt_min <= time.dt_max, got {} and {}", self.dt_min, self.dt_max)));
        }
        Ok(())
    }

    /// `delta = max |c_new - c_old|`.
    pub fn change(c_new: &[f64], c_old: &[f64]) -> f64 {
        c_new.iter().zip(c_old).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn decide(&self, delta: f64, dt: f64) -> StepDecision {
        if delta > 4.0 * self.tol && dt > self.dt_min {
            return StepDecision::Reject { retry_dt: (0.5 * dt).max(self.dt_min) };
        }
        if delta > 4.0 * self.tol {
            warn!("accepting step at the minimal time step despite change {delta:.3}");
        }
        let factor = if delta > 0.0 { (self.tol / delta).clamp(0.5, 2.0) } else { 2.0 };
        StepDecision::Accept { next_dt: (dt * factor).clamp(self.dt_min, self.dt_max) }
    }
}
