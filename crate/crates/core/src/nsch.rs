//! Decoupled scheme for the surface Navier-Stokes-Cahn-Hilliard system: a
//! Cahn-Hilliard step with the previous velocity, then one linearized
//! Navier-Stokes solve.

use log::warn;

use crate::ch::{ChSolver, ChState, PotentialParams};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::fespace::{FieldVector, SpaceKind};
use crate::forms::{
    assemble_b, assemble_coupling_rhs, assemble_ns_a, assemble_ns_convection, assemble_s, assemble_scalar_convection,
    assemble_tangential_mass, assemble_theta_coupling, surface_mass_vector, StabilizationParams,
};
use crate::levelset::Point3;
use crate::linalg::{project_zero_mean, solve_cached, CsrMatrix, SolverOptions, SymbolicCache};
use crate::observables::constraint_norms;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureParams {
    pub rho1: f64,
    pub rho2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub sigma_gamma: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self { rho1: 3.0, rho2: 1.0, eta1: 0.01, eta2: 0.0008, sigma_gamma: 0.04 }
    }
}

impl MixtureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho2 > 0.0 && self.rho1 >= self.rho2) {
            return Err(Error::Config(format!("need rho1 >= rho2 > 0, got {} and {}", self.rho1, self.rho2)));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(Error::Config(format!("viscosities must be positive, got {} and {}", self.eta1, self.eta2)));
        }
        if !(self.sigma_gamma >= 0.0) {
            return Err(Error::Config(format!("line tension must be non-negative, got {}", self.sigma_gamma)));
        }
        Ok(())
    }

    pub fn density(&self, c: f64) -> f64 {
        let c = c.clamp(0.0, 1.0);
        self.rho1 * c + self.rho2 * (1.0 - c)
    }

    pub fn viscosity(&self, c: f64) -> f64 {
        let c = c.clamp(0.0, 1.0);
        self.eta1 * c + self.eta2 * (1.0 - c)
    }

    /// `rho - (d rho / dc) c`, which is `rho2` for the linear law.
    pub fn rho_hat(&self, c: f64) -> f64 {
        let c = c.clamp(0.0, 1.0);
        self.density(c) - (self.rho1 - self.rho2) * c
    }

    /// `sqrt(d rho / dc)`.
    pub fn theta(&self, _c: f64) -> f64 {
        (self.rho1 - self.rho2).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NschState {
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
    /// P2 velocity, interleaved components.
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl NschState {
    /// Fluid at rest with the given concentration.
    pub fn at_rest(disc: &Discretization, c: Vec<f64>) -> Self {
        let n = disc.p1.n_dofs();
        Self { c, mu: vec![0.0; n], u: vec![0.0; disc.p2.n_dofs()], p: vec![0.0; n], t: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct NschStepResult {
    pub state: NschState,
    pub residual_step1: f64,
    pub residual_step2: f64,
}

pub struct NschSolver<'a> {
    pub ch: ChSolver<'a>,
    pub mixture: MixtureParams,
    pub forcing: Option<Box<dyn Fn(&Point3) -> Point3 + Send + Sync>>,
    b: CsrMatrix,
    s: CsrMatrix,
    surface_mass: Vec<f64>,
    lu_cache: SymbolicCache,
}

impl<'a> NschSolver<'a> {
    pub fn new(
        disc: &'a Discretization,
        potential: PotentialParams,
        mixture: MixtureParams,
        stab: StabilizationParams,
        solver: SolverOptions,
    ) -> Result<Self> {
        mixture.validate()?;
        let ch = ChSolver::new(disc, potential, stab, solver)?;
        let b = assemble_b(disc);
        let s = assemble_s(disc, &stab);
        let surface_mass = surface_mass_vector(disc);
        Ok(Self { ch, mixture, forcing: None, b, s, surface_mass, lu_cache: SymbolicCache::default() })
    }

    pub fn disc(&self) -> &'a Discretization {
        self.ch.disc
    }

    /// Cahn-Hilliard step transported by the previous velocity.
    pub fn step1(&self, state: &NschState, dt: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let ch_state = ChState { c: state.c.clone(), mu: state.mu.clone(), t: state.t };
        let transport = if state.u.iter().any(|&v| v != 0.0) {
            Some(assemble_scalar_convection(self.disc(), &state.u))
        } else {
            None
        };
        let r = self.ch.step_with_transport(&ch_state, dt, transport.as_ref())?;
        Ok((r.c, r.mu, r.residual))
    }

    /// `theta` at every P1 node.
    pub fn theta_field(&self, c: &[f64]) -> Vec<f64> {
        c.iter().map(|&ci| self.mixture.theta(ci)).collect()
    }

    /// Matrix of the implicit theta coupling for the new concentration and potential.
    pub fn theta_coupling(&self, c_new: &[f64], mu_new: &[f64]) -> CsrMatrix {
        let d = self.disc();
        let theta = self.theta_field(c_new);
        let pot = self.ch.params;
        assemble_theta_coupling(d, |pi, q| pot.mobility_at(d.p1_value(c_new, pi, q)), &theta, mu_new)
    }

    /// Linearized Navier-Stokes step; returns `(u, p, residual)`.
    pub fn step2(
        &self,
        state: &NschState,
        c_new: &[f64],
        mu_new: &[f64],
        dt: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let d = self.disc();
        let mix = self.mixture;
        let stab = self.ch.stab;
        let c_old = &state.c;
        let mt = assemble_tangential_mass(d, |pi, q| mix.density(d.p1_value(c_old, pi, q)));
        let visc = assemble_ns_a(d, |pi, q| mix.viscosity(d.p1_value(c_new, pi, q)), &stab)?;
        let conv = assemble_ns_convection(
            d,
            |pi, q| mix.density(d.p1_value(c_new, pi, q)),
            |pi, q| mix.rho_hat(d.p1_value(c_new, pi, q)),
            &state.u,
        );
        let coupling = self.theta_coupling(c_new, mu_new);
        let k = mt.scaled(1.0 / dt).lin_comb(1.0, &conv, 1.0).lin_comb(1.0, &visc, 1.0).lin_comb(1.0, &coupling, -1.0);
        let bt = self.b.transpose();
        let neg_s = self.s.scaled(-1.0);
        let mut system = CsrMatrix::block(&[vec![Some(&k), Some(&bt)], vec![Some(&self.b), Some(&neg_s)]]);
        let nu = d.p2.n_dofs();
        let np = d.p1.n_dofs();
        let forcing = self.forcing.as_ref().map(|f| f.as_ref() as &dyn Fn(&Point3) -> Point3);
        let mut rhs = assemble_coupling_rhs(d, c_new, mu_new, mix.sigma_gamma, forcing);
        let inertia = mt.mul_vec(&state.u);
        rhs.iter_mut().zip(&inertia).for_each(|(r, m)| *r += m / dt);
        rhs.extend(std::iter::repeat(0.0).take(np));
        // constants span the pressure kernel; fix the first pressure dof
        system.pin_row(nu);
        rhs[nu] = 0.0;
        let sol = solve_cached(&system, &rhs, &self.ch.solver, &self.lu_cache)?;
        let u = sol.x[..nu].to_vec();
        let mut p = sol.x[nu..].to_vec();
        project_zero_mean(&mut p, &self.surface_mass);
        FieldVector::new(SpaceKind::P2Vector, u.clone()).ensure_finite("velocity")?;
        self.check_tangentiality(&u);
        Ok((u, p, sol.residual))
    }

    fn check_tangentiality(&self, u: &[f64]) {
        let d = self.disc();
        let (normal, _) = constraint_norms(d, u);
        let norm_u = d.integrate(|pi, q| d.p2_value(u, pi, q).norm_squared()).sqrt();
        // the penalty scaling tau = h^-2 gives u . n = O(h) relative to |u|
        let h = d.max_h();
        if norm_u > 0.0 && normal > 10.0 * h * norm_u {
            warn!("velocity far from tangential: |u.n| = {normal:.3e}, |u| = {norm_u:.3e}, h = {h:.3e}");
        }
    }

    pub fn step(&self, state: &NschState, dt: f64) -> Result<NschStepResult> {
        let (c, mu, r1) = self.step1(state, dt)?;
        let (u, p, r2) = self.step2(state, &c, &mu, dt)?;
        Ok(NschStepResult {
            state: NschState { c, mu, u, p, t: state.t + dt },
            residual_step1: r1,
            residual_step2: r2,
        })
    }
}
