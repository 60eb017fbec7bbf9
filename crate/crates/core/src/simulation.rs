//! Time loop shared by both models: step-size control, diagnostics, and an
//! observer hook for output.

use std::time::Instant;

use log::{debug, info};

use crate::ch::{AdaptiveController, ChSolver, ChState, StepDecision};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::nsch::{NschSolver, NschState};
use crate::observables::{constraint_norms, kinetic_energy, lyapunov_energy, total_mass};

pub enum Model<'a> {
    CahnHilliard(ChSolver<'a>),
    NavierStokesCahnHilliard(NschSolver<'a>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub t_end: f64,
    pub dt0: f64,
    /// Fixed steps when `None`.
    pub adaptive: Option<AdaptiveController>,
    /// Stop after this many accepted steps even if `t_end` is not reached.
    pub max_steps: Option<usize>,
    /// Steps are shortened to land on every multiple of this interval.
    pub stop_every: Option<f64>,
}

/// One row of the diagnostics log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    pub step: usize,
    pub t: f64,
    /// Step that produced this state (0 for the initial state).
    pub dt: f64,
    pub e_lyap: f64,
    pub mass: f64,
    pub e_kin: f64,
    pub u_normal_l2: f64,
    pub div_l2: f64,
    pub res_step1: f64,
    pub res_step2: f64,
    pub wall_ms: f64,
}

impl Diagnostics {
    /// `E_kin + sigma E_lyap`.
    pub fn total_energy(&self, sigma: f64) -> f64 {
        self.e_kin + sigma * self.e_lyap
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub state: NschState,
    pub accepted: usize,
    pub rejected: usize,
}

impl<'a> Model<'a> {
    pub fn disc(&self) -> &'a Discretization {
        match self {
            Self::CahnHilliard(s) => s.disc,
            Self::NavierStokesCahnHilliard(s) => s.ch.disc,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            Self::CahnHilliard(s) => s.params.epsilon,
            Self::NavierStokesCahnHilliard(s) => s.ch.params.epsilon,
        }
    }

    /// Initial state from a concentration; velocity and pressure at rest.
    pub fn initial_state(&self, c: Vec<f64>) -> NschState {
        NschState::at_rest(self.disc(), c)
    }

    pub fn diagnostics(&self, state: &NschState) -> Diagnostics {
        let d = self.disc();
        let (e_kin, u_normal_l2, div_l2) = match self {
            Self::CahnHilliard(_) => (0.0, 0.0, 0.0),
            Self::NavierStokesCahnHilliard(s) => {
                let e = kinetic_energy(d, &state.u, |pi, q| s.mixture.density(d.p1_value(&state.c, pi, q)));
                let (n, dv) = constraint_norms(d, &state.u);
                (e, n, dv)
            }
        };
        Diagnostics {
            step: 0,
            t: state.t,
            dt: 0.0,
            e_lyap: lyapunov_energy(d, self.epsilon(), &state.c),
            mass: total_mass(d, &state.c),
            e_kin,
            u_normal_l2,
            div_l2,
            res_step1: 0.0,
            res_step2: 0.0,
            wall_ms: 0.0,
        }
    }

    /// Advances by `dt`, returning the new state and both solver residuals.
    pub fn advance(&self, state: &NschState, dt: f64) -> Result<(NschState, f64, f64)> {
        match self {
            Self::CahnHilliard(s) => {
                let ch = ChState { c: state.c.clone(), mu: state.mu.clone(), t: state.t };
                let r = s.step(&ch, dt)?;
                let next = NschState { c: r.c, mu: r.mu, u: state.u.clone(), p: state.p.clone(), t: state.t + dt };
                Ok((next, r.residual, 0.0))
            }
            Self::NavierStokesCahnHilliard(s) => {
                let r = s.step(state, dt)?;
                Ok((r.state, r.residual_step1, r.residual_step2))
            }
        }
    }

    /// Runs from `state` to `schedule.t_end`. The observer sees the initial
    /// state first and then every accepted step.
    pub fn run(
        &self,
        mut state: NschState,
        schedule: &Schedule,
        mut observer: impl FnMut(&NschState, &Diagnostics) -> Result<()>,
    ) -> Result<RunSummary> {
        if !(schedule.dt0 > 0.0) {
            return Err(Error::Config(format!("time.dt0 must be positive, got {}", schedule.dt0)));
        }
        if !(schedule.t_end >= 0.0) {
            return Err(Error::Config(format!("time.T must be non-negative, got {}", schedule.t_end)));
        }
        if let Some(ctl) = &schedule.adaptive {
            ctl.validate()?;
        }
        if schedule.stop_every.is_some_and(|e| !(e > 0.0)) {
            return Err(Error::Config("stop interval must be positive".into()));
        }
        observer(&state, &self.diagnostics(&state))?;
        let mut dt = match &schedule.adaptive {
            Some(ctl) => schedule.dt0.clamp(ctl.dt_min, ctl.dt_max),
            None => schedule.dt0,
        };
        let mut accepted = 0;
        let mut rejected = 0;
        let eps_t = 1e-12 * schedule.t_end.max(1.0);
        while state.t < schedule.t_end - eps_t {
            if schedule.max_steps.is_some_and(|m| accepted >= m) {
                break;
            }
            let started = Instant::now();
            let mut stop = schedule.t_end;
            if let Some(every) = schedule.stop_every {
                let k = ((state.t + eps_t) / every).floor() + 1.0;
                stop = stop.min(k * every);
            }
            let remaining = stop - state.t;
            let step_dt = if dt >= remaining - eps_t { remaining } else { dt };
            let (mut next, r1, r2) = self.advance(&state, step_dt)?;
            if step_dt == remaining {
                // land exactly on the stop instead of accumulating roundoff
                next.t = stop;
            }
            let mut next_dt = dt;
            if let Some(ctl) = &schedule.adaptive {
                let delta = AdaptiveController::change(&next.c, &state.c);
                match ctl.decide(delta, step_dt) {
                    StepDecision::Reject { retry_dt } => {
                        debug!("rejected step at t={:.5} dt={step_dt:.3e} (change {delta:.3})", state.t);
                        rejected += 1;
                        dt = retry_dt;
                        continue;
                    }
                    StepDecision::Accept { next_dt: n } => next_dt = n,
                }
            }
            accepted += 1;
            let mut diag = self.diagnostics(&next);
            diag.step = accepted;
            diag.dt = step_dt;
            diag.res_step1 = r1;
            diag.res_step2 = r2;
            diag.wall_ms = started.elapsed().as_secs_f64() * 1e3;
            info!(
                "step {accepted} t={:.5} dt={step_dt:.3e} E={:.6e} mass={:.12e} Ekin={:.3e}",
                diag.t, diag.e_lyap, diag.mass, diag.e_kin
            );
            state = next;
            observer(&state, &diag)?;
            dt = next_dt;
        }
        Ok(RunSummary { state, accepted, rejected })
    }
}
