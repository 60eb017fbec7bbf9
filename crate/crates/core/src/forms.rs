//! Assembly of the bilinear and linear forms over `Gamma_h` and the narrow band.
//!
//! Coefficients are passed as closures of `(patch, point)` so that callers can
//! evaluate them from finite element fields or analytic data alike. Velocity
//! dofs are interleaved (`3 * node + component`); local P2 vector matrices are
//! laid out node-major, i.e. local index `3 * k + d`.

use std::cell::Cell;

use log::warn;

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::levelset::Point3;
use crate::linalg::CsrMatrix;

/// Multipliers of the default stabilization parameters. With all scales
/// equal to one: `tau_mu = h`, `tau_c = eps / h`, `tau = h^-2`,
/// `beta_u = h^-1`, `beta_p = h`, grad-div weight 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilizationParams {
    pub tau_mu_scale: f64,
    pub tau_c_scale: f64,
    pub tau_scale: f64,
    pub beta_u_scale: f64,
    pub beta_p_scale: f64,
    pub grad_div: f64,
}

impl Default for StabilizationParams {
    fn default() -> Self {
        Self { tau_mu_scale: 1.0, tau_c_scale: 1.0, tau_scale: 1.0, beta_u_scale: 1.0, beta_p_scale: 1.0, grad_div: 1.0 }
    }
}

impl StabilizationParams {
    pub fn tau_mu(&self, h: f64) -> f64 {
        self.tau_mu_scale * h
    }

    pub fn tau_c(&self, eps: f64, h: f64) -> f64 {
        self.tau_c_scale * eps / h
    }

    pub fn tau(&self, h: f64) -> f64 {
        self.tau_scale / (h * h)
    }

    pub fn beta_u(&self, h: f64) -> f64 {
        self.beta_u_scale / h
    }

    pub fn beta_p(&self, h: f64) -> f64 {
        self.beta_p_scale * h
    }
}

fn debug_check_symmetric(m: &CsrMatrix, what: &str) {
    if cfg!(debug_assertions) {
        let a = m.asymmetry();
        debug_assert!(a <= 1e-12, "{what} is not symmetric (relative asymmetry {a:e})");
    }
}

/// `M_ij = int coeff phi_j phi_i ds` for the P1 basis.
pub fn assemble_mass(d: &Discretization, coeff: impl Fn(usize, usize) -> f64) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(d.p1_pattern());
    for (pi, pq) in d.quad.iter().enumerate() {
        let mut local = [0.0; 16];
        for q in 0..pq.weights.len() {
            let w = pq.weights[q] * coeff(pi, q);
            let v = &pq.p1[q];
            for i in 0..4 {
                for j in 0..4 {
                    local[i * 4 + j] += w * v[i] * v[j];
                }
            }
        }
        let nodes = d.p1.tet_nodes(pq.active_index);
        m.add_local(nodes, nodes, &local);
    }
    debug_check_symmetric(&m, "mass matrix");
    m
}

/// `int coeff grad_G phi_j . grad_G phi_i ds`.
pub fn assemble_surface_stiffness(d: &Discretization, coeff: impl Fn(usize, usize) -> f64) -> CsrMatrix {
    let mut a = CsrMatrix::zeros(d.p1_pattern());
    for (pi, pq) in d.quad.iter().enumerate() {
        let mut local = [0.0; 16];
        for q in 0..pq.weights.len() {
            let w = pq.weights[q] * coeff(pi, q);
            let g = &pq.p1_surface_grad[q];
            for i in 0..4 {
                for j in 0..4 {
                    local[i * 4 + j] += w * g[i].dot(&g[j]);
                }
            }
        }
        let nodes = d.p1.tet_nodes(pq.active_index);
        a.add_local(nodes, nodes, &local);
    }
    a
}

/// `sum_T weight(T) int_T (n . grad phi_j)(n . grad phi_i) dx` for P1.
pub fn assemble_normal_stabilization(d: &Discretization, weight: impl Fn(usize) -> f64) -> Result<CsrMatrix> {
    let mut a = CsrMatrix::zeros(d.p1_pattern());
    for (ai, local) in d.p1_normal_stiffness()?.iter().enumerate() {
        let w = weight(ai);
        let scaled: Vec<f64> = local.iter().map(|v| w * v).collect();
        let nodes = d.p1.tet_nodes(ai);
        a.add_local(nodes, nodes, &scaled);
    }
    Ok(a)
}

/// Diffusion form of the chemical potential equation with a pointwise
/// mobility; negative mobility values are clamped to zero.
pub fn assemble_a_mu(
    d: &Discretization,
    mobility: impl Fn(usize, usize) -> f64,
    stab: &StabilizationParams,
) -> Result<CsrMatrix> {
    let clamped = Cell::new(0usize);
    let surface = assemble_surface_stiffness(d, |pi, q| {
        let m = mobility(pi, q);
        if m < 0.0 {
            clamped.set(clamped.get() + 1);
            0.0
        } else {
            m
        }
    });
    if clamped.get() > 0 {
        warn!("mobility negative at {} quadrature points, clamped to zero", clamped.get());
    }
    let vol = assemble_normal_stabilization(d, |ai| stab.tau_mu(d.h(ai)))?;
    let a = surface.lin_comb(1.0, &vol, 1.0);
    debug_check_symmetric(&a, "a_mu");
    Ok(a)
}

/// `eps int grad_G c . grad_G v ds + tau_c int (n . grad c)(n . grad v) dx`.
pub fn assemble_a_c(d: &Discretization, eps: f64, stab: &StabilizationParams) -> Result<CsrMatrix> {
    let surface = assemble_surface_stiffness(d, |_, _| eps);
    let vol = assemble_normal_stabilization(d, |ai| stab.tau_c(eps, d.h(ai)))?;
    let a = surface.lin_comb(1.0, &vol, 1.0);
    debug_check_symmetric(&a, "a_c");
    Ok(a)
}

/// `C_ij = -int phi_j (u . grad_G phi_i) ds` for a P2 velocity `u`.
pub fn assemble_scalar_convection(d: &Discretization, u: &[f64]) -> CsrMatrix {
    let mut c = CsrMatrix::zeros(d.p1_pattern());
    for (pi, pq) in d.quad.iter().enumerate() {
        let mut local = [0.0; 16];
        for q in 0..pq.weights.len() {
            let uq = d.p2_value(u, pi, q);
            let w = pq.weights[q];
            let v = &pq.p1[q];
            let g = &pq.p1_surface_grad[q];
            for i in 0..4 {
                let ug = w * uq.dot(&g[i]);
                for j in 0..4 {
                    local[i * 4 + j] -= ug * v[j];
                }
            }
        }
        let nodes = d.p1.tet_nodes(pq.active_index);
        c.add_local(nodes, nodes, &local);
    }
    c
}

/// The four contributions of the viscous form, kept apart for diagnostics.
#[derive(Clone, Debug)]
pub struct NsViscousParts {
    /// `int 2 eta E_s(u) : E_s(v) ds`.
    pub strain: CsrMatrix,
    /// `int tau (n_h . u)(n_h . v) ds`.
    pub penalty: CsrMatrix,
    /// `int grad_div div_G u div_G v ds`.
    pub grad_div: CsrMatrix,
    /// `beta_u int (n . grad u) . (n . grad v) dx`.
    pub volume: CsrMatrix,
}

impl NsViscousParts {
    pub fn total(&self) -> CsrMatrix {
        self.strain.lin_comb(1.0, &self.penalty, 1.0).lin_comb(1.0, &self.grad_div, 1.0).lin_comb(1.0, &self.volume, 1.0)
    }
}

/// Viscous form with tangential penalty, grad-div and normal-derivative
/// stabilization for a pointwise viscosity, which must be positive.
pub fn assemble_ns_a_parts(
    d: &Discretization,
    eta: impl Fn(usize, usize) -> f64,
    stab: &StabilizationParams,
) -> Result<NsViscousParts> {
    let pattern = d.p2_pattern();
    let mut strain = CsrMatrix::zeros(pattern);
    let mut penalty = CsrMatrix::zeros(pattern);
    let mut grad_div = CsrMatrix::zeros(pattern);
    let mut volume = CsrMatrix::zeros(pattern);
    let mut ls = vec![0.0; 900];
    let mut lp = vec![0.0; 900];
    let mut lg = vec![0.0; 900];
    for (pi, pq) in d.quad.iter().enumerate() {
        ls.iter_mut().for_each(|v| *v = 0.0);
        lp.iter_mut().for_each(|v| *v = 0.0);
        lg.iter_mut().for_each(|v| *v = 0.0);
        let h = d.h(pq.active_index);
        let tau = stab.tau(h);
        for q in 0..pq.weights.len() {
            let e = eta(pi, q);
            if !(e > 0.0) {
                return Err(Error::Config(format!("viscosity must be positive, got {e}")));
            }
            let w = pq.weights[q];
            let p = &pq.projectors[q];
            let n = &pq.normals[q];
            let phi = &pq.p2[q];
            let g: [Point3; 10] = pq.p2_grad[q].map(|gr| p * gr);
            for k in 0..10 {
                for l in 0..10 {
                    let gkl = g[k].dot(&g[l]);
                    let pp = phi[k] * phi[l];
                    for a in 0..3 {
                        for b in 0..3 {
                            let idx = (3 * k + a) * 30 + 3 * l + b;
                            ls[idx] += w * e * (p[(a, b)] * gkl + g[l][a] * g[k][b]);
                            lp[idx] += w * tau * n[a] * n[b] * pp;
                            lg[idx] += w * stab.grad_div * g[k][a] * g[l][b];
                        }
                    }
                }
            }
        }
        let dofs = d.p2.tet_dofs(pq.active_index);
        strain.add_local(&dofs, &dofs, &ls);
        penalty.add_local(&dofs, &dofs, &lp);
        grad_div.add_local(&dofs, &dofs, &lg);
    }
    let mut lv = vec![0.0; 900];
    for (ai, local) in d.p2_normal_stiffness()?.iter().enumerate() {
        let beta = stab.beta_u(d.h(ai));
        lv.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..10 {
            for l in 0..10 {
                let v = beta * local[k * 10 + l];
                for a in 0..3 {
                    lv[(3 * k + a) * 30 + 3 * l + a] = v;
                }
            }
        }
        let dofs = d.p2.tet_dofs(ai);
        volume.add_local(&dofs, &dofs, &lv);
    }
    Ok(NsViscousParts { strain, penalty, grad_div, volume })
}

pub fn assemble_ns_a(
    d: &Discretization,
    eta: impl Fn(usize, usize) -> f64,
    stab: &StabilizationParams,
) -> Result<CsrMatrix> {
    let a = assemble_ns_a_parts(d, eta, stab)?.total();
    debug_check_symmetric(&a, "viscous form");
    Ok(a)
}

/// `int tau (n_h . u)^2 ds` for a velocity given pointwise.
pub fn penalty_energy(d: &Discretization, stab: &StabilizationParams, u: impl Fn(usize, usize) -> Point3) -> f64 {
    d.integrate(|pi, q| {
        let tau = stab.tau(d.h(d.quad[pi].active_index));
        tau * d.quad[pi].normals[q].dot(&u(pi, q)).powi(2)
    })
}

/// Linearized convection
/// `int rho v^T (grad_G u) w ds + 1/2 int rho_hat (div_G w) u . v ds`
/// with tangential parts of trial and test functions.
pub fn assemble_ns_convection(
    d: &Discretization,
    rho: impl Fn(usize, usize) -> f64,
    rho_hat: impl Fn(usize, usize) -> f64,
    w: &[f64],
) -> CsrMatrix {
    let mut c = CsrMatrix::zeros(d.p2_pattern());
    let mut local = vec![0.0; 900];
    for (pi, pq) in d.quad.iter().enumerate() {
        local.iter_mut().for_each(|v| *v = 0.0);
        let mut touched = false;
        for q in 0..pq.weights.len() {
            let wq = d.p2_value(w, pi, q);
            if wq == Point3::zeros() {
                continue;
            }
            touched = true;
            let p = &pq.projectors[q];
            let div_w = (p * d.p2_jacobian(w, pi, q) * p).trace();
            let r = rho(pi, q);
            let rh = rho_hat(pi, q);
            let weight = pq.weights[q];
            let phi = &pq.p2[q];
            let gw: [f64; 10] = pq.p2_grad[q].map(|g| (p * g).dot(&wq));
            for k in 0..10 {
                for l in 0..10 {
                    let s = weight * phi[k] * (r * gw[l] + 0.5 * rh * div_w * phi[l]);
                    for a in 0..3 {
                        for b in 0..3 {
                            local[(3 * k + a) * 30 + 3 * l + b] += s * p[(a, b)];
                        }
                    }
                }
            }
        }
        if touched {
            let dofs = d.p2.tet_dofs(pq.active_index);
            c.add_local(&dofs, &dofs, &local);
        }
    }
    c
}

/// `int rho P u . P v ds`.
pub fn assemble_tangential_mass(d: &Discretization, rho: impl Fn(usize, usize) -> f64) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(d.p2_pattern());
    let mut local = vec![0.0; 900];
    for (pi, pq) in d.quad.iter().enumerate() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..pq.weights.len() {
            let w = pq.weights[q] * rho(pi, q);
            let p = &pq.projectors[q];
            let phi = &pq.p2[q];
            for k in 0..10 {
                for l in 0..10 {
                    let s = w * phi[k] * phi[l];
                    for a in 0..3 {
                        for b in 0..3 {
                            local[(3 * k + a) * 30 + 3 * l + b] += s * p[(a, b)];
                        }
                    }
                }
            }
        }
        let dofs = d.p2.tet_dofs(pq.active_index);
        m.add_local(&dofs, &dofs, &local);
    }
    debug_check_symmetric(&m, "tangential mass");
    m
}

/// Pressure rows, velocity columns: `B_{q,(l,d)} = int phi_l (grad_G psi_q)_d ds`.
pub fn assemble_b(d: &Discretization) -> CsrMatrix {
    let mut b = CsrMatrix::zeros(d.p1_p2_pattern());
    let mut local = [0.0; 120];
    for pq in &d.quad {
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..pq.weights.len() {
            let w = pq.weights[q];
            for i in 0..4 {
                let g = pq.p1_surface_grad[q][i];
                for l in 0..10 {
                    let s = w * pq.p2[q][l];
                    for a in 0..3 {
                        local[i * 30 + 3 * l + a] += s * g[a];
                    }
                }
            }
        }
        let rows = d.p1.tet_nodes(pq.active_index);
        let cols = d.p2.tet_dofs(pq.active_index);
        b.add_local(rows, &cols, &local);
    }
    b
}

/// `beta_p int grad p . grad q dx` over the active tets.
pub fn assemble_s(d: &Discretization, stab: &StabilizationParams) -> CsrMatrix {
    let mut s = CsrMatrix::zeros(d.p1_pattern());
    for (ai, map) in d.maps.iter().enumerate() {
        let beta = stab.beta_p(d.h(ai)) * map.volume;
        let mut local = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                local[i * 4 + j] = beta * map.grad_lambda[i].dot(&map.grad_lambda[j]);
            }
        }
        let nodes = d.p1.tet_nodes(ai);
        s.add_local(nodes, nodes, &local);
    }
    debug_check_symmetric(&s, "pressure stabilization");
    s
}

/// Momentum right-hand side `-sigma int c grad_G mu . v ds + int f . v ds`.
pub fn assemble_coupling_rhs(
    d: &Discretization,
    c: &[f64],
    mu: &[f64],
    sigma: f64,
    forcing: Option<&dyn Fn(&Point3) -> Point3>,
) -> Vec<f64> {
    let mut f = vec![0.0; d.p2.n_dofs()];
    for (pi, pq) in d.quad.iter().enumerate() {
        let dofs = d.p2.tet_dofs(pq.active_index);
        for q in 0..pq.weights.len() {
            let mut force = -sigma * d.p1_value(c, pi, q) * d.p1_surface_gradient(mu, pi, q);
            if let Some(g) = forcing {
                force += g(&pq.points[q]);
            }
            let w = pq.weights[q];
            for l in 0..10 {
                for a in 0..3 {
                    f[dofs[3 * l + a]] += w * pq.p2[q][l] * force[a];
                }
            }
        }
    }
    f
}

/// Matrix of `M ((grad_G(theta u_bar)) grad_G mu, theta v)` in the trial
/// velocity `u`, for a P1 nodal `theta`.
pub fn assemble_theta_coupling(
    d: &Discretization,
    mobility: impl Fn(usize, usize) -> f64,
    theta: &[f64],
    mu: &[f64],
) -> CsrMatrix {
    let mut t = CsrMatrix::zeros(d.p2_pattern());
    if theta.iter().all(|&v| v == 0.0) {
        return t;
    }
    let mut local = vec![0.0; 900];
    for (pi, pq) in d.quad.iter().enumerate() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..pq.weights.len() {
            let p = &pq.projectors[q];
            let th = d.p1_value(theta, pi, q);
            let gth = d.p1_surface_gradient(theta, pi, q);
            let gmu = d.p1_surface_gradient(mu, pi, q);
            let w = pq.weights[q] * mobility(pi, q) * th;
            let phi = &pq.p2[q];
            let gm: [f64; 10] = pq.p2_grad[q].map(|g| (p * g).dot(&gmu));
            let tm = gth.dot(&gmu);
            for k in 0..10 {
                for l in 0..10 {
                    let s = w * phi[k] * (phi[l] * tm + th * gm[l]);
                    for a in 0..3 {
                        for b in 0..3 {
                            local[(3 * k + a) * 30 + 3 * l + b] += s * p[(a, b)];
                        }
                    }
                }
            }
        }
        let dofs = d.p2.tet_dofs(pq.active_index);
        t.add_local(&dofs, &dofs, &local);
    }
    t
}

/// `m_i = int phi_i ds`, the row sums of the unit-coefficient mass matrix.
pub fn surface_mass_vector(d: &Discretization) -> Vec<f64> {
    let mut m = vec![0.0; d.p1.n_dofs()];
    for pq in &d.quad {
        let nodes = d.p1.tet_nodes(pq.active_index);
        for q in 0..pq.weights.len() {
            for i in 0..4 {
                m[nodes[i]] += pq.weights[q] * pq.p1[q][i];
            }
        }
    }
    m
}
