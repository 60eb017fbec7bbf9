//! Scalar diagnostics of a state, integrated over `Gamma_h` with the
//! assembly quadrature.

use crate::ch::double_well;
use crate::discretization::Discretization;
use crate::levelset::Point3;

/// `int f0(c) / eps + eps / 2 |grad_G c|^2 ds`.
pub fn lyapunov_energy(d: &Discretization, eps: f64, c: &[f64]) -> f64 {
    d.integrate(|pi, q| {
        let v = d.p1_value(c, pi, q);
        let g = d.p1_surface_gradient(c, pi, q);
        double_well(v) / eps + 0.5 * eps * g.norm_squared()
    })
}

/// `int c ds`.
pub fn total_mass(d: &Discretization, c: &[f64]) -> f64 {
    d.integrate(|pi, q| d.p1_value(c, pi, q))
}

/// `1/2 int rho |P u|^2 ds` with a pointwise density.
pub fn kinetic_energy(d: &Discretization, u: &[f64], rho: impl Fn(usize, usize) -> f64) -> f64 {
    0.5 * d.integrate(|pi, q| {
        let ut = d.quad[pi].projectors[q] * d.p2_value(u, pi, q);
        rho(pi, q) * ut.norm_squared()
    })
}

/// `(||u . n_h||, ||div_G u||)` in `L2(Gamma_h)`.
pub fn constraint_norms(d: &Discretization, u: &[f64]) -> (f64, f64) {
    let normal = normal_violation(d, |pi, q| d.p2_value(u, pi, q));
    let div = d.integrate(|pi, q| (d.quad[pi].projectors[q] * d.p2_jacobian(u, pi, q)).trace().powi(2));
    (normal, div.sqrt())
}

/// `||u . n_h||` for a velocity given pointwise.
pub fn normal_violation(d: &Discretization, u: impl Fn(usize, usize) -> Point3) -> f64 {
    d.integrate(|pi, q| d.quad[pi].normals[q].dot(&u(pi, q)).powi(2)).sqrt()
}
