use std::f64::consts::PI;

use nalgebra::DMatrix;
use surfphase_core::forms::*;
use surfphase_core::linalg::{dot, CsrMatrix};
use surfphase_core::nsch::MixtureParams;
use surfphase_core::{Discretization, GeometryOptions, LevelSetSurface, Point3};

fn sphere(level: u32) -> Discretization {
    Discretization::new(LevelSetSurface::unit_sphere(), GeometryOptions { level, ..Default::default() }).unwrap()
}

fn min_eigenvalue(a: &CsrMatrix) -> f64 {
    let n = a.nrows;
    let dense = a.to_dense();
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (dense[i][j] + dense[j][i]));
    m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `P e1` with the exact sphere normal, i.e. the surface gradient of `x1`.
fn tangential_e1(x: &Point3) -> Point3 {
    let n = x / x.norm();
    Point3::x() - n * n[0]
}

fn rotation(x: &Point3) -> Point3 {
    Point3::z().cross(x)
}

fn l2_sq(d: &Discretization, u: &[f64]) -> f64 {
    d.integrate(|pi, q| (d.quad[pi].projectors[q] * d.p2_value(u, pi, q)).norm_squared())
}

#[test]
fn mass_matrix_properties() {
    let d = sphere(3);
    let m = assemble_mass(&d, |_, _| 1.0);
    let total: f64 = m.values.iter().sum();
    assert!((total - d.area()).abs() < 1e-12 * d.area());
    assert!(m.asymmetry() < 1e-12);
    assert!((0..m.nrows).all(|i| m.get(i, i) >= 0.0));
    let m2 = assemble_mass(&d, |_, _| 0.5 * (1.0 - 0.5));
    assert!((m2.values.iter().sum::<f64>() - 0.25 * d.area()).abs() < 1e-12);
    let doubled = assemble_mass(&d, |_, _| 2.0);
    for (a, b) in doubled.values.iter().zip(&m.values) {
        assert_eq!(*a, 2.0 * b);
    }
    assert_eq!(assemble_mass(&d, |_, _| 1.0), m);
}

#[test]
fn a_mu_kernel_and_dirichlet_energy() {
    let stab = StabilizationParams::default();
    let d = sphere(4);
    let a = assemble_a_mu(&d, |_, _| 1.0, &stab).unwrap();
    let ones = vec![1.0; d.p1.n_dofs()];
    assert!(max_abs(&a.mul_vec(&ones)) < 1e-11);
    let x1 = d.p1.interpolate_scalar(|x| x[0]).values;
    let e = a.quadratic_form(&x1, &x1);
    assert!((e - 8.0 * PI / 3.0).abs() / (8.0 * PI / 3.0) < 0.02, "energy {e}");
}

#[test]
fn a_mu_is_positive_semidefinite() {
    let d = sphere(2);
    let a = assemble_a_mu(&d, |pi, q| 0.02 * (0.3 + d.quad[pi].points[q][2].powi(2)), &StabilizationParams::default())
        .unwrap();
    assert!(a.asymmetry() < 1e-12);
    assert!(min_eigenvalue(&a) >= -1e-10);
}

#[test]
fn negative_mobility_is_clamped() {
    let d = sphere(2);
    let stab = StabilizationParams::default();
    let a = assemble_a_mu(&d, |_, _| -1.0, &stab).unwrap();
    let vol = assemble_normal_stabilization(&d, |ai| stab.tau_mu(d.h(ai))).unwrap();
    assert_eq!(a, CsrMatrix::zeros(d.p1_pattern()).lin_comb(1.0, &vol, 1.0));
}

#[test]
fn a_c_kernel_scaling_and_symmetry() {
    let d = sphere(3);
    let stab = StabilizationParams::default();
    let eps = 0.05;
    let a = assemble_a_c(&d, eps, &stab).unwrap();
    assert!(max_abs(&a.mul_vec(&vec![1.0; d.p1.n_dofs()])) < 1e-11);
    assert!(a.asymmetry() < 1e-12);
    // doubling eps while halving the scale keeps tau_c fixed
    let halved = StabilizationParams { tau_c_scale: 0.5, ..stab };
    let a2 = assemble_a_c(&d, 2.0 * eps, &halved).unwrap();
    let surface = assemble_surface_stiffness(&d, |_, _| eps);
    let diff = a2.lin_comb(1.0, &a, -1.0).lin_comb(1.0, &surface, -1.0);
    assert!(max_abs(&diff.values) < 1e-12 * max_abs(&a.values));
}

#[test]
fn scalar_convection_identities() {
    let d = sphere(3);
    let zero = vec![0.0; d.p2.n_dofs()];
    assert!(assemble_scalar_convection(&d, &zero).values.iter().all(|&v| v == 0.0));
    let u = d.p2.interpolate_vector(rotation).values;
    let c = assemble_scalar_convection(&d, &u);
    let ones = vec![1.0; d.p1.n_dofs()];
    // Gamma_h is not rotation invariant, so the row sums vanish only up to the
    // geometric error; they must shrink under refinement.
    let rowsum = |d: &Discretization| {
        let u = d.p2.interpolate_vector(rotation).values;
        max_abs(&assemble_scalar_convection(d, &u).mul_vec(&vec![1.0; d.p1.n_dofs()]))
    };
    let (r2, r3) = (rowsum(&sphere(2)), rowsum(&d));
    assert!(r3 < 2e-3 && r3 < r2 / 4.0, "{r2} {r3}");
    let field: Vec<f64> = d.p1.nodes.iter().map(|x| (3.0 * x[0]).sin() + x[1] * x[2]).collect();
    assert!(dot(&ones, &c.mul_vec(&field)).abs() < 1e-12);
}

#[test]
fn killing_field_has_small_strain() {
    let d = sphere(3);
    let parts = assemble_ns_a_parts(&d, |_, _| 1.0, &StabilizationParams::default()).unwrap();
    let rot = d.p2.interpolate_vector(rotation).values;
    let grad = d.p2.interpolate_vector(tangential_e1).values;
    let e_rot = parts.strain.quadratic_form(&rot, &rot);
    let e_grad = parts.strain.quadratic_form(&grad, &grad);
    assert!(e_rot <= 1e-3 * e_grad, "{e_rot} vs {e_grad}");
    assert!(parts.total().asymmetry() < 1e-12);
}

#[test]
fn penalty_of_unit_normal() {
    let d = sphere(3);
    let stab = StabilizationParams::default();
    let p = penalty_energy(&d, &stab, |pi, q| d.quad[pi].normals[q]);
    let expected = stab.tau(d.max_h()) * d.area();
    assert!((p - expected).abs() < 1e-10 * expected);
}

#[test]
fn viscosity_must_be_positive() {
    let d = sphere(2);
    assert!(assemble_ns_a(&d, |_, _| 0.0, &StabilizationParams::default()).is_err());
}

#[test]
fn convection_form_properties() {
    let d = sphere(3);
    let zero = vec![0.0; d.p2.n_dofs()];
    let n0 = assemble_ns_convection(&d, |_, _| 2.0, |_, _| 1.0, &zero);
    assert!(n0.values.iter().all(|&v| v == 0.0));
    let w = d.p2.interpolate_vector(rotation).values;
    let n = assemble_ns_convection(&d, |_, _| 1.0, |_, _| 1.0, &w);
    let u = d.p2.interpolate_vector(tangential_e1).values;
    let skew = n.quadratic_form(&u, &u);
    assert!(skew.abs() <= 1e-2 * l2_sq(&d, &u), "{skew}");
}

#[test]
fn b_form_properties() {
    let d = sphere(3);
    let b = assemble_b(&d);
    let ones = vec![1.0; d.p1.n_dofs()];
    let bt1 = b.transpose().mul_vec(&ones);
    assert!(max_abs(&bt1) < 1e-12);
    let p = d.p1.interpolate_scalar(|x| x[0]).values;
    let u = d.p2.interpolate_vector(tangential_e1).values;
    let bup = dot(&b.mul_vec(&u), &p);
    assert!(bup > 0.0);
    let div = d.integrate(|pi, q| {
        let jac = d.p2_jacobian(&u, pi, q);
        d.p1_value(&p, pi, q) * (d.quad[pi].projectors[q] * jac).trace()
    });
    assert!((bup + div).abs() <= 1e-2 * bup.abs(), "{bup} vs {div}");
}

#[test]
fn s_form_properties() {
    let d = sphere(2);
    let stab = StabilizationParams::default();
    let s = assemble_s(&d, &stab);
    assert!(max_abs(&s.mul_vec(&vec![1.0; d.p1.n_dofs()])) < 1e-12);
    assert!(s.asymmetry() < 1e-12);
    assert!(min_eigenvalue(&s) >= -1e-10);
    let s3 = assemble_s(&d, &StabilizationParams { beta_p_scale: 3.0, ..stab });
    for (a, b) in s3.values.iter().zip(&s.values) {
        assert!((a - 3.0 * b).abs() <= 1e-14 * a.abs());
    }
}

#[test]
fn coupling_rhs_and_theta_block() {
    let d = sphere(3);
    let n = d.p1.n_dofs();
    let mu_const = vec![0.7; n];
    let c = vec![1.0; n];
    let f = assemble_coupling_rhs(&d, &c, &mu_const, 0.4, None);
    assert!(max_abs(&f) < 1e-12);
    let mu: Vec<f64> = d.p1.nodes.iter().map(|x| x[2]).collect();
    let f1 = assemble_coupling_rhs(&d, &c, &mu, 0.4, None);
    let c07 = vec![0.7; n];
    let f07 = assemble_coupling_rhs(&d, &c07, &mu, 0.4, None);
    for (a, b) in f07.iter().zip(&f1) {
        assert!((a - 0.7 * b).abs() < 1e-14);
    }
    let forcing = |_: &Point3| Point3::new(0.0, 0.0, 1.0);
    let ff = assemble_coupling_rhs(&d, &c, &mu_const, 0.4, Some(&forcing));
    let e3 = d.p2.interpolate_vector(|_| Point3::z()).values;
    assert!((dot(&ff, &e3) - d.area()).abs() < 1e-10);

    let matched = MixtureParams { rho1: 2.0, rho2: 2.0, ..Default::default() };
    let theta: Vec<f64> = (0..n).map(|i| matched.theta(c[i])).collect();
    let t = assemble_theta_coupling(&d, |_, _| 0.02, &theta, &mu);
    assert!(t.values.iter().all(|&v| v == 0.0));
    let theta2 = vec![2f64.sqrt(); n];
    let t2 = assemble_theta_coupling(&d, |_, _| 0.02, &theta2, &mu);
    assert!(max_abs(&t2.values) > 0.0);
}
