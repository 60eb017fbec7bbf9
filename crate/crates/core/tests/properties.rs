use proptest::prelude::*;
use surfphase_core::ch::*;
use surfphase_core::forms::{assemble_a_mu, assemble_mass, StabilizationParams};
use surfphase_core::levelset::tangent_projector;
use surfphase_core::linalg::SolverOptions;
use surfphase_core::nsch::MixtureParams;
use surfphase_core::observables::{lyapunov_energy, total_mass};
use surfphase_core::{Discretization, GeometryOptions, LevelSetSurface, Point3};

fn sphere2() -> Discretization {
    Discretization::new(LevelSetSurface::unit_sphere(), GeometryOptions { level: 2, ..Default::default() }).unwrap()
}

/// Deterministic field in `[0, 1]` from a seed, cheap enough for proptest.
fn field(n: usize, seed: u64) -> Vec<f64> {
    (0..n).map(|i| ((i as u64 * 2654435761 + seed * 40503) % 1000) as f64 / 999.0).collect()
}

proptest! {
    #[test]
    fn controller_stays_in_bounds(delta in 0.0f64..5.0, dt in 1e-5f64..1.0, tol in 0.01f64..0.5) {
        let ctl = AdaptiveController { tol, ..Default::default() };
        match ctl.decide(delta, dt) {
            StepDecision::Reject { retry_dt } => {
                prop_assert!(delta > 4.0 * tol);
                prop_assert!(retry_dt >= ctl.dt_min && retry_dt < dt);
            }
            StepDecision::Accept { next_dt } => {
                prop_assert!(delta <= 4.0 * tol || dt <= ctl.dt_min);
                prop_assert!((ctl.dt_min..=ctl.dt_max).contains(&next_dt));
                let unclipped = next_dt > ctl.dt_min && next_dt < ctl.dt_max;
                prop_assert!(!unclipped || (next_dt / dt >= 0.5 - 1e-12 && next_dt / dt <= 2.0 + 1e-12));
            }
        }
    }

    #[test]
    fn mixture_laws_stay_between_phases(c in -2.0f64..3.0, rho2 in 0.1f64..5.0, extra in 0.0f64..5.0) {
        let m = MixtureParams { rho1: rho2 + extra, rho2, ..Default::default() };
        let rho = m.density(c);
        prop_assert!(rho >= m.rho2 - 1e-12 && rho <= m.rho1 + 1e-12);
        let eta = m.viscosity(c);
        prop_assert!(eta >= m.eta1.min(m.eta2) - 1e-15 && eta <= m.eta1.max(m.eta2) + 1e-15);
        prop_assert!((m.rho_hat(c) - m.rho2).abs() < 1e-12);
        prop_assert!((m.theta(c).powi(2) - extra).abs() < 1e-12);
    }

    #[test]
    fn projector_is_idempotent(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.1f64..1.0) {
        let n = Point3::new(x, y, z).normalize();
        let p = tangent_projector(&n);
        prop_assert!((p * p - p).norm() < 1e-14);
        prop_assert!((p * n).norm() < 1e-14);
        prop_assert!((p.trace() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn double_well_is_nonnegative(c in -3.0f64..4.0) {
        prop_assert!(double_well(c) >= 0.0);
        let h = 1e-6;
        let fd = (double_well(c + h) - double_well(c - h)) / (2.0 * h);
        prop_assert!((fd - dwell_prime(c)).abs() < 1e-6 * (1.0 + c.abs().powi(3)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_states_have_uniform_energy(k in -0.5f64..1.5, eps in 0.01f64..0.2) {
        let d = sphere2();
        let e = lyapunov_energy(&d, eps, &vec![k; d.p1.n_dofs()]);
        let expected = double_well(k) / eps * d.area();
        prop_assert!((e - expected).abs() <= 1e-12 * expected.max(1e-300));
    }

    #[test]
    fn mass_form_is_positive_and_integrates(seed in 0u64..10_000) {
        let d = sphere2();
        let m = assemble_mass(&d, |_, _| 1.0);
        let c = field(d.p1.n_dofs(), seed);
        let signed: Vec<f64> = c.iter().map(|v| v - 0.5).collect();
        prop_assert!(m.quadratic_form(&signed, &signed) >= 0.0);
        let ones = vec![1.0; c.len()];
        let via_matrix = m.quadratic_form(&ones, &c);
        prop_assert!((via_matrix - total_mass(&d, &c)).abs() < 1e-12 * d.area());
    }

    #[test]
    fn a_mu_is_positive_and_kills_constants(seed in 0u64..10_000, scale in 0.001f64..1.0) {
        let d = sphere2();
        let a = assemble_a_mu(&d, |pi, q| scale * (0.1 + d.quad[pi].points[q][0].powi(2)), &StabilizationParams::default()).unwrap();
        let v: Vec<f64> = field(d.p1.n_dofs(), seed).iter().map(|x| 2.0 * x - 1.0).collect();
        prop_assert!(a.quadratic_form(&v, &v) >= -1e-12);
        let r = a.mul_vec(&vec![1.0; v.len()]);
        prop_assert!(r.iter().all(|x| x.abs() < 1e-11));
    }

    #[test]
    fn ch_step_conserves_mass(seed in 0u64..10_000, dt in 1e-4f64..1e-1) {
        let d = sphere2();
        let params = PotentialParams { epsilon: 0.05, ..Default::default() };
        let s = ChSolver::new(&d, params, StabilizationParams::default(), SolverOptions::default()).unwrap();
        let c = field(d.p1.n_dofs(), seed);
        let m0 = total_mass(&d, &c);
        let r = s.step(&ChState::new(c), dt).unwrap();
        prop_assert!((total_mass(&d, &r.c) - m0).abs() <= 1e-10 * m0);
    }

    #[test]
    fn bernoulli_values_are_pure(seed in any::<u64>(), a in 0.0f64..=1.0) {
        let d = sphere2();
        let c = bernoulli_ic(&d.p1, a, seed).unwrap().values;
        prop_assert!(c.iter().all(|&v| v == 0.0 || v == 1.0));
    }
}
