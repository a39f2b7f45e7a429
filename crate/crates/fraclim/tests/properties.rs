use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use fraclim::collision::{apply_k, apply_l, dissipation, dissipation_rhs, moments, phi_moments};
use fraclim::config::{parse_config, Model, SolverDefaults};
use fraclim::fractional::{frac_laplacian_spectral, solve_fractional_heat};
use fraclim::kinetic::{evolve, lift_initial, InitialData, Preparation};
use fraclim::params::{validate_assumptions, Conservation, RawParams};
use fraclim::spectral::{Lattice, ScalarField};
use fraclim::vgrid::{GridSpec, Mapping};

fn model(conservation: Conservation) -> &'static Model {
    static ENERGY: OnceLock<Model> = OnceLock::new();
    static MOMENTUM: OnceLock<Model> = OnceLock::new();
    let (cell, alpha) = match conservation {
        Conservation::MassMomentumEnergy => (&ENERGY, 5.5),
        Conservation::MassMomentum => (&MOMENTUM, 3.5),
    };
    cell.get_or_init(|| {
        let params = validate_assumptions(&RawParams::heavy_tail(conservation, 1, alpha, 0.0)).unwrap();
        Model::build(&params, GridSpec { n_per_axis: 96, mapping: Mapping::AlgebraicMap { scale: 2.0 } }).unwrap()
    })
}

fn conservation() -> impl Strategy<Value = Conservation> {
    prop_oneof![Just(Conservation::MassMomentumEnergy), Just(Conservation::MassMomentum)]
}

/// Random nodal values with moderate decay so every weighted sum is finite.
fn nodal(model: &Model, raw: &[f64]) -> Vec<f64> {
    (0..model.cd.len()).map(|i| raw[i % raw.len()] * model.cd.m[i]).collect()
}

fn scale(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0)
}

/// Σ (a_j cos(j x) + b_j sin(j x)) + c.
fn trig_field(lattice: Lattice, c: f64, a: &[f64], b: &[f64]) -> ScalarField {
    ScalarField::from_fn(lattice, |x| {
        c + a.iter().zip(b).enumerate().map(|(j, (a, b))| {
            let k = (j + 1) as f64 * x[0];
            a * k.cos() + b * k.sin()
        }).sum::<f64>()
    })
}

fn initial(lattice: Lattice, conservation: Conservation, c: f64, a: &[f64], b: &[f64]) -> InitialData {
    let profile = trig_field(lattice, c, a, b);
    match conservation {
        Conservation::MassMomentumEnergy => InitialData::boussinesq(lattice, &profile),
        Conservation::MassMomentum => {
            InitialData { components: vec![profile, ScalarField::zeros(lattice)], preparation: Preparation::StokesLimit }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn collision_conserves_phi_moments(cons in conservation(), raw in prop::collection::vec(-1.0f64..1.0, 1..40)) {
        let m = model(cons);
        let f = nodal(m, &raw);
        let lf = apply_l(&f, &m.cd).unwrap();
        let size = scale(&phi_moments(&f, &m.cd).unwrap());
        for x in phi_moments(&lf, &m.cd).unwrap() {
            prop_assert!(x.abs() <= 1e-11 * size);
        }
    }

    #[test]
    fn k_is_a_projection(cons in conservation(), raw in prop::collection::vec(-1.0f64..1.0, 1..40)) {
        let m = model(cons);
        let kf = apply_k(&nodal(m, &raw), &m.cd).unwrap();
        let kkf = apply_k(&kf, &m.cd).unwrap();
        let s = scale(&kf);
        for (a, b) in kf.iter().zip(&kkf) {
            prop_assert!((a - b).abs() <= 1e-11 * s);
        }
    }

    #[test]
    fn dissipation_is_nonpositive_and_matches_its_square_form(
        cons in conservation(),
        raw in prop::collection::vec(-1.0f64..1.0, 1..40),
    ) {
        let m = model(cons);
        let f = nodal(m, &raw);
        let d = dissipation(&f, &m.cd).unwrap();
        let r = dissipation_rhs(&f, &m.cd).unwrap();
        prop_assert!(d <= 1e-12 * r.abs().max(1e-300));
        prop_assert!((d - r).abs() <= 1e-9 * r.abs().max(1e-12));
    }

    #[test]
    fn lifting_reproduces_the_moments(
        cons in conservation(),
        u in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let m = model(cons);
        let p = cons.size(1);
        let f = m.cd.macro_part(&u[..p]);
        let back = moments(&f, &m.cd).unwrap();
        for (a, b) in back.iter().zip(&u[..p]) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evolution_is_dissipative_real_and_conservative(
        cons in conservation(),
        c in -1.0f64..1.0,
        a in prop::collection::vec(-1.0f64..1.0, 3),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        eps in 0.05f64..0.5,
    ) {
        let m = model(cons);
        let solver = SolverDefaults { n_modes: 8, ..SolverDefaults::default() };
        let dt = 0.01;
        let cfg = solver.solver_config(eps, dt, 0.1);
        let lattice = cfg.lattice(1);
        let data = initial(lattice, cons, c, &a, &b);
        let f0 = lift_initial(&data, &m.cd, &m.grid).unwrap();
        let (traj, f) = evolve(&f0, &cfg, m.params.gamma, &m.cd, &m.grid, &[0.0, 0.1]).unwrap();

        let f_norm = &traj.f_norm_steps;
        for w in f_norm.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        for w in traj.g_nu_accum_steps.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        prop_assert!(f.reality_defect() <= 1e-12 * f_norm[0].max(1.0));
        for comp in traj.snapshots[1].u.iter() {
            prop_assert!(comp.reality_defect() <= 1e-12 * f_norm[0].max(1.0));
        }
        // The zero mode of every conserved moment is stationary.
        let zero = lattice.index_of([0, 0]).unwrap();
        for (u0, u1) in traj.snapshots[0].u.iter().zip(&traj.snapshots[1].u) {
            prop_assert!((u0.coeffs[zero] - u1.coeffs[zero]).norm() <= 1e-12 * (1.0 + u0.coeffs[zero].norm()));
        }
    }

    #[test]
    fn fractional_heat_contracts_and_keeps_the_mean(
        c in -1.0f64..1.0,
        a in prop::collection::vec(-1.0f64..1.0, 4),
        gamma in 0.5f64..2.0,
        t in 0.0f64..2.0,
    ) {
        let lattice = Lattice::periodic(1, 16);
        let b = vec![0.0; a.len()];
        let f = trig_field(lattice, c, &a, &b);
        let g = solve_fractional_heat(&f, 1.0, gamma, t);
        prop_assert!(g.l2_norm() <= f.l2_norm() * (1.0 + 1e-12));
        prop_assert!((g.coeffs[0] - f.coeffs[0]).norm() <= 1e-14);
    }

    #[test]
    fn spectral_fractional_laplacian_scales_cosines(j in 1usize..7, gamma in 0.2f64..2.0) {
        let lattice = Lattice::periodic(1, 16);
        let f = ScalarField::from_fn(lattice, |x| (j as f64 * x[0]).cos());
        let g = frac_laplacian_spectral(&f, gamma);
        let expected = f.scaled((j as f64).powf(gamma));
        prop_assert!(g.sub(&expected).l2_norm() <= 1e-11 * expected.l2_norm());
    }

    #[test]
    fn config_accepts_any_admissible_alpha(alpha in 5.05f64..5.95, n in 8usize..64) {
        let text = format!(
            "family = heavy_tail\nconservation = mass_momentum_energy\nd = 1\nalpha = {alpha}\nbeta = 0\nc0_initial = 1\nn_per_axis = {n}\n"
        );
        let config = parse_config(&text).unwrap();
        let params = config.model_params().unwrap();
        prop_assert!(params.gamma > 0.0 && params.gamma < 2.0);
        prop_assert_eq!(config.grid.n_per_axis, n);
    }
}

#[test]
fn zero_data_stays_zero() {
    let m = model(Conservation::MassMomentumEnergy);
    let solver = SolverDefaults { n_modes: 8, ..SolverDefaults::default() };
    let cfg = solver.solver_config(0.1, 0.01, 0.05);
    let lattice = cfg.lattice(1);
    let data = initial(lattice, Conservation::MassMomentumEnergy, 0.0, &[0.0], &[0.0]);
    let f0 = lift_initial(&data, &m.cd, &m.grid).unwrap();
    let (traj, f) = evolve(&f0, &cfg, m.params.gamma, &m.cd, &m.grid, &[0.05]).unwrap();
    assert!(traj.snapshots[0].f_norm == 0.0);
    assert!((0..lattice.len()).all(|i| f.mode(i).iter().all(|x| *x == Complex64::new(0.0, 0.0))));
}
