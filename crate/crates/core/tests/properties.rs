use std::f64::consts::{PI, TAU};

use mvtorus::particles::{drift, drift_naive, ParticleEnsemble};
use mvtorus::pde::{default_initial, evolve, PdeConfig};
use mvtorus::self_consistency::sc_map;
use mvtorus::stability::{critical_beta, growth_rates, second_variation};
use mvtorus::{design_confinement, FourierPotential, Grid, Model, Potential, TorusDensity};
use proptest::prelude::*;

fn coeffs(max_modes: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 1..=max_modes)
}

fn smooth_density(g: usize) -> impl Strategy<Value = TorusDensity> {
    (prop::collection::vec(-0.06..0.06f64, 4), prop::collection::vec(-0.06..0.06f64, 4)).prop_map(
        move |(c, s)| TorusDensity::from_moments(Grid::new(g).unwrap(), &c, &s).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potentials_are_even(c in coeffs(6), x in -10.0..10.0f64) {
        let w = FourierPotential::new(c);
        prop_assert!((w.value(x) - w.value(-x)).abs() < 1e-12);
        prop_assert!((w.derivative(x) + w.derivative(-x)).abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences(c in coeffs(5), x in 0.0..TAU) {
        let w = FourierPotential::new(c);
        let h = 1e-5;
        let fd1 = (w.value(x + h) - w.value(x - h)) / (2.0 * h);
        let fd2 = (w.value(x + h) - 2.0 * w.value(x) + w.value(x - h)) / (h * h);
        let scale = 1.0 + w.sup_norm_bound() * 25.0;
        prop_assert!((fd1 - w.derivative(x)).abs() < 1e-7 * scale);
        prop_assert!((fd2 - w.second_derivative(x)).abs() < 1e-3 * scale);
    }

    #[test]
    fn convolution_matches_quadrature(c in coeffs(6), rho in smooth_density(128)) {
        let w = FourierPotential::new(c);
        let conv = w.convolve(&rho);
        let grid = rho.grid();
        for x in [0.0, 0.7, 2.5, 5.9] {
            let integrand: Vec<f64> = grid
                .points()
                .iter()
                .zip(rho.values())
                .map(|(y, r)| w.value(x - y) * r)
                .collect();
            prop_assert!((conv.value(x) - grid.integrate(&integrand)).abs() < 1e-10);
        }
    }

    #[test]
    fn moments_round_trip(c in prop::collection::vec(-0.06..0.06f64, 4), s in prop::collection::vec(-0.06..0.06f64, 4)) {
        let rho = TorusDensity::from_moments(Grid::new(64).unwrap(), &c, &s).unwrap();
        for k in 1..=4 {
            prop_assert!((rho.cos_moment(k) - c[k - 1]).abs() < 1e-13);
            prop_assert!((rho.sin_moment(k) - s[k - 1]).abs() < 1e-13);
        }
        prop_assert!((rho.mass() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn alignment_is_antisymmetric(rho in smooth_density(64), steps in 0isize..64) {
        let other = rho.rotated(steps);
        let ab = rho.align(&other).unwrap();
        let ba = other.align(&rho).unwrap();
        prop_assert!((ab.distance - ba.distance).abs() < 1e-12);
        let sum = (ab.shift + ba.shift).rem_euclid(TAU);
        prop_assert!(sum < 1e-9 || (TAU - sum) < 1e-9);
        prop_assert!(ab.distance < 1e-12);
    }

    #[test]
    fn fast_drift_equals_pairwise(
        c in coeffs(4),
        v in coeffs(2),
        kappa in 0.1..3.0f64,
        x in prop::collection::vec(0.0..TAU, 2..200),
    ) {
        let m = Model::new(FourierPotential::new(c), 2.0)
            .with_confinement(FourierPotential::new(v))
            .with_kappa(kappa);
        let fast = drift(&x, &m);
        let slow = drift_naive(&x, &m);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn particle_relabeling_commutes_with_steps(
        x in prop::collection::vec(0.0..TAU, 16),
        noise in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 16), 20),
        perm in Just((0..16).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let m = Model::new(FourierPotential::new(vec![-1.0, -0.5]), 3.0);
        let mut a = ParticleEnsemble::from_positions(x.clone(), 0, 0);
        let mut b = ParticleEnsemble::from_positions(perm.iter().map(|&i| x[i]).collect(), 0, 0);
        for xi in &noise {
            let permuted: Vec<f64> = perm.iter().map(|&i| xi[i]).collect();
            a.em_step_with_noise(&m, 0.01, xi);
            b.em_step_with_noise(&m, 0.01, &permuted);
        }
        for (i, &j) in perm.iter().enumerate() {
            let d = (b.positions()[i] - a.positions()[j] + PI).rem_euclid(TAU) - PI;
            prop_assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn order_parameter_map_stays_in_range(c in coeffs(3), beta in 0.1..8.0f64, r in prop::collection::vec(-1.0..1.0f64, 3)) {
        let m = Model::new(FourierPotential::new(c), beta);
        let s = sc_map(&r[..m.order().min(3)], &m, 128).unwrap();
        prop_assert!(s.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn critical_mode_is_marginal(c in coeffs(5)) {
        let w = FourierPotential::new(c);
        if let Some(bc) = critical_beta(&w) {
            let g = growth_rates(&w, bc, w.modes() + 2);
            let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(max.abs() < 1e-12);
            let l = second_variation(&w, bc, w.modes() + 2);
            let min = l.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(min.abs() < 1e-12);
        } else {
            prop_assert!(w.is_h_stable());
        }
    }

    #[test]
    fn designed_confinement_is_stationary(c in coeffs(3), beta in 0.5..5.0f64, rho in smooth_density(128)) {
        let w = FourierPotential::new(c);
        let v = design_confinement(&rho, &w, beta, 1.0).unwrap();
        let m = Model::new(w, beta).with_confinement(v);
        prop_assert!(m.stationary_residual(&rho) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pde_conserves_mass_and_dissipates_free_energy(c in coeffs(3), beta in 0.3..4.0f64) {
        let m = Model::new(FourierPotential::new(c), beta);
        let cfg = PdeConfig::new(m, 2.0).with_grid(64).with_record_interval(0.01);
        let traj = evolve(&default_initial(64).unwrap(), &cfg).unwrap();
        prop_assert!(traj.max_mass_drift < 1e-12);
        prop_assert!(traj.max_free_energy_increase() <= 1e-9);
    }

    #[test]
    fn runs_are_reproducible(seed in any::<u64>()) {
        let m = Model::new(FourierPotential::new(vec![-1.0]), 3.0);
        let cfg = mvtorus::SdeConfig::new(m, 0.2).with_particles(30).with_seed(seed);
        let rho = default_initial(64).unwrap();
        let a = mvtorus::particles::run(&cfg, &rho, 1).unwrap();
        let b = mvtorus::particles::run(&cfg, &rho, 1).unwrap();
        prop_assert_eq!(a.final_state.positions(), b.final_state.positions());
    }
}
