use probekit::kinetics::{ode_oracle, solve_decay, RateSet};
use probekit::bright_population;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp()
}

fn random_rates(rng: &mut impl Rng) -> RateSet {
    let beta = 2.0 * rng.random::<f64>();
    let total = 0.5 + 0.5 * rng.random::<f64>();
    RateSet::new(
        log_uniform(rng, 1e-3, 10.0),
        log_uniform(rng, 1e-3, 10.0),
        log_uniform(rng, 1e-3, 10.0),
    )
    .with_populations(total / (1.0 + beta), total * beta / (1.0 + beta))
}

#[test]
fn closed_form_matches_ode_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.1).collect();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let rates = random_rates(&mut rng);
        let sol = solve_decay(&rates).unwrap();
        let traj = ode_oracle(&rates, &grid).unwrap();
        for (&t, &(rho_b, _)) in grid.iter().zip(&traj) {
            worst = worst.max((bright_population(&sol, t) - rho_b).abs());
        }
    }
    assert!(worst <= 1e-9, "max deviation {worst:e}");
}

#[test]
fn dark_state_stays_empty_without_spin_flips() {
    let rates = RateSet::new(0.8, 0.1, 0.0).with_populations(1.0, 0.0);
    let grid: Vec<f64> = (0..=100).map(|i| i as f64).collect();
    let traj = ode_oracle(&rates, &grid).unwrap();
    for (&t, &(rho_b, rho_d)) in grid.iter().zip(&traj) {
        assert_eq!(rho_d, 0.0);
        assert!((rho_b - (-0.9 * t).exp()).abs() < 1e-12);
    }
}

#[test]
fn mono_exponential_reduction() {
    let sol = solve_decay(&RateSet::new(0.7, 0.2, 0.0).with_populations(0.5, 0.0)).unwrap();
    assert!((sol.gamma_f - 0.9).abs() < 1e-15);
    assert_eq!(sol.a_s, 0.0);
    assert_eq!(sol.a_f, 0.5);
}

#[test]
fn reference_decay_vanishes_at_long_times() {
    let sol = solve_decay(&RateSet::new(1.1, 0.06, 0.005)).unwrap();
    assert!(bright_population(&sol, 1e4) < 1e-20);
    assert!((bright_population(&sol, 0.0) - 0.5).abs() < 1e-15);
}

fn rate() -> impl Strategy<Value = f64> {
    (-3.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn sum_gap_and_amplitude_rules(g_rad in rate(), g_nrad in rate(), g_db in rate(), rho_b in 0.0f64..1.0, frac in 0.0f64..1.0) {
        let rho_d = (1.0 - rho_b) * frac;
        let sol = solve_decay(&RateSet::new(g_rad, g_nrad, g_db).with_populations(rho_b, rho_d)).unwrap();
        let sum = 2.0 * g_nrad + g_rad + 2.0 * g_db;
        prop_assert!(((sol.gamma_f + sol.gamma_s) - sum).abs() <= 1e-12 * sum);
        let gap = 2.0 * (g_db * g_db + g_rad * g_rad / 4.0).sqrt();
        prop_assert!(((sol.gamma_f - sol.gamma_s) - gap).abs() <= 1e-12 * gap);
        prop_assert!((sol.a_f + sol.a_s - rho_b).abs() <= 1e-12);
        prop_assert!(sol.gamma_f >= sol.gamma_s && sol.gamma_s > 0.0);
    }

    #[test]
    fn bright_population_decreases(g_rad in rate(), g_nrad in rate(), g_db in rate()) {
        let sol = solve_decay(&RateSet::new(g_rad, g_nrad, g_db)).unwrap();
        prop_assume!(sol.a_f > 0.0 && sol.a_s > 0.0);
        let mut prev = bright_population(&sol, 0.0);
        for i in 1..200 {
            let cur = bright_population(&sol, i as f64 * 0.05);
            prop_assert!(cur < prev);
            prev = cur;
        }
    }
}
