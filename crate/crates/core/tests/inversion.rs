use probekit::extract::{correct_solution, invert_rates, populations_for_beta};
use probekit::kinetics::{solve_decay, RateSet};
use probekit::synth::wraparound_amplitudes;
use proptest::prelude::*;

fn rate() -> impl Strategy<Value = f64> {
    (-3.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn inversion_round_trip(g_rad in rate(), g_nrad in rate(), g_db in rate(), beta in 0.0f64..2.0) {
        let (rho_b, rho_d) = populations_for_beta(beta);
        let sol = solve_decay(&RateSet::new(g_rad, g_nrad, g_db).with_populations(rho_b, rho_d)).unwrap();
        let out = invert_rates(&sol, rho_b, rho_d).unwrap();
        prop_assert!(rel(out.gamma_rad, g_rad) <= 1e-10, "rad {} vs {}", out.gamma_rad, g_rad);
        prop_assert!(rel(out.gamma_nrad, g_nrad) <= 1e-10, "nrad {} vs {}", out.gamma_nrad, g_nrad);
        prop_assert!(rel(out.gamma_db, g_db) <= 1e-10, "db {} vs {}", out.gamma_db, g_db);
    }

    #[test]
    fn inversion_ignores_amplitude_scale(g_rad in rate(), g_nrad in rate(), g_db in rate(), k in 1e-6f64..1e9) {
        let sol = solve_decay(&RateSet::new(g_rad, g_nrad, g_db)).unwrap();
        let a = invert_rates(&sol, 0.5, 0.5).unwrap();
        let b = invert_rates(&sol.scaled(k), 0.5, 0.5).unwrap();
        let scale = g_rad + g_nrad + g_db;
        prop_assert!((b.gamma_rad - a.gamma_rad).abs() <= 1e-13 * scale);
        prop_assert!((b.gamma_db - a.gamma_db).abs() <= 1e-13 * scale);
        prop_assert!((b.gamma_nrad - a.gamma_nrad).abs() <= 1e-13 * scale);
    }

    #[test]
    fn wraparound_and_correction_are_inverse(g_rad in rate(), g_nrad in rate(), g_db in rate(), tau_i in 0usize..4) {
        let tau = [25.0, 50.0, 100.0, 200.0][tau_i];
        let sol = solve_decay(&RateSet::new(g_rad, g_nrad, g_db)).unwrap();
        let back = correct_solution(&wraparound_amplitudes(&sol, tau), tau);
        prop_assert!(rel(back.a_f, sol.a_f) <= 1e-12);
        prop_assert!(rel(back.a_s, sol.a_s) <= 1e-12);
    }
}
