//! Synthetic measurement campaign: in-crystal dots along a lattice-constant
//! sweep plus reference dots outside the crystal.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use probekit::kinetics::{solve_decay, RateSet};
use probekit::ldos::{Dipole, Location, TheoryCurve};
use probekit::synth::{sample_histogram, AcquisitionConfig};

use crate::format::{write_histogram, write_overlay, HistogramMeta};

pub const REFERENCE_RATES: (f64, f64, f64) = (1.1, 0.06, 0.005);
pub const REP_PERIODS: [f64; 4] = [25.0, 50.0, 100.0, 200.0];
/// Deepest suppression of the synthetic profile, reached at the gap centre.
pub const MAX_INHIBITION: f64 = 55.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_crystal: usize,
    pub n_reference: usize,
    pub photons: f64,
    pub n_bins: usize,
    /// Background per bin as a fraction of the peak bin.
    pub background_fraction: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_crystal: 88,
            n_reference: 5,
            photons: 1e6,
            n_bins: 1000,
            background_fraction: 1e-4,
            seed: 0,
        }
    }
}

/// Built-in LDOS ratio profile versus `a / lambda`: a band gap around 0.285
/// whose centre is suppressed by [`MAX_INHIBITION`], with an enhancement
/// peak on either side depending on the dipole.
pub fn synthetic_ldos_ratio(dipole: Dipole, norm_freq: f64) -> f64 {
    let base = match dipole {
        Dipole::X => 0.8 + 0.6 * (-((norm_freq - 0.37) / 0.03).powi(2)).exp(),
        Dipole::Y => 0.7 + 0.9 * (-((norm_freq - 0.22) / 0.025).powi(2)).exp(),
    };
    let depth = (-((norm_freq - 0.285) / 0.025).powi(4)).exp();
    base * (1.0 - depth) + depth / MAX_INHIBITION
}

pub fn synthetic_overlay(dipole: Dipole) -> TheoryCurve {
    let points = (0..=240)
        .map(|i| {
            let f = 0.18 + 0.001 * i as f64;
            (f, synthetic_ldos_ratio(dipole, f))
        })
        .collect();
    TheoryCurve::new(dipole, points).expect("valid synthetic overlay")
}

/// Shortest standard period after which the fast component has decayed by
/// `e^-10`.
pub fn choose_rep_period(rates: &RateSet) -> anyhow::Result<f64> {
    let sol = solve_decay(rates)?;
    Ok(REP_PERIODS
        .into_iter()
        .find(|t| sol.gamma_f * t >= 10.0)
        .unwrap_or(200.0))
}

/// Lattice constant (nm) and dipole of in-crystal dot `i`: a sweep over
/// 200..=385 nm in 5 nm steps, alternating the dipole between passes.
pub fn crystal_layout(i: usize) -> (f64, Dipole) {
    let steps = 38;
    let k = i % steps;
    let pass = i / steps;
    let dipole = if (k + pass) % 2 == 0 { Dipole::X } else { Dipole::Y };
    (200.0 + 5.0 * k as f64, dipole)
}

#[derive(Debug, Clone)]
pub struct SimulatedDot {
    pub meta: HistogramMeta,
    pub rates: RateSet,
    pub path: PathBuf,
}

/// Writes `curves/*.txt`, `overlay_x.txt`, `overlay_y.txt` and
/// `pipeline.conf` into `dir`.
pub fn simulate_dataset(cfg: &SimulationConfig, dir: &Path) -> anyhow::Result<Vec<SimulatedDot>> {
    let curves = dir.join("curves");
    std::fs::create_dir_all(&curves).with_context(|| format!("creating {}", curves.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (g_rad, g_nrad, g_db) = REFERENCE_RATES;

    let mut specs = Vec::new();
    for i in 0..cfg.n_crystal {
        let (a, dipole) = crystal_layout(i);
        let wavelength = 970.0 + rng.random_range(-4.5..4.5);
        let ratio = synthetic_ldos_ratio(dipole, a / wavelength);
        specs.push((
            format!("qd{:03}", i + 1),
            dipole,
            Some(a),
            wavelength,
            Location::InCrystal,
            RateSet::new(g_rad * ratio, g_nrad, g_db),
        ));
    }
    for i in 0..cfg.n_reference {
        let wavelength = 970.0 + rng.random_range(-4.5..4.5);
        let dipole = if i % 2 == 0 { Dipole::X } else { Dipole::Y };
        specs.push((
            format!("ref{:02}", i + 1),
            dipole,
            None,
            wavelength,
            Location::Reference,
            RateSet::new(g_rad, g_nrad, g_db),
        ));
    }

    let mut dots = Vec::new();
    for (k, (id, dipole, lattice_a, wavelength, location, rates)) in specs.into_iter().enumerate() {
        let rep_period = choose_rep_period(&rates)?;
        let acq = AcquisitionConfig::covering(rep_period, cfg.n_bins)
            .with_total_photons(&rates, cfg.photons)?
            .with_background_fraction(&rates, cfg.background_fraction)?
            .with_seed(cfg.seed.wrapping_mul(1_000_003).wrapping_add(k as u64));
        let hist = sample_histogram(&rates, &acq)?;
        let meta = HistogramMeta {
            id,
            dipole,
            lattice_a,
            wavelength: (wavelength * 1e3).round() / 1e3,
            rep_period,
            location,
        };
        let path = curves.join(format!("{}.txt", meta.id));
        std::fs::write(&path, write_histogram(&meta, &hist))
            .with_context(|| format!("writing {}", path.display()))?;
        dots.push(SimulatedDot { meta, rates, path });
    }

    for (dipole, name) in [(Dipole::X, "overlay_x.txt"), (Dipole::Y, "overlay_y.txt")] {
        std::fs::write(dir.join(name), write_overlay(&synthetic_overlay(dipole)))?;
    }
    std::fs::write(
        dir.join("pipeline.conf"),
        format!(
            "# synthetic campaign, seed {}\noverlay_x = overlay_x.txt\noverlay_y = overlay_y.txt\nseed = {}\n",
            cfg.seed, cfg.seed
        ),
    )?;
    Ok(dots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_inhibited_across_the_gap_window() {
        for dipole in [Dipole::X, Dipole::Y] {
            for i in 0..=70 {
                let f = 0.25 + 0.001 * i as f64;
                assert!(synthetic_ldos_ratio(dipole, f) < 1.0, "{dipole} {f}");
            }
            assert!((synthetic_ldos_ratio(dipole, 0.285) - 1.0 / 55.0).abs() < 1e-15);
        }
        assert!(synthetic_ldos_ratio(Dipole::X, 0.37) > 1.3);
        assert!(synthetic_ldos_ratio(Dipole::Y, 0.22) > 1.5);
    }

    #[test]
    fn layout_covers_the_lattice_sweep() {
        let a: Vec<f64> = (0..88).map(|i| crystal_layout(i).0).collect();
        assert_eq!(a.iter().cloned().fold(f64::INFINITY, f64::min), 200.0);
        assert_eq!(a.iter().cloned().fold(0.0, f64::max), 385.0);
        assert_ne!(crystal_layout(0).1, crystal_layout(38).1);
    }

    #[test]
    fn rep_period_rule() {
        assert_eq!(choose_rep_period(&RateSet::new(1.1, 0.06, 0.005)).unwrap(), 25.0);
        assert_eq!(choose_rep_period(&RateSet::new(0.02, 0.06, 0.005)).unwrap(), 200.0);
    }
}
