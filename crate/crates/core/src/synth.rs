//! Synthetic photon-counting decay histograms.
//!
//! Photon counts are drawn with `rand_distr::Poisson` from a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng`) seeded from a 64-bit integer, so a given seed
//! reproduces the same histogram on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::basis::bin_integral;
use crate::error::{Error, Result};
use crate::kinetics::{solve_decay, BiExpSolution, RateSet};

/// Settings of one time-resolved acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    /// Excitation period (ns).
    pub rep_period: f64,
    /// Histogram bin width (ns).
    pub bin_width: f64,
    pub n_bins: usize,
    /// Detection scale: expected counts per unit of `gamma_rad * rho_b` integrated over 1 ns.
    pub c0: f64,
    /// Mean background counts per bin.
    pub background: f64,
    pub seed: u64,
}

impl AcquisitionConfig {
    pub fn new(rep_period: f64, bin_width: f64, n_bins: usize) -> Self {
        Self {
            rep_period,
            bin_width,
            n_bins,
            c0: 1.0,
            background: 0.0,
            seed: 0,
        }
    }

    /// Bins covering the whole excitation period.
    pub fn covering(rep_period: f64, n_bins: usize) -> Self {
        Self::new(rep_period, rep_period / n_bins as f64, n_bins)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_background(mut self, background: f64) -> Self {
        self.background = background;
        self
    }

    /// Chooses `c0` so that the decay (background excluded) contributes
    /// `photons` expected counts over the histogram.
    pub fn with_total_photons(mut self, rates: &RateSet, photons: f64) -> Result<Self> {
        let unit = Self {
            c0: 1.0,
            background: 0.0,
            ..self
        };
        let total: f64 = expected_curve(rates, &unit)?.iter().sum();
        self.c0 = photons / total;
        Ok(self)
    }

    /// Sets the background to `fraction` of the expected first-bin signal.
    pub fn with_background_fraction(mut self, rates: &RateSet, fraction: f64) -> Result<Self> {
        let unit = Self { background: 0.0, ..self };
        let peak = expected_curve(rates, &unit)?
            .into_iter()
            .fold(0.0, f64::max);
        self.background = fraction * peak;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rep_period > 0.0 && self.bin_width > 0.0) || self.n_bins == 0 {
            return Err(Error::InvalidAcquisition(
                "rep_period, bin_width and n_bins must be positive".into(),
            ));
        }
        if self.n_bins as f64 * self.bin_width > self.rep_period * (1.0 + 1e-9) {
            return Err(Error::InvalidAcquisition(format!(
                "{} bins of {} ns exceed the {} ns excitation period",
                self.n_bins, self.bin_width, self.rep_period
            )));
        }
        if !(self.c0 >= 0.0 && self.background >= 0.0) {
            return Err(Error::InvalidAcquisition(
                "c0 and background must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Photon counts per uniform time bin within one excitation period.
///
/// Counts are stored as `f64`: measured and sampled histograms hold integers,
/// expected-value curves may be fractional.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayHistogram {
    pub t0: f64,
    pub bin_width: f64,
    pub counts: Vec<f64>,
    pub config: Option<AcquisitionConfig>,
}

impl DecayHistogram {
    pub fn new(t0: f64, bin_width: f64, counts: Vec<f64>) -> Result<Self> {
        if !(bin_width > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidAcquisition(format!(
                "invalid bin layout t0 = {t0}, width = {bin_width}"
            )));
        }
        if let Some(i) = counts.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidAcquisition(format!(
                "count {} in bin {i} is not a nonnegative number",
                counts[i]
            )));
        }
        Ok(Self {
            t0,
            bin_width,
            counts,
            config: None,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_start(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.bin_width
    }

    pub fn bin_start_times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.bin_start(j)).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Steady-state amplitudes under periodic excitation with period `rep_period`:
/// `A~ = A / (1 - e^{-gamma tau})`, the geometric sum over all earlier pulses.
pub fn wraparound_amplitudes(sol: &BiExpSolution, rep_period: f64) -> BiExpSolution {
    let wrap = |a: f64, gamma: f64| {
        if a == 0.0 {
            0.0
        } else {
            a / -(-gamma * rep_period).exp_m1()
        }
    };
    BiExpSolution {
        a_f: wrap(sol.a_f, sol.gamma_f),
        a_s: wrap(sol.a_s, sol.gamma_s),
        ..*sol
    }
}

/// Expected counts `c0 * gamma_rad * int_bin rho_b + background` per bin,
/// with `rho_b` the steady-state (wrapped) bright population.
pub fn expected_curve(rates: &RateSet, acq: &AcquisitionConfig) -> Result<Vec<f64>> {
    acq.validate()?;
    let sol = solve_decay(rates)?;
    let wrapped = wraparound_amplitudes(&sol, acq.rep_period);
    let scale = acq.c0 * rates.gamma_rad;
    Ok(biexp_bin_counts(&wrapped, 0.0, acq.bin_width, acq.n_bins, scale, acq.background))
}

/// `scale * sum_i A_i int_bin e^{-gamma_i t} + background` for `n_bins` bins
/// starting at `t0`.
pub fn biexp_bin_counts(
    sol: &BiExpSolution,
    t0: f64,
    bin_width: f64,
    n_bins: usize,
    scale: f64,
    background: f64,
) -> Vec<f64> {
    (0..n_bins)
        .map(|j| {
            let t = t0 + j as f64 * bin_width;
            let mut s = 0.0;
            if sol.a_f != 0.0 {
                s += sol.a_f * bin_integral(sol.gamma_f, t, bin_width);
            }
            if sol.a_s != 0.0 {
                s += sol.a_s * bin_integral(sol.gamma_s, t, bin_width);
            }
            scale * s + background
        })
        .collect()
}

/// Draws independent Poisson counts with the given means.
pub fn poisson_counts<R: rand::Rng + ?Sized>(expected: &[f64], rng: &mut R) -> Vec<f64> {
    expected
        .iter()
        .map(|&mu| {
            if mu > 0.0 {
                Poisson::new(mu).map(|d| d.sample(rng)).unwrap_or(mu.round())
            } else {
                0.0
            }
        })
        .collect()
}

/// Poisson-sampled histogram of the expected curve, seeded by `acq.seed`.
pub fn sample_histogram(rates: &RateSet, acq: &AcquisitionConfig) -> Result<DecayHistogram> {
    let expected = expected_curve(rates, acq)?;
    let mut rng = ChaCha8Rng::seed_from_u64(acq.seed);
    let counts = poisson_counts(&expected, &mut rng);
    let mut hist = DecayHistogram::new(0.0, acq.bin_width, counts)?;
    hist.config = Some(*acq);
    Ok(hist)
}

/// Noise-free histogram holding the expected curve itself.
pub fn expected_histogram(rates: &RateSet, acq: &AcquisitionConfig) -> Result<DecayHistogram> {
    let mut hist = DecayHistogram::new(0.0, acq.bin_width, expected_curve(rates, acq)?)?;
    hist.config = Some(*acq);
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_acq() -> AcquisitionConfig {
        AcquisitionConfig::new(25.0, 0.025, 1000)
    }

    #[test]
    fn wraparound_reference_slow_amplitude() {
        let sol = solve_decay(&RateSet::default()).unwrap();
        let w = wraparound_amplitudes(&sol, 25.0);
        // 40-digit evaluation of A_s / (1 - e^{-gamma_s 25})
        assert_relative_eq!(w.a_s, 0.002_843_126_228_271_166_6, max_relative = 1e-12);
        assert_relative_eq!(sol.a_s / w.a_s, 0.803_0, epsilon = 5e-5);
        assert_eq!((w.gamma_f, w.gamma_s), (sol.gamma_f, sol.gamma_s));
    }

    #[test]
    fn wraparound_negligible_for_long_period() {
        let sol = solve_decay(&RateSet::default()).unwrap();
        let w = wraparound_amplitudes(&sol, 200.0);
        assert!(((w.a_f - sol.a_f) / sol.a_f).abs() < 1e-10);
    }

    #[test]
    fn zero_scale_and_background_give_zero_curve() {
        let acq = AcquisitionConfig {
            c0: 0.0,
            ..reference_acq()
        };
        assert!(expected_curve(&RateSet::default(), &acq)
            .unwrap()
            .iter()
            .all(|&m| m == 0.0));
    }

    #[test]
    fn first_bin_matches_midpoint_quadrature() {
        let rates = RateSet::default();
        let acq = reference_acq().with_total_photons(&rates, 1e6).unwrap();
        let mu = expected_curve(&rates, &acq).unwrap();
        let total: f64 = mu.iter().sum();
        assert_relative_eq!(total, 1e6, max_relative = 1e-12);

        // composite midpoint rule on the wrapped bright population
        let sol = wraparound_amplitudes(&solve_decay(&rates).unwrap(), 25.0);
        let n = 4000;
        let h = acq.bin_width / n as f64;
        let integral: f64 = (0..n)
            .map(|k| {
                let t = (k as f64 + 0.5) * h;
                sol.a_f * (-sol.gamma_f * t).exp() + sol.a_s * (-sol.gamma_s * t).exp()
            })
            .sum::<f64>()
            * h;
        let quad = acq.c0 * rates.gamma_rad * integral;
        assert!(((mu[0] - quad) / quad).abs() < 1e-6);
    }

    #[test]
    fn doubling_c0_doubles_signal() {
        let rates = RateSet::default();
        let acq = AcquisitionConfig {
            c0: 1e4,
            ..reference_acq().with_background(3.0)
        };
        let double = AcquisitionConfig { c0: 2e4, ..acq };
        let a = expected_curve(&rates, &acq).unwrap();
        let b = expected_curve(&rates, &double).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(y - 3.0, 2.0 * (x - 3.0), max_relative = 1e-12);
            assert!(*x >= 3.0);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let rates = RateSet::default();
        let acq = reference_acq()
            .with_total_photons(&rates, 1e5)
            .unwrap()
            .with_seed(7);
        let a = sample_histogram(&rates, &acq).unwrap();
        let b = sample_histogram(&rates, &acq).unwrap();
        assert_eq!(a, b);
        let c = sample_histogram(&rates, &acq.with_seed(8)).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn sampled_total_within_five_sigma() {
        let rates = RateSet::default();
        let acq = reference_acq()
            .with_total_photons(&rates, 1e6)
            .unwrap()
            .with_seed(2024);
        let h = sample_histogram(&rates, &acq).unwrap();
        assert!((h.total() - 1e6).abs() < 5e3);
        assert!(h.counts.iter().all(|c| c.fract() == 0.0));
    }

    #[test]
    fn rejects_bins_longer_than_period() {
        let acq = AcquisitionConfig::new(25.0, 0.05, 1000);
        assert!(expected_curve(&RateSet::default(), &acq).is_err());
    }
}
