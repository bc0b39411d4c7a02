//! Physical rates from fitted decay parameters.
//!
//! Measured amplitudes first get the re-excitation correction
//! `A = A~ (1 - e^{-gamma tau})`, then the closed-form bi-exponential solution
//! is inverted. With `D = (gamma_f - gamma_s) / 2`, `beta = rho_d0 / rho_b0`
//! and the amplitude asymmetry `r = (A_f - A_s) / (A_f + A_s)`:
//!
//! ```text
//! y = D [-r beta + sqrt(1 + beta^2 - r^2)] / (1 + beta^2)     (gamma_db)
//! x = r D + beta y                                            (gamma_rad / 2)
//! gamma_nrad = (gamma_f + gamma_s) / 2 - x - y
//! ```
//!
//! Only `r` enters, so the unknown detection prefactor of the measured
//! intensity cancels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{fit_biexponential, FitResult};
use crate::kinetics::BiExpSolution;
use crate::synth::{poisson_counts, DecayHistogram};

#[derive(Debug, Clone, PartialEq)]
pub enum RateFlag {
    /// gamma_nrad is negative but within 3 sigma of zero.
    NegativeNonRadiative,
    LackOfFit,
    NotConverged,
    ParameterAtBound(String),
    /// Number of bootstrap resamples whose extraction failed.
    BootstrapFailures(usize),
}

impl std::fmt::Display for RateFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateFlag::NegativeNonRadiative => write!(f, "negative-nrad"),
            RateFlag::LackOfFit => write!(f, "lack-of-fit"),
            RateFlag::NotConverged => write!(f, "not-converged"),
            RateFlag::ParameterAtBound(p) => write!(f, "parameter-at-bound:{p}"),
            RateFlag::BootstrapFailures(n) => write!(f, "bootstrap-failures:{n}"),
        }
    }
}

/// Lower and upper bound of a confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// 68% intervals of the three rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateIntervals {
    pub gamma_rad: Interval,
    pub gamma_nrad: Interval,
    pub gamma_db: Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedRates {
    pub gamma_rad: f64,
    pub gamma_nrad: f64,
    pub gamma_db: f64,
    pub r_asym: f64,
    pub valid: bool,
    pub flags: Vec<RateFlag>,
    /// Parametric-bootstrap intervals.
    pub ci: Option<RateIntervals>,
    /// Linearized one-sigma errors `(gamma_rad, gamma_nrad, gamma_db)` from
    /// the fit covariance.
    pub linear_sigma: Option<[f64; 3]>,
}

impl ExtractedRates {
    pub fn has_flag(&self, flag: &RateFlag) -> bool {
        self.flags.contains(flag)
    }
}

/// Initial populations `(rho_b0, rho_d0)` summing to one with ratio `beta`.
pub fn populations_for_beta(beta: f64) -> (f64, f64) {
    (1.0 / (1.0 + beta), beta / (1.0 + beta))
}

fn survival_fraction(gamma: f64, rep_period: f64) -> f64 {
    -(-gamma * rep_period).exp_m1()
}

/// Re-excitation correction of measured amplitudes: `A_i = A~_i (1 - e^{-gamma_i tau})`.
pub fn correct_solution(sol: &BiExpSolution, rep_period: f64) -> BiExpSolution {
    BiExpSolution {
        a_f: sol.a_f * survival_fraction(sol.gamma_f, rep_period),
        a_s: sol.a_s * survival_fraction(sol.gamma_s, rep_period),
        ..*sol
    }
}

/// [`correct_solution`] applied to a fit.
pub fn correct_amplitudes(fit: &FitResult, rep_period: f64) -> BiExpSolution {
    correct_solution(&fit.solution, rep_period)
}

/// Raw inversion without sign policies: `(gamma_rad, gamma_nrad, gamma_db, r)`.
fn invert_raw(sol: &BiExpSolution, beta: f64) -> Result<(f64, f64, f64, f64)> {
    if !(sol.gamma_f > sol.gamma_s && sol.gamma_s > 0.0) {
        return Err(Error::InvalidRates(format!(
            "need gamma_f > gamma_s > 0, got ({}, {})",
            sol.gamma_f, sol.gamma_s
        )));
    }
    let sum = sol.a_f + sol.a_s;
    if !(sum > 0.0) {
        return Err(Error::InvalidRates(format!(
            "amplitude sum must be positive, got {sum}"
        )));
    }
    let d = 0.5 * (sol.gamma_f - sol.gamma_s);
    let r = (sol.a_f - sol.a_s) / sum;
    // 1 - r^2 = 4 A_f A_s / (A_f + A_s)^2 without cancellation
    let one_minus_r2 = 4.0 * sol.a_f * sol.a_s / (sum * sum);
    let disc = beta * beta + one_minus_r2;
    if disc < 0.0 {
        return Err(Error::InvalidAsymmetry { r, beta });
    }
    let root = disc.sqrt();
    let y = if r * beta > 0.0 {
        // rationalized form of [-r beta + root] / (1 + beta^2)
        d * one_minus_r2 / (r * beta + root)
    } else {
        d * (-r * beta + root) / (1.0 + beta * beta)
    };
    let x = r * d + beta * y;
    if x <= 0.0 {
        return Err(Error::NegativeRadiative { gamma_rad: 2.0 * x });
    }
    let y = y.max(0.0);
    let gamma_nrad = 0.5 * (sol.gamma_f + sol.gamma_s) - x - y;
    Ok((2.0 * x, gamma_nrad, y, r))
}

/// Closed-form inverse of [`crate::kinetics::solve_decay`] for corrected
/// amplitudes and initial populations `rho_b0`, `rho_d0`.
///
/// Negative `gamma_nrad` is only tolerated at the level of rounding error; use
/// [`invert_rates_with_sigma`] when a statistical uncertainty is known.
pub fn invert_rates(sol: &BiExpSolution, rho_b0: f64, rho_d0: f64) -> Result<ExtractedRates> {
    let sigma = 1e-12 * (sol.gamma_f + sol.gamma_s);
    invert_rates_with_sigma(sol, rho_b0, rho_d0, sigma)
}

/// Like [`invert_rates`]; a negative `gamma_nrad` above `-3 nrad_sigma` is
/// flagged, anything lower is an error.
pub fn invert_rates_with_sigma(
    sol: &BiExpSolution,
    rho_b0: f64,
    rho_d0: f64,
    nrad_sigma: f64,
) -> Result<ExtractedRates> {
    if !(rho_b0 > 0.0 && rho_d0 >= 0.0) {
        return Err(Error::InvalidRates(format!(
            "initial populations must satisfy rho_b0 > 0, rho_d0 >= 0; got ({rho_b0}, {rho_d0})"
        )));
    }
    let beta = rho_d0 / rho_b0;
    let (gamma_rad, gamma_nrad, gamma_db, r) = invert_raw(sol, beta)?;
    let mut flags = Vec::new();
    if gamma_nrad < 0.0 {
        if gamma_nrad <= -3.0 * nrad_sigma {
            return Err(Error::NegativeNonRadiative {
                gamma_nrad,
                sigma: nrad_sigma,
            });
        }
        flags.push(RateFlag::NegativeNonRadiative);
    }
    Ok(ExtractedRates {
        gamma_rad,
        gamma_nrad,
        gamma_db,
        r_asym: r,
        valid: true,
        flags,
        ci: None,
        linear_sigma: None,
    })
}

/// Linearized one-sigma errors of the extracted rates, propagating the fit
/// covariance of `(gamma_f, gamma_s, a_f, a_s)` through correction and
/// inversion by central differences.
pub fn linearized_sigma(fit: &FitResult, rep_period: f64, beta: f64) -> Option<[f64; 3]> {
    let base = [
        fit.solution.gamma_f,
        fit.solution.gamma_s,
        fit.solution.a_f,
        fit.solution.a_s,
    ];
    let eval = |p: [f64; 4]| -> Option<[f64; 3]> {
        let sol = BiExpSolution {
            gamma_f: p[0],
            gamma_s: p[1],
            a_f: p[2],
            a_s: p[3],
        };
        let (a, b, c, _) = invert_raw(&correct_solution(&sol, rep_period), beta).ok()?;
        Some([a, b, c])
    };
    let mut jac = [[0.0; 4]; 3];
    for k in 0..4 {
        let h = 1e-6 * base[k].abs().max(1e-300);
        let mut up = base;
        let mut dn = base;
        up[k] += h;
        dn[k] -= h;
        let (fu, fd) = (eval(up)?, eval(dn)?);
        for i in 0..3 {
            jac[i][k] = (fu[i] - fd[i]) / (2.0 * h);
        }
    }
    let mut out = [0.0; 3];
    for i in 0..3 {
        let mut v = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                v += jac[i][k] * fit.covariance[(k, l)] * jac[i][l];
            }
        }
        out[i] = v.max(0.0).sqrt();
    }
    Some(out)
}

/// Correction, inversion and linearized errors for one fit.
pub fn extract_rates(fit: &FitResult, rep_period: f64, beta: f64) -> Result<ExtractedRates> {
    let sigma = linearized_sigma(fit, rep_period, beta);
    let nrad_sigma = sigma.map_or(0.0, |s| s[1]).max(1e-12 * fit.solution.gamma_f);
    let (rho_b0, rho_d0) = populations_for_beta(beta);
    let mut rates = invert_rates_with_sigma(&correct_amplitudes(fit, rep_period), rho_b0, rho_d0, nrad_sigma)?;
    rates.linear_sigma = sigma;
    if !fit.converged {
        rates.valid = false;
        rates.flags.push(RateFlag::NotConverged);
    }
    for w in &fit.warnings {
        if let crate::fit::FitWarning::ParameterAtBound(name) = w {
            rates.flags.push(RateFlag::ParameterAtBound((*name).to_string()));
        }
    }
    Ok(rates)
}

/// The directly measured (fast) decay rate, i.e. what a single-rate analysis
/// would attribute to radiative decay.
pub fn naive_total_rate(fit: &FitResult) -> f64 {
    fit.solution.gamma_f
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    pub beta: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 200,
            seed: 0,
            beta: 1.0,
        }
    }
}

/// Maximum fraction of failed resamples.
pub const MAX_BOOTSTRAP_FAILURE_FRACTION: f64 = 0.5;

/// Parametric bootstrap of the extracted rates.
///
/// Each resample draws Poisson counts from the fitted model, refits starting
/// at the original optimum and re-extracts the rates. Resample `k` uses the
/// ChaCha8 stream `k` of `config.seed`, so results do not depend on thread
/// scheduling. Intervals are the 16th and 84th percentiles.
pub fn bootstrap_uncertainty(
    hist: &DecayHistogram,
    fit: &FitResult,
    rep_period: f64,
    config: &BootstrapConfig,
) -> Result<ExtractedRates> {
    let mut rates = extract_rates(fit, rep_period, config.beta)?;
    if config.n_boot == 0 {
        return Ok(rates);
    }
    let samples = bootstrap_samples(hist, fit, rep_period, config);
    let good: Vec<[f64; 3]> = samples.iter().flatten().copied().collect();
    let failed = samples.len() - good.len();
    if failed as f64 > MAX_BOOTSTRAP_FAILURE_FRACTION * samples.len() as f64 {
        return Err(Error::BootstrapDegenerate {
            failed,
            total: samples.len(),
        });
    }
    let interval = |k: usize| {
        let mut v: Vec<f64> = good.iter().map(|s| s[k]).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        Interval {
            lo: percentile(&v, 0.16),
            hi: percentile(&v, 0.84),
        }
    };
    rates.ci = Some(RateIntervals {
        gamma_rad: interval(0),
        gamma_nrad: interval(1),
        gamma_db: interval(2),
    });
    if failed > 0 {
        rates.flags.push(RateFlag::BootstrapFailures(failed));
    }
    Ok(rates)
}

/// Extracted `(gamma_rad, gamma_nrad, gamma_db)` per resample; `None` for
/// resamples whose fit or inversion failed.
pub fn bootstrap_samples(
    hist: &DecayHistogram,
    fit: &FitResult,
    rep_period: f64,
    config: &BootstrapConfig,
) -> Vec<Option<[f64; 3]>> {
    let model = fit.model_counts(hist);
    let start = fit.params();
    (0..config.n_boot)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let resample = DecayHistogram {
                counts: poisson_counts(&model, &mut rng),
                ..hist.clone()
            };
            let refit = fit_biexponential(&resample, &start).ok()?;
            if !refit.converged {
                return None;
            }
            let sol = correct_amplitudes(&refit, rep_period);
            let (a, b, c, _) = invert_raw(&sol, config.beta).ok()?;
            Some([a, b, c])
        })
        .collect()
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{solve_decay, RateSet};
    use crate::synth::wraparound_amplitudes;
    use approx::assert_relative_eq;

    fn reference_solution() -> BiExpSolution {
        BiExpSolution {
            gamma_f: 1.165_022_726_803_174_9,
            gamma_s: 0.064_977_273_196_825_075,
            a_f: 0.497_717_036_697_570_72,
            a_s: 0.002_282_963_302_429_275_2,
        }
    }

    #[test]
    fn reference_inversion() {
        let r = invert_rates(&reference_solution(), 0.5, 0.5).unwrap();
        assert_relative_eq!(r.gamma_rad, 1.1, max_relative = 1e-12);
        assert_relative_eq!(r.gamma_nrad, 0.06, max_relative = 1e-10);
        assert_relative_eq!(r.gamma_db, 0.005, max_relative = 1e-10);
        assert!(r.valid && r.flags.is_empty());
    }

    #[test]
    fn symmetric_amplitudes_closed_form() {
        let d = 0.4;
        let sol = BiExpSolution {
            gamma_f: 1.0 + d,
            gamma_s: 1.0 - d,
            a_f: 0.25,
            a_s: 0.25,
        };
        let r = invert_rates(&sol, 0.5, 0.5).unwrap();
        assert_relative_eq!(r.gamma_rad, 2f64.sqrt() * d, max_relative = 1e-14);
        assert_relative_eq!(r.gamma_db, d / 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(r.r_asym, 0.0);
    }

    #[test]
    fn pure_bright_decay_selects_zero_spin_flip() {
        // r = 1 exactly
        let sol = BiExpSolution {
            gamma_f: 1.2,
            gamma_s: 0.2,
            a_f: 0.5,
            a_s: 0.0,
        };
        let r = invert_rates(&sol, 0.5, 0.5).unwrap();
        assert_eq!(r.gamma_db, 0.0);
        assert_relative_eq!(r.gamma_rad, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn invalid_asymmetry_and_negative_radiative() {
        // r = -3 with beta = 1: r^2 > 1 + beta^2
        let sol = BiExpSolution {
            gamma_f: 1.0,
            gamma_s: 0.5,
            a_f: -1.0,
            a_s: 2.0,
        };
        assert!(matches!(
            invert_rates(&sol, 0.5, 0.5),
            Err(Error::InvalidAsymmetry { .. })
        ));
        // r = -1, beta = 0: x = r D < 0
        let sol = BiExpSolution {
            gamma_f: 1.0,
            gamma_s: 0.5,
            a_f: 0.0,
            a_s: 1.0,
        };
        assert!(matches!(
            invert_rates(&sol, 1.0, 0.0),
            Err(Error::NegativeRadiative { .. })
        ));
    }

    #[test]
    fn negative_nrad_flagged_within_three_sigma() {
        let truth = RateSet::new(1.0, 0.0, 0.05);
        let mut sol = solve_decay(&truth).unwrap();
        sol.gamma_s -= 0.002;
        sol.gamma_f -= 0.002;
        let flagged = invert_rates_with_sigma(&sol, 0.5, 0.5, 0.001).unwrap();
        assert!(flagged.gamma_nrad < 0.0);
        assert!(flagged.has_flag(&RateFlag::NegativeNonRadiative));
        assert!(matches!(
            invert_rates_with_sigma(&sol, 0.5, 0.5, 0.0005),
            Err(Error::NegativeNonRadiative { .. })
        ));
    }

    #[test]
    fn correction_examples() {
        let sol = reference_solution();
        let c = correct_solution(&sol, 25.0);
        assert_relative_eq!(c.a_s / sol.a_s, 0.802_976_413_684_413_7, max_relative = 1e-13);
        let far = correct_solution(&sol, 1e6);
        assert_eq!(far.a_f, sol.a_f);
        assert_eq!(far.a_s, sol.a_s);
        // first-order limit gamma tau -> 0
        let tiny = BiExpSolution {
            gamma_s: 1e-12,
            ..sol
        };
        let c = correct_solution(&tiny, 10.0);
        assert_relative_eq!(c.a_s, sol.a_s * 1e-11, max_relative = 1e-10);
    }

    #[test]
    fn correction_inverts_wraparound() {
        let sol = reference_solution();
        for tau in [25.0, 50.0, 100.0, 200.0] {
            let back = correct_solution(&wraparound_amplitudes(&sol, tau), tau);
            assert_relative_eq!(back.a_f, sol.a_f, max_relative = 1e-12);
            assert_relative_eq!(back.a_s, sol.a_s, max_relative = 1e-12);
        }
    }

    #[test]
    fn naive_rate_matches_inhibited_example() {
        // 40-digit closed-form gamma_f for (0.02, 0.06, 0.005)
        let sol = solve_decay(&RateSet::new(0.02, 0.06, 0.005)).unwrap();
        assert_relative_eq!(sol.gamma_f, 0.086_180_339_887_498_948, max_relative = 1e-14);
        let sol = solve_decay(&RateSet::new(0.8, 0.0, 0.0)).unwrap();
        assert_eq!(sol.gamma_f, 0.8);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_relative_eq!(percentile(&v, 0.16), 1.64);
    }
}
