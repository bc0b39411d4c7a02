//! Poisson maximum-likelihood fit of a bi-exponential decay plus flat
//! background to a [`DecayHistogram`].
//!
//! The model for bin `j` starting at `t_j` is
//! `mu_j = a_1 g(gamma_1, t_j) + a_2 g(gamma_2, t_j) + b` where `g` is the
//! bin-integrated exponential (see [`crate::basis`]). Amplitudes are in counts
//! per ns at `t = 0`, the background in counts per bin.
//!
//! All five parameters are optimized as logarithms so positivity never needs
//! an explicit constraint. The iteration is a damped Newton (Levenberg-Marquardt)
//! trust-region scheme on the observed information; steps are accepted only if
//! the negative log-likelihood decreases.

use nalgebra::{SMatrix, SVector};

use crate::basis::width_factor;
use crate::error::{Error, Result};
use crate::kinetics::BiExpSolution;
use crate::synth::{biexp_bin_counts, DecayHistogram};

pub type Vector5 = SVector<f64, 5>;
pub type Matrix5 = SMatrix<f64, 5, 5>;

/// Natural-unit parameter vector `(gamma_f, gamma_s, a_f, a_s, background)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub gamma_f: f64,
    pub gamma_s: f64,
    pub a_f: f64,
    pub a_s: f64,
    pub background: f64,
}

impl FitParams {
    pub fn to_array(self) -> [f64; 5] {
        [self.gamma_f, self.gamma_s, self.a_f, self.a_s, self.background]
    }

    pub fn from_array(p: [f64; 5]) -> Self {
        Self {
            gamma_f: p[0],
            gamma_s: p[1],
            a_f: p[2],
            a_s: p[3],
            background: p[4],
        }
    }

    pub fn solution(&self) -> BiExpSolution {
        BiExpSolution {
            gamma_f: self.gamma_f,
            gamma_s: self.gamma_s,
            a_f: self.a_f,
            a_s: self.a_s,
        }
    }

    fn log_params(&self) -> Result<Vector5> {
        let p = self.to_array();
        if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameters(format!(
                "parameters must be finite and positive: {p:?}"
            )));
        }
        Ok(Vector5::from_iterator(p.iter().map(|v| v.ln())))
    }

    fn from_log(theta: &Vector5) -> Self {
        Self::from_array([
            theta[0].exp(),
            theta[1].exp(),
            theta[2].exp(),
            theta[3].exp(),
            theta[4].exp(),
        ])
    }
}

/// Starting point for [`fit_biexponential`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub params: FitParams,
    /// No fast component could be resolved above the slow one; the fast
    /// rate and amplitude are placeholders.
    pub fast_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// A parameter ended at its numerical floor.
    ParameterAtBound(&'static str),
    NotConverged,
}

impl std::fmt::Display for FitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWarning::ParameterAtBound(name) => write!(f, "parameter-at-bound:{name}"),
            FitWarning::NotConverged => write!(f, "not-converged"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Rates and measured (uncorrected) amplitudes in counts per ns;
    /// canonical order `gamma_f >= gamma_s`.
    pub solution: BiExpSolution,
    /// Counts per bin.
    pub background: f64,
    /// `a_f + a_s` (counts per ns).
    pub scale: f64,
    /// Covariance over `(gamma_f, gamma_s, a_f, a_s, background)`.
    pub covariance: Matrix5,
    /// `sum_j mu_j - c_j ln mu_j` at the optimum.
    pub nll: f64,
    pub converged: bool,
    pub n_iter: usize,
    /// Negative log-likelihood after every accepted step, starting with the guess.
    pub nll_history: Vec<f64>,
    pub warnings: Vec<FitWarning>,
}

impl FitResult {
    pub fn params(&self) -> FitParams {
        FitParams {
            gamma_f: self.solution.gamma_f,
            gamma_s: self.solution.gamma_s,
            a_f: self.solution.a_f,
            a_s: self.solution.a_s,
            background: self.background,
        }
    }

    /// One-sigma standard errors from the diagonal of the covariance.
    pub fn std_errors(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.covariance[(i, i)].max(0.0).sqrt())
    }

    /// Expected counts per bin of the fitted model on `hist`'s bin layout.
    pub fn model_counts(&self, hist: &DecayHistogram) -> Vec<f64> {
        biexp_bin_counts(
            &self.solution,
            hist.t0,
            hist.bin_width,
            hist.len(),
            1.0,
            self.background,
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative change of the negative log-likelihood.
    pub nll_rel_tol: f64,
    /// Euclidean norm of the gradient with respect to the log-parameters.
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            nll_rel_tol: 1e-10,
            grad_tol: 1e-8,
        }
    }
}

/// Poisson likelihood of the bi-exponential model over one histogram.
///
/// Internally the likelihood is evaluated as the half deviance
/// `sum_j mu_j - c_j - c_j ln(mu_j / c_j)`, which differs from the negative
/// log-likelihood by a data-only constant but stays small near the optimum,
/// so decreases are resolved far below the magnitude of the likelihood itself.
pub struct PoissonModel<'a> {
    t0: f64,
    width: f64,
    counts: &'a [f64],
    /// `sum_j c_j - c_j ln c_j`
    offset: f64,
}

/// Objective value with gradient and Hessian in log-parameters.
#[derive(Debug, Clone)]
pub struct Derivatives {
    /// Negative log-likelihood `sum_j mu_j - c_j ln mu_j`.
    pub nll: f64,
    /// Half deviance; equals `nll` minus a constant of the data.
    pub deviance: f64,
    pub gradient: Vector5,
    pub hessian: Matrix5,
}

fn half_deviance_term(mu: f64, c: f64) -> f64 {
    if c > 0.0 {
        let d = mu - c;
        d - c * (d / c).ln_1p()
    } else {
        mu
    }
}

impl<'a> PoissonModel<'a> {
    pub fn new(hist: &'a DecayHistogram) -> Self {
        let offset = hist
            .counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| c - c * c.ln())
            .sum();
        Self {
            t0: hist.t0,
            width: hist.bin_width,
            counts: &hist.counts,
            offset,
        }
    }

    /// Negative log-likelihood `sum_j mu_j - c_j ln mu_j` at log-parameters `theta`.
    pub fn nll(&self, theta: &Vector5) -> f64 {
        self.deviance(theta) + self.offset
    }

    /// Half deviance at log-parameters `theta`; infinite where some bin with
    /// counts has a nonpositive mean.
    pub fn deviance(&self, theta: &Vector5) -> f64 {
        let p = FitParams::from_log(theta);
        let h1 = width_factor(p.gamma_f, self.width).h;
        let h2 = width_factor(p.gamma_s, self.width).h;
        let mut total = 0.0;
        for (j, &c) in self.counts.iter().enumerate() {
            let t = self.t0 + j as f64 * self.width;
            let mu = p.a_f * (-p.gamma_f * t).exp() * h1 + p.a_s * (-p.gamma_s * t).exp() * h2 + p.background;
            if c > 0.0 && mu <= 0.0 {
                return f64::INFINITY;
            }
            total += half_deviance_term(mu, c);
        }
        total
    }

    /// Objective, gradient and observed-information Hessian with respect to
    /// the log-parameters.
    pub fn derivatives(&self, theta: &Vector5) -> Derivatives {
        let p = FitParams::from_log(theta);
        let (g1, g2) = (p.gamma_f, p.gamma_s);
        let w1 = width_factor(g1, self.width);
        let w2 = width_factor(g2, self.width);
        let mut deviance = 0.0;
        let mut grad = Vector5::zeros();
        let mut hess = Matrix5::zeros();
        for (j, &c) in self.counts.iter().enumerate() {
            let t = self.t0 + j as f64 * self.width;
            let e1 = (-g1 * t).exp();
            let e2 = (-g2 * t).exp();
            let b1 = e1 * w1.h;
            let b2 = e2 * w2.h;
            // d/dgamma and d2/dgamma2 of the bin integral
            let db1 = -t * b1 + e1 * w1.dh;
            let db2 = -t * b2 + e2 * w2.dh;
            let d2b1 = t * t * b1 - 2.0 * t * e1 * w1.dh + e1 * w1.d2h;
            let d2b2 = t * t * b2 - 2.0 * t * e2 * w2.dh + e2 * w2.d2h;

            let mu = p.a_f * b1 + p.a_s * b2 + p.background;
            deviance += half_deviance_term(mu, c);
            let d = [
                p.a_f * g1 * db1,
                p.a_s * g2 * db2,
                p.a_f * b1,
                p.a_s * b2,
                p.background,
            ];
            let resid = (mu - c) / mu;
            let curv = c / (mu * mu);
            for k in 0..5 {
                grad[k] += resid * d[k];
                for l in k..5 {
                    hess[(k, l)] += curv * d[k] * d[l];
                }
            }
            // second derivatives of mu in log-parameters
            let m00 = p.a_f * (g1 * db1 + g1 * g1 * d2b1);
            let m11 = p.a_s * (g2 * db2 + g2 * g2 * d2b2);
            hess[(0, 0)] += resid * m00;
            hess[(1, 1)] += resid * m11;
            hess[(0, 2)] += resid * d[0];
            hess[(1, 3)] += resid * d[1];
            hess[(2, 2)] += resid * d[2];
            hess[(3, 3)] += resid * d[3];
            hess[(4, 4)] += resid * d[4];
        }
        for k in 0..5 {
            for l in 0..k {
                hess[(k, l)] = hess[(l, k)];
            }
        }
        Derivatives {
            nll: deviance + self.offset,
            deviance,
            gradient: grad,
            hessian: hess,
        }
    }
}

/// Numerical floors of the log-parameters; hitting one raises a warning.
fn floors(hist: &DecayHistogram) -> Vector5 {
    let peak = hist.counts.iter().cloned().fold(1.0, f64::max);
    let amp_floor = (1e-9 * peak / hist.bin_width).ln();
    Vector5::new(
        (1e-9f64).ln(),
        (1e-9f64).ln(),
        amp_floor,
        amp_floor,
        (1e-12 * peak).ln(),
    )
}

const PARAM_NAMES: [&str; 5] = ["gamma_f", "gamma_s", "a_f", "a_s", "background"];
const MAX_LOG_STEP: f64 = 2.0;

/// Maximizes the Poisson likelihood starting from `guess`.
pub fn fit_biexponential(hist: &DecayHistogram, guess: &FitParams) -> Result<FitResult> {
    fit_biexponential_with(hist, guess, &FitOptions::default())
}

pub fn fit_biexponential_with(
    hist: &DecayHistogram,
    guess: &FitParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    if hist.len() < 6 {
        return Err(Error::InsufficientSignal(format!(
            "{} bins cannot constrain 5 parameters",
            hist.len()
        )));
    }
    let model = PoissonModel::new(hist);
    let floor = floors(hist);
    let mut theta = guess.log_params()?;
    for k in 0..5 {
        theta[k] = theta[k].max(floor[k]);
    }

    let mut cur = model.derivatives(&theta);
    if !cur.deviance.is_finite() {
        return Err(Error::InvalidParameters(
            "initial guess gives a non-finite likelihood".into(),
        ));
    }
    let mut history = vec![cur.nll];
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut converged = false;
    let mut n_iter = 0;
    let mut last_rel_change = f64::INFINITY;

    while n_iter < opts.max_iter {
        n_iter += 1;
        // Parameters held at their floor by an outward gradient are frozen.
        let active: [bool; 5] =
            std::array::from_fn(|k| theta[k] <= floor[k] && cur.gradient[k] > 0.0);
        let reduced = restrict(&cur, &active);
        if last_rel_change < opts.nll_rel_tol && reduced.gradient.norm() < opts.grad_tol {
            converged = true;
            break;
        }

        let step = match damped_step(&reduced, lambda) {
            Some(s) => s,
            None => {
                lambda *= nu;
                nu *= 2.0;
                continue;
            }
        };
        let mut delta = step;
        let biggest = delta.amax();
        if biggest > MAX_LOG_STEP {
            delta *= MAX_LOG_STEP / biggest;
        }
        let mut trial = theta + delta;
        for k in 0..5 {
            trial[k] = trial[k].max(floor[k]);
        }
        let delta = trial - theta;
        let predicted = -(cur.gradient.dot(&delta) + 0.5 * delta.dot(&(cur.hessian * delta)));
        let trial_dev = model.deviance(&trial);

        if trial_dev.is_finite() && trial_dev < cur.deviance {
            let actual = cur.deviance - trial_dev;
            let rho = if predicted > 0.0 { actual / predicted } else { 0.0 };
            lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
            last_rel_change = actual / (trial_dev + model.offset).abs().max(1.0);
            theta = trial;
            cur = model.derivatives(&theta);
            history.push(cur.nll);
        } else {
            // Once the Newton decrement is below the rounding level of the
            // objective no further decrease can be resolved.
            let resolution = 1e3 * f64::EPSILON * cur.deviance.abs().max(1.0);
            if newton_decrement(&reduced).is_some_and(|d| d < resolution) {
                converged = true;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e16 {
                break;
            }
        }
    }

    let params = FitParams::from_log(&theta);
    let mut warnings = Vec::new();
    for k in 0..5 {
        if theta[k] <= floor[k] + 1e-6 {
            warnings.push(FitWarning::ParameterAtBound(PARAM_NAMES[k]));
        }
    }
    if !converged {
        warnings.push(FitWarning::NotConverged);
    }

    let cov_log = invert_information(&cur.hessian);
    let jac = Matrix5::from_diagonal(&Vector5::from(params.to_array()));
    let mut covariance = jac * cov_log * jac;
    covariance = 0.5 * (covariance + covariance.transpose());

    let swapped = params.gamma_s > params.gamma_f;
    let (solution, covariance) = if swapped {
        let perm = [1, 0, 3, 2, 4];
        let permuted = Matrix5::from_fn(|i, j| covariance[(perm[i], perm[j])]);
        (params.solution().canonical(), permuted)
    } else {
        (params.solution(), covariance)
    };
    if swapped {
        for w in warnings.iter_mut() {
            if let FitWarning::ParameterAtBound(name) = w {
                *name = match *name {
                    "gamma_f" => "gamma_s",
                    "gamma_s" => "gamma_f",
                    "a_f" => "a_s",
                    "a_s" => "a_f",
                    other => other,
                };
            }
        }
    }

    Ok(FitResult {
        solution,
        background: params.background,
        scale: solution.a_f + solution.a_s,
        covariance,
        nll: cur.nll,
        converged,
        n_iter,
        nll_history: history,
        warnings,
    })
}

/// Gradient and Hessian with the frozen coordinates decoupled.
fn restrict(d: &Derivatives, active: &[bool; 5]) -> Derivatives {
    let mut out = d.clone();
    for k in (0..5).filter(|&k| active[k]) {
        out.gradient[k] = 0.0;
        for l in 0..5 {
            out.hessian[(k, l)] = 0.0;
            out.hessian[(l, k)] = 0.0;
        }
        out.hessian[(k, k)] = 1.0;
    }
    out
}

fn damped_step(d: &Derivatives, lambda: f64) -> Option<Vector5> {
    let max_diag = (0..5).map(|k| d.hessian[(k, k)].abs()).fold(0.0, f64::max);
    let mut a = d.hessian;
    for k in 0..5 {
        a[(k, k)] += lambda * d.hessian[(k, k)].abs().max(1e-12 * max_diag.max(1e-300));
    }
    let chol = a.cholesky()?;
    let step = chol.solve(&(-d.gradient));
    step.iter().all(|v| v.is_finite()).then_some(step)
}

fn newton_decrement(d: &Derivatives) -> Option<f64> {
    let chol = d.hessian.cholesky()?;
    Some(0.5 * d.gradient.dot(&chol.solve(&d.gradient)))
}

/// Inverse of the observed information; falls back to a pseudo-inverse on the
/// positive eigenvalues when the information is not positive definite.
fn invert_information(h: &Matrix5) -> Matrix5 {
    if let Some(chol) = h.cholesky() {
        return chol.inverse();
    }
    let eig = h.symmetric_eigen();
    let max_ev = eig.eigenvalues.amax();
    let mut inv = Matrix5::zeros();
    for k in 0..5 {
        let ev = eig.eigenvalues[k];
        if ev > 1e-12 * max_ev {
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / ev;
        }
    }
    inv
}

// ---------------------------------------------------------------------------
// Initial guess

const MIN_NONZERO_BINS: usize = 20;

/// Heuristic starting point.
///
/// Background from the mean of the last 5% of bins; slow rate and background
/// refined by a variable-projection fit of `A e^{-gamma t} + b` from the middle
/// of the signal window to the end of the histogram; fast rate from a log-linear fit to the early
/// residual after the slow component is removed.
pub fn initial_guess(hist: &DecayHistogram) -> Result<InitialGuess> {
    let n = hist.len();
    let nonzero = hist.counts.iter().filter(|&&c| c > 0.0).count();
    if nonzero < MIN_NONZERO_BINS {
        return Err(Error::InsufficientSignal(format!(
            "{nonzero} nonzero bins, at least {MIN_NONZERO_BINS} required"
        )));
    }
    let c = &hist.counts;
    let n_tail = (n / 20).max(1);
    let b_raw = c[n - n_tail..].iter().sum::<f64>() / n_tail as f64;
    let (peak_idx, peak) = c
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if peak < 10.0 * b_raw || peak <= 0.0 {
        return Err(Error::InsufficientSignal(format!(
            "peak {peak} counts is below 10x the background estimate {b_raw}"
        )));
    }

    // end of the signal window: last block clearly above the tail level
    let block = (n / 100).max(1);
    let threshold = b_raw + 3.0 * (b_raw.max(1.0) / block as f64).sqrt();
    let mut end = n - 1;
    let mut j = n;
    while j > peak_idx + block {
        let lo = j - block;
        let mean = c[lo..j].iter().sum::<f64>() / block as f64;
        if mean > threshold {
            end = j - 1;
            break;
        }
        j = lo;
    }
    if j <= peak_idx + block {
        end = (peak_idx + 2 * block).min(n - 1);
    }
    if end < peak_idx + 8 {
        end = (peak_idx + 8).min(n - 1);
    }

    let t = |i: usize| hist.bin_start(i) + 0.5 * hist.bin_width;
    let tail_start = peak_idx + (end - peak_idx) / 2;
    let tail: Vec<(f64, f64)> = (tail_start..n).map(|i| (t(i), c[i])).collect();
    let (gamma_s, amp_s_bin, bg) = tail_fit(&tail, b_raw);

    let width = hist.bin_width;
    let a_s = amp_s_bin / width_factor(gamma_s, width).h;

    // early residual above the slow component
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for i in peak_idx..tail_start {
        let r = c[i] - amp_s_bin * (-gamma_s * t(i)).exp() - bg;
        let sigma = c[i].max(1.0).sqrt();
        if r > 3.0 * sigma {
            xs.push(t(i));
            ys.push(r.ln());
            ws.push(r * r / c[i].max(1.0));
        } else {
            break;
        }
    }
    let fast = if xs.len() >= 3 {
        weighted_line(&xs, &ys, &ws).and_then(|(slope, icpt)| {
            let g = -slope;
            (g > 1.05 * gamma_s && g.is_finite()).then(|| (g, icpt.exp()))
        })
    } else {
        None
    };
    let (gamma_f, a_f, fast_degenerate) = match fast {
        Some((g, amp_bin)) => (g, amp_bin / width_factor(g, width).h, false),
        None => (3.0 * gamma_s, 0.01 * a_s, true),
    };

    let bg_floor = 1e-6 * peak;
    Ok(InitialGuess {
        params: FitParams {
            gamma_f,
            gamma_s,
            a_f: a_f.max(1e-6 * a_s),
            a_s,
            background: bg.max(bg_floor),
        },
        fast_degenerate,
    })
}

/// Variable-projection fit of `A e^{-gamma t} + b`, `b` in `[0, b_max]`,
/// weighted by inverse Poisson variance. Returns `(gamma, A, b)`.
fn tail_fit(points: &[(f64, f64)], b_max: f64) -> (f64, f64, f64) {
    let t_ref = points[0].0;
    let sse = |gamma: f64| -> (f64, f64, f64) {
        let mut s = [0.0; 5]; // sum w e^2, w e, w, w e y, w y
        for &(t, y) in points {
            let w = 1.0 / y.max(1.0);
            let e = (-gamma * (t - t_ref)).exp();
            s[0] += w * e * e;
            s[1] += w * e;
            s[2] += w;
            s[3] += w * e * y;
            s[4] += w * y;
        }
        let det = s[0] * s[2] - s[1] * s[1];
        let (mut a, mut b) = if det.abs() > 1e-300 {
            ((s[3] * s[2] - s[1] * s[4]) / det, (s[0] * s[4] - s[1] * s[3]) / det)
        } else {
            (s[3] / s[0], 0.0)
        };
        if !(0.0..=b_max).contains(&b) {
            b = b.clamp(0.0, b_max);
            a = (s[3] - b * s[1]) / s[0];
        }
        if a <= 0.0 {
            return (f64::INFINITY, a, b);
        }
        let cost: f64 = points
            .iter()
            .map(|&(t, y)| {
                let r = y - a * (-gamma * (t - t_ref)).exp() - b;
                r * r / y.max(1.0)
            })
            .sum();
        (cost, a, b)
    };

    let (lo, hi) = (1e-4f64.ln(), 1e2f64.ln());
    let n_grid = 120;
    let grid: Vec<f64> = (0..=n_grid)
        .map(|k| lo + (hi - lo) * k as f64 / n_grid as f64)
        .collect();
    let costs: Vec<f64> = grid.iter().map(|&lg| sse(lg.exp()).0).collect();
    let best = costs
        .iter()
        .enumerate()
        .fold(0, |bi, (i, &v)| if v < costs[bi] { i } else { bi });

    // golden-section refinement on the bracketing interval
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(n_grid)];
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = sse(x1.exp()).0;
    let mut f2 = sse(x2.exp()).0;
    for _ in 0..60 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = sse(x1.exp()).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = sse(x2.exp()).0;
        }
    }
    let gamma = (0.5 * (a + b)).exp();
    let (cost, amp_ref, bg) = sse(gamma);
    // amplitude referred back to t = 0
    let free = (gamma, amp_ref * (gamma * t_ref).exp(), bg);
    if b_max <= 0.0 {
        return free;
    }
    // The background is only kept when the tail curvature resolves it;
    // otherwise it trades off against the rate and b = 0 is less biased.
    let (g0, a0, _) = tail_fit(points, 0.0);
    let cost0: f64 = points
        .iter()
        .map(|&(t, y)| {
            let r = y - a0 * (-g0 * t).exp();
            r * r / y.max(1.0)
        })
        .sum();
    if cost0 - cost > BACKGROUND_SIGNIFICANCE {
        free
    } else {
        (g0, a0, 0.0)
    }
}

/// Chi-square improvement required to keep a fitted tail background.
const BACKGROUND_SIGNIFICANCE: f64 = 25.0;

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Guess followed by fit.
pub fn fit_histogram(hist: &DecayHistogram) -> Result<FitResult> {
    let guess = initial_guess(hist)?;
    fit_biexponential(hist, &guess.params)
}

// ---------------------------------------------------------------------------
// Goodness of fit

/// Minimum expected count for a bin to enter the Pearson statistic.
pub const MIN_EXPECTED_FOR_CHI2: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    pub n_bins_used: usize,
    pub lack_of_fit: bool,
}

/// Pearson chi-square over bins with expected count of at least 5.
pub fn goodness_of_fit(hist: &DecayHistogram, fit: &FitResult) -> GoodnessOfFit {
    let mu = fit.model_counts(hist);
    let mut chi2 = 0.0;
    let mut used = 0usize;
    for (m, c) in mu.iter().zip(&hist.counts) {
        if *m >= MIN_EXPECTED_FOR_CHI2 {
            chi2 += (c - m) * (c - m) / m;
            used += 1;
        }
    }
    let dof = used.saturating_sub(5);
    let reduced = if dof > 0 { chi2 / dof as f64 } else { f64::NAN };
    let lack_of_fit = dof > 0 && reduced > 1.0 + 5.0 * (2.0f64 / dof as f64).sqrt();
    GoodnessOfFit {
        chi2,
        dof,
        reduced_chi2: reduced,
        n_bins_used: used,
        lack_of_fit,
    }
}
