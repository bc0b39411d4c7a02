//! Three-level bright/dark/ground exciton kinetics.
//!
//! The bright state decays radiatively and non-radiatively and exchanges
//! population with the dark state through spin flips:
//!
//! ```text
//! d rho_b/dt = -(g_rad + g_nrad + g_db) rho_b + g_db rho_d
//! d rho_d/dt = -(g_nrad + g_db) rho_d + g_db rho_b
//! ```
//!
//! Bright-to-dark and dark-to-bright flips share one rate and bright and dark
//! states share one non-radiative rate. [`detailed_balance_factor`] gives the
//! Boltzmann ratio between the two flip directions for callers that need to
//! relax the first assumption.

use crate::error::{Error, Result};

/// Minimum admissible `gamma_f - gamma_s` (ns^-1).
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// Boltzmann constant in ueV/K.
pub const BOLTZMANN_UEV_PER_K: f64 = 86.173_332_62;

/// Physical rates (ns^-1) and initial populations of one exciton state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub gamma_rad: f64,
    pub gamma_nrad: f64,
    pub gamma_db: f64,
    pub rho_b0: f64,
    pub rho_d0: f64,
}

impl RateSet {
    /// Rates with the equal 0.5/0.5 bright/dark initial populations of weak
    /// non-resonant pumping.
    pub fn new(gamma_rad: f64, gamma_nrad: f64, gamma_db: f64) -> Self {
        Self {
            gamma_rad,
            gamma_nrad,
            gamma_db,
            rho_b0: 0.5,
            rho_d0: 0.5,
        }
    }

    pub fn with_populations(mut self, rho_b0: f64, rho_d0: f64) -> Self {
        self.rho_b0 = rho_b0;
        self.rho_d0 = rho_d0;
        self
    }

    /// Dark-to-bright initial population ratio.
    pub fn beta(&self) -> f64 {
        self.rho_d0 / self.rho_b0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma_rad,
            self.gamma_nrad,
            self.gamma_db,
            self.rho_b0,
            self.rho_d0,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRates("non-finite value".into()));
        }
        if self.gamma_rad <= 0.0 {
            return Err(Error::InvalidRates(format!(
                "gamma_rad must be positive, got {}",
                self.gamma_rad
            )));
        }
        if self.gamma_nrad < 0.0 || self.gamma_db < 0.0 {
            return Err(Error::InvalidRates(
                "gamma_nrad and gamma_db must be nonnegative".into(),
            ));
        }
        if self.rho_b0 < 0.0 || self.rho_d0 < 0.0 || self.rho_b0 + self.rho_d0 > 1.0 + 1e-12 {
            return Err(Error::InvalidRates(format!(
                "initial populations ({}, {}) must be nonnegative and sum to at most 1",
                self.rho_b0, self.rho_d0
            )));
        }
        Ok(())
    }
}

impl Default for RateSet {
    /// Average rates of quantum dots in a homogeneous medium.
    fn default() -> Self {
        Self::new(1.1, 0.06, 0.005)
    }
}

/// Bi-exponential parameterization `A_f e^{-g_f t} + A_s e^{-g_s t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiExpSolution {
    pub gamma_f: f64,
    pub gamma_s: f64,
    pub a_f: f64,
    pub a_s: f64,
}

impl BiExpSolution {
    /// Reorders the components so that `gamma_f >= gamma_s`.
    pub fn canonical(self) -> Self {
        if self.gamma_s > self.gamma_f {
            Self {
                gamma_f: self.gamma_s,
                gamma_s: self.gamma_f,
                a_f: self.a_s,
                a_s: self.a_f,
            }
        } else {
            self
        }
    }

    /// True when the slow channel carries no amplitude or does not decay,
    /// i.e. the spin-flip-free limit.
    pub fn is_mono_exponential(&self) -> bool {
        self.a_s == 0.0 || self.gamma_s == 0.0
    }

    pub fn total_amplitude(&self) -> f64 {
        self.a_f + self.a_s
    }

    /// Amplitude asymmetry `(A_f - A_s) / (A_f + A_s)`.
    pub fn asymmetry(&self) -> f64 {
        (self.a_f - self.a_s) / (self.a_f + self.a_s)
    }

    pub fn scaled(self, k: f64) -> Self {
        Self {
            a_f: self.a_f * k,
            a_s: self.a_s * k,
            ..self
        }
    }
}

/// Closed-form solution of the three-level model for the bright population.
///
/// The expressions are evaluated in cancellation-free forms:
/// `x + y - hypot(x, y) = 2xy / (x + y + hypot(x, y))` for the slow rate and
/// `1 - x / hypot(x, y) = y^2 / (hypot(x, y) (hypot(x, y) + x))` for the slow
/// amplitude, with `x = gamma_rad / 2`, `y = gamma_db`.
pub fn solve_decay(rates: &RateSet) -> Result<BiExpSolution> {
    rates.validate()?;
    let x = 0.5 * rates.gamma_rad;
    let y = rates.gamma_db;
    let root = x.hypot(y);
    let gap = 2.0 * root;
    if gap < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateRates {
            gap,
            threshold: DEGENERACY_THRESHOLD,
        });
    }
    let gamma_f = rates.gamma_nrad + x + y + root;
    let gamma_s = rates.gamma_nrad + 2.0 * x * y / (x + y + root);

    let half_b = 0.5 * rates.rho_b0;
    let feed = rates.rho_d0 * y / gap;
    let a_f = half_b * (1.0 + x / root) - feed;
    let a_s = half_b * (y * y / (root * (root + x))) + feed;

    Ok(BiExpSolution {
        gamma_f,
        gamma_s,
        a_f,
        a_s,
    })
}

/// Bright population `A_f e^{-g_f t} + A_s e^{-g_s t}` at time `t` (ns).
pub fn bright_population(sol: &BiExpSolution, t: f64) -> f64 {
    sol.a_f * (-sol.gamma_f * t).exp() + sol.a_s * (-sol.gamma_s * t).exp()
}

/// Ratio `gamma_bd / gamma_db = exp(delta_bd / k_B T)` for a bright-dark
/// splitting `delta_bd_uev` (ueV) at `temperature_k` (K).
pub fn detailed_balance_factor(delta_bd_uev: f64, temperature_k: f64) -> Result<f64> {
    if !(temperature_k > 0.0) {
        return Err(Error::InvalidRates(format!(
            "temperature must be positive, got {temperature_k}"
        )));
    }
    Ok((delta_bd_uev / (BOLTZMANN_UEV_PER_K * temperature_k)).exp())
}

/// Tolerance used by [`ode_oracle`].
pub const ODE_ORACLE_TOL: f64 = 1e-12;

/// Integrates the rate equations numerically and returns `(rho_b, rho_d)` at
/// each time in `t_grid`.
///
/// Independent of the closed form; only meant for cross-checking it.
pub fn ode_oracle(rates: &RateSet, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    ode_oracle_with_tol(rates, t_grid, ODE_ORACLE_TOL)
}

pub fn ode_oracle_with_tol(rates: &RateSet, t_grid: &[f64], tol: f64) -> Result<Vec<(f64, f64)>> {
    rates.validate()?;
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParameters(
            "time grid must be finite and nonnegative".into(),
        ));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameters("time grid must be sorted".into()));
    }

    let k_b = rates.gamma_rad + rates.gamma_nrad + rates.gamma_db;
    let k_d = rates.gamma_nrad + rates.gamma_db;
    let g = rates.gamma_db;
    let rhs = |y: [f64; 2]| [-k_b * y[0] + g * y[1], -k_d * y[1] + g * y[0]];

    let mut integrator = DormandPrince::new(tol);
    let mut t = 0.0;
    let mut y = [rates.rho_b0, rates.rho_d0];
    let mut h = (0.01 / k_b.max(1e-3)).min(1.0);
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        while t < target {
            let remaining = target - t;
            let clipped = remaining <= h;
            let step = if clipped { remaining } else { h };
            let (y_next, h_next, accepted) = integrator.step(&rhs, y, step);
            if accepted {
                t = if clipped { target } else { t + step };
                y = y_next;
                // a step shortened to land on the grid keeps the old size
                if !clipped {
                    h = h_next;
                }
            } else {
                h = h_next;
            }
            if h < 1e-14 * t.max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
        out.push((y[0], y[1]));
    }
    Ok(out)
}

/// Dormand-Prince 5(4) embedded Runge-Kutta pair for a 2-component
/// autonomous system (the stage times are not needed).
struct DormandPrince {
    tol: f64,
}

impl DormandPrince {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    fn new(tol: f64) -> Self {
        Self { tol }
    }

    /// One trial step; returns the candidate state, the proposed next step
    /// size and whether the error estimate was accepted.
    fn step<F: Fn([f64; 2]) -> [f64; 2]>(&mut self, f: &F, y: [f64; 2], h: f64) -> ([f64; 2], f64, bool) {
        let mut k = [[0.0f64; 2]; 7];
        for s in 0..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = Self::A[s][j];
                ys[0] += h * a * kj[0];
                ys[1] += h * a * kj[1];
            }
            k[s] = f(ys);
        }
        let mut y5 = y;
        let mut err = [0.0f64; 2];
        for s in 0..7 {
            for i in 0..2 {
                y5[i] += h * Self::B5[s] * k[s][i];
                err[i] += h * (Self::B5[s] - Self::B4[s]) * k[s][i];
            }
        }
        let mut norm = 0.0;
        for i in 0..2 {
            let scale = self.tol + self.tol * y[i].abs().max(y5[i].abs());
            norm += (err[i] / scale).powi(2);
        }
        let norm = (norm / 2.0).sqrt();
        let factor = if norm == 0.0 {
            5.0
        } else {
            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        (y5, h * factor, norm <= 1.0)
    }
}
