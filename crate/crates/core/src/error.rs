use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid rates: {0}")]
    InvalidRates(String),

    /// Fast and slow rates coincide; the amplitude expressions are singular.
    #[error("degenerate rates: gamma_f - gamma_s = {gap:e} ns^-1 is below {threshold:e}")]
    DegenerateRates { gap: f64, threshold: f64 },

    #[error("ODE step size underflow at t = {t} ns (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("invalid acquisition settings: {0}")]
    InvalidAcquisition(String),

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("invalid fit parameters: {0}")]
    InvalidParameters(String),

    /// r^2 > 1 + beta^2: the amplitude asymmetry admits no real inversion.
    #[error("invalid amplitude asymmetry r = {r} for beta = {beta}")]
    InvalidAsymmetry { r: f64, beta: f64 },

    #[error("extracted radiative rate is not positive ({gamma_rad} ns^-1)")]
    NegativeRadiative { gamma_rad: f64 },

    #[error("extracted non-radiative rate {gamma_nrad} ns^-1 is below -3 sigma ({sigma})")]
    NegativeNonRadiative { gamma_nrad: f64, sigma: f64 },

    #[error("bootstrap degenerate: {failed} of {total} resamples failed")]
    BootstrapDegenerate { failed: usize, total: usize },

    #[error("too few reference records: {found} valid, at least 2 required")]
    TooFewReferences { found: usize },

    #[error("empty LDOS map: no valid in-crystal records")]
    EmptyMap,

    #[error("invalid theory overlay: {0}")]
    InvalidOverlay(String),
}

pub type Result<T> = std::result::Result<T, Error>;
