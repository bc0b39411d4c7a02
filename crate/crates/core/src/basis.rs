//! Bin-integrated exponential basis.
//!
//! `g(gamma, t, w) = int_t^{t+w} e^{-gamma s} ds = e^{-gamma t} h(gamma)` with
//! `h(gamma) = (1 - e^{-gamma w}) / gamma`. The fitter also needs the first two
//! derivatives of `h`; for small `gamma w` they are evaluated from the Taylor
//! series to avoid cancellation.

const SERIES_CUTOFF: f64 = 0.05;
const SERIES_TERMS: usize = 12;

/// `h(gamma)` and its first two derivatives with respect to `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct WidthFactor {
    pub h: f64,
    pub dh: f64,
    pub d2h: f64,
}

pub fn width_factor(gamma: f64, width: f64) -> WidthFactor {
    let z = gamma * width;
    if z.abs() < SERIES_CUTOFF {
        // h = w * sum_k (-z)^k / (k+1)!
        let mut h = 0.0;
        let mut dh = 0.0;
        let mut d2h = 0.0;
        let mut fact = 1.0; // (k+1)!
        for k in 0..SERIES_TERMS {
            fact *= (k + 1) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let kf = k as f64;
            h += sign * z.powi(k as i32) / fact;
            if k >= 1 {
                dh += sign * kf * z.powi(k as i32 - 1) / fact;
            }
            if k >= 2 {
                d2h += sign * kf * (kf - 1.0) * z.powi(k as i32 - 2) / fact;
            }
        }
        WidthFactor {
            h: width * h,
            dh: width * width * dh,
            d2h: width * width * width * d2h,
        }
    } else {
        let e = (-z).exp();
        let u = -(-z).exp_m1();
        let du = width * e;
        let d2u = -width * width * e;
        WidthFactor {
            h: u / gamma,
            dh: du / gamma - u / (gamma * gamma),
            d2h: d2u / gamma - 2.0 * du / (gamma * gamma) + 2.0 * u / (gamma * gamma * gamma),
        }
    }
}

/// Integral of `e^{-gamma s}` over `[t, t + width]`.
pub fn bin_integral(gamma: f64, t: f64, width: f64) -> f64 {
    (-gamma * t).exp() * width_factor(gamma, width).h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn bin_integral_matches_quadrature() {
        for &(g, t, w) in &[(1.165, 0.0, 0.025), (0.065, 12.0, 0.025), (10.0, 0.3, 0.5), (1e-4, 3.0, 0.2)] {
            let q = simpson(|s| (-g * s).exp(), t, t + w, 2000);
            let a = bin_integral(g, t, w);
            assert!(((a - q) / q).abs() < 1e-12, "{g} {t} {w}: {a} vs {q}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences_across_cutoff() {
        let w = 0.1;
        for &g in &[0.2, 0.49, 0.51, 3.0, 20.0] {
            let f = width_factor(g, w);
            let e = 1e-5 * g;
            let hp = width_factor(g + e, w);
            let hm = width_factor(g - e, w);
            let dh_fd = (hp.h - hm.h) / (2.0 * e);
            let d2h_fd = (hp.dh - hm.dh) / (2.0 * e);
            assert!(((f.dh - dh_fd) / f.dh).abs() < 1e-7, "dh at {g}");
            assert!(((f.d2h - d2h_fd) / f.d2h).abs() < 1e-6, "d2h at {g}");
        }
    }

    #[test]
    fn zero_rate_limit_is_bin_width() {
        assert_eq!(width_factor(0.0, 0.25).h, 0.25);
    }
}
