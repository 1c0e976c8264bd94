//! CRPS and threshold-weighted CRPS closed forms for Gaussian forecasts,
//! their expected (entropy) versions, and an independent quadrature oracle.
//!
//! The weighted score is
//!   CRPS_gamma(F, y) = integral of [F(u) - 1{y <= u}]^2 dgamma(u),
//! and the expected score of a forecast under itself reduces to
//!   CRPS_gamma(F) = integral of F(u)(1 - F(u)) dgamma(u).
//! Two weighting measures are supported besides the unweighted score: an
//! indicator of the region above a threshold, and a Gaussian density
//! centered at the threshold with scale `sigma` (we write `sigma_gamma`).

use crate::dist::{bvn_cdf_at_origin, std_normal_cdf, std_normal_pdf, BvnParams, Gaussian1D};
use crate::error::{Error, Result};

const FRAC_1_SQRT_PI: f64 = 0.5641895835477563;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Weighting measure of the threshold-weighted CRPS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightSpec {
    /// Lebesgue measure: the classical CRPS.
    Unweighted,
    /// d gamma_1(u) = 1{threshold <= u} du.
    IndicatorAbove { threshold: f64 },
    /// d gamma_2(u) = phi((u - threshold) / sigma) / sigma du, sigma > 0.
    GaussianAtThreshold { threshold: f64, sigma: f64 },
}

/// Classical CRPS of a Gaussian forecast. A zero-variance forecast is a
/// point mass and scores the absolute error.
pub fn crps_gaussian(f: Gaussian1D, y: f64) -> f64 {
    if f.variance <= 0.0 {
        return (y - f.mean).abs();
    }
    let s = f.sd();
    let z = (y - f.mean) / s;
    s * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z) - FRAC_1_SQRT_PI)
}

/// Threshold-weighted CRPS with the indicator weight above `t`.
///
/// This equals the classical CRPS of the left-censored forecast evaluated
/// at the censored observation max(y, t).
pub fn twcrps_indicator(f: Gaussian1D, y: f64, t: f64) -> f64 {
    if f.variance <= 0.0 {
        // Point-mass limit: censored absolute error.
        return (y.max(t) - f.mean.max(t)).abs();
    }
    let s = f.sd();
    let tt = (t - f.mean) / s;
    let yt = (y.max(t) - f.mean) / s;
    let p = std_normal_cdf(tt);
    let v = s * (-tt * p * p + yt * (2.0 * std_normal_cdf(yt) - 1.0) + 2.0 * std_normal_pdf(yt)
        - 2.0 * std_normal_pdf(tt) * p
        - FRAC_1_SQRT_PI * (1.0 - std_normal_cdf(tt * SQRT_2)));
    v.max(0.0)
}

/// Threshold-weighted CRPS with the Gaussian weight centered at `t` with
/// scale `sigma_gamma`. The result lies in [0, 1].
pub fn twcrps_gaussian_weight(f: Gaussian1D, y: f64, t: f64, sigma_gamma: f64) -> f64 {
    assert!(sigma_gamma > 0.0, "sigma_gamma must be positive");
    let s2 = f.variance;
    let sg2 = sigma_gamma * sigma_gamma;
    let d = f.mean - t;
    let a = bvn_cdf_at_origin(&BvnParams {
        mean: [d, d],
        cov: [[sg2 + s2, sg2], [sg2, sg2 + s2]],
    });
    let b = bvn_cdf_at_origin(&BvnParams {
        mean: [d, y - t],
        cov: [[sg2 + s2, sg2], [sg2, sg2]],
    });
    (a - 2.0 * b + std_normal_cdf((t - y) / sigma_gamma)).clamp(0.0, 1.0)
}

/// Expected threshold-weighted CRPS (indicator weight) of a Gaussian
/// forecast under itself.
pub fn expected_twcrps_indicator(f: Gaussian1D, t: f64) -> f64 {
    if f.variance <= 0.0 {
        return 0.0;
    }
    let s = f.sd();
    let tt = (t - f.mean) / s;
    let p = std_normal_cdf(tt);
    let v = s * (tt * p * p - tt * p + FRAC_1_SQRT_PI
        - FRAC_1_SQRT_PI * std_normal_cdf(tt * SQRT_2)
        + 2.0 * std_normal_pdf(tt) * p
        - std_normal_pdf(tt));
    v.max(0.0)
}

/// Expected threshold-weighted CRPS (Gaussian weight) of a Gaussian
/// forecast under itself: a single bivariate CDF evaluation, symmetric in
/// the mean about `t` and bounded by 1/4.
pub fn expected_twcrps_gaussian_weight(f: Gaussian1D, t: f64, sigma_gamma: f64) -> f64 {
    assert!(sigma_gamma > 0.0, "sigma_gamma must be positive");
    let s2 = f.variance;
    let sg2 = sigma_gamma * sigma_gamma;
    let d = f.mean - t;
    bvn_cdf_at_origin(&BvnParams {
        mean: [d, -d],
        cov: [[sg2 + s2, -sg2], [-sg2, sg2 + s2]],
    })
}

/// Direct adaptive quadrature of the defining integrals, independent of
/// every closed form above. With `y` present it integrates
/// [F(u) - 1{y <= u}]^2 dgamma(u); without it, F(u)(1 - F(u)) dgamma(u).
pub fn twcrps_numeric_oracle(f: Gaussian1D, y: Option<f64>, w: &WeightSpec) -> Result<f64> {
    let s = f.sd();
    let cdf = move |u: f64| -> f64 {
        if s > 0.0 {
            std_normal_cdf((u - f.mean) / s)
        } else if u >= f.mean {
            1.0
        } else {
            0.0
        }
    };

    // Weight density and truncated support.
    let (w_lo, w_hi, density): (f64, f64, Box<dyn Fn(f64) -> f64>) = match *w {
        WeightSpec::Unweighted => (f64::NEG_INFINITY, f64::INFINITY, Box::new(|_| 1.0)),
        WeightSpec::IndicatorAbove { threshold } => {
            (threshold, f64::INFINITY, Box::new(|_| 1.0))
        }
        WeightSpec::GaussianAtThreshold { threshold, sigma } => {
            assert!(sigma > 0.0);
            (
                threshold - 10.0 * sigma,
                threshold + 10.0 * sigma,
                Box::new(move |u: f64| std_normal_pdf((u - threshold) / sigma) / sigma),
            )
        }
    };

    // The Gaussian-forecast part of the integrand decays past 10 sigma.
    let f_lo = f.mean - 10.0 * s - 1.0;
    let f_hi = f.mean + 10.0 * s + 1.0;
    let (mut lo, mut hi) = match *w {
        WeightSpec::GaussianAtThreshold { .. } => (w_lo.min(f_lo), w_hi.max(f_hi)),
        _ => (w_lo.max(f_lo), f_hi),
    };
    if let Some(yv) = y {
        lo = lo.min(yv - 1.0);
        hi = hi.max(yv + 1.0);
        lo = lo.max(w_lo);
    }
    if !(hi > lo) {
        return Ok(0.0);
    }

    // Split at the observation jump and at the forecast mean, so each
    // panel is smooth.
    let mut cuts = vec![lo, hi];
    for c in [y, Some(f.mean), Some(f.mean - s), Some(f.mean + s)]
        .into_iter()
        .flatten()
    {
        if c > lo && c < hi {
            cuts.push(c);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut total = 0.0;
    let tol = 1e-9 / (cuts.len() - 1) as f64;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        // The indicator is constant on a panel because y is a cut point.
        let ind = match y {
            Some(yv) => {
                if 0.5 * (a + b) >= yv {
                    1.0
                } else {
                    0.0
                }
            }
            None => 0.0,
        };
        let g = |u: f64| -> f64 {
            let fu = cdf(u);
            let core = match y {
                Some(_) => {
                    let d = fu - ind;
                    d * d
                }
                None => fu * (1.0 - fu),
            };
            core * density(u)
        };
        total += adaptive_simpson(&g, a, b, tol)?;
    }
    Ok(total)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson<F: Fn(f64) -> f64>(g: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = g(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    fn rec<F: Fn(f64) -> f64>(
        g: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let (lm, flm, left) = simpson(g, a, fa, m, fm);
        let (rm, frm, right) = simpson(g, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::QuadratureDivergence);
        }
        Ok(rec(g, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)?
            + rec(g, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)?)
    }
    let fa = g(a);
    let fb = g(b);
    let (m, fm, whole) = simpson(g, a, fa, b, fb);
    rec(g, a, fa, b, fb, m, fm, whole, tol, 52)
}
