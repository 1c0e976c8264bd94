//! Acquisition criteria for targeted sequential design: pointwise scores
//! (maximized) built from the marginal predictive distribution, and
//! stepwise-uncertainty-reduction criteria (minimized) built from the
//! expected post-update integrated uncertainty.
//!
//! For a hypothetical observation at x, writing
//!   alpha_n(x') = k_n(x, x') / sqrt(k_n(x, x) + tau^2),
//!   sigma_{n+1}^2(x') = k_n(x', x') - alpha_n(x')^2,
//! the updated mean at x' is m_n(x') + alpha_n(x') V with V ~ N(0, 1), and
//! every SUR integrand below is an expectation over V (closed form through
//! a bivariate normal CDF, or Monte Carlo for the gamma_1 weight).

use crate::dist::{
    binary_entropy, bvn_cdf_at_origin, std_normal_cdf, std_normal_pdf, BvnParams, RngStream,
};
use crate::error::{Error, Result};
use crate::gp::{GPModel, PosteriorBatch};
use crate::kernels::Point;
use crate::scoring::{expected_twcrps_gaussian_weight, expected_twcrps_indicator};
use rayon::prelude::*;

/// Default Monte Carlo sample count for the gamma_1 SUR criterion.
pub const DEFAULT_MC_SAMPLES: usize = 512;

/// An acquisition criterion with its parameters. Parameters exist exactly
/// for the kinds that need them.
#[derive(Clone, Debug, PartialEq)]
pub enum CriterionSpec {
    /// Expected twCRPS, indicator weight (pointwise, maximized).
    TwCrpsG1,
    /// Expected twCRPS, Gaussian weight (pointwise, maximized).
    TwCrpsG2 { sigma_gamma: f64 },
    /// Targeted mean square error (pointwise, maximized).
    Tmse { zeta: f64 },
    /// Excursion-probability entropy (pointwise, maximized).
    Entropy,
    /// Kriging variance (pointwise, maximized).
    Variance,
    /// Integrated expected twCRPS, indicator weight (SUR, minimized).
    IcrpsG1 { mc_samples: usize },
    /// Integrated expected twCRPS, Gaussian weight (SUR, minimized).
    IcrpsG2 { sigma_gamma: f64 },
    /// Targeted integrated mean square error (SUR, minimized).
    Timse { zeta: f64 },
    /// Integrated Bernoulli variance (SUR, minimized).
    Ibv,
    /// Integrated future kriging variance (SUR, minimized).
    IVariance,
    /// Uniform random selection.
    Random,
}

impl CriterionSpec {
    pub fn is_pointwise(&self) -> bool {
        matches!(
            self,
            CriterionSpec::TwCrpsG1
                | CriterionSpec::TwCrpsG2 { .. }
                | CriterionSpec::Tmse { .. }
                | CriterionSpec::Entropy
                | CriterionSpec::Variance
        )
    }

    pub fn is_sur(&self) -> bool {
        matches!(
            self,
            CriterionSpec::IcrpsG1 { .. }
                | CriterionSpec::IcrpsG2 { .. }
                | CriterionSpec::Timse { .. }
                | CriterionSpec::Ibv
                | CriterionSpec::IVariance
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            CriterionSpec::TwCrpsG1 => "crps-g1",
            CriterionSpec::TwCrpsG2 { .. } => "crps-g2",
            CriterionSpec::Tmse { .. } => "tmse",
            CriterionSpec::Entropy => "entropy",
            CriterionSpec::Variance => "variance",
            CriterionSpec::IcrpsG1 { .. } => "icrps-g1",
            CriterionSpec::IcrpsG2 { .. } => "icrps-g2",
            CriterionSpec::Timse { .. } => "timse",
            CriterionSpec::Ibv => "ibv",
            CriterionSpec::IVariance => "ivariance",
            CriterionSpec::Random => "random",
        }
    }

    pub fn valid_names() -> &'static [&'static str] {
        &[
            "random",
            "crps-g1",
            "crps-g2",
            "tmse",
            "entropy",
            "variance",
            "icrps-g1",
            "icrps-g2",
            "timse",
            "ibv",
            "ivariance",
        ]
    }

    /// Assembles a criterion from its name and the shared parameter pool.
    pub fn from_parts(
        name: &str,
        sigma_gamma: f64,
        zeta: f64,
        mc_samples: usize,
    ) -> Result<Self> {
        let c = match name {
            "random" => CriterionSpec::Random,
            "crps-g1" => CriterionSpec::TwCrpsG1,
            "crps-g2" => CriterionSpec::TwCrpsG2 { sigma_gamma },
            "tmse" => CriterionSpec::Tmse { zeta },
            "entropy" => CriterionSpec::Entropy,
            "variance" => CriterionSpec::Variance,
            "icrps-g1" => CriterionSpec::IcrpsG1 { mc_samples },
            "icrps-g2" => CriterionSpec::IcrpsG2 { sigma_gamma },
            "timse" => CriterionSpec::Timse { zeta },
            "ibv" => CriterionSpec::Ibv,
            "ivariance" => CriterionSpec::IVariance,
            _ => {
                return Err(Error::Config(format!(
                    "unknown criterion '{name}'; valid names: {}",
                    Self::valid_names().join(", ")
                )))
            }
        };
        if let CriterionSpec::TwCrpsG2 { sigma_gamma } | CriterionSpec::IcrpsG2 { sigma_gamma } = c
        {
            if !(sigma_gamma > 0.0) {
                return Err(Error::Config(format!(
                    "criterion '{name}' needs sigma_gamma > 0, got {sigma_gamma}"
                )));
            }
        }
        if let CriterionSpec::IcrpsG1 { mc_samples } = c {
            if mc_samples == 0 {
                return Err(Error::Config("mc_samples must be positive".into()));
            }
        }
        if let CriterionSpec::Tmse { zeta } | CriterionSpec::Timse { zeta } = c {
            if zeta < 0.0 {
                return Err(Error::Config(format!("zeta must be >= 0, got {zeta}")));
            }
        }
        Ok(c)
    }
}

/// Pointwise acquisition score at a candidate (higher is better).
pub fn pointwise_score(c: &CriterionSpec, model: &GPModel, x: &Point, t: f64) -> Result<f64> {
    if !c.is_pointwise() {
        return Err(Error::Config(format!(
            "criterion '{}' is not pointwise",
            c.name()
        )));
    }
    let g = model.predict(x);
    Ok(pointwise_from(
        c,
        g.mean,
        g.variance,
        t,
        model.degenerate_variance_floor(),
    ))
}

fn pointwise_from(c: &CriterionSpec, mean: f64, var: f64, t: f64, eps: f64) -> f64 {
    let g = crate::dist::Gaussian1D::new(mean, var);
    match *c {
        CriterionSpec::TwCrpsG1 => expected_twcrps_indicator(g, t),
        CriterionSpec::TwCrpsG2 { sigma_gamma } => {
            expected_twcrps_gaussian_weight(g, t, sigma_gamma)
        }
        CriterionSpec::Tmse { zeta } => tmse_from(mean, var, t, zeta),
        CriterionSpec::Entropy => {
            let p = if var <= eps {
                if mean >= t {
                    1.0
                } else {
                    0.0
                }
            } else {
                std_normal_cdf((mean - t) / var.sqrt())
            };
            binary_entropy(p)
        }
        CriterionSpec::Variance => var,
        _ => unreachable!("checked by caller"),
    }
}

/// k_n * phi((m_n - t) / sqrt(k_n + zeta^2)) / sqrt(k_n + zeta^2), with the
/// fully-resolved case (k_n + zeta^2 = 0) scored as zero.
fn tmse_from(mean: f64, var: f64, t: f64, zeta: f64) -> f64 {
    let w2 = var + zeta * zeta;
    if w2 <= 0.0 {
        return 0.0;
    }
    let w = w2.sqrt();
    var * std_normal_pdf((mean - t) / w) / w
}

/// Weight W_n of the targeted (integrated) mean square error, evaluated at
/// the current posterior.
fn tmse_weight(mean: f64, var: f64, t: f64, zeta: f64) -> f64 {
    let w2 = var + zeta * zeta;
    if w2 <= 0.0 {
        return 0.0;
    }
    let w = w2.sqrt();
    std_normal_pdf((mean - t) / w) / w
}

/// Theorem-3 gamma_2 integrand: a single bivariate CDF at the origin.
/// `off = alpha^2 + sigma_gamma^2` drives the anti-correlation.
fn icrps_g2_from(mu: f64, sig_next2: f64, alpha: f64, sigma_gamma2: f64, t: f64) -> f64 {
    let off = alpha * alpha + sigma_gamma2;
    let diag = sig_next2 + off;
    bvn_cdf_at_origin(&BvnParams {
        mean: [mu - t, t - mu],
        cov: [[diag, -off], [-off, diag]],
    })
}

/// Theorem-3 gamma_1 integrand by Monte Carlo over iid (N, N~, V) triples.
fn icrps_g1_from(mu: f64, sig_next2: f64, alpha: f64, t: f64, eps: f64, triples: &[Triple]) -> f64 {
    if sig_next2 <= eps {
        return 0.0;
    }
    let s = sig_next2.sqrt();
    let mut acc = 0.0;
    for &(n, nt, v) in triples {
        let floor = (t - mu - alpha * v) / s;
        acc += (n - nt.max(floor)).max(0.0);
    }
    s * acc / triples.len() as f64
}

type Triple = (f64, f64, f64);

/// Common-random-number block: one triple list per integration point,
/// shared by every candidate within one selection.
struct CrnBlock {
    triples: Vec<Triple>,
    per_point: usize,
}

impl CrnBlock {
    fn generate(stream: &mut RngStream, n_points: usize, mc_samples: usize) -> Self {
        let triples = (0..n_points * mc_samples)
            .map(|_| {
                (
                    stream.standard_normal(),
                    stream.standard_normal(),
                    stream.standard_normal(),
                )
            })
            .collect();
        Self {
            triples,
            per_point: mc_samples,
        }
    }

    fn for_point(&self, j: usize) -> &[Triple] {
        &self.triples[j * self.per_point..(j + 1) * self.per_point]
    }
}

/// SUR integrand at one integration point `x_prime` for a hypothetical
/// observation at `x`.
pub fn sur_integrand(
    c: &CriterionSpec,
    model: &GPModel,
    x: &Point,
    x_prime: &Point,
    t: f64,
    stream: &mut RngStream,
) -> Result<f64> {
    if !c.is_sur() {
        return Err(Error::Config(format!("criterion '{}' is not SUR", c.name())));
    }
    let gp = model.predict(x_prime);
    let alpha = model.alpha_n(x, x_prime);
    let sig_next2 = (gp.variance - alpha * alpha).max(0.0);
    let eps = model.degenerate_variance_floor();
    Ok(match *c {
        CriterionSpec::IcrpsG1 { mc_samples } => {
            let block = CrnBlock::generate(stream, 1, mc_samples);
            icrps_g1_from(gp.mean, sig_next2, alpha, t, eps, block.for_point(0))
        }
        CriterionSpec::IcrpsG2 { sigma_gamma } => {
            icrps_g2_from(gp.mean, sig_next2, alpha, sigma_gamma * sigma_gamma, t)
        }
        CriterionSpec::Ibv => icrps_g2_from(gp.mean, sig_next2, alpha, 0.0, t),
        CriterionSpec::Timse { zeta } => {
            sig_next2 * tmse_weight(gp.mean, gp.variance, t, zeta)
        }
        CriterionSpec::IVariance => sig_next2,
        _ => unreachable!("checked above"),
    })
}

/// SUR criterion: the mean of the integrand over a discrete integration
/// set (lower is better).
pub fn sur_criterion(
    c: &CriterionSpec,
    model: &GPModel,
    x: &Point,
    integration_set: &[Point],
    t: f64,
    stream: &mut RngStream,
) -> Result<f64> {
    if integration_set.is_empty() {
        return Err(Error::Empty("SUR integration set is empty".into()));
    }
    if !c.is_sur() {
        return Err(Error::Config(format!("criterion '{}' is not SUR", c.name())));
    }
    let all: Vec<Point> = std::iter::once(x.clone())
        .chain(integration_set.iter().cloned())
        .collect();
    let batch = model.posterior_batch(&all);
    let ctx = SurContext::prepare(c, &batch, 1, t, model.degenerate_variance_floor(), stream);
    Ok(ctx.criterion_value(c, &batch, 0))
}

/// Per-selection precomputation shared across candidates: integration-point
/// posteriors, TIMSE weights and the common-random-number block.
struct SurContext {
    n_candidates: usize,
    t: f64,
    eps: f64,
    tau2: f64,
    mu: Vec<f64>,
    var: Vec<f64>,
    timse_w: Vec<f64>,
    crn: Option<CrnBlock>,
}

impl SurContext {
    fn prepare(
        c: &CriterionSpec,
        batch: &PosteriorBatch<'_>,
        n_candidates: usize,
        t: f64,
        eps: f64,
        stream: &mut RngStream,
    ) -> Self {
        let m = batch.len() - n_candidates;
        let mu: Vec<f64> = (0..m).map(|j| batch.mean[n_candidates + j]).collect();
        let var: Vec<f64> = (0..m).map(|j| batch.var[n_candidates + j]).collect();
        let timse_w = if let CriterionSpec::Timse { zeta } = c {
            (0..m)
                .map(|j| tmse_weight(mu[j], var[j], t, *zeta))
                .collect()
        } else {
            Vec::new()
        };
        let crn = if let CriterionSpec::IcrpsG1 { mc_samples } = c {
            Some(CrnBlock::generate(stream, m, *mc_samples))
        } else {
            None
        };
        Self {
            n_candidates,
            t,
            eps,
            tau2: batch.noise_var(),
            mu,
            var,
            timse_w,
            crn,
        }
    }

    /// J(candidate i) with sums accumulated in integration-point order,
    /// keeping results identical regardless of thread count.
    fn criterion_value(&self, c: &CriterionSpec, batch: &PosteriorBatch<'_>, i: usize) -> f64 {
        let denom2 = batch.var[i] + self.tau2;
        let denom = if denom2 > 0.0 { denom2.sqrt() } else { 0.0 };
        let m = self.mu.len();
        let mut acc = 0.0;
        for j in 0..m {
            let alpha = if denom > 0.0 {
                batch.cov(i, self.n_candidates + j) / denom
            } else {
                0.0
            };
            let sig_next2 = (self.var[j] - alpha * alpha).max(0.0);
            acc += match *c {
                CriterionSpec::IcrpsG1 { .. } => icrps_g1_from(
                    self.mu[j],
                    sig_next2,
                    alpha,
                    self.t,
                    self.eps,
                    self.crn.as_ref().unwrap().for_point(j),
                ),
                CriterionSpec::IcrpsG2 { sigma_gamma } => {
                    icrps_g2_from(self.mu[j], sig_next2, alpha, sigma_gamma * sigma_gamma, self.t)
                }
                CriterionSpec::Ibv => icrps_g2_from(self.mu[j], sig_next2, alpha, 0.0, self.t),
                CriterionSpec::Timse { .. } => sig_next2 * self.timse_w[j],
                CriterionSpec::IVariance => sig_next2,
                _ => unreachable!(),
            };
        }
        acc / m as f64
    }
}

/// Picks the next acquisition: argmax of the pointwise score or argmin of
/// the SUR criterion over the candidates, with ties broken by the lowest
/// index. `Random` draws uniformly from the stream.
pub fn select_next(
    c: &CriterionSpec,
    model: &GPModel,
    candidates: &[Point],
    integration_set: &[Point],
    t: f64,
    stream: &mut RngStream,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("no candidates to select from".into()));
    }
    if let CriterionSpec::Random = c {
        return Ok(stream.index(candidates.len()));
    }
    let eps = model.degenerate_variance_floor();

    if c.is_pointwise() {
        let batch = model.posterior_batch(candidates);
        let scores: Vec<f64> = (0..candidates.len())
            .map(|i| pointwise_from(c, batch.mean[i], batch.var[i], t, eps))
            .collect();
        return Ok(argbest(&scores, true));
    }

    if integration_set.is_empty() {
        return Err(Error::Empty("SUR integration set is empty".into()));
    }
    let all: Vec<Point> = candidates
        .iter()
        .chain(integration_set.iter())
        .cloned()
        .collect();
    let batch = model.posterior_batch(&all);
    let ctx = SurContext::prepare(c, &batch, candidates.len(), t, eps, stream);
    let values: Vec<f64> = (0..candidates.len())
        .into_par_iter()
        .map(|i| ctx.criterion_value(c, &batch, i))
        .collect();
    Ok(argbest(&values, false))
}

/// First index of the maximum (or minimum), which implements the
/// lowest-index tie-break.
fn argbest(values: &[f64], maximize: bool) -> usize {
    let mut idx = 0;
    let mut best = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        debug_assert!(v.is_finite(), "non-finite acquisition value at {i}");
        if (maximize && v > best) || (!maximize && v < best) {
            best = v;
            idx = i;
        }
    }
    idx
}
