//! Validation-set evaluation: CRPS-based metrics, excursion-set
//! classification rates, targeted RMSE variants and box-plot aggregation.

use crate::error::{Error, Result};
use crate::gp::GPModel;
use crate::kernels::Point;
use crate::scoring::{crps_gaussian, twcrps_gaussian_weight, twcrps_indicator};

/// Counts of the plug-in classifier against the true excursion set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Classification-related metrics; only available when ground truth is
/// known. Ratios are `None` when their denominator is empty rather than
/// silently zero, and the restricted RMSE variants report the subset sizes
/// they were computed on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcursionStats {
    pub confusion: Confusion,
    /// Validation points truly in the excursion set.
    pub m_gamma: usize,
    /// Validation points classified into the excursion set.
    pub m_p: usize,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    /// RMSE restricted to points truly in the excursion set.
    pub rmse_gamma: Option<f64>,
    /// RMSE restricted to points classified into the excursion set. Zero
    /// sensitivity makes this vacuous, hence the pairing with sensitivity.
    pub rmse_p: Option<f64>,
}

/// One evaluation of a model on a validation set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub crps_mean: f64,
    pub twcrps1_mean: f64,
    pub twcrps2_mean: f64,
    pub rmse: Option<f64>,
    pub excursion: Option<ExcursionStats>,
}

/// Long-format metric keys, in emission order.
pub const METRIC_NAMES: [&str; 14] = [
    "crps_mean",
    "twcrps1_mean",
    "twcrps2_mean",
    "rmse",
    "rmse_gamma",
    "rmse_p",
    "sensitivity",
    "precision",
    "tp",
    "fp",
    "tn",
    "fn",
    "m_gamma",
    "m_p",
];

impl EvalReport {
    /// Metric lookup by long-format key; `None` encodes an absent metric.
    pub fn metric(&self, name: &str) -> Option<f64> {
        let ex = self.excursion.as_ref();
        match name {
            "crps_mean" => Some(self.crps_mean),
            "twcrps1_mean" => Some(self.twcrps1_mean),
            "twcrps2_mean" => Some(self.twcrps2_mean),
            "rmse" => self.rmse,
            "rmse_gamma" => ex.and_then(|e| e.rmse_gamma),
            "rmse_p" => ex.and_then(|e| e.rmse_p),
            "sensitivity" => ex.and_then(|e| e.sensitivity),
            "precision" => ex.and_then(|e| e.precision),
            "tp" => ex.map(|e| e.confusion.tp as f64),
            "fp" => ex.map(|e| e.confusion.fp as f64),
            "tn" => ex.map(|e| e.confusion.tn as f64),
            "fn" => ex.map(|e| e.confusion.fn_ as f64),
            "m_gamma" => ex.map(|e| e.m_gamma as f64),
            "m_p" => ex.map(|e| e.m_p as f64),
            _ => None,
        }
    }
}

fn mean_scores(
    preds: &[(f64, f64)],
    targets: &[f64],
    t: f64,
    sigma_gamma: f64,
) -> (f64, f64, f64) {
    let n = targets.len() as f64;
    let mut c = 0.0;
    let mut c1 = 0.0;
    let mut c2 = 0.0;
    for (&(mu, var), &y) in preds.iter().zip(targets) {
        let g = crate::dist::Gaussian1D::new(mu, var);
        c += crps_gaussian(g, y);
        c1 += twcrps_indicator(g, y, t);
        c2 += twcrps_gaussian_weight(g, y, t, sigma_gamma);
    }
    (c / n, c1 / n, c2 / n)
}

pub(crate) fn excursion_stats(pred_means: &[f64], truth: &[f64], t: f64) -> ExcursionStats {
    let mut conf = Confusion::default();
    let (mut se_gamma, mut se_p) = (0.0, 0.0);
    for (&m, &f) in pred_means.iter().zip(truth) {
        let in_set = f >= t;
        let classified = m >= t;
        match (classified, in_set) {
            (true, true) => conf.tp += 1,
            (true, false) => conf.fp += 1,
            (false, false) => conf.tn += 1,
            (false, true) => conf.fn_ += 1,
        }
        let e2 = (m - f) * (m - f);
        if in_set {
            se_gamma += e2;
        }
        if classified {
            se_p += e2;
        }
    }
    let m_gamma = conf.tp + conf.fn_;
    let m_p = conf.tp + conf.fp;
    ExcursionStats {
        confusion: conf,
        m_gamma,
        m_p,
        sensitivity: (m_gamma > 0).then(|| conf.tp as f64 / m_gamma as f64),
        precision: (m_p > 0).then(|| conf.tp as f64 / m_p as f64),
        rmse_gamma: (m_gamma > 0).then(|| (se_gamma / m_gamma as f64).sqrt()),
        rmse_p: (m_p > 0).then(|| (se_p / m_p as f64).sqrt()),
    }
}

/// Evaluates the latent model against known ground truth: CRPS metrics of
/// the latent predictive distribution, RMSE variants and classification
/// rates of the plug-in excursion estimator.
pub fn evaluate_synthetic(
    model: &GPModel,
    validation: &[Point],
    truth: &[f64],
    t: f64,
    sigma_gamma: f64,
) -> Result<EvalReport> {
    if validation.is_empty() || validation.len() != truth.len() {
        return Err(Error::Empty(
            "synthetic evaluation needs a nonempty validation set with truth values".into(),
        ));
    }
    let batch = model.posterior_batch(validation);
    let preds: Vec<(f64, f64)> = batch
        .mean
        .iter()
        .zip(&batch.var)
        .map(|(&m, &v)| (m, v))
        .collect();
    let (crps_mean, twcrps1_mean, twcrps2_mean) = mean_scores(&preds, truth, t, sigma_gamma);
    let rmse = (preds
        .iter()
        .zip(truth)
        .map(|(&(m, _), &f)| (m - f) * (m - f))
        .sum::<f64>()
        / truth.len() as f64)
        .sqrt();
    Ok(EvalReport {
        crps_mean,
        twcrps1_mean,
        twcrps2_mean,
        rmse: Some(rmse),
        excursion: Some(excursion_stats(&batch.mean, truth, t)),
    })
}

/// Evaluates against noisy observations when no ground truth exists: only
/// the CRPS metrics, computed from the observational predictive
/// distribution (latent variance plus noise variance).
pub fn evaluate_observational(
    model: &GPModel,
    validation: &[Point],
    obs: &[f64],
    t: f64,
    sigma_gamma: f64,
) -> Result<EvalReport> {
    if validation.is_empty() || validation.len() != obs.len() {
        return Err(Error::Empty(
            "observational evaluation needs a nonempty validation set".into(),
        ));
    }
    let batch = model.posterior_batch(validation);
    let preds: Vec<(f64, f64)> = batch
        .mean
        .iter()
        .zip(&batch.var)
        .map(|(&m, &v)| (m, v + model.noise_var()))
        .collect();
    let (crps_mean, twcrps1_mean, twcrps2_mean) = mean_scores(&preds, obs, t, sigma_gamma);
    Ok(EvalReport {
        crps_mean,
        twcrps1_mean,
        twcrps2_mean,
        rmse: None,
        excursion: None,
    })
}

/// Box-plot summary of a metric across repetitions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Q1 - 1.5 IQR and Q3 + 1.5 IQR.
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

/// Type-7 (linear interpolation) empirical quantile of a sorted slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Aggregates metric values across repetitions: mean, type-7 quartiles and
/// 1.5-IQR whisker bounds.
pub fn aggregate(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty("cannot aggregate zero values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values must not be NaN"));
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(Summary {
        n: sorted.len(),
        mean,
        median,
        q1,
        q3,
        whisker_lo: q1 - 1.5 * iqr,
        whisker_hi: q3 + 1.5 * iqr,
    })
}
