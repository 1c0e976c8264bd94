//! Maximum-likelihood hyperparameter estimation of the ordinary-kriging
//! model: multi-start bounded quasi-Newton on log-parameters with
//! finite-difference gradients. The profiled mean is recomputed in closed
//! form at every likelihood evaluation.

use super::GPModel;
use crate::error::{Error, Result};
use crate::kernels::{jaccard, KernelFamily, KernelSpec, Point};
use crate::linalg::factor_with_jitter;

/// Fits kernel variance (plus lengthscale for stationary kernels, plus the
/// noise variance when `fit_noise`) by maximizing the ordinary-kriging
/// Gaussian log-likelihood. `fixed_noise` must be given exactly when
/// `fit_noise` is false.
pub fn fit_hyperparams(
    inputs: &[Point],
    obs: &[f64],
    template: &KernelSpec,
    fit_noise: bool,
    fixed_noise: Option<f64>,
) -> Result<GPModel> {
    if inputs.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 training points, got {}",
            inputs.len()
        )));
    }
    if inputs.len() != obs.len() {
        return Err(Error::DimensionMismatch(inputs.len(), obs.len()));
    }
    match (fit_noise, fixed_noise) {
        (true, Some(_)) => {
            return Err(Error::Config(
                "fixed noise variance given although fit_noise is set".into(),
            ))
        }
        (false, None) => {
            return Err(Error::Config(
                "fit_noise is false but no fixed noise variance given".into(),
            ))
        }
        _ => {}
    }
    if let Some(t) = fixed_noise {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(format!("invalid fixed noise variance {t}")));
        }
    }

    let n = inputs.len();
    let base = BaseMatrix::build(template.family, inputs)?;
    let mean_z = obs.iter().sum::<f64>() / n as f64;
    let var_z = (obs.iter().map(|z| (z - mean_z).powi(2)).sum::<f64>() / n as f64).max(1e-8);
    let stationary = template.is_stationary();
    let ref_dist = if stationary { base.median_distance() } else { 1.0 };

    // Parameter layout: [ln sigma_k^2, (ln theta)?, (ln tau^2)?].
    let mut lo = vec![(1e-6 * var_z).ln()];
    let mut hi = vec![(1e8 * var_z).ln()];
    if stationary {
        lo.push((1e-2 * ref_dist).ln());
        hi.push((1e4 * ref_dist).ln());
    }
    if fit_noise {
        lo.push((1e-8 * var_z).ln());
        hi.push(var_z.ln());
    }
    let dim = lo.len();

    let objective = |params: &[f64]| -> f64 {
        let sigma2 = params[0].exp();
        let theta = if stationary { params[1].exp() } else { 1.0 };
        let tau2 = if fit_noise {
            params[dim - 1].exp()
        } else {
            fixed_noise.unwrap()
        };
        match profiled_neg_ll(&base, obs, sigma2, theta, tau2) {
            Some(v) => v,
            None => f64::INFINITY,
        }
    };

    // Five log-spaced starts across the box, with the template parameters
    // as the central start.
    let sigma_grid = [1e-2, 1e-1, 1.0, 10.0, 100.0].map(|c| (c * var_z).ln());
    let theta_grid = [0.25, 0.71, 2.0, 5.66, 16.0].map(|c| (c * ref_dist).ln());
    let tau_grid = [1e-4, 1e-3, 1e-2, 1e-1, 0.5].map(|c| (c * var_z).ln());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in 0..5 {
        let mut x0 = vec![sigma_grid[s]];
        if stationary {
            x0.push(theta_grid[s]);
        }
        if fit_noise {
            x0.push(tau_grid[s]);
        }
        if s == 2 {
            x0[0] = template.variance.ln();
            if stationary {
                x0[1] = template.lengthscale.unwrap().ln();
            }
        }
        for i in 0..dim {
            x0[i] = x0[i].clamp(lo[i], hi[i]);
        }
        let (x, fx) = minimize_box(&objective, &x0, &lo, &hi, 60);
        if fx.is_finite() && best.as_ref().map_or(true, |(_, b)| fx < *b) {
            best = Some((x, fx));
        }
    }

    let (params, _) = best.ok_or_else(|| {
        Error::Fit(format!(
            "likelihood non-finite at every start (n = {n}, var(z) = {var_z:.3e}, \
             kernel = {})",
            template.family.name()
        ))
    })?;

    let sigma2 = params[0].exp();
    let spec = if stationary {
        template
            .with_variance(sigma2)
            .with_lengthscale(params[1].exp())
    } else {
        template.with_variance(sigma2)
    };
    let tau2 = if fit_noise {
        params[dim - 1].exp()
    } else {
        fixed_noise.unwrap()
    };
    let model = GPModel::new(spec, tau2, inputs.to_vec(), obs.to_vec())?;
    Ok(if fit_noise {
        model.with_estimated_noise()
    } else {
        model
    })
}

/// Kernel structure that is invariant to the hyperparameters, so likelihood
/// evaluations only rescale cached entries.
enum BaseMatrix {
    /// Jaccard similarities; the kernel is sigma^2 * J.
    Jaccard(Vec<Vec<f64>>),
    /// Euclidean distances; the kernel applies the stationary profile.
    Distance(Vec<Vec<f64>>, KernelFamily),
}

impl BaseMatrix {
    fn build(family: KernelFamily, inputs: &[Point]) -> Result<Self> {
        let n = inputs.len();
        match family {
            KernelFamily::Tanimoto => {
                let mut m = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..=i {
                        if inputs[i].dim() != inputs[j].dim() {
                            return Err(Error::DimensionMismatch(
                                inputs[i].dim(),
                                inputs[j].dim(),
                            ));
                        }
                        let v = jaccard(&inputs[i], &inputs[j])?;
                        m[i][j] = v;
                        m[j][i] = v;
                    }
                }
                Ok(BaseMatrix::Jaccard(m))
            }
            _ => {
                let mut m = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..=i {
                        if inputs[i].dim() != inputs[j].dim() {
                            return Err(Error::DimensionMismatch(
                                inputs[i].dim(),
                                inputs[j].dim(),
                            ));
                        }
                        let r = crate::kernels::euclidean(&inputs[i], &inputs[j]);
                        m[i][j] = r;
                        m[j][i] = r;
                    }
                }
                Ok(BaseMatrix::Distance(m, family))
            }
        }
    }

    fn n(&self) -> usize {
        match self {
            BaseMatrix::Jaccard(m) | BaseMatrix::Distance(m, _) => m.len(),
        }
    }

    fn kernel_entry(&self, i: usize, j: usize, sigma2: f64, theta: f64) -> f64 {
        match self {
            BaseMatrix::Jaccard(m) => sigma2 * m[i][j],
            BaseMatrix::Distance(m, KernelFamily::Gaussian) => {
                let r = m[i][j];
                sigma2 * (-r * r / (2.0 * theta * theta)).exp()
            }
            BaseMatrix::Distance(m, KernelFamily::Exponential) => {
                sigma2 * (-m[i][j] / theta).exp()
            }
            BaseMatrix::Distance(_, KernelFamily::Tanimoto) => unreachable!(),
        }
    }

    fn median_distance(&self) -> f64 {
        let m = match self {
            BaseMatrix::Distance(m, _) => m,
            BaseMatrix::Jaccard(_) => return 1.0,
        };
        let n = m.len();
        let stride = (n / 60).max(1);
        let mut d: Vec<f64> = (0..n)
            .step_by(stride)
            .flat_map(|i| {
                (0..i)
                    .step_by(stride)
                    .map(move |j| (i, j))
            })
            .map(|(i, j)| m[i][j])
            .filter(|&v| v > 0.0)
            .collect();
        if d.is_empty() {
            return 1.0;
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d[d.len() / 2]
    }
}

/// Negative profiled log-likelihood; `None` when the factorization fails.
fn profiled_neg_ll(
    base: &BaseMatrix,
    obs: &[f64],
    sigma2: f64,
    theta: f64,
    tau2: f64,
) -> Option<f64> {
    let n = base.n();
    let chol = factor_with_jitter(n, |i, j| {
        base.kernel_entry(i, j, sigma2, theta) + if i == j { tau2 } else { 0.0 }
    })
    .ok()?;
    let mut w = vec![1.0; n];
    chol.solve_lower(&mut w);
    let mut zl = obs.to_vec();
    chol.solve_lower(&mut zl);
    let sw = w.iter().map(|v| v * v).sum::<f64>();
    let beta = w.iter().zip(&zl).map(|(a, b)| a * b).sum::<f64>() / sw;
    // L^-1 (z - beta 1) = zl - beta w.
    let quad = zl
        .iter()
        .zip(&w)
        .map(|(z, w)| {
            let r = z - beta * w;
            r * r
        })
        .sum::<f64>();
    let ll = -0.5 * quad - 0.5 * chol.log_det()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    ll.is_finite().then_some(-ll)
}

/// Box-constrained BFGS with central finite-difference gradients and a
/// backtracking line search. Good enough for the (at most) three smooth
/// log-parameters handled here.
fn minimize_box(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let proj = |x: &mut [f64]| {
        for i in 0..d {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let grad = |x: &[f64]| -> Vec<f64> {
        const H: f64 = 1e-5;
        let mut g = vec![0.0; d];
        let mut xp = x.to_vec();
        for i in 0..d {
            xp[i] = x[i] + H;
            let fp = f(&xp);
            xp[i] = x[i] - H;
            let fm = f(&xp);
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * H);
        }
        g
    };

    let mut x = x0.to_vec();
    proj(&mut x);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }
    let mut g = grad(&x);
    let mut h = vec![vec![0.0; d]; d];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _ in 0..max_iter {
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < 1e-6 {
            break;
        }
        // Direction -H g, falling back to steepest descent if not a
        // descent direction (e.g. after box projections).
        let mut dir: Vec<f64> = (0..d)
            .map(|i| -(0..d).map(|j| h[i][j] * g[j]).sum::<f64>())
            .collect();
        let mut slope = dir.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        if slope >= 0.0 {
            for (i, row) in h.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
            proj(&mut xn);
            let fn_ = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fn_));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fn_)) = accepted else { break };
        let gn = grad(&xn);

        // BFGS inverse-Hessian update.
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = s.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| h[i][j] * y[j]).sum::<f64>())
                .collect();
            let yhy = y.iter().zip(&hy).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..d {
                for j in 0..d {
                    h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }

        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement < 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    (x, fx)
}
