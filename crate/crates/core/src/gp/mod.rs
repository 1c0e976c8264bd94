//! Ordinary-kriging Gaussian process model: posterior prediction with a
//! profiled constant mean, cheap one-point updates, excursion probabilities
//! and classification.
//!
//! With K_obs = K + tau^2 I and beta = (1' K_obs^-1 z) / (1' K_obs^-1 1),
//! the posterior is
//!   m_n(x)     = beta + k(x)' K_obs^-1 (z - beta 1)
//!   k_n(x, x') = k(x, x') - k(x)' K_obs^-1 k(x')
//!                + (1 - k(x)' K_obs^-1 1)(1 - k(x')' K_obs^-1 1) / (1' K_obs^-1 1)
//! where k(x) is the cross-covariance vector against the training inputs.

mod fit;

pub use fit::fit_hyperparams;

use crate::dist::{std_normal_cdf, Gaussian1D};
use crate::error::{Error, Result};
use crate::kernels::{kernel_eval, KernelSpec, Point};
use crate::linalg::{factor_with_jitter, Chol};

#[derive(Clone, Debug)]
pub struct GPModel {
    kernel: KernelSpec,
    noise_var: f64,
    noise_estimated: bool,
    inputs: Vec<Point>,
    obs: Vec<f64>,
    chol: Chol,
    /// L^-1 1 (lower solve of the ones vector).
    w: Vec<f64>,
    /// K_obs^-1 (z - beta 1).
    kinv_resid: Vec<f64>,
    /// 1' K_obs^-1 1 = |w|^2.
    one_kinv_one: f64,
    beta_hat: f64,
}

impl GPModel {
    /// Builds a model at fixed hyperparameters.
    pub fn new(
        kernel: KernelSpec,
        noise_var: f64,
        inputs: Vec<Point>,
        obs: Vec<f64>,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Empty("GP model needs at least one point".into()));
        }
        if inputs.len() != obs.len() {
            return Err(Error::DimensionMismatch(inputs.len(), obs.len()));
        }
        if noise_var < 0.0 || !noise_var.is_finite() {
            return Err(Error::Domain(format!("invalid noise variance {noise_var}")));
        }
        // Validate every input against the kernel once; interior evaluations
        // may then assume well-formed points.
        for p in &inputs {
            kernel_eval(&kernel, p, &inputs[0])?;
        }
        let n = inputs.len();
        let gram: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..=i)
                    .map(|j| kernel_eval(&kernel, &inputs[i], &inputs[j]).unwrap())
                    .collect()
            })
            .collect();
        let chol = factor_with_jitter(n, |i, j| {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            gram[r][c] + if i == j { noise_var } else { 0.0 }
        })?;
        Self::assemble(kernel, noise_var, false, inputs, obs, chol)
    }

    fn assemble(
        kernel: KernelSpec,
        noise_var: f64,
        noise_estimated: bool,
        inputs: Vec<Point>,
        obs: Vec<f64>,
        chol: Chol,
    ) -> Result<Self> {
        let n = inputs.len();
        let mut w = vec![1.0; n];
        chol.solve_lower(&mut w);
        let one_kinv_one = w.iter().map(|v| v * v).sum::<f64>();
        let mut zl = obs.clone();
        chol.solve_lower(&mut zl);
        let beta_hat = w.iter().zip(&zl).map(|(a, b)| a * b).sum::<f64>() / one_kinv_one;
        let resid: Vec<f64> = obs.iter().map(|z| z - beta_hat).collect();
        let kinv_resid = chol.solve(&resid);
        Ok(Self {
            kernel,
            noise_var,
            noise_estimated,
            inputs,
            obs,
            chol,
            w,
            kinv_resid,
            one_kinv_one,
            beta_hat,
        })
    }

    pub(crate) fn with_estimated_noise(mut self) -> Self {
        self.noise_estimated = true;
        self
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn noise_estimated(&self) -> bool {
        self.noise_estimated
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn observations(&self) -> &[f64] {
        &self.obs
    }

    fn kern(&self, a: &Point, b: &Point) -> f64 {
        kernel_eval(&self.kernel, a, b).expect("inputs validated at model construction")
    }

    fn cross(&self, x: &Point) -> Vec<f64> {
        self.inputs.iter().map(|p| self.kern(x, p)).collect()
    }

    /// Gaussian log-likelihood of the observations under N(beta 1, K_obs)
    /// with the profiled mean.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let mut rl: Vec<f64> = self.obs.iter().map(|z| z - self.beta_hat).collect();
        self.chol.solve_lower(&mut rl);
        let quad = rl.iter().map(|v| v * v).sum::<f64>();
        -0.5 * quad - 0.5 * self.chol.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior (latent) predictive distribution at `x`.
    pub fn predict(&self, x: &Point) -> Gaussian1D {
        let kx = self.cross(x);
        let (mean, var) = self.mean_var_from_cross(x, &kx);
        Gaussian1D::new(mean, var)
    }

    fn mean_var_from_cross(&self, x: &Point, kx: &[f64]) -> (f64, f64) {
        let mean = self.beta_hat
            + kx.iter()
                .zip(&self.kinv_resid)
                .map(|(a, b)| a * b)
                .sum::<f64>();
        let mut v = kx.to_vec();
        self.chol.solve_lower(&mut v);
        let explained = v.iter().map(|t| t * t).sum::<f64>();
        let defect = 1.0 - v.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>();
        let var = self.kern(x, x) - explained + defect * defect / self.one_kinv_one;
        (mean, var.max(0.0))
    }

    /// Predictive distribution for a noisy observation at `x`: the latent
    /// prediction with the noise variance added.
    pub fn predict_observational(&self, x: &Point) -> Gaussian1D {
        let g = self.predict(x);
        Gaussian1D::new(g.mean, g.variance + self.noise_var)
    }

    /// Posterior covariance k_n(x, x').
    pub fn posterior_cov(&self, x: &Point, y: &Point) -> f64 {
        let mut vx = self.cross(x);
        let mut vy = self.cross(y);
        self.chol.solve_lower(&mut vx);
        self.chol.solve_lower(&mut vy);
        let explained = vx.iter().zip(&vy).map(|(a, b)| a * b).sum::<f64>();
        let dx = 1.0 - vx.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>();
        let dy = 1.0 - vy.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>();
        self.kern(x, y) - explained + dx * dy / self.one_kinv_one
    }

    /// One-step mean sensitivity alpha_n(x') = k_n(x, x') / sqrt(k_n(x, x) + tau^2)
    /// for a hypothetical observation at `x`. Returns 0 when the denominator
    /// vanishes (the update carries no information).
    pub fn alpha_n(&self, x: &Point, x_prime: &Point) -> f64 {
        let denom2 = self.predict(x).variance + self.noise_var;
        if denom2 <= 0.0 {
            return 0.0;
        }
        self.posterior_cov(x, x_prime) / denom2.sqrt()
    }

    /// Excursion probability P(xi(x) >= t) = Phi((m_n(x) - t) / sd).
    pub fn excursion_prob(&self, x: &Point, t: f64) -> f64 {
        let g = self.predict(x);
        if g.variance <= self.degenerate_variance_floor() {
            return if g.mean >= t { 1.0 } else { 0.0 };
        }
        std_normal_cdf((g.mean - t) / g.sd())
    }

    /// Plug-in classifier: x is in the estimated excursion set iff
    /// m_n(x) >= t (equivalently, excursion probability >= 1/2).
    pub fn classify(&self, x: &Point, t: f64) -> bool {
        self.predict(x).mean >= t
    }

    pub(crate) fn degenerate_variance_floor(&self) -> f64 {
        1e-12 * self.kernel.variance
    }

    /// New model with one more observation, at fixed hyperparameters. The
    /// factorization is extended by one row; predictions agree with a full
    /// refit up to roundoff.
    pub fn update(&self, x_new: Point, z_new: f64) -> Result<Self> {
        kernel_eval(&self.kernel, &x_new, &self.inputs[0])?;
        let cross: Vec<f64> = self.inputs.iter().map(|p| self.kern(&x_new, p)).collect();
        let diag = self.kern(&x_new, &x_new) + self.noise_var;
        let mut inputs = self.inputs.clone();
        let mut obs = self.obs.clone();
        inputs.push(x_new);
        obs.push(z_new);

        let mut chol = self.chol.clone();
        match chol.extend(&cross, diag) {
            Ok(()) => Self::assemble(
                self.kernel.clone(),
                self.noise_var,
                self.noise_estimated,
                inputs,
                obs,
                chol,
            ),
            Err(_) => {
                // Near-singular extension (e.g. a duplicate point at zero
                // noise): fall back to a fresh factorization with jitter.
                let m = Self::new(self.kernel.clone(), self.noise_var, inputs, obs)?;
                Ok(Self {
                    noise_estimated: self.noise_estimated,
                    ..m
                })
            }
        }
    }

    /// Precomputes posterior quantities for a set of points so that the
    /// acquisition loops touch each candidate pair in O(n) instead of
    /// O(n^2).
    pub fn posterior_batch<'a>(&'a self, points: &'a [Point]) -> PosteriorBatch<'a> {
        let mut mean = Vec::with_capacity(points.len());
        let mut var = Vec::with_capacity(points.len());
        let mut v = Vec::with_capacity(points.len());
        let mut defect = Vec::with_capacity(points.len());
        for p in points {
            let kx = self.cross(p);
            let m = self.beta_hat
                + kx.iter()
                    .zip(&self.kinv_resid)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            let mut vx = kx;
            self.chol.solve_lower(&mut vx);
            let explained = vx.iter().map(|t| t * t).sum::<f64>();
            let d = 1.0 - vx.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>();
            mean.push(m);
            var.push((self.kern(p, p) - explained + d * d / self.one_kinv_one).max(0.0));
            v.push(vx);
            defect.push(d);
        }
        PosteriorBatch {
            model: self,
            points,
            mean,
            var,
            v,
            defect,
        }
    }
}

/// Posterior means, variances and cross-covariances over a fixed point set.
pub struct PosteriorBatch<'a> {
    model: &'a GPModel,
    points: &'a [Point],
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    v: Vec<Vec<f64>>,
    defect: Vec<f64>,
}

impl PosteriorBatch<'_> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// k_n(p_i, p_j).
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        let prior = self.model.kern(&self.points[i], &self.points[j]);
        let explained = self.v[i]
            .iter()
            .zip(&self.v[j])
            .map(|(a, b)| a * b)
            .sum::<f64>();
        prior - explained + self.defect[i] * self.defect[j] / self.model.one_kinv_one
    }

    pub fn noise_var(&self) -> f64 {
        self.model.noise_var
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::RngStream;
    use crate::kernels::Fingerprint;
    use approx::assert_abs_diff_eq;

    pub(super) fn random_fp(s: &mut RngStream, d: usize, density: f64) -> Point {
        Point::Fp(Fingerprint::from_bits(
            &(0..d).map(|_| s.uniform() < density).collect::<Vec<_>>(),
        ))
    }

    fn random_model(s: &mut RngStream, n: usize, noise: f64) -> GPModel {
        let pts: Vec<Point> = (0..n).map(|_| random_fp(s, 64, 0.35)).collect();
        let obs: Vec<f64> = (0..n).map(|_| 2.0 * s.standard_normal()).collect();
        GPModel::new(KernelSpec::tanimoto(1.5), noise, pts, obs).unwrap()
    }

    #[test]
    fn lml_scalar_reference() {
        // One observation z = 0 with unit prior variance and no noise:
        // the profiled mean removes the quadratic term.
        let x = random_fp(&mut RngStream::new(1, 0), 32, 0.4);
        let m = GPModel::new(KernelSpec::tanimoto(1.0), 0.0, vec![x], vec![0.0]).unwrap();
        assert_abs_diff_eq!(
            m.log_marginal_likelihood(),
            -0.9189385332046727,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lml_permutation_invariant() {
        let mut s = RngStream::new(2, 0);
        let pts: Vec<Point> = (0..8).map(|_| random_fp(&mut s, 64, 0.35)).collect();
        let obs: Vec<f64> = (0..8).map(|_| s.standard_normal()).collect();
        let m = GPModel::new(KernelSpec::tanimoto(1.0), 0.05, pts.clone(), obs.clone()).unwrap();

        let perm = [3usize, 0, 7, 2, 5, 1, 6, 4];
        let pts2: Vec<Point> = perm.iter().map(|&i| pts[i].clone()).collect();
        let obs2: Vec<f64> = perm.iter().map(|&i| obs[i]).collect();
        let m2 = GPModel::new(KernelSpec::tanimoto(1.0), 0.05, pts2, obs2).unwrap();
        assert_abs_diff_eq!(
            m.log_marginal_likelihood(),
            m2.log_marginal_likelihood(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn lml_noise_change_matches_scalar_formula() {
        // For n = 1 the profiled likelihood is -(1/2) ln(2 pi (sigma^2 + tau^2)).
        let x = random_fp(&mut RngStream::new(3, 0), 32, 0.4);
        let build = |tau2: f64| {
            GPModel::new(
                KernelSpec::tanimoto(2.0),
                tau2,
                vec![x.clone()],
                vec![0.7],
            )
            .unwrap()
            .log_marginal_likelihood()
        };
        let delta = build(0.8) - build(0.4);
        let want = -0.5 * ((2.0f64 + 0.8).ln() - (2.0f64 + 0.4).ln());
        assert_abs_diff_eq!(delta, want, epsilon = 1e-10);
    }

    #[test]
    fn noiseless_interpolation() {
        let mut s = RngStream::new(4, 0);
        let m = random_model(&mut s, 10, 0.0);
        for (p, &z) in m.inputs().to_vec().iter().zip(m.observations().to_vec().iter()) {
            let g = m.predict(p);
            assert_abs_diff_eq!(g.mean, z, epsilon = 1e-6);
            assert!(g.variance <= 1e-8 * m.kernel().variance);
        }
    }

    #[test]
    fn dissimilar_point_reverts_to_profiled_mean() {
        // Two training fingerprints and a probe, all with disjoint support:
        // the Jaccard Gram is the identity, so by hand
        //   mean = beta = (z1 + z2) / 2,
        //   var  = sigma^2 (1 + 1 / 2).
        let bits = |range: std::ops::Range<usize>| {
            Point::Fp(Fingerprint::from_bits(
                &(0..96).map(|i| range.contains(&i)).collect::<Vec<_>>(),
            ))
        };
        let m = GPModel::new(
            KernelSpec::tanimoto(1.0),
            0.0,
            vec![bits(0..10), bits(10..20)],
            vec![1.0, 3.0],
        )
        .unwrap();
        let g = m.predict(&bits(40..50));
        assert_abs_diff_eq!(m.beta_hat(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.mean, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.variance, 1.5, epsilon = 1e-7);
    }

    #[test]
    fn predict_matches_dense_oracle() {
        // Independent route: assemble the ordinary-kriging equations with
        // nalgebra's LU solve and compare.
        let mut s = RngStream::new(5, 0);
        for trial in 0..5 {
            let n = 3 + trial;
            let pts: Vec<Point> = (0..n).map(|_| random_fp(&mut s, 64, 0.35)).collect();
            let obs: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
            let spec = KernelSpec::tanimoto(1.3);
            let tau2 = 0.2;
            let m = GPModel::new(spec.clone(), tau2, pts.clone(), obs.clone()).unwrap();

            let kmat = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                kernel_eval(&spec, &pts[i], &pts[j]).unwrap() + if i == j { tau2 } else { 0.0 }
            });
            let lu = kmat.lu();
            let ones = nalgebra::DVector::from_element(n, 1.0);
            let z = nalgebra::DVector::from_vec(obs.clone());
            let kinv_one = lu.solve(&ones).unwrap();
            let kinv_z = lu.solve(&z).unwrap();
            let denom = ones.dot(&kinv_one);
            let beta = ones.dot(&kinv_z) / denom;
            assert_abs_diff_eq!(m.beta_hat(), beta, epsilon = 1e-10);

            for _ in 0..10 {
                let x = random_fp(&mut s, 64, 0.35);
                let y = random_fp(&mut s, 64, 0.35);
                let kx = nalgebra::DVector::from_fn(n, |i, _| {
                    kernel_eval(&spec, &x, &pts[i]).unwrap()
                });
                let ky = nalgebra::DVector::from_fn(n, |i, _| {
                    kernel_eval(&spec, &y, &pts[i]).unwrap()
                });
                let kinv_kx = lu.solve(&kx).unwrap();
                let kinv_ky = lu.solve(&ky).unwrap();
                let mean = beta + kx.dot(&lu.solve(&(z.clone() - beta * ones.clone())).unwrap());
                let var = kernel_eval(&spec, &x, &x).unwrap() - kx.dot(&kinv_kx)
                    + (1.0 - kx.dot(&kinv_one)).powi(2) / denom;
                let cov = kernel_eval(&spec, &x, &y).unwrap() - kx.dot(&kinv_ky)
                    + (1.0 - kx.dot(&kinv_one)) * (1.0 - ky.dot(&kinv_one)) / denom;

                let g = m.predict(&x);
                assert_abs_diff_eq!(g.mean, mean, epsilon = 1e-10);
                assert_abs_diff_eq!(g.variance, var, epsilon = 1e-10);
                assert_abs_diff_eq!(m.posterior_cov(&x, &y), cov, epsilon = 1e-10);
                // Covariance diagonal agrees with the predictive variance.
                assert_abs_diff_eq!(m.posterior_cov(&x, &x), g.variance, epsilon = 1e-10);
                assert_abs_diff_eq!(
                    m.posterior_cov(&x, &y),
                    m.posterior_cov(&y, &x),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn observational_variance_adds_noise_exactly() {
        let mut s = RngStream::new(6, 0);
        let m = random_model(&mut s, 8, 0.3);
        for _ in 0..10 {
            let x = random_fp(&mut s, 64, 0.35);
            let a = m.predict(&x);
            let b = m.predict_observational(&x);
            assert_eq!(b.mean, a.mean);
            assert_eq!(b.variance, a.variance + 0.3);
            assert!(b.variance >= 0.3);
        }
        let m0 = random_model(&mut s, 8, 0.0);
        let x = random_fp(&mut s, 64, 0.35);
        assert_eq!(m0.predict(&x), m0.predict_observational(&x));
    }

    #[test]
    fn update_agrees_with_refit() {
        let mut s = RngStream::new(7, 0);
        let mut worst: f64 = 0.0;
        for trial in 0..10 {
            let n = 3 + trial % 6;
            let noise = if trial % 2 == 0 { 0.0 } else { 0.15 };
            let m = random_model(&mut s, n, noise);
            let x_new = random_fp(&mut s, 64, 0.35);
            let z_new = s.standard_normal();
            let upd = m.update(x_new.clone(), z_new).unwrap();

            let mut pts = m.inputs().to_vec();
            let mut obs = m.observations().to_vec();
            pts.push(x_new);
            obs.push(z_new);
            let refit = GPModel::new(m.kernel().clone(), noise, pts, obs).unwrap();

            for _ in 0..50 {
                let x = random_fp(&mut s, 64, 0.35);
                let a = upd.predict(&x);
                let b = refit.predict(&x);
                worst = worst.max((a.mean - b.mean).abs()).max((a.variance - b.variance).abs());
            }
        }
        assert!(worst <= 1e-8, "update deviates from refit by {worst}");
    }

    #[test]
    fn update_interpolates_new_point_at_zero_noise() {
        let mut s = RngStream::new(8, 0);
        let m = random_model(&mut s, 6, 0.0);
        let x = random_fp(&mut s, 64, 0.35);
        let upd = m.update(x.clone(), 4.2).unwrap();
        let g = upd.predict(&x);
        assert_abs_diff_eq!(g.mean, 4.2, epsilon = 1e-6);
        assert!(g.variance <= 1e-8 * m.kernel().variance);
    }

    #[test]
    fn update_never_increases_variance() {
        let mut s = RngStream::new(9, 0);
        for trial in 0..5 {
            let m = random_model(&mut s, 5 + trial, 0.1);
            let x_new = random_fp(&mut s, 64, 0.35);
            let upd = m.update(x_new, s.standard_normal()).unwrap();
            for _ in 0..20 {
                let x = random_fp(&mut s, 64, 0.35);
                assert!(upd.predict(&x).variance <= m.predict(&x).variance + 1e-10);
            }
        }
    }

    #[test]
    fn duplicate_point_at_zero_noise_keeps_predictions() {
        let mut s = RngStream::new(10, 0);
        let m = random_model(&mut s, 6, 0.0);
        let x_dup = m.inputs()[2].clone();
        let z_dup = m.observations()[2];
        let upd = m.update(x_dup, z_dup).unwrap();
        for _ in 0..20 {
            let x = random_fp(&mut s, 64, 0.35);
            let a = m.predict(&x);
            let b = upd.predict(&x);
            assert_abs_diff_eq!(a.mean, b.mean, epsilon = 1e-8);
            assert_abs_diff_eq!(a.variance, b.variance, epsilon = 1e-8);
        }
    }

    #[test]
    fn alpha_consistency_with_variance_drop() {
        let mut s = RngStream::new(11, 0);
        for trial in 0..5 {
            let m = random_model(&mut s, 4 + trial, if trial % 2 == 0 { 0.0 } else { 0.2 });
            let x = random_fp(&mut s, 64, 0.35);
            let upd = m.update(x.clone(), s.standard_normal()).unwrap();
            for _ in 0..10 {
                let xp = random_fp(&mut s, 64, 0.35);
                let a = m.alpha_n(&x, &xp);
                let drop = m.predict(&xp).variance - upd.predict(&xp).variance;
                assert_abs_diff_eq!(a * a, drop, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn alpha_basic_values() {
        let mut s = RngStream::new(12, 0);
        let m = random_model(&mut s, 5, 0.0);
        let x = random_fp(&mut s, 64, 0.35);
        let g = m.predict(&x);
        assert_abs_diff_eq!(m.alpha_n(&x, &x), g.variance.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn excursion_probability_and_classification() {
        let mut s = RngStream::new(13, 0);
        let m = random_model(&mut s, 8, 0.1);
        let x = random_fp(&mut s, 64, 0.35);
        let g = m.predict(&x);
        assert_abs_diff_eq!(m.excursion_prob(&x, g.mean), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            m.excursion_prob(&x, g.mean - g.sd()),
            0.8413447460685429,
            epsilon = 1e-9
        );
        assert!(m.classify(&x, g.mean));
        assert!(!m.classify(&x, g.mean + 1e-9));
        // Agreement between the classifier and p >= 1/2.
        for _ in 0..30 {
            let x = random_fp(&mut s, 64, 0.35);
            let t = s.standard_normal();
            assert_eq!(m.classify(&x, t), m.excursion_prob(&x, t) >= 0.5);
        }
        // Degenerate variance: indicator on the mean.
        let x0 = m.inputs()[0].clone();
        let m0 = {
            let mut pts = vec![x0.clone()];
            let mut obs = vec![1.0];
            pts.push(m.inputs()[1].clone());
            obs.push(2.0);
            GPModel::new(KernelSpec::tanimoto(1.0), 0.0, pts, obs).unwrap()
        };
        assert_eq!(m0.excursion_prob(&x0, 1.5), 0.0);
        assert_eq!(m0.excursion_prob(&x0, 0.5), 1.0);
    }

    #[test]
    fn shrinkage_toward_observations_with_noise() {
        // At the training points, m - z = -tau^2 K_obs^-1 (z - beta 1), so
        // ||m - z|| <= ||beta 1 - z|| in l2 because lambda_min(K_obs) >= tau^2.
        // (The componentwise version of this bound is false in general.)
        let mut s = RngStream::new(14, 0);
        for trial in 0..5 {
            let pts: Vec<Point> = (0..10).map(|_| random_fp(&mut s, 64, 0.35)).collect();
            let z = super::fit::tests::simulate_gp(&pts, 1.5, 0.4, 0.0, &mut s);
            let m = GPModel::new(KernelSpec::tanimoto(1.5), 0.4, pts, z).unwrap();
            let (mut pred_err, mut prior_err) = (0.0, 0.0);
            for (p, &z) in m.inputs().to_vec().iter().zip(m.observations().to_vec().iter()) {
                pred_err += (m.predict(p).mean - z).powi(2);
                prior_err += (m.beta_hat() - z).powi(2);
            }
            assert!(
                pred_err.sqrt() <= prior_err.sqrt() + 1e-9,
                "trial {trial}: predictions did not shrink toward the observations"
            );
        }
    }

    #[test]
    fn posterior_batch_matches_pointwise_api() {
        let mut s = RngStream::new(15, 0);
        let m = random_model(&mut s, 7, 0.1);
        let probes: Vec<Point> = (0..6).map(|_| random_fp(&mut s, 64, 0.35)).collect();
        let batch = m.posterior_batch(&probes);
        for (i, p) in probes.iter().enumerate() {
            let g = m.predict(p);
            assert_abs_diff_eq!(batch.mean[i], g.mean, epsilon = 1e-12);
            assert_abs_diff_eq!(batch.var[i], g.variance, epsilon = 1e-12);
            for (j, q) in probes.iter().enumerate() {
                assert_abs_diff_eq!(
                    batch.cov(i, j),
                    m.posterior_cov(p, q),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn rejects_invalid_construction() {
        let mut s = RngStream::new(16, 0);
        let x = random_fp(&mut s, 64, 0.35);
        assert!(GPModel::new(KernelSpec::tanimoto(1.0), 0.0, vec![], vec![]).is_err());
        assert!(
            GPModel::new(KernelSpec::tanimoto(1.0), 0.0, vec![x.clone()], vec![1.0, 2.0]).is_err()
        );
        assert!(GPModel::new(KernelSpec::tanimoto(1.0), -0.1, vec![x], vec![1.0]).is_err());
    }
}
