//! Generation of synthetic molecule-like datasets for demos and tests.
//!
//! Fingerprints are drawn around shared scaffold patterns so that pairwise
//! Jaccard similarities span a realistic range (high within a scaffold
//! family, low across), instead of concentrating at a single value the way
//! iid random bits do. Responses are a Tanimoto-kernel GP sample plus iid
//! Gaussian noise.

use crate::dist::RngStream;
use crate::kernels::{jaccard, Fingerprint, Point};
use crate::linalg::factor_with_jitter;

#[derive(Clone, Debug)]
pub struct DemoConfig {
    /// Number of molecules.
    pub n: usize,
    /// Fingerprint length in bits.
    pub d: usize,
    /// Number of scaffold families.
    pub scaffolds: usize,
    /// Bits set in each scaffold pattern.
    pub scaffold_bits: usize,
    /// Probability of inheriting each scaffold bit.
    pub keep_prob: f64,
    /// Extra random bits per molecule.
    pub extra_bits: usize,
    /// Response location (e.g. a wavelength in nm).
    pub response_mean: f64,
    /// Kernel variance of the generating GP.
    pub kernel_variance: f64,
    /// Observation noise variance.
    pub noise_var: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        // Shaped after a photoswitch-style wavelength dataset: a few
        // hundred molecules, 2048-bit fingerprints, response sd ~66.
        Self {
            n: 392,
            d: 2048,
            scaffolds: 24,
            scaffold_bits: 64,
            keep_prob: 0.85,
            extra_bits: 12,
            response_mean: 385.0,
            kernel_variance: 4400.0,
            noise_var: 225.0,
        }
    }
}

/// Scaffold-structured random fingerprints.
pub fn fingerprints(cfg: &DemoConfig, stream: &mut RngStream) -> Vec<Fingerprint> {
    let scaffolds: Vec<Vec<usize>> = (0..cfg.scaffolds)
        .map(|_| {
            (0..cfg.scaffold_bits)
                .map(|_| stream.index(cfg.d))
                .collect()
        })
        .collect();
    (0..cfg.n)
        .map(|_| {
            let scaffold = &scaffolds[stream.index(cfg.scaffolds)];
            let mut bits = vec![false; cfg.d];
            for &b in scaffold {
                if stream.uniform() < cfg.keep_prob {
                    bits[b] = true;
                }
            }
            for _ in 0..cfg.extra_bits {
                bits[stream.index(cfg.d)] = true;
            }
            Fingerprint::from_bits(&bits)
        })
        .collect()
}

/// Draws latent GP values and noisy observations over the given points
/// from a Tanimoto-kernel GP: returns `(truth, observations)`.
pub fn sample_gp_responses(
    points: &[Point],
    kernel_variance: f64,
    noise_var: f64,
    mean: f64,
    stream: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let n = points.len();
    let chol = factor_with_jitter(n, |i, j| {
        kernel_variance * jaccard(&points[i], &points[j]).unwrap()
            + if i == j { 1e-8 * kernel_variance } else { 0.0 }
    })
    .expect("demo Gram matrix is positive definite with jitter");
    let eps: Vec<f64> = (0..n).map(|_| stream.standard_normal()).collect();
    let truth: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += chol.row(i)[j] * eps[j];
            }
            mean + acc
        })
        .collect();
    let obs = truth
        .iter()
        .map(|f| f + noise_var.sqrt() * stream.standard_normal())
        .collect();
    (truth, obs)
}

/// A full molecule-like universe: ids, fingerprints and noisy responses.
pub fn universe(cfg: &DemoConfig, seed: u64) -> (Vec<String>, Vec<Fingerprint>, Vec<f64>) {
    let mut stream = RngStream::new(seed, 0);
    let fps = fingerprints(cfg, &mut stream);
    let points: Vec<Point> = fps.iter().cloned().map(Point::Fp).collect();
    let (_, obs) = sample_gp_responses(
        &points,
        cfg.kernel_variance,
        cfg.noise_var,
        cfg.response_mean,
        &mut stream,
    );
    let ids = (0..cfg.n).map(|i| format!("mol_{i:04}")).collect();
    (ids, fps, obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_structure_spans_a_range() {
        let cfg = DemoConfig {
            n: 60,
            d: 512,
            scaffolds: 6,
            scaffold_bits: 48,
            ..DemoConfig::default()
        };
        let mut s = RngStream::new(5, 0);
        let fps = fingerprints(&cfg, &mut s);
        let points: Vec<Point> = fps.into_iter().map(Point::Fp).collect();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..points.len() {
            for j in 0..i {
                let v = jaccard(&points[i], &points[j]).unwrap();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!(hi > 0.45, "no similar pairs (max jaccard {hi})");
        assert!(lo < 0.15, "no dissimilar pairs (min jaccard {lo})");
    }

    #[test]
    fn universe_is_deterministic() {
        let cfg = DemoConfig {
            n: 20,
            d: 256,
            ..DemoConfig::default()
        };
        let (ids_a, fps_a, z_a) = universe(&cfg, 9);
        let (ids_b, fps_b, z_b) = universe(&cfg, 9);
        assert_eq!(ids_a, ids_b);
        assert_eq!(fps_a, fps_b);
        assert_eq!(z_a, z_b);
        let (_, _, z_c) = universe(&cfg, 10);
        assert_ne!(z_a, z_c);
    }

    #[test]
    fn responses_have_the_configured_scale() {
        let cfg = DemoConfig::default();
        let (_, _, z) = universe(&cfg, 1);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        // Location within a few sds of the configured mean, spread within
        // a factor ~2 of the kernel scale.
        assert!((mean - 385.0).abs() < 50.0, "mean {mean}");
        assert!(sd > 25.0 && sd < 160.0, "sd {sd}");
    }
}
