//! Covariance kernels over binary-fingerprint and Euclidean inputs.

use crate::error::{Error, Result};

/// A fixed-length binary vector stored as packed 64-bit words with a cached
/// popcount. Inner products between fingerprints are word-AND popcounts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    words: Vec<u64>,
    len: usize,
    ones: u32,
}

impl Fingerprint {
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        let ones = words.iter().map(|w| w.count_ones()).sum();
        Self {
            words,
            len: bits.len(),
            ones,
        }
    }

    /// Parses a big-endian hex encoding: hex digit `j` carries bits
    /// `4j..4j+3`, most significant bit first, so `"ff"` with `d = 8` is the
    /// all-ones vector.
    pub fn from_hex(hex: &str, d: usize) -> Result<Self> {
        if d == 0 || d % 4 != 0 {
            return Err(Error::Domain(format!(
                "fingerprint length {d} must be a positive multiple of 4"
            )));
        }
        if hex.len() != d / 4 {
            return Err(Error::Domain(format!(
                "fingerprint hex has {} digits, expected {}",
                hex.len(),
                d / 4
            )));
        }
        let mut bits = vec![false; d];
        for (j, c) in hex.chars().enumerate() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| Error::Domain(format!("invalid hex digit '{c}'")))?;
            for b in 0..4 {
                bits[4 * j + b] = (v >> (3 - b)) & 1 == 1;
            }
        }
        Ok(Self::from_bits(&bits))
    }

    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.len / 4);
        for j in 0..self.len / 4 {
            let mut v = 0u32;
            for b in 0..4 {
                let i = 4 * j + b;
                if self.words[i / 64] >> (i % 64) & 1 == 1 {
                    v |= 1 << (3 - b);
                }
            }
            out.push(char::from_digit(v, 16).unwrap());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count_ones(&self) -> u32 {
        self.ones
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Inner product <x, x'> = |x AND x'|.
    pub fn dot(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// Hamming distance |x XOR x'|, which equals the squared Euclidean
    /// distance for binary vectors.
    pub fn hamming(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.len)
            .map(|i| if self.get(i) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// An input location: a binary fingerprint or a real-valued vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Fp(Fingerprint),
    Real(Vec<f64>),
}

impl Point {
    pub fn dim(&self) -> usize {
        match self {
            Point::Fp(f) => f.len(),
            Point::Real(v) => v.len(),
        }
    }
}

impl From<Fingerprint> for Point {
    fn from(f: Fingerprint) -> Self {
        Point::Fp(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFamily {
    Tanimoto,
    Gaussian,
    Exponential,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Tanimoto => "tanimoto",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Exponential => "exponential",
        }
    }
}

/// Kernel family plus hyperparameters. The lengthscale is present exactly
/// for the stationary families.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Variance sigma_k^2 (response units squared).
    pub variance: f64,
    /// Lengthscale theta_k (input-distance units); absent for Tanimoto.
    pub lengthscale: Option<f64>,
}

impl KernelSpec {
    pub fn tanimoto(variance: f64) -> Self {
        assert!(variance > 0.0, "kernel variance must be positive");
        Self {
            family: KernelFamily::Tanimoto,
            variance,
            lengthscale: None,
        }
    }

    pub fn gaussian(variance: f64, lengthscale: f64) -> Self {
        assert!(variance > 0.0 && lengthscale > 0.0);
        Self {
            family: KernelFamily::Gaussian,
            variance,
            lengthscale: Some(lengthscale),
        }
    }

    pub fn exponential(variance: f64, lengthscale: f64) -> Self {
        assert!(variance > 0.0 && lengthscale > 0.0);
        Self {
            family: KernelFamily::Exponential,
            variance,
            lengthscale: Some(lengthscale),
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.family != KernelFamily::Tanimoto
    }

    /// Same family and lengthscale, different variance.
    pub fn with_variance(&self, variance: f64) -> Self {
        assert!(variance > 0.0);
        Self {
            variance,
            ..self.clone()
        }
    }

    pub fn with_lengthscale(&self, lengthscale: f64) -> Self {
        assert!(self.is_stationary() && lengthscale > 0.0);
        Self {
            lengthscale: Some(lengthscale),
            ..self.clone()
        }
    }
}

fn binary_from_real(v: &[f64]) -> Result<Fingerprint> {
    let mut bits = Vec::with_capacity(v.len());
    for &x in v {
        if x == 0.0 {
            bits.push(false);
        } else if x == 1.0 {
            bits.push(true);
        } else {
            return Err(Error::NonBinaryInput);
        }
    }
    Ok(Fingerprint::from_bits(&bits))
}

pub(crate) fn euclidean(a: &Point, b: &Point) -> f64 {
    match (a, b) {
        (Point::Fp(x), Point::Fp(y)) => f64::from(x.hamming(y)).sqrt(),
        (Point::Real(x), Point::Real(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt(),
        (Point::Fp(x), Point::Real(_)) => euclidean(&Point::Real(x.to_dense()), b),
        (Point::Real(_), Point::Fp(y)) => euclidean(a, &Point::Real(y.to_dense())),
    }
}

fn jaccard_fp(x: &Fingerprint, y: &Fingerprint) -> f64 {
    let dot = f64::from(x.dot(y));
    let union = f64::from(x.count_ones()) + f64::from(y.count_ones()) - dot;
    if union == 0.0 {
        // Both vectors all-zero: defined as full similarity.
        1.0
    } else {
        dot / union
    }
}

/// Jaccard index of two points; errors if either point is not binary.
pub(crate) fn jaccard(a: &Point, b: &Point) -> Result<f64> {
    match (a, b) {
        (Point::Fp(x), Point::Fp(y)) => Ok(jaccard_fp(x, y)),
        (Point::Real(x), Point::Fp(y)) => Ok(jaccard_fp(&binary_from_real(x)?, y)),
        (Point::Fp(x), Point::Real(y)) => Ok(jaccard_fp(x, &binary_from_real(y)?)),
        (Point::Real(x), Point::Real(y)) => {
            Ok(jaccard_fp(&binary_from_real(x)?, &binary_from_real(y)?))
        }
    }
}

/// Evaluates the covariance kernel at a pair of points.
pub fn kernel_eval(spec: &KernelSpec, a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    match spec.family {
        KernelFamily::Tanimoto => Ok(spec.variance * jaccard(a, b)?),
        KernelFamily::Gaussian => {
            let r = euclidean(a, b);
            let theta = spec.lengthscale.expect("stationary kernel has lengthscale");
            Ok(spec.variance * (-r * r / (2.0 * theta * theta)).exp())
        }
        KernelFamily::Exponential => {
            let r = euclidean(a, b);
            let theta = spec.lengthscale.expect("stationary kernel has lengthscale");
            Ok(spec.variance * (-r / theta).exp())
        }
    }
}

/// Assembles the symmetric Gram matrix of a point set.
pub fn gram_matrix(spec: &KernelSpec, points: &[Point]) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Err(Error::Empty("gram_matrix needs at least one point".into()));
    }
    let n = points.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_eval(spec, &points[i], &points[j])?;
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::RngStream;
    use approx::assert_abs_diff_eq;

    fn fp(bits: &[u8]) -> Point {
        Point::Fp(Fingerprint::from_bits(
            &bits.iter().map(|&b| b == 1).collect::<Vec<_>>(),
        ))
    }

    #[test]
    fn tanimoto_identity_is_variance() {
        let spec = KernelSpec::tanimoto(1.0);
        let x = fp(&[1, 0, 1, 1]);
        assert_eq!(kernel_eval(&spec, &x, &x).unwrap(), 1.0);
        let spec = KernelSpec::tanimoto(3.5);
        assert_eq!(kernel_eval(&spec, &x, &x).unwrap(), 3.5);
    }

    #[test]
    fn tanimoto_direct_arithmetic() {
        let spec = KernelSpec::tanimoto(1.0);
        let x = fp(&[1, 0, 1]);
        let y = fp(&[1, 1, 0]);
        // dot = 1, |x|^2 = 2, |y|^2 = 2 -> 1 / (2 + 2 - 1)
        assert_abs_diff_eq!(
            kernel_eval(&spec, &x, &y).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn tanimoto_all_zero_convention() {
        let spec = KernelSpec::tanimoto(2.0);
        let x = fp(&[0, 0, 0]);
        assert_eq!(kernel_eval(&spec, &x, &x).unwrap(), 2.0);
        // All-zero vs non-zero has empty intersection.
        let y = fp(&[1, 0, 0]);
        assert_eq!(kernel_eval(&spec, &x, &y).unwrap(), 0.0);
    }

    #[test]
    fn tanimoto_rejects_non_binary() {
        let spec = KernelSpec::tanimoto(1.0);
        let x = Point::Real(vec![0.5, 0.0]);
        let y = Point::Real(vec![1.0, 0.0]);
        assert!(matches!(
            kernel_eval(&spec, &x, &y),
            Err(Error::NonBinaryInput)
        ));
        // 0/1-valued real vectors are accepted.
        let x = Point::Real(vec![1.0, 0.0]);
        assert_eq!(kernel_eval(&spec, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let spec = KernelSpec::tanimoto(1.0);
        let x = fp(&[1, 0]);
        let y = fp(&[1, 0, 1]);
        assert!(matches!(
            kernel_eval(&spec, &x, &y),
            Err(Error::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn stationary_kernels_match_formulas() {
        let x = Point::Real(vec![0.0, 0.0]);
        let y = Point::Real(vec![3.0, 4.0]); // distance 5
        let g = KernelSpec::gaussian(2.0, 2.5);
        assert_abs_diff_eq!(
            kernel_eval(&g, &x, &y).unwrap(),
            2.0 * (-25.0f64 / (2.0 * 6.25)).exp(),
            epsilon = 1e-15
        );
        let e = KernelSpec::exponential(2.0, 2.5);
        assert_abs_diff_eq!(
            kernel_eval(&e, &x, &y).unwrap(),
            2.0 * (-5.0f64 / 2.5).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn stationary_kernels_accept_fingerprints() {
        // Binary vectors: squared distance is the Hamming distance.
        let x = fp(&[1, 0, 1, 0]);
        let y = fp(&[1, 1, 0, 0]);
        let g = KernelSpec::gaussian(1.0, 1.0);
        assert_abs_diff_eq!(
            kernel_eval(&g, &x, &y).unwrap(),
            (-2.0 / 2.0_f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn hex_round_trip() {
        let f = Fingerprint::from_hex("ff", 8).unwrap();
        assert_eq!(f.count_ones(), 8);
        let f = Fingerprint::from_hex("80", 8).unwrap();
        assert!(f.get(0));
        assert_eq!(f.count_ones(), 1);
        let f = Fingerprint::from_hex("01", 8).unwrap();
        assert!(f.get(7));

        let mut s = RngStream::new(11, 0);
        for _ in 0..20 {
            let bits: Vec<bool> = (0..128).map(|_| s.uniform() < 0.3).collect();
            let f = Fingerprint::from_bits(&bits);
            let g = Fingerprint::from_hex(&f.to_hex(), 128).unwrap();
            assert_eq!(f, g);
        }
        assert!(Fingerprint::from_hex("f", 8).is_err());
        assert!(Fingerprint::from_hex("zz", 8).is_err());
    }

    #[test]
    fn gram_matrix_small_cases() {
        let spec = KernelSpec::tanimoto(2.0);
        let x = fp(&[1, 0, 1]);
        let g = gram_matrix(&spec, std::slice::from_ref(&x)).unwrap();
        assert_eq!(g, vec![vec![2.0]]);

        let g = gram_matrix(&spec, &[x.clone(), x]).unwrap();
        assert_eq!(g, vec![vec![2.0, 2.0], vec![2.0, 2.0]]);
    }

    #[test]
    fn kernel_symmetry_is_exact() {
        let mut s = RngStream::new(3, 0);
        let pts: Vec<Point> = (0..10)
            .map(|_| {
                Point::Fp(Fingerprint::from_bits(
                    &(0..64).map(|_| s.uniform() < 0.4).collect::<Vec<_>>(),
                ))
            })
            .collect();
        for spec in [
            KernelSpec::tanimoto(1.7),
            KernelSpec::gaussian(1.7, 3.0),
            KernelSpec::exponential(1.7, 3.0),
        ] {
            for a in &pts {
                for b in &pts {
                    assert_eq!(
                        kernel_eval(&spec, a, b).unwrap(),
                        kernel_eval(&spec, b, a).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn variance_scaling_is_exact() {
        let mut s = RngStream::new(4, 0);
        let pts: Vec<Point> = (0..8)
            .map(|_| {
                Point::Fp(Fingerprint::from_bits(
                    &(0..64).map(|_| s.uniform() < 0.4).collect::<Vec<_>>(),
                ))
            })
            .collect();
        let base = KernelSpec::tanimoto(1.0);
        let scaled = KernelSpec::tanimoto(4.0);
        let g0 = gram_matrix(&base, &pts).unwrap();
        let g1 = gram_matrix(&scaled, &pts).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(g1[i][j], 4.0 * g0[i][j]);
            }
        }
    }

    #[test]
    fn tanimoto_gram_is_psd() {
        // Jaccard is a valid kernel; check the minimum eigenvalue on random
        // binary subsets with an eigen-decomposition oracle.
        let mut s = RngStream::new(5, 0);
        let spec = KernelSpec::tanimoto(3.0);
        for round in 0..5 {
            let n = 10 + 2 * round;
            let pts: Vec<Point> = (0..n)
                .map(|_| {
                    Point::Fp(Fingerprint::from_bits(
                        &(0..96).map(|_| s.uniform() < 0.35).collect::<Vec<_>>(),
                    ))
                })
                .collect();
            let g = gram_matrix(&spec, &pts).unwrap();
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g[i][j]);
            let min_eig = m
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(
                min_eig >= -1e-8 * spec.variance,
                "minimum eigenvalue {min_eig} below PSD tolerance"
            );
        }
    }
}
