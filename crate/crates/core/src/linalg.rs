//! Minimal dense symmetric linear algebra: a Cholesky factorization with
//! adaptive jitter that supports appending one row at a time, which is what
//! the sequential update needs. Matrices here never exceed a few hundred
//! rows.

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor stored as ragged rows (row i holds
/// entries 0..=i).
#[derive(Clone, Debug)]
pub(crate) struct Chol {
    rows: Vec<Vec<f64>>,
    /// Diagonal jitter that was added to achieve positive definiteness.
    pub jitter: f64,
}

/// Factor the symmetric matrix given by a lookup closure, adding jitter
/// `start_rel * mean(diag)` escalating tenfold up to `max_rel * mean(diag)`
/// when a pivot fails.
pub(crate) fn factor_with_jitter<F>(n: usize, a: F) -> Result<Chol>
where
    F: Fn(usize, usize) -> f64,
{
    assert!(n > 0);
    let mean_diag = (0..n).map(|i| a(i, i)).sum::<f64>() / n as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut jitter = 0.0;
    loop {
        match try_factor(n, &a, jitter) {
            Some(rows) => return Ok(Chol { rows, jitter }),
            None => {
                jitter = if jitter == 0.0 {
                    1e-10 * scale
                } else {
                    jitter * 10.0
                };
                if jitter > 1e-4 * scale {
                    return Err(Error::LinAlg(format!(
                        "Cholesky failed even with jitter {:.3e} (mean diagonal {:.3e})",
                        jitter / 10.0,
                        mean_diag
                    )));
                }
            }
        }
    }
}

fn try_factor<F>(n: usize, a: &F, jitter: f64) -> Option<Vec<Vec<f64>>>
where
    F: Fn(usize, usize) -> f64,
{
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![0.0; i + 1];
        for j in 0..i {
            let mut s = a(i, j);
            for k in 0..j {
                s -= row[k] * rows[j][k];
            }
            row[j] = s / rows[j][j];
        }
        let mut d = a(i, i) + jitter;
        for k in 0..i {
            d -= row[k] * row[k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        row[i] = d.sqrt();
        rows.push(row);
    }
    Some(rows)
}

impl Chol {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Row `i` of the lower-triangular factor (entries 0..=i).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Solves L y = b in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        for i in 0..self.n() {
            let mut s = b[i];
            for k in 0..i {
                s -= self.rows[i][k] * b[k];
            }
            b[i] = s / self.rows[i][i];
        }
    }

    /// Solves L^T x = y in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        for i in (0..self.n()).rev() {
            let mut s = b[i];
            for k in i + 1..self.n() {
                s -= self.rows[k][i] * b[k];
            }
            b[i] = s / self.rows[i][i];
        }
    }

    /// Solves (L L^T) x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower(&mut x);
        self.solve_upper(&mut x);
        x
    }

    /// log det(L L^T) = 2 sum_i ln L_ii.
    pub fn log_det(&self) -> f64 {
        2.0 * self.rows.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>()
    }

    /// Appends one row: `cross` holds the symmetric off-diagonal entries
    /// against the existing rows and `diag` the new diagonal entry (jitter
    /// is applied to it automatically, matching the existing rows).
    pub fn extend(&mut self, cross: &[f64], diag: f64) -> Result<()> {
        assert_eq!(cross.len(), self.n());
        let mut l = cross.to_vec();
        self.solve_lower(&mut l);
        let mut d = diag + self.jitter;
        for v in &l {
            d -= v * v;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::LinAlg(format!(
                "Cholesky extension produced non-positive pivot {d:.3e}"
            )));
        }
        l.push(d.sqrt());
        self.rows.push(l);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spd(n: usize, seed: u64) -> Vec<Vec<f64>> {
        // A = B B^T + n I with pseudo-random B.
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| next()).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>();
            }
            a[i][i] += n as f64 / 10.0;
        }
        a
    }

    #[test]
    fn solves_match_nalgebra() {
        for n in [1, 3, 8, 20] {
            let a = spd(n, 42 + n as u64);
            let chol = factor_with_jitter(n, |i, j| a[i][j]).unwrap();
            assert_eq!(chol.jitter, 0.0);
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
            let x = chol.solve(&b);

            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
            let rhs = nalgebra::DVector::from_vec(b.clone());
            let want = m.clone().lu().solve(&rhs).unwrap();
            for i in 0..n {
                assert_abs_diff_eq!(x[i], want[i], epsilon = 1e-9);
            }
            assert_abs_diff_eq!(
                chol.log_det(),
                m.determinant().ln(),
                epsilon = 1e-8 * n as f64
            );
        }
    }

    #[test]
    fn extension_equals_full_factorization() {
        let n = 12;
        let a = spd(n, 7);
        let full = factor_with_jitter(n, |i, j| a[i][j]).unwrap();

        let mut grown = factor_with_jitter(n - 3, |i, j| a[i][j]).unwrap();
        for r in n - 3..n {
            let cross: Vec<f64> = (0..r).map(|j| a[r][j]).collect();
            grown.extend(&cross, a[r][r]).unwrap();
        }
        let b: Vec<f64> = (0..n).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let x = full.solve(&b);
        let y = grown.solve(&b);
        for i in 0..n {
            assert_abs_diff_eq!(x[i], y[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn jitter_escalates_on_rank_deficiency() {
        // Rank-one matrix needs jitter.
        let v = [1.0, 2.0, 3.0];
        let chol = factor_with_jitter(3, |i, j| v[i] * v[j]).unwrap();
        assert!(chol.jitter > 0.0);
        let x = chol.solve(&[1.0, 0.0, 0.0]);
        assert!(x.iter().all(|t| t.is_finite()));
    }
}
