//! Small dense complex linear algebra for the least-squares fitters.

use thiserror::Error;

use crate::Complex64;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Gram matrix is rank deficient beyond regularization (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },
}

/// Hermitian positive-definite matrix stored as a dense row-major square.
#[derive(Debug, Clone)]
pub struct Hermitian {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl Hermitian {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }

    /// Sum of the real diagonal.
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.at(i, i).re).sum()
    }

    /// Add `eps` to every diagonal entry.
    pub fn regularize(&mut self, eps: f64) {
        for i in 0..self.n {
            self.at_mut(i, i).re += eps;
        }
    }
}

/// Conditioning diagnostics of a Cholesky factorization: the ratio of the
/// largest to the smallest squared pivot and the smallest squared pivot
/// itself. A pivot that sinks to the size of the diagonal regularizer means
/// the data left that direction undetermined.
#[derive(Debug, Clone, Copy)]
pub struct CondInfo {
    pub cond: f64,
    pub min_pivot: f64,
}

/// Solve `G h = b` for Hermitian positive-definite `G` by Cholesky
/// factorization. Returns the solution and conditioning diagnostics.
pub fn cholesky_solve(
    g: &Hermitian,
    b: &[Complex64],
) -> Result<(Vec<Complex64>, CondInfo), SolveError> {
    let n = g.n;
    assert_eq!(b.len(), n);
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    let mut min_d = f64::INFINITY;
    let mut max_d = 0.0f64;

    for j in 0..n {
        let mut d = g.at(j, j).re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        max_d = max_d.max(d.abs());
        if d <= 0.0 || !d.is_finite() || d < 1e-300 {
            let cond = if d > 0.0 { max_d / d } else { f64::INFINITY };
            return Err(SolveError::IllConditioned { cond });
        }
        min_d = min_d.min(d);
        let root = d.sqrt();
        l[j * n + j] = Complex64::new(root, 0.0);
        for i in (j + 1)..n {
            let mut s = g.at(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / root;
        }
    }

    let info = CondInfo { cond: max_d / min_d, min_pivot: min_d };

    // Forward substitution: L y = b.
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i].re;
    }
    // Back substitution: L^H x = y.
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i].conj() * x[k];
        }
        x[i] = s / l[i * n + i].re;
    }
    Ok((x, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_known_hermitian_system() {
        // G = A^H A for A = [[1, i], [2, 1], [0, 1]] plus identity.
        let mut g = Hermitian::zeros(2);
        *g.at_mut(0, 0) = Complex64::new(6.0, 0.0);
        *g.at_mut(0, 1) = Complex64::new(2.0, 1.0);
        *g.at_mut(1, 0) = Complex64::new(2.0, -1.0);
        *g.at_mut(1, 1) = Complex64::new(4.0, 0.0);
        let truth = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 3.0)];
        // b = G * truth
        let b = vec![
            g.at(0, 0) * truth[0] + g.at(0, 1) * truth[1],
            g.at(1, 0) * truth[0] + g.at(1, 1) * truth[1],
        ];
        let (x, info) = cholesky_solve(&g, &b).unwrap();
        for (got, want) in x.iter().zip(&truth) {
            assert!((got - want).norm() < 1e-12);
        }
        assert!(info.cond >= 1.0);
        assert!(info.min_pivot > 0.0);
    }

    #[test]
    fn singular_matrix_is_rejected_with_condition_estimate() {
        let mut g = Hermitian::zeros(2);
        *g.at_mut(0, 0) = Complex64::new(1.0, 0.0);
        *g.at_mut(0, 1) = Complex64::new(1.0, 0.0);
        *g.at_mut(1, 0) = Complex64::new(1.0, 0.0);
        *g.at_mut(1, 1) = Complex64::new(1.0, 0.0);
        let b = vec![Complex64::new(1.0, 0.0); 2];
        match cholesky_solve(&g, &b) {
            Err(SolveError::IllConditioned { cond }) => assert!(cond > 1e12),
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }
}
