//! Cholesky factorization with a bounded diagonal jitter.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest diagonal jitter tried before giving up.
pub const MAX_JITTER: f64 = 1e-12;
const JITTER_LADDER: [f64; 5] = [0.0, 1e-15, 1e-14, 1e-13, MAX_JITTER];

/// Lower-triangular `L` with `L Lᵀ = C + jitter·I`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerFactor {
    n: usize,
    data: Vec<f64>,
    jitter: f64,
}

impl LowerFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal jitter that was needed (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `out = L z`.
    pub fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.n..i * self.n + i + 1];
            *o = row.iter().zip(z).map(|(l, zj)| l * zj).sum();
        }
    }

    /// `L Lᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| self.get(i, k) * self.get(j, k)).sum();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// Factorizes a symmetric positive semi-definite `n × n` row-major matrix,
/// adding diagonal jitter up to [`MAX_JITTER`] if plain Cholesky fails.
pub fn cholesky_with_jitter(matrix: &[f64], n: usize) -> Result<LowerFactor> {
    if matrix.len() != n * n {
        return Err(Error::Dimension { expected: n * n, got: matrix.len() });
    }
    let base = DMatrix::from_row_slice(n, n, matrix);
    for &jitter in &JITTER_LADDER {
        let mut m = base.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            let l = chol.l();
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    data[i * n + j] = l[(i, j)];
                }
            }
            if jitter > 0.0 {
                log::info!("Cholesky needed diagonal jitter {jitter:e} (n = {n})");
            }
            return Ok(LowerFactor { n, data, jitter });
        }
    }
    Err(Error::Numerical(format!(
        "Cholesky factorization of a {n}x{n} matrix failed even with jitter {MAX_JITTER:e}; \
         the matrix is indefinite or has nearly duplicate nodes"
    )))
}
