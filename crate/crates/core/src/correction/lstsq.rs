//! Streaming least squares by Givens QR, solved by an SVD of the triangular
//! factor for the minimum-norm solution.

#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff below which directions are treated as null.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Accumulates rows of an `n x P` least-squares problem as the `P x P`
/// triangular factor `R` and the rotated target `Q^T y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeastSquares<const P: usize> {
    r: [[f64; P]; P],
    qty: [f64; P],
    rss: f64,
    rows: usize,
}

impl<const P: usize> Default for LeastSquares<P> {
    fn default() -> Self {
        LeastSquares {
            r: [[0.0; P]; P],
            qty: [0.0; P],
            rss: 0.0,
            rows: 0,
        }
    }
}

impl<const P: usize> LeastSquares<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Sum of squared residuals of the fitted solution, when `R` has full rank.
    pub fn residual_sum_of_squares(&self) -> f64 {
        self.rss
    }

    pub fn add_row(&mut self, x: &[f64; P], y: f64) {
        let mut x = *x;
        let mut y = y;
        for i in 0..P {
            if x[i] == 0.0 {
                continue;
            }
            let a = self.r[i][i];
            let b = x[i];
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            self.r[i][i] = h;
            for j in i + 1..P {
                let (rij, xj) = (self.r[i][j], x[j]);
                self.r[i][j] = c * rij + s * xj;
                x[j] = c * xj - s * rij;
            }
            let q = self.qty[i];
            self.qty[i] = c * q + s * y;
            y = c * y - s * q;
        }
        self.rss += y * y;
        self.rows += 1;
    }

    /// Minimum-norm least-squares coefficients, `None` before any row.
    pub fn solve(&self) -> Option<[f64; P]> {
        if self.rows == 0 {
            return None;
        }
        let r = DMatrix::<f64>::from_fn(P, P, |i, j| self.r[i][j]);
        let b = DVector::<f64>::from_column_slice(&self.qty);
        let svd = r.svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            return Some([0.0; P]);
        }
        let beta = svd.solve(&b, RANK_TOLERANCE * smax).ok()?;
        let mut out = [0.0; P];
        out.copy_from_slice(beta.as_slice());
        Some(out)
    }
}

pub(crate) fn dot<const P: usize>(a: &[f64; P], b: &[f64; P]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
