//! Perron root of nonnegative square matrices by power iteration.

use serde::Serialize;

use crate::{Error, Result};

const MAX_ITER: usize = 200_000;
/// Iterations without the damping shift before falling back to it.
const UNSHIFTED_ITER: usize = 20_000;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Panics when the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        Self {
            dim,
            data: rows.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Principal submatrix on `keep` (in the given order).
    fn principal(&self, keep: &[usize]) -> Self {
        let mut out = Self::zeros(keep.len());
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// Drops indices whose row or column is zero, repeatedly. Each removal
/// only strips a zero eigenvalue, so the spectral radius is unchanged.
fn prune(m: &SquareMatrix) -> SquareMatrix {
    let mut keep: Vec<usize> = (0..m.dim()).collect();
    loop {
        let before = keep.len();
        let snapshot = keep.clone();
        keep.retain(|&i| {
            snapshot.iter().any(|&j| m.get(i, j) != 0.0)
                && snapshot.iter().any(|&j| m.get(j, i) != 0.0)
        });
        if keep.len() == before {
            break;
        }
    }
    m.principal(&keep)
}

enum Outcome {
    Converged(f64),
    Stalled(f64),
}

fn iterate(m: &SquareMatrix, shift: f64, tol: f64, max_iter: usize) -> Outcome {
    let n = m.dim();
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = m.row(i).iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + shift * v[i];
        }
        // v is a probability vector, so the L1 norm of w is the growth factor.
        let rho: f64 = w.iter().sum();
        if rho <= 0.0 {
            return Outcome::Converged(0.0);
        }
        let mut delta = 0.0;
        for (vi, wi) in v.iter_mut().zip(&w) {
            let next = wi / rho;
            delta += (next - *vi).abs();
            *vi = next;
        }
        if (rho - prev).abs() <= tol * rho && delta <= tol {
            return Outcome::Converged(rho);
        }
        prev = rho;
    }
    Outcome::Stalled(prev)
}

/// Spectral radius of a nonnegative matrix, to relative tolerance `tol`.
///
/// Iterates from the uniform vector; if that stalls (periodic or badly
/// separated spectra) it restarts on `A + cI`, with `c` the largest row sum,
/// and subtracts the shift from the result.
pub fn largest_eigenvalue(m: &SquareMatrix, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::param("tol", format!("must be > 0, got {tol}")));
    }
    if let Some(v) = m.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::param(
            "matrix",
            format!("entries must be finite and >= 0, found {v}"),
        ));
    }
    let m = prune(m);
    if m.dim() == 0 || m.is_zero() {
        return Ok(0.0);
    }
    if let Outcome::Converged(rho) = iterate(&m, 0.0, tol, UNSHIFTED_ITER) {
        return Ok(rho);
    }
    let shift = m.max_row_sum();
    match iterate(&m, shift, tol, MAX_ITER) {
        Outcome::Converged(rho) => Ok((rho - shift).max(0.0)),
        Outcome::Stalled(rho) => Err(Error::NoConvergence {
            iterations: UNSHIFTED_ITER + MAX_ITER,
            estimate: rho - shift,
        }),
    }
}
