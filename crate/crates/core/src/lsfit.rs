//! Two-parameter least-squares sine fit at a known, coherent frequency.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Estimates of `A cos(phi)` and `A sin(phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub theta1: f64,
    pub theta2: f64,
}

impl ThetaEstimate {
    pub fn amp_sq(&self) -> f64 {
        self.theta1 * self.theta1 + self.theta2 * self.theta2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub theta: ThetaEstimate,
    pub amp_sq: f64,
    pub amp: f64,
}

impl From<ThetaEstimate> for FitResult {
    fn from(theta: ThetaEstimate) -> Self {
        let amp_sq = theta.amp_sq();
        Self {
            theta,
            amp_sq,
            amp: amp_sq.sqrt(),
        }
    }
}

/// Precomputed `cos(k_i)`, `sin(k_i)` columns for repeated fits.
#[derive(Debug, Clone)]
pub struct SineBasis {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl SineBasis {
    pub fn new(lambda: u64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewSamples(n));
        }
        let (cos, sin) = (0..n)
            .map(|i| {
                let r = (lambda as u128 * i as u128) % n as u128;
                let k = TAU * r as f64 / n as f64;
                (k.cos(), k.sin())
            })
            .unzip();
        Ok(Self { n, cos, sin })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    /// `theta1 = -(2/N) sum y_i cos k_i`, `theta2 = (2/N) sum y_i sin k_i`.
    pub fn fit_theta(&self, y: &[f64]) -> Result<ThetaEstimate> {
        if y.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        let (mut c, mut s) = (0.0, 0.0);
        for ((&yi, &ci), &si) in y.iter().zip(&self.cos).zip(&self.sin) {
            c += yi * ci;
            s += yi * si;
        }
        let scale = 2.0 / self.n as f64;
        Ok(ThetaEstimate {
            theta1: -scale * c,
            theta2: scale * s,
        })
    }

    pub fn fit(&self, y: &[f64]) -> Result<FitResult> {
        self.fit_theta(y).map(FitResult::from)
    }
}

pub fn fit_theta(y: &[f64], lambda: u64, n: usize) -> Result<ThetaEstimate> {
    SineBasis::new(lambda, n)?.fit_theta(y)
}

pub fn fit(y: &[f64], lambda: u64, n: usize) -> Result<FitResult> {
    SineBasis::new(lambda, n)?.fit(y)
}

/// Squared-amplitude estimate, computed from the two projections.
pub fn amp_sq_estimate(y: &[f64], lambda: u64, n: usize) -> Result<f64> {
    Ok(fit_theta(y, lambda, n)?.amp_sq())
}

/// The same estimate as the O(N^2) weighted double sum
/// `(4/N^2) sum_i sum_u y_i y_u cos(k_i - k_u)`; kept for validating the
/// projection form.
pub fn amp_sq_double_sum(y: &[f64], lambda: u64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::TooFewSamples(n));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let mut acc = NeumaierSum::new();
    for (i, &yi) in y.iter().enumerate() {
        for (u, &yu) in y.iter().enumerate() {
            let d = (lambda as u128 * (i + n - u) as u128) % n as u128;
            acc.add(yi * yu * (TAU * d as f64 / n as f64).cos());
        }
    }
    Ok(4.0 / (n * n) as f64 * acc.value())
}

/// `(H^T H)^{-1} H^T y` for an `N x p` observation matrix given by rows.
///
/// Solved through the normal equations with partial pivoting; a pivot that
/// vanishes relative to the matrix scale is reported as singular.
pub fn general_ls_solve(h: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let rows = h.len();
    if rows != y.len() {
        return Err(Error::LengthMismatch {
            expected: rows,
            got: y.len(),
        });
    }
    let p = h.first().map_or(0, Vec::len);
    if p == 0 || h.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidParameter(
            "observation matrix rows must share a nonzero width".into(),
        ));
    }

    // augmented [H^T H | H^T y]
    let mut m = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in h.iter().zip(y) {
        for a in 0..p {
            for b in 0..p {
                m[a][b] += row[a] * row[b];
            }
            m[a][p] += row[a] * yi;
        }
    }
    let scale = m
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::SingularMatrix);
    }

    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("non-empty pivot range");
        if m[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::SingularMatrix);
        }
        m.swap(col, pivot);
        for r in col + 1..p {
            let f = m[r][col] / m[col][col];
            let (top, bottom) = m.split_at_mut(r);
            for (d, s) in bottom[0][col..=p].iter_mut().zip(&top[col][col..=p]) {
                *d -= f * s;
            }
        }
    }
    let mut x = vec![0.0; p];
    for r in (0..p).rev() {
        let tail: f64 = (r + 1..p).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][p] - tail) / m[r][r];
    }
    Ok(x)
}
