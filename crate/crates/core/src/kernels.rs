//! Kernel functions and Gram matrices.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `(gamma * <x, z> + coef0)^degree`
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    /// `exp(-gamma * |x - z|^2)`
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn polynomial(degree: u32, gamma: f64, coef0: f64) -> Result<Self> {
        let spec = KernelSpec::Polynomial { degree, gamma, coef0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, gamma, coef0 } => {
                if degree < 1 {
                    return Err(Error::invalid("polynomial degree must be at least 1"));
                }
                if !(gamma > 0.0 && gamma.is_finite()) || !coef0.is_finite() {
                    return Err(Error::invalid("polynomial kernel needs gamma > 0 and finite coef0"));
                }
                Ok(())
            }
            KernelSpec::Rbf { gamma } => {
                if gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("rbf kernel needs gamma > 0"))
                }
            }
        }
    }

    /// Kernel value for two vectors of equal length.
    pub fn eval(&self, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: z.len() });
        }
        Ok(self.eval_unchecked(x, z))
    }

    pub fn eval_slices(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.eval(ArrayView1::from(x), ArrayView1::from(z))
    }

    fn eval_unchecked(&self, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(&z),
            KernelSpec::Polynomial { degree, gamma, coef0 } => (gamma * x.dot(&z) + coef0).powi(degree as i32),
            KernelSpec::Rbf { gamma } => {
                let sq: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * sq).exp()
            }
        }
    }

    /// Symmetric Gram matrix over the rows of `rows`.
    pub fn gram(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.gram_with(rows, Execution::default())
    }

    pub fn gram_with(&self, rows: ArrayView2<'_, f64>, exec: Execution) -> Result<Array2<f64>> {
        let n = rows.nrows();
        if n == 0 {
            return Err(Error::invalid("Gram matrix needs at least one row"));
        }
        // Upper triangle per row, mirrored afterwards so symmetry is exact.
        let upper: Vec<Vec<f64>> = par::map_range(exec, n, |i| {
            (i..n).map(|j| self.eval_unchecked(rows.row(i), rows.row(j))).collect()
        });
        let mut g = Array2::zeros((n, n));
        for (i, vals) in upper.into_iter().enumerate() {
            for (k, v) in vals.into_iter().enumerate() {
                g[[i, i + k]] = v;
                g[[i + k, i]] = v;
            }
        }
        Ok(g)
    }

    /// `out[i][j] = k(a_i, b_j)`.
    pub fn cross_gram(&self, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.cross_gram_with(a, b, Execution::default())
    }

    pub fn cross_gram_with(&self, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, exec: Execution) -> Result<Array2<f64>> {
        if a.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch { expected: b.ncols(), found: a.ncols() });
        }
        let rows: Vec<Vec<f64>> = par::map_range(exec, a.nrows(), |i| {
            (0..b.nrows()).map(|j| self.eval_unchecked(a.row(i), b.row(j))).collect()
        });
        let mut out = Array2::zeros((a.nrows(), b.nrows()));
        for (i, vals) in rows.into_iter().enumerate() {
            for (j, v) in vals.into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree, gamma, coef0 } => {
                write!(f, "polynomial degree={degree} gamma={gamma} coef0={coef0}")
            }
            KernelSpec::Rbf { gamma } => write!(f, "rbf gamma={gamma}"),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    /// Parses the `Display` form, e.g. `rbf gamma=0.5`. Missing parameters take
    /// the defaults degree=2, gamma=1, coef0=1.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let family = parts.next().ok_or_else(|| Error::invalid("empty kernel spec"))?;
        let mut degree = 2u32;
        let mut gamma = 1.0f64;
        let mut coef0 = 1.0f64;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("kernel parameter '{part}' is not key=value")))?;
            let bad = || Error::invalid(format!("kernel parameter '{part}' has an invalid value"));
            match key {
                "degree" => degree = value.parse().map_err(|_| bad())?,
                "gamma" => gamma = value.parse().map_err(|_| bad())?,
                "coef0" => coef0 = value.parse().map_err(|_| bad())?,
                _ => return Err(Error::invalid(format!("unknown kernel parameter '{key}'"))),
            }
        }
        let spec = match family {
            "linear" => KernelSpec::Linear,
            "polynomial" | "poly" => KernelSpec::Polynomial { degree, gamma, coef0 },
            "rbf" => KernelSpec::Rbf { gamma },
            other => return Err(Error::invalid(format!("unknown kernel family '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
