//! Ordinary least squares in log2-log2 space.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("fit: x and y have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("fit: need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("fit: all x values are equal")]
    ConstantX,
    #[error("fit: log fit needs strictly positive values, got {0}")]
    NonPositive(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `y - (intercept + slope * x)` for every point.
    pub residuals: Vec<f64>,
}

impl LinearFit {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(FitError::TooFewPoints { needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(FitError::ConstantX);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    Ok(LinearFit {
        slope,
        intercept,
        residuals,
    })
}

/// Fits `log2 y = intercept + slope * log2 x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, FitError> {
    let lx = log2_all(xs)?;
    let ly = log2_all(ys)?;
    linear_fit(&lx, &ly)
}

fn log2_all(values: &[f64]) -> Result<Vec<f64>, FitError> {
    values
        .iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(v.log2())
            } else {
                Err(FitError::NonPositive(v))
            }
        })
        .collect()
}
