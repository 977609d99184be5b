//! Ordinary least squares for straight-line fits of scan data.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fitted points.
    pub residual_rms: f64,
    pub n_used: usize,
}

/// Fit y = slope·x + intercept. Needs at least two points with distinct x.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    assert_eq!(xs.len(), ys.len(), "fit inputs must be the same length");
    let n = xs.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("{n} points, need at least 2")));
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    let x_scale = xs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if sxx <= (1e-14 * (x_scale + 1e-300)).powi(2) * nf {
        return Err(Error::DegenerateFit("abscissa values have no spread".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum::<f64>();
    Ok(LineFit { slope, intercept, residual_rms: (ss / nf).sqrt(), n_used: n })
}
