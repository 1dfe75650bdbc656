use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Relative discrete errors `|u_h - u|_p / |u|_p` over all nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub inf: f64,
    pub l2: f64,
    pub l1: f64,
}

pub fn error_norms(u_h: &[f64], u_exact: &[f64]) -> Result<ErrorNorms, HarnessError> {
    if u_h.len() != u_exact.len() {
        return Err(HarnessError::LengthMismatch {
            expected: u_exact.len(),
            got: u_h.len(),
        });
    }
    let norms = |v: &mut dyn Iterator<Item = f64>| {
        v.fold((0.0f64, 0.0f64, 0.0f64), |(inf, l2, l1), x| {
            (inf.max(x.abs()), l2 + x * x, l1 + x.abs())
        })
    };
    let (ui, u2, u1) = norms(&mut u_exact.iter().copied());
    if ui == 0.0 {
        return Err(HarnessError::ZeroNorm);
    }
    let (ei, e2, e1) = norms(&mut u_h.iter().zip(u_exact).map(|(a, b)| a - b));
    Ok(ErrorNorms {
        inf: ei / ui,
        l2: e2.sqrt() / u2.sqrt(),
        l1: e1 / u1,
    })
}

/// Least-squares line through `(log10 N, log10 e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log10 residuals.
    pub residual: f64,
}

pub fn fit_loglog(ns: &[f64], errors: &[f64]) -> Result<LogLogFit, HarnessError> {
    if let Some(&bad) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(HarnessError::NonPositiveError(bad));
    }
    let mut distinct: Vec<f64> = ns.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 || ns.len() != errors.len() {
        return Err(HarnessError::TooFewPoints(distinct.len()));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.log10()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.log10()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(LogLogFit {
        slope,
        intercept,
        residual,
    })
}
