//! Regression error metrics and the LoS/NLoS-stratified evaluation report.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Domain("metrics need at least one sample".into()));
    }
    if y.len() != yhat.len() {
        return Err(Error::Domain(format!(
            "metrics need equal-length inputs ({} vs {})",
            y.len(),
            yhat.len()
        )));
    }
    if y.iter().chain(yhat.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("metrics inputs must be finite".into()));
    }
    Ok(())
}

/// Root-mean-square error.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// Mean absolute percentage error, in percent. Requires nonzero truths.
pub fn mape_pct(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.iter().any(|&v| v == 0.0) {
        return Err(Error::Domain("mape is undefined for zero true values".into()));
    }
    let s: f64 = y.iter().zip(yhat).map(|(a, b)| ((a - b) / a).abs()).sum();
    Ok(100.0 * s / y.len() as f64)
}

/// Mean squared logarithmic error with natural logs:
/// `mean((ln(1+y) - ln(1+yhat))^2)`. Requires values > -1.
pub fn msle(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.iter().chain(yhat.iter()).any(|&v| v <= -1.0) {
        return Err(Error::Domain("msle requires values greater than -1".into()));
    }
    let s: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, b)| {
            let d = a.ln_1p() - b.ln_1p();
            d * d
        })
        .sum();
    Ok(s / y.len() as f64)
}

/// Pearson correlation coefficient, clamped to `[-1, 1]` against rounding.
/// Errors when either sequence is constant or shorter than 2.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    if y.len() < 2 {
        return Err(Error::Domain("pearson needs at least 2 samples".into()));
    }
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mh = yhat.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vy = 0.0;
    let mut vh = 0.0;
    for (a, b) in y.iter().zip(yhat) {
        let da = a - my;
        let db = b - mh;
        cov += da * db;
        vy += da * da;
        vh += db * db;
    }
    if vy <= 0.0 || vh <= 0.0 {
        return Err(Error::Domain(
            "pearson is undefined for constant sequences".into(),
        ));
    }
    Ok((cov / (vy.sqrt() * vh.sqrt())).clamp(-1.0, 1.0))
}

/// Error summary of one stratum. `rho` is absent when correlation is
/// undefined there (fewer than two samples or a constant sequence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumMetrics {
    pub count: usize,
    pub rmse_db: f64,
    pub mape_pct: f64,
    pub msle: f64,
    pub rho: Option<f64>,
}

/// All four error measures over one pooled sample set, with `rho` absent
/// where correlation is undefined.
pub fn overall_metrics(y: &[f64], yhat: &[f64]) -> Result<StratumMetrics> {
    check_pair(y, yhat)?;
    Ok(StratumMetrics {
        count: y.len(),
        rmse_db: rmse(y, yhat)?,
        mape_pct: mape_pct(y, yhat)?,
        msle: msle(y, yhat)?,
        rho: pearson(y, yhat).ok(),
    })
}

fn stratum_metrics(y: &[f64], yhat: &[f64]) -> Result<StratumMetrics> {
    overall_metrics(y, yhat)
}

/// LoS/NLoS-stratified evaluation. The `total` row pools every sample;
/// strata with no samples are reported as absent rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub los: Option<StratumMetrics>,
    pub nlos: Option<StratumMetrics>,
    pub total: StratumMetrics,
}

/// Computes the stratified report from truths, predictions, and per-sample
/// LoS flags.
pub fn evaluate_stratified(y: &[f64], yhat: &[f64], los: &[bool]) -> Result<EvaluationReport> {
    check_pair(y, yhat)?;
    if los.len() != y.len() {
        return Err(Error::Domain(format!(
            "los flags length {} does not match {} samples",
            los.len(),
            y.len()
        )));
    }
    let pick = |want: bool| -> (Vec<f64>, Vec<f64>) {
        y.iter()
            .zip(yhat)
            .zip(los)
            .filter(|&(_, &l)| l == want)
            .map(|((a, b), _)| (*a, *b))
            .unzip()
    };
    let (ly, lh) = pick(true);
    let (ny, nh) = pick(false);
    let los_row = if ly.is_empty() {
        None
    } else {
        Some(stratum_metrics(&ly, &lh)?)
    };
    let nlos_row = if ny.is_empty() {
        None
    } else {
        Some(stratum_metrics(&ny, &nh)?)
    };
    Ok(EvaluationReport {
        los: los_row,
        nlos: nlos_row,
        total: stratum_metrics(y, yhat)?,
    })
}

impl EvaluationReport {
    fn rows(&self) -> Vec<(&'static str, &StratumMetrics)> {
        let mut rows = Vec::new();
        if let Some(r) = &self.los {
            rows.push(("LoS", r));
        }
        if let Some(r) = &self.nlos {
            rows.push(("NLoS", r));
        }
        rows.push(("Total", &self.total));
        rows
    }

    /// Fixed-width text table, one row per present stratum plus the pool.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<7} {:>8} {:>10} {:>10} {:>12} {:>8}\n",
            "stratum", "count", "rmse_db", "mape_pct", "msle", "rho"
        ));
        for (name, r) in self.rows() {
            let rho = match r.rho {
                Some(v) => format!("{v:.4}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<7} {:>8} {:>10.3} {:>10.3} {:>12.4e} {:>8}\n",
                name, r.count, r.rmse_db, r.mape_pct, r.msle, rho
            ));
        }
        out
    }

    /// CSV rendering with header `stratum,count,rmse_db,mape_pct,msle,rho`.
    /// Absent strata are omitted; an undefined rho leaves the field empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stratum,count,rmse_db,mape_pct,msle,rho\n");
        for (name, r) in self.rows() {
            let rho = r.rho.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                name, r.count, r.rmse_db, r.mape_pct, r.msle, rho
            ));
        }
        out
    }
}
