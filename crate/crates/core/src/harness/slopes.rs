//! Least-squares fits of `ln(regret)` against `ln(T)`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{HarnessError, ResultRow};

/// Regrets are floored here before taking logs.
pub const REGRET_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
    pub n_points: usize,
}

/// OLS on `(ln T, ln max(regret, 1e-9))`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::Fit(format!("need at least 2 points, got {}", points.len())));
    }
    if points.iter().any(|&(t, r)| !(t > 0.0 && t.is_finite()) || r.is_nan()) {
        return Err(HarnessError::Fit("horizons must be positive and regrets defined".into()));
    }
    let xs: Vec<f64> = points.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, r)| r.max(REGRET_FLOOR).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Fit("all horizons are identical".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
        n_points: points.len(),
    })
}

/// How runs are aggregated per horizon before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeMode {
    /// Mean regret over runs, then log.
    #[default]
    MeanThenLog,
    /// Mean of per-run log regrets.
    LogThenMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub pattern: String,
    pub alpha: f64,
    pub policy: String,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_points: usize,
}

/// One fit per `(pattern, alpha, policy)` over the expected-regret column.
/// Rows with non-finite regret are skipped; groups with fewer than two
/// distinct horizons are left out.
pub fn slope_reports(rows: &[ResultRow], mode: SlopeMode) -> Vec<SlopeRow> {
    let mut groups: BTreeMap<(String, u64, String), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.final_regret_expected.is_finite()) {
        groups
            .entry((r.pattern.clone(), r.alpha.to_bits(), r.policy.clone()))
            .or_default()
            .entry(r.horizon)
            .or_default()
            .push(r.final_regret_expected);
    }
    let mut out = Vec::new();
    for ((pattern, alpha_bits, policy), by_t) in groups {
        let points: Vec<(f64, f64)> = by_t
            .iter()
            .map(|(&t, regrets)| {
                let n = regrets.len() as f64;
                let value = match mode {
                    SlopeMode::MeanThenLog => regrets.iter().sum::<f64>() / n,
                    SlopeMode::LogThenMean => {
                        (regrets.iter().map(|r| r.max(REGRET_FLOOR).ln()).sum::<f64>() / n).exp()
                    }
                };
                (t as f64, value)
            })
            .collect();
        if let Ok(fit) = fit_loglog_slope(&points) {
            out.push(SlopeRow {
                pattern,
                alpha: f64::from_bits(alpha_bits),
                policy,
                slope: fit.slope,
                intercept: fit.intercept,
                residual: fit.residual,
                n_points: fit.n_points,
            });
        }
    }
    out
}

pub const SLOPES_HEADER: [&str; 7] = ["pattern", "alpha", "policy", "slope", "intercept", "residual", "n_points"];

pub fn write_slopes_csv<W: Write>(rows: &[SlopeRow], writer: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(SLOPES_HEADER)?;
    for r in rows {
        w.write_record([
            r.pattern.clone(),
            r.alpha.to_string(),
            r.policy.clone(),
            r.slope.to_string(),
            r.intercept.to_string(),
            r.residual.to_string(),
            r.n_points.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1000.0, 2000.0, 5000.0, 13000.0]
            .iter()
            .map(|&t: &f64| (t, 3.0 * t.powf(0.75)))
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope - 0.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn two_points_and_flat_regret() {
        let fit = fit_loglog_slope(&[(100.0, 10.0), (400.0, 40.0)]).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        let fit = fit_loglog_slope(&[(100.0, 7.0), (200.0, 7.0), (300.0, 7.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_loglog_slope(&[(100.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(100.0, 1.0), (100.0, 2.0)]).is_err());
        // zero regret is floored rather than rejected
        assert!(fit_loglog_slope(&[(100.0, 0.0), (200.0, 1.0)]).unwrap().slope.is_finite());
    }
}
