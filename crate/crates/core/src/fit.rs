//! Regression helpers for decay sweeps.

use serde::Serialize;

/// The τ sweep used by the decay checks.
pub const DECAY_SWEEP: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];

/// Least-squares slope of log y against log x. Zero or non-finite y gives NaN.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 || y.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySeries {
    pub name: String,
    pub tau: Vec<f64>,
    pub value: Vec<f64>,
    pub slope: f64,
}

impl DecaySeries {
    pub fn new(name: impl Into<String>, tau: Vec<f64>, value: Vec<f64>) -> Self {
        let slope = loglog_slope(&tau, &value);
        Self {
            name: name.into(),
            tau,
            value,
            slope,
        }
    }

    /// Plot data: fitted slope in a comment header, then (log τ, log value) columns.
    pub fn plot_data(&self) -> String {
        let mut s = format!("# {} slope={:.6}\nlog_tau,log_value\n", self.name, self.slope);
        for (t, v) in self.tau.iter().zip(&self.value) {
            s.push_str(&format!("{:.12e},{:.12e}\n", t.ln(), v.ln()));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_slope() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y) + 1.5).abs() < 1e-12);
        assert!(loglog_slope(&x, &[1.0, 0.0, 1.0, 1.0]).is_nan());
    }
}
