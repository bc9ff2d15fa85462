//! Model scoring: complexity, coefficient error, derivative-space R² and
//! MSE, and solver wall time.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Result, SindyError};
use crate::regression::CoefficientMatrix;

/// Scores of one fitted model on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dataset_id: String,
    pub method: String,
    pub gamma: usize,
    /// `None` when no reference model is available.
    pub cei: Option<f64>,
    pub train_r2: f64,
    pub train_mse: f64,
    pub test_r2: Option<f64>,
    pub test_mse: Option<f64>,
    /// `None` when the model was not fitted in this run.
    pub train_time_s: Option<f64>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "dataset_id,method,gamma,cei,train_r2,train_mse,test_r2,test_mse,train_time_s";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), crate::trajectory::fmt_f64);
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset_id,
            self.method,
            self.gamma,
            opt(self.cei),
            crate::trajectory::fmt_f64(self.train_r2),
            crate::trajectory::fmt_f64(self.train_mse),
            opt(self.test_r2),
            opt(self.test_mse),
            opt(self.train_time_s),
        )
    }
}

/// Number of coefficients with magnitude above `tol`.
pub fn complexity(model: &CoefficientMatrix, tol: f64) -> usize {
    model.xi.iter().filter(|v| v.abs() > tol).count()
}

/// Mean absolute coefficient difference over all `K·C` entries.
pub fn cei(predicted: &CoefficientMatrix, truth: &CoefficientMatrix) -> Result<f64> {
    if predicted.xi.shape() != truth.xi.shape()
        || predicted.term_names != truth.term_names
        || predicted.var_names != truth.var_names
    {
        return Err(SindyError::Dimension(
            "CEI needs coefficient matrices over the same terms and variables".into(),
        ));
    }
    Ok((&predicted.xi - &truth.xi).abs().sum() / predicted.xi.len() as f64)
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() || a.is_empty() {
        return Err(SindyError::Dimension(format!(
            "predicted {:?} and observed {:?} must have the same nonempty shape",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Pooled coefficient of determination over all variables and samples.
/// The total sum of squares is taken about each variable's own time mean.
pub fn r_squared(predicted: &DMatrix<f64>, observed: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(predicted, observed)?;
    let ss_res = (predicted - observed).norm_squared();
    let mut ss_tot = 0.0;
    for col in observed.column_iter() {
        let mean = col.mean();
        ss_tot += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    if ss_tot == 0.0 {
        return Err(SindyError::UndefinedRSquared);
    }
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mse(predicted: &DMatrix<f64>, observed: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(predicted, observed)?;
    Ok((predicted - observed).norm_squared() / predicted.len() as f64)
}

/// Runs `fit` and measures its wall time on a monotonic clock.
pub fn timed_fit<T, F: FnOnce() -> T>(fit: F) -> (T, f64) {
    let start = Instant::now();
    let out = fit();
    (out, start.elapsed().as_secs_f64())
}
