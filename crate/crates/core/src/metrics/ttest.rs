use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Result of a one-sample t-test against `mu0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// `P(T_df > t)`: the alternative is "mean greater than mu0".
    pub p_one_sided: f64,
}

pub fn one_sample_t_test(values: &[f64], mu0: f64) -> Result<TTest> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("t-test needs 2 values, got {n}")));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if !(var > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let t = (mean - mu0) / (var.sqrt() / nf.sqrt());
    let df = nf - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p = dist.sf(t).clamp(0.0, 1.0);
    Ok(TTest { t, df, p_one_sided: p })
}
