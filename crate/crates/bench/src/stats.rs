use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least 2 samples, got {0}")]
    InsufficientData(usize),
    #[error("sample {0} is not finite")]
    NotFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stddev: f64,
    /// Half-width of the two-sided 95% Student-t interval for the mean.
    pub ci95_half_width: f64,
}

/// Two-sided 97.5% quantile of Student's t with `df` degrees of freedom.
pub fn t975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975)
}

pub fn stats(samples: &[f64]) -> Result<Summary, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(n));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(StatsError::NotFinite(i));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let stddev = (ss / (n - 1) as f64).sqrt();
    let ci95_half_width = t975(n - 1) * stddev / (n as f64).sqrt();
    Ok(Summary {
        n,
        mean,
        stddev,
        ci95_half_width,
    })
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} mean={} stddev={} ci95=±{}",
            self.n, self.mean, self.stddev, self.ci95_half_width
        )
    }
}
