//! Small-sample summaries: means, Student-t intervals and batch-means errors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    /// Half-width of the two-sided 95% t-interval; infinite for fewer than two samples.
    pub ci95: f64,
    pub n: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single sample.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Upper 97.5% quantile of Student's t with `df` degrees of freedom.
pub fn t975(df: usize) -> f64 {
    if df == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975)
}

pub fn ci95_halfwidth(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::INFINITY;
    }
    t975(xs.len() - 1) * sample_sd(xs) / (xs.len() as f64).sqrt()
}

pub fn summarize(xs: &[f64]) -> Summary {
    Summary {
        mean: mean(xs),
        sd: sample_sd(xs),
        ci95: ci95_halfwidth(xs),
        n: xs.len(),
    }
}

/// Standard error of the mean of a correlated series by non-overlapping batch
/// means. Trailing samples that do not fill a batch are dropped from the error
/// estimate only.
pub fn batch_means_stderr(series: &[f64], batches: usize) -> f64 {
    let batches = batches.min(series.len());
    if batches < 2 {
        return 0.0;
    }
    let len = series.len() / batches;
    let means: Vec<f64> = series
        .chunks_exact(len)
        .take(batches)
        .map(mean)
        .collect();
    sample_sd(&means) / (batches as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((sample_sd(&xs) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(sample_sd(&[3.0]), 0.0);
        assert!(mean(&[]).is_nan());
    }

    #[test]
    fn t_quantiles_match_tables() {
        // standard two-sided 95% table values
        assert!((t975(1) - 12.706).abs() < 1e-3);
        assert!((t975(9) - 2.262).abs() < 1e-3);
        assert!((t975(1000) - 1.962).abs() < 1e-3);
    }

    #[test]
    fn single_sample_interval_is_unbounded() {
        assert!(ci95_halfwidth(&[1.0]).is_infinite());
    }

    #[test]
    fn batch_means_of_constant_series_is_zero() {
        assert_eq!(batch_means_stderr(&[2.0; 100], 10), 0.0);
        let alt: Vec<f64> = (0..100).map(|i| (i / 10) as f64).collect();
        // batch means 0..9, sd = sqrt(55/6)
        let want = (55.0f64 / 6.0).sqrt() / 10f64.sqrt();
        assert!((batch_means_stderr(&alt, 10) - want).abs() < 1e-12);
    }
}
