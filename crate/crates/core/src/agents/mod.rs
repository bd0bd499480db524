//! Producers of agent forecast archives: the threshold-AR toy example, the
//! rolling-window ADL regression agents with a synthetic data generator
//! for them, and Gaussian imputation of missing survey histograms.

mod adl;
mod synthetic;
mod toy;

pub use adl::{
    adl_gibbs_step, fit_adl_and_forecast, window_data, AdlForecast, AdlGibbsState, AdlModelSpec, AdlPriors,
};
pub use synthetic::{adl_archive_row, build_adl_archive, simulate_adl_data, AdlDgpConfig};
pub use toy::{simulate_toy, simulate_toy_series, ToyDgpConfig};

use crate::dist::normal_cdf;
use crate::error::{invalid, Result};
use crate::types::HistogramForecast;

/// Histogram of `N(mean, sd²)` over `bin_edges`, renormalized to the mass
/// the grid covers.
pub fn impute_missing_histogram(mean: f64, sd: f64, bin_edges: &[f64]) -> Result<HistogramForecast> {
    if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(invalid(format!("imputation needs a finite mean and positive sd, got ({mean}, {sd})")));
    }
    if bin_edges.len() < 2 {
        return Err(invalid("bin grid needs at least two edges"));
    }
    let cdf: Vec<f64> = bin_edges.iter().map(|e| normal_cdf((e - mean) / sd)).collect();
    let mut probs: Vec<f64> = cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(invalid("bin grid carries no Gaussian mass"));
    }
    for p in &mut probs {
        *p /= total;
    }
    HistogramForecast::new(bin_edges.to_vec(), probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_grid_symmetric_probs() {
        let h = impute_missing_histogram(1.0, 0.7, &[-2.0, 0.0, 0.5, 1.5, 2.0, 4.0]).unwrap();
        let p = h.probabilities();
        assert!((p[0] - p[4]).abs() < 1e-14 && (p[1] - p[3]).abs() < 1e-14);
    }

    #[test]
    fn sums_to_one() {
        let h = impute_missing_histogram(0.3, 2.0, &[-1.0, 0.0, 0.1, 7.0]).unwrap();
        assert!((h.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn one_sigma_mass() {
        let h = impute_missing_histogram(0.0, 1.0, &[-8.0, -1.0, 1.0, 8.0]).unwrap();
        assert!((h.probabilities()[1] - 0.682_689_492_137_086).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_sd() {
        assert!(impute_missing_histogram(0.0, 0.0, &[0.0, 1.0]).is_err());
    }
}
