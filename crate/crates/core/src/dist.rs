//! Elementary samplers and densities used by the Gibbs steps.

use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use crate::error::{invalid, Result};
use crate::rng::RngHandle;
use crate::types::HistogramForecast;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `mean + sd * Z`; `sd == 0` returns `mean` exactly.
pub fn sample_normal(mean: f64, sd: f64, rng: &mut RngHandle) -> Result<f64> {
    if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
        return Err(invalid(format!("normal(mean={mean}, sd={sd})")));
    }
    if sd == 0.0 {
        return Ok(mean);
    }
    Ok(mean + sd * std_normal(rng))
}

#[inline]
pub fn std_normal(rng: &mut RngHandle) -> f64 {
    StandardNormal.sample(rng)
}

/// Gamma with shape/rate parameterization.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(invalid(format!("gamma(shape={shape}, rate={rate})")));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| invalid(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Draw from the density proportional to `x^(-shape-1) exp(-scale/x)`.
pub fn sample_inverse_gamma(shape: f64, scale: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!(
            "inverse gamma(shape={shape}, scale={scale})"
        )));
    }
    let g = Gamma::new(shape, 1.0).map_err(|e| invalid(e.to_string()))?;
    loop {
        let x = g.sample(rng);
        if x > 0.0 {
            return Ok(scale / x);
        }
    }
}

pub fn sample_half_cauchy(scale: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("half-Cauchy(scale={scale})")));
    }
    // |tan(pi (u - 1/2))| is |Cauchy|; equivalently tan(pi u / 2) for u in (0,1).
    let u = rng.uniform_open();
    Ok(scale * (std::f64::consts::FRAC_PI_2 * u).tan())
}

pub fn sample_beta(a: f64, b: f64, rng: &mut RngHandle) -> Result<f64> {
    let d = Beta::new(a, b).map_err(|e| invalid(e.to_string()))?;
    Ok(d.sample(rng))
}

pub fn sample_uniform(lo: f64, hi: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(invalid(format!("uniform({lo}, {hi})")));
    }
    Ok(lo + (hi - lo) * rng.uniform())
}

/// Index drawn with probability proportional to `weights`.
pub fn sample_categorical(weights: &[f64], rng: &mut RngHandle) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite())
    {
        return Err(invalid("categorical weights must be nonnegative with positive sum"));
    }
    Ok(categorical_unchecked(weights, total, rng))
}

pub(crate) fn categorical_unchecked(weights: &[f64], total: f64, rng: &mut RngHandle) -> usize {
    let mut u = rng.uniform() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    // rounding at the top end; return the last positive-mass index
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Bin picked by mass, value uniform inside the bin.
pub fn draw_from_histogram(h: &HistogramForecast, rng: &mut RngHandle) -> f64 {
    let k = categorical_unchecked(h.probabilities(), 1.0, rng);
    let (lo, hi) = (h.bin_edges()[k], h.bin_edges()[k + 1]);
    lo + (hi - lo) * rng.uniform()
}

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * d * d / var
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of `normal_cdf`, polished with one Newton step against it.
pub fn normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let dens = (-0.5 * x * x - LN_SQRT_2PI).exp();
    if dens > 0.0 {
        x - (normal_cdf(x) - p) / dens
    } else {
        x
    }
}

/// Log density of Beta(a, b) at `x` in (0, 1), up to the normalizing constant.
#[inline]
pub(crate) fn beta_ln_kernel(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}
