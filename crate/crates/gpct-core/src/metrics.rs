//! Figures of merit for comparing reconstructions against ground truth.

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

/// Relative error and PSNR of a reconstruction, with the peak-value
/// convention that was used recorded alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `100 · ‖f_true − f_rec‖₂ / ‖f_true‖₂`, in percent.
    pub relative_error: f64,
    /// `10 log₁₀(peakval² / MSE)`, in decibels; infinite when MSE = 0.
    pub psnr: f64,
    pub peakval: f64,
    /// How `peakval` was chosen (`"max(f_true)"` or `"given"`).
    pub peakval_convention: &'static str,
}

fn check_shapes(f_true: &ImageGrid, f_rec: &ImageGrid) -> Result<()> {
    if f_true.data.dim() != f_rec.data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "image shapes differ: {:?} vs {:?}",
            f_true.data.dim(),
            f_rec.data.dim()
        )));
    }
    Ok(())
}

/// Relative L₂ error in percent over pixels.
pub fn relative_error(f_true: &ImageGrid, f_rec: &ImageGrid) -> Result<f64> {
    check_shapes(f_true, f_rec)?;
    let norm_true: f64 = f_true.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_true == 0.0 {
        return Err(Error::invalid("relative error undefined for an all-zero ground truth"));
    }
    let diff: f64 = f_true
        .data
        .iter()
        .zip(f_rec.data.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * diff / norm_true)
}

/// Peak signal-to-noise ratio in decibels. `MSE = 0` maps to `+∞`.
pub fn psnr(f_true: &ImageGrid, f_rec: &ImageGrid, peakval: f64) -> Result<f64> {
    check_shapes(f_true, f_rec)?;
    if !(peakval > 0.0) {
        return Err(Error::invalid(format!("peakval must be positive, got {peakval}")));
    }
    let n = (f_true.n1 * f_true.n2) as f64;
    let mse: f64 = f_true
        .data
        .iter()
        .zip(f_rec.data.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peakval * peakval / mse).log10())
}

/// Both figures of merit. Without an explicit peak value, `max(f_true)` is
/// used and recorded as the convention.
pub fn metrics(f_true: &ImageGrid, f_rec: &ImageGrid, peakval: Option<f64>) -> Result<Metrics> {
    let (peak, convention) = match peakval {
        Some(p) => (p, "given"),
        None => (
            f_true.data.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "max(f_true)",
        ),
    };
    Ok(Metrics {
        relative_error: relative_error(f_true, f_rec)?,
        psnr: psnr(f_true, f_rec, peak)?,
        peakval: peak,
        peakval_convention: convention,
    })
}
