//! Peak signal-to-noise ratio over [0,1] RGB images.

use shdd_synth::RgbBuffer;

use crate::error::MetricsError;
use crate::Result;

/// Reported for identical images, and the ceiling for everything else,
/// keeping reports finite and sortable.
pub const PSNR_CAP_DB: f64 = 100.0;

pub(crate) fn check_same_shape(a: &RgbBuffer, b: &RgbBuffer) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(MetricsError::InvalidInput(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared error over all three channels.
pub fn mse(a: &RgbBuffer, b: &RgbBuffer) -> Result<f64> {
    check_same_shape(a, b)?;
    let n = (3 * a.width() * a.height()) as f64;
    let mut sum = 0.0;
    for c in 0..3 {
        for (x, y) in a.plane(c).iter().zip(b.plane(c)) {
            let d = x - y;
            sum += d * d;
        }
    }
    Ok(sum / n)
}

/// 10*log10(1/MSE) in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &RgbBuffer, b: &RgbBuffer) -> Result<f64> {
    let m = mse(a, b)?;
    if m <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB))
}
