//! Structural similarity with the standard 11x11 Gaussian window.

use shdd_synth::RgbBuffer;

use crate::error::MetricsError;
use crate::psnr::check_same_shape;
use crate::Result;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DATA_RANGE: f64 = 1.0;

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
fn window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Valid-mode separable filtering: output is (w-10) x (h-10).
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * src[y * w + x + k];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * horiz[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Mean SSIM over valid windows and the three channels. Symmetric in its
/// arguments; images must be at least 11px on each side.
pub fn ssim(a: &RgbBuffer, b: &RgbBuffer) -> Result<f64> {
    check_same_shape(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::InvalidInput(format!(
            "image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let taps = window();
    let c1 = (K1 * DATA_RANGE) * (K1 * DATA_RANGE);
    let c2 = (K2 * DATA_RANGE) * (K2 * DATA_RANGE);

    let mut channel_means = 0.0;
    for c in 0..3 {
        let pa = a.plane(c);
        let pb = b.plane(c);
        let n = pa.len();
        let mut aa = vec![0.0; n];
        let mut bb = vec![0.0; n];
        let mut ab = vec![0.0; n];
        for i in 0..n {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        let mu_a = filter_valid(pa, w, h, &taps);
        let mu_b = filter_valid(pb, w, h, &taps);
        let m_aa = filter_valid(&aa, w, h, &taps);
        let m_bb = filter_valid(&bb, w, h, &taps);
        let m_ab = filter_valid(&ab, w, h, &taps);

        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let var_a = m_aa[i] - mu_a[i] * mu_a[i];
            let var_b = m_bb[i] - mu_b[i] * mu_b[i];
            let cov = m_ab[i] - mu_a[i] * mu_b[i];
            let num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
            let den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
            sum += num / den;
        }
        channel_means += sum / mu_a.len() as f64;
    }
    Ok(channel_means / 3.0)
}
