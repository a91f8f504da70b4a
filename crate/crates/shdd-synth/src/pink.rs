//! 1/f ("pink") noise fields via spectral shaping.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use tensor_core::Rng;

use crate::error::SynthError;
use crate::Result;

/// Signed frequency of DFT bin `k` in cycles per image.
fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn fft2(data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
}

/// White Gaussian field, spectrally reweighted so amplitude falls as 1/f
/// (power as 1/f²), DC removed, then normalized to mean 0 and standard
/// deviation 1. Row-major `w*h` samples.
pub fn pink_noise_field(w: usize, h: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if w < 8 || h < 8 {
        return Err(SynthError::invalid(
            "pink_noise_field",
            format!("field must be at least 8x8, got {w}x{h}"),
        ));
    }
    let mut data: Vec<Complex<f64>> = (0..w * h)
        .map(|_| Complex::new(rng.next_normal(), 0.0))
        .collect();
    fft2(&mut data, w, h, false);
    for ky in 0..h {
        for kx in 0..w {
            let f = (signed_freq(kx, w).powi(2) + signed_freq(ky, h).powi(2)).sqrt();
            let scale = if f == 0.0 { 0.0 } else { 1.0 / f };
            data[ky * w + kx] *= scale;
        }
    }
    fft2(&mut data, w, h, true);

    let n = (w * h) as f64;
    let mut field: Vec<f64> = data.iter().map(|c| c.re).collect();
    let mean = field.iter().sum::<f64>() / n;
    let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / var.sqrt();
    for v in &mut field {
        *v = (*v - mean) * inv_std;
    }
    Ok(field)
}

/// Least-squares slope of log10(radial mean power) against log10(f) for
/// integer radial bins with `f_lo <= f <= f_hi`. Pink fields measure close
/// to -2.
pub fn radial_power_slope(field: &[f64], w: usize, h: usize, f_lo: f64, f_hi: f64) -> f64 {
    let mut data: Vec<Complex<f64>> = field.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut data, w, h, false);

    let max_bin = (f_hi.ceil() as usize) + 1;
    let mut power = vec![0.0; max_bin + 1];
    let mut count = vec![0usize; max_bin + 1];
    for ky in 0..h {
        for kx in 0..w {
            let f = (signed_freq(kx, w).powi(2) + signed_freq(ky, h).powi(2)).sqrt();
            let bin = f.round() as usize;
            if f >= f_lo && f <= f_hi && bin <= max_bin {
                power[bin] += data[ky * w + kx].norm_sqr();
                count[bin] += 1;
            }
        }
    }

    let points: Vec<(f64, f64)> = power
        .iter()
        .zip(&count)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(bin, (&p, &c))| ((bin as f64).log10(), (p / c as f64).log10()))
        .collect();
    assert!(points.len() >= 2, "not enough spectral bins for a slope fit");

    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
