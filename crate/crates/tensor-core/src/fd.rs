//! Central-difference gradient checking.

/// Numerical gradient of `f` at `params` by central differences,
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` per coordinate. `f` must be
/// a pure function of the parameter vector.
pub fn finite_diff_grad<F>(mut f: F, params: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let hi = f(&probe);
        probe[i] = params[i] - eps;
        let lo = f(&probe);
        probe[i] = params[i];
        grad.push((hi - lo) / (2.0 * eps));
    }
    grad
}

/// Largest elementwise relative error between two gradient vectors,
/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps coordinates whose true
/// gradient is near zero from turning rounding noise into a huge ratio.
///
/// Panics if the slices differ in length.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(
        analytic.len(),
        numeric.len(),
        "gradient length mismatch: {} vs {}",
        analytic.len(),
        numeric.len()
    );
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
