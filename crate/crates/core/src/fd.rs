//! Central finite differences, used as an independent gradient oracle in
//! tests and verification commands.

use alloc::vec::Vec;

/// Central-difference gradient of `f` at `point` with step `eps`.
pub fn central_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, point: &[f64], eps: f64) -> Vec<f64> {
    let mut grads = Vec::with_capacity(point.len());
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + eps;
        let plus = f(&probe);
        probe[i] = point[i] - eps;
        let minus = f(&probe);
        probe[i] = point[i];
        grads.push((plus - minus) / (2.0 * eps));
    }
    grads
}

/// Largest relative disagreement between two gradients, with an absolute
/// floor so that near-zero coordinates compare absolutely.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
