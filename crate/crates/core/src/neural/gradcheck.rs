//! Central finite differences for checking analytic gradients.

use crate::scalar::Real;

/// Default step for 64-bit checks.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Numerical gradient of `f` at `x` by `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference<T: Real>(x: &[T], step: f64, mut f: impl FnMut(&[T]) -> T) -> Vec<T> {
    let h = T::of(step);
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (h + h)
        })
        .collect()
}

/// `|a - b| / (|a| + |b|)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error<T: Real>(analytic: &[T], numeric: &[T]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a.as_f64() - b.as_f64()));
    let scale = norm(&mut analytic.iter().map(|a| a.as_f64()))
        + norm(&mut numeric.iter().map(|b| b.as_f64()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic() {
        let g = central_difference(&[2.0f64, -1.0], DEFAULT_STEP, |x| x[0].powi(3) + 3.0 * x[1]);
        assert!(relative_error(&g, &[12.0, 3.0]) < 1e-9);
        assert_eq!(relative_error(&[0.0f64], &[0.0]), 0.0);
        assert!((relative_error(&[1.0f64], &[-1.0]) - 1.0).abs() < 1e-15);
    }
}
