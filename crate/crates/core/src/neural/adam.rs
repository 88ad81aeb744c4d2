use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam moments for a list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = usize>) -> Self {
        let (first, second) = shapes
            .into_iter()
            .map(|len| (vec![T::zero(); len], vec![T::zero(); len]))
            .unzip();
        Self { config, step: 0, first, second }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of every tensor in `params` with the matching `grads`.
    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &[Vec<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(invalid(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(invalid("adam tensor shape mismatch"));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::one();
        let correction1 = one - T::of(c.beta1.powi(t));
        let correction2 = one - T::of(c.beta2.powi(t));
        let lr = T::of(c.lr);
        let eps = T::of(c.eps);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0f64, -2.0];
        let mut adam = AdamState::new(AdamConfig::default(), [2]);
        adam.step(vec![&mut p], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![0.0f64, 0.0, 0.0];
        let mut adam = AdamState::new(AdamConfig::default(), [3]);
        adam.step(vec![&mut p], &[vec![0.5, -3.0, 1e-2]]).unwrap();
        // m_hat = g, v_hat = g^2 after one corrected step
        for (pi, g) in p.iter().zip([0.5f64, -3.0, 1e-2]) {
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-12, "{pi} vs {expected}");
        }
    }

    #[test]
    fn descends_quadratic_bowl() {
        let config = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut x = vec![5.0f64, -5.0];
        let mut adam = AdamState::new(config, [2]);
        for _ in 0..500 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            adam.step(vec![&mut x], &[g]).unwrap();
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 0.1, "{norm}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![0.0f64; 2];
        let mut adam = AdamState::new(AdamConfig::default(), [3]);
        assert!(adam.step(vec![&mut p], &[vec![0.0; 2]]).is_err());
    }
}
