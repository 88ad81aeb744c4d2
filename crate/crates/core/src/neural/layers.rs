//! Batched layer kernels. Inputs are `batch x features` matrices.

use super::matrix::{axpy, dot, Matrix};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Norm below which [`energy_normalize_forward`] refuses to scale.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Affine map `y = W x + b` with `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrad<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
    pub input: Matrix<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(invalid(format!(
                "bias length {} does not match {} outputs",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut y = x.matmul_transposed(&self.weight)?;
        for r in 0..y.rows() {
            for (v, &b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Exact gradients given the cached input `x` and upstream `dy`.
    pub fn backward(&self, x: &Matrix<T>, dy: &Matrix<T>) -> Result<DenseGrad<T>> {
        if x.cols() != self.inputs() || dy.cols() != self.outputs() || x.rows() != dy.rows() {
            return Err(invalid(format!(
                "dense backward shapes: x {:?}, dy {:?}, W {:?}",
                x.shape(),
                dy.shape(),
                self.weight.shape()
            )));
        }
        let mut dw = Matrix::zeros(self.outputs(), self.inputs());
        let mut db = vec![T::zero(); self.outputs()];
        let mut dx = Matrix::zeros(x.rows(), self.inputs());
        for b in 0..x.rows() {
            let xb = x.row(b);
            let dyb = dy.row(b);
            for (o, &g) in dyb.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                db[o] += g;
                axpy(g, xb, dw.row_mut(o));
                axpy(g, self.weight.row(o), dx.row_mut(b));
            }
        }
        Ok(DenseGrad { weight: dw, bias: db, input: dx })
    }
}

pub fn relu_forward<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient gated by `x > 0`; the subgradient at 0 is 0.
pub fn relu_backward<T: Real>(x: &Matrix<T>, dy: &Matrix<T>) -> Result<Matrix<T>> {
    if x.shape() != dy.shape() {
        return Err(invalid("relu backward shape mismatch"));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

fn row_norm<T: Real>(z: &[T]) -> Result<T> {
    let norm = dot(z, z).sqrt();
    if !(norm.as_f64() >= DEGENERATE_NORM) {
        return Err(Error::NumericDegeneracy { norm: norm.as_f64(), threshold: DEGENERATE_NORM });
    }
    Ok(norm)
}

/// Scales each row to squared norm `energy`: `c = sqrt(energy) z / |z|`.
pub fn energy_normalize_forward<T: Real>(z: &Matrix<T>, energy: T) -> Result<Matrix<T>> {
    let scale = energy.sqrt();
    let mut c = z.clone();
    for r in 0..z.rows() {
        let k = scale / row_norm(z.row(r))?;
        c.row_mut(r).iter_mut().for_each(|v| *v *= k);
    }
    Ok(c)
}

/// Applies the Jacobian `(sqrt(energy) / |z|) (I - z z^T / |z|^2)` row-wise.
pub fn energy_normalize_backward<T: Real>(
    z: &Matrix<T>,
    energy: T,
    dc: &Matrix<T>,
) -> Result<Matrix<T>> {
    if z.shape() != dc.shape() {
        return Err(invalid("energy normalize backward shape mismatch"));
    }
    let scale = energy.sqrt();
    let mut dz = dc.clone();
    for r in 0..z.rows() {
        let zr = z.row(r);
        let norm = row_norm(zr)?;
        let proj = dot(zr, dc.row(r)) / (norm * norm);
        let k = scale / norm;
        for (d, &zi) in dz.row_mut(r).iter_mut().zip(zr) {
            *d = k * (*d - proj * zi);
        }
    }
    Ok(dz)
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax<T: Real>(logits: &Matrix<T>) -> Matrix<T> {
    let mut p = logits.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    p
}

pub struct SoftmaxCrossEntropy<T> {
    /// Mean of `-log p_true` over the batch.
    pub loss: T,
    pub probabilities: Matrix<T>,
    /// Gradient of the mean loss: `(p - onehot) / batch`.
    pub dlogits: Matrix<T>,
}

pub fn softmax_cross_entropy<T: Real>(
    logits: &Matrix<T>,
    labels: &[usize],
) -> Result<SoftmaxCrossEntropy<T>> {
    if labels.len() != logits.rows() {
        return Err(invalid(format!(
            "{} labels for a batch of {}",
            labels.len(),
            logits.rows()
        )));
    }
    let probabilities = softmax(logits);
    let batch = T::of_usize(labels.len().max(1));
    let mut dlogits = probabilities.clone();
    let mut loss = T::zero();
    for (r, &label) in labels.iter().enumerate() {
        if label >= logits.cols() {
            return Err(invalid(format!("label {label} out of range 0..{}", logits.cols())));
        }
        // log-sum-exp form keeps the loss finite when p_true underflows
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss += lse - row[label];
        let d = dlogits.row_mut(r);
        d[label] -= T::one();
        d.iter_mut().for_each(|v| *v /= batch);
    }
    Ok(SoftmaxCrossEntropy { loss: loss / batch, probabilities, dlogits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{central_difference, relative_error};
    use crate::numerics::{sample_standard_normal, Rng};

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix<f64> {
        let data = (0..rows * cols).map(|_| sample_standard_normal(rng)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    /// Scalar probe `sum(G .* y)` whose gradient w.r.t. `y` is `G`.
    fn probe(y: &Matrix<f64>, g: &Matrix<f64>) -> f64 {
        dot(y.as_slice(), g.as_slice())
    }

    #[test]
    fn dense_identity() {
        let layer = Dense::new(Matrix::identity(3), vec![0.0; 3]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5]]).unwrap();
        assert_eq!(layer.forward(&x).unwrap(), x);
        assert!(Dense::new(Matrix::<f64>::identity(3), vec![0.0; 2]).is_err());
        assert!(layer.forward(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = Rng::new(1, 0);
        let layer = Dense::new(random(5, 3, &mut rng), random(1, 5, &mut rng).into_vec()).unwrap();
        let x = random(4, 3, &mut rng);
        let g = random(4, 5, &mut rng);
        let grad = layer.backward(&x, &g).unwrap();

        let numeric_w = central_difference(layer.weight.as_slice(), 1e-5, |w| {
            let l = Dense::new(Matrix::from_vec(5, 3, w.to_vec()).unwrap(), layer.bias.clone())
                .unwrap();
            probe(&l.forward(&x).unwrap(), &g)
        });
        assert!(relative_error(grad.weight.as_slice(), &numeric_w) < 1e-6);

        let numeric_x = central_difference(x.as_slice(), 1e-5, |xs| {
            probe(&layer.forward(&Matrix::from_vec(4, 3, xs.to_vec()).unwrap()).unwrap(), &g)
        });
        assert!(relative_error(grad.input.as_slice(), &numeric_x) < 1e-6);

        // bias gradient is the column sum of dy
        for o in 0..5 {
            let s: f64 = (0..4).map(|b| g[(b, o)]).sum();
            assert!((grad.bias[o] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_values_and_gradient() {
        let x = Matrix::from_rows(&[vec![-1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(relu_forward(&x).as_slice(), &[0.0, 0.0, 2.0]);
        let dy = Matrix::from_rows(&[vec![5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(relu_backward(&x, &dy).unwrap().as_slice(), &[0.0, 0.0, 5.0]);

        let mut rng = Rng::new(2, 0);
        let x = random(3, 4, &mut rng).map(|v| if v.abs() < 0.1 { v + 0.5 } else { v });
        let g = random(3, 4, &mut rng);
        let analytic = relu_backward(&x, &g).unwrap();
        let numeric = central_difference(x.as_slice(), 1e-6, |xs| {
            probe(&relu_forward(&Matrix::from_vec(3, 4, xs.to_vec()).unwrap()), &g)
        });
        assert!(relative_error(analytic.as_slice(), &numeric) < 1e-6);
    }

    #[test]
    fn energy_normalize_scales_to_energy() {
        let z = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let c = energy_normalize_forward(&z, 2.0).unwrap();
        assert!((c[(0, 0)] - 0.6 * 2f64.sqrt()).abs() < 1e-15);
        assert!((c[(0, 1)] - 0.8 * 2f64.sqrt()).abs() < 1e-15);

        let mut rng = Rng::new(3, 0);
        let z = random(1000, 5, &mut rng);
        let c = energy_normalize_forward(&z, 5.0).unwrap();
        for row in c.row_iter() {
            assert!((dot(row, row) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_normalize_rejects_zero() {
        let z = Matrix::from_rows(&[vec![0.0, 1e-14]]).unwrap();
        assert!(matches!(
            energy_normalize_forward(&z, 2.0),
            Err(Error::NumericDegeneracy { .. })
        ));
    }

    #[test]
    fn energy_normalize_jacobian() {
        let mut rng = Rng::new(4, 0);
        let z = random(3, 4, &mut rng);
        let g = random(3, 4, &mut rng);
        let analytic = energy_normalize_backward(&z, 4.0, &g).unwrap();
        let numeric = central_difference(z.as_slice(), 1e-5, |zs| {
            let zm = Matrix::from_vec(3, 4, zs.to_vec()).unwrap();
            probe(&energy_normalize_forward(&zm, 4.0).unwrap(), &g)
        });
        assert!(relative_error(analytic.as_slice(), &numeric) < 1e-6);
    }

    #[test]
    fn softmax_cross_entropy_values() {
        let logits = Matrix::from_rows(&[vec![0.7; 4]]).unwrap();
        let out = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!((out.loss - 4f64.ln()).abs() < 1e-12);

        let mut rng = Rng::new(5, 0);
        let logits = random(6, 5, &mut rng).map(|v| 30.0 * v);
        let p = softmax(&logits);
        for row in p.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(softmax_cross_entropy(&logits, &[0; 5]).is_err());
        assert!(softmax_cross_entropy(&logits, &[5; 6]).is_err());
    }

    #[test]
    fn softmax_cross_entropy_gradient() {
        let mut rng = Rng::new(6, 0);
        let logits = random(4, 3, &mut rng);
        let labels = [0, 2, 1, 2];
        let out = softmax_cross_entropy(&logits, &labels).unwrap();
        let numeric = central_difference(logits.as_slice(), 1e-5, |ls| {
            softmax_cross_entropy(&Matrix::from_vec(4, 3, ls.to_vec()).unwrap(), &labels)
                .unwrap()
                .loss
        });
        assert!(relative_error(out.dlogits.as_slice(), &numeric) < 1e-6);
    }
}
