use super::layers::{
    energy_normalize_backward, energy_normalize_forward, relu_backward, relu_forward, softmax,
    Dense,
};
use super::matrix::Matrix;
use crate::error::{invalid, Result};
use crate::numerics::{sample_standard_normal, Rng};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Dense(Dense<T>),
    Relu,
    /// Rescales each sample to squared norm `energy`.
    EnergyNormalize { energy: T },
    Softmax,
}

/// Final layer appended by [`Network::mlp`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Head<T> {
    EnergyNormalize(T),
    Softmax,
}

/// Feedforward stack of layers. A trailing [`Layer::Softmax`] is applied by
/// [`Network::forward`] but skipped by [`Network::forward_trace`], which
/// hands logits to the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    input_dim: usize,
}

/// Per-layer inputs from a training forward pass.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    inputs: Vec<Matrix<T>>,
    pub output: Matrix<T>,
}

/// Parameter gradients in [`Network::params`] order (weight then bias per
/// dense layer), flattened.
pub type Gradients<T> = Vec<Vec<T>>;

impl<T: Real> Network<T> {
    /// Validates dimension chaining and head placement.
    pub fn new(input_dim: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        let mut dim = input_dim;
        let last = layers.len().saturating_sub(1);
        for (i, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Dense(d) => {
                    if d.inputs() != dim {
                        return Err(invalid(format!(
                            "layer {i}: dense expects {} inputs, previous layer gives {dim}",
                            d.inputs()
                        )));
                    }
                    dim = d.outputs();
                }
                Layer::Relu => {}
                Layer::EnergyNormalize { energy } => {
                    if i != last {
                        return Err(invalid("energy normalization must be the final layer"));
                    }
                    if !(*energy > T::zero()) {
                        return Err(invalid("normalization energy must be positive"));
                    }
                }
                Layer::Softmax => {
                    if i != last {
                        return Err(invalid("softmax must be the final layer"));
                    }
                }
            }
        }
        Ok(Self { layers, input_dim })
    }

    /// `input -> [Dense -> ReLU]* -> Dense -> head`, He-initialized.
    ///
    /// Dense layers feeding a ReLU draw weights from `N(0, 2 / fan_in)`, the
    /// output projection from `N(0, 1 / fan_in)`. Biases start at zero.
    pub fn mlp(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        head: Head<T>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(invalid("layer widths must be positive"));
        }
        let mut layers = Vec::new();
        let mut fan_in = input_dim;
        for &width in hidden {
            layers.push(Layer::Dense(init_dense(fan_in, width, 2.0, rng)));
            layers.push(Layer::Relu);
            fan_in = width;
        }
        layers.push(Layer::Dense(init_dense(fan_in, output_dim, 1.0, rng)));
        layers.push(match head {
            Head::EnergyNormalize(energy) => Layer::EnergyNormalize { energy },
            Head::Softmax => Layer::Softmax,
        });
        Self::new(input_dim, layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.outputs()),
                _ => None,
            })
            .unwrap_or(self.input_dim)
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(invalid(format!(
                "network expects {} features, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Inference pass through every layer.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        let mut a = x.clone();
        for layer in &self.layers {
            a = match layer {
                Layer::Dense(d) => d.forward(&a)?,
                Layer::Relu => relu_forward(&a),
                Layer::EnergyNormalize { energy } => energy_normalize_forward(&a, *energy)?,
                Layer::Softmax => softmax(&a),
            };
        }
        Ok(a)
    }

    fn trained_layers(&self) -> &[Layer<T>] {
        match self.layers.last() {
            Some(Layer::Softmax) => &self.layers[..self.layers.len() - 1],
            _ => &self.layers,
        }
    }

    /// Training pass that caches layer inputs. Stops before a trailing
    /// softmax, so `output` holds logits for a classifier.
    pub fn forward_trace(&self, x: &Matrix<T>) -> Result<Trace<T>> {
        self.check_input(x)?;
        let layers = self.trained_layers();
        let mut inputs = Vec::with_capacity(layers.len());
        let mut a = x.clone();
        for layer in layers {
            let next = match layer {
                Layer::Dense(d) => d.forward(&a)?,
                Layer::Relu => relu_forward(&a),
                Layer::EnergyNormalize { energy } => energy_normalize_forward(&a, *energy)?,
                Layer::Softmax => unreachable!("softmax is only ever final"),
            };
            inputs.push(a);
            a = next;
        }
        Ok(Trace { inputs, output: a })
    }

    /// Backpropagates `d_output` (gradient w.r.t. `trace.output`). Returns
    /// parameter gradients and the gradient w.r.t. the network input.
    pub fn backward(&self, trace: &Trace<T>, d_output: &Matrix<T>) -> Result<(Gradients<T>, Matrix<T>)> {
        if d_output.shape() != trace.output.shape() {
            return Err(invalid("upstream gradient shape does not match network output"));
        }
        let layers = self.trained_layers();
        let mut grads: Vec<Vec<T>> = Vec::new();
        let mut g = d_output.clone();
        for (layer, x) in layers.iter().zip(&trace.inputs).rev() {
            g = match layer {
                Layer::Dense(d) => {
                    let dg = d.backward(x, &g)?;
                    // pushed reversed; bias first so the final reverse yields weight, bias
                    grads.push(dg.bias);
                    grads.push(dg.weight.into_vec());
                    dg.input
                }
                Layer::Relu => relu_backward(x, &g)?,
                Layer::EnergyNormalize { energy } => energy_normalize_backward(x, *energy, &g)?,
                Layer::Softmax => unreachable!("softmax is only ever final"),
            };
        }
        grads.reverse();
        Ok((grads, g))
    }

    /// Parameter tensors, weight then bias for each dense layer.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::Dense(d) = layer {
                out.push(d.weight.as_slice());
                out.push(d.bias.as_slice());
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Dense(d) = layer {
                out.push(d.weight.as_mut_slice());
                out.push(d.bias.as_mut_slice());
            }
        }
        out
    }

    /// All parameters concatenated.
    pub fn flat_params(&self) -> Vec<T> {
        self.params().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(invalid("flat parameter length mismatch"));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }
}

fn init_dense<T: Real>(fan_in: usize, fan_out: usize, gain: f64, rng: &mut Rng) -> Dense<T> {
    let sd = T::of((gain / fan_in as f64).sqrt());
    let data = (0..fan_in * fan_out).map(|_| sd * sample_standard_normal::<T>(rng)).collect();
    Dense {
        weight: Matrix::from_vec(fan_out, fan_in, data).expect("sized by construction"),
        bias: vec![T::zero(); fan_out],
    }
}
