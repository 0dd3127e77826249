use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{matvec_raw, DenseMatrix};
use super::tape::{Gradients, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative given the input `x` and the output `y = apply(x)`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "identity" => Activation::Identity,
            _ => return None,
        })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(format!("bias of length {} for {} outputs", bias.len(), weight.rows())));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric("non-finite bias".into()));
        }
        Ok(Self { weight, bias, activation })
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }
}

/// A stack of fully connected layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

/// Tape leaves for one registration of an [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpVars {
    layers: Vec<(Var, Var)>,
}

impl MlpVars {
    /// Appends the gradient in [`MlpParams::flatten`] order.
    pub fn gradient_into(&self, grads: &Gradients, out: &mut Vec<f64>) {
        for &(w, b) in &self.layers {
            grads.extend_into(w, out);
            grads.extend_into(b, out);
        }
    }
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::shape(format!(
                    "layer emits {} values but next layer expects {}",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases. `dims` has one more entry than `acts`.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], acts: &[Activation], rng: &mut R) -> Self {
        assert_eq!(dims.len(), acts.len() + 1, "dims/activations mismatch");
        let layers = dims
            .windows(2)
            .zip(acts)
            .map(|(d, &act)| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect();
                Layer {
                    weight: DenseMatrix::new(fan_out, fan_in, data).expect("finite init"),
                    bias: vec![0.0; fan_out],
                    activation: act,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data().len() + l.bias.len()).sum()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
    }

    /// Overwrites parameters from `flat`, returning the number consumed.
    pub fn assign(&mut self, flat: &[f64]) -> Result<usize> {
        if flat.len() < self.param_count() {
            return Err(Error::shape("flat parameter vector too short"));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weight.data().len();
            l.weight.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
            let m = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + m]);
            off += m;
        }
        Ok(off)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::shape(format!("MLP expects input of length {}, got {}", self.input_dim(), input.len())));
        }
        let mut h = input.to_vec();
        for l in &self.layers {
            let mut z = matvec_raw(l.weight.data(), l.outputs(), l.inputs(), &h);
            for (v, b) in z.iter_mut().zip(&l.bias) {
                *v = l.activation.apply(*v + b);
            }
            h = z;
        }
        Ok(h)
    }

    /// Registers every weight and bias as a tape leaf.
    pub fn register(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            layers: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.data().to_vec()), tape.leaf(l.bias.clone())))
                .collect(),
        }
    }

    /// Records a forward pass through previously registered leaves.
    pub fn record(&self, tape: &mut Tape, vars: &MlpVars, input: Var) -> Result<Var> {
        let mut h = input;
        for (l, &(w, b)) in self.layers.iter().zip(&vars.layers) {
            let z = tape.matvec(w, h, l.outputs(), l.inputs())?;
            let z = tape.add(z, b)?;
            h = match l.activation {
                Activation::Identity => z,
                act => tape.activation(z, act),
            };
        }
        Ok(h)
    }
}
