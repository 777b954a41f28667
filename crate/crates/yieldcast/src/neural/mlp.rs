//! Dense feed-forward network trained by backpropagation.

use crate::linalg::Mat;
use crate::rng::Rng64;

use super::{glorot_uniform, Loss, RmsProp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// out×in weight matrix.
    pub weights: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(n_in: usize, n_out: usize, activation: Activation, rng: &mut Rng64) -> Self {
        // Rectifier units start with a small positive bias so narrow layers
        // do not begin dead.
        let bias_init = match activation {
            Activation::Relu => 0.1,
            Activation::Linear => 0.0,
        };
        DenseLayer {
            weights: glorot_uniform(n_out, n_in, rng),
            bias: vec![bias_init; n_out],
            activation,
        }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pre: Vec<f64> = (0..self.bias.len())
            .map(|o| {
                self.bias[o]
                    + self
                        .weights
                        .row(o)
                        .iter()
                        .zip(x.iter())
                        .map(|(w, v)| w * v)
                        .sum::<f64>()
            })
            .collect();
        let post = match self.activation {
            Activation::Relu => pre.iter().map(|v| v.max(0.0)).collect(),
            Activation::Linear => pre.clone(),
        };
        (pre, post)
    }
}

/// Multilayer perceptron with a single linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

struct MlpGrads {
    weights: Vec<Mat>,
    bias: Vec<Vec<f64>>,
}

impl Mlp {
    /// Hidden widths in order, ReLU activations, linear scalar output.
    pub fn new(n_inputs: usize, hidden: &[usize], seed: u64) -> Self {
        Self::with_activation(n_inputs, hidden, Activation::Relu, seed)
    }

    pub fn with_activation(
        n_inputs: usize,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Self {
        let mut rng = Rng64::substream(seed, 0);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut n_in = n_inputs;
        for &width in hidden {
            layers.push(DenseLayer::new(n_in, width, activation, &mut rng));
            n_in = width;
        }
        layers.push(DenseLayer::new(n_in, 1, Activation::Linear, &mut rng));
        Mlp { layers }
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur).1;
        }
        cur[0]
    }

    pub fn predict(&self, inputs: &Mat) -> Vec<f64> {
        (0..inputs.rows())
            .map(|r| self.predict_one(inputs.row(r)))
            .collect()
    }

    fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            weights: self
                .layers
                .iter()
                .map(|l| Mat::zeros(l.weights.rows(), l.weights.cols()))
                .collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Forward + backward for one sample; returns the loss and accumulates
    /// parameter gradients scaled by `weight`.
    fn backprop_sample(
        &self,
        x: &[f64],
        target: f64,
        loss: Loss,
        weight: f64,
        grads: &mut MlpGrads,
    ) -> f64 {
        // Forward with caches.
        let mut activations: Vec<Vec<f64>> = vec![x.to_vec()];
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (pre, post) = layer.forward(activations.last().unwrap());
            pres.push(pre);
            activations.push(post);
        }
        let yhat = activations.last().unwrap()[0];
        let loss_value = loss.value(yhat, target);
        let mut delta = vec![loss.grad(yhat, target) * weight];

        for (li, layer) in self.layers.iter().enumerate().rev() {
            // Activation derivative.
            if layer.activation == Activation::Relu {
                for (d, pre) in delta.iter_mut().zip(pres[li].iter()) {
                    if *pre <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &activations[li];
            for o in 0..layer.bias.len() {
                grads.bias[li][o] += delta[o];
                for (iidx, v) in input.iter().enumerate() {
                    grads.weights[li].add_to(o, iidx, delta[o] * v);
                }
            }
            if li > 0 {
                let mut next_delta = vec![0.0; input.len()];
                for o in 0..layer.bias.len() {
                    let row = layer.weights.row(o);
                    for (iidx, w) in row.iter().enumerate() {
                        next_delta[iidx] += w * delta[o];
                    }
                }
                delta = next_delta;
            }
        }
        loss_value
    }

    /// Mean loss over a full dataset without touching parameters.
    pub fn evaluate(&self, inputs: &Mat, targets: &[f64], loss: Loss) -> f64 {
        let mut acc = 0.0;
        for r in 0..inputs.rows() {
            acc += loss.value(self.predict_one(inputs.row(r)), targets[r]);
        }
        acc / inputs.rows() as f64
    }

    /// One pass over the data in chronological batches, updating parameters
    /// with RMSprop after each batch. Returns the mean training loss.
    pub fn train_epoch(
        &mut self,
        inputs: &Mat,
        targets: &[f64],
        batch_size: usize,
        loss: Loss,
        opt: &mut RmsProp,
    ) -> f64 {
        let n = inputs.rows();
        let mut total = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + batch_size).min(n);
            let weight = 1.0 / (end - start) as f64;
            let mut grads = self.zero_grads();
            for r in start..end {
                total += self.backprop_sample(inputs.row(r), targets[r], loss, weight, &mut grads);
            }
            // Flatten (params, grads) pairs for the optimizer.
            let mut slot = 0;
            for (li, layer) in self.layers.iter_mut().enumerate() {
                opt.step(slot, layer.weights.data_mut(), grads.weights[li].data());
                slot += 1;
                opt.step(slot, &mut layer.bias, &grads.bias[li]);
                slot += 1;
            }
            start = end;
        }
        total / n as f64
    }

    pub fn n_param_slots(&self) -> usize {
        self.layers.len() * 2
    }
}
