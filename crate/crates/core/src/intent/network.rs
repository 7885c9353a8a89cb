use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::IntentError;

pub const HIDDEN1: usize = 128;
pub const HIDDEN2: usize = 64;

const PROB_FLOOR: f64 = 1e-12;

/// Total scalar count of a V-input, T-output network:
/// `128V + 128 + 128*64 + 64 + 64T + T`.
pub fn count_parameters(vocab_size: usize, tag_count: usize) -> Result<usize, IntentError> {
    check_shape(vocab_size, tag_count)?;
    Ok(HIDDEN1 * vocab_size + HIDDEN1 + HIDDEN1 * HIDDEN2 + HIDDEN2 + HIDDEN2 * tag_count + tag_count)
}

fn check_shape(vocab_size: usize, tag_count: usize) -> Result<(), IntentError> {
    if vocab_size < 1 {
        return Err(IntentError::InvalidShape("vocabulary size must be >= 1".into()));
    }
    if tag_count < 2 {
        return Err(IntentError::InvalidShape("need at least 2 tags".into()));
    }
    Ok(())
}

/// Fully connected layer. `weights` is `fan_in x fan_out`, row-major, so
/// the layer computes `out = Wᵀ x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            biases: vec![0.0; fan_out],
        }
    }

    /// Glorot-uniform weights, zero biases.
    fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Dense {
            fan_in,
            fan_out,
            weights,
            biases: vec![0.0; fan_out],
        }
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.fan_out + col]
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (x, row) in input.iter().zip(self.weights.chunks_exact(self.fan_out)) {
            // bag-of-words inputs and ReLU outputs are mostly zero
            if *x == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
        out
    }

    /// `W · grad_out`, the gradient with respect to this layer's input.
    fn input_gradient(&self, grad_out: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.fan_out)
            .map(|row| row.iter().zip(grad_out).map(|(w, g)| w * g).sum())
            .collect()
    }

    fn accumulate_outer(&mut self, input: &[f64], grad_out: &[f64]) {
        for (x, row) in input.iter().zip(self.weights.chunks_exact_mut(self.fan_out)) {
            if *x == 0.0 {
                continue;
            }
            for (w, g) in row.iter_mut().zip(grad_out) {
                *w += x * g;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(grad_out) {
            *b += g;
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// Inverted dropout after both hidden layers at the given rate.
    Train { dropout: f64 },
    Infer,
}

/// Everything `backward` needs from one training-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pre1: Vec<f64>,
    pub mask1: Option<Vec<f64>>,
    pub out1: Vec<f64>,
    pub pre2: Vec<f64>,
    pub mask2: Option<Vec<f64>>,
    pub out2: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Weights of the V -> 128 -> 64 -> T network. Also used as the container
/// for gradients and optimizer velocity, which share its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    pub hidden1: Dense,
    pub hidden2: Dense,
    pub output: Dense,
}

impl NetworkParameters {
    pub fn zeros(vocab_size: usize, tag_count: usize) -> Result<Self, IntentError> {
        check_shape(vocab_size, tag_count)?;
        Ok(NetworkParameters {
            hidden1: Dense::zeros(vocab_size, HIDDEN1),
            hidden2: Dense::zeros(HIDDEN1, HIDDEN2),
            output: Dense::zeros(HIDDEN2, tag_count),
        })
    }

    /// Seeded Glorot-uniform initialization; equal seeds give bit-identical
    /// parameters.
    pub fn init(vocab_size: usize, tag_count: usize, seed: u64) -> Result<Self, IntentError> {
        check_shape(vocab_size, tag_count)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(NetworkParameters {
            hidden1: Dense::glorot(vocab_size, HIDDEN1, &mut rng),
            hidden2: Dense::glorot(HIDDEN1, HIDDEN2, &mut rng),
            output: Dense::glorot(HIDDEN2, tag_count, &mut rng),
        })
    }

    pub fn input_len(&self) -> usize {
        self.hidden1.fan_in
    }

    pub fn tag_count(&self) -> usize {
        self.output.fan_out
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden1.len() + self.hidden2.len() + self.output.len()
    }

    pub fn same_shape(&self, other: &NetworkParameters) -> bool {
        self.layers()
            .iter()
            .zip(other.layers())
            .all(|(a, b)| a.fan_in == b.fan_in && a.fan_out == b.fan_out)
    }

    pub fn layers(&self) -> [&Dense; 3] {
        [&self.hidden1, &self.hidden2, &self.output]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 3] {
        [&mut self.hidden1, &mut self.hidden2, &mut self.output]
    }

    /// All scalars in a fixed order: each layer's weights then biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.hidden1
            .values()
            .chain(self.hidden2.values())
            .chain(self.output.values())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.hidden1
            .values_mut()
            .chain(self.hidden2.values_mut())
            .chain(self.output.values_mut())
    }

    /// Flat-index access in [`values`](Self::values) order.
    pub fn value_mut(&mut self, index: usize) -> Option<&mut f64> {
        self.values_mut().nth(index)
    }

    pub fn add_assign(&mut self, other: &NetworkParameters) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values_mut() {
            *v *= factor;
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<f64>, ForwardCache), IntentError> {
        if input.len() != self.input_len() {
            return Err(IntentError::DimensionMismatch {
                expected: self.input_len(),
                actual: input.len(),
            });
        }
        let dropout = match mode {
            Mode::Train { dropout } => dropout,
            Mode::Infer => 0.0,
        };

        let pre1 = self.hidden1.forward(input);
        let mask1 = dropout_mask(HIDDEN1, dropout, rng);
        let out1 = activate(&pre1, mask1.as_deref());

        let pre2 = self.hidden2.forward(&out1);
        let mask2 = dropout_mask(HIDDEN2, dropout, rng);
        let out2 = activate(&pre2, mask2.as_deref());

        let probabilities = softmax(&self.output.forward(&out2));
        let cache = ForwardCache {
            input: input.to_vec(),
            pre1,
            mask1,
            out1,
            pre2,
            mask2,
            out2,
            probabilities: probabilities.clone(),
        };
        Ok((probabilities, cache))
    }

    /// Inference-mode forward pass.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>, IntentError> {
        if input.len() != self.input_len() {
            return Err(IntentError::DimensionMismatch {
                expected: self.input_len(),
                actual: input.len(),
            });
        }
        let out1 = activate(&self.hidden1.forward(input), None);
        let out2 = activate(&self.hidden2.forward(&out1), None);
        Ok(softmax(&self.output.forward(&out2)))
    }

    /// Analytic gradient of the cross-entropy loss for one sample.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        target: &[f64],
    ) -> Result<NetworkParameters, IntentError> {
        let t = self.tag_count();
        let consistent = cache.input.len() == self.input_len()
            && cache.pre1.len() == HIDDEN1
            && cache.out1.len() == HIDDEN1
            && cache.pre2.len() == HIDDEN2
            && cache.out2.len() == HIDDEN2
            && cache.probabilities.len() == t
            && cache.mask1.as_ref().is_none_or(|m| m.len() == HIDDEN1)
            && cache.mask2.as_ref().is_none_or(|m| m.len() == HIDDEN2);
        if !consistent {
            return Err(IntentError::StaleCache);
        }
        if target.len() != t {
            return Err(IntentError::DimensionMismatch {
                expected: t,
                actual: target.len(),
            });
        }

        let mut grads = NetworkParameters::zeros(self.input_len(), t)?;

        // softmax + cross-entropy
        let d_logits: Vec<f64> = cache
            .probabilities
            .iter()
            .zip(target)
            .map(|(p, y)| p - y)
            .collect();
        grads.output.accumulate_outer(&cache.out2, &d_logits);

        let d_pre2 = relu_backward(
            self.output.input_gradient(&d_logits),
            &cache.pre2,
            cache.mask2.as_deref(),
        );
        grads.hidden2.accumulate_outer(&cache.out1, &d_pre2);

        let d_pre1 = relu_backward(
            self.hidden2.input_gradient(&d_pre2),
            &cache.pre1,
            cache.mask1.as_deref(),
        );
        grads.hidden1.accumulate_outer(&cache.input, &d_pre1);

        Ok(grads)
    }
}

fn dropout_mask<R: Rng + ?Sized>(width: usize, rate: f64, rng: &mut R) -> Option<Vec<f64>> {
    if rate <= 0.0 {
        return None;
    }
    let keep_scale = 1.0 / (1.0 - rate);
    Some(
        (0..width)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep_scale })
            .collect(),
    )
}

fn activate(pre: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    let relu = pre.iter().map(|z| z.max(0.0));
    match mask {
        Some(mask) => relu.zip(mask).map(|(a, m)| a * m).collect(),
        None => relu.collect(),
    }
}

fn relu_backward(mut grad: Vec<f64>, pre: &[f64], mask: Option<&[f64]>) -> Vec<f64> {
    for (i, g) in grad.iter_mut().enumerate() {
        let gate = if pre[i] > 0.0 { 1.0 } else { 0.0 };
        *g *= gate * mask.map_or(1.0, |m| m[i]);
    }
    grad
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Categorical cross-entropy against a one-hot target, with probabilities
/// floored at 1e-12.
pub fn cross_entropy(probabilities: &[f64], target: &[f64]) -> f64 {
    -probabilities
        .iter()
        .zip(target)
        .filter(|(_, y)| **y != 0.0)
        .map(|(p, y)| y * p.max(PROB_FLOOR).ln())
        .sum::<f64>()
}

pub fn one_hot(index: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}
