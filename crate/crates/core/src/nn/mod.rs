//! Dense two-layer networks: `output = W2 · relu(W1 · (s ⊙ x) + b1) + b2`,
//! where `s` is a fixed, untrained per-input scale (all ones by default).
//!
//! Parameters live in one flat `f64` buffer laid out as `[W1, b1, W2, b2]`,
//! weights row-major with shape `(out_dim, in_dim)`. The flat layout keeps the
//! optimizer, checkpoint format and finite-difference checks trivial.

mod checkpoint;
mod gradcheck;
mod loss;

pub use gradcheck::{gradient_check, LossSpec};
pub use loss::{huber_loss, softmax_cross_entropy, LossValue};
pub(crate) use gradcheck::grouped_cross_entropy;
pub(crate) use loss::softmax;

use rand::Rng;

use crate::{Error, Result};

/// Update rule applied by [`Mlp::apply_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::ADAM
    }
}

#[derive(Debug, Clone, PartialEq)]
struct OptimizerState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

/// Parameter gradients in the same flat layout as [`Mlp::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// A fully connected `input -> hidden (ReLU) -> output` network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    input_scale: Vec<f64>,
    params: Vec<f64>,
    optimizer: Optimizer,
    state: OptimizerState,
}

impl Mlp {
    /// Uniform initialization in `±1/sqrt(fan_in)` for weights and biases.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim);
        let (w1, b1, w2, b2) = net.offsets();
        let l1 = 1.0 / (input_dim as f64).sqrt();
        let l2 = 1.0 / (hidden_dim as f64).sqrt();
        for (i, p) in net.params.iter_mut().enumerate() {
            let limit = if i < w2 { l1 } else { l2 };
            *p = rng.random_range(-limit..=limit);
        }
        debug_assert!(w1 == 0 && b1 < w2 && w2 < b2);
        net
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        assert!(
            input_dim > 0 && hidden_dim > 0 && output_dim > 0,
            "network dimensions must be positive"
        );
        let n = hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
        Mlp {
            input_dim,
            hidden_dim,
            output_dim,
            input_scale: vec![1.0; input_dim],
            params: vec![0.0; n],
            optimizer: Optimizer::default(),
            state: OptimizerState {
                first_moment: vec![0.0; n],
                second_moment: vec![0.0; n],
                steps: 0,
            },
        }
    }

    /// Builds a network from explicit `[W1, b1, W2, b2]` parameters.
    pub fn from_params(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim);
        if params.len() != net.params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Self {
        self.optimizer = optimizer;
        self
    }

    /// Multiplies input `i` by `scale[i]` before the first layer.
    pub fn with_input_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        if scale.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "input scale of length {}, expected {}",
                scale.len(),
                self.input_dim
            )));
        }
        if scale.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("non-finite input scale"));
        }
        self.input_scale = scale;
        Ok(self)
    }

    pub fn input_scale(&self) -> &[f64] {
        &self.input_scale
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn optimizer(&self) -> Optimizer {
        self.optimizer
    }

    /// Number of optimizer updates applied so far.
    pub fn update_count(&self) -> u64 {
        self.state.steps
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let w1 = 0;
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (w1, b1, w2, b2)
    }

    pub fn w1(&self) -> &[f64] {
        let (w1, b1, _, _) = self.offsets();
        &self.params[w1..b1]
    }

    pub fn b1(&self) -> &[f64] {
        let (_, b1, w2, _) = self.offsets();
        &self.params[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, _, w2, b2) = self.offsets();
        &self.params[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        let (_, _, _, b2) = self.offsets();
        &self.params[b2..]
    }

    /// Copies parameters from `other`, leaving input scale and optimizer
    /// state untouched.
    pub fn copy_params_from(&mut self, other: &Mlp) {
        assert_eq!(
            (self.input_dim, self.hidden_dim, self.output_dim),
            (other.input_dim, other.hidden_dim, other.output_dim),
            "dimension mismatch in parameter copy"
        );
        self.params.copy_from_slice(&other.params);
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "network expects input of length {}, got {}",
                self.input_dim,
                input.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        self.forward_cached(input, &mut hidden, &mut out);
        Ok(out)
    }

    /// Forward pass that keeps the post-ReLU hidden activations for backprop.
    /// Shapes are not checked.
    pub(crate) fn forward_cached(&self, input: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        let (w1, b1, w2, b2) = self.offsets();
        let p = &self.params;
        let n_in = self.input_dim;
        for (h, act) in hidden.iter_mut().enumerate() {
            let row = &p[w1 + h * n_in..w1 + (h + 1) * n_in];
            let z = p[b1 + h]
                + row
                    .iter()
                    .zip(input)
                    .zip(&self.input_scale)
                    .map(|((w, x), s)| w * (x * s))
                    .sum::<f64>();
            *act = z.max(0.0);
        }
        let n_h = self.hidden_dim;
        for (o, y) in out.iter_mut().enumerate() {
            let row = &p[w2 + o * n_h..w2 + (o + 1) * n_h];
            *y = p[b2 + o] + row.iter().zip(hidden.iter()).map(|(w, a)| w * a).sum::<f64>();
        }
    }

    /// Accumulates `scale * dL/dparams` for one sample into `grads`.
    fn accumulate(
        &self,
        input: &[f64],
        hidden: &[f64],
        output_grad: &[f64],
        scale: f64,
        grads: &mut [f64],
        hidden_grad: &mut [f64],
    ) {
        let (w1, b1, w2, b2) = self.offsets();
        let n_in = self.input_dim;
        let n_h = self.hidden_dim;
        hidden_grad.iter_mut().for_each(|g| *g = 0.0);
        for (o, &dy) in output_grad.iter().enumerate() {
            if dy == 0.0 {
                continue;
            }
            let dy = dy * scale;
            grads[b2 + o] += dy;
            let row = &self.params[w2 + o * n_h..w2 + (o + 1) * n_h];
            let grow = &mut grads[w2 + o * n_h..w2 + (o + 1) * n_h];
            for h in 0..n_h {
                grow[h] += dy * hidden[h];
                hidden_grad[h] += dy * row[h];
            }
        }
        for h in 0..n_h {
            if hidden[h] <= 0.0 {
                continue;
            }
            let dz = hidden_grad[h];
            grads[b1 + h] += dz;
            let grow = &mut grads[w1 + h * n_in..w1 + (h + 1) * n_in];
            for ((g, x), s) in grow.iter_mut().zip(input).zip(&self.input_scale) {
                *g += dz * (x * s);
            }
        }
    }

    /// Batch-mean parameter gradients for the given output gradients.
    pub fn gradients<I, G>(&self, inputs: &[I], output_grads: &[G]) -> Result<Gradients>
    where
        I: AsRef<[f64]>,
        G: AsRef<[f64]>,
    {
        if inputs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if inputs.len() != output_grads.len() {
            return Err(Error::invalid(format!(
                "{} inputs but {} output gradients",
                inputs.len(),
                output_grads.len()
            )));
        }
        let scale = 1.0 / inputs.len() as f64;
        let mut grads = vec![0.0; self.params.len()];
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut hidden_grad = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        for (x, g) in inputs.iter().zip(output_grads) {
            let (x, g) = (x.as_ref(), g.as_ref());
            self.check_input(x)?;
            if g.len() != self.output_dim {
                return Err(Error::invalid(format!(
                    "output gradient of length {}, expected {}",
                    g.len(),
                    self.output_dim
                )));
            }
            self.forward_cached(x, &mut hidden, &mut out);
            self.accumulate(x, &hidden, g, scale, &mut grads, &mut hidden_grad);
        }
        Ok(Gradients(grads))
    }

    /// Applies one optimizer update. Fails without touching parameters if
    /// the gradient is non-finite, and fails after the update if it produced
    /// non-finite parameters.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if grads.0.len() != self.params.len() {
            return Err(Error::invalid("gradient length does not match parameters"));
        }
        if !grads.is_finite() {
            return Err(Error::Training("non-finite gradient".into()));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {learning_rate}")));
        }
        self.state.steps += 1;
        match self.optimizer {
            Optimizer::Sgd => {
                for (p, g) in self.params.iter_mut().zip(&grads.0) {
                    *p -= learning_rate * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = self.state.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let st = &mut self.state;
                for i in 0..self.params.len() {
                    let g = grads.0[i];
                    st.first_moment[i] = beta1 * st.first_moment[i] + (1.0 - beta1) * g;
                    st.second_moment[i] = beta2 * st.second_moment[i] + (1.0 - beta2) * g * g;
                    let m_hat = st.first_moment[i] / c1;
                    let v_hat = st.second_moment[i] / c2;
                    self.params[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Training("update produced non-finite parameters".into()));
        }
        Ok(())
    }

    /// One optimizer step from externally supplied output gradients,
    /// averaged over the batch.
    pub fn train_step<I, G>(
        &mut self,
        inputs: &[I],
        output_grads: &[G],
        learning_rate: f64,
    ) -> Result<()>
    where
        I: AsRef<[f64]>,
        G: AsRef<[f64]>,
    {
        let grads = self.gradients(inputs, output_grads)?;
        self.apply_gradients(&grads, learning_rate)
    }

    /// Forward pass, per-sample loss, backprop and one optimizer step.
    ///
    /// `loss` receives the sample index and the network output and returns
    /// the loss with its gradient w.r.t. the output. Returns the batch-mean
    /// loss value measured before the update.
    pub fn fit_batch<I, F>(&mut self, inputs: &[I], learning_rate: f64, mut loss: F) -> Result<f64>
    where
        I: AsRef<[f64]>,
        F: FnMut(usize, &[f64]) -> Result<LossValue>,
    {
        if inputs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let scale = 1.0 / inputs.len() as f64;
        let mut grads = vec![0.0; self.params.len()];
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut hidden_grad = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        let mut total = 0.0;
        for (i, x) in inputs.iter().enumerate() {
            let x = x.as_ref();
            self.check_input(x)?;
            self.forward_cached(x, &mut hidden, &mut out);
            let l = loss(i, &out)?;
            if l.gradient.len() != self.output_dim {
                return Err(Error::invalid("loss gradient has wrong length"));
            }
            total += l.value;
            self.accumulate(x, &hidden, &l.gradient, scale, &mut grads, &mut hidden_grad);
        }
        self.apply_gradients(&Gradients(grads), learning_rate)?;
        Ok(total * scale)
    }
}

/// Index of the largest value, first index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
