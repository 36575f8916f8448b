use rand::Rng;

use super::tensor::Tensor2;

/// Negative-side slope of LeakyReLU in MLP hidden layers.
pub const MLP_SLOPE: f64 = 0.01;
/// Negative-side slope of LeakyReLU applied to attention scores.
pub const ATTENTION_SLOPE: f64 = 0.2;

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu => leaky_relu(x, MLP_SLOPE),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn grad(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu => leaky_relu_grad(x, MLP_SLOPE),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Affine map `y = W x + b` with `W: out × in` and `b: out × 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor2,
    pub bias: Tensor2,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear { weight: Tensor2::zeros(outputs, inputs), bias: Tensor2::zeros(outputs, 1) }
    }

    /// Uniform `±1/√fan_in` initialisation for weights and biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Linear {
            weight: Tensor2::uniform(outputs, inputs, bound, rng),
            bias: Tensor2::uniform(outputs, 1, bound, rng),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.weight.matvec(x);
        for (o, b) in out.iter_mut().zip(self.bias.data()) {
            *o += b;
        }
        out
    }

    /// Accumulates parameter gradients into `grads` (if any) and input
    /// gradients into `dx` (if any).
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: Option<&mut Linear>, dx: Option<&mut [f64]>) {
        if let Some(g) = grads {
            g.weight.outer_acc(dy, x);
            super::tensor::axpy(1.0, dy, g.bias.data_mut());
        }
        if let Some(dx) = dx {
            self.weight.matvec_t_acc(dy, dx);
        }
    }
}

/// Two affine layers: LeakyReLU after the first, `output` after the second.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: Linear,
    pub out: Linear,
    pub output: Activation,
}

#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
    pub pre_out: Vec<f64>,
    pub out: Vec<f64>,
}

impl MlpCache {
    /// Smallest |pre-activation| across piecewise-linear units.
    pub fn min_abs_kink(&self, output: Activation) -> f64 {
        let hidden = self.pre_hidden.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if output == Activation::LeakyRelu {
            hidden.min(self.pre_out.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
        } else {
            hidden
        }
    }
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, output: Activation, rng: &mut R) -> Self {
        Mlp { hidden: Linear::init(inputs, hidden, rng), out: Linear::init(hidden, outputs, rng), output }
    }

    pub fn zeros(inputs: usize, hidden: usize, outputs: usize, output: Activation) -> Self {
        Mlp { hidden: Linear::zeros(inputs, hidden), out: Linear::zeros(hidden, outputs), output }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn forward(&self, x: &[f64]) -> MlpCache {
        let pre_hidden = self.hidden.forward(x);
        let hidden: Vec<f64> = pre_hidden.iter().map(|&v| leaky_relu(v, MLP_SLOPE)).collect();
        let pre_out = self.out.forward(&hidden);
        let out = pre_out.iter().map(|&v| self.output.apply(v)).collect();
        MlpCache { input: x.to_vec(), pre_hidden, hidden, pre_out, out }
    }

    /// Backpropagates `d_out`; returns the gradient with respect to the input
    /// when `want_input` is set.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grads: Option<&mut Mlp>, want_input: bool) -> Option<Vec<f64>> {
        let d_pre_out: Vec<f64> = d_out
            .iter()
            .zip(cache.pre_out.iter().zip(&cache.out))
            .map(|(&g, (&x, &y))| g * self.output.grad(x, y))
            .collect();
        let mut d_hidden = vec![0.0; cache.hidden.len()];
        let (g_hidden, g_out) = match grads {
            Some(g) => (Some(&mut g.hidden), Some(&mut g.out)),
            None => (None, None),
        };
        self.out.backward(&cache.hidden, &d_pre_out, g_out, Some(&mut d_hidden));
        for (d, &x) in d_hidden.iter_mut().zip(&cache.pre_hidden) {
            *d *= leaky_relu_grad(x, MLP_SLOPE);
        }
        let mut d_input = want_input.then(|| vec![0.0; cache.input.len()]);
        self.hidden.backward(&cache.input, &d_hidden, g_hidden, d_input.as_deref_mut());
        d_input
    }
}
