//! Single-layer LSTM autoencoder with hand-written backpropagation through
//! time.
//!
//! The encoder reads the window step by step. Its final hidden and cell
//! state seed an input-free decoder that unrolls for the same number of
//! steps; a linear projection of every decoder hidden state reconstructs the
//! matching input row. Gate blocks are stored in the order input, forget,
//! cell candidate, output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnomalyError, Normalizer, Reconstructor, Window};

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub input: usize,
    pub hidden: usize,
    pub enc_w: usize,
    pub enc_u: usize,
    pub enc_b: usize,
    pub dec_u: usize,
    pub dec_b: usize,
    pub out_w: usize,
    pub out_b: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(input: usize, hidden: usize) -> Layout {
        let g = 4 * hidden;
        let enc_w = 0;
        let enc_u = enc_w + g * input;
        let enc_b = enc_u + g * hidden;
        let dec_u = enc_b + g;
        let dec_b = dec_u + g * hidden;
        let out_w = dec_b + g;
        let out_b = out_w + input * hidden;
        Layout { input, hidden, enc_w, enc_u, enc_b, dec_u, dec_b, out_w, out_b, len: out_b + input }
    }

    /// Block name and local index of a flat parameter index.
    pub fn describe(&self, index: usize) -> String {
        let blocks = [
            ("enc_w", self.enc_w),
            ("enc_u", self.enc_u),
            ("enc_b", self.enc_b),
            ("dec_u", self.dec_u),
            ("dec_b", self.dec_b),
            ("out_w", self.out_w),
            ("out_b", self.out_b),
        ];
        let (name, start) = blocks.iter().rev().find(|(_, s)| index >= *s).copied().unwrap_or(("?", 0));
        format!("{name}[{}]", index - start)
    }
}

/// Gradient corruption used to prove the gradient check can fail.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientFault {
    #[default]
    None,
    /// Flips the sign of the forget-gate pre-activation delta.
    FlipForgetGate,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Activations of one time step.
#[derive(Debug, Clone)]
struct Step {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates, 4·hidden, order i f g o.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    c: Vec<f64>,
}

struct Block {
    w: Option<usize>,
    u: usize,
    b: usize,
}

fn forward_step(p: &[f64], l: &Layout, block: &Block, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Step {
    let (d, h) = (l.input, l.hidden);
    let mut gates = p[block.b..block.b + 4 * h].to_vec();
    for (r, z) in gates.iter_mut().enumerate() {
        if let Some(w) = block.w {
            *z += dot(&p[w + r * d..w + (r + 1) * d], x);
        }
        *z += dot(&p[block.u + r * h..block.u + (r + 1) * h], h_prev);
    }
    for (r, z) in gates.iter_mut().enumerate() {
        *z = if (2 * h..3 * h).contains(&r) { z.tanh() } else { sigmoid(*z) };
    }
    let mut c = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    let mut hn = vec![0.0; h];
    for j in 0..h {
        let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        hn[j] = o * tanh_c[j];
    }
    Step { h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), gates, tanh_c, h: hn, c }
}

/// Accumulates parameter gradients of one step and returns the gradients
/// with respect to the previous hidden and cell state.
#[allow(clippy::too_many_arguments)]
fn backward_step(
    p: &[f64],
    grad: &mut [f64],
    l: &Layout,
    block: &Block,
    x: &[f64],
    s: &Step,
    dh: &[f64],
    dc: &[f64],
    fault: GradientFault,
) -> (Vec<f64>, Vec<f64>) {
    let (d, h) = (l.input, l.hidden);
    let mut dz = vec![0.0; 4 * h];
    let mut dc_prev = vec![0.0; h];
    for j in 0..h {
        let (i, f, g, o) = (s.gates[j], s.gates[h + j], s.gates[2 * h + j], s.gates[3 * h + j]);
        let tc = s.tanh_c[j];
        let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = dct * g * i * (1.0 - i);
        dz[h + j] = dct * s.c_prev[j] * f * (1.0 - f);
        if fault == GradientFault::FlipForgetGate {
            dz[h + j] = -dz[h + j];
        }
        dz[2 * h + j] = dct * i * (1.0 - g * g);
        dz[3 * h + j] = dh[j] * tc * o * (1.0 - o);
        dc_prev[j] = dct * f;
    }
    let mut dh_prev = vec![0.0; h];
    for (r, &dzr) in dz.iter().enumerate() {
        grad[block.b + r] += dzr;
        if dzr == 0.0 {
            continue;
        }
        if let Some(w) = block.w {
            for (gw, xv) in grad[w + r * d..w + (r + 1) * d].iter_mut().zip(x) {
                *gw += dzr * xv;
            }
        }
        let urow = block.u + r * h;
        for k in 0..h {
            grad[urow + k] += dzr * s.h_prev[k];
            dh_prev[k] += p[urow + k] * dzr;
        }
    }
    (dh_prev, dc_prev)
}

/// Forward pass over a flat `steps × input` window. Returns the flat
/// reconstruction and the encoder and decoder activations.
fn forward(p: &[f64], l: &Layout, x: &[f64]) -> (Vec<f64>, Vec<Step>, Vec<Step>) {
    let (d, h) = (l.input, l.hidden);
    let steps = x.len() / d;
    let enc = Block { w: Some(l.enc_w), u: l.enc_u, b: l.enc_b };
    let dec = Block { w: None, u: l.dec_u, b: l.dec_b };
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    let mut enc_steps = Vec::with_capacity(steps);
    for t in 0..steps {
        let s = forward_step(p, l, &enc, &x[t * d..(t + 1) * d], &hs, &cs);
        hs.clone_from(&s.h);
        cs.clone_from(&s.c);
        enc_steps.push(s);
    }
    let mut dec_steps = Vec::with_capacity(steps);
    let mut y = vec![0.0; x.len()];
    for t in 0..steps {
        let s = forward_step(p, l, &dec, &[], &hs, &cs);
        for k in 0..d {
            y[t * d + k] = p[l.out_b + k] + dot(&p[l.out_w + k * h..l.out_w + (k + 1) * h], &s.h);
        }
        hs.clone_from(&s.h);
        cs.clone_from(&s.c);
        dec_steps.push(s);
    }
    (y, enc_steps, dec_steps)
}

fn mse(y: &[f64], x: &[f64]) -> f64 {
    y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

/// Loss and full parameter gradient for one window.
pub(crate) fn loss_and_gradient(p: &[f64], l: &Layout, x: &[f64], fault: GradientFault) -> (f64, Vec<f64>) {
    let (d, h) = (l.input, l.hidden);
    let steps = x.len() / d;
    let (y, enc_steps, dec_steps) = forward(p, l, x);
    let loss = mse(&y, x);
    let scale = 2.0 / x.len() as f64;
    let mut grad = vec![0.0; l.len];
    let enc = Block { w: Some(l.enc_w), u: l.enc_u, b: l.enc_b };
    let dec = Block { w: None, u: l.dec_u, b: l.dec_b };

    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    for t in (0..steps).rev() {
        let s = &dec_steps[t];
        let mut dh = dh_next.clone();
        for k in 0..d {
            let dy = scale * (y[t * d + k] - x[t * d + k]);
            grad[l.out_b + k] += dy;
            let row = l.out_w + k * h;
            for j in 0..h {
                grad[row + j] += dy * s.h[j];
                dh[j] += p[row + j] * dy;
            }
        }
        (dh_next, dc_next) = backward_step(p, &mut grad, l, &dec, &[], s, &dh, &dc_next, fault);
    }
    for t in (0..steps).rev() {
        let xt = &x[t * d..(t + 1) * d];
        (dh_next, dc_next) = backward_step(p, &mut grad, l, &enc, xt, &enc_steps[t], &dh_next, &dc_next, fault);
    }
    (loss, grad)
}

pub(crate) fn loss_only(p: &[f64], l: &Layout, x: &[f64]) -> f64 {
    let (y, _, _) = forward(p, l, x);
    mse(&y, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { hidden_dim: 16, epochs: 100, learning_rate: 0.01, clip_norm: 5.0, seed: 0 }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained (or freshly initialized) autoencoder with the normalizer of its
/// training data.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub layout: Layout,
    pub params: Vec<f64>,
    pub normalizer: Normalizer,
    pub seed: u64,
    /// Mean window loss before training, then after every epoch.
    pub loss_history: Vec<f64>,
}

impl LstmModel {
    /// Weights uniform in [−0.08, 0.08], forget-gate biases 1.
    pub fn init(normalizer: Normalizer, hidden_dim: usize, seed: u64) -> LstmModel {
        let layout = Layout::new(normalizer.dim(), hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params: Vec<f64> = (0..layout.len).map(|_| rng.random_range(-0.08..=0.08)).collect();
        for b in [layout.enc_b, layout.dec_b] {
            params[b + hidden_dim..b + 2 * hidden_dim].fill(1.0);
        }
        LstmModel { layout, params, normalizer, seed, loss_history: Vec::new() }
    }

    /// All parameters zero, identity normalizer.
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> LstmModel {
        let layout = Layout::new(input_dim, hidden_dim);
        LstmModel {
            layout,
            params: vec![0.0; layout.len],
            normalizer: Normalizer::identity(input_dim),
            seed: 0,
            loss_history: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.layout.hidden
    }

    fn check_shape(&self, x: &[f64]) -> Result<(), AnomalyError> {
        if x.is_empty() || !x.len().is_multiple_of(self.layout.input) {
            return Err(AnomalyError::Shape { expected: self.layout.input, got: x.len() });
        }
        Ok(())
    }

    /// Reconstruction of a flat normalized window.
    pub fn reconstruct_flat(&self, x: &[f64]) -> Result<Vec<f64>, AnomalyError> {
        self.check_shape(x)?;
        Ok(forward(&self.params, &self.layout, x).0)
    }

    /// Mean squared reconstruction error of a flat normalized window.
    pub fn loss(&self, x: &[f64]) -> Result<f64, AnomalyError> {
        self.check_shape(x)?;
        Ok(loss_only(&self.params, &self.layout, x))
    }

    /// Normalizes a raw window and returns its reconstruction error.
    pub fn score(&self, window: &Window) -> Result<f64, AnomalyError> {
        self.loss(&self.normalizer.apply_flat(window)?)
    }

    /// Plain gradient descent, one update per window in the given order.
    pub fn fit(&mut self, windows: &[Vec<f64>], cfg: &TrainConfig) -> Result<(), AnomalyError> {
        if windows.is_empty() {
            return Err(AnomalyError::NoWindows);
        }
        for w in windows {
            self.check_shape(w)?;
        }
        let n = windows.len() as f64;
        if self.loss_history.is_empty() {
            let initial = windows.iter().map(|w| loss_only(&self.params, &self.layout, w)).sum::<f64>() / n;
            self.loss_history.push(initial);
        }
        for epoch in 0..cfg.epochs {
            let mut total = 0.0;
            for w in windows {
                let (loss, mut grad) = loss_and_gradient(&self.params, &self.layout, w, GradientFault::None);
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if !loss.is_finite() || !norm.is_finite() {
                    return Err(AnomalyError::Divergence { epoch });
                }
                if norm > cfg.clip_norm {
                    let s = cfg.clip_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
                total += loss;
            }
            let mean = total / n;
            if !mean.is_finite() {
                return Err(AnomalyError::Divergence { epoch });
            }
            self.loss_history.push(mean);
        }
        Ok(())
    }

    pub fn initial_loss(&self) -> Option<f64> {
        self.loss_history.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }
}

impl Reconstructor for LstmModel {
    fn input_dim(&self) -> usize {
        self.layout.input
    }

    fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        forward(&self.params, &self.layout, x).0
    }
}

/// Fits the normalizer on the expert windows and trains a fresh model.
pub fn train(windows: &[Window], cfg: &TrainConfig) -> Result<LstmModel, AnomalyError> {
    let normalizer = Normalizer::fit(windows)?;
    let flat = windows.iter().map(|w| normalizer.apply_flat(w)).collect::<Result<Vec<_>, _>>()?;
    let mut model = LstmModel::init(normalizer, cfg.hidden_dim, cfg.seed);
    model.fit(&flat, cfg)?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Parameter with the largest error, e.g. `dec_u[17]`.
    pub worst: String,
    pub analytic: f64,
    pub numeric: f64,
}

/// Gradient magnitudes below this are compared absolutely: central
/// differences at ε = 1e-5 carry about 1e-11 of rounding noise.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// |a − n| / max(|a|, |n|, [`RELATIVE_ERROR_FLOOR`]); 0 when both are 0.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
    }
}

/// Compares backpropagated gradients with central finite differences on
/// every parameter of `model` for one flat normalized window.
pub fn gradient_check(model: &LstmModel, x: &[f64], epsilon: f64) -> Result<GradientCheck, AnomalyError> {
    gradient_check_with_fault(model, x, epsilon, GradientFault::None)
}

#[doc(hidden)]
pub fn gradient_check_with_fault(
    model: &LstmModel,
    x: &[f64],
    epsilon: f64,
    fault: GradientFault,
) -> Result<GradientCheck, AnomalyError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(AnomalyError::Config(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    model.check_shape(x)?;
    let l = &model.layout;
    let (_, analytic) = loss_and_gradient(&model.params, l, x, fault);
    let mut p = model.params.clone();
    let mut worst = GradientCheck { max_relative_error: 0.0, worst: String::new(), analytic: 0.0, numeric: 0.0 };
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + epsilon;
        let plus = loss_only(&p, l, x);
        p[i] = orig - epsilon;
        let minus = loss_only(&p, l, x);
        p[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let err = relative_error(analytic[i], numeric);
        if err > worst.max_relative_error || worst.worst.is_empty() {
            worst = GradientCheck { max_relative_error: err, worst: l.describe(i), analytic: analytic[i], numeric };
        }
    }
    Ok(worst)
}
