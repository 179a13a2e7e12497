use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledView;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Logistic,
    Tanh,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Identity,
        Activation::Logistic,
        Activation::Tanh,
        Activation::Relu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub(crate) fn id(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Logistic => 1,
            Activation::Tanh => 2,
            Activation::Relu => 3,
        }
    }

    pub(crate) fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Logistic => logistic(z),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative given the pre-activation `z` and the output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Logistic => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown activation {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Solver {
    Sgd,
    Adam,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Sgd => "sgd",
            Solver::Adam => "adam",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sgd" => Ok(Solver::Sgd),
            "adam" => Ok(Solver::Adam),
            _ => Err(format!("unknown solver {s:?}")),
        }
    }
}

/// Logistic function evaluated without overflow for large `|z|`.
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Cross-entropy of a logit against a 0/1 label. Written per label so that
/// flipping both the label and the logit's sign gives the same value.
fn bce_logit(z: f64, positive: bool) -> f64 {
    if positive {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Derivative of [`bce_logit`] with respect to the logit.
fn bce_grad(z: f64, positive: bool) -> f64 {
    if positive {
        -logistic(-z)
    } else {
        logistic(z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub solver: Solver,
    pub learning_rate: f64,
    /// Minimum epoch-loss improvement; 10 epochs in a row below it stop
    /// training. Zero disables early stopping.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Minibatch size; anything at least the data size means full batch.
    pub batch: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![20],
            activation: Activation::Tanh,
            solver: Solver::Adam,
            learning_rate: 1e-3,
            tol: 1e-4,
            max_iter: 200,
            seed: 0,
            batch: 200,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be >= 1"));
        }
        // zero is accepted so a frozen run can be checked
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be >= 0"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol must be >= 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(())
    }

    /// Total number of weights and biases for `inputs` features.
    pub fn parameter_count(&self, inputs: usize) -> usize {
        let mut n = 0;
        let mut fan_in = inputs;
        for &w in self.hidden_layers.iter().chain(std::iter::once(&1)) {
            n += fan_in * w + w;
            fan_in = w;
        }
        n
    }
}

/// Dense layer; `weights` is `outputs × inputs`, row-major by output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut l = Self::zeros(inputs, outputs);
        for w in &mut l.weights {
            *w = rng.gen_range(-limit..limit);
        }
        l
    }

    fn forward_into(&self, x: &[f64], z: &mut Vec<f64>) {
        z.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            let mut s = *b;
            for (w, v) in row.iter().zip(x) {
                s += w * v;
            }
            z.push(s);
        }
    }
}

/// Feed-forward network with a single logistic output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
}

impl MlpModel {
    /// Hidden layers get seeded uniform Glorot weights. The output layer
    /// starts at zero unless `random_output` is set, so every fresh model
    /// predicts exactly 0.5 and label swaps mirror training exactly.
    pub fn init(config: &MlpConfig, inputs: usize, random_output: bool) -> Result<Self> {
        config.validate()?;
        if inputs == 0 {
            return Err(Error::invalid("feature length must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.hidden_layers.len() + 1);
        let mut fan_in = inputs;
        for &w in &config.hidden_layers {
            layers.push(Layer::glorot(fan_in, w, &mut rng));
            fan_in = w;
        }
        layers.push(if random_output {
            Layer::glorot(fan_in, 1, &mut rng)
        } else {
            Layer::zeros(fan_in, 1)
        });
        Ok(Self {
            layers,
            activation: config.activation,
            loss_history: Vec::new(),
        })
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_len(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_len() {
            return Err(Error::invalid(format!(
                "feature length {} does not match model input {}",
                features.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    /// Output logit.
    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        self.check_len(features)?;
        let mut a = features.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&a, &mut z);
            if i == last {
                return Ok(z[0]);
            }
            a.clear();
            a.extend(z.iter().map(|&v| self.activation.apply(v)));
        }
        unreachable!("a model always has an output layer")
    }

    /// Confidence that the view belongs to the route, strictly inside (0, 1).
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        let p = logistic(self.logit(features)?);
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
    }

    /// Pre-activations of every hidden unit for one input.
    pub fn hidden_preactivations(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_len(features)?;
        let mut out = Vec::new();
        let mut a = features.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers[..self.layers.len() - 1] {
            layer.forward_into(&a, &mut z);
            out.extend_from_slice(&z);
            a.clear();
            a.extend(z.iter().map(|&v| self.activation.apply(v)));
        }
        Ok(out)
    }

    fn zeros_like(&self) -> Vec<Layer> {
        self.layers
            .iter()
            .map(|l| Layer::zeros(l.inputs, l.outputs))
            .collect()
    }

    /// Adds the loss gradient of one sample into `grad`; returns its loss.
    fn backprop(
        &self,
        x: &[f64],
        positive: bool,
        grad: &mut [Layer],
        scratch: &mut Scratch,
    ) -> f64 {
        let n = self.layers.len();
        scratch.acts.resize(n + 1, Vec::new());
        scratch.pre.resize(n, Vec::new());
        scratch.acts[0].clear();
        scratch.acts[0].extend_from_slice(x);
        for i in 0..n {
            let (before, after) = scratch.acts.split_at_mut(i + 1);
            self.layers[i].forward_into(&before[i], &mut scratch.pre[i]);
            let a = &mut after[0];
            a.clear();
            if i + 1 == n {
                a.extend_from_slice(&scratch.pre[i]);
            } else {
                a.extend(scratch.pre[i].iter().map(|&v| self.activation.apply(v)));
            }
        }
        let z = scratch.pre[n - 1][0];
        let loss = bce_logit(z, positive);

        scratch.delta.clear();
        scratch.delta.push(bce_grad(z, positive));
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let input = &scratch.acts[i];
            let g = &mut grad[i];
            for (o, d) in scratch.delta.iter().enumerate() {
                g.biases[o] += d;
                for (gw, v) in g.weights[o * layer.inputs..(o + 1) * layer.inputs]
                    .iter_mut()
                    .zip(input)
                {
                    *gw += d * v;
                }
            }
            if i == 0 {
                break;
            }
            scratch.next.clear();
            scratch.next.resize(layer.inputs, 0.0);
            for (o, d) in scratch.delta.iter().enumerate() {
                for (nx, w) in scratch
                    .next
                    .iter_mut()
                    .zip(&layer.weights[o * layer.inputs..(o + 1) * layer.inputs])
                {
                    *nx += d * w;
                }
            }
            for (j, nx) in scratch.next.iter_mut().enumerate() {
                *nx *= self
                    .activation
                    .derivative(scratch.pre[i - 1][j], scratch.acts[i][j]);
            }
            std::mem::swap(&mut scratch.delta, &mut scratch.next);
        }
        loss
    }

    /// Mean loss and its gradient over `views`.
    fn loss_and_grad(&self, views: &[&LabeledView]) -> (f64, Vec<Layer>) {
        let mut grad = self.zeros_like();
        let mut scratch = Scratch::default();
        let mut total = 0.0;
        for v in views {
            total += self.backprop(&v.features, v.is_positive(), &mut grad, &mut scratch);
        }
        let scale = 1.0 / views.len() as f64;
        for g in &mut grad {
            g.weights.iter_mut().for_each(|w| *w *= scale);
            g.biases.iter_mut().for_each(|b| *b *= scale);
        }
        (total * scale, grad)
    }

    fn mean_loss(&self, views: &[&LabeledView]) -> f64 {
        let total: f64 = views
            .iter()
            .map(|v| bce_logit(self.logit(&v.features).unwrap(), v.is_positive()))
            .sum();
        total / views.len() as f64
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }
}

fn flatten(layers: &[Layer]) -> impl Iterator<Item = f64> + '_ {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
}

#[derive(Default)]
struct Scratch {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

fn check_views(views: &[LabeledView]) -> Result<usize> {
    if views.len() < 2 {
        return Err(Error::invalid("training needs at least two views"));
    }
    let len = views[0].features.len();
    if views.iter().any(|v| v.features.len() != len) {
        return Err(Error::invalid("views have inconsistent feature lengths"));
    }
    let positives = views.iter().filter(|v| v.is_positive()).count();
    if positives == 0 || positives == views.len() {
        return Err(Error::invalid("training data must contain both labels"));
    }
    Ok(len)
}

const STAGNANT_EPOCHS: usize = 10;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Minimizes mean binary cross-entropy. Minibatches are reshuffled every
/// epoch from an RNG seeded by `config.seed`, so training is reproducible.
pub fn train(views: &[LabeledView], config: &MlpConfig) -> Result<MlpModel> {
    let inputs = check_views(views)?;
    let mut model = MlpModel::init(config, inputs, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..views.len()).collect();
    let batch = config.batch.min(views.len());
    let n_params = model.parameter_count();
    let (mut m, mut v) = (vec![0.0; n_params], vec![0.0; n_params]);
    let mut t = 0i32;
    let mut sample_loss = vec![0.0; views.len()];
    let mut scratch = Scratch::default();
    let mut best = f64::INFINITY;
    let mut stagnant = 0;

    for epoch in 1..=config.max_iter {
        if batch < views.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let mut grad = model.zeros_like();
            for &i in chunk {
                let s = &views[i];
                sample_loss[i] =
                    model.backprop(&s.features, s.is_positive(), &mut grad, &mut scratch);
            }
            let scale = 1.0 / chunk.len() as f64;
            let lr = config.learning_rate;
            match config.solver {
                Solver::Sgd => {
                    for (p, g) in model.params_mut().zip(flatten(&grad)) {
                        *p -= lr * g * scale;
                    }
                }
                Solver::Adam => {
                    t += 1;
                    let c1 = 1.0 - ADAM_BETA1.powi(t);
                    let c2 = 1.0 - ADAM_BETA2.powi(t);
                    let grads = flatten(&grad);
                    for (((p, g), mi), vi) in model.params_mut().zip(grads).zip(&mut m).zip(&mut v)
                    {
                        let g = g * scale;
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * g;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * g * g;
                        *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        // summed in sample order so the value does not depend on the shuffle
        let loss = sample_loss.iter().sum::<f64>() / views.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        model.loss_history.push(loss);
        if config.tol > 0.0 {
            if loss > best - config.tol {
                stagnant += 1;
            } else {
                stagnant = 0;
            }
            best = best.min(loss);
            if stagnant >= STAGNANT_EPOCHS {
                break;
            }
        }
    }
    Ok(model)
}

/// Largest relative disagreement between the analytic loss gradient and
/// central finite differences, over every parameter of a freshly
/// initialised network (all layers random).
pub fn gradient_check(config: &MlpConfig, views: &[LabeledView], epsilon: f64) -> Result<f64> {
    let inputs = check_views(views)?;
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let refs: Vec<&LabeledView> = views.iter().collect();
    let mut model = MlpModel::init(config, inputs, true)?;
    let (_, grad) = model.loss_and_grad(&refs);
    let analytic: Vec<f64> = flatten(&grad).collect();
    // relative error is measured against at least this magnitude, so
    // gradients that are zero up to rounding do not count as failures
    const FLOOR: f64 = 1e-6;
    let mut worst = 0.0f64;
    for (idx, a) in analytic.iter().enumerate() {
        let orig = *param(&mut model, idx);
        *param(&mut model, idx) = orig + epsilon;
        let up = model.mean_loss(&refs);
        *param(&mut model, idx) = orig - epsilon;
        let down = model.mean_loss(&refs);
        *param(&mut model, idx) = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn param(model: &mut MlpModel, idx: usize) -> &mut f64 {
    model
        .params_mut()
        .nth(idx)
        .expect("parameter index in range")
}

/// Smallest `|pre-activation|` of any hidden unit over `views` for the
/// network [`gradient_check`] builds. ReLU checks need this well above the
/// finite-difference step.
pub fn kink_margin(config: &MlpConfig, views: &[LabeledView]) -> Result<f64> {
    let inputs = check_views(views)?;
    let model = MlpModel::init(config, inputs, true)?;
    let mut margin = f64::INFINITY;
    for v in views {
        for z in model.hidden_preactivations(&v.features)? {
            margin = margin.min(z.abs());
        }
    }
    Ok(margin)
}
