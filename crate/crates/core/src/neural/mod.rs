//! Fully connected tanh network from scaled process parameters to
//! standardised reduced coefficients, trained by full-batch Adam.

mod train;

pub use train::{adam_step, train, AdamState, EpochRecord, TrainConfig, TrainReport};

use serde::{Deserialize, Serialize};

use crate::hash::Fingerprint;
use crate::rng::Rng;
use crate::{Error, Result};

/// Layer sizes: `input → hidden_width × hidden_layers → output`, tanh on the
/// hidden layers and identity on the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpLayout {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
}

impl Default for MlpLayout {
    fn default() -> Self {
        MlpLayout {
            input_dim: 2,
            hidden_layers: 10,
            hidden_width: 40,
            output_dim: 30,
        }
    }
}

impl MlpLayout {
    /// Shallower preset used when the default depth fails to train.
    pub fn fallback(input_dim: usize, output_dim: usize) -> Self {
        MlpLayout {
            input_dim,
            hidden_layers: 4,
            hidden_width: 40,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("network input and output dims must be >= 1".into()));
        }
        if self.hidden_layers > 0 && self.hidden_width == 0 {
            return Err(Error::Config("hidden width must be >= 1".into()));
        }
        Ok(())
    }

    /// Widths of every layer including input and output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_layers + 2);
        d.push(self.input_dim);
        d.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        d.push(self.output_dim);
        d
    }

    pub fn param_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }
}

/// Network parameters stored flat: for each layer the row-major
/// `out × in` weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layout: MlpLayout,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
    pub seed: u64,
}

impl Mlp {
    /// Glorot-uniform weights `U(−a, a)`, `a = sqrt(6/(fan_in + fan_out))`,
    /// and zero biases. Weights are drawn layer by layer, row-major, as
    /// `a·(2u − 1)` with `u` from [`Rng::uniform`].
    pub fn init(layout: MlpLayout, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(layout)?;
        mlp.seed = seed;
        let mut rng = Rng::new(seed);
        for k in 0..mlp.n_layers() {
            let (fan_in, fan_out) = (mlp.dims[k], mlp.dims[k + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = mlp.layer_mut(k);
            for v in w.iter_mut() {
                *v = a * (2.0 * rng.uniform() - 1.0);
            }
        }
        Ok(mlp)
    }

    /// All weights and biases zero.
    pub fn zeros(layout: MlpLayout) -> Result<Self> {
        layout.validate()?;
        let dims = layout.dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        offsets.push(0);
        for w in dims.windows(2) {
            total += w[1] * (w[0] + 1);
            offsets.push(total);
        }
        Ok(Mlp {
            layout,
            dims,
            offsets,
            params: vec![0.0; total],
            seed: 0,
        })
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(layout: MlpLayout, params: Vec<f64>, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(layout)?;
        if params.len() != mlp.params.len() {
            return Err(Error::dim("network parameters", mlp.params.len(), params.len()));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("network parameters are not finite".into()));
        }
        mlp.params = params;
        mlp.seed = seed;
        Ok(mlp)
    }

    pub fn layout(&self) -> MlpLayout {
        self.layout
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weights (row-major `out × in`) and biases of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
        let block = &self.params[self.offsets[k]..self.offsets[k + 1]];
        block.split_at(fan_in * fan_out)
    }

    pub fn layer_mut(&mut self, k: usize) -> (&mut [f64], &mut [f64]) {
        let (fan_in, fan_out) = (self.dims[k], self.dims[k + 1]);
        let block = &mut self.params[self.offsets[k]..self.offsets[k + 1]];
        block.split_at_mut(fan_in * fan_out)
    }

    /// Identifier of the current parameter values.
    pub fn fingerprint(&self) -> String {
        let mut f = Fingerprint::new("calibrom/mlp/v1");
        for &d in &self.dims {
            f.u64(d as u64);
        }
        for &p in &self.params {
            f.f64(p);
        }
        f.finish()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.layout.input_dim {
            return Err(Error::dim("network input", self.layout.input_dim, x.len()));
        }
        let mut a = x.to_vec();
        let mut next = Vec::new();
        for k in 0..self.n_layers() {
            self.affine(k, &a, &mut next);
            if k + 1 < self.n_layers() {
                next.iter_mut().for_each(|v| *v = v.tanh());
                debug_assert!(next.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
            std::mem::swap(&mut a, &mut next);
        }
        Ok(a)
    }

    /// `out = W_k·a + b_k`
    fn affine(&self, k: usize, a: &[f64], out: &mut Vec<f64>) {
        let (w, b) = self.layer(k);
        let fan_in = self.dims[k];
        out.clear();
        out.extend(
            w.chunks_exact(fan_in)
                .zip(b)
                .map(|(row, bias)| row.iter().zip(a).fold(*bias, |s, (wi, ai)| s + wi * ai)),
        );
    }

    /// Mean squared error over samples and outputs.
    pub fn mse(&self, data: &Dataset) -> Result<f64> {
        data.check(self.layout)?;
        let mut sum = 0.0;
        for (x, t) in data.inputs.iter().zip(&data.targets) {
            let y = self.forward(x)?;
            sum += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(sum / (data.len() * self.layout.output_dim) as f64)
    }

    /// MSE loss and its gradient with respect to [`Mlp::params`], by reverse-mode
    /// differentiation.
    pub fn loss_and_gradients(&self, data: &Dataset) -> Result<(f64, Vec<f64>)> {
        self.loss_and_gradients_on(data, None)
    }

    pub(crate) fn loss_and_gradients_on(
        &self,
        data: &Dataset,
        subset: Option<&[usize]>,
    ) -> Result<(f64, Vec<f64>)> {
        data.check(self.layout)?;
        let count = subset.map_or(data.len(), <[usize]>::len);
        if count == 0 {
            return Err(Error::Config("loss over an empty batch".into()));
        }
        let nl = self.n_layers();
        let scale = 1.0 / (count * self.layout.output_dim) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut acts: Vec<Vec<f64>> = self.dims.iter().map(|&d| Vec::with_capacity(d)).collect();
        let mut delta = Vec::new();
        let mut prev_delta = Vec::new();
        let mut loss = 0.0;

        for s in 0..count {
            let idx = subset.map_or(s, |sub| sub[s]);
            let (x, t) = (&data.inputs[idx], &data.targets[idx]);
            acts[0].clear();
            acts[0].extend_from_slice(x);
            for k in 0..nl {
                let (head, tail) = acts.split_at_mut(k + 1);
                self.affine(k, &head[k], &mut tail[0]);
                if k + 1 < nl {
                    tail[0].iter_mut().for_each(|v| *v = v.tanh());
                }
            }
            delta.clear();
            for (y, target) in acts[nl].iter().zip(t) {
                let r = y - target;
                loss += r * r;
                delta.push(2.0 * r * scale);
            }
            for k in (0..nl).rev() {
                let fan_in = self.dims[k];
                let (gw, gb) =
                    grad[self.offsets[k]..self.offsets[k + 1]].split_at_mut(fan_in * self.dims[k + 1]);
                let a_in = &acts[k];
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                    for (g, &ai) in row.iter_mut().zip(a_in) {
                        *g += d * ai;
                    }
                }
                if k > 0 {
                    let (w, _) = self.layer(k);
                    prev_delta.clear();
                    prev_delta.resize(fan_in, 0.0);
                    for (o, &d) in delta.iter().enumerate() {
                        let row = &w[o * fan_in..(o + 1) * fan_in];
                        for (pd, &wi) in prev_delta.iter_mut().zip(row) {
                            *pd += wi * d;
                        }
                    }
                    for (pd, &ai) in prev_delta.iter_mut().zip(a_in) {
                        *pd *= 1.0 - ai * ai;
                    }
                    std::mem::swap(&mut delta, &mut prev_delta);
                }
            }
        }
        Ok((loss * scale, grad))
    }
}

/// Input/target pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::dim("dataset targets", inputs.len(), targets.len()));
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn check(&self, layout: MlpLayout) -> Result<()> {
        if let Some(x) = self.inputs.iter().find(|x| x.len() != layout.input_dim) {
            return Err(Error::dim("dataset input", layout.input_dim, x.len()));
        }
        if let Some(t) = self.targets.iter().find(|t| t.len() != layout.output_dim) {
            return Err(Error::dim("dataset target", layout.output_dim, t.len()));
        }
        Ok(())
    }
}

/// Finite-difference formula used by [`grad_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stencil {
    /// `(f(x+h) − f(x−h)) / 2h`, error `O(h²)`.
    Central2,
    /// `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`, error `O(h⁴)`.
    Central4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub stencil: Stencil,
    pub step: f64,
    /// Components smaller than `relative_floor · max_i |g_i|` are judged
    /// against that floor instead of their own size.
    pub relative_floor: f64,
}

impl Default for GradCheckConfig {
    /// Fourth-order stencil with `h = 2e-3`, which balances truncation
    /// (`~h⁴`) against rounding (`~ε·loss/h`) for losses of order one, and
    /// a floor of `1e-6` of the largest component.
    fn default() -> Self {
        GradCheckConfig {
            stencil: Stencil::Central4,
            step: 2e-3,
            relative_floor: 1e-6,
        }
    }
}

/// Backprop against finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    /// `max_i |g_i − f_i| / max(|g_i|, |f_i|, floor)`; 0/0 counts as 0.
    pub max_relative: f64,
    /// The same without the floor.
    pub max_relative_unfloored: f64,
    pub max_absolute: f64,
    /// Largest backprop component.
    pub max_gradient: f64,
    pub worst_param: usize,
}

/// Compares every backprop gradient component with a finite-difference
/// estimate of the MSE on `data`.
///
/// In double precision the difference quotient carries a rounding error of
/// roughly `ε·loss/h`, around `1e-13` here, so components near `1e-8` (deep
/// layers of a tanh stack produce some) cannot be resolved to a relative
/// `1e-6` by any step size. The floor keeps such components from dominating
/// the maximum; the unfloored value is reported alongside.
pub fn grad_check(mlp: &Mlp, data: &Dataset, cfg: &GradCheckConfig) -> Result<GradCheck> {
    if !(cfg.step > 0.0 && cfg.step.is_finite() && cfg.relative_floor >= 0.0) {
        return Err(Error::Config(format!("invalid gradient check settings {cfg:?}")));
    }
    let (_, analytic) = mlp.loss_and_gradients(data)?;
    let max_gradient = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = cfg.relative_floor * max_gradient;
    let mut probe = mlp.clone();
    let mut out = GradCheck {
        max_relative: 0.0,
        max_relative_unfloored: 0.0,
        max_absolute: 0.0,
        max_gradient,
        worst_param: 0,
    };
    let h = cfg.step;
    for i in 0..analytic.len() {
        let orig = probe.params[i];
        let mut at = |offset: f64| -> Result<f64> {
            probe.params[i] = orig + offset;
            probe.mse(data)
        };
        let numeric = match cfg.stencil {
            Stencil::Central2 => (at(h)? - at(-h)?) / (2.0 * h),
            Stencil::Central4 => (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h),
        };
        probe.params[i] = orig;
        let diff = (analytic[i] - numeric).abs();
        let size = analytic[i].abs().max(numeric.abs());
        let (rel, rel_raw) = if diff == 0.0 {
            (0.0, 0.0)
        } else {
            (diff / size.max(floor), diff / size)
        };
        out.max_absolute = out.max_absolute.max(diff);
        out.max_relative_unfloored = out.max_relative_unfloored.max(rel_raw);
        if rel > out.max_relative {
            out.max_relative = rel;
            out.worst_param = i;
        }
    }
    Ok(out)
}
