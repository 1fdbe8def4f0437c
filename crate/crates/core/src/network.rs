//! Fully connected network mapping a feature vector to `N` hypotheses of
//! dimension `n`, with hand-written backpropagation of the WTA loss.
//!
//! The output layer is linear with `N·n` units, read row-major as `N` points.
//! All parameters live in one flat buffer; layer `l` stores its
//! `outputs × inputs` weight matrix (row-major) followed by its bias.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, invalid, Error, Result};
use crate::metrics::{sq_unchecked, WtaMetric};
use crate::points::{HypothesisSet, PointSet};
use crate::rng;
use crate::wta::{accumulate_gradients, check_epsilon, nearest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub n_hypotheses: usize,
    pub label_dim: usize,
}

impl NetworkSpec {
    pub fn new(
        input_dim: usize,
        hidden: Vec<usize>,
        activation: Activation,
        n_hypotheses: usize,
        label_dim: usize,
    ) -> Result<Self> {
        let spec = NetworkSpec {
            input_dim,
            hidden,
            activation,
            n_hypotheses,
            label_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_hypotheses == 0 || self.label_dim == 0 {
            return Err(invalid("input_dim, n_hypotheses and label_dim must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden layer widths must be at least 1"));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.n_hypotheses * self.label_dim
    }

    /// `(inputs, outputs)` per layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden);
        widths.push(self.output_dim());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| (i + 1) * o).sum()
    }
}

/// Read-only view of one layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParams {
    spec: NetworkSpec,
    values: Vec<f64>,
}

/// Per-sample outcome of [`NetworkParams::backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct Backward {
    /// Plain WTA loss (distance to the winner).
    pub wta_loss: f64,
    /// `Σ_i w_i d(y_i, y)` under the relaxed weights.
    pub relaxed_loss: f64,
    pub winner: usize,
    pub grads: NetworkParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct SampleLoss {
    pub wta_loss: f64,
    pub relaxed_loss: f64,
    pub winner: usize,
}

/// Scratch buffers reused across samples.
#[derive(Clone, Debug)]
pub(crate) struct Workspace {
    /// `(offset, inputs, outputs)` per layer in the flat buffer.
    layout: Vec<(usize, usize, usize)>,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    weights: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(spec: &NetworkSpec) -> Self {
        let shapes = spec.layer_shapes();
        let mut layout = Vec::with_capacity(shapes.len());
        let mut offset = 0;
        for &(i, o) in &shapes {
            layout.push((offset, i, o));
            offset += (i + 1) * o;
        }
        let mut acts = vec![vec![0.0; spec.input_dim]];
        acts.extend(shapes.iter().map(|&(_, o)| vec![0.0; o]));
        let widest = shapes.iter().map(|&(i, o)| i.max(o)).max().unwrap_or(1);
        Workspace {
            layout,
            acts,
            delta: vec![0.0; widest],
            delta_prev: vec![0.0; widest],
            weights: vec![0.0; spec.n_hypotheses],
        }
    }

    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (a4, a_tail) = a.split_at(a.len() & !3);
    let (b4, b_tail) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = a_tail.iter().zip(b_tail).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams> {
    let mut params = NetworkParams::zeros(spec)?;
    let mut r = rng::stream(seed, "network-init");
    let mut offset = 0;
    for (inputs, outputs) in spec.layer_shapes() {
        let bound = 1.0 / libm::sqrt(inputs as f64);
        for w in &mut params.values[offset..offset + inputs * outputs] {
            *w = r.random_range(-bound..bound);
        }
        offset += (inputs + 1) * outputs;
    }
    Ok(params)
}

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        Ok(NetworkParams {
            spec: spec.clone(),
            values: vec![0.0; spec.param_count()],
        })
    }

    /// Assembles parameters from per-layer `(weights, bias)` pairs.
    pub fn from_layers(spec: &NetworkSpec, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        check_dim(shapes.len(), layers.len())?;
        let mut values = Vec::with_capacity(spec.param_count());
        for (&(inputs, outputs), (w, b)) in shapes.iter().zip(layers) {
            check_dim(inputs * outputs, w.len())?;
            check_dim(outputs, b.len())?;
            values.extend_from_slice(w);
            values.extend_from_slice(b);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("network parameters"));
        }
        Ok(NetworkParams {
            spec: spec.clone(),
            values,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layers(&self) -> Vec<LayerView<'_>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (inputs, outputs) in self.spec.layer_shapes() {
            let w_end = offset + inputs * outputs;
            out.push(LayerView {
                inputs,
                outputs,
                weights: &self.values[offset..w_end],
                bias: &self.values[w_end..w_end + outputs],
            });
            offset = w_end + outputs;
        }
        out
    }

    /// Mutable `(weights, bias)` slices of layer `l`.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let mut offset = 0;
        for (i, (inputs, outputs)) in self.spec.layer_shapes().into_iter().enumerate() {
            let w_end = offset + inputs * outputs;
            if i == l {
                let (w, b) = self.values[offset..w_end + outputs].split_at_mut(inputs * outputs);
                return (w, b);
            }
            offset = w_end + outputs;
        }
        (&mut [], &mut [])
    }

    pub fn forward(&self, x: &[f64]) -> Result<HypothesisSet> {
        let mut ws = Workspace::new(&self.spec);
        self.forward_into(&mut ws, x)?;
        Ok(PointSet::from_raw(self.spec.label_dim, ws.output().to_vec()))
    }

    pub(crate) fn forward_into(&self, ws: &mut Workspace, x: &[f64]) -> Result<()> {
        check_dim(self.spec.input_dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("features"));
        }
        ws.acts[0].copy_from_slice(x);
        let act = self.spec.activation;
        let last = ws.layout.len() - 1;
        for (l, &(offset, inputs, outputs)) in ws.layout.iter().enumerate() {
            let weights = &self.values[offset..offset + inputs * outputs];
            let bias = &self.values[offset + inputs * outputs..offset + (inputs + 1) * outputs];
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let input = &head[l];
            let output = &mut tail[0];
            for ((o, row), b) in output.iter_mut().zip(weights.chunks_exact(inputs)).zip(bias) {
                let z = b + dot(row, input);
                *o = if l == last { z } else { act.apply(z) };
            }
            if output.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
        }
        Ok(())
    }

    /// Loss and parameter gradient for one `(x, y)` pair, with the WTA winner
    /// held at its forward-pass value.
    pub fn backward(&self, x: &[f64], y: &[f64], metric: WtaMetric, epsilon: f64) -> Result<Backward> {
        metric.validate()?;
        check_epsilon(epsilon)?;
        let mut ws = Workspace::new(&self.spec);
        let mut grads = NetworkParams::zeros(&self.spec)?;
        let s = self.accumulate_backward(&mut ws, x, y, metric, epsilon, &mut grads.values)?;
        Ok(Backward {
            wta_loss: s.wta_loss,
            relaxed_loss: s.relaxed_loss,
            winner: s.winner,
            grads,
        })
    }

    /// Adds this sample's gradient into `grads`. Metric and epsilon are
    /// assumed validated.
    pub(crate) fn accumulate_backward(
        &self,
        ws: &mut Workspace,
        x: &[f64],
        y: &[f64],
        metric: WtaMetric,
        epsilon: f64,
        grads: &mut [f64],
    ) -> Result<SampleLoss> {
        let n = self.spec.label_dim;
        check_dim(n, y.len())?;
        self.forward_into(ws, x)?;
        let last = ws.layout.len() - 1;
        let out_dim = self.spec.output_dim();

        let out = &ws.acts[last + 1];
        let (winner, sq) = nearest(out, n, y);
        let wta_loss = metric.from_squared_norm(sq);
        let n_hyp = self.spec.n_hypotheses;
        if n_hyp == 1 {
            ws.weights[0] = 1.0;
        } else {
            ws.weights.iter_mut().for_each(|w| *w = epsilon / (n_hyp - 1) as f64);
            ws.weights[winner] = 1.0 - epsilon;
        }
        let relaxed_loss = if epsilon == 0.0 || n_hyp == 1 {
            wta_loss
        } else {
            out.chunks_exact(n)
                .zip(&ws.weights)
                .map(|(h, w)| w * metric.from_squared_norm(sq_unchecked(h, y)))
                .sum()
        };
        ws.delta[..out_dim].iter_mut().for_each(|d| *d = 0.0);
        accumulate_gradients(out, n, y, metric, &ws.weights, &mut ws.delta[..out_dim]);

        let act = self.spec.activation;
        for l in (0..=last).rev() {
            let (offset, inputs, outputs) = ws.layout[l];
            let input = &ws.acts[l];
            let (gw, rest) = grads[offset..].split_at_mut(inputs * outputs);
            let gb = &mut rest[..outputs];
            let delta = &ws.delta[..outputs];
            for ((row, gb_o), &d) in gw.chunks_exact_mut(inputs).zip(gb.iter_mut()).zip(delta) {
                if d == 0.0 {
                    continue;
                }
                *gb_o += d;
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.values[offset..offset + inputs * outputs];
            let prev = &mut ws.delta_prev[..inputs];
            prev.iter_mut().for_each(|p| *p = 0.0);
            for (row, &d) in weights.chunks_exact(inputs).zip(delta) {
                if d == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= act.slope_from_output(*a);
            }
            if prev.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l });
            }
            core::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
        Ok(SampleLoss {
            wta_loss,
            relaxed_loss,
            winner,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(hidden: Vec<usize>, n: usize, dim: usize) -> NetworkSpec {
        NetworkSpec::new(2, hidden, Activation::Tanh, n, dim).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let s = spec(vec![8, 8], 3, 2);
        assert_eq!(init_network(&s, 11).unwrap(), init_network(&s, 11).unwrap());
        assert_ne!(init_network(&s, 11).unwrap(), init_network(&s, 12).unwrap());
    }

    #[test]
    fn init_variance_follows_fan_in() {
        let s = NetworkSpec::new(100, vec![100], Activation::Tanh, 1, 1).unwrap();
        let p = init_network(&s, 3).unwrap();
        let w = p.layers()[0].weights;
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        let expected = 1.0 / 300.0;
        assert!((var - expected).abs() < 0.2 * expected, "var {var}");
        assert!(p.layers()[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_weights_emit_output_bias() {
        let s = spec(vec![4], 3, 2);
        let mut p = NetworkParams::zeros(&s).unwrap();
        let b: Vec<f64> = (0..6).map(|i| i as f64 * 0.5 - 1.0).collect();
        p.layer_mut(1).1.copy_from_slice(&b);
        for x in [[0.0, 0.0], [3.0, -7.0]] {
            assert_eq!(p.forward(&x).unwrap().as_flat(), b.as_slice());
        }
    }

    #[test]
    fn single_linear_layer_is_affine() {
        // W = [[1, 0], [0, 2], [1, 1]], b = [0.5, -1, 0]; N = 3, n = 1.
        let s = spec(vec![], 3, 1);
        let p = NetworkParams::from_layers(
            &s,
            &[(vec![1.0, 0.0, 0.0, 2.0, 1.0, 1.0], vec![0.5, -1.0, 0.0])],
        )
        .unwrap();
        let h = p.forward(&[2.0, 3.0]).unwrap();
        assert_eq!(h.as_flat(), &[2.5, 5.0, 5.0]);
    }

    #[test]
    fn output_shape_contract() {
        let s = spec(vec![16], 100, 2);
        let h = init_network(&s, 0).unwrap().forward(&[0.1, 0.2]).unwrap();
        assert_eq!((h.len(), h.dim()), (100, 2));
        assert!(init_network(&s, 0).unwrap().forward(&[0.1]).is_err());
    }

    #[test]
    fn one_hot_routing_leaves_other_output_rows_untouched() {
        let s = spec(vec![5], 3, 2);
        let p = init_network(&s, 5).unwrap();
        let b = p.backward(&[0.3, -0.2], &[1.0, 1.0], WtaMetric::SquaredEuclidean, 0.0).unwrap();
        let out = b.grads.layers()[1];
        for o in 0..6 {
            let row_nonzero = out.weights[o * 5..(o + 1) * 5].iter().any(|&g| g != 0.0);
            if o / 2 != b.winner {
                assert!(!row_nonzero && out.bias[o] == 0.0);
            }
        }
    }
}
