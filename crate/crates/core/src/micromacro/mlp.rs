//! Fully connected ReLU network with one linear output, trained by MSE.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;
use crate::types::{rng_from_seed, TaskId};

/// Hidden layer widths for each task's fitness model.
pub fn default_hidden_layers(task: TaskId) -> Vec<usize> {
    match task {
        TaskId::C => vec![100; 3],
        _ => vec![30; 3],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MicroMacroModel {
    layer_sizes: Vec<usize>,
    /// `weights[l]` has shape `(layer_sizes[l + 1], layer_sizes[l])`.
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
}

/// Parameter gradients, shaped like the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MicroMacroModel {
    /// He-uniform initialization, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
    pub fn new(n_inputs: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(n_inputs, hidden)?;
        let mut rng = rng_from_seed(seed);
        for w in &mut model.weights {
            let bound = (6.0 / w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(model)
    }

    pub fn zeros(n_inputs: usize, hidden: &[usize]) -> Result<Self> {
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        if sizes.contains(&0) {
            return Err(Error::Shape(format!("layer sizes must be positive, got {sizes:?}")));
        }
        let weights = sizes.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Self {
            layer_sizes: sizes,
            weights,
            biases,
        })
    }

    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape("need one bias vector per weight matrix".into()));
        }
        let mut sizes = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != sizes[l] || w.nrows() != b.len() {
                return Err(Error::Shape(format!("layer {l} does not chain")));
            }
            sizes.push(w.nrows());
        }
        if sizes.last() != Some(&1) {
            return Err(Error::Shape("the output layer must have one unit".into()));
        }
        if weights.iter().any(|w| w.iter().any(|v| !v.is_finite())) || biases.iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(Error::Shape("parameters must be finite".into()));
        }
        Ok(Self {
            layer_sizes: sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn output_bias_mut(&mut self) -> &mut f64 {
        &mut self.biases.last_mut().expect("output layer")[0]
    }

    /// Estimated global fitness for one state distribution.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.n_inputs() {
            return Err(Error::Shape(format!(
                "input has {} entries, model expects {}",
                input.len(),
                self.n_inputs()
            )));
        }
        let mut a = ArrayView1::from(input).to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = w.dot(&a) + b;
            if l < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a[0])
    }

    /// Predictions for every row of `inputs`.
    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Array1<f64>> {
        if inputs.ncols() != self.n_inputs() {
            return Err(Error::Shape(format!(
                "inputs have {} columns, model expects {}",
                inputs.ncols(),
                self.n_inputs()
            )));
        }
        let (_, acts) = self.forward_batch(inputs);
        Ok(acts.last().expect("output").column(0).to_owned())
    }

    /// Pre-activations and activations of every layer (activations[0] = input).
    fn forward_batch(&self, x: &Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let last = self.weights.len() - 1;
        let mut zs = Vec::with_capacity(self.weights.len());
        let mut acts = vec![x.clone()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].dot(&w.t()) + b;
            let a = if l < last { z.mapv(|v| v.max(0.0)) } else { z.clone() };
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }

    /// Mean squared error over the batch and its gradient.
    pub fn loss_and_gradients(&self, x: &Array2<f64>, y: &[f64]) -> Result<(f64, Gradients)> {
        if x.nrows() != y.len() || x.nrows() == 0 {
            return Err(Error::Shape(format!("{} inputs for {} targets", x.nrows(), y.len())));
        }
        if x.ncols() != self.n_inputs() {
            return Err(Error::Shape(format!("inputs have {} columns, model expects {}", x.ncols(), self.n_inputs())));
        }
        let batch = x.nrows() as f64;
        let (zs, acts) = self.forward_batch(x);
        let out = acts.last().expect("output").column(0).to_owned();
        let err = &out - &ArrayView1::from(y);
        let loss = err.mapv(|e| e * e).sum() / batch;

        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        let mut delta = (err * (2.0 / batch)).insert_axis(Axis(1));
        for l in (0..layers).rev() {
            gw.push(delta.t().dot(&acts[l]));
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                back.zip_mut_with(&zs[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        gw.reverse();
        gb.reverse();
        Ok((loss, Gradients { weights: gw, biases: gb }))
    }

    /// All parameters, weights first (row-major per layer) then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for w in &self.weights {
            out.extend(w.iter().copied());
        }
        for b in &self.biases {
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!("{} parameters for a {}-parameter model", params.len(), self.n_params())));
        }
        let mut it = params.iter().copied();
        for w in &mut self.weights {
            w.iter_mut().for_each(|v| *v = it.next().expect("counted"));
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = it.next().expect("counted"));
        }
        Ok(())
    }

    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for &s in &self.layer_sizes {
            h.update((s as u64).to_le_bytes());
        }
        for v in self.params_flat() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            layer_sizes: self.layer_sizes.clone(),
            activation: "relu".into(),
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
            biases: self.biases.iter().map(|b| b.to_vec()).collect(),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.to_document())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let doc: ModelDocument = io::read_json(path)?;
        doc.into_model().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// On-disk form: layer sizes plus row-major `(out, in)` weight arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ModelDocument {
    pub fn into_model(self) -> Result<MicroMacroModel> {
        if self.activation != "relu" {
            return Err(Error::Shape(format!("unsupported activation `{}`", self.activation)));
        }
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 || self.weights.len() != sizes.len() - 1 {
            return Err(Error::Shape("layer sizes do not match the weight arrays".into()));
        }
        let mut weights = Vec::new();
        for (l, flat) in self.weights.into_iter().enumerate() {
            let w = Array2::from_shape_vec((sizes[l + 1], sizes[l]), flat)
                .map_err(|_| Error::Shape(format!("layer {l} weights have the wrong length")))?;
            weights.push(w);
        }
        let biases = self.biases.into_iter().map(Array1::from).collect();
        MicroMacroModel::from_parts(weights, biases)
    }
}

/// Largest relative difference between backpropagated gradients and central
/// finite differences of the loss on one sample, where the relative error
/// of a pair is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(model: &MicroMacroModel, input: &[f64], target: f64, h: f64) -> Result<f64> {
    let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
        .map_err(|_| Error::Shape("input is not a row".into()))?;
    let y = [target];
    let (_, grads) = model.loss_and_gradients(&x, &y)?;
    let mut analytic = Vec::with_capacity(model.n_params());
    for w in &grads.weights {
        analytic.extend(w.iter().copied());
    }
    for b in &grads.biases {
        analytic.extend(b.iter().copied());
    }
    let base = model.params_flat();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.set_params_flat(&p)?;
        let (up, _) = probe.loss_and_gradients(&x, &y)?;
        p[k] = base[k] - h;
        probe.set_params_flat(&p)?;
        let (down, _) = probe.loss_and_gradients(&x, &y)?;
        let numeric = (up - down) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}
