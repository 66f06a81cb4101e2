//! Bipartite graph convolution policy with hand-written backpropagation.
//!
//! Layout: raw features are projected to `embed` dims, one variable to
//! constraint pass (`g1`, `f1`), one constraint to variable pass (`g2`, `f2`),
//! mean pooling of variable embeddings per vehicle, concatenation with the
//! projected vehicle features and a final MLP `f3` with a sigmoid.

use std::path::Path;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BipartiteState, Edge, CONSTRAINT_DIM, VARIABLE_DIM, VEHICLE_DIM};

pub const FORMAT_VERSION: u32 = 1;
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("layer {layer}: expected {expected} input features, state has {found}")]
    Shape { layer: &'static str, expected: usize, found: usize },
    #[error("weights file version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("weights were trained for raw dims {found:?}, featurizer produces {expected:?}")]
    Incompatible { expected: [usize; 3], found: [usize; 3] },
    #[error("tensor {name}: stored shape {found:?} does not match {expected:?}")]
    TensorShape { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("cannot parse weights: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub embed: usize,
    pub hidden: usize,
}

impl Default for PolicyDims {
    fn default() -> Self {
        Self { embed: 64, hidden: 128 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `in x out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs) }
    }

    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-a..a));
        Self { weight, bias: Array1::zeros(outputs) }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients into `g`; returns the input gradient
    /// when asked for.
    fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, g: &mut Linear, want_input: bool) -> Option<Array2<f64>> {
        g.weight += &x.t().dot(dy);
        g.bias += &dy.sum_axis(Axis(0));
        want_input.then(|| dy.dot(&self.weight.t()))
    }
}

/// One hidden ReLU layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

struct MlpCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

impl Mlp {
    fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self { hidden: Linear::zeros(inputs, hidden), output: Linear::zeros(hidden, outputs) }
    }

    fn glorot(inputs: usize, hidden: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self { hidden: Linear::glorot(inputs, hidden, rng), output: Linear::glorot(hidden, outputs, rng) }
    }

    fn forward(&self, x: Array2<f64>) -> (Array2<f64>, MlpCache) {
        let pre = self.hidden.forward(&x);
        let act = pre.mapv(|v| v.max(0.0));
        let out = self.output.forward(&act);
        (out, MlpCache { input: x, pre, act })
    }

    fn backward(&self, cache: &MlpCache, dy: &Array2<f64>, g: &mut Mlp) -> Array2<f64> {
        let mut dh = self.output.backward(&cache.act, dy, &mut g.output, true).unwrap();
        dh.zip_mut_with(&cache.pre, |d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });
        self.hidden.backward(&cache.input, &dh, &mut g.hidden, true).unwrap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub dims: PolicyDims,
    pub proj_c: Linear,
    pub proj_v: Linear,
    pub proj_w: Linear,
    pub g1: Mlp,
    pub f1: Mlp,
    pub g2: Mlp,
    pub f2: Mlp,
    pub f3: Mlp,
}

/// Same shape tree as the parameters.
pub type Gradients = PolicyParams;

impl PolicyParams {
    pub fn zeros(dims: PolicyDims) -> Self {
        let PolicyDims { embed: e, hidden: h } = dims;
        Self {
            dims,
            proj_c: Linear::zeros(CONSTRAINT_DIM, e),
            proj_v: Linear::zeros(VARIABLE_DIM, e),
            proj_w: Linear::zeros(VEHICLE_DIM, e),
            g1: Mlp::zeros(e, h, e),
            f1: Mlp::zeros(2 * e, h, e),
            g2: Mlp::zeros(e, h, e),
            f2: Mlp::zeros(2 * e, h, e),
            f3: Mlp::zeros(2 * e, h, 1),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(dims: PolicyDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let PolicyDims { embed: e, hidden: h } = dims;
        Self {
            dims,
            proj_c: Linear::glorot(CONSTRAINT_DIM, e, &mut rng),
            proj_v: Linear::glorot(VARIABLE_DIM, e, &mut rng),
            proj_w: Linear::glorot(VEHICLE_DIM, e, &mut rng),
            g1: Mlp::glorot(e, h, e, &mut rng),
            f1: Mlp::glorot(2 * e, h, e, &mut rng),
            g2: Mlp::glorot(e, h, e, &mut rng),
            f2: Mlp::glorot(2 * e, h, e, &mut rng),
            f3: Mlp::glorot(2 * e, h, 1, &mut rng),
        }
    }

    pub fn raw_dims(&self) -> [usize; 3] {
        [self.proj_c.weight.nrows(), self.proj_v.weight.nrows(), self.proj_w.weight.nrows()]
    }

    fn linears(&self) -> [(&'static str, &Linear); 13] {
        [
            ("proj_c", &self.proj_c),
            ("proj_v", &self.proj_v),
            ("proj_w", &self.proj_w),
            ("g1.hidden", &self.g1.hidden),
            ("g1.output", &self.g1.output),
            ("f1.hidden", &self.f1.hidden),
            ("f1.output", &self.f1.output),
            ("g2.hidden", &self.g2.hidden),
            ("g2.output", &self.g2.output),
            ("f2.hidden", &self.f2.hidden),
            ("f2.output", &self.f2.output),
            ("f3.hidden", &self.f3.hidden),
            ("f3.output", &self.f3.output),
        ]
    }

    fn linears_mut(&mut self) -> [&mut Linear; 13] {
        [
            &mut self.proj_c,
            &mut self.proj_v,
            &mut self.proj_w,
            &mut self.g1.hidden,
            &mut self.g1.output,
            &mut self.f1.hidden,
            &mut self.f1.output,
            &mut self.g2.hidden,
            &mut self.g2.output,
            &mut self.f2.hidden,
            &mut self.f2.output,
            &mut self.f3.hidden,
            &mut self.f3.output,
        ]
    }

    /// Every weight and bias tensor, flattened, with a stable name.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        self.linears()
            .into_iter()
            .flat_map(|(name, l)| {
                [
                    (format!("{name}.weight"), l.weight.as_slice().expect("standard layout")),
                    (format!("{name}.bias"), l.bias.as_slice().expect("standard layout")),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.linears_mut()
            .into_iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &PolicyParams, scale: f64) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = WeightsFile {
            format_version: FORMAT_VERSION,
            raw_dims: self.raw_dims(),
            dims: self.dims,
            tensors: self
                .linears()
                .into_iter()
                .flat_map(|(name, l)| {
                    [
                        StoredTensor {
                            name: format!("{name}.weight"),
                            shape: l.weight.shape().to_vec(),
                            data: l.weight.iter().copied().collect(),
                        },
                        StoredTensor {
                            name: format!("{name}.bias"),
                            shape: l.bias.shape().to_vec(),
                            data: l.bias.to_vec(),
                        },
                    ]
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let file: WeightsFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(NnError::Version { found: file.format_version });
        }
        let expected = [CONSTRAINT_DIM, VARIABLE_DIM, VEHICLE_DIM];
        if file.raw_dims != expected {
            return Err(NnError::Incompatible { expected, found: file.raw_dims });
        }
        let mut params = Self::zeros(file.dims);
        let names: Vec<(String, Vec<usize>)> = params
            .linears()
            .into_iter()
            .flat_map(|(n, l)| {
                [
                    (format!("{n}.weight"), l.weight.shape().to_vec()),
                    (format!("{n}.bias"), l.bias.shape().to_vec()),
                ]
            })
            .collect();
        if file.tensors.len() != names.len() {
            return Err(NnError::TensorShape {
                name: "<tensor count>".into(),
                expected: vec![names.len()],
                found: vec![file.tensors.len()],
            });
        }
        for ((dst, (name, shape)), stored) in params.tensors_mut().into_iter().zip(&names).zip(&file.tensors) {
            if &stored.name != name || &stored.shape != shape || stored.data.len() != dst.len() {
                return Err(NnError::TensorShape {
                    name: stored.name.clone(),
                    expected: shape.clone(),
                    found: stored.shape.clone(),
                });
            }
            dst.copy_from_slice(&stored.data);
        }
        Ok(params)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    format_version: u32,
    raw_dims: [usize; 3],
    dims: PolicyDims,
    tensors: Vec<StoredTensor>,
}

fn matrix<const D: usize>(rows: &[[f64; D]]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), D), |(i, j)| rows[i][j])
}

/// `out[row] += coef * x[col]` over all edges.
fn gather_to_rows(edges: &[Edge], x: &Array2<f64>, rows: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, x.ncols()));
    for e in edges {
        out.row_mut(e.row).scaled_add(e.coef, &x.row(e.col));
    }
    out
}

/// `out[col] += coef * x[row]` over all edges.
fn gather_to_cols(edges: &[Edge], x: &Array2<f64>, cols: usize) -> Array2<f64> {
    let mut out = Array2::zeros((cols, x.ncols()));
    for e in edges {
        out.row_mut(e.col).scaled_add(e.coef, &x.row(e.row));
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct ForwardCache {
    xc: Array2<f64>,
    xv: Array2<f64>,
    xw: Array2<f64>,
    g1: MlpCache,
    f1: MlpCache,
    g2: MlpCache,
    f2: MlpCache,
    f3: MlpCache,
    logits: Vec<f64>,
}

fn check_dims(params: &PolicyParams) -> Result<(), NnError> {
    let checks = [
        ("proj_c", params.proj_c.weight.nrows(), CONSTRAINT_DIM),
        ("proj_v", params.proj_v.weight.nrows(), VARIABLE_DIM),
        ("proj_w", params.proj_w.weight.nrows(), VEHICLE_DIM),
    ];
    for (layer, expected, found) in checks {
        if expected != found {
            return Err(NnError::Shape { layer, expected, found });
        }
    }
    Ok(())
}

fn forward_cached(params: &PolicyParams, state: &BipartiteState) -> Result<ForwardCache, NnError> {
    check_dims(params)?;
    let e = params.dims.embed;
    let xc = matrix(&state.constraint_features);
    let xv = matrix(&state.variable_features);
    let xw = matrix(&state.vehicle_features);
    let c0 = params.proj_c.forward(&xc);
    let v0 = params.proj_v.forward(&xv);
    let w0 = params.proj_w.forward(&xw);

    let (gc, g1) = params.g1.forward(gather_to_rows(&state.edges, &v0, state.num_constraints()));
    let (c1, f1) = params.f1.forward(concatenate![Axis(1), c0, gc]);
    let (gv, g2) = params.g2.forward(gather_to_cols(&state.edges, &c1, state.num_variables()));
    let (v1, f2) = params.f2.forward(concatenate![Axis(1), v0, gv]);

    let mut pooled = Array2::zeros((state.num_vehicles(), e));
    for (h, members) in state.vehicle_membership.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut row = pooled.row_mut(h);
        for &j in members {
            row += &v1.row(j);
        }
        row /= members.len() as f64;
    }
    let (out, f3) = params.f3.forward(concatenate![Axis(1), pooled, w0]);
    let logits = out.column(0).to_vec();
    Ok(ForwardCache { xc, xv, xw, g1, f1, g2, f2, f3, logits })
}

/// Selection probability per vehicle node, in the state's vehicle order.
pub fn policy_forward(params: &PolicyParams, state: &BipartiteState) -> Result<Vec<f64>, NnError> {
    Ok(forward_cached(params, state)?.logits.into_iter().map(sigmoid).collect())
}

/// Which ReLU units are active, over every hidden layer and node. Two
/// parameter settings with the same pattern lie on one linear piece of the
/// network, which is what finite-difference checks need.
pub fn relu_pattern(params: &PolicyParams, state: &BipartiteState) -> Result<Vec<bool>, NnError> {
    let cache = forward_cached(params, state)?;
    Ok([&cache.g1, &cache.f1, &cache.g2, &cache.f2, &cache.f3]
        .iter()
        .flat_map(|c| c.pre.iter().map(|&p| p > 0.0))
        .collect())
}

/// Mean binary cross-entropy with probabilities clamped to `[eps, 1 - eps]`.
pub fn bce_loss(p: &[f64], y: &[f64]) -> f64 {
    assert_eq!(p.len(), y.len(), "prediction and label lengths differ");
    if p.is_empty() {
        return 0.0;
    }
    p.iter().zip(y).map(|(&p, &y)| bce_term(p, y)).sum::<f64>() / p.len() as f64
}

fn bce_term(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Gradient of `scale * sum_h bce(P_h, y_h)`, accumulated into `grads`.
/// Returns the unscaled sum of the loss terms.
pub fn accumulate_gradients(
    params: &PolicyParams,
    state: &BipartiteState,
    y: &[f64],
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64, NnError> {
    let cache = forward_cached(params, state)?;
    if y.len() != cache.logits.len() {
        return Err(NnError::Shape { layer: "labels", expected: cache.logits.len(), found: y.len() });
    }
    let e = params.dims.embed;
    let mut loss = 0.0;
    let dlogits: Vec<f64> = cache
        .logits
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            let p = sigmoid(z);
            loss += bce_term(p, t);
            // the clamp is flat outside [eps, 1 - eps]
            if (BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
                scale * (p - t)
            } else {
                0.0
            }
        })
        .collect();
    let dout = Array2::from_shape_vec((dlogits.len(), 1), dlogits).expect("column");

    let dh = params.f3.backward(&cache.f3, &dout, &mut grads.f3);
    let dpooled = dh.slice(s![.., ..e]);
    let dw0 = dh.slice(s![.., e..]).to_owned();
    params.proj_w.backward(&cache.xw, &dw0, &mut grads.proj_w, false);

    let mut dv1 = Array2::zeros((state.num_variables(), e));
    for (h, members) in state.vehicle_membership.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let w = 1.0 / members.len() as f64;
        for &j in members {
            dv1.row_mut(j).scaled_add(w, &dpooled.row(h));
        }
    }
    let dcat_v = params.f2.backward(&cache.f2, &dv1, &mut grads.f2);
    let mut dv0 = dcat_v.slice(s![.., ..e]).to_owned();
    let dgv = dcat_v.slice(s![.., e..]).to_owned();
    let dmv = params.g2.backward(&cache.g2, &dgv, &mut grads.g2);
    let dc1 = gather_to_rows(&state.edges, &dmv, state.num_constraints());

    let dcat_c = params.f1.backward(&cache.f1, &dc1, &mut grads.f1);
    let dc0 = dcat_c.slice(s![.., ..e]).to_owned();
    let dgc = dcat_c.slice(s![.., e..]).to_owned();
    let dmc = params.g1.backward(&cache.g1, &dgc, &mut grads.g1);
    dv0 += &gather_to_cols(&state.edges, &dmc, state.num_variables());

    params.proj_c.backward(&cache.xc, &dc0, &mut grads.proj_c, false);
    params.proj_v.backward(&cache.xv, &dv0, &mut grads.proj_v, false);
    Ok(loss)
}

/// Mean loss over the vehicle nodes of one state and its exact gradient.
pub fn backward(params: &PolicyParams, state: &BipartiteState, y: &[f64]) -> Result<(f64, Gradients), NnError> {
    let mut grads = PolicyParams::zeros(params.dims);
    let m = state.num_vehicles().max(1) as f64;
    let sum = accumulate_gradients(params, state, y, 1.0 / m, &mut grads)?;
    Ok((sum / m, grads))
}

/// `theta -= lr * grad`
pub fn sgd_step(params: &mut PolicyParams, grads: &Gradients, lr: f64) {
    params.add_scaled(grads, -lr);
}
