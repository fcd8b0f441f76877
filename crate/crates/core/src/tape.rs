//! Reverse-mode automatic differentiation over dense row-major matrices.
//!
//! Every value on the tape is a 2-D `f64` matrix: token sequences are
//! `(tokens, width)`, vectors are `(1, width)` and scalars are `(1, 1)`.
//! Nodes are appended in evaluation order, so walking the tape backwards is
//! a valid topological order for the backward pass.

use std::collections::BTreeMap;

use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named trainable parameters in registration order.
#[derive(Debug, Clone)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    index: BTreeMap<String, usize>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            index: BTreeMap::new(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "parameter {name} registered twice"
        );
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        ParamId(id)
    }

    /// Uniform Glorot initialisation.
    pub fn glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        let rng = &mut self.rng;
        let value = Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng));
        self.add(name, value)
    }

    pub fn normal(&mut self, name: impl Into<String>, rows: usize, cols: usize, std: f64) -> ParamId {
        let dist = Normal::new(0.0, std).expect("positive std");
        let rng = &mut self.rng;
        let value = Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng));
        self.add(name, value)
    }

    pub fn zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Array2::zeros((rows, cols)))
    }

    pub fn ones(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Array2::ones((rows, cols)))
    }

    /// Seed of the initialisation stream.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    /// Replace every value with the one stored under the same name in `other`.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        for (i, name) in self.names.iter().enumerate() {
            let src = other
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?;
            let src = other.get(src);
            if src.dim() != self.values[i].dim() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: shape {:?} vs expected {:?}",
                    src.dim(),
                    self.values[i].dim()
                )));
            }
            self.values[i].assign(src);
        }
        Ok(())
    }
}

/// Gradients keyed by parameter id.
#[derive(Debug, Clone)]
pub struct Grads {
    slots: Vec<Option<Array2<f64>>>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            slots: vec![None; store.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.slots.get(id.0).and_then(Option::as_ref)
    }

    pub fn accumulate(&mut self, other: &Grads) {
        for (dst, src) in self.slots.iter_mut().zip(&other.slots) {
            if let Some(src) = src {
                match dst {
                    Some(d) => *d += src,
                    None => *dst = Some(src.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.slots.iter_mut().flatten() {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_size(n: usize, kernel: usize, stride: usize, padding: usize) -> usize {
        (n + 2 * padding - kernel) / stride + 1
    }

    pub fn out_h(&self) -> usize {
        Self::out_size(self.in_h, self.kernel, self.stride, self.padding)
    }

    pub fn out_w(&self) -> usize {
        Self::out_size(self.in_w, self.kernel, self.stride, self.padding)
    }
}

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Gelu(Var),
    Tanh(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    MeanRows(Var),
    SumAll(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    Gather(Var, Vec<usize>),
    Dropout(Var, Array2<f64>),
    Conv2d {
        x: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeometry,
        cols: Array2<f64>,
    },
    Reshape(Var),
    CrossEntropy(Var, usize, Array2<f64>),
}

struct Node {
    value: Option<Array2<f64>>,
    op: Op,
}

/// A single forward evaluation recorded for differentiation.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    train: bool,
    rng: ChaCha8Rng,
}

pub const LN_EPS: f64 = 1e-5;

impl<'p> Graph<'p> {
    /// Evaluation-mode graph: dropout is the identity.
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            train: false,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// Training-mode graph with an explicit dropout stream.
    pub fn training(store: &'p ParamStore, dropout_seed: u64) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            train: true,
            rng: ChaCha8Rng::seed_from_u64(dropout_seed),
        }
    }

    pub fn is_training(&self) -> bool {
        self.train
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(val), _) => val,
            (None, Op::Param(id)) => self.store.get(*id),
            (None, _) => unreachable!("non-param node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.dim(), (1, 1));
        val[[0, 0]]
    }

    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(&self.value(b).t());
        self.push(out, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    /// Adds the `(1, n)` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (_, n) = self.shape(a);
        assert_eq!(self.shape(b), (1, n), "add_row: row shape mismatch");
        let out = self.value(a) + self.value(b);
        self.push(out, Op::AddRow(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul: shape mismatch");
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a) * factor;
        self.push(out, Op::Scale(a, factor))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .mapv(|v| 0.5 * v * (1.0 + erf(v / std::f64::consts::SQRT_2)));
        self.push(out, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for mut row in out.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalisation with affine `(1, n)` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (rows, n) = xv.dim();
        assert_eq!(self.shape(gamma), (1, n), "layer_norm: gamma shape");
        assert_eq!(self.shape(beta), (1, n), "layer_norm: beta shape");
        let mut xhat = Array2::zeros((rows, n));
        let mut inv_std = Vec::with_capacity(rows);
        for (r, row) in xv.rows().into_iter().enumerate() {
            let mean = row.sum() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            for (c, v) in row.iter().enumerate() {
                xhat[[r, c]] = (v - mean) * inv;
            }
        }
        let out = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Mean over the token axis, giving a `(1, n)` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("non-empty")
            .insert_axis(Axis(0));
        self.push(out, Op::MeanRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(out, Op::SumAll(a))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("concat_rows: width mismatch");
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(out, Op::SliceCols(a, start, len))
    }

    /// Row lookup into an embedding table.
    pub fn gather_rows(&mut self, table: Var, rows: &[usize]) -> Var {
        let tv = self.value(table);
        let mut out = Array2::zeros((rows.len(), tv.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&tv.row(r));
        }
        self.push(out, Op::Gather(table, rows.to_vec()))
    }

    /// Inverted dropout; the identity in evaluation mode or when `rate == 0`.
    pub fn dropout(&mut self, a: Var, rate: f64) -> Var {
        if !self.train || rate <= 0.0 {
            return a;
        }
        let keep = 1.0 - rate;
        let dim = self.shape(a);
        let rng = &mut self.rng;
        let mask = Array2::from_shape_simple_fn(dim, || {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let out = self.value(a) * &mask;
        self.push(out, Op::Dropout(a, mask))
    }

    /// 2-D convolution over a `(h·w, c_in)` grid stored row-major by pixel.
    /// `weight` is `(k·k·c_in, c_out)` and `bias` is `(1, c_out)`; the output
    /// is `(out_h·out_w, c_out)`.
    pub fn conv2d(&mut self, x: Var, weight: Var, bias: Var, geom: ConvGeometry) -> Var {
        let xv = self.value(x);
        let c_in = xv.ncols();
        assert_eq!(xv.nrows(), geom.in_h * geom.in_w, "conv2d: grid size");
        let k = geom.kernel;
        assert_eq!(self.value(weight).nrows(), k * k * c_in, "conv2d: weight rows");
        let (oh, ow) = (geom.out_h(), geom.out_w());
        let mut cols = Array2::zeros((oh * ow, k * k * c_in));
        for oy in 0..oh {
            for ox in 0..ow {
                let r = oy * ow + ox;
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = (oy * geom.stride + ky) as isize - geom.padding as isize;
                        let ix = (ox * geom.stride + kx) as isize - geom.padding as isize;
                        if iy < 0 || ix < 0 || iy >= geom.in_h as isize || ix >= geom.in_w as isize {
                            continue;
                        }
                        let src = iy as usize * geom.in_w + ix as usize;
                        let off = (ky * k + kx) * c_in;
                        cols.slice_mut(s![r, off..off + c_in]).assign(&xv.row(src));
                    }
                }
            }
        }
        let out = cols.dot(self.value(weight)) + self.value(bias);
        self.push(
            out,
            Op::Conv2d {
                x,
                weight,
                bias,
                geom,
                cols,
            },
        )
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let v = self.value(a);
        assert_eq!(v.len(), rows * cols, "reshape: element count");
        let flat: Vec<f64> = v.iter().copied().collect();
        let out = Array2::from_shape_vec((rows, cols), flat).expect("checked length");
        self.push(out, Op::Reshape(a))
    }

    /// Softmax cross-entropy of a `(1, C)` logit row against `label`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), 1, "cross_entropy expects a single row");
        assert!(label < lv.ncols(), "label out of range");
        let max = lv.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + lv.mapv(|v| (v - max).exp()).sum().ln();
        let probs = lv.mapv(|v| (v - lse).exp());
        let loss = lse - lv[[0, label]];
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy(logits, label, probs),
        )
    }

    /// Back-propagates from the scalar `loss` and returns parameter gradients.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out = Grads {
            slots: vec![None; self.store.len()],
        };

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.as_ref();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => match &mut out.slots[id.0] {
                    Some(existing) => *existing += &g,
                    slot @ None => *slot = Some(g),
                },
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(self.value(*b));
                    let gb = g.t().dot(self.value(*a));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::Relu(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |gv, &x| {
                        if x <= 0.0 {
                            *gv = 0.0
                        }
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::Gelu(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(self.value(*a), |gv, &x| *gv *= gelu_grad(x));
                    acc(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(y.expect("value"), |gv, &t| *gv *= 1.0 - t * t);
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    ga.zip_mut_with(y.expect("value"), |gv, &s| *gv *= s * (1.0 - s));
                    acc(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let yv = y.expect("value");
                    let mut ga = g;
                    for (mut grow, yrow) in ga.rows_mut().into_iter().zip(yv.rows()) {
                        let dot: f64 = grow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                        grow.zip_mut_with(&yrow, |gv, &yv| *gv = yv * (*gv - dot));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gamma);
                    let n = xhat.ncols() as f64;
                    let ggamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let gbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &g * gv;
                    let mut gx = Array2::zeros(xhat.dim());
                    for r in 0..xhat.nrows() {
                        let dr = dxhat.row(r);
                        let xr = xhat.row(r);
                        let mean_d = dr.sum() / n;
                        let mean_dx = dr.iter().zip(xr.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
                        for c in 0..xhat.ncols() {
                            gx[[r, c]] = inv_std[r] * (dr[c] - mean_d - xr[c] * mean_dx);
                        }
                    }
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *gamma, ggamma);
                    acc(&mut grads, *beta, gbeta);
                }
                Op::MeanRows(a) => {
                    let rows = self.shape(*a).0;
                    let ga = Array2::from_shape_fn((rows, g.ncols()), |(_, c)| g[[0, c]] / rows as f64);
                    acc(&mut grads, *a, ga);
                }
                Op::SumAll(a) => {
                    let ga = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let rows = self.shape(p).0;
                        acc(&mut grads, p, g.slice(s![start..start + rows, ..]).to_owned());
                        start += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let cols = self.shape(p).1;
                        acc(&mut grads, p, g.slice(s![.., start..start + cols]).to_owned());
                        start += cols;
                    }
                }
                Op::SliceCols(a, start, len) => {
                    let mut ga = Array2::zeros(self.shape(*a));
                    ga.slice_mut(s![.., *start..*start + *len]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::Gather(table, rows) => {
                    let mut gt = Array2::zeros(self.shape(*table));
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = gt.row_mut(r);
                        dst += &g.row(i);
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::Dropout(a, mask) => acc(&mut grads, *a, g * mask),
                Op::Conv2d {
                    x,
                    weight,
                    bias,
                    geom,
                    cols,
                } => {
                    let gw = cols.t().dot(&g);
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let gcols = g.dot(&self.value(*weight).t());
                    let c_in = self.shape(*x).1;
                    let k = geom.kernel;
                    let (oh, ow) = (geom.out_h(), geom.out_w());
                    let mut gx = Array2::zeros(self.shape(*x));
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let r = oy * ow + ox;
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * geom.stride + ky) as isize - geom.padding as isize;
                                    let ix = (ox * geom.stride + kx) as isize - geom.padding as isize;
                                    if iy < 0
                                        || ix < 0
                                        || iy >= geom.in_h as isize
                                        || ix >= geom.in_w as isize
                                    {
                                        continue;
                                    }
                                    let dst = iy as usize * geom.in_w + ix as usize;
                                    let off = (ky * k + kx) * c_in;
                                    let mut row = gx.row_mut(dst);
                                    row += &gcols.slice(s![r, off..off + c_in]);
                                }
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                    acc(&mut grads, *weight, gw);
                    acc(&mut grads, *bias, gb);
                }
                Op::Reshape(a) => {
                    let dim = self.shape(*a);
                    let flat: Vec<f64> = g.iter().copied().collect();
                    acc(&mut grads, *a, Array2::from_shape_vec(dim, flat).expect("same size"));
                }
                Op::CrossEntropy(logits, label, probs) => {
                    let mut gl = probs.clone();
                    gl[[0, *label]] -= 1.0;
                    gl *= g[[0, 0]];
                    acc(&mut grads, *logits, gl);
                }
            }
        }
        out
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}
