use rand::Rng;

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Named parameter tensors in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Adds a `rows x cols` tensor drawn uniformly from `±1/√fan_in`.
    pub fn add_uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> usize {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Tensor { rows, cols, data })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }
}

/// `y = x W + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: usize,
    pub bias: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Linear {
            weight: store.add_uniform(format!("{name}.weight"), inputs, outputs, inputs, rng),
            bias: store.add_uniform(format!("{name}.bias"), 1, outputs, inputs, rng),
            inputs,
            outputs,
        }
    }

    pub fn param_count(inputs: usize, outputs: usize) -> usize {
        inputs * outputs + outputs
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }
}

/// Same-padded `k x k` convolution over an `h x w` map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv2d {
    pub kernel: usize,
    pub bias: usize,
    pub k: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl Conv2d {
    pub fn new(store: &mut ParamStore, name: &str, k: usize, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        let fan_in = k * k * c_in;
        Conv2d {
            kernel: store.add_uniform(format!("{name}.kernel"), fan_in, c_out, fan_in, rng),
            bias: store.add_uniform(format!("{name}.bias"), 1, c_out, fan_in, rng),
            k,
            c_in,
            c_out,
        }
    }

    pub fn param_count(k: usize, c_in: usize, c_out: usize) -> usize {
        k * k * c_in * c_out + c_out
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId, h: usize, w: usize) -> Result<NodeId> {
        let kernel = g.param(store, self.kernel);
        let bias = g.param(store, self.bias);
        let y = g.conv2d(x, kernel, h, w, self.k)?;
        g.add_row(y, bias)
    }
}

/// Four-gate recurrent cell, gates ordered input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub w_x: usize,
    pub w_h: usize,
    pub bias: usize,
    pub inputs: usize,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Lstm {
            w_x: store.add_uniform(format!("{name}.w_x"), inputs, 4 * hidden, hidden, rng),
            w_h: store.add_uniform(format!("{name}.w_h"), hidden, 4 * hidden, hidden, rng),
            bias: store.add_uniform(format!("{name}.bias"), 1, 4 * hidden, hidden, rng),
            inputs,
            hidden,
        }
    }

    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        4 * hidden * (inputs + hidden + 1)
    }

    /// One step: returns the new `(h, c)`, each `1 x hidden`.
    pub fn cell(&self, g: &mut Graph, store: &ParamStore, x: NodeId, h: NodeId, c: NodeId) -> Result<(NodeId, NodeId)> {
        let wx = g.param(store, self.w_x);
        let wh = g.param(store, self.w_h);
        let b = g.param(store, self.bias);
        let a = g.matmul(x, wx)?;
        let r = g.matmul(h, wh)?;
        let z = g.add(a, r)?;
        let z = g.add_row(z, b)?;
        let n = self.hidden;
        let zi = g.slice_cols(z, 0, n)?;
        let zf = g.slice_cols(z, n, n)?;
        let zg = g.slice_cols(z, 2 * n, n)?;
        let zo = g.slice_cols(z, 3 * n, n)?;
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let cand = g.tanh(zg);
        let o = g.sigmoid(zo);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        let c_next = g.add(keep, write)?;
        let tc = g.tanh(c_next);
        let h_next = g.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// Runs over the rows of `xs`; returns the per-step hidden states
    /// (`steps x hidden`) and the final hidden state.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, xs: NodeId) -> Result<(NodeId, NodeId)> {
        let steps = g.value(xs).rows;
        if g.value(xs).cols != self.inputs {
            return Err(Error::shape("lstm", &g.value(xs).shape(), &[steps, self.inputs]));
        }
        let mut h = g.input(Tensor::zeros(1, self.hidden));
        let mut c = g.input(Tensor::zeros(1, self.hidden));
        let mut outs = Vec::with_capacity(steps);
        for t in 0..steps {
            let x = g.slice_rows(xs, t, 1)?;
            (h, c) = self.cell(g, store, x, h, c)?;
            outs.push(h);
        }
        let all = g.concat_rows(&outs)?;
        Ok((all, h))
    }
}

/// Scaled dot-product self-attention with `heads` heads of width
/// `width / heads`, followed by an output projection. Rows whose mask entry
/// is false are excluded as keys and produce zero output rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub width: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, width: usize, heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if heads == 0 || !width.is_multiple_of(heads) {
            return Err(Error::Config(format!("attention width {width} not divisible by {heads} heads")));
        }
        Ok(MultiHeadAttention {
            heads,
            width,
            query: Linear::new(store, &format!("{name}.query"), inputs, width, rng),
            key: Linear::new(store, &format!("{name}.key"), inputs, width, rng),
            value: Linear::new(store, &format!("{name}.value"), inputs, width, rng),
            output: Linear::new(store, &format!("{name}.output"), width, width, rng),
        })
    }

    pub fn param_count(inputs: usize, width: usize) -> usize {
        3 * Linear::param_count(inputs, width) + Linear::param_count(width, width)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId, keep: &[bool]) -> Result<NodeId> {
        let q = self.query.forward(g, store, x)?;
        let k = self.key.forward(g, store, x)?;
        let v = self.value.forward(g, store, x)?;
        let dk = self.width / self.heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut heads = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dk, dk)?;
            let kh = g.slice_cols(k, h * dk, dk)?;
            let vh = g.slice_cols(v, h * dk, dk)?;
            let s = g.matmul_nt(qh, kh)?;
            let s = g.scale(s, scale);
            let a = g.masked_softmax(s, keep)?;
            heads.push(g.matmul(a, vh)?);
        }
        let cat = g.concat_cols(&heads)?;
        let out = self.output.forward(g, store, cat)?;
        let mask = g.input(Tensor::new(keep.len(), 1, keep.iter().map(|&k| f64::from(u8::from(k))).collect())?);
        g.mul_col(out, mask)
    }
}
