use super::tensor::{matmul, matmul_nt, matmul_tn, transpose, Tensor};
use super::ParamStore;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulNt(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulCol(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Square(NodeId),
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Im2col { x: NodeId, h: usize, w: usize, k: usize },
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols { x: NodeId, start: usize },
    SliceRows { x: NodeId, start: usize },
    GatherRows { x: NodeId, index: Vec<usize> },
    RepeatRows(NodeId),
    MeanRows(NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    Transpose(NodeId),
    Reshape(NodeId),
    Clamp { x: NodeId, lo: f64, hi: f64 },
    Minimum(NodeId, NodeId),
    Pick { x: NodeId, index: Vec<usize> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so the tape
/// is topologically sorted by construction.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(usize, NodeId)>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<(usize, NodeId)>,
}

impl Gradients {
    /// Gradient with respect to a node; zeros when the loss does not depend
    /// on it.
    pub fn of(&self, g: &Graph, id: NodeId) -> Tensor {
        self.nodes[id.0].clone().unwrap_or_else(|| {
            let v = g.value(id);
            Tensor::zeros(v.rows, v.cols)
        })
    }

    /// Gradients for every parameter in `store`, in store order.
    pub fn params(&self, store: &ParamStore) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = store.tensors().iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect();
        for &(p, node) in &self.params {
            if let Some(gr) = &self.nodes[node.0] {
                out[p].add_assign(gr);
            }
        }
        out
    }
}

fn same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, &a.shape(), &b.shape()));
    }
    Ok(())
}

fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..x.rows {
        let row = &mut out.data[r * x.cols..(r + 1) * x.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            row.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// A constant or differentiable input.
    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf)
    }

    /// Parameter `index` of `store`; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, index: usize) -> NodeId {
        if let Some(&(_, n)) = self.params.iter().find(|(p, _)| *p == index) {
            return n;
        }
        let n = self.push(store.tensors()[index].clone(), Op::Leaf);
        self.params.push((index, n));
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols != y.rows {
            return Err(Error::shape("matmul", &x.shape(), &y.shape()));
        }
        let v = matmul(x, y);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols != y.cols {
            return Err(Error::shape("matmul_nt", &x.shape(), &y.shape()));
        }
        let v = matmul_nt(x, y);
        Ok(self.push(v, Op::MatMulNt(a, b)))
    }

    fn zip(&mut self, op: &'static str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        same(op, x, y)?;
        let v = Tensor {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect(),
        };
        Ok(self.push(v, rec))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("add", a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("sub", a, b, |p, q| p - q, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("mul", a, b, |p, q| p * q, Op::Mul(a, b))
    }

    pub fn minimum(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("minimum", a, b, f64::min, Op::Minimum(a, b))
    }

    /// Adds the `1 x n` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if y.rows != 1 || y.cols != x.cols {
            return Err(Error::shape("add_row", &x.shape(), &y.shape()));
        }
        let mut v = x.clone();
        for r in 0..v.rows {
            for (o, q) in v.data[r * v.cols..(r + 1) * v.cols].iter_mut().zip(&y.data) {
                *o += q;
            }
        }
        Ok(self.push(v, Op::AddRow(a, b)))
    }

    /// Multiplies row `r` of `a` by entry `r` of the `m x 1` column `b`.
    pub fn mul_col(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if y.cols != 1 || y.rows != x.rows {
            return Err(Error::shape("mul_col", &x.shape(), &y.shape()));
        }
        let mut v = x.clone();
        for r in 0..v.rows {
            let s = y.data[r];
            v.data[r * v.cols..(r + 1) * v.cols].iter_mut().for_each(|o| *o *= s);
        }
        Ok(self.push(v, Op::MulCol(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x + s);
        self.push(v, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp { x: a, lo, hi })
    }

    /// Row-wise softmax. Entries equal to `-inf` get probability zero; a row
    /// of only `-inf` becomes all zeros.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::Softmax(a))
    }

    /// Row-wise softmax over the columns where `keep` is true.
    pub fn masked_softmax(&mut self, a: NodeId, keep: &[bool]) -> Result<NodeId> {
        let x = self.value(a);
        if keep.len() != x.cols {
            return Err(Error::shape("masked_softmax", &x.shape(), &[keep.len()]));
        }
        let mut masked = x.clone();
        for r in 0..x.rows {
            for (c, &k) in keep.iter().enumerate() {
                if !k {
                    masked.data[r * x.cols + c] = f64::NEG_INFINITY;
                }
            }
        }
        let v = softmax_rows(&masked);
        Ok(self.push(v, Op::Softmax(a)))
    }

    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut v = x.clone();
        for r in 0..x.rows {
            let row = &mut v.data[r * x.cols..(r + 1) * x.cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|z| *z -= lse);
        }
        self.push(v, Op::LogSoftmax(a))
    }

    /// Patches of a `(h·w) x c` map for a `k x k` same-padded convolution:
    /// row `t` holds the neighborhood of token `t`, ordered by kernel row,
    /// kernel column, then channel.
    pub fn im2col(&mut self, a: NodeId, h: usize, w: usize, k: usize) -> Result<NodeId> {
        let x = self.value(a);
        if x.rows != h * w || k.is_multiple_of(2) {
            return Err(Error::shape("im2col", &x.shape(), &[h, w, k]));
        }
        let c = x.cols;
        let half = (k / 2) as isize;
        let width = k * k * c;
        let mut out = vec![0.0; h * w * width];
        for r in 0..h {
            for q in 0..w {
                let t = r * w + q;
                for di in 0..k {
                    for dj in 0..k {
                        let (rr, qq) = (r as isize + di as isize - half, q as isize + dj as isize - half);
                        if rr < 0 || qq < 0 || rr >= h as isize || qq >= w as isize {
                            continue;
                        }
                        let src = (rr as usize * w + qq as usize) * c;
                        let dst = t * width + (di * k + dj) * c;
                        out[dst..dst + c].copy_from_slice(&x.data[src..src + c]);
                    }
                }
            }
        }
        let v = Tensor {
            rows: h * w,
            cols: width,
            data: out,
        };
        Ok(self.push(v, Op::Im2col { x: a, h, w, k }))
    }

    /// Stride-1, same-padded 2-D convolution of a `(h·w) x c_in` map with a
    /// `(k·k·c_in) x c_out` kernel.
    pub fn conv2d(&mut self, x: NodeId, kernel: NodeId, h: usize, w: usize, k: usize) -> Result<NodeId> {
        let patches = self.im2col(x, h, w, k)?;
        self.matmul(patches, kernel)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let rows = self.value(parts[0]).rows;
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows != rows {
                return Err(Error::shape("concat_cols", &self.value(parts[0]).shape(), &t.shape()));
            }
            cols += t.cols;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        Ok(self.push(Tensor { rows, cols, data }, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols != cols {
                return Err(Error::shape("concat_rows", &self.value(parts[0]).shape(), &t.shape()));
            }
            data.extend_from_slice(&t.data);
        }
        let rows = data.len() / cols.max(1);
        Ok(self.push(Tensor { rows, cols, data }, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let x = self.value(a);
        if start + len > x.cols {
            return Err(Error::shape("slice_cols", &x.shape(), &[start, len]));
        }
        let mut data = Vec::with_capacity(x.rows * len);
        for r in 0..x.rows {
            data.extend_from_slice(&x.row_slice(r)[start..start + len]);
        }
        let v = Tensor {
            rows: x.rows,
            cols: len,
            data,
        };
        Ok(self.push(v, Op::SliceCols { x: a, start }))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let x = self.value(a);
        if start + len > x.rows {
            return Err(Error::shape("slice_rows", &x.shape(), &[start, len]));
        }
        let v = Tensor {
            rows: len,
            cols: x.cols,
            data: x.data[start * x.cols..(start + len) * x.cols].to_vec(),
        };
        Ok(self.push(v, Op::SliceRows { x: a, start }))
    }

    /// Rows of `a` in the order given by `index` (repeats allowed).
    pub fn gather_rows(&mut self, a: NodeId, index: &[usize]) -> Result<NodeId> {
        let x = self.value(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= x.rows) {
            return Err(Error::shape("gather_rows", &x.shape(), &[bad]));
        }
        let mut data = Vec::with_capacity(index.len() * x.cols);
        for &i in index {
            data.extend_from_slice(x.row_slice(i));
        }
        let v = Tensor {
            rows: index.len(),
            cols: x.cols,
            data,
        };
        Ok(self.push(
            v,
            Op::GatherRows {
                x: a,
                index: index.to_vec(),
            },
        ))
    }

    /// Repeats a `1 x n` row `times` times.
    pub fn repeat_rows(&mut self, a: NodeId, times: usize) -> Result<NodeId> {
        let x = self.value(a);
        if x.rows != 1 {
            return Err(Error::shape("repeat_rows", &x.shape(), &[1, x.cols]));
        }
        let v = Tensor {
            rows: times,
            cols: x.cols,
            data: x.data.repeat(times),
        };
        Ok(self.push(v, Op::RepeatRows(a)))
    }

    /// Column means, `1 x n`.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut v = Tensor::zeros(1, x.cols);
        for r in 0..x.rows {
            v.add_assign(&Tensor::row(x.row_slice(r)));
        }
        let m = x.rows as f64;
        let v = v.map(|s| s / m);
        self.push(v, Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::SumAll(a))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let v = Tensor::scalar(x.sum() / x.len() as f64);
        self.push(v, Op::MeanAll(a))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = transpose(self.value(a));
        self.push(v, Op::Transpose(a))
    }

    /// Reinterprets the row-major data with a new shape.
    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let x = self.value(a);
        if rows * cols != x.len() {
            return Err(Error::shape("reshape", &x.shape(), &[rows, cols]));
        }
        let v = Tensor {
            rows,
            cols,
            data: x.data.clone(),
        };
        Ok(self.push(v, Op::Reshape(a)))
    }

    /// Entry `index[r]` of each row, as an `m x 1` column.
    pub fn pick(&mut self, a: NodeId, index: &[usize]) -> Result<NodeId> {
        let x = self.value(a);
        if index.len() != x.rows || index.iter().any(|&i| i >= x.cols) {
            return Err(Error::shape("pick", &x.shape(), &[index.len()]));
        }
        let data = index.iter().enumerate().map(|(r, &i)| x.at(r, i)).collect();
        let v = Tensor {
            rows: x.rows,
            cols: 1,
            data,
        };
        Ok(self.push(
            v,
            Op::Pick {
                x: a,
                index: index.to_vec(),
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let l = self.value(loss);
        if l.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                l.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
            match &mut grads[id.0] {
                Some(t) => t.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            let val = |id: NodeId| &self.nodes[id.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, matmul_nt(&gy, val(*b)));
                    acc(&mut grads, *b, matmul_tn(val(*a), &gy));
                }
                Op::MatMulNt(a, b) => {
                    acc(&mut grads, *a, matmul(&gy, val(*b)));
                    acc(&mut grads, *b, matmul_tn(&gy, val(*a)));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, gy.clone());
                    acc(&mut grads, *b, gy.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, gy.map(|v| -v));
                    acc(&mut grads, *a, gy.clone());
                }
                Op::Mul(a, b) => {
                    let (x, z) = (val(*a), val(*b));
                    acc(&mut grads, *a, zip_with(&gy, z, |g, q| g * q));
                    acc(&mut grads, *b, zip_with(&gy, x, |g, p| g * p));
                }
                Op::Minimum(a, b) => {
                    let (x, z) = (val(*a), val(*b));
                    let ga = Tensor {
                        rows: gy.rows,
                        cols: gy.cols,
                        data: (0..gy.len()).map(|i| if x.data[i] <= z.data[i] { gy.data[i] } else { 0.0 }).collect(),
                    };
                    let gb = zip_with(&gy, &ga, |g, p| g - p);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, b) => {
                    let mut gb = Tensor::zeros(1, gy.cols);
                    for r in 0..gy.rows {
                        gb.add_assign(&Tensor::row(gy.row_slice(r)));
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *a, gy.clone());
                }
                Op::MulCol(a, b) => {
                    let (x, s) = (val(*a), val(*b));
                    let mut ga = gy.clone();
                    let mut gb = Tensor::zeros(s.rows, 1);
                    for r in 0..gy.rows {
                        let row = r * gy.cols..(r + 1) * gy.cols;
                        gb.data[r] = gy.data[row.clone()].iter().zip(&x.data[row.clone()]).map(|(g, p)| g * p).sum();
                        ga.data[row].iter_mut().for_each(|g| *g *= s.data[r]);
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, gy.map(|g| g * s)),
                Op::AddScalar(a) => acc(&mut grads, *a, gy.clone()),
                Op::Relu(a) => acc(&mut grads, *a, zip_with(&gy, val(*a), |g, x| if x > 0.0 { g } else { 0.0 })),
                Op::Sigmoid(a) => acc(&mut grads, *a, zip_with(&gy, y, |g, s| g * s * (1.0 - s))),
                Op::Tanh(a) => acc(&mut grads, *a, zip_with(&gy, y, |g, t| g * (1.0 - t * t))),
                Op::Exp(a) => acc(&mut grads, *a, zip_with(&gy, y, |g, e| g * e)),
                Op::Square(a) => acc(&mut grads, *a, zip_with(&gy, val(*a), |g, x| 2.0 * g * x)),
                Op::Clamp { x, lo, hi } => acc(
                    &mut grads,
                    *x,
                    zip_with(&gy, val(*x), |g, v| if v >= *lo && v <= *hi { g } else { 0.0 }),
                ),
                Op::Softmax(a) => {
                    let mut gx = gy.clone();
                    for r in 0..y.rows {
                        let row = r * y.cols..(r + 1) * y.cols;
                        let dot: f64 = gy.data[row.clone()].iter().zip(&y.data[row.clone()]).map(|(g, p)| g * p).sum();
                        for i in row {
                            gx.data[i] = y.data[i] * (gy.data[i] - dot);
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::LogSoftmax(a) => {
                    let mut gx = gy.clone();
                    for r in 0..y.rows {
                        let row = r * y.cols..(r + 1) * y.cols;
                        let total: f64 = gy.data[row.clone()].iter().sum();
                        for i in row {
                            gx.data[i] = gy.data[i] - y.data[i].exp() * total;
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::Im2col { x, h, w, k } => {
                    let c = val(*x).cols;
                    let half = (k / 2) as isize;
                    let width = k * k * c;
                    let mut gx = Tensor::zeros(h * w, c);
                    for r in 0..*h {
                        for q in 0..*w {
                            let t = r * w + q;
                            for di in 0..*k {
                                for dj in 0..*k {
                                    let (rr, qq) = (r as isize + di as isize - half, q as isize + dj as isize - half);
                                    if rr < 0 || qq < 0 || rr >= *h as isize || qq >= *w as isize {
                                        continue;
                                    }
                                    let dst = (rr as usize * w + qq as usize) * c;
                                    let src = t * width + (di * k + dj) * c;
                                    for ch in 0..c {
                                        gx.data[dst + ch] += gy.data[src + ch];
                                    }
                                }
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pc = val(p).cols;
                        let mut gp = Tensor::zeros(gy.rows, pc);
                        for r in 0..gy.rows {
                            gp.data[r * pc..(r + 1) * pc].copy_from_slice(&gy.row_slice(r)[offset..offset + pc]);
                        }
                        offset += pc;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = val(p).len();
                        let t = val(p);
                        acc(
                            &mut grads,
                            p,
                            Tensor {
                                rows: t.rows,
                                cols: t.cols,
                                data: gy.data[offset..offset + n].to_vec(),
                            },
                        );
                        offset += n;
                    }
                }
                Op::SliceCols { x, start } => {
                    let t = val(*x);
                    let mut gx = Tensor::zeros(t.rows, t.cols);
                    for r in 0..gy.rows {
                        gx.data[r * t.cols + start..r * t.cols + start + gy.cols].copy_from_slice(gy.row_slice(r));
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SliceRows { x, start } => {
                    let t = val(*x);
                    let mut gx = Tensor::zeros(t.rows, t.cols);
                    gx.data[start * t.cols..start * t.cols + gy.len()].copy_from_slice(&gy.data);
                    acc(&mut grads, *x, gx);
                }
                Op::GatherRows { x, index } => {
                    let t = val(*x);
                    let mut gx = Tensor::zeros(t.rows, t.cols);
                    for (r, &i) in index.iter().enumerate() {
                        for c in 0..t.cols {
                            gx.data[i * t.cols + c] += gy.data[r * t.cols + c];
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::RepeatRows(a) => {
                    let mut ga = Tensor::zeros(1, gy.cols);
                    for r in 0..gy.rows {
                        ga.add_assign(&Tensor::row(gy.row_slice(r)));
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::MeanRows(a) => {
                    let t = val(*a);
                    let m = t.rows as f64;
                    let mut ga = Tensor::zeros(t.rows, t.cols);
                    for r in 0..t.rows {
                        for c in 0..t.cols {
                            ga.data[r * t.cols + c] = gy.data[c] / m;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SumAll(a) => {
                    let t = val(*a);
                    acc(&mut grads, *a, Tensor::filled(t.rows, t.cols, gy.item()));
                }
                Op::MeanAll(a) => {
                    let t = val(*a);
                    acc(&mut grads, *a, Tensor::filled(t.rows, t.cols, gy.item() / t.len() as f64));
                }
                Op::Transpose(a) => acc(&mut grads, *a, transpose(&gy)),
                Op::Reshape(a) => {
                    let t = val(*a);
                    acc(
                        &mut grads,
                        *a,
                        Tensor {
                            rows: t.rows,
                            cols: t.cols,
                            data: gy.data.clone(),
                        },
                    );
                }
                Op::Pick { x, index } => {
                    let t = val(*x);
                    let mut gx = Tensor::zeros(t.rows, t.cols);
                    for (r, &i) in index.iter().enumerate() {
                        gx.data[r * t.cols + i] = gy.data[r];
                    }
                    acc(&mut grads, *x, gx);
                }
            }
            grads[idx] = Some(gy);
        }
        Ok(Gradients {
            nodes: grads,
            params: self.params.clone(),
        })
    }
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}
