//! Define-by-run reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every forward op as a node; node ids are strictly
//! increasing and every node's inputs precede it, so the backward pass is a
//! single reverse sweep. Tapes are rebuilt per forward pass and confined to
//! one thread; tensors are immutable values.

use thiserror::Error;

use super::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum TapeError {
    #[error("{op}: operand shapes {lhs:?} and {rhs:?} do not conform")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: shape {shape:?} is not valid here")]
    BadShape { op: &'static str, shape: Vec<usize> },
    #[error("non-finite input at flat index {index}")]
    NonFiniteInput { index: usize },
    #[error("backward root must be a single element, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("concat: axis {axis} with mismatched dim {got} (expected {expected})")]
    ConcatMismatch {
        axis: usize,
        expected: usize,
        got: usize,
    },
    #[error("slice: range {start}..{} out of bounds for axis {axis} of size {size}", start + len)]
    SliceOutOfBounds {
        axis: usize,
        start: usize,
        len: usize,
        size: usize,
    },
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Matmul(Var, Var),
    Concat { axis: usize, parts: Vec<Var> },
    Slice { src: Var, axis: usize, start: usize, len: usize },
    Sum(Var),
    Mean(Var),
    Square(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of a forward computation.
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<usize>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`, if any path reached it.
    /// Registered parameters always have an entry (exact zeros off-path).
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::with_capacity(128),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        let id = self.nodes.len();
        self.nodes.push(Node { op, value });
        Var(id)
    }

    /// Record a constant input. Non-finite entries are rejected.
    pub fn input(&mut self, t: Tensor) -> Result<Var, TapeError> {
        if let Some(index) = t.first_nonfinite() {
            return Err(TapeError::NonFiniteInput { index });
        }
        Ok(self.push(Op::Input, t))
    }

    /// Record a trainable parameter. Backward always reports a gradient for it.
    pub fn param(&mut self, t: Tensor) -> Result<Var, TapeError> {
        if let Some(index) = t.first_nonfinite() {
            return Err(TapeError::NonFiniteInput { index });
        }
        let v = self.push(Op::Param, t);
        self.params.push(v.0);
        Ok(v)
    }

    /// `[1, n]` constant row, for broadcast shifts.
    pub fn constant_row(&mut self, values: &[f64]) -> Result<Var, TapeError> {
        self.input(Tensor::new(vec![1, values.len()], values.to_vec()).expect("row shape"))
    }

    /// Elementwise sum. The right operand may be a `[1, n]` row added to every
    /// row of an `[m, n]` left operand.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        let out = if va.shape() == vb.shape() {
            let data = va
                .data()
                .iter()
                .zip(vb.data())
                .map(|(x, y)| x + y)
                .collect();
            Tensor::new(va.shape().to_vec(), data).expect("add shape")
        } else if vb.shape().len() == 2
            && vb.shape()[0] == 1
            && va.shape().len() == 2
            && va.shape()[1] == vb.shape()[1]
        {
            let n = vb.shape()[1];
            let row = vb.data();
            let mut data = Vec::with_capacity(va.numel());
            for chunk in va.data().chunks_exact(n) {
                data.extend(chunk.iter().zip(row).map(|(x, y)| x + y));
            }
            Tensor::new(va.shape().to_vec(), data).expect("add shape")
        } else {
            return Err(TapeError::ShapeMismatch {
                op: "add",
                lhs: va.shape().to_vec(),
                rhs: vb.shape().to_vec(),
            });
        };
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(TapeError::ShapeMismatch {
                op: "sub",
                lhs: va.shape().to_vec(),
                rhs: vb.shape().to_vec(),
            });
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x - y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("sub shape");
        Ok(self.push(Op::Sub(a, b), out))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(TapeError::ShapeMismatch {
                op: "mul",
                lhs: va.shape().to_vec(),
                rhs: vb.shape().to_vec(),
            });
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("mul shape");
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TapeError> {
        let out = self.value(a).map(|x| c * x);
        Ok(self.push(Op::Scale(a, c), out))
    }

    /// `[m, k] @ [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (va, vb) = (self.value(a), self.value(b));
        let (sa, sb) = (va.shape(), vb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TapeError::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0; m * n];
        matmul_into(va.data(), vb.data(), &mut data, m, k, n);
        let out = Tensor::new(vec![m, n], data).expect("matmul shape");
        Ok(self.push(Op::Matmul(a, b), out))
    }

    /// Concatenate rank-2 tensors along `axis` (0 or 1).
    pub fn concat(&mut self, axis: usize, parts: &[Var]) -> Result<Var, TapeError> {
        if axis > 1 || parts.is_empty() {
            return Err(TapeError::BadShape {
                op: "concat",
                shape: vec![axis],
            });
        }
        let other = 1 - axis;
        let first = self.value(parts[0]).shape().to_vec();
        if first.len() != 2 {
            return Err(TapeError::BadShape { op: "concat", shape: first });
        }
        let mut along = 0usize;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != 2 || s[other] != first[other] {
                return Err(TapeError::ConcatMismatch {
                    axis,
                    expected: first[other],
                    got: if s.len() == 2 { s[other] } else { 0 },
                });
            }
            along += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = along;
        let mut data = vec![0.0; shape[0] * shape[1]];
        if axis == 0 {
            let mut offset = 0;
            for &p in parts {
                let v = self.value(p);
                data[offset..offset + v.numel()].copy_from_slice(v.data());
                offset += v.numel();
            }
        } else {
            let rows = shape[0];
            let total_cols = shape[1];
            let mut col_offset = 0;
            for &p in parts {
                let v = self.value(p);
                let c = v.shape()[1];
                for r in 0..rows {
                    data[r * total_cols + col_offset..r * total_cols + col_offset + c]
                        .copy_from_slice(&v.data()[r * c..(r + 1) * c]);
                }
                col_offset += c;
            }
        }
        let out = Tensor::new(shape, data).expect("concat shape");
        Ok(self.push(
            Op::Concat {
                axis,
                parts: parts.to_vec(),
            },
            out,
        ))
    }

    /// Contiguous slice of a rank-2 tensor along `axis`.
    pub fn slice(&mut self, src: Var, axis: usize, start: usize, len: usize) -> Result<Var, TapeError> {
        let v = self.value(src);
        let s = v.shape();
        if s.len() != 2 || axis > 1 {
            return Err(TapeError::BadShape { op: "slice", shape: s.to_vec() });
        }
        if start + len > s[axis] || len == 0 {
            return Err(TapeError::SliceOutOfBounds {
                axis,
                start,
                len,
                size: s[axis],
            });
        }
        let (rows, cols) = (s[0], s[1]);
        let out = if axis == 0 {
            let data = v.data()[start * cols..(start + len) * cols].to_vec();
            Tensor::new(vec![len, cols], data).expect("slice shape")
        } else {
            let mut data = Vec::with_capacity(rows * len);
            for r in 0..rows {
                data.extend_from_slice(&v.data()[r * cols + start..r * cols + start + len]);
            }
            Tensor::new(vec![rows, len], data).expect("slice shape")
        };
        Ok(self.push(Op::Slice { src, axis, start, len }, out))
    }

    /// Sum of all entries, as a `[1]` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var, TapeError> {
        let total: f64 = self.value(a).data().iter().sum();
        Ok(self.push(Op::Sum(a), Tensor::scalar(total)))
    }

    /// Mean of all entries, as a `[1]` tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var, TapeError> {
        let v = self.value(a);
        let m = v.data().iter().sum::<f64>() / v.numel() as f64;
        Ok(self.push(Op::Mean(a), Tensor::scalar(m)))
    }

    pub fn square(&mut self, a: Var) -> Result<Var, TapeError> {
        let out = self.value(a).map(|x| x * x);
        Ok(self.push(Op::Square(a), out))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TapeError> {
        let out = self.value(a).map(f64::tanh);
        Ok(self.push(Op::Tanh(a), out))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TapeError> {
        let out = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        Ok(self.push(Op::Sigmoid(a), out))
    }

    /// Rectifier; the subgradient at 0 is taken as 0.
    pub fn relu(&mut self, a: Var) -> Result<Var, TapeError> {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        Ok(self.push(Op::Relu(a), out))
    }

    /// Reverse sweep from a single-element `root`. Returns per-node gradients;
    /// every registered parameter gets one (exact zeros when disconnected).
    pub fn backward(&self, root: Var) -> Result<Gradients, TapeError> {
        let rv = self.value(root);
        if rv.numel() != 1 {
            return Err(TapeError::NonScalarRoot(rv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Tensor::new(rv.shape().to_vec(), vec![1.0]).expect("root"));
        for id in (0..=root.0).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.backward_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        for &p in &self.params {
            if grads[p].is_none() {
                grads[p] = Some(Tensor::zeros(self.nodes[p].value.shape()));
            }
        }
        Ok(Gradients { grads })
    }

    fn backward_node(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let accumulate = |grads: &mut [Option<Tensor>], v: Var, contrib: &mut dyn FnMut(&mut [f64])| {
            let slot = &mut grads[v.0];
            let t = slot.get_or_insert_with(|| Tensor::zeros(self.nodes[v.0].value.shape()));
            contrib(t.data_mut());
        };
        match &self.nodes[id].op {
            Op::Input | Op::Param => {}
            Op::Add(a, b) => {
                accumulate(grads, *a, &mut |d| {
                    for (x, y) in d.iter_mut().zip(g.data()) {
                        *x += y;
                    }
                });
                let vb = self.value(*b);
                if vb.shape() == g.shape() {
                    accumulate(grads, *b, &mut |d| {
                        for (x, y) in d.iter_mut().zip(g.data()) {
                            *x += y;
                        }
                    });
                } else {
                    // [1, n] row broadcast: column sums.
                    let n = vb.shape()[1];
                    accumulate(grads, *b, &mut |d| {
                        for chunk in g.data().chunks_exact(n) {
                            for (x, y) in d.iter_mut().zip(chunk) {
                                *x += y;
                            }
                        }
                    });
                }
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, &mut |d| {
                    for (x, y) in d.iter_mut().zip(g.data()) {
                        *x += y;
                    }
                });
                accumulate(grads, *b, &mut |d| {
                    for (x, y) in d.iter_mut().zip(g.data()) {
                        *x -= y;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).clone(), self.value(*b).clone());
                accumulate(grads, *a, &mut |d| {
                    for ((x, y), z) in d.iter_mut().zip(g.data()).zip(vb.data()) {
                        *x += y * z;
                    }
                });
                accumulate(grads, *b, &mut |d| {
                    for ((x, y), z) in d.iter_mut().zip(g.data()).zip(va.data()) {
                        *x += y * z;
                    }
                });
            }
            Op::Scale(a, c) => {
                let c = *c;
                accumulate(grads, *a, &mut |d| {
                    for (x, y) in d.iter_mut().zip(g.data()) {
                        *x += c * y;
                    }
                });
            }
            Op::Matmul(a, b) => {
                let va = self.value(*a).clone();
                let vb = self.value(*b).clone();
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                // dA += g @ B^T
                accumulate(grads, *a, &mut |d| {
                    for i in 0..m {
                        let grow = &g.data()[i * n..(i + 1) * n];
                        let drow = &mut d[i * k..(i + 1) * k];
                        for (p, dp) in drow.iter_mut().enumerate() {
                            let brow = &vb.data()[p * n..(p + 1) * n];
                            let mut acc = 0.0;
                            for (gv, bv) in grow.iter().zip(brow) {
                                acc += gv * bv;
                            }
                            *dp += acc;
                        }
                    }
                });
                // dB += A^T @ g
                accumulate(grads, *b, &mut |d| {
                    for i in 0..m {
                        let arow = &va.data()[i * k..(i + 1) * k];
                        let grow = &g.data()[i * n..(i + 1) * n];
                        for (p, &av) in arow.iter().enumerate() {
                            let drow = &mut d[p * n..(p + 1) * n];
                            for (dv, gv) in drow.iter_mut().zip(grow) {
                                *dv += av * gv;
                            }
                        }
                    }
                });
            }
            Op::Concat { axis, parts } => {
                if *axis == 0 {
                    let mut offset = 0;
                    for &p in parts {
                        let numel = self.value(p).numel();
                        let seg = &g.data()[offset..offset + numel];
                        accumulate(grads, p, &mut |d| {
                            for (x, y) in d.iter_mut().zip(seg) {
                                *x += y;
                            }
                        });
                        offset += numel;
                    }
                } else {
                    let total_cols = g.shape()[1];
                    let rows = g.shape()[0];
                    let mut col_offset = 0;
                    for &p in parts {
                        let c = self.value(p).shape()[1];
                        accumulate(grads, p, &mut |d| {
                            for r in 0..rows {
                                let src = &g.data()
                                    [r * total_cols + col_offset..r * total_cols + col_offset + c];
                                for (x, y) in d[r * c..(r + 1) * c].iter_mut().zip(src) {
                                    *x += y;
                                }
                            }
                        });
                        col_offset += c;
                    }
                }
            }
            Op::Slice { src, axis, start, len } => {
                let s = self.value(*src).shape().to_vec();
                let (rows, cols) = (s[0], s[1]);
                let (axis, start, len) = (*axis, *start, *len);
                accumulate(grads, *src, &mut |d| {
                    if axis == 0 {
                        for (x, y) in d[start * cols..(start + len) * cols]
                            .iter_mut()
                            .zip(g.data())
                        {
                            *x += y;
                        }
                    } else {
                        for r in 0..rows {
                            let src_row = &g.data()[r * len..(r + 1) * len];
                            for (x, y) in d[r * cols + start..r * cols + start + len]
                                .iter_mut()
                                .zip(src_row)
                            {
                                *x += y;
                            }
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let gv = g.data()[0];
                accumulate(grads, *a, &mut |d| {
                    for x in d.iter_mut() {
                        *x += gv;
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.value(*a).numel() as f64;
                let gv = g.data()[0] / n;
                accumulate(grads, *a, &mut |d| {
                    for x in d.iter_mut() {
                        *x += gv;
                    }
                });
            }
            Op::Square(a) => {
                let va = self.value(*a).clone();
                accumulate(grads, *a, &mut |d| {
                    for ((x, y), z) in d.iter_mut().zip(g.data()).zip(va.data()) {
                        *x += 2.0 * z * y;
                    }
                });
            }
            Op::Tanh(a) => {
                let out = self.nodes[id].value.clone();
                accumulate(grads, *a, &mut |d| {
                    for ((x, y), t) in d.iter_mut().zip(g.data()).zip(out.data()) {
                        *x += y * (1.0 - t * t);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let out = self.nodes[id].value.clone();
                accumulate(grads, *a, &mut |d| {
                    for ((x, y), s) in d.iter_mut().zip(g.data()).zip(out.data()) {
                        *x += y * s * (1.0 - s);
                    }
                });
            }
            Op::Relu(a) => {
                let va = self.value(*a).clone();
                accumulate(grads, *a, &mut |d| {
                    for ((x, y), z) in d.iter_mut().zip(g.data()).zip(va.data()) {
                        if *z > 0.0 {
                            *x += y;
                        }
                    }
                });
            }
        }
    }
}

fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &ap) in arow.iter().enumerate() {
            if ap == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += ap * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        Tensor::matrix(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_hand_case() {
        let mut tape = Tape::new();
        let a = tape.input(t2(2, 2, vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let b = tape.input(t2(2, 1, vec![1.0, 1.0])).unwrap();
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn tanh_of_zero_is_zero() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::zeros(&[2, 3])).unwrap();
        let y = tape.tanh(a).unwrap();
        assert!(tape.value(y).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mean_hand_case() {
        let mut tape = Tape::new();
        let a = tape.input(t2(1, 3, vec![2.0, 4.0, 6.0])).unwrap();
        let m = tape.mean(a).unwrap();
        assert_eq!(tape.value(m).item(), 4.0);
    }

    #[test]
    fn shape_mismatch_names_shapes() {
        let mut tape = Tape::new();
        let a = tape.input(t2(2, 3, vec![0.0; 6])).unwrap();
        let b = tape.input(t2(2, 2, vec![0.0; 4])).unwrap();
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn nonfinite_input_rejected() {
        let mut tape = Tape::new();
        let err = tape.input(Tensor::vector(vec![1.0, f64::INFINITY])).unwrap_err();
        assert_eq!(err, TapeError::NonFiniteInput { index: 1 });
    }

    #[test]
    fn square_gradient() {
        // f(x) = x^2 at x = 3 -> df/dx = 6
        let mut tape = Tape::new();
        let x = tape.param(Tensor::new(vec![1], vec![3.0]).unwrap()).unwrap();
        let y = tape.square(x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn disconnected_param_gets_exact_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(1.5)).unwrap();
        let y = tape.param(Tensor::scalar(2.5)).unwrap();
        let root = tape.square(x).unwrap();
        let g = tape.backward(root).unwrap();
        assert_eq!(g.wrt(y).unwrap().data(), &[0.0]);
    }

    #[test]
    fn nonscalar_root_rejected() {
        let mut tape = Tape::new();
        let x = tape.input(t2(2, 2, vec![1.0; 4])).unwrap();
        let err = tape.backward(x).unwrap_err();
        assert_eq!(err, TapeError::NonScalarRoot(vec![2, 2]));
    }

    #[test]
    fn broadcast_add_backward_sums_rows() {
        let mut tape = Tape::new();
        let x = tape.input(t2(3, 2, vec![1.0; 6])).unwrap();
        let b = tape.param(t2(1, 2, vec![0.0, 0.0])).unwrap();
        let y = tape.add(x, b).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(b).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn slice_and_concat_round_trip_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(t2(2, 4, (0..8).map(|i| i as f64).collect())).unwrap();
        let left = tape.slice(x, 1, 0, 2).unwrap();
        let right = tape.slice(x, 1, 2, 2).unwrap();
        let back = tape.concat(1, &[left, right]).unwrap();
        assert_eq!(tape.value(back).data(), tape.value(x).data());
        let s = tape.sum(back).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.wrt(x).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn replay_is_bit_identical() {
        let run = || {
            let mut tape = Tape::new();
            let w = tape
                .param(t2(2, 2, vec![0.3, -0.7, 0.11, 0.9]))
                .unwrap();
            let x = tape.input(t2(2, 1, vec![0.5, -1.25])).unwrap();
            let h = tape.matmul(w, x).unwrap();
            let t = tape.tanh(h).unwrap();
            let m = tape.mean(t).unwrap();
            let g = tape.backward(m).unwrap();
            (
                tape.value(m).item().to_bits(),
                g.wrt(w)
                    .unwrap()
                    .data()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }
}
