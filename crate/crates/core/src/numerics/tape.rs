//! Reverse-mode automatic differentiation over a single-use tape.
//!
//! A [`Tape`] borrows a frozen [`ParamRegistry`]; parameters are copied onto
//! the tape the first time they are referenced. Every op records enough of
//! its inputs to run its backward rule, and [`Tape::backward`] walks the
//! nodes in reverse creation order.

use std::collections::HashMap;

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;

use super::tensor::{dot_slices, dropout_mask, norm, softmax_slice};
use super::{Gradients, Mode, NumericsError, ParamRegistry, Tensor};

type Result<T> = std::result::Result<T, NumericsError>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param,
    MatMul(Var, Var),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    /// Tensor times a scalar var.
    Scale(Var, Var),
    ScaleConst(Var, f64),
    Relu(Var),
    Tanh(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Row(Var, usize),
    Index(Var, usize),
    MeanRows(Var),
    MaxPoolRows(Var, Vec<usize>),
    Sum(Var),
    Dot(Var, Var),
    Cosine(Var, Var),
    Mask(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamRegistry,
    nodes: Vec<Node>,
    bound: HashMap<usize, Var>,
    rng: Option<ChaCha8Rng>,
}

impl<'p> Tape<'p> {
    /// Evaluation tape: dropout is the identity.
    pub fn new(params: &'p ParamRegistry) -> Self {
        Self { params, nodes: Vec::new(), bound: HashMap::new(), rng: None }
    }

    /// Training tape: dropout masks are drawn from `rng`.
    pub fn training(params: &'p ParamRegistry, rng: ChaCha8Rng) -> Self {
        Self { params, nodes: Vec::new(), bound: HashMap::new(), rng: Some(rng) }
    }

    pub fn mode(&self) -> Mode {
        if self.rng.is_some() {
            Mode::Train
        } else {
            Mode::Eval
        }
    }

    /// Returns the dropout generator so the caller can continue its stream.
    pub fn into_rng(self) -> Option<ChaCha8Rng> {
        self.rng
    }

    pub fn params(&self) -> &'p ParamRegistry {
        self.params
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Const)
    }

    /// Binds a registered parameter (once per tape).
    pub fn param(&mut self, name: &str) -> Result<Var> {
        let idx = self
            .params
            .index_of(name)
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))?;
        if let Some(&v) = self.bound.get(&idx) {
            return Ok(v);
        }
        let value = self.params.get_index(idx).expect("index from lookup").1.clone();
        let v = self.push(value, Op::Param);
        self.bound.insert(idx, v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let out = self.value(w).matvec(self.value(x))?;
        Ok(self.push(out, Op::MatVec(w, x)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Multiplies every entry of `x` by the scalar var `s`.
    pub fn scale(&mut self, x: Var, s: Var) -> Result<Var> {
        let factor = self.scalar_of("scale", s)?;
        let xv = self.value(x);
        let out = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|v| v * factor).collect())?;
        Ok(self.push(out, Op::Scale(x, s)))
    }

    pub fn scale_const(&mut self, x: Var, factor: f64) -> Var {
        let xv = self.value(x);
        let out = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|v| v * factor).collect())
            .expect("shape preserved");
        self.push(out, Op::ScaleConst(x, factor))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).relu();
        self.push(out, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).tanh();
        self.push(out, Op::Tanh(x))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).softmax()?;
        Ok(self.push(out, Op::Softmax(x)))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NumericsError::Domain("concat of nothing".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            self.value(p).as_vector("concat")?;
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    /// Stacks equal-length vectors as matrix rows, or scalars into a vector.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(NumericsError::Domain("stack of an empty row set".into()));
        };
        let first_shape = self.value(first).shape().to_vec();
        let mut data = Vec::new();
        for &r in rows {
            if self.value(r).shape() != first_shape.as_slice() {
                return Err(NumericsError::Shape {
                    op: "stack",
                    left: first_shape,
                    right: self.value(r).shape().to_vec(),
                });
            }
            data.extend_from_slice(self.value(r).data());
        }
        let out = match first_shape.as_slice() {
            [] => Tensor::vector(data),
            [d] => Tensor::matrix(rows.len(), *d, data)?,
            _ => return Err(NumericsError::Rank { op: "stack", expected: 1, shape: first_shape }),
        };
        Ok(self.push(out, Op::Stack(rows.to_vec())))
    }

    pub fn row(&mut self, m: Var, i: usize) -> Result<Var> {
        let out = self.value(m).row(i)?;
        Ok(self.push(out, Op::Row(m, i)))
    }

    /// Extracts entry `i` of a vector as a scalar.
    pub fn index(&mut self, x: Var, i: usize) -> Result<Var> {
        let n = self.value(x).as_vector("index")?;
        if i >= n {
            return Err(NumericsError::Domain(format!("index {i} out of range for length {n}")));
        }
        let out = Tensor::scalar(self.value(x).data()[i]);
        Ok(self.push(out, Op::Index(x, i)))
    }

    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mean_rows()?;
        Ok(self.push(out, Op::MeanRows(x)))
    }

    pub fn max_pool_rows(&mut self, x: Var) -> Result<Var> {
        let (out, arg) = self.value(x).max_pool_rows()?;
        Ok(self.push(out, Op::MaxPoolRows(x, arg)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(out, Op::Sum(x))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).dot(self.value(b))?);
        Ok(self.push(out, Op::Dot(a, b)))
    }

    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(a).cosine(self.value(b))?);
        Ok(self.push(out, Op::Cosine(a, b)))
    }

    /// Inverted dropout; returns `x` itself in eval mode or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(NumericsError::Domain(format!("dropout probability {p} not in [0, 1)")));
        }
        let n = self.value(x).len();
        let Some(rng) = self.rng.as_mut() else {
            return Ok(x);
        };
        let Some(mask) = dropout_mask(n, p, Mode::Train, rng)? else {
            return Ok(x);
        };
        let xv = self.value(x);
        let out = Tensor::new(
            xv.shape().to_vec(),
            xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect(),
        )?;
        Ok(self.push(out, Op::Mask(x, mask)))
    }

    fn scalar_of(&self, op: &'static str, s: Var) -> Result<f64> {
        let t = self.value(s);
        if !t.is_scalar() {
            return Err(NumericsError::Rank { op, expected: 0, shape: t.shape().to_vec() });
        }
        Ok(t.data()[0])
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(NumericsError::Shape {
                op,
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        Tensor::new(
            av.shape().to_vec(),
            av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect(),
        )
    }

    /// Gradients of a scalar `loss` for every registered parameter.
    /// Parameters the loss does not depend on receive zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let adjoints = self.adjoints(loss)?;
        let mut entries: IndexMap<String, Tensor> = self
            .params
            .iter()
            .map(|(k, v)| (k.to_string(), Tensor::zeros(v.shape().to_vec())))
            .collect();
        for (idx, var) in &self.bound {
            if let Some(g) = &adjoints[var.0] {
                let (_, slot) = entries.get_index_mut(*idx).expect("bound index is registered");
                slot.data_mut().copy_from_slice(g);
            }
        }
        Ok(Gradients::new(entries))
    }

    /// Adjoint of every node with respect to `loss` (`None` when off-path).
    pub fn adjoints(&self, loss: Var) -> Result<Vec<Option<Vec<f64>>>> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(NumericsError::Domain(format!(
                "backprop needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads.resize(self.nodes.len(), None);
        Ok(grads)
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |v: &Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Const | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = val(a).as_matrix("matmul").expect("checked in forward");
                let n = val(b).shape()[1];
                let (ad, bd) = (val(a).data(), val(b).data());
                let mut ga = vec![0.0; m * k];
                let mut gb = vec![0.0; k * n];
                for r in 0..m {
                    for c in 0..n {
                        let go = g[r * n + c];
                        if go == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            ga[r * k + p] += go * bd[p * n + c];
                            gb[p * n + c] += go * ad[r * k + p];
                        }
                    }
                }
                accumulate(grads, *a, &ga);
                accumulate(grads, *b, &gb);
            }
            Op::MatVec(w, x) => {
                let (m, k) = val(w).as_matrix("matvec").expect("checked in forward");
                let (wd, xd) = (val(w).data(), val(x).data());
                let mut gw = vec![0.0; m * k];
                let mut gx = vec![0.0; k];
                for r in 0..m {
                    let go = g[r];
                    if go == 0.0 {
                        continue;
                    }
                    for p in 0..k {
                        gw[r * k + p] = go * xd[p];
                        gx[p] += go * wd[r * k + p];
                    }
                }
                accumulate(grads, *w, &gw);
                accumulate(grads, *x, &gx);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g);
                accumulate(grads, *b, g);
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g);
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                accumulate(grads, *b, &neg);
            }
            Op::Scale(x, s) => {
                let factor = val(s).data()[0];
                let gx: Vec<f64> = g.iter().map(|v| v * factor).collect();
                let gs = dot_slices(g, val(x).data());
                accumulate(grads, *x, &gx);
                accumulate(grads, *s, &[gs]);
            }
            Op::ScaleConst(x, factor) => {
                let gx: Vec<f64> = g.iter().map(|v| v * factor).collect();
                accumulate(grads, *x, &gx);
            }
            Op::Relu(x) => {
                let gx: Vec<f64> = g
                    .iter()
                    .zip(val(x).data())
                    .map(|(go, xi)| if *xi > 0.0 { *go } else { 0.0 })
                    .collect();
                accumulate(grads, *x, &gx);
            }
            Op::Tanh(x) => {
                let gx: Vec<f64> =
                    g.iter().zip(node.value.data()).map(|(go, y)| go * (1.0 - y * y)).collect();
                accumulate(grads, *x, &gx);
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let gy = dot_slices(g, y);
                let gx: Vec<f64> = y.iter().zip(g).map(|(yi, gi)| yi * (gi - gy)).collect();
                accumulate(grads, *x, &gx);
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = val(p).len();
                    accumulate(grads, *p, &g[offset..offset + n]);
                    offset += n;
                }
            }
            Op::Stack(rows) => {
                let n = val(&rows[0]).len();
                for (r, v) in rows.iter().enumerate() {
                    accumulate(grads, *v, &g[r * n..(r + 1) * n]);
                }
            }
            Op::Row(m, r) => {
                let cols = node.value.len();
                let mut gm = vec![0.0; val(m).len()];
                gm[r * cols..(r + 1) * cols].copy_from_slice(g);
                accumulate(grads, *m, &gm);
            }
            Op::Index(x, idx) => {
                let mut gx = vec![0.0; val(x).len()];
                gx[*idx] = g[0];
                accumulate(grads, *x, &gx);
            }
            Op::MeanRows(x) => {
                let (rows, cols) = val(x).as_matrix("mean_rows").expect("checked in forward");
                let inv = 1.0 / rows as f64;
                let mut gx = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        gx[r * cols + c] = g[c] * inv;
                    }
                }
                accumulate(grads, *x, &gx);
            }
            Op::MaxPoolRows(x, arg) => {
                let cols = arg.len();
                let mut gx = vec![0.0; val(x).len()];
                for (c, &r) in arg.iter().enumerate() {
                    gx[r * cols + c] = g[c];
                }
                accumulate(grads, *x, &gx);
            }
            Op::Sum(x) => {
                let gx = vec![g[0]; val(x).len()];
                accumulate(grads, *x, &gx);
            }
            Op::Dot(a, b) => {
                let ga: Vec<f64> = val(b).data().iter().map(|v| v * g[0]).collect();
                let gb: Vec<f64> = val(a).data().iter().map(|v| v * g[0]).collect();
                accumulate(grads, *a, &ga);
                accumulate(grads, *b, &gb);
            }
            Op::Cosine(a, b) => {
                let (ad, bd) = (val(a).data(), val(b).data());
                let (na, nb) = (norm(ad), norm(bd));
                let cos = dot_slices(ad, bd) / (na * nb);
                let ga: Vec<f64> = ad
                    .iter()
                    .zip(bd)
                    .map(|(ai, bi)| g[0] * (bi / (na * nb) - cos * ai / (na * na)))
                    .collect();
                let gb: Vec<f64> = ad
                    .iter()
                    .zip(bd)
                    .map(|(ai, bi)| g[0] * (ai / (na * nb) - cos * bi / (nb * nb)))
                    .collect();
                accumulate(grads, *a, &ga);
                accumulate(grads, *b, &gb);
            }
            Op::Mask(x, mask) => {
                let gx: Vec<f64> = g.iter().zip(mask).map(|(go, m)| go * m).collect();
                accumulate(grads, *x, &gx);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(e, x)| *e += x),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Softmax over raw logits without a tape, used by forward-only callers.
pub fn softmax(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(NumericsError::Domain("softmax of an empty vector".into()));
    }
    Ok(softmax_slice(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry(entries: &[(&str, Tensor)]) -> ParamRegistry {
        let mut reg = ParamRegistry::new();
        for (name, t) in entries {
            reg.insert(*name, t.clone()).unwrap();
        }
        reg
    }

    #[test]
    fn sum_gradient_is_ones() {
        let reg = registry(&[("w", Tensor::zeros(vec![2, 3]))]);
        let mut tape = Tape::new(&reg);
        let w = tape.param("w").unwrap();
        let loss = tape.sum(w);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get("w").unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn unused_param_has_zero_gradient() {
        let reg = registry(&[("w", Tensor::vector(vec![1.0, 2.0])), ("unused", Tensor::zeros(vec![3]))]);
        let mut tape = Tape::new(&reg);
        let w = tape.param("w").unwrap();
        let loss = tape.sum(w);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get("unused").unwrap().data(), &[0.0; 3]);
        assert_eq!(grads.get("unused").unwrap().shape(), &[3]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let reg = registry(&[("w", Tensor::vector(vec![1.0, 2.0]))]);
        let mut tape = Tape::new(&reg);
        let w = tape.param("w").unwrap();
        assert!(matches!(tape.backward(w), Err(NumericsError::Domain(_))));
    }

    #[test]
    fn param_bound_once() {
        let reg = registry(&[("w", Tensor::vector(vec![1.0, 2.0]))]);
        let mut tape = Tape::new(&reg);
        let a = tape.param("w").unwrap();
        let b = tape.param("w").unwrap();
        assert_eq!(a, b);
        let s = tape.add(a, b).unwrap();
        let loss = tape.sum(s);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get("w").unwrap().data(), &[2.0, 2.0]);
    }

    #[test]
    fn eval_dropout_returns_same_var() {
        let reg = registry(&[("w", Tensor::vector(vec![1.0, 2.0]))]);
        let mut tape = Tape::new(&reg);
        let w = tape.param("w").unwrap();
        assert_eq!(tape.dropout(w, 0.2).unwrap(), w);
    }

    #[test]
    fn relu_gradient_at_zero_is_zero() {
        let reg = registry(&[("x", Tensor::vector(vec![0.0, 1.0, -1.0]))]);
        let mut tape = Tape::new(&reg);
        let x = tape.param("x").unwrap();
        let r = tape.relu(x);
        let loss = tape.sum(r);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn max_pool_routes_to_first_tie() {
        let reg = registry(&[("x", Tensor::matrix(2, 2, vec![1.0, 0.0, 1.0, 3.0]).unwrap())]);
        let mut tape = Tape::new(&reg);
        let x = tape.param("x").unwrap();
        let p = tape.max_pool_rows(x).unwrap();
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get("x").unwrap().data(), &[1.0, 0.0, 0.0, 1.0]);
    }
}
