use std::rc::Rc;

use super::tensor::{
    axis_split, broadcast_offsets, broadcast_shape, matmul_into, matmul_nt_into, matmul_tn_into, reduce_to,
};
use super::{AdError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Backward rule for a [`Tape::custom`] op: receives the output gradient,
/// the input values and the output value; returns one gradient per input.
pub type CustomBackward = Rc<dyn Fn(&Tensor, &[&Tensor], &Tensor) -> Vec<Tensor>>;

#[derive(Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Affine(Var, Var, Var),
    MatMul(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
    Sum(Var),
    Mean(Var),
    SumAxis(Var),
    MeanAxis(Var, usize),
    VarAxis(Var, usize),
    ConcatCols(Var, Var),
    Custom(Vec<Var>, CustomBackward),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Affine(..) => "affine",
            Op::MatMul(..) => "matmul",
            Op::Relu(..) => "relu",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Square(..) => "square",
            Op::Clamp(..) => "clamp",
            Op::Minimum(..) => "minimum",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumAxis(..) => "sum_axis",
            Op::MeanAxis(..) => "mean_axis",
            Op::VarAxis(..) => "var_axis",
            Op::ConcatCols(..) => "concat_cols",
            Op::Custom(..) => "custom",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of one forward pass.
///
/// Operations never fail eagerly. The first shape, domain or non-finite
/// error poisons the tape and is reported by [`Tape::check`],
/// [`Tape::value`] consumers that call it, and [`Tape::backward`].
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    error: Option<AdError>,
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of `shape` if nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    pub fn check(&self) -> Result<(), AdError> {
        match &self.error {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    fn poison(&mut self, err: AdError) {
        if self.error.is_none() {
            self.error = Some(err);
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        if self.error.is_none() && !value.is_finite() {
            self.error = Some(AdError::NonFinite { op: op.name() });
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push_failed(&mut self, err: AdError, op: Op) -> Var {
        self.poison(err);
        self.nodes.push(Node { value: Tensor::scalar(0.0), op });
        Var(self.nodes.len() - 1)
    }

    /// Input or parameter leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.leaf(Tensor::scalar(value))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let Some(shape) = broadcast_shape(va.shape(), vb.shape()) else {
            let msg = format!("cannot broadcast {:?} with {:?}", va.shape(), vb.shape());
            let name = op.name();
            return self.push_failed(AdError::Shape { op: name, msg }, op);
        };
        let data = if va.shape() == vb.shape() {
            va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let oa = broadcast_offsets(va.shape(), &shape);
            let ob = broadcast_offsets(vb.shape(), &shape);
            oa.iter().zip(&ob).map(|(&i, &j)| f(va.data()[i], vb.data()[j])).collect()
        };
        self.push(Tensor::new(shape, data).expect("broadcast shape"), op)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out = self.value(a).map(f);
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a), |x| -x)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        if let Some(bad) = self.value(a).data().iter().find(|v| !(**v > 0.0)) {
            let msg = format!("log of non-positive value {bad}");
            return self.push_failed(AdError::Domain { op: "log", msg }, Op::Log(a));
        }
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// Elementwise clamp; the gradient is zero where the input is clipped.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    /// Elementwise minimum of two same-shape tensors. Ties route the gradient
    /// to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        if self.value(a).shape() != self.value(b).shape() {
            let msg = format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape());
            return self.push_failed(AdError::Shape { op: "minimum", msg }, Op::Minimum(a, b));
        }
        self.binary(a, b, Op::Minimum(a, b), f64::min)
    }

    /// `x · w + b` for `x: [batch, in]`, `w: [in, out]`, `b: [out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        let op = Op::Affine(x, w, b);
        let (Some((m, k)), [k2, n]) = (vx.as_matrix(), vw.shape()) else {
            let msg = format!("x {:?}, w {:?}", vx.shape(), vw.shape());
            return self.push_failed(AdError::Shape { op: "affine", msg }, op);
        };
        let (k2, n) = (*k2, *n);
        if vx.rank() != 2 || k != k2 || vb.shape() != [n] {
            let msg = format!("x {:?}, w {:?}, b {:?}", vx.shape(), vw.shape(), vb.shape());
            return self.push_failed(AdError::Shape { op: "affine", msg }, op);
        }
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(vb.data());
        }
        matmul_into(vx.data(), vw.data(), &mut out, m, k, n);
        self.push(Tensor::new(vec![m, n], out).expect("affine shape"), op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let op = Op::MatMul(a, b);
        match (va.shape(), vb.shape()) {
            ([m, k], [k2, n]) if k == k2 => {
                let (m, k, n) = (*m, *k, *n);
                let mut out = vec![0.0; m * n];
                matmul_into(va.data(), vb.data(), &mut out, m, k, n);
                self.push(Tensor::new(vec![m, n], out).expect("matmul shape"), op)
            }
            (sa, sb) => {
                let msg = format!("{sa:?} x {sb:?}");
                self.push_failed(AdError::Shape { op: "matmul", msg }, op)
            }
        }
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    fn axis_reduce(&mut self, a: Var, axis: usize, op: Op, f: impl Fn(&[f64]) -> f64) -> Var {
        let v = self.value(a);
        if axis >= v.rank() {
            let msg = format!("axis {axis} out of range for {:?}", v.shape());
            let name = op.name();
            return self.push_failed(AdError::Shape { op: name, msg }, op);
        }
        let (outer, len, inner) = axis_split(v.shape(), axis);
        let mut out = Vec::with_capacity(outer * inner);
        let mut lane = vec![0.0; len];
        for o in 0..outer {
            for i in 0..inner {
                for (k, l) in lane.iter_mut().enumerate() {
                    *l = v.data()[(o * len + k) * inner + i];
                }
                out.push(f(&lane));
            }
        }
        let mut shape = v.shape().to_vec();
        shape[axis] = 1;
        self.push(Tensor::new(shape, out).expect("reduce shape"), op)
    }

    /// Sum along `axis`, keeping it with length 1.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Var {
        self.axis_reduce(a, axis, Op::SumAxis(a), |l| l.iter().sum())
    }

    /// Mean along `axis`, keeping it with length 1.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Var {
        self.axis_reduce(a, axis, Op::MeanAxis(a, axis), |l| l.iter().sum::<f64>() / l.len() as f64)
    }

    /// Population variance along `axis`, keeping it with length 1.
    pub fn var_axis(&mut self, a: Var, axis: usize) -> Var {
        self.axis_reduce(a, axis, Op::VarAxis(a, axis), |l| {
            let n = l.len() as f64;
            let m = l.iter().sum::<f64>() / n;
            l.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
        })
    }

    /// Concatenates two `[batch, _]` matrices along columns.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let op = Op::ConcatCols(a, b);
        match (va.shape(), vb.shape()) {
            ([ra, ca], [rb, cb]) if ra == rb => {
                let (r, ca, cb) = (*ra, *ca, *cb);
                let mut out = Vec::with_capacity(r * (ca + cb));
                for i in 0..r {
                    out.extend_from_slice(&va.data()[i * ca..(i + 1) * ca]);
                    out.extend_from_slice(&vb.data()[i * cb..(i + 1) * cb]);
                }
                self.push(Tensor::new(vec![r, ca + cb], out).expect("concat shape"), op)
            }
            (sa, sb) => {
                let msg = format!("{sa:?} with {sb:?}");
                self.push_failed(AdError::Shape { op: "concat_cols", msg }, op)
            }
        }
    }

    /// Records an op with a caller-supplied value and backward rule.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, backward: CustomBackward) -> Var {
        self.push(value, Op::Custom(inputs.to_vec(), backward))
    }

    /// Reverse pass from scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients, AdError> {
        self.check()?;
        if self.value(loss).len() != 1 {
            return Err(AdError::Shape {
                op: "backward",
                msg: format!("loss must be a scalar, got shape {:?}", self.value(loss).shape()),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            for (input, contribution) in self.local_grads(node, &g)? {
                if !contribution.is_finite() {
                    return Err(AdError::NonFinite { op: node.op.name() });
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.data_mut().iter_mut().zip(contribution.data()).for_each(|(a, c)| *a += c),
                    slot => *slot = Some(contribution),
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn local_grads(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>, AdError> {
        let val = |v: Var| &self.nodes[v.0].value;
        let out = &node.value;
        let same = |v: Var, f: &dyn Fn(usize) -> f64| -> (Var, Tensor) {
            let data = (0..g.len()).map(|i| g.data()[i] * f(i)).collect();
            (v, Tensor::new(val(v).shape().to_vec(), data).expect("unary grad"))
        };
        let bcast = |v: Var, full: Tensor| (v, reduce_to(&full, val(v).shape()));
        // Values of a broadcast operand laid out like the output.
        let expand = |v: Var| -> Vec<f64> {
            let t = val(v);
            broadcast_offsets(t.shape(), out.shape()).into_iter().map(|o| t.data()[o]).collect()
        };

        Ok(match &node.op {
            Op::Leaf => vec![],
            Op::Add(a, b) => vec![bcast(*a, g.clone()), bcast(*b, g.clone())],
            Op::Sub(a, b) => vec![bcast(*a, g.clone()), bcast(*b, g.map(|x| -x))],
            Op::Mul(a, b) => {
                let (ea, eb) = (expand(*a), expand(*b));
                let ga = Tensor::new(out.shape().to_vec(), g.data().iter().zip(&eb).map(|(g, y)| g * y).collect())?;
                let gb = Tensor::new(out.shape().to_vec(), g.data().iter().zip(&ea).map(|(g, x)| g * x).collect())?;
                vec![bcast(*a, ga), bcast(*b, gb)]
            }
            Op::Div(a, b) => {
                let (ea, eb) = (expand(*a), expand(*b));
                let ga = Tensor::new(out.shape().to_vec(), g.data().iter().zip(&eb).map(|(g, y)| g / y).collect())?;
                let gb = Tensor::new(
                    out.shape().to_vec(),
                    (0..g.len()).map(|i| -g.data()[i] * ea[i] / (eb[i] * eb[i])).collect(),
                )?;
                vec![bcast(*a, ga), bcast(*b, gb)]
            }
            Op::Neg(a) => vec![same(*a, &|_| -1.0)],
            Op::Scale(a, c) => vec![same(*a, &|_| *c)],
            Op::AddScalar(a) => vec![(*a, g.clone())],
            Op::Relu(a) => {
                let x = val(*a);
                vec![same(*a, &|i| if x.data()[i] > 0.0 { 1.0 } else { 0.0 })]
            }
            Op::Tanh(a) => vec![same(*a, &|i| 1.0 - out.data()[i] * out.data()[i])],
            Op::Sigmoid(a) => vec![same(*a, &|i| out.data()[i] * (1.0 - out.data()[i]))],
            Op::Exp(a) => vec![same(*a, &|i| out.data()[i])],
            Op::Log(a) => {
                let x = val(*a);
                vec![same(*a, &|i| 1.0 / x.data()[i])]
            }
            Op::Square(a) => {
                let x = val(*a);
                vec![same(*a, &|i| 2.0 * x.data()[i])]
            }
            Op::Clamp(a, lo, hi) => {
                let x = val(*a);
                vec![same(*a, &|i| {
                    let v = x.data()[i];
                    if v >= *lo && v <= *hi {
                        1.0
                    } else {
                        0.0
                    }
                })]
            }
            Op::Minimum(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let pick_a = |i: usize| x.data()[i] <= y.data()[i];
                vec![
                    same(*a, &|i| if pick_a(i) { 1.0 } else { 0.0 }),
                    same(*b, &|i| if pick_a(i) { 0.0 } else { 1.0 }),
                ]
            }
            Op::Affine(x, w, b) => {
                let (vx, vw) = (val(*x), val(*w));
                let (m, k) = (vx.shape()[0], vx.shape()[1]);
                let n = vw.shape()[1];
                let mut gx = vec![0.0; m * k];
                matmul_nt_into(g.data(), vw.data(), &mut gx, m, n, k);
                let mut gw = vec![0.0; k * n];
                matmul_tn_into(vx.data(), g.data(), &mut gw, m, k, n);
                let mut gb = vec![0.0; n];
                for r in 0..m {
                    for (acc, v) in gb.iter_mut().zip(&g.data()[r * n..(r + 1) * n]) {
                        *acc += v;
                    }
                }
                vec![
                    (*x, Tensor::new(vec![m, k], gx)?),
                    (*w, Tensor::new(vec![k, n], gw)?),
                    (*b, Tensor::vector(gb)),
                ]
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                let mut ga = vec![0.0; m * k];
                matmul_nt_into(g.data(), vb.data(), &mut ga, m, n, k);
                let mut gb = vec![0.0; k * n];
                matmul_tn_into(va.data(), g.data(), &mut gb, m, k, n);
                vec![(*a, Tensor::new(vec![m, k], ga)?), (*b, Tensor::new(vec![k, n], gb)?)]
            }
            Op::Sum(a) => vec![(*a, Tensor::full(val(*a).shape(), g.item()))],
            Op::Mean(a) => {
                let x = val(*a);
                vec![(*a, Tensor::full(x.shape(), g.item() / x.len() as f64))]
            }
            Op::SumAxis(a) => vec![bcast_up(*a, val(*a), g, 1.0)],
            Op::MeanAxis(a, axis) => {
                let x = val(*a);
                vec![bcast_up(*a, x, g, 1.0 / x.shape()[*axis] as f64)]
            }
            Op::VarAxis(a, axis) => {
                let x = val(*a);
                let (outer, len, inner) = axis_split(x.shape(), *axis);
                let mut gx = vec![0.0; x.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| (o * len + k) * inner + i;
                        let mean = (0..len).map(|k| x.data()[at(k)]).sum::<f64>() / len as f64;
                        let go = g.data()[o * inner + i];
                        for k in 0..len {
                            gx[at(k)] = go * 2.0 * (x.data()[at(k)] - mean) / len as f64;
                        }
                    }
                }
                vec![(*a, Tensor::new(x.shape().to_vec(), gx)?)]
            }
            Op::ConcatCols(a, b) => {
                let (ca, cb) = (val(*a).shape()[1], val(*b).shape()[1]);
                let rows = g.shape()[0];
                let mut ga = Vec::with_capacity(rows * ca);
                let mut gb = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                vec![(*a, Tensor::new(vec![rows, ca], ga)?), (*b, Tensor::new(vec![rows, cb], gb)?)]
            }
            Op::Custom(inputs, backward) => {
                let in_vals: Vec<&Tensor> = inputs.iter().map(|v| val(*v)).collect();
                let gs = backward(g, &in_vals, out);
                if gs.len() != inputs.len() || gs.iter().zip(&in_vals).any(|(g, x)| g.shape() != x.shape()) {
                    return Err(AdError::Shape { op: "custom", msg: "backward returned mismatched gradients".into() });
                }
                inputs.iter().copied().zip(gs).collect()
            }
        })
    }
}

/// Spreads a reduced gradient back over the reduced axis, times `factor`.
fn bcast_up(v: Var, x: &Tensor, g: &Tensor, factor: f64) -> (Var, Tensor) {
    let offs = broadcast_offsets(g.shape(), x.shape());
    let data = offs.into_iter().map(|o| g.data()[o] * factor).collect();
    (v, Tensor::new(x.shape().to_vec(), data).expect("reduction grad"))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn affine_identity_and_bias() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let w = tape.leaf(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let b = tape.leaf(Tensor::zeros(&[2]));
        let y = tape.affine(x, w, b);
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);

        let z = tape.leaf(Tensor::zeros(&[3, 2]));
        let b2 = tape.leaf(t(&[2], &[5.0, -1.0]));
        let y = tape.affine(z, w, b2);
        assert_eq!(tape.value(y).data(), &[5.0, -1.0, 5.0, -1.0, 5.0, -1.0]);

        let x = tape.leaf(t(&[1, 1], &[2.0]));
        let w = tape.leaf(t(&[1, 1], &[3.0]));
        let b = tape.leaf(t(&[1], &[1.0]));
        let y = tape.affine(x, w, b);
        assert_eq!(tape.value(y).data(), &[7.0]);
    }

    #[test]
    fn activation_values() {
        let mut tape = Tape::new();
        let z = tape.leaf(Tensor::scalar(0.0));
        let s = tape.sigmoid(z);
        let th = tape.tanh(z);
        assert_eq!(tape.value(s).item(), 0.5);
        assert_eq!(tape.value(th).item(), 0.0);
        let c = tape.leaf(t(&[1, 4], &[3.0; 4]));
        let v = tape.var_axis(c, 1);
        assert_eq!(tape.value(v).data(), &[0.0]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let w = tape.leaf(t(&[2, 3], &[0.1, -0.2, 0.3, 0.4, 0.5, -0.6]));
        let s = tape.sum(w);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let mut tape = Tape::new();
        let c = t(&[3], &[1.0, -2.0, 0.5]);
        let x = tape.leaf(c.clone());
        let target = tape.leaf(c);
        let d = tape.sub(x, target);
        let sq = tape.square(d);
        let loss = tape.mean(sq);
        let g = tape.backward(loss).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn non_finite_names_the_op() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(800.0));
        let e = tape.exp(x);
        assert_eq!(tape.check(), Err(AdError::NonFinite { op: "exp" }));
        assert!(matches!(tape.backward(e), Err(AdError::NonFinite { op: "exp" })));

        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(-1.0));
        tape.log(x);
        assert!(matches!(tape.check(), Err(AdError::Domain { op: "log", .. })));
    }

    #[test]
    fn shape_errors_poison() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2, 3]));
        let b = tape.leaf(Tensor::zeros(&[2, 2]));
        tape.add(a, b);
        assert!(matches!(tape.check(), Err(AdError::Shape { op: "add", .. })));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2]));
        assert!(tape.backward(a).is_err());
    }
}
