//! Minimal reverse-mode differentiation engine with exactly the operations
//! needed by the unrolled cascade: convolutional layers, UNet scaffolding,
//! prompt blocks, the complex-valued acquisition operators for unrolled
//! conjugate-gradient data consistency, and the training loss.
//!
//! Nodes live on an append-only tape (already topologically ordered), carry
//! real-valued tensors, and are generic over f32 (training) / f64 (gradient
//! checking). Complex quantities travel as `[2, ...]` two-channel tensors.

pub mod complexops;
pub mod kernels;
pub mod net;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{RealTensor, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone)]
enum Op<T: Scalar> {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Relu(NodeId),
    Sqrt(NodeId),
    Exp(NodeId),
    Scale(NodeId, T),
    AddConst(NodeId, T),
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    Conv1dT {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    AvgPool2(NodeId),
    Upsample2(NodeId),
    ConcatCh(Vec<NodeId>),
    SliceCh {
        x: NodeId,
        from: usize,
        to: usize,
    },
    MatVec {
        m: NodeId,
        v: NodeId,
    },
    VecMat {
        v: NodeId,
        m: NodeId,
    },
    Softmax(NodeId),
    BilinearResize(NodeId),
    ConcatBroadcastT {
        feat: NodeId,
        map: NodeId,
    },
    RowLookup {
        table: NodeId,
        row: usize,
    },
    SumAll(NodeId),
    MeanAll(NodeId),
    MulScalar {
        x: NodeId,
        s: NodeId,
    },
    ChannelShift {
        x: NodeId,
        shifts: Vec<(i64, i64)>,
    },
    Fft2c {
        x: NodeId,
        inverse: bool,
    },
    SensExpand {
        x: NodeId,
        sens: Arc<RealTensor<T>>,
    },
    SensCombine {
        y: NodeId,
        sens: Arc<RealTensor<T>>,
    },
    MaskMul {
        x: NodeId,
        mask: Arc<Vec<u8>>,
    },
    Normal {
        x: NodeId,
        sens: Arc<RealTensor<T>>,
        mask: Arc<Vec<u8>>,
    },
}

struct Node<T: Scalar> {
    value: RealTensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Append-only computation tape.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<RealTensor<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &RealTensor<T> {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated at `id` after [`backward`](Self::backward); only
    /// leaves retain gradients (interior grads are dropped as consumed).
    pub fn grad(&self, id: NodeId) -> Option<&RealTensor<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, value: RealTensor<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: RealTensor<T>) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf (input data, targets, embeddings treated as fixed).
    pub fn constant(&mut self, value: RealTensor<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    fn binary_same_shape(&mut self, a: NodeId, b: NodeId, name: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::InvalidShape(format!(
                "{name}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "add")?;
        let v = RealTensor::new(
            self.value(a).shape().to_vec(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(&x, &y)| x + y)
                .collect(),
        )?;
        Ok(self.push(v, Op::Add(a, b), self.ng(a) || self.ng(b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "sub")?;
        let v = RealTensor::new(
            self.value(a).shape().to_vec(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(&x, &y)| x - y)
                .collect(),
        )?;
        Ok(self.push(v, Op::Sub(a, b), self.ng(a) || self.ng(b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "mul")?;
        let v = RealTensor::new(
            self.value(a).shape().to_vec(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(&x, &y)| x * y)
                .collect(),
        )?;
        Ok(self.push(v, Op::Mul(a, b), self.ng(a) || self.ng(b)))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape(a, b, "div")?;
        let v = RealTensor::new(
            self.value(a).shape().to_vec(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(&x, &y)| x / y)
                .collect(),
        )?;
        Ok(self.push(v, Op::Div(a, b), self.ng(a) || self.ng(b)))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| -x);
        self.push(v, Op::Neg(a), self.ng(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push(v, Op::Relu(a), self.ng(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.sqrt());
        self.push(v, Op::Sqrt(a), self.ng(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.exp());
        self.push(v, Op::Exp(a), self.ng(a))
    }

    pub fn scale(&mut self, a: NodeId, c: T) -> NodeId {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c), self.ng(a))
    }

    pub fn add_const(&mut self, a: NodeId, c: T) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddConst(a, c), self.ng(a))
    }

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId> {
        let v = kernels::conv2d(self.value(x), self.value(w), self.value(b), stride, pad)?;
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        Ok(self.push(v, Op::Conv2d { x, w, b, stride, pad }, ng))
    }

    pub fn conv1d_t(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let v = kernels::conv1d_t(self.value(x), self.value(w), self.value(b))?;
        let ng = self.ng(x) || self.ng(w) || self.ng(b);
        Ok(self.push(v, Op::Conv1dT { x, w, b }, ng))
    }

    pub fn avgpool2(&mut self, x: NodeId) -> Result<NodeId> {
        let v = kernels::avgpool2(self.value(x))?;
        Ok(self.push(v, Op::AvgPool2(x), self.ng(x)))
    }

    pub fn upsample2(&mut self, x: NodeId) -> Result<NodeId> {
        let v = kernels::upsample2(self.value(x))?;
        Ok(self.push(v, Op::Upsample2(x), self.ng(x)))
    }

    /// Concatenate along the channel (leading) axis; trailing dims must agree.
    pub fn concat_ch(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::InvalidArg("concat of zero tensors".into()));
        }
        let rest = self.value(xs[0]).shape()[1..].to_vec();
        let mut channels = 0usize;
        for &x in xs {
            let s = self.value(x).shape();
            if s[1..] != rest[..] {
                return Err(Error::InvalidShape(format!(
                    "concat mismatch: {:?} vs [_, {rest:?}]",
                    s
                )));
            }
            channels += s[0];
        }
        let mut shape = vec![channels];
        shape.extend_from_slice(&rest);
        let mut data = Vec::with_capacity(shape.iter().product());
        for &x in xs {
            data.extend_from_slice(self.value(x).data());
        }
        let ng = xs.iter().any(|&x| self.ng(x));
        let v = RealTensor::new(shape, data)?;
        Ok(self.push(v, Op::ConcatCh(xs.to_vec()), ng))
    }

    /// Channels `[from, to)` of x.
    pub fn slice_ch(&mut self, x: NodeId, from: usize, to: usize) -> Result<NodeId> {
        let s = self.value(x).shape().to_vec();
        if from >= to || to > s[0] {
            return Err(Error::InvalidArg(format!(
                "bad channel slice [{from}, {to}) of {}",
                s[0]
            )));
        }
        let inner: usize = s[1..].iter().product();
        let mut shape = vec![to - from];
        shape.extend_from_slice(&s[1..]);
        let v = RealTensor::new(
            shape,
            self.value(x).data()[from * inner..to * inner].to_vec(),
        )?;
        Ok(self.push(v, Op::SliceCh { x, from, to }, self.ng(x)))
    }

    /// m: [r, c] x v: [c] -> [r].
    pub fn matvec(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let ms = self.value(m).shape().to_vec();
        let vs = self.value(v).shape().to_vec();
        if ms.len() != 2 || vs.len() != 1 || ms[1] != vs[0] {
            return Err(Error::InvalidShape(format!("matvec {ms:?} x {vs:?}")));
        }
        let (r, c) = (ms[0], ms[1]);
        let mut out = vec![T::zero(); r];
        for i in 0..r {
            let row = &self.value(m).data()[i * c..(i + 1) * c];
            out[i] = row
                .iter()
                .zip(self.value(v).data())
                .map(|(&a, &b)| a * b)
                .sum();
        }
        let ng = self.ng(m) || self.ng(v);
        let val = RealTensor::new(vec![r], out)?;
        Ok(self.push(val, Op::MatVec { m, v }, ng))
    }

    /// v: [k] x m: [k, cols] -> [cols] (weighted sum of rows).
    pub fn vecmat(&mut self, v: NodeId, m: NodeId) -> Result<NodeId> {
        let ms = self.value(m).shape().to_vec();
        let vs = self.value(v).shape().to_vec();
        if ms.len() < 2 || vs.len() != 1 || ms[0] != vs[0] {
            return Err(Error::InvalidShape(format!("vecmat {vs:?} x {ms:?}")));
        }
        let k = ms[0];
        let cols: usize = ms[1..].iter().product();
        let mut out = vec![T::zero(); cols];
        for i in 0..k {
            let wi = self.value(v).data()[i];
            let row = &self.value(m).data()[i * cols..(i + 1) * cols];
            for (o, &r) in out.iter_mut().zip(row) {
                *o = *o + wi * r;
            }
        }
        let ng = self.ng(m) || self.ng(v);
        let val = RealTensor::new(ms[1..].to_vec(), out)?;
        Ok(self.push(val, Op::VecMat { v, m }, ng))
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = kernels::softmax(self.value(x))?;
        Ok(self.push(v, Op::Softmax(x), self.ng(x)))
    }

    pub fn bilinear_resize(&mut self, x: NodeId, h: usize, w: usize) -> Result<NodeId> {
        let v = kernels::bilinear_resize(self.value(x), h, w)?;
        Ok(self.push(v, Op::BilinearResize(x), self.ng(x)))
    }

    /// feat: [c, t, h, w] ++ map: [k, h, w] broadcast over t -> [c+k, t, h, w].
    pub fn concat_broadcast_t(&mut self, feat: NodeId, map: NodeId) -> Result<NodeId> {
        let fs = self.value(feat).shape().to_vec();
        let ms = self.value(map).shape().to_vec();
        if fs.len() != 4 || ms.len() != 3 || fs[2] != ms[1] || fs[3] != ms[2] {
            return Err(Error::InvalidShape(format!(
                "concat_broadcast_t {fs:?} vs {ms:?}"
            )));
        }
        let (c, nt, h, w) = (fs[0], fs[1], fs[2], fs[3]);
        let k = ms[0];
        let mut data = Vec::with_capacity((c + k) * nt * h * w);
        data.extend_from_slice(self.value(feat).data());
        for kk in 0..k {
            let plane = &self.value(map).data()[kk * h * w..(kk + 1) * h * w];
            for _ in 0..nt {
                data.extend_from_slice(plane);
            }
        }
        let ng = self.ng(feat) || self.ng(map);
        let v = RealTensor::new(vec![c + k, nt, h, w], data)?;
        Ok(self.push(v, Op::ConcatBroadcastT { feat, map }, ng))
    }

    pub fn row_lookup(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let ts = self.value(table).shape().to_vec();
        if ts.len() != 2 || row >= ts[0] {
            return Err(Error::InvalidArg(format!(
                "row {row} out of table {ts:?}"
            )));
        }
        let d = ts[1];
        let v = RealTensor::new(
            vec![d],
            self.value(table).data()[row * d..(row + 1) * d].to_vec(),
        )?;
        Ok(self.push(v, Op::RowLookup { table, row }, self.ng(table)))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: T = self.value(x).data().iter().copied().sum();
        self.push(RealTensor::scalar(s), Op::SumAll(x), self.ng(x))
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = T::from_f64(self.value(x).len() as f64);
        let s: T = self.value(x).data().iter().copied().sum();
        self.push(RealTensor::scalar(s / n), Op::MeanAll(x), self.ng(x))
    }

    /// Multiply a tensor by a scalar node (shape [1]).
    pub fn mul_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        if self.value(s).len() != 1 {
            return Err(Error::InvalidShape(format!(
                "scalar node has shape {:?}",
                self.value(s).shape()
            )));
        }
        let sv = self.value(s).item();
        let v = self.value(x).map(|a| a * sv);
        let ng = self.ng(x) || self.ng(s);
        Ok(self.push(v, Op::MulScalar { x, s }, ng))
    }

    /// Channel-shift augmentation on the tape: [2, t, h, w] with k shifts
    /// -> [2(1+k), t, h, w].
    pub fn channel_shift(&mut self, x: NodeId, shifts: &[(i64, i64)]) -> Result<NodeId> {
        crate::shift::validate_shifts(shifts)?;
        let s = self.value(x).shape().to_vec();
        if s.len() != 4 || s[0] != 2 {
            return Err(Error::InvalidShape(format!(
                "channel shift expects [2, t, x, y], got {s:?}"
            )));
        }
        let mut parts: Vec<RealTensor<T>> = vec![self.value(x).clone()];
        for &(dx, dy) in shifts {
            parts.push(kernels::circ_shift_xy(self.value(x), dx, dy)?);
        }
        let mut shape = s.clone();
        shape[0] = 2 * (1 + shifts.len());
        let mut data = Vec::with_capacity(shape.iter().product());
        for p in &parts {
            data.extend_from_slice(p.data());
        }
        let v = RealTensor::new(shape, data)?;
        let ng = self.ng(x);
        Ok(self.push(
            v,
            Op::ChannelShift {
                x,
                shifts: shifts.to_vec(),
            },
            ng,
        ))
    }

    pub fn fft2c(&mut self, x: NodeId, inverse: bool) -> Result<NodeId> {
        let v = complexops::fft2c_2ch(self.value(x), inverse)?;
        Ok(self.push(v, Op::Fft2c { x, inverse }, self.ng(x)))
    }

    pub fn sens_expand(&mut self, x: NodeId, sens: Arc<RealTensor<T>>) -> Result<NodeId> {
        let v = complexops::sens_expand(self.value(x), &sens)?;
        let ng = self.ng(x);
        Ok(self.push(v, Op::SensExpand { x, sens }, ng))
    }

    pub fn sens_combine(&mut self, y: NodeId, sens: Arc<RealTensor<T>>) -> Result<NodeId> {
        let v = complexops::sens_combine(self.value(y), &sens)?;
        let ng = self.ng(y);
        Ok(self.push(v, Op::SensCombine { y, sens }, ng))
    }

    pub fn mask_mul(&mut self, x: NodeId, mask: Arc<Vec<u8>>) -> Result<NodeId> {
        let v = complexops::mask_mul(self.value(x), &mask)?;
        let ng = self.ng(x);
        Ok(self.push(v, Op::MaskMul { x, mask }, ng))
    }

    /// Fused normal operator `E^H E x` (self-adjoint; no intermediate nodes).
    pub fn normal_op(
        &mut self,
        x: NodeId,
        sens: Arc<RealTensor<T>>,
        mask: Arc<Vec<u8>>,
    ) -> Result<NodeId> {
        let v = complexops::normal_apply(self.value(x), &sens, &mask)?;
        let ng = self.ng(x);
        Ok(self.push(v, Op::Normal { x, sens, mask }, ng))
    }

    /// Sum of elementwise products (the real inner product), as a scalar node.
    pub fn inner_re(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let m = self.mul(a, b)?;
        Ok(self.sum_all(m))
    }

    fn acc(&mut self, id: NodeId, g: RealTensor<T>) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(existing) => existing.add_into(&g),
            slot @ None => *slot = Some(g),
        }
    }

    /// Reverse sweep from a scalar node. Gradients of interior nodes are
    /// dropped as they are consumed; leaf gradients remain queryable.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArg(format!(
                "backward needs a scalar, got {:?}",
                self.value(loss).shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(RealTensor::scalar(T::one()));

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].needs_grad {
                self.grads[i] = None;
                continue;
            }
            let is_leaf = matches!(self.nodes[i].op, Op::Leaf);
            if is_leaf {
                continue;
            }
            let Some(go) = self.grads[i].take() else {
                continue;
            };
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.acc(a, go.clone());
                    self.acc(b, go);
                }
                Op::Sub(a, b) => {
                    self.acc(a, go.clone());
                    self.acc(b, go.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    let ga = elementwise(&go, self.value(b), |g, v| g * v);
                    let gb = elementwise(&go, self.value(a), |g, v| g * v);
                    self.acc(a, ga);
                    self.acc(b, gb);
                }
                Op::Div(a, b) => {
                    let vb = self.value(b);
                    let ga = elementwise(&go, vb, |g, v| g / v);
                    let out = RealTensor::new(
                        go.shape().to_vec(),
                        go.data()
                            .iter()
                            .zip(self.value(a).data())
                            .zip(vb.data())
                            .map(|((&g, &va), &v)| -g * va / (v * v))
                            .collect(),
                    )?;
                    self.acc(a, ga);
                    self.acc(b, out);
                }
                Op::Neg(a) => self.acc(a, go.map(|v| -v)),
                Op::Relu(a) => {
                    let mask = self.nodes[i].value.clone();
                    let g = RealTensor::new(
                        go.shape().to_vec(),
                        go.data()
                            .iter()
                            .zip(mask.data())
                            .map(|(&g, &y)| if y > T::zero() { g } else { T::zero() })
                            .collect(),
                    )?;
                    self.acc(a, g);
                }
                Op::Sqrt(a) => {
                    let y = &self.nodes[i].value;
                    let half = T::from_f64(0.5);
                    let g = RealTensor::new(
                        go.shape().to_vec(),
                        go.data()
                            .iter()
                            .zip(y.data())
                            .map(|(&g, &s)| g * half / s)
                            .collect(),
                    )?;
                    self.acc(a, g);
                }
                Op::Exp(a) => {
                    let g = elementwise(&go, &self.nodes[i].value, |g, y| g * y);
                    self.acc(a, g);
                }
                Op::Scale(a, c) => self.acc(a, go.map(|v| v * c)),
                Op::AddConst(a, _) => self.acc(a, go),
                Op::Conv2d { x, w, b, stride, pad } => {
                    let (gx, gw, gb) =
                        kernels::conv2d_bwd(self.value(x), self.value(w), &go, stride, pad)?;
                    self.acc(x, gx);
                    self.acc(w, gw);
                    self.acc(b, gb);
                }
                Op::Conv1dT { x, w, b } => {
                    let (gx, gw, gb) = kernels::conv1d_t_bwd(self.value(x), self.value(w), &go)?;
                    self.acc(x, gx);
                    self.acc(w, gw);
                    self.acc(b, gb);
                }
                Op::AvgPool2(x) => {
                    let gx = kernels::avgpool2_bwd(&self.value(x).shape().to_vec(), &go)?;
                    self.acc(x, gx);
                }
                Op::Upsample2(x) => {
                    let gx = kernels::upsample2_bwd(&self.value(x).shape().to_vec(), &go)?;
                    self.acc(x, gx);
                }
                Op::ConcatCh(xs) => {
                    let inner: usize = go.shape()[1..].iter().product();
                    let mut from = 0usize;
                    for &x in &xs {
                        let c = self.value(x).shape()[0];
                        let mut shape = vec![c];
                        shape.extend_from_slice(&go.shape()[1..]);
                        let g = RealTensor::new(
                            shape,
                            go.data()[from * inner..(from + c) * inner].to_vec(),
                        )?;
                        self.acc(x, g);
                        from += c;
                    }
                }
                Op::SliceCh { x, from, to } => {
                    let mut gx = RealTensor::zeros(self.value(x).shape());
                    let inner: usize = self.value(x).shape()[1..].iter().product();
                    gx.data_mut()[from * inner..to * inner].copy_from_slice(go.data());
                    self.acc(x, gx);
                }
                Op::MatVec { m, v } => {
                    let (r, c) = (self.value(m).shape()[0], self.value(m).shape()[1]);
                    let mut gm = vec![T::zero(); r * c];
                    let mut gv = vec![T::zero(); c];
                    for i2 in 0..r {
                        let g = go.data()[i2];
                        for j in 0..c {
                            gm[i2 * c + j] = g * self.value(v).data()[j];
                            gv[j] = gv[j] + self.value(m).data()[i2 * c + j] * g;
                        }
                    }
                    self.acc(m, RealTensor::new(vec![r, c], gm)?);
                    self.acc(v, RealTensor::new(vec![c], gv)?);
                }
                Op::VecMat { v, m } => {
                    let ms = self.value(m).shape().to_vec();
                    let k = ms[0];
                    let cols: usize = ms[1..].iter().product();
                    let mut gv = vec![T::zero(); k];
                    let mut gm = vec![T::zero(); k * cols];
                    for i2 in 0..k {
                        let row = &self.value(m).data()[i2 * cols..(i2 + 1) * cols];
                        gv[i2] = row.iter().zip(go.data()).map(|(&a, &b)| a * b).sum();
                        let wv = self.value(v).data()[i2];
                        for (slot, &g) in gm[i2 * cols..(i2 + 1) * cols].iter_mut().zip(go.data())
                        {
                            *slot = wv * g;
                        }
                    }
                    self.acc(v, RealTensor::new(vec![k], gv)?);
                    self.acc(m, RealTensor::new(ms, gm)?);
                }
                Op::Softmax(x) => {
                    let g = kernels::softmax_bwd(&self.nodes[i].value, &go);
                    self.acc(x, g);
                }
                Op::BilinearResize(x) => {
                    let gx = kernels::bilinear_resize_bwd(&self.value(x).shape().to_vec(), &go)?;
                    self.acc(x, gx);
                }
                Op::ConcatBroadcastT { feat, map } => {
                    let fs = self.value(feat).shape().to_vec();
                    let (c, nt, h, w) = (fs[0], fs[1], fs[2], fs[3]);
                    let k = self.value(map).shape()[0];
                    let gfeat = RealTensor::new(
                        fs.clone(),
                        go.data()[..c * nt * h * w].to_vec(),
                    )?;
                    let mut gmap = vec![T::zero(); k * h * w];
                    for kk in 0..k {
                        for t in 0..nt {
                            let src =
                                &go.data()[((c + kk) * nt + t) * h * w..((c + kk) * nt + t + 1) * h * w];
                            for (gslot, &g) in
                                gmap[kk * h * w..(kk + 1) * h * w].iter_mut().zip(src)
                            {
                                *gslot = *gslot + g;
                            }
                        }
                    }
                    self.acc(feat, gfeat);
                    self.acc(map, RealTensor::new(vec![k, h, w], gmap)?);
                }
                Op::RowLookup { table, row } => {
                    let mut gt = RealTensor::zeros(self.value(table).shape());
                    let d = self.value(table).shape()[1];
                    gt.data_mut()[row * d..(row + 1) * d].copy_from_slice(go.data());
                    self.acc(table, gt);
                }
                Op::SumAll(x) => {
                    let g = RealTensor::full(self.value(x).shape(), go.item());
                    self.acc(x, g);
                }
                Op::MeanAll(x) => {
                    let n = T::from_f64(self.value(x).len() as f64);
                    let g = RealTensor::full(self.value(x).shape(), go.item() / n);
                    self.acc(x, g);
                }
                Op::MulScalar { x, s } => {
                    let sv = self.value(s).item();
                    let gx = go.map(|g| g * sv);
                    let gs: T = go
                        .data()
                        .iter()
                        .zip(self.value(x).data())
                        .map(|(&g, &v)| g * v)
                        .sum();
                    self.acc(x, gx);
                    self.acc(s, RealTensor::scalar(gs));
                }
                Op::ChannelShift { x, shifts } => {
                    let s = self.value(x).shape().to_vec();
                    let inner: usize = s[1..].iter().product();
                    let mut gx = RealTensor::new(s.clone(), go.data()[..2 * inner].to_vec())?;
                    let mut rest_shape = s.clone();
                    rest_shape[0] = 2;
                    for (j, &(dx, dy)) in shifts.iter().enumerate() {
                        let part = RealTensor::new(
                            rest_shape.clone(),
                            go.data()[(2 + 2 * j) * inner..(4 + 2 * j) * inner].to_vec(),
                        )?;
                        gx.add_into(&kernels::circ_shift_xy(&part, -dx, -dy)?);
                    }
                    self.acc(x, gx);
                }
                Op::Fft2c { x, inverse } => {
                    let gx = complexops::fft2c_2ch(&go, !inverse)?;
                    self.acc(x, gx);
                }
                Op::SensExpand { x, sens } => {
                    let gx = complexops::sens_combine(&go, &sens)?;
                    self.acc(x, gx);
                }
                Op::SensCombine { y, sens } => {
                    let gy = complexops::sens_expand(&go, &sens)?;
                    self.acc(y, gy);
                }
                Op::MaskMul { x, mask } => {
                    let gx = complexops::mask_mul(&go, &mask)?;
                    self.acc(x, gx);
                }
                Op::Normal { x, sens, mask } => {
                    let gx = complexops::normal_apply(&go, &sens, &mask)?;
                    self.acc(x, gx);
                }
            }
        }
        Ok(())
    }
}

fn elementwise<T: Scalar>(
    a: &RealTensor<T>,
    b: &RealTensor<T>,
    f: impl Fn(T, T) -> T,
) -> RealTensor<T> {
    RealTensor::new(
        a.shape().to_vec(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
    .expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_mul_backward() {
        let mut tape = Tape::<f64>::new();
        let a = tape.param(RealTensor::new(vec![2], vec![2.0, 3.0]).unwrap());
        let b = tape.param(RealTensor::new(vec![2], vec![5.0, 7.0]).unwrap());
        let p = tape.mul(a, b).unwrap();
        let s = tape.sum_all(p);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(a).unwrap().data(), &[5.0, 7.0]);
        assert_eq!(tape.grad(b).unwrap().data(), &[2.0, 3.0]);
    }

    #[test]
    fn relu_masks_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.param(RealTensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap());
        let r = tape.relu(a);
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
        let s = tape.sum_all(r);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(a).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.param(RealTensor::scalar(3.0));
        let c = tape.constant(RealTensor::scalar(4.0));
        let p = tape.mul(a, c).unwrap();
        tape.backward(p).unwrap();
        assert_eq!(tape.grad(a).unwrap().item(), 4.0);
        assert!(tape.grad(c).is_none());
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::<f64>::new();
        let a = tape.param(RealTensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        assert!(tape.backward(a).is_err());
    }

    #[test]
    fn scalar_pipeline_div_sqrt() {
        // f(x) = sqrt(x) / (x + 1); f'(x) = (1/(2 sqrt(x)) (x+1) - sqrt(x)) / (x+1)^2
        let x0 = 2.0f64;
        let mut tape = Tape::<f64>::new();
        let x = tape.param(RealTensor::scalar(x0));
        let sq = tape.sqrt(x);
        let xp1 = tape.add_const(x, 1.0);
        let y = tape.div(sq, xp1).unwrap();
        tape.backward(y).unwrap();
        let want = ((x0 + 1.0) / (2.0 * x0.sqrt()) - x0.sqrt()) / (x0 + 1.0).powi(2);
        assert!((tape.grad(x).unwrap().item() - want).abs() < 1e-12);
    }
}
