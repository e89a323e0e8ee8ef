//! Elementwise, reduction and shape operations on [`Var`].
//!
//! Shape agreement is asserted here; public APIs validate shapes and return
//! proper errors before graphs are built, so panics mark internal bugs.

use super::{Arr, Grads, Node, Op, Var};
use ndarray::{Axis, IxDyn, Slice};

fn assert_same_shape(a: &Var, b: &Var, what: &str) {
    assert_eq!(a.shape(), b.shape(), "{what}: shape mismatch");
}

// ---------------------------------------------------------------- binary ops

struct Add;
impl Op for Add {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        grads.accum(&node.parents()[0], g.clone());
        grads.accum(&node.parents()[1], g.clone());
    }
}

pub fn add(a: &Var, b: &Var) -> Var {
    assert_same_shape(a, b, "add");
    let v = &*a.value_ref() + &*b.value_ref();
    Var::from_op(v, vec![a.clone(), b.clone()], Box::new(Add))
}

struct SubOp;
impl Op for SubOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        grads.accum(&node.parents()[0], g.clone());
        grads.accum(&node.parents()[1], -g);
    }
}

pub fn sub(a: &Var, b: &Var) -> Var {
    assert_same_shape(a, b, "sub");
    let v = &*a.value_ref() - &*b.value_ref();
    Var::from_op(v, vec![a.clone(), b.clone()], Box::new(SubOp))
}

struct MulOp;
impl Op for MulOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let a = &node.parents()[0];
        let b = &node.parents()[1];
        if a.needs_grad() {
            grads.accum(a, g * &*b.value_ref());
        }
        if b.needs_grad() {
            grads.accum(b, g * &*a.value_ref());
        }
    }
}

pub fn mul(a: &Var, b: &Var) -> Var {
    assert_same_shape(a, b, "mul");
    let v = &*a.value_ref() * &*b.value_ref();
    Var::from_op(v, vec![a.clone(), b.clone()], Box::new(MulOp))
}

struct DivOp;
impl Op for DivOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let a = &node.parents()[0];
        let b = &node.parents()[1];
        let bv = b.value_ref();
        if a.needs_grad() {
            grads.accum(a, g / &*bv);
        }
        if b.needs_grad() {
            let out = node.value();
            grads.accum(b, -(g * &*out) / &*bv);
        }
    }
}

pub fn div(a: &Var, b: &Var) -> Var {
    assert_same_shape(a, b, "div");
    let v = &*a.value_ref() / &*b.value_ref();
    Var::from_op(v, vec![a.clone(), b.clone()], Box::new(DivOp))
}

// ----------------------------------------------------------------- unary ops

macro_rules! unary_op {
    ($name:ident, $opty:ident, $fwd:expr, $bwd:expr) => {
        struct $opty;
        impl Op for $opty {
            fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
                let p = &node.parents()[0];
                if p.needs_grad() {
                    let out = node.value();
                    let pv = p.value_ref();
                    #[allow(clippy::redundant_closure_call)]
                    grads.accum(p, ($bwd)(g, &*pv, &*out));
                }
            }
        }
        pub fn $name(a: &Var) -> Var {
            #[allow(clippy::redundant_closure_call)]
            let v = ($fwd)(&*a.value_ref());
            Var::from_op(v, vec![a.clone()], Box::new($opty))
        }
    };
}

unary_op!(neg, NegOp, |a: &Arr| -a, |g: &Arr, _a: &Arr, _o: &Arr| -g);
unary_op!(
    sq,
    SqOp,
    |a: &Arr| a * a,
    |g: &Arr, a: &Arr, _o: &Arr| 2.0 * &(g * a)
);
unary_op!(
    sqrt,
    SqrtOp,
    |a: &Arr| a.mapv(f64::sqrt),
    |g: &Arr, _a: &Arr, o: &Arr| 0.5 * &(g / o)
);
unary_op!(
    abs,
    AbsOp,
    |a: &Arr| a.mapv(f64::abs),
    |g: &Arr, a: &Arr, _o: &Arr| g * &a.mapv(f64::signum)
);
unary_op!(
    tanh,
    TanhOp,
    |a: &Arr| a.mapv(f64::tanh),
    |g: &Arr, _a: &Arr, o: &Arr| g * &o.mapv(|y| 1.0 - y * y)
);
unary_op!(
    exp,
    ExpOp,
    |a: &Arr| a.mapv(f64::exp),
    |g: &Arr, _a: &Arr, o: &Arr| g * o
);

struct LeakyReluOp {
    slope: f64,
}
impl Op for LeakyReluOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let p = &node.parents()[0];
        if p.needs_grad() {
            let s = self.slope;
            let pv = p.value_ref();
            grads.accum(p, g * &pv.mapv(|x| if x > 0.0 { 1.0 } else { s }));
        }
    }
}

pub fn leaky_relu(a: &Var, slope: f64) -> Var {
    let v = a.value_ref().mapv(|x| if x > 0.0 { x } else { slope * x });
    Var::from_op(v, vec![a.clone()], Box::new(LeakyReluOp { slope }))
}

pub fn relu(a: &Var) -> Var {
    leaky_relu(a, 0.0)
}

/// The derivative field of leaky-relu as a graph value. Its own gradient is
/// zero (the second derivative of a piecewise-linear activation vanishes
/// almost everywhere), which is what lets a critic's input gradient be
/// expressed with first-order ops only.
struct LreluMaskOp;
impl Op for LreluMaskOp {
    fn backward(&self, _node: &Node, _g: &Arr, _grads: &mut Grads) {}
}

pub fn leaky_relu_mask(pre_activation: &Var, slope: f64) -> Var {
    let v = pre_activation
        .value_ref()
        .mapv(|x| if x > 0.0 { 1.0 } else { slope });
    Var::from_op(v, vec![pre_activation.clone()], Box::new(LreluMaskOp))
}

struct AddScalarOp;
impl Op for AddScalarOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        grads.accum(&node.parents()[0], g.clone());
    }
}

pub fn add_scalar(a: &Var, c: f64) -> Var {
    let v = a.value_ref().mapv(|x| x + c);
    Var::from_op(v, vec![a.clone()], Box::new(AddScalarOp))
}

struct MulScalarOp {
    c: f64,
}
impl Op for MulScalarOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        grads.accum(&node.parents()[0], g * self.c);
    }
}

pub fn mul_scalar(a: &Var, c: f64) -> Var {
    let v = a.value_ref().mapv(|x| x * c);
    Var::from_op(v, vec![a.clone()], Box::new(MulScalarOp { c }))
}

// ---------------------------------------------------------------- reductions

struct SumAllOp;
impl Op for SumAllOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let p = &node.parents()[0];
        let gs = g[[]];
        grads.accum(p, Arr::from_elem(p.value_ref().raw_dim(), gs));
    }
}

pub fn sum_all(a: &Var) -> Var {
    let v = ndarray::arr0(a.value_ref().sum()).into_dyn();
    Var::from_op(v, vec![a.clone()], Box::new(SumAllOp))
}

struct MeanAllOp;
impl Op for MeanAllOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let p = &node.parents()[0];
        let n = p.value_ref().len() as f64;
        let gs = g[[]] / n;
        grads.accum(p, Arr::from_elem(p.value_ref().raw_dim(), gs));
    }
}

pub fn mean_all(a: &Var) -> Var {
    let v = ndarray::arr0(a.value_ref().mean().expect("mean of empty")).into_dyn();
    Var::from_op(v, vec![a.clone()], Box::new(MeanAllOp))
}

/// Sum over all axes except the first: (N, ...) -> (N,).
struct SumPerSampleOp;
impl Op for SumPerSampleOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let p = &node.parents()[0];
        let pv = p.value_ref();
        let mut out = Arr::zeros(pv.raw_dim());
        for (n, mut sample) in out.outer_iter_mut().enumerate() {
            sample.fill(g[[n]]);
        }
        drop(pv);
        grads.accum(p, out);
    }
}

pub fn sum_per_sample(a: &Var) -> Var {
    let av = a.value_ref();
    let n = av.shape()[0];
    let mut v = ndarray::Array1::<f64>::zeros(n);
    for (i, sample) in av.outer_iter().enumerate() {
        v[i] = sample.sum();
    }
    drop(av);
    Var::from_op(v.into_dyn(), vec![a.clone()], Box::new(SumPerSampleOp))
}

// ----------------------------------------------------------------- shape ops

struct ReshapeOp;
impl Op for ReshapeOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let p = &node.parents()[0];
        let dim = p.value_ref().raw_dim();
        let back = g
            .clone()
            .into_shape_with_order(dim)
            .expect("reshape backward");
        grads.accum(p, back);
    }
}

pub fn reshape(a: &Var, shape: &[usize]) -> Var {
    let v = a
        .value()
        .into_shape_with_order(IxDyn(shape))
        .expect("reshape: incompatible shape");
    Var::from_op(v, vec![a.clone()], Box::new(ReshapeOp))
}

struct NarrowOp {
    axis: usize,
    start: usize,
    len: usize,
}
impl Op for NarrowOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let p = &node.parents()[0];
        let mut out = Arr::zeros(p.value_ref().raw_dim());
        out.slice_axis_mut(
            Axis(self.axis),
            Slice::from(self.start..self.start + self.len),
        )
        .assign(g);
        grads.accum(p, out);
    }
}

/// Contiguous slice along one axis.
pub fn narrow(a: &Var, axis: usize, start: usize, len: usize) -> Var {
    let v = a
        .value_ref()
        .slice_axis(Axis(axis), Slice::from(start..start + len))
        .to_owned();
    Var::from_op(v, vec![a.clone()], Box::new(NarrowOp { axis, start, len }))
}

struct ConcatOp {
    axis: usize,
}
impl Op for ConcatOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let mut offset = 0;
        for p in node.parents() {
            let len = p.value_ref().shape()[self.axis];
            let part = g
                .slice_axis(Axis(self.axis), Slice::from(offset..offset + len))
                .to_owned();
            grads.accum(p, part);
            offset += len;
        }
    }
}

pub fn concat(axis: usize, parts: &[&Var]) -> Var {
    assert!(!parts.is_empty(), "concat of nothing");
    let refs: Vec<_> = parts.iter().map(|p| p.value_ref()).collect();
    let views: Vec<_> = refs.iter().map(|r| r.view()).collect();
    let v = ndarray::concatenate(Axis(axis), &views).expect("concat: incompatible shapes");
    drop(refs);
    Var::from_op(
        v,
        parts.iter().map(|p| (*p).clone()).collect(),
        Box::new(ConcatOp { axis }),
    )
}

// ------------------------------------------------------------------- softmax

/// log-softmax along axis 1 of an (N, K, H, W) tensor.
struct LogSoftmaxOp;
impl Op for LogSoftmaxOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let p = &node.parents()[0];
        if !p.needs_grad() {
            return;
        }
        let y = node.value();
        let k = y.shape()[1];
        let mut gx = g.clone();
        let (n, h, w) = (y.shape()[0], y.shape()[2], y.shape()[3]);
        for ni in 0..n {
            for hi in 0..h {
                for wi in 0..w {
                    let mut gsum = 0.0;
                    for ki in 0..k {
                        gsum += g[[ni, ki, hi, wi]];
                    }
                    for ki in 0..k {
                        gx[[ni, ki, hi, wi]] -= y[[ni, ki, hi, wi]].exp() * gsum;
                    }
                }
            }
        }
        grads.accum(p, gx);
    }
}

pub fn log_softmax_channels(a: &Var) -> Var {
    let av = a.value_ref();
    assert_eq!(av.ndim(), 4, "log_softmax_channels expects (N,K,H,W)");
    let (n, k, h, w) = (av.shape()[0], av.shape()[1], av.shape()[2], av.shape()[3]);
    let mut v = av.clone();
    for ni in 0..n {
        for hi in 0..h {
            for wi in 0..w {
                let mut mx = f64::NEG_INFINITY;
                for ki in 0..k {
                    mx = mx.max(av[[ni, ki, hi, wi]]);
                }
                let mut z = 0.0;
                for ki in 0..k {
                    z += (av[[ni, ki, hi, wi]] - mx).exp();
                }
                let lse = mx + z.ln();
                for ki in 0..k {
                    v[[ni, ki, hi, wi]] = av[[ni, ki, hi, wi]] - lse;
                }
            }
        }
    }
    drop(av);
    Var::from_op(v, vec![a.clone()], Box::new(LogSoftmaxOp))
}

// ------------------------------------------------- quantization graph pieces

/// Forward takes the quantized values verbatim; backward passes the incoming
/// gradient to the pre-quantization input unchanged.
struct StraightThroughOp;
impl Op for StraightThroughOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        grads.accum(&node.parents()[0], g.clone());
    }
}

pub fn straight_through(z: &Var, quantized: &Arr) -> Var {
    assert_eq!(
        z.shape(),
        quantized.shape().to_vec(),
        "straight_through: shape mismatch"
    );
    Var::from_op(
        quantized.clone(),
        vec![z.clone()],
        Box::new(StraightThroughOp),
    )
}

/// Look up codebook rows for a batch of index grids: (K, d) x (N, h, w) ->
/// (N, d, h, w). Gradients scatter-add back into the codebook rows.
struct GatherRowsOp {
    indices: ndarray::Array3<usize>,
}
impl Op for GatherRowsOp {
    fn backward(&self, node: &Node, g: &Arr, grads: &mut Grads) {
        let cb = &node.parents()[0];
        if !cb.needs_grad() {
            return;
        }
        let (k, d) = {
            let v = cb.value_ref();
            (v.shape()[0], v.shape()[1])
        };
        let mut gcb = ndarray::Array2::<f64>::zeros((k, d));
        let (n, h, w) = self.indices.dim();
        for ni in 0..n {
            for hi in 0..h {
                for wi in 0..w {
                    let row = self.indices[[ni, hi, wi]];
                    for di in 0..d {
                        gcb[[row, di]] += g[[ni, di, hi, wi]];
                    }
                }
            }
        }
        grads.accum(cb, gcb.into_dyn());
    }
}

pub fn gather_rows(codebook: &Var, indices: &ndarray::Array3<usize>) -> Var {
    let cbv = codebook.value_ref();
    assert_eq!(cbv.ndim(), 2, "gather_rows expects a (K, d) codebook");
    let d = cbv.shape()[1];
    let (n, h, w) = indices.dim();
    let mut out = ndarray::Array4::<f64>::zeros((n, d, h, w));
    for ni in 0..n {
        for hi in 0..h {
            for wi in 0..w {
                let row = indices[[ni, hi, wi]];
                for di in 0..d {
                    out[[ni, di, hi, wi]] = cbv[[row, di]];
                }
            }
        }
    }
    drop(cbv);
    Var::from_op(
        out.into_dyn(),
        vec![codebook.clone()],
        Box::new(GatherRowsOp {
            indices: indices.clone(),
        }),
    )
}
