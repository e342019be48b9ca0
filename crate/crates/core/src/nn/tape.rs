//! Reverse-mode autodiff tape.
//!
//! Values are computed eagerly as nodes are pushed; `backward` walks the
//! node list in reverse and accumulates gradients. Stop-gradient routing
//! is explicit: `detach` blocks all gradient flow through its input, which
//! is how the quantizer's straight-through estimator and the codebook /
//! commitment loss terms are wired.

use std::collections::HashMap;

use ndarray::{concatenate, ArrayD, Axis, IxDyn, Zip};

use super::kernels::{
    conv2d, conv2d_backward, conv_transpose2d, conv_transpose2d_backward, group_norm,
    group_norm_backward, roi_align, roi_align_backward, ConvConf,
};
pub use super::kernels::Roi;
use super::store::{ParamId, ParamStore};
use super::Scalar;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<F: Scalar> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        conf: ConvConf,
    },
    ConvT2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        conf: ConvConf,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    GroupNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        groups: usize,
        eps: f64,
    },
    Relu {
        x: Var,
    },
    Sigmoid {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        c: F,
    },
    Detach {
        x: Var,
    },
    ConcatC {
        a: Var,
        b: Var,
    },
    Reshape {
        x: Var,
    },
    Permute {
        x: Var,
        axes: Vec<usize>,
    },
    MeanAll {
        x: Var,
    },
    Embed {
        table: Var,
        indices: Vec<usize>,
    },
    Bce {
        p: Var,
        target: ArrayD<F>,
        weight: Option<ArrayD<F>>,
        norm: F,
        eps: F,
    },
    SoftmaxCe {
        logits: Var,
        targets: Vec<usize>,
        row_w: Option<Vec<F>>,
        norm: F,
    },
    SmoothL1 {
        x: Var,
        target: ArrayD<F>,
        row_w: Option<Vec<F>>,
        beta: F,
        norm: F,
    },
    RoiAlign {
        x: Var,
        rois: Vec<Roi>,
        out_size: usize,
        scale: f64,
    },
}

struct Node<F: Scalar> {
    value: ArrayD<F>,
    op: Op<F>,
    rg: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads<F: Scalar> {
    g: Vec<Option<ArrayD<F>>>,
}

impl<F: Scalar> Grads<F> {
    /// Gradient of the loss w.r.t. `v`, if any flowed there.
    pub fn get(&self, v: Var) -> Option<&ArrayD<F>> {
        self.g[v.0].as_ref()
    }
}

pub struct Tape<F: Scalar> {
    nodes: Vec<Node<F>>,
    bindings: HashMap<ParamId, Var>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            bindings: HashMap::new(),
        }
    }

    fn push(&mut self, value: ArrayD<F>, op: Op<F>, rg: bool) -> Var {
        debug_assert!(value.iter().all(|v| v.is_finite()), "non-finite value on tape");
        self.nodes.push(Node { value, op, rg });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].rg
    }

    pub fn value(&self, v: Var) -> &ArrayD<F> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> F {
        let val = self.value(v);
        debug_assert_eq!(val.len(), 1, "scalar() on non-scalar node");
        *val.iter().next().expect("scalar node")
    }

    /// Constant input: no gradient is tracked.
    pub fn constant(&mut self, value: ArrayD<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf with gradient tracking (used directly in tests; models bind
    /// parameters through [`Tape::param`]).
    pub fn leaf(&mut self, value: ArrayD<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Bind a stored parameter onto the tape (memoized per tape).
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        if let Some(&v) = self.bindings.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Leaf, true);
        self.bindings.insert(id, v);
        v
    }

    /// Parameters bound on this tape with their vars, in parameter order.
    pub fn bound_params(&self) -> Vec<(ParamId, Var)> {
        let mut out: Vec<(ParamId, Var)> = self.bindings.iter().map(|(&k, &v)| (k, v)).collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }

    // ---- ops ----

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, conf: ConvConf) -> Var {
        let out = {
            let xv = self.value(x).view().into_dimensionality().expect("conv x 4d");
            let wv = self.value(w).view().into_dimensionality().expect("conv w 4d");
            let bv = b.map(|bb| {
                self.value(bb)
                    .view()
                    .into_dimensionality()
                    .expect("conv b 1d")
                    .to_owned()
            });
            conv2d(&xv, &wv, bv.as_ref(), &conf)
        };
        let rg = self.rg(x) || self.rg(w) || b.map(|bb| self.rg(bb)).unwrap_or(false);
        self.push(out.into_dyn(), Op::Conv2d { x, w, b, conf }, rg)
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Option<Var>, conf: ConvConf) -> Var {
        let out = {
            let xv = self.value(x).view().into_dimensionality().expect("convt x 4d");
            let wv = self.value(w).view().into_dimensionality().expect("convt w 4d");
            let bv = b.map(|bb| {
                self.value(bb)
                    .view()
                    .into_dimensionality()
                    .expect("convt b 1d")
                    .to_owned()
            });
            conv_transpose2d(&xv, &wv, bv.as_ref(), &conf)
        };
        let rg = self.rg(x) || self.rg(w) || b.map(|bb| self.rg(bb)).unwrap_or(false);
        self.push(out.into_dyn(), Op::ConvT2d { x, w, b, conf }, rg)
    }

    /// x: (N, In) @ w: (In, Out) + b.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let out = {
            let xv = self
                .value(x)
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("linear x 2d");
            let wv = self
                .value(w)
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("linear w 2d");
            let mut out = xv.dot(&wv);
            if let Some(bb) = b {
                let bv = self
                    .value(bb)
                    .view()
                    .into_dimensionality::<ndarray::Ix1>()
                    .expect("linear b 1d")
                    .to_owned();
                for mut row in out.outer_iter_mut() {
                    Zip::from(&mut row).and(&bv).for_each(|r, &bb| *r = *r + bb);
                }
            }
            out
        };
        let rg = self.rg(x) || self.rg(w) || b.map(|bb| self.rg(bb)).unwrap_or(false);
        self.push(out.into_dyn(), Op::Linear { x, w, b }, rg)
    }

    pub fn group_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize, eps: f64) -> Var {
        let out = {
            let xv = self.value(x).view().into_dimensionality().expect("gn x 4d");
            let gv = self
                .value(gamma)
                .view()
                .into_dimensionality()
                .expect("gn gamma 1d")
                .to_owned();
            let bv = self
                .value(beta)
                .view()
                .into_dimensionality()
                .expect("gn beta 1d")
                .to_owned();
            group_norm(&xv, &gv, &bv, groups, eps)
        };
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        self.push(
            out.into_dyn(),
            Op::GroupNorm {
                x,
                gamma,
                beta,
                groups,
                eps,
            },
            rg,
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| if v > F::zero() { v } else { F::zero() });
        let rg = self.rg(x);
        self.push(out, Op::Relu { x }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = F::one();
        let out = self.value(x).mapv(|v| one / (one + (-v).exp()));
        let rg = self.rg(x);
        self.push(out, Op::Sigmoid { x }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add { a, b }, rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) - self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub { a, b }, rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) * self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Mul { a, b }, rg)
    }

    pub fn scale(&mut self, x: Var, c: F) -> Var {
        let out = self.value(x).mapv(|v| v * c);
        let rg = self.rg(x);
        self.push(out, Op::Scale { x, c }, rg)
    }

    /// Stop gradient: value passes, gradient does not.
    pub fn detach(&mut self, x: Var) -> Var {
        let out = self.value(x).clone();
        self.push(out, Op::Detach { x }, false)
    }

    /// Concatenate two NCHW tensors along the channel axis, `a` first.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.ndim(), 4, "concat_channels expects NCHW");
        assert_eq!(av.shape()[0], bv.shape()[0], "concat: batch mismatch");
        assert_eq!(av.shape()[2..], bv.shape()[2..], "concat: spatial mismatch");
        let out = concatenate(Axis(1), &[av.view(), bv.view()]).expect("concat");
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::ConcatC { a, b }, rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let out = self
            .value(x)
            .to_owned()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape: element count mismatch");
        let rg = self.rg(x);
        self.push(out, Op::Reshape { x }, rg)
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Var {
        let out = self
            .value(x)
            .view()
            .permuted_axes(IxDyn(axes))
            .as_standard_layout()
            .to_owned();
        let rg = self.rg(x);
        self.push(
            out,
            Op::Permute {
                x,
                axes: axes.to_vec(),
            },
            rg,
        )
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let n = F::from_f64(v.len() as f64);
        let m = v.sum() / n;
        let rg = self.rg(x);
        self.push(ArrayD::from_elem(IxDyn(&[]), m), Op::MeanAll { x }, rg)
    }

    /// Row lookup: out[r, :] = table[indices[r], :]. Gradient scatter-adds
    /// into the table rows.
    pub fn embed(&mut self, table: Var, indices: &[usize]) -> Var {
        let t = self
            .value(table)
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("embed table 2d");
        let d = t.ncols();
        let mut out = ndarray::Array2::<F>::zeros((indices.len(), d));
        for (r, &ix) in indices.iter().enumerate() {
            out.row_mut(r).assign(&t.row(ix));
        }
        let rg = self.rg(table);
        self.push(
            out.into_dyn(),
            Op::Embed {
                table,
                indices: indices.to_vec(),
            },
            rg,
        )
    }

    /// Elementwise binary cross-entropy with probability clamping, optional
    /// per-element weights, reduced by `sum / norm`.
    pub fn bce(
        &mut self,
        p: Var,
        target: ArrayD<F>,
        weight: Option<ArrayD<F>>,
        norm: F,
        eps: F,
    ) -> Var {
        let pv = self.value(p);
        assert_eq!(pv.shape(), target.shape(), "bce: shape mismatch");
        if let Some(w) = &weight {
            assert_eq!(pv.shape(), w.shape(), "bce: weight shape mismatch");
        }
        let one = F::one();
        let ones;
        let w_iter: &ArrayD<F> = match &weight {
            Some(w) => w,
            None => {
                ones = ArrayD::from_elem(pv.raw_dim(), one);
                &ones
            }
        };
        let mut total = F::zero();
        for ((&pi, &ti), &w) in pv.iter().zip(target.iter()).zip(w_iter.iter()) {
            let pc = pi.max(eps).min(one - eps);
            let term = -(ti * pc.ln() + (one - ti) * (one - pc).ln());
            total = total + term * w;
        }
        let out = ArrayD::from_elem(IxDyn(&[]), total / norm);
        let rg = self.rg(p);
        self.push(
            out,
            Op::Bce {
                p,
                target,
                weight,
                norm,
                eps,
            },
            rg,
        )
    }

    /// Row-wise softmax cross-entropy over (N, C) logits with integer
    /// targets, optional row weights, reduced by `sum / norm`.
    pub fn softmax_ce(
        &mut self,
        logits: Var,
        targets: &[usize],
        row_w: Option<Vec<F>>,
        norm: F,
    ) -> Var {
        let lv = self
            .value(logits)
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("softmax_ce logits 2d");
        assert_eq!(lv.nrows(), targets.len(), "softmax_ce: row count mismatch");
        let mut total = F::zero();
        for (r, row) in lv.outer_iter().enumerate() {
            let w = row_w.as_ref().map(|w| w[r]).unwrap_or_else(F::one);
            if w == F::zero() {
                continue;
            }
            let mx = row.iter().cloned().fold(F::neg_infinity(), F::max);
            let lse = row.iter().map(|&v| (v - mx).exp()).sum::<F>().ln() + mx;
            total = total + w * (lse - row[targets[r]]);
        }
        let out = ArrayD::from_elem(IxDyn(&[]), total / norm);
        let rg = self.rg(logits);
        self.push(
            out,
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                row_w,
                norm,
            },
            rg,
        )
    }

    /// Smooth-L1 (Huber) loss against a constant target with optional row
    /// weights; `x` is (N, D), reduced by `sum / norm`.
    pub fn smooth_l1(
        &mut self,
        x: Var,
        target: ArrayD<F>,
        row_w: Option<Vec<F>>,
        beta: F,
        norm: F,
    ) -> Var {
        let xv = self
            .value(x)
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("smooth_l1 x 2d");
        let tv = target
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("smooth_l1 target 2d");
        assert_eq!(xv.dim(), tv.dim(), "smooth_l1: shape mismatch");
        let half = F::from_f64(0.5);
        let mut total = F::zero();
        for (r, (xr, tr)) in xv.outer_iter().zip(tv.outer_iter()).enumerate() {
            let w = row_w.as_ref().map(|w| w[r]).unwrap_or_else(F::one);
            if w == F::zero() {
                continue;
            }
            for (&xi, &ti) in xr.iter().zip(tr.iter()) {
                let d = (xi - ti).abs();
                let term = if d < beta {
                    half * d * d / beta
                } else {
                    d - half * beta
                };
                total = total + w * term;
            }
        }
        let out = ArrayD::from_elem(IxDyn(&[]), total / norm);
        let rg = self.rg(x);
        self.push(
            out,
            Op::SmoothL1 {
                x,
                target,
                row_w,
                beta,
                norm,
            },
            rg,
        )
    }

    pub fn roi_align(&mut self, x: Var, rois: &[Roi], out_size: usize, scale: f64) -> Var {
        let out = {
            let xv = self.value(x).view().into_dimensionality().expect("roi x 4d");
            roi_align(&xv, rois, out_size, scale)
        };
        let rg = self.rg(x);
        self.push(
            out.into_dyn(),
            Op::RoiAlign {
                x,
                rois: rois.to_vec(),
                out_size,
                scale,
            },
            rg,
        )
    }

    /// Sum of a slice of scalar vars weighted by constants.
    pub fn weighted_sum(&mut self, terms: &[(Var, F)]) -> Var {
        assert!(!terms.is_empty(), "weighted_sum of nothing");
        let mut acc = self.scale(terms[0].0, terms[0].1);
        for &(v, c) in &terms[1..] {
            let sv = self.scale(v, c);
            acc = self.add(acc, sv);
        }
        acc
    }

    // ---- backward ----

    /// Reverse-mode gradient of scalar `loss` w.r.t. every tracked node.
    pub fn backward(&self, loss: Var) -> Grads<F> {
        assert_eq!(self.value(loss).len(), 1, "backward: loss must be scalar");
        let mut g: Vec<Option<ArrayD<F>>> = vec![None; self.nodes.len()];
        g[loss.0] = Some(ArrayD::from_elem(self.value(loss).raw_dim(), F::one()));

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].rg {
                continue;
            }
            let Some(dy) = g[i].take() else { continue };
            self.backprop_node(i, &dy, &mut g);
            g[i] = Some(dy);
        }
        Grads { g }
    }

    fn accum(g: &mut [Option<ArrayD<F>>], v: Var, contrib: ArrayD<F>) {
        match &mut g[v.0] {
            Some(existing) => *existing = &*existing + &contrib,
            slot @ None => *slot = Some(contrib),
        }
    }

    fn backprop_node(&self, i: usize, dy: &ArrayD<F>, g: &mut [Option<ArrayD<F>>]) {
        match &self.nodes[i].op {
            Op::Leaf | Op::Detach { .. } => {}
            Op::Conv2d { x, w, b, conf } => {
                let xv = self.value(*x).view().into_dimensionality().expect("4d");
                let wv = self.value(*w).view().into_dimensionality().expect("4d");
                let dyv = dy.view().into_dimensionality().expect("4d");
                let need_b = b.map(|bb| self.rg(bb)).unwrap_or(false);
                let (dx, dw, db) = conv2d_backward(&xv, &wv, &dyv, conf, need_b);
                if self.rg(*x) {
                    Self::accum(g, *x, dx.into_dyn());
                }
                if self.rg(*w) {
                    Self::accum(g, *w, dw.into_dyn());
                }
                if let (Some(bb), Some(db)) = (b, db) {
                    Self::accum(g, *bb, db.into_dyn());
                }
            }
            Op::ConvT2d { x, w, b, conf } => {
                let xv = self.value(*x).view().into_dimensionality().expect("4d");
                let wv = self.value(*w).view().into_dimensionality().expect("4d");
                let dyv = dy.view().into_dimensionality().expect("4d");
                let need_b = b.map(|bb| self.rg(bb)).unwrap_or(false);
                let (dx, dw, db) = conv_transpose2d_backward(&xv, &wv, &dyv, conf, need_b);
                if self.rg(*x) {
                    Self::accum(g, *x, dx.into_dyn());
                }
                if self.rg(*w) {
                    Self::accum(g, *w, dw.into_dyn());
                }
                if let (Some(bb), Some(db)) = (b, db) {
                    Self::accum(g, *bb, db.into_dyn());
                }
            }
            Op::Linear { x, w, b } => {
                let xv = self
                    .value(*x)
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .expect("2d");
                let wv = self
                    .value(*w)
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .expect("2d");
                let dyv = dy.view().into_dimensionality::<ndarray::Ix2>().expect("2d");
                if self.rg(*x) {
                    Self::accum(g, *x, dyv.dot(&wv.t()).into_dyn());
                }
                if self.rg(*w) {
                    Self::accum(g, *w, xv.t().dot(&dyv).into_dyn());
                }
                if let Some(bb) = b {
                    if self.rg(*bb) {
                        Self::accum(g, *bb, dyv.sum_axis(Axis(0)).into_dyn());
                    }
                }
            }
            Op::GroupNorm {
                x,
                gamma,
                beta,
                groups,
                eps,
            } => {
                let xv = self.value(*x).view().into_dimensionality().expect("4d");
                let gv = self
                    .value(*gamma)
                    .view()
                    .into_dimensionality()
                    .expect("1d")
                    .to_owned();
                let dyv = dy.view().into_dimensionality().expect("4d");
                let (dx, dgamma, dbeta) = group_norm_backward(&xv, &gv, &dyv, *groups, *eps);
                if self.rg(*x) {
                    Self::accum(g, *x, dx.into_dyn());
                }
                if self.rg(*gamma) {
                    Self::accum(g, *gamma, dgamma.into_dyn());
                }
                if self.rg(*beta) {
                    Self::accum(g, *beta, dbeta.into_dyn());
                }
            }
            Op::Relu { x } => {
                let mut dx = dy.clone();
                Zip::from(&mut dx).and(self.value(*x)).for_each(|d, &xi| {
                    if xi <= F::zero() {
                        *d = F::zero();
                    }
                });
                Self::accum(g, *x, dx);
            }
            Op::Sigmoid { x } => {
                let y = &self.nodes[i].value;
                let one = F::one();
                let mut dx = dy.clone();
                Zip::from(&mut dx).and(y).for_each(|d, &yi| *d = *d * yi * (one - yi));
                Self::accum(g, *x, dx);
            }
            Op::Add { a, b } => {
                if self.rg(*a) {
                    Self::accum(g, *a, dy.clone());
                }
                if self.rg(*b) {
                    Self::accum(g, *b, dy.clone());
                }
            }
            Op::Sub { a, b } => {
                if self.rg(*a) {
                    Self::accum(g, *a, dy.clone());
                }
                if self.rg(*b) {
                    Self::accum(g, *b, dy.mapv(|v| -v));
                }
            }
            Op::Mul { a, b } => {
                if self.rg(*a) {
                    Self::accum(g, *a, dy * self.value(*b));
                }
                if self.rg(*b) {
                    Self::accum(g, *b, dy * self.value(*a));
                }
            }
            Op::Scale { x, c } => {
                Self::accum(g, *x, dy.mapv(|v| v * *c));
            }
            Op::ConcatC { a, b } => {
                let ca = self.value(*a).shape()[1];
                let dyv = dy.view().into_dimensionality::<ndarray::Ix4>().expect("4d");
                if self.rg(*a) {
                    Self::accum(
                        g,
                        *a,
                        dyv.slice(ndarray::s![.., ..ca, .., ..]).to_owned().into_dyn(),
                    );
                }
                if self.rg(*b) {
                    Self::accum(
                        g,
                        *b,
                        dyv.slice(ndarray::s![.., ca.., .., ..]).to_owned().into_dyn(),
                    );
                }
            }
            Op::Reshape { x } => {
                let dx = dy
                    .to_owned()
                    .into_shape_with_order(self.value(*x).raw_dim())
                    .expect("reshape grad");
                Self::accum(g, *x, dx);
            }
            Op::Permute { x, axes } => {
                let mut inverse = vec![0usize; axes.len()];
                for (pos, &ax) in axes.iter().enumerate() {
                    inverse[ax] = pos;
                }
                let dx = dy
                    .view()
                    .permuted_axes(IxDyn(&inverse))
                    .as_standard_layout()
                    .to_owned();
                Self::accum(g, *x, dx);
            }
            Op::MeanAll { x } => {
                let n = F::from_f64(self.value(*x).len() as f64);
                let scale = *dy.iter().next().expect("scalar grad") / n;
                Self::accum(g, *x, ArrayD::from_elem(self.value(*x).raw_dim(), scale));
            }
            Op::Embed { table, indices } => {
                let t = self.value(*table);
                let d = t.shape()[1];
                let mut dt = ndarray::Array2::<F>::zeros((t.shape()[0], d));
                let dyv = dy.view().into_dimensionality::<ndarray::Ix2>().expect("2d");
                for (r, &ix) in indices.iter().enumerate() {
                    dt.row_mut(ix).zip_mut_with(&dyv.row(r), |a, &b| *a = *a + b);
                }
                Self::accum(g, *table, dt.into_dyn());
            }
            Op::Bce {
                p,
                target,
                weight,
                norm,
                eps,
            } => {
                let one = F::one();
                let scale = *dy.iter().next().expect("scalar grad") / *norm;
                let pv = self.value(*p);
                let mut dp = ArrayD::<F>::zeros(pv.raw_dim());
                let ones;
                let w_arr: &ArrayD<F> = match weight {
                    Some(w) => w,
                    None => {
                        ones = ArrayD::from_elem(pv.raw_dim(), one);
                        &ones
                    }
                };
                for ((dpi, (&pi, &ti)), &w) in dp
                    .iter_mut()
                    .zip(pv.iter().zip(target.iter()))
                    .zip(w_arr.iter())
                {
                    // Inside the clamp the derivative is the BCE gradient;
                    // on the clamped region the composition is constant.
                    if pi <= *eps || pi >= one - *eps {
                        continue;
                    }
                    *dpi = scale * w * (pi - ti) / (pi * (one - pi));
                }
                Self::accum(g, *p, dp);
            }
            Op::SoftmaxCe {
                logits,
                targets,
                row_w,
                norm,
            } => {
                let scale = *dy.iter().next().expect("scalar grad") / *norm;
                let lv = self
                    .value(*logits)
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .expect("2d");
                let mut dl = ndarray::Array2::<F>::zeros(lv.dim());
                for (r, row) in lv.outer_iter().enumerate() {
                    let w = row_w.as_ref().map(|w| w[r]).unwrap_or_else(F::one);
                    if w == F::zero() {
                        continue;
                    }
                    let mx = row.iter().cloned().fold(F::neg_infinity(), F::max);
                    let exps: Vec<F> = row.iter().map(|&v| (v - mx).exp()).collect();
                    let z: F = exps.iter().cloned().sum();
                    for (c, &e) in exps.iter().enumerate() {
                        let softmax = e / z;
                        let indicator = if c == targets[r] { F::one() } else { F::zero() };
                        dl[(r, c)] = scale * w * (softmax - indicator);
                    }
                }
                Self::accum(g, *logits, dl.into_dyn());
            }
            Op::SmoothL1 {
                x,
                target,
                row_w,
                beta,
                norm,
            } => {
                let scale = *dy.iter().next().expect("scalar grad") / *norm;
                let xv = self
                    .value(*x)
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .expect("2d");
                let tv = target
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .expect("2d");
                let mut dx = ndarray::Array2::<F>::zeros(xv.dim());
                for (r, (xr, tr)) in xv.outer_iter().zip(tv.outer_iter()).enumerate() {
                    let w = row_w.as_ref().map(|w| w[r]).unwrap_or_else(F::one);
                    if w == F::zero() {
                        continue;
                    }
                    for (c, (&xi, &ti)) in xr.iter().zip(tr.iter()).enumerate() {
                        let d = xi - ti;
                        let gd = if d.abs() < *beta {
                            d / *beta
                        } else if d > F::zero() {
                            F::one()
                        } else {
                            -F::one()
                        };
                        dx[(r, c)] = scale * w * gd;
                    }
                }
                Self::accum(g, *x, dx.into_dyn());
            }
            Op::RoiAlign {
                x,
                rois,
                out_size,
                scale,
            } => {
                let xsh = self.value(*x).shape().to_vec();
                let dyv = dy.view().into_dimensionality().expect("4d");
                let dx = roi_align_backward(
                    (xsh[0], xsh[1], xsh[2], xsh[3]),
                    rois,
                    &dyv,
                    *out_size,
                    *scale,
                );
                Self::accum(g, *x, dx.into_dyn());
            }
        }
    }
}
