//! Reverse-mode differentiation over matrix-valued expression nodes.
//!
//! A tape records the forward computation eagerly; `backward` walks it in
//! reverse accumulating adjoints. Nodes hold `Array2<f64>` values: an
//! n-by-d block carries one vector per graph vertex, a 1-by-d row is a
//! single vector, and scalars are 1-by-1, so curvatures differentiate like
//! any other parameter. Whole layers become single nodes this way, and the
//! ball maps are fused rowwise primitives whose adjoints reuse the smooth
//! tanh/artanh ratio kernels, keeping them finite at the origin.

use std::rc::Rc;

use ndarray::{Array2, Axis};

use crate::geometry::{artanhc, dartanhc_ratio, dtanhc_ratio, tanhc};
use crate::sparse::SparseMatrix;

/// Arguments past this make `tanh` indistinguishable from 1 in f64 soon
/// after; the exponential map projects them onto the radius-`tanh(EXP_SAT)`
/// sphere instead of rounding onto the boundary itself.
const EXP_SAT: f64 = 9.0;

/// Ball radii past this fraction of the boundary read back as if they sat
/// exactly on it. artanh's slope grows like `1/(1 - z^2)`, so radial
/// adjoints just inside the boundary would dwarf every other gradient
/// (curvature adjoints especially) and a single descent step could throw
/// the model into a non-recoverable region. The cap bounds tangent norms
/// by `artanh(LOG_SAT)/sqrt(c)` and the slope by about 2e3, acting as
/// radial gradient clipping; saturated exponentials (radius `tanh(9)`)
/// land safely inside the frozen zone.
const LOG_SAT: f64 = 0.9995;

/// `tanh(cap) / z`: projection factor once `z` exceeds `cap`.
fn tanh_over(cap: f64, z: f64) -> f64 {
    cap.tanh() / z
}

/// `artanh(cap) / z`: projection factor for clamped ball radii.
fn artanh_over(cap: f64, z: f64) -> f64 {
    cap.atanh() / z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Any block times a 1x1 scalar node.
    Scale { v: NodeId, s: NodeId },
    ScaleConst(NodeId, f64),
    /// The added constant vanishes from the adjoint, so only the input
    /// link is kept.
    AddConst(NodeId),
    Recip(NodeId),
    /// Rowwise dot product of two same-shape blocks: n x d -> n x 1.
    RowDot(NodeId, NodeId),
    /// Each row of `x` scaled by the matching entry of the n x 1 block `s`.
    MulCol { x: NodeId, s: NodeId },
    /// One column as an n x 1 block.
    Col(NodeId, usize),
    /// `x w^T` with `w` stored naturally as d_out x d_in.
    MatMul { x: NodeId, w: NodeId },
    /// Sparse left-multiplication by a fixed aggregation matrix.
    AggMul { a: Rc<SparseMatrix>, x: NodeId },
    /// Row broadcast: adds a 1 x d bias row to every row of `x`.
    AddRow { x: NodeId, b: NodeId },
    /// A 1 x d row repeated n times.
    RepeatRows(NodeId),
    Relu(NodeId),
    /// Rowwise log-sum-exp: n x d -> n x 1.
    LogSumExp(NodeId),
    /// Column mean over rows: n x d -> 1 x d.
    MeanRows(NodeId),
    /// Rowwise `tanhc(sqrt(c)|v|) v`: tangent vectors to ball points.
    ExpMapO { v: NodeId, c: NodeId },
    /// Rowwise `artanhc(sqrt(c)|x|) x`: ball points to tangent vectors.
    LogMapO { x: NodeId, c: NodeId },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale { .. } => "scale",
            Op::ScaleConst(..) => "scale_const",
            Op::AddConst(_) => "add_const",
            Op::Recip(..) => "recip",
            Op::RowDot(..) => "row_dot",
            Op::MulCol { .. } => "mul_col",
            Op::Col(..) => "col",
            Op::MatMul { .. } => "matmul",
            Op::AggMul { .. } => "agg_mul",
            Op::AddRow { .. } => "add_row",
            Op::RepeatRows(_) => "repeat_rows",
            Op::Relu(..) => "relu",
            Op::LogSumExp(..) => "log_sum_exp",
            Op::MeanRows(..) => "mean_rows",
            Op::ExpMapO { .. } => "exp_map",
            Op::LogMapO { .. } => "log_map",
        }
    }
}

#[derive(Default)]
pub(crate) struct Tape {
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
}

impl Tape {
    pub(crate) fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.values.push(value);
        self.ops.push(op);
        NodeId(self.values.len() - 1)
    }

    pub(crate) fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub(crate) fn scalar_leaf(&mut self, value: f64) -> NodeId {
        self.leaf(ndarray::arr2(&[[value]]))
    }

    pub(crate) fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub(crate) fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.values[id.0].len(), 1);
        self.values[id.0][[0, 0]]
    }

    pub(crate) fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.values[a.0] + &self.values[b.0];
        self.push(v, Op::Add(a, b))
    }

    pub(crate) fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.values[a.0] - &self.values[b.0];
        self.push(v, Op::Sub(a, b))
    }

    pub(crate) fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.values[a.0] * &self.values[b.0];
        self.push(v, Op::Mul(a, b))
    }

    pub(crate) fn scale(&mut self, v: NodeId, s: NodeId) -> NodeId {
        let sv = self.scalar(s);
        let out = self.values[v.0].mapv(|x| x * sv);
        self.push(out, Op::Scale { v, s })
    }

    pub(crate) fn scale_const(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.values[a.0].mapv(|x| x * k);
        self.push(v, Op::ScaleConst(a, k))
    }

    pub(crate) fn add_const(&mut self, a: NodeId, k: f64) -> NodeId {
        let v = self.values[a.0].mapv(|x| x + k);
        self.push(v, Op::AddConst(a))
    }

    pub(crate) fn recip(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(|x| 1.0 / x);
        self.push(v, Op::Recip(a))
    }

    pub(crate) fn row_dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = &self.values[a.0];
        let bv = &self.values[b.0];
        debug_assert_eq!(av.dim(), bv.dim());
        let out = Array2::from_shape_fn((av.nrows(), 1), |(i, _)| av.row(i).dot(&bv.row(i)));
        self.push(out, Op::RowDot(a, b))
    }

    pub(crate) fn mul_col(&mut self, x: NodeId, s: NodeId) -> NodeId {
        let xv = &self.values[x.0];
        let sv = &self.values[s.0];
        debug_assert_eq!(sv.dim(), (xv.nrows(), 1));
        let out = xv * &sv.broadcast(xv.dim()).expect("column broadcast");
        self.push(out, Op::MulCol { x, s })
    }

    pub(crate) fn col(&mut self, a: NodeId, j: usize) -> NodeId {
        let v = self.values[a.0].column(j).to_owned().insert_axis(Axis(1));
        self.push(v, Op::Col(a, j))
    }

    pub(crate) fn matmul(&mut self, x: NodeId, w: NodeId) -> NodeId {
        let xv = &self.values[x.0];
        let wv = &self.values[w.0];
        debug_assert_eq!(xv.ncols(), wv.ncols());
        let out = xv.dot(&wv.t());
        self.push(out, Op::MatMul { x, w })
    }

    pub(crate) fn agg_mul(&mut self, a: Rc<SparseMatrix>, x: NodeId) -> NodeId {
        let out = a.mat_apply(&self.values[x.0]);
        self.push(out, Op::AggMul { a, x })
    }

    pub(crate) fn add_row(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let xv = &self.values[x.0];
        let bv = &self.values[b.0];
        debug_assert_eq!(bv.dim(), (1, xv.ncols()));
        let out = xv + &bv.broadcast(xv.dim()).expect("row broadcast");
        self.push(out, Op::AddRow { x, b })
    }

    pub(crate) fn repeat_rows(&mut self, a: NodeId, n: usize) -> NodeId {
        let av = &self.values[a.0];
        debug_assert_eq!(av.nrows(), 1);
        let out = av
            .broadcast((n, av.ncols()))
            .expect("repeat broadcast")
            .to_owned();
        self.push(out, Op::RepeatRows(a))
    }

    pub(crate) fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0].mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub(crate) fn log_sum_exp(&mut self, a: NodeId) -> NodeId {
        let x = &self.values[a.0];
        let out = Array2::from_shape_fn((x.nrows(), 1), |(i, _)| {
            let row = x.row(i);
            let m = row.fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
            m + row.mapv(|v| (v - m).exp()).sum().ln()
        });
        self.push(out, Op::LogSumExp(a))
    }

    pub(crate) fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a.0]
            .mean_axis(Axis(0))
            .expect("nonempty rows")
            .insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    pub(crate) fn exp_map_o(&mut self, v: NodeId, c: NodeId) -> NodeId {
        let cv = self.scalar(c);
        let vv = &self.values[v.0];
        let mut out = vv.clone();
        for i in 0..out.nrows() {
            let z = (cv * vv.row(i).dot(&vv.row(i))).sqrt();
            // Saturated arguments would land on the boundary after rounding
            // (tanh(z) == 1.0 in f64), breaking every later log map; project
            // onto the radius tanh(EXP_SAT) sphere instead.
            let f = if z > EXP_SAT { tanh_over(EXP_SAT, z) } else { tanhc(z) };
            out.row_mut(i).mapv_inplace(|x| x * f);
        }
        self.push(out, Op::ExpMapO { v, c })
    }

    pub(crate) fn log_map_o(&mut self, x: NodeId, c: NodeId) -> NodeId {
        let cv = self.scalar(c);
        let xv = &self.values[x.0];
        let mut out = xv.clone();
        for i in 0..out.nrows() {
            let z = (cv * xv.row(i).dot(&xv.row(i))).sqrt();
            // Saturated exponentials and Mobius rounding both produce radii
            // at or past the cap; read them as sitting on it so the tangent
            // stays bounded instead of running off to infinity.
            let f = if z > LOG_SAT { artanh_over(LOG_SAT, z) } else { artanhc(z) };
            out.row_mut(i).mapv_inplace(|v| v * f);
        }
        self.push(out, Op::LogMapO { x, c })
    }

    /// Rowwise Möbius addition composed from rational primitives. The
    /// denominator is bounded below by `(1 - c|x||y|)^2 > 0` for interior
    /// points, so the expression has no singularities on its domain.
    pub(crate) fn mobius_add(&mut self, x: NodeId, y: NodeId, c: NodeId) -> NodeId {
        let xx = self.row_dot(x, x);
        let yy = self.row_dot(y, y);
        let xy = self.row_dot(x, y);
        let cxy2 = {
            let t = self.scale(xy, c);
            self.scale_const(t, 2.0)
        };
        let cxx = self.scale(xx, c);
        let cyy = self.scale(yy, c);
        let coef_x = {
            let t = self.add(cxy2, cyy);
            self.add_const(t, 1.0)
        };
        let coef_y = {
            let t = self.scale_const(cxx, -1.0);
            self.add_const(t, 1.0)
        };
        let denom = {
            let c2 = self.mul(cxx, cyy);
            let t = self.add(cxy2, c2);
            self.add_const(t, 1.0)
        };
        let num = {
            let tx = self.mul_col(x, coef_x);
            let ty = self.mul_col(y, coef_y);
            self.add(tx, ty)
        };
        let inv = self.recip(denom);
        self.mul_col(num, inv)
    }

    /// Softmax cross-entropy of a 1 x C logits node against a class index.
    pub(crate) fn cross_entropy(&mut self, logits: NodeId, label: usize) -> NodeId {
        let lse = self.log_sum_exp(logits);
        let picked = self.col(logits, label);
        self.sub(lse, picked)
    }

    /// First node holding a non-finite value, with its operation name.
    pub(crate) fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        for (i, v) in self.values.iter().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Some((i, self.ops[i].name()));
            }
        }
        None
    }

    /// Adjoints of every node with respect to a scalar root.
    pub(crate) fn backward(&self, root: NodeId) -> Vec<Array2<f64>> {
        assert_eq!(self.values[root.0].len(), 1, "root must be scalar");
        let mut grads: Vec<Array2<f64>> = self
            .values
            .iter()
            .map(|v| Array2::zeros(v.dim()))
            .collect();
        grads[root.0][[0, 0]] = 1.0;
        for i in (0..=root.0).rev() {
            if grads[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[i].clone();
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    grads[a.0] += &g;
                    grads[b.0] += &g;
                }
                Op::Sub(a, b) => {
                    grads[a.0] += &g;
                    grads[b.0] -= &g;
                }
                Op::Mul(a, b) => {
                    let da = &g * &self.values[b.0];
                    let db = &g * &self.values[a.0];
                    grads[a.0] += &da;
                    grads[b.0] += &db;
                }
                Op::Scale { v, s } => {
                    let sv = self.values[s.0][[0, 0]];
                    grads[v.0].scaled_add(sv, &g);
                    grads[s.0][[0, 0]] += (&g * &self.values[v.0]).sum();
                }
                Op::ScaleConst(a, k) => {
                    grads[a.0].scaled_add(*k, &g);
                }
                Op::AddConst(a) => {
                    grads[a.0] += &g;
                }
                Op::Recip(a) => {
                    // d(1/x) = -1/x^2 = -out^2
                    let out = &self.values[i];
                    let da = -(&g * out * out);
                    grads[a.0] += &da;
                }
                Op::RowDot(a, b) => {
                    let av = &self.values[a.0];
                    let bv = &self.values[b.0];
                    for r in 0..av.nrows() {
                        let gr = g[[r, 0]];
                        grads[a.0].row_mut(r).scaled_add(gr, &bv.row(r));
                        grads[b.0].row_mut(r).scaled_add(gr, &av.row(r));
                    }
                }
                Op::MulCol { x, s } => {
                    let xv = &self.values[x.0];
                    let sv = &self.values[s.0];
                    let dx = &g * &sv.broadcast(xv.dim()).expect("column broadcast");
                    grads[x.0] += &dx;
                    for r in 0..xv.nrows() {
                        grads[s.0][[r, 0]] += g.row(r).dot(&xv.row(r));
                    }
                }
                Op::Col(a, j) => {
                    let mut da = grads[a.0].column_mut(*j);
                    da += &g.column(0);
                }
                Op::MatMul { x, w } => {
                    let dx = g.dot(&self.values[w.0]);
                    let dw = g.t().dot(&self.values[x.0]);
                    grads[x.0] += &dx;
                    grads[w.0] += &dw;
                }
                Op::AggMul { a, x } => {
                    // Transposed application: column j of A scatters row
                    // gradients back to input row j.
                    for r in 0..a.n() {
                        for &(j, v) in a.row(r) {
                            grads[x.0].row_mut(j).scaled_add(v, &g.row(r));
                        }
                    }
                }
                Op::AddRow { x, b } => {
                    grads[x.0] += &g;
                    let mut db = grads[b.0].row_mut(0);
                    db += &g.sum_axis(Axis(0));
                }
                Op::RepeatRows(a) => {
                    let mut da = grads[a.0].row_mut(0);
                    da += &g.sum_axis(Axis(0));
                }
                Op::Relu(a) => {
                    let da = ndarray::Zip::from(&g)
                        .and(&self.values[a.0])
                        .map_collect(|&gi, &xi| if xi > 0.0 { gi } else { 0.0 });
                    grads[a.0] += &da;
                }
                Op::LogSumExp(a) => {
                    let x = &self.values[a.0];
                    for r in 0..x.nrows() {
                        let row = x.row(r);
                        let m = row.fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
                        let ex = row.mapv(|v| (v - m).exp());
                        let sum = ex.sum();
                        grads[a.0].row_mut(r).scaled_add(g[[r, 0]] / sum, &ex);
                    }
                }
                Op::MeanRows(a) => {
                    let n = self.values[a.0].nrows();
                    let k = 1.0 / n as f64;
                    for r in 0..n {
                        grads[a.0].row_mut(r).scaled_add(k, &g.row(0));
                    }
                }
                Op::ExpMapO { v, c } => {
                    let vv = &self.values[v.0];
                    let cv = self.values[c.0][[0, 0]];
                    let mut dc = 0.0;
                    for r in 0..vv.nrows() {
                        let vrow = vv.row(r);
                        let n2 = vrow.dot(&vrow);
                        let z = (cv * n2).sqrt();
                        let gr = g.row(r);
                        if z > EXP_SAT {
                            // Projected regime: the true radial derivative is
                            // sech^2(z) ~ 0, so only the isotropic factor
                            // propagates.
                            grads[v.0].row_mut(r).scaled_add(tanh_over(EXP_SAT, z), &gr);
                        } else {
                            let f = tanhc(z);
                            let d = dtanhc_ratio(z);
                            let gv = gr.dot(&vrow);
                            grads[v.0].row_mut(r).scaled_add(f, &gr);
                            grads[v.0].row_mut(r).scaled_add(cv * d * gv, &vrow);
                            dc += gv * d * n2 / 2.0;
                        }
                    }
                    grads[c.0][[0, 0]] += dc;
                }
                Op::LogMapO { x, c } => {
                    let xv = &self.values[x.0];
                    let cv = self.values[c.0][[0, 0]];
                    let mut dc = 0.0;
                    for r in 0..xv.nrows() {
                        let xrow = xv.row(r);
                        let n2 = xrow.dot(&xrow);
                        let z = (cv * n2).sqrt();
                        let gr = g.row(r);
                        if z > LOG_SAT {
                            // Clamped regime: the true radial derivative blows
                            // up toward the boundary; freezing the factor keeps
                            // the step bounded.
                            grads[x.0].row_mut(r).scaled_add(artanh_over(LOG_SAT, z), &gr);
                        } else {
                            let a = artanhc(z);
                            let d = dartanhc_ratio(z);
                            let gx = gr.dot(&xrow);
                            grads[x.0].row_mut(r).scaled_add(a, &gr);
                            grads[x.0].row_mut(r).scaled_add(cv * d * gx, &xrow);
                            dc += gx * d * n2 / 2.0;
                        }
                    }
                    grads[c.0][[0, 0]] += dc;
                }
            }
        }
        grads
    }
}
