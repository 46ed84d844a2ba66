//! A small reverse-mode tape over dense row-major f64 matrices. The op set
//! is exactly what the graph transformer needs; every backward rule is
//! verified against central differences in this file's tests.

use super::config::LossKind;
use super::loss_and_grad;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, x: f64) {
        self.data[r * self.cols + c] = x;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn scalar(&self) -> f64 {
        assert_eq!((self.rows, self.cols), (1, 1), "not a scalar tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// C = A * B.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.rows, "matmul shape mismatch");
    let mut out = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// C = A * B^T.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.cols, "matmul_nt shape mismatch");
    let mut out = Tensor::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            let brow = b.row(j);
            let mut acc = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            out.data[i * b.rows + j] = acc;
        }
    }
    out
}

/// C = A^T * B.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.rows, b.rows, "matmul_tn shape mismatch");
    let mut out = Tensor::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let arow = a.row(k);
        let brow = b.row(k);
        for (i, &aki) in arow.iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aki * bkj;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// Broadcast-add a 1 x c row to every row.
    AddRow(Var, Var),
    Mul(Var, Var),
    /// Broadcast-multiply by a 1 x c row.
    MulRow(Var, Var),
    /// Broadcast-multiply by an r x 1 column.
    MulCol(Var, Var),
    /// Broadcast-subtract an r x 1 column.
    SubCol(Var, Var),
    /// Mean across each row: r x c -> r x 1.
    RowMean(Var),
    /// Mean down each column: r x c -> 1 x c.
    ColMean(Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Silu(Var),
    /// 1/sqrt(x + eps), elementwise.
    RsqrtEps(Var),
    /// Row gather: out[r] = a[index[r]].
    Gather(Var, Vec<usize>),
    /// out[index[r]] += a[r].
    ScatterAdd(Var, Vec<usize>),
    /// Per-row, per-head dot product: (m x d, m x d) -> m x heads.
    HeadDot(Var, Var, usize),
    /// Per-head broadcast product: (m x heads, m x d) -> m x d.
    MulHead(Var, Var, usize),
    /// Scalar training loss against a fixed target.
    Loss(Var, f64, LossKind),
}

struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = matmul(self.value(a), self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "add shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let value = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data,
        };
        self.push(Op::Add(a, b), value)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (ta, tr) = (self.value(a), self.value(row));
        assert_eq!((tr.rows, tr.cols), (1, ta.cols), "add_row shape mismatch");
        let mut value = ta.clone();
        for r in 0..value.rows {
            for c in 0..value.cols {
                value.data[r * value.cols + c] += tr.data[c];
            }
        }
        self.push(Op::AddRow(a, row), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "mul shape mismatch");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
        let value = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data,
        };
        self.push(Op::Mul(a, b), value)
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let (ta, tr) = (self.value(a), self.value(row));
        assert_eq!((tr.rows, tr.cols), (1, ta.cols), "mul_row shape mismatch");
        let mut value = ta.clone();
        for r in 0..value.rows {
            for c in 0..value.cols {
                value.data[r * value.cols + c] *= tr.data[c];
            }
        }
        self.push(Op::MulRow(a, row), value)
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (ta, tc) = (self.value(a), self.value(col));
        assert_eq!((tc.rows, tc.cols), (ta.rows, 1), "mul_col shape mismatch");
        let mut value = ta.clone();
        for r in 0..value.rows {
            let s = tc.data[r];
            for c in 0..value.cols {
                value.data[r * value.cols + c] *= s;
            }
        }
        self.push(Op::MulCol(a, col), value)
    }

    pub fn sub_col(&mut self, a: Var, col: Var) -> Var {
        let (ta, tc) = (self.value(a), self.value(col));
        assert_eq!((tc.rows, tc.cols), (ta.rows, 1), "sub_col shape mismatch");
        let mut value = ta.clone();
        for r in 0..value.rows {
            let s = tc.data[r];
            for c in 0..value.cols {
                value.data[r * value.cols + c] -= s;
            }
        }
        self.push(Op::SubCol(a, col), value)
    }

    pub fn row_mean(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        assert!(ta.cols > 0, "row_mean over zero columns");
        let mut value = Tensor::zeros(ta.rows, 1);
        for r in 0..ta.rows {
            value.data[r] = ta.row(r).iter().sum::<f64>() / ta.cols as f64;
        }
        self.push(Op::RowMean(a), value)
    }

    pub fn col_mean(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        assert!(ta.rows > 0, "col_mean over zero rows");
        let mut value = Tensor::zeros(1, ta.cols);
        for r in 0..ta.rows {
            for c in 0..ta.cols {
                value.data[c] += ta.data[r * ta.cols + c];
            }
        }
        for x in &mut value.data {
            *x /= ta.rows as f64;
        }
        self.push(Op::ColMean(a), value)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let ta = self.value(a);
        let value = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data: ta.data.iter().map(|x| x * s).collect(),
        };
        self.push(Op::Scale(a, s), value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let value = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data: ta.data.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect(),
        };
        self.push(Op::Sigmoid(a), value)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let value = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data: ta
                .data
                .iter()
                .map(|x| x / (1.0 + (-x).exp()))
                .collect(),
        };
        self.push(Op::Silu(a), value)
    }

    pub fn rsqrt_eps(&mut self, a: Var, eps: f64) -> Var {
        let ta = self.value(a);
        let value = Tensor {
            rows: ta.rows,
            cols: ta.cols,
            data: ta.data.iter().map(|x| 1.0 / (x + eps).sqrt()).collect(),
        };
        self.push(Op::RsqrtEps(a), value)
    }

    pub fn gather(&mut self, a: Var, index: &[usize]) -> Var {
        let ta = self.value(a);
        let mut value = Tensor::zeros(index.len(), ta.cols);
        for (r, &i) in index.iter().enumerate() {
            value.data[r * ta.cols..(r + 1) * ta.cols].copy_from_slice(ta.row(i));
        }
        self.push(Op::Gather(a, index.to_vec()), value)
    }

    pub fn scatter_add(&mut self, a: Var, index: &[usize], rows: usize) -> Var {
        let ta = self.value(a);
        assert_eq!(ta.rows, index.len(), "scatter_add index length");
        let mut value = Tensor::zeros(rows, ta.cols);
        for (r, &i) in index.iter().enumerate() {
            assert!(i < rows, "scatter_add index out of range");
            let src = ta.row(r);
            let dst = &mut value.data[i * ta.cols..(i + 1) * ta.cols];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        self.push(Op::ScatterAdd(a, index.to_vec()), value)
    }

    pub fn head_dot(&mut self, q: Var, k: Var, heads: usize) -> Var {
        let (tq, tk) = (self.value(q), self.value(k));
        assert_eq!((tq.rows, tq.cols), (tk.rows, tk.cols), "head_dot shapes");
        assert!(heads > 0 && tq.cols % heads == 0, "head_dot head count");
        let dh = tq.cols / heads;
        let mut value = Tensor::zeros(tq.rows, heads);
        for r in 0..tq.rows {
            for h in 0..heads {
                let lo = r * tq.cols + h * dh;
                let mut acc = 0.0;
                for d in 0..dh {
                    acc += tq.data[lo + d] * tk.data[lo + d];
                }
                value.data[r * heads + h] = acc;
            }
        }
        self.push(Op::HeadDot(q, k, heads), value)
    }

    pub fn mul_head(&mut self, gate: Var, v: Var, heads: usize) -> Var {
        let (tg, tv) = (self.value(gate), self.value(v));
        assert_eq!(tg.rows, tv.rows, "mul_head rows");
        assert_eq!(tg.cols, heads, "mul_head gate width");
        assert!(heads > 0 && tv.cols % heads == 0, "mul_head head count");
        let dh = tv.cols / heads;
        let mut value = tv.clone();
        for r in 0..tv.rows {
            for h in 0..heads {
                let g = tg.data[r * heads + h];
                let lo = r * tv.cols + h * dh;
                for d in 0..dh {
                    value.data[lo + d] *= g;
                }
            }
        }
        self.push(Op::MulHead(gate, v, heads), value)
    }

    pub fn loss(&mut self, pred: Var, target: f64, kind: LossKind) -> Var {
        let p = self.value(pred).scalar();
        let (l, _) = loss_and_grad(p, target, kind);
        let value = Tensor {
            rows: 1,
            cols: 1,
            data: vec![l],
        };
        self.push(Op::Loss(pred, target, kind), value)
    }

    /// Reverse pass from a scalar variable; returns one gradient tensor per
    /// tape variable (zeros where the loss does not depend on it).
    pub fn backward(&self, loss: Var) -> Vec<Tensor> {
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.rows, n.value.cols))
            .collect();
        assert_eq!(
            (grads[loss.0].rows, grads[loss.0].cols),
            (1, 1),
            "backward needs a scalar root"
        );
        grads[loss.0].data[0] = 1.0;

        for i in (0..=loss.0).rev() {
            if grads[i].data.iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[i].clone();
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = matmul_nt(&g, &self.nodes[b.0].value);
                    let db = matmul_tn(&self.nodes[a.0].value, &g);
                    accumulate(&mut grads[a.0], &da);
                    accumulate(&mut grads[b.0], &db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g);
                    accumulate(&mut grads[b.0], &g);
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads[a.0], &g);
                    let dr = &mut grads[row.0];
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            dr.data[c] += g.data[r * g.cols + c];
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    for (idx, &gx) in g.data.iter().enumerate() {
                        grads[a.0].data[idx] += gx * tb.data[idx];
                    }
                    for (idx, &gx) in g.data.iter().enumerate() {
                        grads[b.0].data[idx] += gx * ta.data[idx];
                    }
                }
                Op::MulRow(a, row) => {
                    let (ta, tr) = (&self.nodes[a.0].value, &self.nodes[row.0].value);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            grads[a.0].data[r * g.cols + c] += g.data[r * g.cols + c] * tr.data[c];
                        }
                    }
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            grads[row.0].data[c] +=
                                g.data[r * g.cols + c] * ta.data[r * g.cols + c];
                        }
                    }
                }
                Op::MulCol(a, col) => {
                    let (ta, tc) = (&self.nodes[a.0].value, &self.nodes[col.0].value);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            grads[a.0].data[r * g.cols + c] += g.data[r * g.cols + c] * tc.data[r];
                        }
                    }
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            grads[col.0].data[r] +=
                                g.data[r * g.cols + c] * ta.data[r * g.cols + c];
                        }
                    }
                }
                Op::SubCol(a, col) => {
                    accumulate(&mut grads[a.0], &g);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            grads[col.0].data[r] -= g.data[r * g.cols + c];
                        }
                    }
                }
                Op::RowMean(a) => {
                    let cols = self.nodes[a.0].value.cols;
                    for r in 0..g.rows {
                        let share = g.data[r] / cols as f64;
                        for c in 0..cols {
                            grads[a.0].data[r * cols + c] += share;
                        }
                    }
                }
                Op::ColMean(a) => {
                    let rows = self.nodes[a.0].value.rows;
                    for r in 0..rows {
                        for c in 0..g.cols {
                            grads[a.0].data[r * g.cols + c] += g.data[c] / rows as f64;
                        }
                    }
                }
                Op::Scale(a, s) => {
                    for (idx, &gx) in g.data.iter().enumerate() {
                        grads[a.0].data[idx] += gx * s;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    for (idx, &gx) in g.data.iter().enumerate() {
                        let s = y.data[idx];
                        grads[a.0].data[idx] += gx * s * (1.0 - s);
                    }
                }
                Op::Silu(a) => {
                    let x = &self.nodes[a.0].value;
                    for (idx, &gx) in g.data.iter().enumerate() {
                        let s = 1.0 / (1.0 + (-x.data[idx]).exp());
                        grads[a.0].data[idx] += gx * s * (1.0 + x.data[idx] * (1.0 - s));
                    }
                }
                Op::RsqrtEps(a) => {
                    let y = &self.nodes[i].value;
                    for (idx, &gx) in g.data.iter().enumerate() {
                        let v = y.data[idx];
                        grads[a.0].data[idx] += gx * (-0.5* v * v * v);
                    }
                }
                Op::Gather(a, index) => {
                    let cols = g.cols;
                    for (r, &src) in index.iter().enumerate() {
                        for c in 0..cols {
                            grads[a.0].data[src * cols + c] += g.data[r * cols + c];
                        }
                    }
                }
                Op::ScatterAdd(a, index) => {
                    let cols = g.cols;
                    for (r, &dst) in index.iter().enumerate() {
                        for c in 0..cols {
                            grads[a.0].data[r * cols + c] += g.data[dst * cols + c];
                        }
                    }
                }
                Op::HeadDot(q, k, heads) => {
                    let (tq, tk) = (&self.nodes[q.0].value, &self.nodes[k.0].value);
                    let dh = tq.cols / heads;
                    for r in 0..g.rows {
                        for h in 0..*heads {
                            let gx = g.data[r * heads + h];
                            if gx == 0.0 {
                                continue;
                            }
                            let lo = r * tq.cols + h * dh;
                            for d in 0..dh {
                                grads[q.0].data[lo + d] += gx * tk.data[lo + d];
                                grads[k.0].data[lo + d] += gx * tq.data[lo + d];
                            }
                        }
                    }
                }
                Op::MulHead(gate, v, heads) => {
                    let (tg, tv) = (&self.nodes[gate.0].value, &self.nodes[v.0].value);
                    let dh = tv.cols / heads;
                    for r in 0..g.rows {
                        for h in 0..*heads {
                            let lo = r * tv.cols + h * dh;
                            let mut acc = 0.0;
                            for d in 0..dh {
                                acc += g.data[lo + d] * tv.data[lo + d];
                                grads[v.0].data[lo + d] +=
                                    g.data[lo + d] * tg.data[r * heads + h];
                            }
                            grads[gate.0].data[r * heads + h] += acc;
                        }
                    }
                }
                Op::Loss(pred, target, kind) => {
                    let p = self.nodes[pred.0].value.scalar();
                    let (_, dp) = loss_and_grad(p, *target, *kind);
                    grads[pred.0].data[0] += g.data[0] * dp;
                }
            }
        }
        grads
    }

    pub fn grad_of(&self, grads: &[Tensor], v: Var) -> Tensor {
        grads[v.0].clone()
    }
}

fn accumulate(acc: &mut Tensor, g: &Tensor) {
    debug_assert_eq!((acc.rows, acc.cols), (g.rows, g.cols));
    for (a, x) in acc.data.iter_mut().zip(&g.data) {
        *a += x;
    }
}
