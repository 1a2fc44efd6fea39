use super::{Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
///
/// Handles are only meaningful for the tape that issued them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    /// Leaf value, or the result of an op none of whose inputs needed a gradient.
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    RowMean(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    MaxConst(Var, f64),
    Relu(Var),
    Mask(Var, Vec<f64>),
    Gather(Var, Vec<usize>),
    PairSqDist { a: Var, b: Var, pairs: Vec<(usize, usize)> },
    PairDot { a: Var, b: Var, pairs: Vec<(usize, usize)> },
    RowLogSumExp(Var),
    SegmentLogSumExp { x: Var, lens: Vec<usize> },
    LogAddExpConst(Var),
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Append-only record of a forward computation.
///
/// Node ids are assigned in creation order, so every node's inputs precede
/// it and a reverse sweep over ids is a valid topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node that needs one.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not require a gradient.
    /// Grad-requiring values the root does not depend on get zeros.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn wrt(&self, v: Var) -> &[f64] {
        self.get(v).expect("no gradient recorded for this value")
    }
}

fn check_finite(op: &'static str, data: &[f64]) -> Result<(), TensorError> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}

fn lse(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a differentiable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_raw(value, true, Op::Leaf)
    }

    /// Registers an input treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push_raw(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node { value, requires_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn push(
        &mut self,
        name: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        inputs: &[Var],
        op: Op,
    ) -> Result<Var, TensorError> {
        check_finite(name, &data)?;
        let requires_grad = inputs.iter().any(|&v| self.requires_grad(v));
        let op = if requires_grad { op } else { Op::Leaf };
        Ok(self.push_raw(Tensor::from_parts(shape, data), requires_grad, op))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn matrix_dims(&self, op: &'static str, v: Var) -> Result<(usize, usize), TensorError> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(TensorError::shape(op, format!("expected 2-D, got {s:?}"))),
        }
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        self.same_shape(name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(name, shape, data, &[a, b], op)
    }

    fn map(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, TensorError> {
        let data = self.value(x).data().iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(name, shape, data, &[x], op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Result<Var, TensorError> {
        self.map("scale", x, |v| v * k, Op::Scale(x, k))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var, TensorError> {
        self.map("add_scalar", x, |v| v + c, Op::AddScalar(x))
    }

    pub fn neg(&mut self, x: Var) -> Result<Var, TensorError> {
        self.scale(x, -1.0)
    }

    /// Adds a length-C row vector to every row of an N×C matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, TensorError> {
        let (n, c) = self.matrix_dims("add_row", x)?;
        if self.value(row).len() != c {
            return Err(TensorError::shape(
                "add_row",
                format!("row of {:?} against {n}x{c}", self.shape(row)),
            ));
        }
        let r = self.value(row).data();
        let data = self
            .value(x)
            .data()
            .chunks(c)
            .flat_map(|xs| xs.iter().zip(r).map(|(a, b)| a + b))
            .collect();
        self.push("add_row", vec![n, c], data, &[x, row], Op::AddRow(x, row))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (n, k) = self.matrix_dims("matmul", a)?;
        let (k2, m) = self.matrix_dims("matmul", b)?;
        if k != k2 {
            return Err(TensorError::shape("matmul", format!("{n}x{k} @ {k2}x{m}")));
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), n, k, m);
        self.push("matmul", vec![n, m], data, &[a, b], Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, TensorError> {
        self.matrix_dims("transpose", x)?;
        let t = self.value(x).transpose()?;
        let shape = t.shape().to_vec();
        self.push("transpose", shape, t.into_data(), &[x], Op::Transpose(x))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let s = self.value(x).data().iter().sum();
        self.push("sum", vec![1], vec![s], &[x], Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, TensorError> {
        let v = self.value(x);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push("mean", vec![1], vec![s], &[x], Op::Mean(x))
    }

    /// Sums each row of a matrix into a length-N vector.
    pub fn row_sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let (n, c) = self.matrix_dims("row_sum", x)?;
        let data = self.value(x).data().chunks(c).map(|r| r.iter().sum()).collect();
        self.push("row_sum", vec![n], data, &[x], Op::RowSum(x))
    }

    pub fn row_mean(&mut self, x: Var) -> Result<Var, TensorError> {
        let (n, c) = self.matrix_dims("row_mean", x)?;
        let data = self
            .value(x)
            .data()
            .chunks(c)
            .map(|r| r.iter().sum::<f64>() / c as f64)
            .collect();
        self.push("row_mean", vec![n], data, &[x], Op::RowMean(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, TensorError> {
        self.map("exp", x, f64::exp, Op::Exp(x))
    }

    /// Natural log; non-positive arguments are rejected.
    pub fn log(&mut self, x: Var) -> Result<Var, TensorError> {
        if self.value(x).data().iter().any(|&v| v <= 0.0) {
            return Err(TensorError::invalid("log", "argument must be positive"));
        }
        self.map("log", x, f64::ln, Op::Log(x))
    }

    /// Square root of non-negative values. The gradient at exactly 0 is taken as 0.
    pub fn sqrt(&mut self, x: Var) -> Result<Var, TensorError> {
        if self.value(x).data().iter().any(|&v| v < 0.0) {
            return Err(TensorError::invalid("sqrt", "argument must be non-negative"));
        }
        self.map("sqrt", x, f64::sqrt, Op::Sqrt(x))
    }

    /// `max(x, c)` elementwise; the gradient at the kink `x == c` is 0.
    pub fn max_const(&mut self, x: Var, c: f64) -> Result<Var, TensorError> {
        self.map("max_const", x, |v| v.max(c), Op::MaxConst(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        self.map("relu", x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var, TensorError> {
        self.mul(x, x)
    }

    /// Multiplies by a fixed mask (e.g. an inverted-dropout keep mask).
    pub fn apply_mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var, TensorError> {
        if mask.len() != self.value(x).len() {
            return Err(TensorError::shape(
                "apply_mask",
                format!("mask of {} for {:?}", mask.len(), self.shape(x)),
            ));
        }
        let data = self.value(x).data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let shape = self.shape(x).to_vec();
        self.push("apply_mask", shape, data, &[x], Op::Mask(x, mask))
    }

    /// Picks flat elements of `x` into a vector.
    pub fn gather(&mut self, x: Var, idx: Vec<usize>) -> Result<Var, TensorError> {
        let src = self.value(x).data();
        if idx.is_empty() {
            return Err(TensorError::invalid("gather", "empty index list"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= src.len()) {
            return Err(TensorError::shape("gather", format!("index {bad} out of {}", src.len())));
        }
        let data = idx.iter().map(|&i| src[i]).collect();
        self.push("gather", vec![idx.len()], data, &[x], Op::Gather(x, idx))
    }

    fn check_pairs(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        pairs: &[(usize, usize)],
    ) -> Result<usize, TensorError> {
        let (na, da) = self.matrix_dims(op, a)?;
        let (nb, db) = self.matrix_dims(op, b)?;
        if da != db {
            return Err(TensorError::shape(op, format!("row widths {da} vs {db}")));
        }
        if pairs.is_empty() {
            return Err(TensorError::invalid(op, "empty pair list"));
        }
        if pairs.iter().any(|&(i, j)| i >= na || j >= nb) {
            return Err(TensorError::shape(op, format!("pair index out of {na}x{nb}")));
        }
        Ok(da)
    }

    /// Squared Euclidean distance `‖a[i] − b[j]‖²` for every listed pair.
    pub fn pair_sq_dist(&mut self, a: Var, b: Var, pairs: Vec<(usize, usize)>) -> Result<Var, TensorError> {
        self.check_pairs("pair_sq_dist", a, b, &pairs)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = pairs
            .iter()
            .map(|&(i, j)| va.row(i).iter().zip(vb.row(j)).map(|(x, y)| (x - y) * (x - y)).sum())
            .collect();
        self.push("pair_sq_dist", vec![pairs.len()], data, &[a, b], Op::PairSqDist { a, b, pairs })
    }

    /// Dot product `a[i] · b[j]` for every listed pair.
    pub fn pair_dot(&mut self, a: Var, b: Var, pairs: Vec<(usize, usize)>) -> Result<Var, TensorError> {
        self.check_pairs("pair_dot", a, b, &pairs)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = pairs
            .iter()
            .map(|&(i, j)| va.row(i).iter().zip(vb.row(j)).map(|(x, y)| x * y).sum())
            .collect();
        self.push("pair_dot", vec![pairs.len()], data, &[a, b], Op::PairDot { a, b, pairs })
    }

    /// Stable `log Σ exp` over each row of a matrix (a vector counts as one row).
    pub fn log_sum_exp(&mut self, x: Var) -> Result<Var, TensorError> {
        let v = self.value(x);
        let c = v.cols();
        let n = v.rows();
        let data = v.data().chunks(c).map(|r| lse(r.iter().copied())).collect();
        self.push("log_sum_exp", vec![n], data, &[x], Op::RowLogSumExp(x))
    }

    /// Stable `log Σ exp` over consecutive segments of a vector.
    ///
    /// With `with_zero` every segment also contains an implicit 0 entry, which
    /// yields `log(1 + Σ exp)` and makes empty segments evaluate to 0.
    pub fn segment_log_sum_exp(&mut self, x: Var, lens: Vec<usize>, with_zero: bool) -> Result<Var, TensorError> {
        let v = self.value(x).data();
        if lens.iter().sum::<usize>() != v.len() {
            return Err(TensorError::shape(
                "segment_log_sum_exp",
                format!("segments cover {} of {}", lens.iter().sum::<usize>(), v.len()),
            ));
        }
        if lens.is_empty() {
            return Err(TensorError::invalid("segment_log_sum_exp", "no segments"));
        }
        if !with_zero && lens.contains(&0) {
            return Err(TensorError::invalid("segment_log_sum_exp", "empty segment"));
        }
        let mut data = Vec::with_capacity(lens.len());
        let mut start = 0;
        for &len in &lens {
            let seg = &v[start..start + len];
            let zero = if with_zero { Some(0.0) } else { None };
            data.push(lse(seg.iter().copied().chain(zero)));
            start += len;
        }
        let n = data.len();
        self.push("segment_log_sum_exp", vec![n], data, &[x], Op::SegmentLogSumExp { x, lens })
    }

    /// Stable `log(exp(x) + exp(c))` elementwise.
    pub fn log_add_exp_const(&mut self, x: Var, c: f64) -> Result<Var, TensorError> {
        self.map(
            "log_add_exp_const",
            x,
            |v| {
                let m = v.max(c);
                m + ((v - m).exp() + (c - m).exp()).ln()
            },
            Op::LogAddExpConst(x),
        )
    }

    /// Mean softmax cross-entropy of N×C logits against integer labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        let (n, c) = self.matrix_dims("softmax_cross_entropy", logits)?;
        if labels.len() != n {
            return Err(TensorError::shape(
                "softmax_cross_entropy",
                format!("{} labels for {n} rows", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(TensorError::invalid(
                "softmax_cross_entropy",
                format!("label {bad} out of range for {c} classes"),
            ));
        }
        let v = self.value(logits).data();
        let mut probs = Vec::with_capacity(n * c);
        let mut total = 0.0;
        for (row, &label) in v.chunks(c).zip(labels) {
            let z = lse(row.iter().copied());
            total += z - row[label];
            probs.extend(row.iter().map(|x| (x - z).exp()));
        }
        let loss = total / n as f64;
        self.push(
            "softmax_cross_entropy",
            vec![1],
            vec![loss],
            &[logits],
            Op::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs },
        )
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients, TensorError> {
        if root.0 >= self.nodes.len() {
            return Err(TensorError::invalid("backward", "root is not on this tape"));
        }
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(TensorError::NotScalar { shape: root_value.shape().to_vec() });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[root.0].requires_grad {
            grads[root.0] = Some(vec![1.0]);
        }
        for id in (0..=root.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && grads[id].is_none() {
                grads[id] = Some(vec![0.0; node.value.len()]);
            } else if !node.requires_grad {
                grads[id] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let out = node.value.data();
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| add_into(s, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |s| add_into(s, g));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s -= g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |s| {
                    for ((s, g), y) in s.iter_mut().zip(g).zip(vb) {
                        *s += g * y;
                    }
                });
                acc(*b, &mut |s| {
                    for ((s, g), x) in s.iter_mut().zip(g).zip(va) {
                        *s += g * x;
                    }
                });
            }
            Op::Scale(x, k) => acc(*x, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g * k)),
            Op::AddScalar(x) => acc(*x, &mut |s| add_into(s, g)),
            Op::AddRow(x, row) => {
                acc(*x, &mut |s| add_into(s, g));
                let c = self.value(*row).len();
                acc(*row, &mut |s| {
                    for gr in g.chunks(c) {
                        add_into(s, gr);
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (n, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let m = self.shape(*b)[1];
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                // dA = G Bᵀ, dB = Aᵀ G
                acc(*a, &mut |s| {
                    for i in 0..n {
                        for p in 0..k {
                            let mut t = 0.0;
                            for j in 0..m {
                                t += g[i * m + j] * vb[p * m + j];
                            }
                            s[i * k + p] += t;
                        }
                    }
                });
                acc(*b, &mut |s| {
                    for i in 0..n {
                        for p in 0..k {
                            let x = va[i * k + p];
                            for j in 0..m {
                                s[p * m + j] += x * g[i * m + j];
                            }
                        }
                    }
                });
            }
            Op::Transpose(x) => {
                let (r, c) = (self.shape(*x)[0], self.shape(*x)[1]);
                acc(*x, &mut |s| {
                    for i in 0..r {
                        for j in 0..c {
                            s[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |s| s.iter_mut().for_each(|s| *s += g[0])),
            Op::Mean(x) => {
                let n = self.value(*x).len() as f64;
                acc(*x, &mut |s| s.iter_mut().for_each(|s| *s += g[0] / n));
            }
            Op::RowSum(x) | Op::RowMean(x) => {
                let c = self.shape(*x)[1];
                let k = if matches!(node.op, Op::RowMean(_)) { 1.0 / c as f64 } else { 1.0 };
                acc(*x, &mut |s| {
                    for (row, gi) in s.chunks_mut(c).zip(g) {
                        row.iter_mut().for_each(|s| *s += gi * k);
                    }
                });
            }
            Op::Exp(x) => acc(*x, &mut |s| {
                for ((s, g), y) in s.iter_mut().zip(g).zip(out) {
                    *s += g * y;
                }
            }),
            Op::Log(x) => {
                let vx = self.value(*x).data();
                acc(*x, &mut |s| {
                    for ((s, g), x) in s.iter_mut().zip(g).zip(vx) {
                        *s += g / x;
                    }
                });
            }
            Op::Sqrt(x) => acc(*x, &mut |s| {
                for ((s, g), y) in s.iter_mut().zip(g).zip(out) {
                    if *y > 0.0 {
                        *s += g / (2.0 * y);
                    }
                }
            }),
            Op::MaxConst(x, c) => {
                let vx = self.value(*x).data();
                acc(*x, &mut |s| {
                    for ((s, g), x) in s.iter_mut().zip(g).zip(vx) {
                        if x > c {
                            *s += g;
                        }
                    }
                });
            }
            Op::Relu(x) => {
                let vx = self.value(*x).data();
                acc(*x, &mut |s| {
                    for ((s, g), x) in s.iter_mut().zip(g).zip(vx) {
                        if *x > 0.0 {
                            *s += g;
                        }
                    }
                });
            }
            Op::Mask(x, mask) => acc(*x, &mut |s| {
                for ((s, g), m) in s.iter_mut().zip(g).zip(mask) {
                    *s += g * m;
                }
            }),
            Op::Gather(x, idx) => acc(*x, &mut |s| {
                for (&i, g) in idx.iter().zip(g) {
                    s[i] += g;
                }
            }),
            Op::PairSqDist { a, b, pairs } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let d = va.cols();
                acc(*a, &mut |s| {
                    for (&(i, j), gk) in pairs.iter().zip(g) {
                        for (t, (x, y)) in va.row(i).iter().zip(vb.row(j)).enumerate() {
                            s[i * d + t] += 2.0 * gk * (x - y);
                        }
                    }
                });
                acc(*b, &mut |s| {
                    for (&(i, j), gk) in pairs.iter().zip(g) {
                        for (t, (x, y)) in va.row(i).iter().zip(vb.row(j)).enumerate() {
                            s[j * d + t] -= 2.0 * gk * (x - y);
                        }
                    }
                });
            }
            Op::PairDot { a, b, pairs } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let d = va.cols();
                acc(*a, &mut |s| {
                    for (&(i, j), gk) in pairs.iter().zip(g) {
                        for (t, y) in vb.row(j).iter().enumerate() {
                            s[i * d + t] += gk * y;
                        }
                    }
                });
                acc(*b, &mut |s| {
                    for (&(i, j), gk) in pairs.iter().zip(g) {
                        for (t, x) in va.row(i).iter().enumerate() {
                            s[j * d + t] += gk * x;
                        }
                    }
                });
            }
            Op::RowLogSumExp(x) => {
                let vx = self.value(*x);
                let c = vx.cols();
                acc(*x, &mut |s| {
                    for (r, (row, gi)) in vx.data().chunks(c).zip(g).enumerate() {
                        for (t, v) in row.iter().enumerate() {
                            s[r * c + t] += gi * (v - out[r]).exp();
                        }
                    }
                });
            }
            Op::SegmentLogSumExp { x, lens } => {
                let vx = self.value(*x).data();
                acc(*x, &mut |s| {
                    let mut start = 0;
                    for ((&len, gi), z) in lens.iter().zip(g).zip(out) {
                        for t in start..start + len {
                            s[t] += gi * (vx[t] - z).exp();
                        }
                        start += len;
                    }
                });
            }
            Op::LogAddExpConst(x) => {
                let vx = self.value(*x).data();
                acc(*x, &mut |s| {
                    for (((s, g), x), y) in s.iter_mut().zip(g).zip(vx).zip(out) {
                        *s += g * (x - y).exp();
                    }
                });
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let c = self.shape(*logits)[1];
                let n = labels.len() as f64;
                acc(*logits, &mut |s| {
                    for (r, &label) in labels.iter().enumerate() {
                        for t in 0..c {
                            let onehot = if t == label { 1.0 } else { 0.0 };
                            s[r * c + t] += g[0] * (probs[r * c + t] - onehot) / n;
                        }
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            let row = &b[p * m..(p + 1) * m];
            for (o, y) in out[i * m..(i + 1) * m].iter_mut().zip(row) {
                *o += x * y;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_t(v: &[f64]) -> Tensor {
        Tensor::vector(v.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward() {
        let mut t = Tape::new();
        let x = t.constant(vec_t(&[-1.0, 2.0]));
        let y = t.relu(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 2.0]);
    }

    #[test]
    fn log_sum_exp_of_zeros_is_ln2() {
        let mut t = Tape::new();
        let x = t.constant(vec_t(&[0.0, 0.0]));
        let y = t.log_sum_exp(x).unwrap();
        assert!((t.value(y).item() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn identity_matmul() {
        let mut t = Tape::new();
        let i = t.constant(Tensor::identity(2).unwrap());
        let a = t.constant(Tensor::matrix(2, 2, vec![1.5, -2.0, 0.25, 7.0]).unwrap());
        let y = t.matmul(i, a).unwrap();
        assert_eq!(t.value(y), t.value(a));
    }

    #[test]
    fn square_and_log_gradients() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0).unwrap());
        let y = t.square(x).unwrap();
        assert_eq!(t.backward(y).unwrap().wrt(x), &[6.0]);

        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(2.0).unwrap());
        let y = t.log(x).unwrap();
        assert_eq!(t.backward(y).unwrap().wrt(x), &[0.5]);
    }

    #[test]
    fn softmax_ce_gradient_is_probs_minus_onehot() {
        let mut t = Tape::new();
        let z = t.param(Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap());
        let l = t.softmax_cross_entropy(z, &[0]).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(z), &[-0.5, 0.5]);
    }

    #[test]
    fn unreachable_leaf_gets_zero_and_constants_get_none() {
        let mut t = Tape::new();
        let x = t.param(vec_t(&[1.0, 2.0]));
        let unused = t.param(vec_t(&[5.0]));
        let c = t.constant(vec_t(&[1.0, 1.0]));
        let y = t.mul(x, c).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(x), &[1.0, 1.0]);
        assert_eq!(g.wrt(unused), &[0.0]);
        assert!(g.get(c).is_none());
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut t = Tape::new();
        let x = t.param(vec_t(&[1.0, 2.0]));
        let y = t.exp(x).unwrap();
        assert!(matches!(t.backward(y), Err(TensorError::NotScalar { .. })));
    }

    #[test]
    fn backward_twice_is_identical() {
        let mut t = Tape::new();
        let x = t.param(vec_t(&[0.3, -1.2, 2.0]));
        let e = t.exp(x).unwrap();
        let l = t.log_sum_exp(e).unwrap();
        let g1 = t.backward(l).unwrap();
        let g2 = t.backward(l).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut t = Tape::new();
        let a = t.constant(vec_t(&[1.0, 2.0]));
        let b = t.constant(vec_t(&[1.0, 2.0, 3.0]));
        match t.add(a, b) {
            Err(TensorError::Shape { op, .. }) => assert_eq!(op, "add"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_outputs_are_rejected() {
        let mut t = Tape::new();
        let x = t.constant(vec_t(&[800.0]));
        assert!(matches!(t.exp(x), Err(TensorError::NonFinite { op: "exp" })));
        let z = t.constant(vec_t(&[0.0]));
        assert!(t.log(z).is_err());
    }

    #[test]
    fn log_add_exp_const_is_stable() {
        let mut t = Tape::new();
        let x = t.param(vec_t(&[1000.0, -1000.0]));
        let y = t.log_add_exp_const(x, (1e-8f64).ln()).unwrap();
        let v = t.value(y).data();
        assert!((v[0] - 1000.0).abs() < 1e-12);
        assert!((v[1] - (1e-8f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn segment_lse_with_zero_handles_empty_segments() {
        let mut t = Tape::new();
        let x = t.param(vec_t(&[0.0, 0.0, 1.0]));
        let y = t.segment_log_sum_exp(x, vec![0, 2, 1], true).unwrap();
        let v = t.value(y).data();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 3f64.ln()).abs() < 1e-15);
        assert!((v[2] - (1.0 + 1f64.exp()).ln()).abs() < 1e-15);
    }
}
