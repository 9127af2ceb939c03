use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::ops::{select_top, select_top_vectors, PoolKind};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Candidate lists for a pooling op: group `g` pools the rows
/// `cands[offsets[g]..offsets[g + 1]]`, each `(source, row)`.
#[derive(Debug, Clone, Default)]
pub struct PoolGroups {
    pub offsets: Vec<usize>,
    pub cands: Vec<(u32, u32)>,
}

impl PoolGroups {
    pub fn new() -> Self {
        PoolGroups { offsets: vec![0], cands: Vec::new() }
    }

    pub fn push(&mut self, source: usize, row: usize) {
        self.cands.push((source as u32, row as u32));
    }

    pub fn close_group(&mut self) {
        self.offsets.push(self.cands.len());
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn group(&self, g: usize) -> &[(u32, u32)] {
        &self.cands[self.offsets[g]..self.offsets[g + 1]]
    }
}

#[derive(Debug)]
struct PoolRecord {
    sources: Vec<Var>,
    kind: PoolKind,
    slots: usize,
    groups: PoolGroups,
    /// winner position within its group per output element; max-type kinds only
    route: Vec<u32>,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<u32>),
    ScatterRows(Vec<Var>, Vec<Vec<u32>>),
    Relu(Var),
    Pool(Box<PoolRecord>),
    Mse(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Linear record of a computation. Every op reads only earlier entries, so
/// a reverse sweep is a valid backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Parameter gradients from [`Tape::backward`], indexed by parameter id.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub grads: Vec<Tensor>,
    /// Parameters with no path to the loss; their gradient is zero.
    pub disconnected: Vec<usize>,
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    /// Records parameter `id` with its current value.
    pub fn param(&mut self, id: usize, t: &Tensor) -> Var {
        self.push(t.clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_t(self.value(b))?;
        Ok(self.push(v, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!("add {:?} + {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Adds the `1 x c` row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::Shape(format!("add_row {:?} + {:?}", xv.shape(), bv.shape())));
        }
        let mut v = xv.clone();
        for r in 0..v.rows() {
            for (a, b) in v.row_mut(r).iter_mut().zip(bv.row(0)) {
                *a += b;
            }
        }
        Ok(self.push(v, Op::AddRow(x, bias)))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let v = super::ops::concat(&refs)?;
        Ok(self.push(v, Op::Concat(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + width > xv.cols() {
            return Err(Error::Shape(format!("slice {start}..{} of {} columns", start + width, xv.cols())));
        }
        let mut v = Tensor::zeros(xv.rows(), width);
        for r in 0..xv.rows() {
            v.row_mut(r).copy_from_slice(&xv.row(r)[start..start + width]);
        }
        Ok(self.push(v, Op::SliceCols(x, start)))
    }

    pub fn gather_rows(&mut self, x: Var, index: &[u32]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = index.iter().find(|&&i| i as usize >= xv.rows()) {
            return Err(Error::Shape(format!("gather row {bad} of {}", xv.rows())));
        }
        let mut v = Tensor::zeros(index.len(), xv.cols());
        for (r, &i) in index.iter().enumerate() {
            v.row_mut(r).copy_from_slice(xv.row(i as usize));
        }
        Ok(self.push(v, Op::GatherRows(x, index.to_vec())))
    }

    /// Places row `i` of `parts[k]` at output row `index[k][i]`; uncovered
    /// rows are zero.
    pub fn scatter_rows(&mut self, parts: &[Var], index: &[Vec<u32>], rows: usize) -> Result<Var> {
        if parts.len() != index.len() || parts.is_empty() {
            return Err(Error::Shape("scatter parts/index mismatch".into()));
        }
        let cols = self.value(parts[0]).cols();
        let mut v = Tensor::zeros(rows, cols);
        for (p, idx) in parts.iter().zip(index) {
            let pv = self.value(*p);
            if pv.cols() != cols || pv.rows() != idx.len() {
                return Err(Error::Shape("scatter part shape".into()));
            }
            for (r, &i) in idx.iter().enumerate() {
                if i as usize >= rows {
                    return Err(Error::Shape(format!("scatter row {i} of {rows}")));
                }
                v.row_mut(i as usize).copy_from_slice(pv.row(r));
            }
        }
        Ok(self.push(v, Op::ScatterRows(parts.to_vec(), index.to_vec())))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = super::ops::relu(self.value(x));
        self.push(v, Op::Relu(x))
    }

    /// Pools candidate rows drawn from `sources` (all with the same width
    /// `d`). Output has one row per group and `slots * d` columns, slot `k`
    /// in columns `k*d..(k+1)*d`. Mean/Max/Sum require `slots == 1`.
    pub fn pool(&mut self, sources: &[Var], groups: PoolGroups, kind: PoolKind, slots: usize) -> Result<Var> {
        if slots == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        if !matches!(kind, PoolKind::TopT | PoolKind::TopTVector) && slots != 1 {
            return Err(Error::InvalidArgument(format!("{kind:?} pooling produces a single slot")));
        }
        let d = sources.first().map(|s| self.value(*s).cols()).ok_or_else(|| Error::Shape("no pool sources".into()))?;
        if sources.iter().any(|s| self.value(*s).cols() != d) {
            return Err(Error::Shape("pool sources differ in width".into()));
        }
        for &(s, r) in &groups.cands {
            if s as usize >= sources.len() || r as usize >= self.value(sources[s as usize]).rows() {
                return Err(Error::Shape(format!("pool candidate ({s}, {r}) out of range")));
            }
        }
        let n_groups = groups.num_groups();
        let width = slots * d;
        let mut out = Tensor::zeros(n_groups, width);
        let mut route = Vec::new();
        let vals: Vec<&Tensor> = sources.iter().map(|s| self.value(*s)).collect();
        match kind {
            PoolKind::TopT | PoolKind::Max | PoolKind::TopTVector => {
                route = vec![0u32; n_groups * width];
                for g in 0..n_groups {
                    let cands = groups.group(g);
                    let value = |c: usize, j: usize| vals[cands[c].0 as usize].get(cands[c].1 as usize, j);
                    let (o, r) = (out.row_mut(g), &mut route[g * width..(g + 1) * width]);
                    if kind == PoolKind::TopTVector {
                        select_top_vectors(cands.len(), d, slots, value, o, r);
                    } else {
                        select_top(cands.len(), d, slots, value, o, r);
                    }
                }
            }
            PoolKind::Sum | PoolKind::Mean => {
                for g in 0..n_groups {
                    let cands = groups.group(g);
                    let row = out.row_mut(g);
                    for &(s, r) in cands {
                        for (o, x) in row.iter_mut().zip(vals[s as usize].row(r as usize)) {
                            *o += x;
                        }
                    }
                    if kind == PoolKind::Mean && !cands.is_empty() {
                        let inv = 1.0 / cands.len() as f64;
                        row.iter_mut().for_each(|o| *o *= inv);
                    }
                }
            }
        }
        let rec = PoolRecord { sources: sources.to_vec(), kind, slots, groups, route };
        Ok(self.push(out, Op::Pool(Box::new(rec))))
    }

    /// Mean squared error of an `n x 1` (or `1 x n`) prediction against
    /// `labels`; result is `1 x 1`.
    pub fn mse(&mut self, pred: Var, labels: &[f64]) -> Result<Var> {
        let loss = super::ops::mse(self.value(pred).data(), labels)?;
        Ok(self.push(Tensor::row_vector(&[loss]), Op::Mse(pred, labels.to_vec())))
    }

    /// Hash of every discrete choice made in the forward pass: pooling
    /// winners and ReLU activity. Two evaluations with equal signatures took
    /// the same piecewise-linear branch.
    pub fn selection_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    for v in self.value(*x).data() {
                        (*v > 0.0).hash(&mut h);
                    }
                }
                Op::Pool(rec) => {
                    rec.route.hash(&mut h);
                    rec.groups.cands.hash(&mut h);
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse sweep from the `1 x 1` value `loss`. `n_params` is the number
    /// of parameter ids the caller registered.
    pub fn backward(&self, loss: Var, n_params: usize) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Shape(format!("loss must be 1x1, got {:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::row_vector(&[1.0]));
        let mut param_grads: Vec<Option<Tensor>> = vec![None; n_params];

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(x) => x.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    if *id >= n_params {
                        return Err(Error::InvalidArgument(format!("parameter id {id} >= {n_params}")));
                    }
                    match &mut param_grads[*id] {
                        Some(x) => x.add_assign(&g),
                        slot @ None => *slot = Some(g),
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b))?;
                    let gb = self.value(*a).t_matmul(&g)?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    // C = A Bᵀ: dA = G B, dB = Gᵀ A
                    let ga = g.matmul(self.value(*b))?;
                    let gb = g.t_matmul(self.value(*a))?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::AddRow(x, bias) => {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (s, v) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                    acc(&mut grads, *x, g);
                    acc(&mut grads, *bias, gb);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut gp = Tensor::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        off += w;
                        acc(&mut grads, *p, gp);
                    }
                }
                Op::SliceCols(x, start) => {
                    let xv = self.value(*x);
                    let mut gx = Tensor::zeros(xv.rows(), xv.cols());
                    for r in 0..g.rows() {
                        gx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::GatherRows(x, index) => {
                    let xv = self.value(*x);
                    let mut gx = Tensor::zeros(xv.rows(), xv.cols());
                    for (r, &src) in index.iter().enumerate() {
                        for (a, b) in gx.row_mut(src as usize).iter_mut().zip(g.row(r)) {
                            *a += b;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ScatterRows(parts, index) => {
                    for (p, idx) in parts.iter().zip(index) {
                        let mut gp = Tensor::zeros(idx.len(), g.cols());
                        for (r, &dst) in idx.iter().enumerate() {
                            gp.row_mut(r).copy_from_slice(g.row(dst as usize));
                        }
                        acc(&mut grads, *p, gp);
                    }
                }
                Op::Relu(x) => {
                    // subgradient 0 at 0
                    let mut gx = g;
                    for (gv, out) in gx.data_mut().iter_mut().zip(node.value.data()) {
                        if *out <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Pool(rec) => {
                    let d = self.value(rec.sources[0]).cols();
                    let mut gs: Vec<Tensor> = rec
                        .sources
                        .iter()
                        .map(|s| {
                            let v = self.value(*s);
                            Tensor::zeros(v.rows(), v.cols())
                        })
                        .collect();
                    let width = rec.slots * d;
                    for grp in 0..rec.groups.num_groups() {
                        let cands = rec.groups.group(grp);
                        if cands.is_empty() {
                            continue;
                        }
                        let grow = g.row(grp);
                        match rec.kind {
                            PoolKind::TopT | PoolKind::Max | PoolKind::TopTVector => {
                                let route = &rec.route[grp * width..(grp + 1) * width];
                                for k in 0..rec.slots {
                                    for j in 0..d {
                                        let (s, r) = cands[route[k * d + j] as usize];
                                        let cell = &mut gs[s as usize].row_mut(r as usize)[j];
                                        *cell += grow[k * d + j];
                                    }
                                }
                            }
                            PoolKind::Sum | PoolKind::Mean => {
                                let scale = if rec.kind == PoolKind::Mean { 1.0 / cands.len() as f64 } else { 1.0 };
                                for &(s, r) in cands {
                                    for (a, b) in gs[s as usize].row_mut(r as usize).iter_mut().zip(grow) {
                                        *a += b * scale;
                                    }
                                }
                            }
                        }
                    }
                    for (s, gsrc) in rec.sources.iter().zip(gs) {
                        acc(&mut grads, *s, gsrc);
                    }
                }
                Op::Mse(pred, labels) => {
                    let pv = self.value(*pred);
                    let m = labels.len() as f64;
                    let scale = g.get(0, 0) * 2.0 / m;
                    let mut gp = Tensor::zeros(pv.rows(), pv.cols());
                    for ((o, p), l) in gp.data_mut().iter_mut().zip(pv.data()).zip(labels) {
                        *o = scale * (p - l);
                    }
                    acc(&mut grads, *pred, gp);
                }
            }
        }

        let mut disconnected = Vec::new();
        let mut shapes: Vec<Option<(usize, usize)>> = vec![None; n_params];
        for node in &self.nodes {
            if let Op::Param(id) = node.op {
                if id < n_params {
                    shapes[id] = Some(node.value.shape());
                }
            }
        }
        let grads = param_grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| match g {
                Some(g) => g,
                None => {
                    disconnected.push(id);
                    let (r, c) = shapes[id].unwrap_or((0, 0));
                    Tensor::zeros(r, c)
                }
            })
            .collect();
        Ok(Gradients { grads, disconnected })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Tensor {
        Tensor::row_vector(x)
    }

    /// Central differences of `f` w.r.t. every entry of `params[which]`.
    fn fd(params: &[Tensor], which: usize, h: f64, f: &dyn Fn(&[Tensor]) -> f64) -> Tensor {
        let mut out = Tensor::zeros(params[which].rows(), params[which].cols());
        for i in 0..out.data().len() {
            let mut p = params.to_vec();
            p[which].data_mut()[i] += h;
            let up = f(&p);
            p[which].data_mut()[i] -= 2.0 * h;
            let down = f(&p);
            out.data_mut()[i] = (up - down) / (2.0 * h);
        }
        out
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn rand_tensor(r: usize, c: usize, seed: &mut u64) -> Tensor {
        Tensor::from_vec(r, c, (0..r * c).map(|_| lcg(seed)).collect()).unwrap()
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut seed = 11;
        let params = vec![rand_tensor(4, 4, &mut seed), rand_tensor(4, 4, &mut seed)];
        let labels: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        let build = |p: &[Tensor], tape: &mut Tape| {
            let a = tape.param(0, &p[0]);
            let b = tape.param(1, &p[1]);
            let c = tape.matmul(a, b).unwrap();
            tape.mse(c, &labels).unwrap()
        };
        let f = |p: &[Tensor]| {
            let mut t = Tape::new();
            let l = build(p, &mut t);
            t.value(l).get(0, 0)
        };
        let mut tape = Tape::new();
        let loss = build(&params, &mut tape);
        let g = tape.backward(loss, 2).unwrap();
        for which in 0..2 {
            let num = fd(&params, which, 1e-5, &f);
            for (a, n) in g.grads[which].data().iter().zip(num.data()) {
                assert!((a - n).abs() / n.abs().max(1e-8) < 1e-6, "{a} vs {n}");
            }
        }
    }

    #[test]
    fn mse_gradient() {
        let pred = vec![0.3, -1.2, 2.0];
        let labels = vec![0.0, 0.5, 2.5];
        let mut tape = Tape::new();
        let p = tape.param(0, &Tensor::from_vec(3, 1, pred.clone()).unwrap());
        let l = tape.mse(p, &labels).unwrap();
        let g = tape.backward(l, 1).unwrap();
        for i in 0..3 {
            let analytic = 2.0 * (pred[i] - labels[i]) / 3.0;
            assert!((g.grads[0].data()[i] - analytic).abs() < 1e-15);
            let h = 1e-6;
            let mut up = pred.clone();
            up[i] += h;
            let mut down = pred.clone();
            down[i] -= h;
            let num = (super::super::ops::mse(&up, &labels).unwrap() - super::super::ops::mse(&down, &labels).unwrap()) / (2.0 * h);
            assert!((g.grads[0].data()[i] - num).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut tape = Tape::new();
        let w = tape.param(0, &v(&[1.0, 2.0]));
        let c = tape.constant(Tensor::from_vec(1, 1, vec![3.0]).unwrap());
        let _unused = tape.relu(w);
        let l = tape.mse(c, &[1.0]).unwrap();
        let g = tape.backward(l, 1).unwrap();
        assert_eq!(g.grads[0], Tensor::zeros(1, 2));
        assert_eq!(g.disconnected, vec![0]);
    }

    fn pool_grads(kind: PoolKind, slots: usize, cands: &[Tensor]) -> Vec<Tensor> {
        let mut tape = Tape::new();
        let src: Vec<Var> = cands.iter().enumerate().map(|(i, c)| tape.param(i, c)).collect();
        let mut groups = PoolGroups::new();
        for i in 0..cands.len() {
            groups.push(i, 0);
        }
        groups.close_group();
        let pooled = tape.pool(&src, groups, kind, slots).unwrap();
        let w = cands[0].cols() * slots;
        let ones = tape.constant(Tensor::from_vec(w, 1, vec![1.0; w]).unwrap());
        let s = tape.matmul(pooled, ones).unwrap();
        // d(s^2/1 - 0)/ds = 2s; divide out by using labels = s - 0.5 so upstream is 1
        let sv = tape.value(s).get(0, 0);
        let l = tape.mse(s, &[sv - 0.5]).unwrap();
        tape.backward(l, cands.len()).unwrap().grads
    }

    #[test]
    fn pool_gradient_routing() {
        let cands = [v(&[3.0, 1.0]), v(&[2.0, 5.0]), v(&[0.0, 4.0])];
        let g = pool_grads(PoolKind::Sum, 1, &cands);
        assert!(g.iter().all(|t| t.data() == [1.0, 1.0]));
        let g = pool_grads(PoolKind::Mean, 1, &cands);
        assert!(g.iter().all(|t| t.data().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15)));
        let g = pool_grads(PoolKind::Max, 1, &cands);
        assert_eq!(g[0].data(), &[1.0, 0.0]);
        assert_eq!(g[1].data(), &[0.0, 1.0]);
        assert_eq!(g[2].data(), &[0.0, 0.0]);
        let g = pool_grads(PoolKind::TopT, 2, &cands);
        assert_eq!(g[0].data(), &[1.0, 0.0]);
        assert_eq!(g[1].data(), &[1.0, 1.0]);
        assert_eq!(g[2].data(), &[0.0, 1.0]);
        let tied = [v(&[1.0]), v(&[1.0])];
        let g = pool_grads(PoolKind::Max, 1, &tied);
        assert_eq!((g[0].data()[0], g[1].data()[0]), (1.0, 0.0));
    }

    #[test]
    fn concat_slice_scatter_gather_route_gradients() {
        let mut seed = 5;
        let params = vec![rand_tensor(3, 2, &mut seed), rand_tensor(3, 3, &mut seed), rand_tensor(1, 5, &mut seed)];
        let labels: Vec<f64> = (0..4).map(|i| i as f64).collect();
        let build = |p: &[Tensor], tape: &mut Tape| {
            let a = tape.param(0, &p[0]);
            let b = tape.param(1, &p[1]);
            let bias = tape.param(2, &p[2]);
            let c = tape.concat(&[a, b]).unwrap();
            let c = tape.add_row(c, bias).unwrap();
            let r = tape.relu(c);
            let s = tape.slice_cols(r, 1, 3).unwrap();
            let gth = tape.gather_rows(s, &[2, 0, 2]).unwrap();
            let sc = tape.scatter_rows(&[gth], &[vec![3, 1, 0]], 4).unwrap();
            let sum = tape.add(sc, sc).unwrap();
            let w = tape.constant(Tensor::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap());
            let y = tape.matmul_t(sum, w).unwrap();
            tape.mse(y, &labels).unwrap()
        };
        let f = |p: &[Tensor]| {
            let mut t = Tape::new();
            let l = build(p, &mut t);
            t.value(l).get(0, 0)
        };
        let mut tape = Tape::new();
        let loss = build(&params, &mut tape);
        let g = tape.backward(loss, 3).unwrap();
        for which in 0..3 {
            let num = fd(&params, which, 1e-6, &f);
            for (a, n) in g.grads[which].data().iter().zip(num.data()) {
                assert!((a - n).abs() < 1e-6, "param {which}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn backward_is_bit_deterministic() {
        let mut seed = 3;
        let p = vec![rand_tensor(5, 5, &mut seed), rand_tensor(5, 5, &mut seed)];
        let run = || {
            let mut t = Tape::new();
            let a = t.param(0, &p[0]);
            let b = t.param(1, &p[1]);
            let c = t.matmul_t(a, b).unwrap();
            let r = t.relu(c);
            let l = t.mse(r, &[0.1; 25]).unwrap();
            t.backward(l, 2).unwrap().grads
        };
        let (x, y) = (run(), run());
        for (a, b) in x.iter().zip(&y) {
            assert!(a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
}
