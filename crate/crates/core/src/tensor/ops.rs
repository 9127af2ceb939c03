//! Stateless forms of the tape primitives.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Element-wise aggregation over candidate vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    /// Per dimension, the `slots` largest values in descending order.
    TopT,
    /// The `slots` whole candidate vectors with the largest component sums.
    TopTVector,
    Max,
    Mean,
    Sum,
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.matmul(b)
}

/// Column-wise concatenation of tensors with equal row counts.
pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    let rows = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?.rows();
    if parts.iter().any(|p| p.rows() != rows) {
        return Err(Error::Shape("concat parts differ in row count".into()));
    }
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..rows {
        let mut off = 0;
        let dst = out.row_mut(r);
        for p in parts {
            dst[off..off + p.cols()].copy_from_slice(p.row(r));
            off += p.cols();
        }
    }
    Ok(out)
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Mean squared difference; the denominator is the sample count.
pub fn mse(pred: &[f64], label: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("mse of empty input".into()));
    }
    if pred.len() != label.len() {
        return Err(Error::Shape(format!("mse over {} predictions and {} labels", pred.len(), label.len())));
    }
    Ok(pred.iter().zip(label).map(|(p, l)| (p - l) * (p - l)).sum::<f64>() / pred.len() as f64)
}

/// Per-dimension top-`t` selection over `n` candidates.
///
/// `value(c, j)` reads candidate `c` at dimension `j`. Writes `t * d` values
/// (slot-major) and the winning candidate of each. Ties go to the lower
/// candidate index; with fewer than `t` candidates the remaining slots repeat
/// the best one. `n == 0` writes zeros and `u32::MAX` routes.
pub(crate) fn select_top(
    n: usize,
    d: usize,
    t: usize,
    value: impl Fn(usize, usize) -> f64,
    out: &mut [f64],
    route: &mut [u32],
) {
    debug_assert!(out.len() == t * d && route.len() == t * d);
    if n == 0 {
        out.fill(0.0);
        route.fill(u32::MAX);
        return;
    }
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(t);
    for j in 0..d {
        best.clear();
        for c in 0..n {
            let v = value(c, j);
            // strictly greater keeps earlier candidates ahead on ties
            if best.len() == t && !(v > best[t - 1].0) {
                continue;
            }
            let pos = best.iter().position(|&(b, _)| v > b).unwrap_or(best.len());
            if best.len() == t {
                best.pop();
            }
            best.insert(pos, (v, c));
        }
        for k in 0..t {
            let (v, c) = best.get(k).copied().unwrap_or(best[0]);
            out[k * d + j] = v;
            route[k * d + j] = c as u32;
        }
    }
}

/// Whole-vector top-`t` selection: candidates ranked by the sum of their
/// components (ties to the lower index), slot `k` copies the `k`-th ranked
/// vector. Padding and the empty case follow [`select_top`].
pub(crate) fn select_top_vectors(
    n: usize,
    d: usize,
    t: usize,
    value: impl Fn(usize, usize) -> f64,
    out: &mut [f64],
    route: &mut [u32],
) {
    debug_assert!(out.len() == t * d && route.len() == t * d);
    if n == 0 {
        out.fill(0.0);
        route.fill(u32::MAX);
        return;
    }
    let sums: Vec<f64> = (0..n).map(|c| (0..d).map(|j| value(c, j)).sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable, so equal sums keep index order
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]));
    for k in 0..t {
        let c = order.get(k).copied().unwrap_or(order[0]);
        for j in 0..d {
            out[k * d + j] = value(c, j);
            route[k * d + j] = c as u32;
        }
    }
}

/// Whole-vector counterpart of [`top_t_select`]; returns the slot vectors
/// and the chosen candidate of each.
pub fn top_t_select_vectors(candidates: &[Tensor], t: usize) -> Result<(Vec<Tensor>, Vec<usize>)> {
    if t < 1 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    let d = check_candidates(candidates)?;
    let shape = candidates[0].shape();
    let mut out = vec![0.0; t * d];
    let mut route = vec![0u32; t * d];
    select_top_vectors(candidates.len(), d, t, |c, j| candidates[c].data()[j], &mut out, &mut route);
    let slots = (0..t)
        .map(|k| Tensor::from_vec(shape.0, shape.1, out[k * d..(k + 1) * d].to_vec()).unwrap())
        .collect();
    Ok((slots, (0..t).map(|k| route[k * d] as usize).collect()))
}

fn check_candidates(candidates: &[Tensor]) -> Result<usize> {
    let first = candidates.first().ok_or_else(|| Error::InvalidArgument("no candidates to pool".into()))?;
    let d = first.rows() * first.cols();
    if candidates.iter().any(|c| c.shape() != first.shape()) {
        return Err(Error::Shape("pooled candidates differ in shape".into()));
    }
    Ok(d)
}

/// Element-wise top-`t` pooling. Returns the `t` slot vectors and, per slot,
/// the winning candidate index of every dimension.
pub fn top_t_select(candidates: &[Tensor], t: usize) -> Result<(Vec<Tensor>, Vec<Vec<usize>>)> {
    if t < 1 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    let d = check_candidates(candidates)?;
    let shape = candidates[0].shape();
    let mut out = vec![0.0; t * d];
    let mut route = vec![0u32; t * d];
    select_top(candidates.len(), d, t, |c, j| candidates[c].data()[j], &mut out, &mut route);
    let slots = (0..t)
        .map(|k| Tensor::from_vec(shape.0, shape.1, out[k * d..(k + 1) * d].to_vec()).unwrap())
        .collect();
    let routes = (0..t).map(|k| route[k * d..(k + 1) * d].iter().map(|&c| c as usize).collect()).collect();
    Ok((slots, routes))
}

pub fn reduce_max(candidates: &[Tensor]) -> Result<Tensor> {
    Ok(top_t_select(candidates, 1)?.0.remove(0))
}

pub fn reduce_sum(candidates: &[Tensor]) -> Result<Tensor> {
    check_candidates(candidates)?;
    let mut out = candidates[0].clone();
    for c in &candidates[1..] {
        out.add_assign(c);
    }
    Ok(out)
}

pub fn reduce_mean(candidates: &[Tensor]) -> Result<Tensor> {
    let mut out = reduce_sum(candidates)?;
    out.scale(1.0 / candidates.len() as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Tensor {
        Tensor::row_vector(x)
    }

    /// Sorts each dimension independently; the slot-k oracle is the k-th
    /// entry of that sort.
    fn sort_oracle(c: &[Tensor], t: usize) -> Vec<Vec<f64>> {
        let d = c[0].cols();
        (0..t)
            .map(|k| {
                (0..d)
                    .map(|j| {
                        let mut col: Vec<f64> = c.iter().map(|x| x.get(0, j)).collect();
                        col.sort_by(|a, b| b.partial_cmp(a).unwrap());
                        col[k]
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn top2_example() {
        let c = [v(&[3.0, 1.0]), v(&[2.0, 5.0]), v(&[0.0, 4.0])];
        let (slots, routes) = top_t_select(&c, 2).unwrap();
        assert_eq!(slots[0].data(), &[3.0, 5.0]);
        assert_eq!(slots[1].data(), &[2.0, 4.0]);
        assert_eq!(routes, vec![vec![0, 1], vec![1, 2]]);
        let oracle = sort_oracle(&c, 2);
        assert_eq!(slots[0].data(), oracle[0].as_slice());
        assert_eq!(slots[1].data(), oracle[1].as_slice());
    }

    #[test]
    fn t1_is_max_and_padding_repeats_best() {
        let c = [v(&[3.0, 1.0]), v(&[2.0, 5.0])];
        assert_eq!(top_t_select(&c, 1).unwrap().0[0], reduce_max(&c).unwrap());
        assert_eq!(reduce_max(&c).unwrap().data(), &[3.0, 5.0]);
        let (slots, _) = top_t_select(&[v(&[1.0, -2.0])], 2).unwrap();
        assert_eq!(slots[0], slots[1]);
        assert_eq!(slots[0].data(), &[1.0, -2.0]);
        let (slots, routes) = top_t_select(&c, 3).unwrap();
        assert_eq!(slots[2].data(), &[3.0, 5.0]);
        assert_eq!(routes[2], vec![0, 1]);
    }

    #[test]
    fn whole_vector_selection() {
        // sums 4, 7, 4: the tie between 0 and 2 goes to 0
        let c = [v(&[3.0, 1.0]), v(&[2.0, 5.0]), v(&[0.0, 4.0])];
        let (slots, picked) = top_t_select_vectors(&c, 2).unwrap();
        assert_eq!(picked, vec![1, 0]);
        assert_eq!(slots[0].data(), &[2.0, 5.0]);
        assert_eq!(slots[1].data(), &[3.0, 1.0]);
        let (slots, picked) = top_t_select_vectors(&c[..1], 3).unwrap();
        assert_eq!(picked, vec![0, 0, 0]);
        assert_eq!(slots[2].data(), &[3.0, 1.0]);
        assert!(top_t_select_vectors(&c, 0).is_err());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = [v(&[1.0]), v(&[2.0]), v(&[2.0]), v(&[2.0])];
        let (_, routes) = top_t_select(&c, 2).unwrap();
        assert_eq!(routes, vec![vec![1], vec![2]]);
    }

    #[test]
    fn reductions() {
        let c = [v(&[1.0, 2.0]), v(&[3.0, -2.0])];
        assert_eq!(reduce_sum(&c).unwrap().data(), &[4.0, 0.0]);
        assert_eq!(reduce_mean(&c).unwrap().data(), &[2.0, 0.0]);
        let same = [v(&[0.3, 0.7]), v(&[0.3, 0.7]), v(&[0.3, 0.7])];
        for (m, e) in reduce_mean(&same).unwrap().data().iter().zip([0.3, 0.7]) {
            assert!((m - e).abs() < 1e-15);
        }
        assert!(reduce_mean(&[]).is_err());
        assert!(top_t_select(&c, 0).is_err());
    }

    #[test]
    fn relu_mse_concat() {
        assert_eq!(relu(&v(&[-1.0, 2.0, 0.0])).data(), &[0.0, 2.0, 0.0]);
        assert_eq!(mse(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert!(mse(&[], &[]).is_err());
        let x = v(&[1.0, 2.0]);
        assert_eq!(concat(&[&x]).unwrap(), x);
        let c = concat(&[&x, &v(&[3.0, 4.0]), &v(&[5.0, 6.0])]).unwrap();
        assert_eq!(c.shape(), (1, 6));
        assert!(concat(&[&x, &Tensor::zeros(2, 1)]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn distinct_values_are_permutation_invariant(
            vals in proptest::collection::hash_set(-1000i32..1000, 4..12),
            t in 1usize..4,
            rot in 0usize..12,
        ) {
            let vals: Vec<f64> = vals.into_iter().map(f64::from).collect();
            // three dims from the same pool, shifted so orders differ per dim
            let n = vals.len();
            let cands: Vec<Tensor> = (0..n).map(|i| v(&[vals[i], vals[(i + 1) % n], -vals[(i + 2) % n]])).collect();
            let mut perm = cands.clone();
            perm.rotate_left(rot % n);
            let (a, _) = top_t_select(&cands, t).unwrap();
            let (b, _) = top_t_select(&perm, t).unwrap();
            proptest::prop_assert_eq!(&a, &b);
            let oracle = sort_oracle(&cands, t.min(n));
            for k in 0..t.min(n) {
                proptest::prop_assert_eq!(a[k].data(), oracle[k].as_slice());
            }
        }
    }
}
