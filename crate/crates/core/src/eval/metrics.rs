use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hin::NodeId;

/// Root mean squared difference.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "rmse needs equal non-empty inputs, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let ss: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// `Σ_{i<k} rel_i / log2(i + 2)` over the given order.
pub fn dcg(relevance_in_order: impl IntoIterator<Item = f64>, k: usize) -> f64 {
    relevance_in_order.into_iter().take(k).enumerate().map(|(i, r)| r / ((i + 2) as f64).log2()).sum()
}

/// nDCG@k of `ranking` against graded `relevance` (missing nodes count 0).
/// 0 when no relevant item exists.
pub fn ndcg_at_k(ranking: &[NodeId], relevance: &HashMap<NodeId, f64>, k: usize) -> f64 {
    let rel = |v: &NodeId| relevance.get(v).copied().unwrap_or(0.0);
    let mut ideal: Vec<f64> = relevance.values().copied().collect();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let idcg = dcg(ideal, k);
    if idcg <= 0.0 {
        return 0.0;
    }
    dcg(ranking.iter().map(rel), k) / idcg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[1.0, 2.0], &[0.5, 0.0]).unwrap(), rmse(&[0.5, 0.0], &[1.0, 2.0]).unwrap());
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ndcg_examples() {
        let (a, b, c) = (NodeId(0), NodeId(1), NodeId(2));
        let rel: HashMap<NodeId, f64> = [(a, 1.0), (b, 0.0)].into();
        assert!((ndcg_at_k(&[b, a], &rel, 2) - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&[a, b], &rel, 2), 1.0);
        let zero: HashMap<NodeId, f64> = [(a, 0.0), (b, 0.0)].into();
        assert_eq!(ndcg_at_k(&[a, b], &zero, 2), 0.0);
        let graded: HashMap<NodeId, f64> = [(a, 0.2), (b, 0.9), (c, 0.5)].into();
        assert!((ndcg_at_k(&[b, c, a], &graded, 3) - 1.0).abs() < 1e-15);
        assert!(ndcg_at_k(&[a, c, b], &graded, 3) < ndcg_at_k(&[c, a, b], &graded, 3));
    }
}
