use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Area under the ROC curve from the rank statistic, with ties credited 0.5.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Eval("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Eval("AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // Sum of 1-based ranks of positives, ties sharing their mean rank.
    // Twice the rank keeps every quantity an integer.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mean = (i + 1 + j + 1) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        twice_rank_sum += twice_mean * pos_in_group;
        i = j + 1;
    }
    let (p, n) = (n_pos as u64, n_neg as u64);
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * n) as f64)
}

/// Average precision of one ranked list of labels.
pub fn average_precision(ranked: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut total = 0.0;
    for (k, &label) in ranked.iter().enumerate() {
        if label {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    (hits > 0).then(|| total / hits as f64)
}

/// One candidate in a node's ranking: `(other node, score, label)`.
pub type Candidate = (usize, f64, bool);

/// Mean average precision over groups. Each group is sorted by descending
/// score, ties broken by ascending node id; groups without a positive are
/// skipped.
pub fn map_metric(groups: &[Vec<Candidate>]) -> Result<f64> {
    let mut sum = 0.0;
    let mut included = 0usize;
    for group in groups {
        let mut sorted = group.clone();
        sorted.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        let labels: Vec<bool> = sorted.iter().map(|c| c.2).collect();
        if let Some(ap) = average_precision(&labels) {
            sum += ap;
            included += 1;
        }
    }
    if included == 0 {
        return Err(Error::Eval("no node has a positive candidate".into()));
    }
    Ok(sum / included as f64)
}

/// Groups scored pairs by node: each pair `(u, v)` is a candidate of both
/// `u` (with other node `v`) and `v` (with other node `u`). Groups are
/// returned in node order.
pub fn group_by_node(pairs: &[(usize, usize)], scores: &[f64], labels: &[bool]) -> Vec<Vec<Candidate>> {
    let mut groups: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
    for ((&(u, v), &s), &l) in pairs.iter().zip(scores).zip(labels) {
        groups.entry(u).or_default().push((v, s, l));
        groups.entry(v).or_default().push((u, s, l));
    }
    groups.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, true, true]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.6, 0.4], &[true, false, true]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn ap_examples() {
        let ap = average_precision(&[true, false, true]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        let g1 = vec![(1, 0.9, true), (2, 0.1, false)];
        let g2 = vec![(1, 0.9, false), (2, 0.1, true)];
        assert_eq!(map_metric(std::slice::from_ref(&g1)).unwrap(), 1.0);
        assert_eq!(map_metric(&[g1, g2]).unwrap(), 0.75);
        assert!(map_metric(&[vec![(0, 0.5, false)]]).is_err());
    }

    #[test]
    fn map_ties_break_by_node_id() {
        let g = vec![(5, 0.5, true), (3, 0.5, false)];
        assert_eq!(map_metric(&[g]).unwrap(), 0.5);
    }
}
