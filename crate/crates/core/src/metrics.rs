//! Forest, source-localisation and sequence metrics.
//!
//! Conventions: empty predictions give path precision 0; two empty sets
//! have Jaccard index 1; 0/0 in precision/recall/F1 is 0. Path precision
//! is not symmetric, the Jaccard index is.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{DiffusionObservation, Graph, PropagationForest, SeedVector};

/// Directed `(parent, child)` pairs without duplicates.
pub type EdgeSet = BTreeSet<(usize, usize)>;

pub fn edge_set(forest: &PropagationForest) -> EdgeSet {
    forest.edges().into_iter().collect()
}

/// `|predicted ∩ truth| / |predicted|`.
pub fn path_precision(predicted: &EdgeSet, truth: &EdgeSet) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    predicted.intersection(truth).count() as f64 / predicted.len() as f64
}

/// `|∩| / |∪|`.
pub fn jaccard_index(predicted: &EdgeSet, truth: &EdgeSet) -> f64 {
    let inter = predicted.intersection(truth).count();
    let union = predicted.len() + truth.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn classification_metrics(pred: &SeedVector, truth: &SeedVector) -> Result<Classification> {
    if pred.len() != truth.len() {
        return Err(Error::shape("prediction and truth differ in length"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(Classification { precision, recall, f1 })
}

/// Mann-Whitney statistic `P(pos > neg) + P(pos == neg) / 2`, from
/// average ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; values.len()]
    }
}

/// Mean squared difference of min-max normalised activation steps over
/// nodes present in both vectors. A constant vector normalises to 1/2.
pub fn sequence_error(pred: &[Option<u32>], truth: &[Option<u32>]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape("step vectors differ in length"));
    }
    let (p, t): (Vec<f64>, Vec<f64>) =
        pred.iter().zip(truth).filter_map(|(a, b)| Some((f64::from((*a)?), f64::from((*b)?)))).unzip();
    if p.is_empty() {
        return Err(Error::Undefined("no node is infected in both step vectors".into()));
    }
    let (p, t) = (min_max(&p), min_max(&t));
    Ok(p.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64)
}

/// Expected path precision of choosing every infected non-seed's parent
/// uniformly among its infected in-neighbours, given the predicted seeds.
/// Nodes without an infected in-neighbour predict nothing.
pub fn random_parent_precision(graph: &Graph, y: &DiffusionObservation, seeds: &SeedVector, truth: &EdgeSet) -> f64 {
    let mut hits = 0.0;
    let mut predicted = 0usize;
    for v in 0..graph.n_nodes() {
        if !y.is_infected(v) || seeds.is_seed(v) {
            continue;
        }
        let cands: Vec<usize> = graph.in_neighbors(v).iter().copied().filter(|&j| y.is_infected(j)).collect();
        if cands.is_empty() {
            continue;
        }
        predicted += 1;
        hits += cands.iter().filter(|&&j| truth.contains(&(j, v))).count() as f64 / cands.len() as f64;
    }
    if predicted == 0 {
        0.0
    } else {
        hits / predicted as f64
    }
}

/// One evaluated instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceReport {
    pub path_precision: f64,
    pub jaccard: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when undefined (single-class labels).
    pub auc: Option<f64>,
    pub sequence_error: Option<f64>,
}

/// Evaluates a predicted forest/seed set (and optional seed scores) against
/// the truth.
pub fn evaluate_instance(
    pred_forest: &PropagationForest,
    pred_seeds: &SeedVector,
    scores: Option<&[f64]>,
    true_forest: &PropagationForest,
    true_seeds: &SeedVector,
) -> Result<InstanceReport> {
    let n = true_forest.len();
    if pred_forest.len() != n || pred_seeds.len() != n || true_seeds.len() != n {
        return Err(Error::shape("prediction and truth cover different node counts"));
    }
    if scores.is_some_and(|s| s.len() != n) {
        return Err(Error::shape("score vector has the wrong length"));
    }
    let (pe, te) = (edge_set(pred_forest), edge_set(true_forest));
    let cls = classification_metrics(pred_seeds, true_seeds)?;
    let auc = match scores {
        Some(s) => match roc_auc(s, true_seeds.as_slice()) {
            Ok(a) => Some(a),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let sequence_error = match sequence_error(&pred_forest.step, &true_forest.step) {
        Ok(v) => Some(v),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(InstanceReport {
        path_precision: path_precision(&pe, &te),
        jaccard: jaccard_index(&pe, &te),
        precision: cls.precision,
        recall: cls.recall,
        f1: cls.f1,
        auc,
        sequence_error,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Per-field mean; optional fields average over defined entries.
pub fn aggregate(reports: &[InstanceReport]) -> Option<InstanceReport> {
    let m = |f: fn(&InstanceReport) -> f64| mean(reports.iter().map(f));
    Some(InstanceReport {
        path_precision: m(|r| r.path_precision)?,
        jaccard: m(|r| r.jaccard)?,
        precision: m(|r| r.precision)?,
        recall: m(|r| r.recall)?,
        f1: m(|r| r.f1)?,
        auc: mean(reports.iter().filter_map(|r| r.auc)),
        sequence_error: mean(reports.iter().filter_map(|r| r.sequence_error)),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// Delimited report: one row per instance and a final `mean` row.
pub fn report_csv(names: &[String], reports: &[InstanceReport]) -> String {
    let mut out = String::from("instance,path_precision,jaccard,precision,recall,f1,auc,sequence_error\n");
    let row = |name: &str, r: &InstanceReport| {
        format!(
            "{name},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
            r.path_precision,
            r.jaccard,
            r.precision,
            r.recall,
            r.f1,
            cell(r.auc),
            cell(r.sequence_error)
        )
    };
    for (name, r) in names.iter().zip(reports) {
        out.push_str(&row(name, r));
    }
    if let Some(agg) = aggregate(reports) {
        out.push_str(&row("mean", &agg));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(edges: &[(usize, usize)]) -> EdgeSet {
        edges.iter().copied().collect()
    }

    #[test]
    fn set_metric_examples() {
        let p = set(&[(0, 1), (1, 2)]);
        let t = set(&[(0, 1), (0, 2)]);
        assert_eq!(path_precision(&p, &p), 1.0);
        assert_eq!(path_precision(&p, &t), 0.5);
        assert_eq!(path_precision(&set(&[]), &t), 0.0);
        assert!((jaccard_index(&p, &t) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard_index(&p, &set(&[(5, 6)])), 0.0);
        assert_eq!(jaccard_index(&t, &t), 1.0);
        assert_eq!(jaccard_index(&set(&[]), &set(&[])), 1.0);
    }

    #[test]
    fn classification_examples() {
        let t = SeedVector::from_nodes(4, &[0, 2]);
        let c = classification_metrics(&t, &t).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        let c = classification_metrics(&SeedVector::new(vec![false; 4]), &t).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (0.0, 0.0, 0.0));
        let c = classification_metrics(&SeedVector::from_nodes(4, &[0, 1]), &t).unwrap();
        assert_eq!((c.precision, c.recall, c.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1], &[true, false, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3, 0.3, 0.3], &[true, false, true]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.2, 0.9], &[true, false]).unwrap(), 0.0);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::Undefined(_))));
    }

    #[test]
    fn sequence_examples() {
        let a = [Some(0), Some(3), None, Some(7)];
        assert_eq!(sequence_error(&a, &a).unwrap(), 0.0);
        let e = sequence_error(&[Some(4), Some(4), Some(4)], &[Some(0), Some(1), Some(2)]).unwrap();
        assert!((e - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(sequence_error(&[Some(2), None], &[Some(9), Some(1)]).unwrap(), 0.0);
        assert!(matches!(sequence_error(&[None], &[Some(1)]), Err(Error::Undefined(_))));
    }

    #[test]
    fn report_has_aggregate_row() {
        let r = InstanceReport {
            path_precision: 1.0,
            jaccard: 0.5,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            auc: None,
            sequence_error: Some(0.0),
        };
        let text = report_csv(&["a".into(), "b".into()], &[r, r]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("mean,1.000000,0.500000"));
        assert!(lines[3].contains(",NA,"));
    }
}
