//! Per-image accuracy `TP / (TP + FP + FN)` under IoU matching, and the
//! average domain accuracy (unweighted mean over domains of the mean image
//! accuracy within each domain).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// IoU a prediction must strictly exceed to match a ground-truth box.
pub const MATCH_IOU: f64 = 0.5;

/// Confidence thresholds reported by default.
pub const DEFAULT_CONFIDENCES: [f64; 3] = [0.25, 0.30, 0.35];

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub domain: String,
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(prediction index, ground-truth index, iou)` for every match.
    pub pairs: Vec<(usize, usize, f64)>,
}

/// Greedy one-to-one matching.
///
/// Predictions scoring below `conf_thr` are dropped. The rest are visited in
/// descending score order (ties by coordinates); each takes the unmatched
/// ground truth with the highest IoU, provided that IoU is strictly above
/// `iou_thr`. Matches are never revisited.
pub fn match_detections(preds: &[BBox], gts: &[BBox], iou_thr: f64, conf_thr: f64) -> MatchResult {
    let mut order: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].score() >= conf_thr).collect();
    order.sort_by(|&a, &b| preds[a].rank_cmp(&preds[b]).then(a.cmp(&b)));

    let mut taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for &pi in &order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let v = iou(&preds[pi], gt);
            if v > iou_thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, v)) = best {
            taken[gi] = true;
            pairs.push((pi, gi, v));
        }
    }
    let tp = pairs.len();
    MatchResult {
        true_positives: tp,
        false_positives: order.len() - tp,
        false_negatives: gts.len() - tp,
        pairs,
    }
}

/// `TP / (TP + FP + FN)`, with an empty image and no predictions scoring 1.
pub fn image_accuracy(m: &MatchResult) -> f64 {
    let denom = m.true_positives + m.false_positives + m.false_negatives;
    if denom == 0 {
        1.0
    } else {
        m.true_positives as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainAccuracy {
    pub images: usize,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub per_domain: BTreeMap<String, DomainAccuracy>,
    pub ada: f64,
}

/// Average domain accuracy from per-image accuracies grouped by domain.
/// Repeated domain names are merged.
pub fn ada<S: AsRef<str>>(reports: &[(S, Vec<f64>)]) -> Result<DomainReport> {
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (domain, accs) in reports {
        grouped.entry(domain.as_ref().to_owned()).or_default().extend(accs);
    }
    if grouped.is_empty() {
        return Err(Error::NoDomains);
    }
    let mut per_domain = BTreeMap::new();
    for (domain, accs) in grouped {
        if accs.is_empty() {
            return Err(Error::EmptyDomain(domain));
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        per_domain.insert(
            domain,
            DomainAccuracy {
                images: accs.len(),
                mean_accuracy: mean,
            },
        );
    }
    let ada = per_domain.values().map(|d| d.mean_accuracy).sum::<f64>() / per_domain.len() as f64;
    Ok(DomainReport { per_domain, ada })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Maximum-cardinality matching by exhaustive assignment.
    use crate::geometry::{iou, BBox};

    pub fn max_matching(preds: &[BBox], gts: &[BBox], iou_thr: f64, conf_thr: f64) -> usize {
        let kept: Vec<&BBox> = preds.iter().filter(|p| p.score() >= conf_thr).collect();
        fn go(i: usize, kept: &[&BBox], gts: &[BBox], used: &mut Vec<bool>, thr: f64) -> usize {
            if i == kept.len() {
                return 0;
            }
            let mut best = go(i + 1, kept, gts, used, thr);
            for g in 0..gts.len() {
                if !used[g] && iou(kept[i], &gts[g]) > thr {
                    used[g] = true;
                    best = best.max(1 + go(i + 1, kept, gts, used, thr));
                    used[g] = false;
                }
            }
            best
        }
        go(0, &kept, gts, &mut vec![false; gts.len()], iou_thr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64, s: f64) -> BBox {
        BBox::new(x0, y0, x1, y1, s, 0).unwrap()
    }

    fn counts(m: &MatchResult) -> (usize, usize, usize) {
        (m.true_positives, m.false_positives, m.false_negatives)
    }

    #[test]
    fn exact_match() {
        let b = bx(0., 0., 10., 10., 1.0);
        let m = match_detections(&[b], &[b], MATCH_IOU, 0.0);
        assert_eq!(counts(&m), (1, 0, 0));
        assert_eq!(image_accuracy(&m), 1.0);
    }

    #[test]
    fn no_predictions() {
        let gts = [bx(0., 0., 1., 1., 1.), bx(5., 5., 6., 6., 1.), bx(9., 9., 10., 10., 1.)];
        let m = match_detections(&[], &gts, MATCH_IOU, 0.0);
        assert_eq!(counts(&m), (0, 0, 3));
        assert_eq!(image_accuracy(&m), 0.0);
    }

    #[test]
    fn duplicate_prediction_is_false_positive() {
        let preds = [bx(0., 0., 10., 10., 0.9), bx(0., 0., 10., 10., 0.8)];
        let gts = [bx(0., 0., 10., 10., 1.)];
        let m = match_detections(&preds, &gts, MATCH_IOU, 0.0);
        assert_eq!(counts(&m), (1, 1, 0));
        assert_eq!(m.pairs, vec![(0, 0, 1.0)]);
        assert_eq!(image_accuracy(&m), 0.5);
        assert_eq!(oracle::max_matching(&preds, &gts, MATCH_IOU, 0.0), 1);
    }

    #[test]
    fn iou_exactly_half_does_not_match() {
        // intersection 50, union 100: IoU exactly 0.5
        let gt = bx(0., 0., 10., 10., 1.);
        let pred = bx(0., 0., 10., 5., 0.9);
        assert_eq!(iou(&gt, &pred), 0.5);
        assert_eq!(match_detections(&[pred], &[gt], MATCH_IOU, 0.0).true_positives, 0);
    }

    #[test]
    fn confidence_filter_removes_predictions() {
        let b = bx(0., 0., 10., 10., 0.2);
        let m = match_detections(&[b], &[b.with_score(1.0).unwrap()], MATCH_IOU, 0.25);
        assert_eq!(counts(&m), (0, 0, 1));
    }

    #[test]
    fn accuracy_examples() {
        let mk = |tp, fp, fn_| MatchResult {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            pairs: vec![],
        };
        assert_eq!(image_accuracy(&mk(1, 1, 0)), 0.5);
        assert_eq!(image_accuracy(&mk(0, 0, 0)), 1.0);
        assert_eq!(image_accuracy(&mk(3, 1, 2)), 0.5);
    }

    #[test]
    fn ada_examples() {
        assert_eq!(ada(&[("a", vec![1.0])]).unwrap().ada, 1.0);
        let r = ada(&[("A", vec![1.0, 0.0]), ("B", vec![0.5])]).unwrap();
        assert_eq!(r.per_domain["A"].mean_accuracy, 0.5);
        assert_eq!(r.per_domain["B"].mean_accuracy, 0.5);
        assert_eq!(r.ada, 0.5);
        let r = ada(&[("A", vec![1.0; 100]), ("B", vec![0.0])]).unwrap();
        assert_eq!(r.ada, 0.5);
        assert_eq!(r.per_domain["A"].images, 100);
    }

    #[test]
    fn ada_errors() {
        assert!(matches!(ada::<&str>(&[]), Err(Error::NoDomains)));
        assert!(matches!(ada(&[("x", vec![])]), Err(Error::EmptyDomain(_))));
    }

    fn arb_boxes(max: usize) -> impl Strategy<Value = Vec<BBox>> {
        proptest::collection::vec(
            (0.0..40.0f64, 0.0..40.0f64, 4.0..16.0f64, 4.0..16.0f64, 0.0..=1.0f64)
                .prop_map(|(x, y, w, h, s)| BBox::new(x, y, x + w, y + h, s, 0).unwrap()),
            0..=max,
        )
    }

    proptest! {
        #[test]
        fn conservation(preds in arb_boxes(6), gts in arb_boxes(6), conf in 0.0..1.0f64) {
            let m = match_detections(&preds, &gts, MATCH_IOU, conf);
            let kept = preds.iter().filter(|p| p.score() >= conf).count();
            prop_assert_eq!(m.true_positives + m.false_negatives, gts.len());
            prop_assert_eq!(m.true_positives + m.false_positives, kept);
            let mut seen_p = std::collections::HashSet::new();
            let mut seen_g = std::collections::HashSet::new();
            for &(p, g, v) in &m.pairs {
                prop_assert!(seen_p.insert(p) && seen_g.insert(g));
                prop_assert!(v > MATCH_IOU);
            }
        }

        #[test]
        fn raising_confidence_is_monotone(preds in arb_boxes(6), gts in arb_boxes(6), a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let (lo, hi) = (a.min(b), a.max(b));
            let m_lo = match_detections(&preds, &gts, MATCH_IOU, lo);
            let m_hi = match_detections(&preds, &gts, MATCH_IOU, hi);
            prop_assert!(m_hi.false_positives <= m_lo.false_positives);
            prop_assert!(m_hi.false_negatives >= m_lo.false_negatives);
        }

        #[test]
        fn greedy_never_beats_optimal(preds in arb_boxes(6), gts in arb_boxes(6)) {
            let m = match_detections(&preds, &gts, MATCH_IOU, 0.0);
            prop_assert!(m.true_positives <= oracle::max_matching(&preds, &gts, MATCH_IOU, 0.0));
        }

        #[test]
        fn ada_bounded_and_order_free(mut doms in proptest::collection::vec(proptest::collection::vec(0.0..=1.0f64, 1..5), 1..5)) {
            let named: Vec<(String, Vec<f64>)> = doms.iter().enumerate().map(|(i, a)| (format!("d{i}"), a.clone())).collect();
            let r = ada(&named).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.ada));
            doms.reverse();
            let n = doms.len();
            let rev: Vec<(String, Vec<f64>)> = doms.into_iter().enumerate().map(|(i, a)| (format!("d{}", n - 1 - i), a)).collect();
            prop_assert_eq!(ada(&rev).unwrap().ada, r.ada);
        }
    }
}
