//! ROC curves over validation scores and Youden-J threshold selection.
//!
//! Candidate thresholds are the midpoints between consecutive distinct
//! scores plus one sentinel below the minimum and one above the maximum. A
//! score is predicted positive when it is strictly greater than the threshold,
//! so these candidates realise every point of the empirical ROC curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Points are ordered by increasing threshold, so `tpr` and `fpr` are
/// non-increasing along the list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub threshold: f64,
    /// TPR - FPR at `threshold`.
    pub j_statistic: f64,
    pub curve: RocCurve,
    /// Candidates sharing the maximal J; the largest of them was chosen.
    pub tied_candidates: usize,
}

/// On-disk form of a [`CalibrationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSummary {
    pub threshold: f64,
    pub j_statistic: f64,
    pub n_candidates: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl CalibrationResult {
    pub fn summary(&self) -> CalibrationSummary {
        CalibrationSummary {
            threshold: self.threshold,
            j_statistic: self.j_statistic,
            n_candidates: self.curve.points.len(),
            positives: self.curve.positives,
            negatives: self.curve.negatives,
        }
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    // Adjacent floats: rounding up to `hi` would misclassify `hi`.
    if m < hi {
        m
    } else {
        lo
    }
}

/// Empirical ROC curve of `scores` against `labels`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Calibration(format!("non-finite score {bad}")));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Calibration("non-separable: one class absent".into()));
    }

    let mut order: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Distinct scores with per-score class counts, ascending.
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for (s, l) in order {
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if l {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((s, usize::from(l), usize::from(!l))),
        }
    }

    let lowest = groups[0].0;
    let highest = groups[groups.len() - 1].0;
    let mut points = Vec::with_capacity(groups.len() + 1);
    let (mut tp, mut fp) = (positives, negatives);
    let point = |threshold: f64, tp: usize, fp: usize| RocPoint {
        threshold,
        tpr: tp as f64 / positives as f64,
        fpr: fp as f64 / negatives as f64,
        true_positives: tp,
        false_positives: fp,
    };
    points.push(point(lowest - lowest.abs().max(1.0), tp, fp));
    for w in groups.windows(2) {
        tp -= w[0].1;
        fp -= w[0].2;
        points.push(point(midpoint(w[0].0, w[1].0), tp, fp));
    }
    points.push(point(highest + highest.abs().max(1.0), 0, 0));
    Ok(RocCurve {
        points,
        positives,
        negatives,
    })
}

/// Candidate maximising TPR - FPR; ties go to the largest threshold.
pub fn youden_threshold(curve: &RocCurve) -> Result<CalibrationResult> {
    if curve.points.is_empty() || curve.positives == 0 || curve.negatives == 0 {
        return Err(Error::Calibration("empty or single-class ROC curve".into()));
    }
    // Compare J exactly: J * P * N = TP * N - FP * P.
    let (p, n) = (curve.positives as i128, curve.negatives as i128);
    let scaled = |pt: &RocPoint| pt.true_positives as i128 * n - pt.false_positives as i128 * p;
    let best = curve.points.iter().map(scaled).max().expect("non-empty");
    let tied = curve.points.iter().filter(|pt| scaled(pt) == best).count();
    let chosen = curve
        .points
        .iter()
        .rev()
        .find(|pt| scaled(pt) == best)
        .expect("maximum exists");
    Ok(CalibrationResult {
        threshold: chosen.threshold,
        j_statistic: chosen.tpr - chosen.fpr,
        curve: curve.clone(),
        tied_candidates: tied,
    })
}

/// Builds the curve and picks the Youden threshold in one step.
pub fn calibrate(scores: &[f64], labels: &[bool]) -> Result<CalibrationResult> {
    youden_threshold(&roc_curve(scores, labels)?)
}

/// The MLP head's fixed 0.5 threshold; the curve is empty.
pub fn fixed_threshold() -> CalibrationResult {
    CalibrationResult {
        threshold: 0.5,
        j_statistic: 0.0,
        curve: RocCurve {
            points: Vec::new(),
            positives: 0,
            negatives: 0,
        },
        tied_candidates: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heads::decide;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn four_point_example() {
        let curve = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        let thresholds: Vec<f64> = curve.points.iter().map(|p| p.threshold).collect();
        assert_eq!(thresholds.len(), 5);
        assert!(thresholds[0] < 0.1 && thresholds[4] > 0.9);
        assert!((thresholds[1] - 0.2).abs() < 1e-12);
        assert!((thresholds[2] - 0.55).abs() < 1e-12);
        assert!((thresholds[3] - 0.85).abs() < 1e-12);
        let mid = curve.points[2];
        assert_eq!((mid.tpr, mid.fpr), (1.0, 0.0));
        assert_eq!((curve.points[0].tpr, curve.points[0].fpr), (1.0, 1.0));
        assert_eq!((curve.points[4].tpr, curve.points[4].fpr), (0.0, 0.0));

        let r = youden_threshold(&curve).unwrap();
        assert!((r.threshold - 0.55).abs() < 1e-12);
        assert_eq!(r.j_statistic, 1.0);
        assert_eq!(r.tied_candidates, 1);
    }

    #[test]
    fn identical_scores_give_two_candidates() {
        let curve = roc_curve(&[0.4; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(curve.points.len(), 2);
        let r = youden_threshold(&curve).unwrap();
        assert_eq!(r.j_statistic, 0.0);
        assert!(r.threshold > 0.4);
    }

    #[test]
    fn anti_separated_scores_pick_upper_sentinel() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [true, true, false, false];
        let r = calibrate(&scores, &labels).unwrap();
        assert_eq!(r.j_statistic, 0.0);
        assert!(r.threshold > 0.9);
        assert!(scores.iter().all(|&s| !decide(s, r.threshold)));
    }

    #[test]
    fn single_class_is_rejected() {
        let err = roc_curve(&[0.1, 0.2], &[true, true]).unwrap_err();
        assert!(err.to_string().contains("non-separable: one class absent"));
        assert!(roc_curve(&[0.1], &[true, false]).is_err());
        assert!(roc_curve(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn fixed_threshold_is_strict_half() {
        let r = fixed_threshold();
        assert_eq!(r.threshold, 0.5);
        assert!(r.curve.points.is_empty());
        assert!(!decide(0.5, r.threshold));
        assert!(decide(0.500001, r.threshold));
    }

    #[test]
    fn adjacent_float_scores_are_separated() {
        let lo = 0.3_f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let r = calibrate(&[lo, hi], &[false, true]).unwrap();
        assert_eq!(r.j_statistic, 1.0);
        assert!(decide(hi, r.threshold) && !decide(lo, r.threshold));
    }

    #[test]
    fn rates_match_brute_force_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = 200;
            // Coarse grid forces ties.
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..50) as f64) / 49.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            labels[0] = true;
            labels[1] = false;
            let curve = roc_curve(&scores, &labels).unwrap();
            let pos = labels.iter().filter(|&&l| l).count() as f64;
            let neg = n as f64 - pos;
            for pt in &curve.points {
                let mut tp = 0.0;
                let mut fp = 0.0;
                for i in 0..n {
                    if scores[i] > pt.threshold {
                        if labels[i] {
                            tp += 1.0
                        } else {
                            fp += 1.0
                        }
                    }
                }
                assert_eq!(pt.tpr, tp / pos);
                assert_eq!(pt.fpr, fp / neg);
            }
        }
    }

    fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(0u8..20, n).prop_map(|v| v.into_iter().map(|x| x as f64 / 19.0).collect()),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn curve_invariants((scores, mut labels) in scored_labels()) {
            labels[0] = true;
            labels[1] = false;
            let curve = roc_curve(&scores, &labels).unwrap();
            for w in curve.points.windows(2) {
                prop_assert!(w[0].threshold < w[1].threshold);
                prop_assert!(w[0].tpr >= w[1].tpr && w[0].fpr >= w[1].fpr);
            }
            let r1 = youden_threshold(&curve).unwrap();
            let r2 = calibrate(&scores, &labels).unwrap();
            prop_assert_eq!(&r1, &r2);
            let max_j = curve.points.iter().map(|p| p.tpr - p.fpr).fold(f64::MIN, f64::max);
            prop_assert!((r1.j_statistic - max_j).abs() < 1e-12);
        }

        #[test]
        fn no_threshold_escapes_candidate_set(
            (scores, mut labels) in scored_labels(), t in -0.5f64..1.5,
        ) {
            labels[0] = true;
            labels[1] = false;
            let curve = roc_curve(&scores, &labels).unwrap();
            let tp = scores.iter().zip(&labels).filter(|(s, l)| **l && **s > t).count();
            let fp = scores.iter().zip(&labels).filter(|(s, l)| !**l && **s > t).count();
            prop_assert!(curve.points.iter().any(|p| p.true_positives == tp && p.false_positives == fp));
        }
    }
}
