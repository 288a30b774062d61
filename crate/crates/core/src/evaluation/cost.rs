//! Cost-ratio operating points and their diagnostic ratios.

use super::roc::RocCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// TPR/FPR; infinite when FPR = 0 and TPR > 0, zero when TPR = 0.
    pub lr_positive: f64,
    /// (1-TPR)/(1-FPR); infinite when FPR = 1 and TPR < 1, zero when TPR = 1.
    pub lr_negative: f64,
    /// Post-test probability of injury after a positive flag; NaN when
    /// nothing is flagged.
    pub p_injury_given_positive: f64,
    /// NaN when everything is flagged.
    pub p_injury_given_negative: f64,
    pub expected_cost: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

fn post_test(hit: f64, miss: f64) -> f64 {
    if hit + miss == 0.0 {
        f64::NAN
    } else {
        hit / (hit + miss)
    }
}

/// Expected cost per session when a missed injury costs `cost_ratio` times a
/// needlessly modified session.
pub fn expected_cost(tpr: f64, fpr: f64, cost_ratio: f64, prevalence: f64) -> f64 {
    cost_ratio * prevalence * (1.0 - tpr) + (1.0 - prevalence) * fpr
}

/// Derived quantities for a (TPR, FPR) pair at the given prevalence.
pub fn operating_point(
    threshold: f64,
    tpr: f64,
    fpr: f64,
    cost_ratio: f64,
    prevalence: f64,
) -> OperatingPoint {
    let p = prevalence;
    OperatingPoint {
        threshold,
        tpr,
        fpr,
        lr_positive: ratio(tpr, fpr),
        lr_negative: ratio(1.0 - tpr, 1.0 - fpr),
        p_injury_given_positive: post_test(tpr * p, fpr * (1.0 - p)),
        p_injury_given_negative: post_test((1.0 - tpr) * p, (1.0 - fpr) * (1.0 - p)),
        expected_cost: expected_cost(tpr, fpr, cost_ratio, prevalence),
    }
}

fn validate(cost_ratio: f64, prevalence: f64) -> Result<()> {
    if !(cost_ratio > 0.0) {
        return Err(Error::InvalidInput(format!("cost ratio {cost_ratio} must be positive")));
    }
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(Error::InvalidInput(format!("prevalence {prevalence} outside (0, 1)")));
    }
    Ok(())
}

/// The curve point with the lowest expected cost; ties go to the lower FPR.
pub fn optimal_operating_point(
    curve: &RocCurve,
    cost_ratio: f64,
    prevalence: f64,
) -> Result<OperatingPoint> {
    validate(cost_ratio, prevalence)?;
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for k in 0..curve.len() {
        let c = expected_cost(curve.tpr[k], curve.fpr[k], cost_ratio, prevalence);
        if c < best_cost || (c == best_cost && curve.fpr[k] < curve.fpr[best]) {
            best = k;
            best_cost = c;
        }
    }
    Ok(operating_point(
        curve.thresholds[best],
        curve.tpr[best],
        curve.fpr[best],
        cost_ratio,
        prevalence,
    ))
}

/// Apply a fixed threshold (`score >= threshold` flags a row) to scored rows.
pub fn point_at_threshold(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
    cost_ratio: f64,
    prevalence: f64,
) -> Result<OperatingPoint> {
    validate(cost_ratio, prevalence)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData("operating point needs both classes".into()));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        if s >= threshold {
            if l == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    Ok(operating_point(
        threshold,
        tp as f64 / pos as f64,
        fp as f64 / neg as f64,
        cost_ratio,
        prevalence,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::roc_curve;

    #[test]
    fn moderate_risk_row() {
        let p = 13.0 / 4664.0;
        let op = operating_point(0.0, 0.54, 0.11, 100.0, p);
        assert!((op.lr_positive - 4.909).abs() < 1e-3);
        assert!((op.lr_negative - 0.5169).abs() < 1e-3);
        assert!((op.p_injury_given_positive - 0.0135).abs() < 1e-3);
        assert!((op.p_injury_given_negative - 0.00144).abs() < 1e-4);
    }

    #[test]
    fn degenerate_ratios() {
        let op = operating_point(0.0, 0.5, 0.0, 1.0, 0.1);
        assert_eq!(op.lr_positive, f64::INFINITY);
        let none = operating_point(0.0, 0.0, 0.0, 1.0, 0.1);
        assert_eq!(none.lr_positive, 0.0);
        assert!(none.p_injury_given_positive.is_nan());
        let all = operating_point(0.0, 1.0, 1.0, 1.0, 0.1);
        assert_eq!(all.lr_negative, 0.0);
        assert!(all.p_injury_given_negative.is_nan());
    }

    #[test]
    fn optimal_point_is_minimal_and_extreme_cost_goes_to_full_sensitivity() {
        let scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05];
        let labels = [1, 0, 1, 0, 0, 1, 0, 0, 0, 0];
        let curve = roc_curve(&scores, &labels).unwrap();
        for ratio in [0.5, 5.0, 50.0] {
            let op = optimal_operating_point(&curve, ratio, 0.3).unwrap();
            for k in 0..curve.len() {
                assert!(
                    op.expected_cost <= expected_cost(curve.tpr[k], curve.fpr[k], ratio, 0.3) + 1e-15
                );
            }
        }
        let op = optimal_operating_point(&curve, 1e9, 0.3).unwrap();
        assert_eq!(op.tpr, 1.0);
        let op = optimal_operating_point(&curve, 1e-9, 0.3).unwrap();
        assert_eq!(op.fpr, 0.0);
        assert!(op.tpr < 1.0);
        assert!(optimal_operating_point(&curve, 0.0, 0.3).is_err());
        assert!(optimal_operating_point(&curve, 1.0, 1.0).is_err());
    }

    #[test]
    fn fixed_threshold_matches_curve_point() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = [1, 0, 1, 0];
        let curve = roc_curve(&scores, &labels).unwrap();
        let op = point_at_threshold(&scores, &labels, 0.7, 2.0, 0.5).unwrap();
        assert_eq!((op.tpr, op.fpr), (curve.tpr[3], curve.fpr[3]));
    }
}
