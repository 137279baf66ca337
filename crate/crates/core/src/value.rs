//! Sample valuation by prediction entropy.
//!
//! `E(p) = -sum_j p_j log2 p_j`, in bits. Under the default polarity a sample
//! whose entropy is strictly below the threshold is transmitted and the rest
//! are dropped, so confidently classified samples reach the cloud.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mailbox::{Annotation, MailboxError, Tick};

/// Probabilities below this are treated as exactly zero.
pub const PROB_FLOOR: f64 = 1e-15;
/// Allowed deviation of `sum(p)` from one.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("probability vector must have at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("probability {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    BadSum(f64),
    #[error("threshold must be finite and non-negative, got {0}")]
    BadThreshold(f64),
}

/// Classifier output over `c` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, ValueError> {
        if probs.len() < 2 {
            return Err(ValueError::TooFewClasses(probs.len()));
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ValueError::OutOfRange { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ValueError::BadSum(sum));
        }
        Ok(Self(probs))
    }

    pub fn uniform(classes: usize) -> Result<Self, ValueError> {
        Self::new(vec![1.0 / classes as f64; classes])
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    fn is_uniform(&self) -> bool {
        self.0.iter().all(|&p| p == self.0[0])
    }
}

/// Shannon entropy of `p` in bits, in `[0, log2 c]`.
pub fn prediction_entropy(p: &ProbabilityVector) -> f64 {
    let max = (p.classes() as f64).log2();
    if p.is_uniform() {
        return max;
    }
    let e: f64 = p
        .as_slice()
        .iter()
        .filter(|&&q| q >= PROB_FLOOR)
        .map(|&q| -q * q.log2())
        .sum();
    e.clamp(0.0, max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Forward confident samples (entropy below threshold).
    #[default]
    TransmitLowEntropy,
    /// Forward uncertain samples (entropy above threshold).
    TransmitHighEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssessPolicy {
    /// Entropy threshold in bits.
    pub threshold: f64,
    #[serde(default)]
    pub polarity: Polarity,
}

impl AssessPolicy {
    pub fn new(threshold: f64, polarity: Polarity) -> Result<Self, ValueError> {
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(ValueError::BadThreshold(threshold));
        }
        Ok(Self { threshold, polarity })
    }

    pub fn low_entropy(threshold: f64) -> Result<Self, ValueError> {
        Self::new(threshold, Polarity::TransmitLowEntropy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Transmit,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assessment {
    pub decision: Decision,
    pub entropy: f64,
}

/// Applies the threshold rule. Comparisons are strict: `E == threshold`
/// is always discarded.
pub fn assess(p: &ProbabilityVector, policy: &AssessPolicy) -> Assessment {
    let entropy = prediction_entropy(p);
    let transmit = match policy.polarity {
        Polarity::TransmitLowEntropy => entropy < policy.threshold,
        Polarity::TransmitHighEntropy => entropy > policy.threshold,
    };
    Assessment {
        decision: if transmit {
            Decision::Transmit
        } else {
            Decision::Discard
        },
        entropy,
    }
}

/// Certainty gained over a uniform guess: `log2 c - E(p)`, never negative.
pub fn certainty_gain(p: &ProbabilityVector) -> f64 {
    (p.classes() as f64).log2() - prediction_entropy(p)
}

/// The comment an assessing node attaches: value delta is the certainty
/// gain, size delta is the annotation's own wire size.
pub fn assessment_annotation(node_id: u32, t: Tick, p: &ProbabilityVector) -> Result<Annotation, MailboxError> {
    Annotation::new(node_id, t, certainty_gain(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mailbox::ANNOTATION_WIRE_BITS;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(prediction_entropy(&pv(&[0.25; 4])), 2.0);
        assert_eq!(prediction_entropy(&pv(&[1.0, 0.0, 0.0, 0.0])), 0.0);
        // 40-digit evaluation: 1.156779649447039472660940907427108609816
        let e = prediction_entropy(&pv(&[0.7, 0.2, 0.1]));
        assert!((e - 1.156_779_649_447_039_5).abs() < 1e-14, "{e}");
        assert_eq!(prediction_entropy(&ProbabilityVector::uniform(3).unwrap()), 3f64.log2());
    }

    #[test]
    fn tiny_probabilities_are_clamped() {
        assert_eq!(prediction_entropy(&pv(&[1.0, 1e-16])), 0.0);
        assert_eq!(prediction_entropy(&pv(&[1e-300, 1.0, 0.0])), 0.0);
    }

    #[test]
    fn invalid_vectors_rejected() {
        assert_eq!(ProbabilityVector::new(vec![1.0]), Err(ValueError::TooFewClasses(1)));
        assert!(matches!(
            ProbabilityVector::new(vec![1.5, -0.5]),
            Err(ValueError::OutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            ProbabilityVector::new(vec![0.5, 0.4]),
            Err(ValueError::BadSum(_))
        ));
        assert!(matches!(
            ProbabilityVector::new(vec![f64::NAN, 1.0]),
            Err(ValueError::OutOfRange { .. })
        ));
    }

    #[test]
    fn assess_boundaries() {
        let policy = AssessPolicy::low_entropy(1.0).unwrap();
        assert_eq!(assess(&pv(&[1.0, 0.0, 0.0, 0.0]), &policy).decision, Decision::Transmit);

        let half = pv(&[0.5, 0.5]);
        assert_eq!(
            assess(&half, &AssessPolicy::low_entropy(1.0).unwrap()).decision,
            Decision::Discard
        );
        assert_eq!(
            assess(&half, &AssessPolicy::new(1.0, Polarity::TransmitHighEntropy).unwrap()).decision,
            Decision::Discard
        );

        let above = AssessPolicy::low_entropy(4f64.log2() + 1.0).unwrap();
        assert_eq!(assess(&pv(&[0.25; 4]), &above).decision, Decision::Transmit);

        let high = AssessPolicy::new(0.5, Polarity::TransmitHighEntropy).unwrap();
        assert_eq!(assess(&pv(&[0.25; 4]), &high).decision, Decision::Transmit);
        assert_eq!(assess(&pv(&[1.0, 0.0, 0.0, 0.0]), &high).decision, Decision::Discard);
    }

    #[test]
    fn policy_validation() {
        assert!(AssessPolicy::low_entropy(-0.1).is_err());
        assert!(AssessPolicy::low_entropy(f64::INFINITY).is_err());
        assert!(AssessPolicy::low_entropy(0.0).is_ok());
    }

    #[test]
    fn annotation_examples() {
        let a = assessment_annotation(3, 9, &pv(&[0.25; 4])).unwrap();
        assert_eq!(a.value_delta, 0.0);
        assert_eq!(a.size_delta, ANNOTATION_WIRE_BITS);
        assert!(a.permitted);
        assert_eq!((a.node_id, a.time), (3, 9));

        assert_eq!(
            assessment_annotation(0, 0, &pv(&[0.0, 1.0, 0.0, 0.0]))
                .unwrap()
                .value_delta,
            2.0
        );

        // log2(3) - E at 40 digits: 0.4281828512741167087927980365207078989437
        let d = assessment_annotation(0, 0, &pv(&[0.7, 0.2, 0.1])).unwrap().value_delta;
        assert!((d - 0.428_182_851_274_116_7).abs() < 1e-14, "{d}");
    }

    #[test]
    fn argmax_ties_take_lowest_index() {
        assert_eq!(pv(&[0.4, 0.4, 0.2]).argmax(), 0);
        assert_eq!(pv(&[0.1, 0.2, 0.7]).argmax(), 2);
    }
}
