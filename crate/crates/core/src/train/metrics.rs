use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::Label;

/// Counts with fake (label 1) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut m = Self::default();
        for (truth, pred) in pairs {
            match (truth, pred) {
                (Label::Fake, Label::Fake) => m.tp += 1,
                (Label::Real, Label::Fake) => m.fp += 1,
                (Label::Fake, Label::Real) => m.fn_ += 1,
                (Label::Real, Label::Real) => m.tn += 1,
            }
        }
        m
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total(), "accuracy")
    }

    /// Metrics for the fake class.
    pub fn fake(&self) -> ClassMetrics {
        ClassMetrics::new(self.tp, self.fp, self.fn_, "fake")
    }

    /// Metrics for the real class (real treated as positive).
    pub fn real(&self) -> ClassMetrics {
        ClassMetrics::new(self.tn, self.fn_, self.fp, "real")
    }

    pub fn macro_f1(&self) -> f64 {
        0.5 * (self.fake().f1 + self.real().f1)
    }
}

fn ratio(num: usize, den: usize, what: &str) -> f64 {
    if den == 0 {
        log::warn!("{what} undefined (empty denominator); reporting 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ClassMetrics {
    fn new(tp: usize, fp: usize, fn_: usize, class: &str) -> Self {
        let precision = ratio(tp, tp + fp, &format!("{class} precision"));
        let recall = ratio(tp, tp + fn_, &format!("{class} recall"));
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub label: Label,
    pub predicted: Label,
    pub prob_fake: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub fake: ClassMetrics,
    pub real: ClassMetrics,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<PredictionRecord>,
}

impl EvalReport {
    pub fn from_predictions(predictions: Vec<PredictionRecord>) -> Result<Self> {
        if predictions.is_empty() {
            return Err(Error::Empty("no predictions to evaluate".into()));
        }
        let confusion = ConfusionMatrix::from_pairs(predictions.iter().map(|p| (p.label, p.predicted)));
        Ok(Self {
            n: predictions.len(),
            accuracy: confusion.accuracy(),
            macro_f1: confusion.macro_f1(),
            fake: confusion.fake(),
            real: confusion.real(),
            confusion,
            predictions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(pairs: &[(Label, Label)]) -> Vec<PredictionRecord> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(label, predicted))| PredictionRecord {
                id: format!("s{i}"),
                label,
                predicted,
                prob_fake: 0.5,
            })
            .collect()
    }

    #[test]
    fn hand_computed_confusion() {
        use Label::*;
        let mut pairs = vec![(Fake, Fake); 3];
        pairs.push((Real, Fake));
        pairs.push((Fake, Real));
        pairs.extend(vec![(Real, Real); 5]);
        let r = EvalReport::from_predictions(records(&pairs)).unwrap();
        assert_eq!(
            r.confusion,
            ConfusionMatrix {
                tp: 3,
                fp: 1,
                fn_: 1,
                tn: 5
            }
        );
        assert_eq!(r.fake.precision, 0.75);
        assert_eq!(r.fake.recall, 0.75);
        assert_eq!(r.fake.f1, 0.75);
        assert_eq!(r.accuracy, 0.8);
        assert!((r.real.precision - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_degenerate() {
        use Label::*;
        let r = EvalReport::from_predictions(records(&[(Fake, Fake), (Real, Real)])).unwrap();
        assert_eq!((r.accuracy, r.macro_f1), (1.0, 1.0));
        let r = EvalReport::from_predictions(records(&[(Fake, Real), (Real, Real)])).unwrap();
        assert_eq!(r.fake.precision, 0.0);
        assert_eq!(r.fake.f1, 0.0);
        assert!(EvalReport::from_predictions(Vec::new()).is_err());
        let json = serde_json::to_string(&r.confusion).unwrap();
        assert_eq!(json, r#"{"tp":0,"fp":0,"fn":1,"tn":1}"#);
    }
}
