use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::models::{LinearClassifier, MlpEmbedding};
use crate::{Error, Result};

/// Accuracy and confusion matrix (rows: true class, columns: predicted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

/// Argmax index of each row; ties go to the smallest index.
pub(crate) fn argmax_rows(m: ArrayView2<f64>) -> Vec<usize> {
    m.outer_iter()
        .map(|r| {
            let mut best = 0;
            for (k, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub(crate) fn score(predicted: &[usize], labels: &[usize], classes: usize) -> Result<Evaluation> {
    if predicted.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0;
    for (&p, &y) in predicted.iter().zip(labels) {
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        confusion[y][p] += 1;
        correct += usize::from(p == y);
    }
    let accuracy = if labels.is_empty() {
        0.0
    } else {
        correct as f64 / labels.len() as f64
    };
    Ok(Evaluation { accuracy, confusion })
}

/// Classifier accuracy on a labeled set.
pub fn evaluate(
    model: &MlpEmbedding,
    clf: &LinearClassifier,
    features: ArrayView2<f64>,
    labels: &[usize],
) -> Result<Evaluation> {
    let (z, _) = model.forward(features)?;
    let logits: Array2<f64> = clf.logits(z.view())?;
    score(&argmax_rows(logits.view()), labels, clf.classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictors() {
        let e = score(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(e.accuracy, 1.0);
        let e = score(&[1, 1, 1, 1], &[0, 1, 0, 1], 2).unwrap();
        assert_eq!(e.accuracy, 0.5);
        assert_eq!(e.confusion, vec![vec![0, 2], vec![0, 2]]);
    }

    #[test]
    fn argmax_ties_take_first() {
        let m = ndarray::array![[0.5, 0.5], [0.1, 0.9]];
        assert_eq!(argmax_rows(m.view()), vec![0, 1]);
    }
}
