use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Momentum-averaged latent codes, one row per source sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    entries: Array2<f64>,
    pub momentum: f64,
}

impl MemoryBank {
    pub fn new(entries: Array2<f64>, momentum: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::InvalidParameter(format!(
                "bank momentum must lie in [0,1], got {momentum}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("memory bank entries".into()));
        }
        Ok(Self { entries, momentum })
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    /// `bank[i] ← momentum·bank[i] + (1−momentum)·fresh` for the touched rows.
    pub fn update(&mut self, indices: &[usize], fresh: ArrayView2<f64>) -> Result<()> {
        update_rows(&mut self.entries, indices, fresh, self.momentum)
    }
}

fn update_rows(
    entries: &mut Array2<f64>,
    indices: &[usize],
    fresh: ArrayView2<f64>,
    momentum: f64,
) -> Result<()> {
    if fresh.nrows() != indices.len() || fresh.ncols() != entries.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "fresh latents are {:?} for {} indices into a bank of width {}",
            fresh.dim(),
            indices.len(),
            entries.ncols()
        )));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= entries.nrows()) {
        return Err(Error::InvalidParameter(format!(
            "bank index {bad} out of range for {} entries",
            entries.nrows()
        )));
    }
    if fresh.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fresh latents for bank update".into()));
    }
    for (r, &i) in indices.iter().enumerate() {
        let mut row = entries.row_mut(i);
        for (b, &f) in row.iter_mut().zip(fresh.row(r).iter()) {
            *b = momentum * *b + (1.0 - momentum) * f;
        }
    }
    Ok(())
}

/// Functional form of [`MemoryBank::update`] with an explicit momentum.
pub fn bank_update(
    bank: &MemoryBank,
    indices: &[usize],
    fresh: ArrayView2<f64>,
    momentum: f64,
) -> Result<MemoryBank> {
    let mut entries = bank.entries.clone();
    update_rows(&mut entries, indices, fresh, momentum)?;
    Ok(MemoryBank {
        entries,
        momentum: bank.momentum,
    })
}

/// Majority vote among the `k` bank entries nearest (squared Euclidean) to
/// each query. Equal distances are ordered by bank index; vote ties go to the
/// smallest class index.
pub fn knn_predict(
    bank: &MemoryBank,
    source_labels: &[usize],
    target_latent: ArrayView2<f64>,
    k: usize,
    num_classes: usize,
) -> Result<Vec<usize>> {
    if bank.is_empty() {
        return Err(Error::InvalidParameter("k-NN on an empty memory bank".into()));
    }
    if k == 0 || k > bank.len() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {}], got {k}",
            bank.len()
        )));
    }
    if source_labels.len() != bank.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a bank of {}",
            source_labels.len(),
            bank.len()
        )));
    }
    if target_latent.ncols() != bank.entries.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "queries have width {}, bank {}",
            target_latent.ncols(),
            bank.entries.ncols()
        )));
    }
    if let Some(&label) = source_labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::LabelOutOfRange {
            label,
            classes: num_classes,
        });
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(bank.len());
    let mut votes = vec![0usize; num_classes];
    let mut out = Vec::with_capacity(target_latent.nrows());
    for q in target_latent.outer_iter() {
        order.clear();
        for (i, b) in bank.entries.outer_iter().enumerate() {
            let d: f64 = q.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            order.push((d, i));
        }
        order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        votes.iter_mut().for_each(|v| *v = 0);
        for &(_, i) in &order[..k] {
            votes[source_labels[i]] += 1;
        }
        let mut best = 0;
        for c in 1..num_classes {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        out.push(best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bank_update_limits() {
        let bank = MemoryBank::new(array![[1.0, 2.0], [3.0, 4.0]], 0.5).unwrap();
        let fresh = array![[10.0, 20.0]];
        let replaced = bank_update(&bank, &[1], fresh.view(), 0.0).unwrap();
        assert_eq!(replaced.entries(), array![[1.0, 2.0], [10.0, 20.0]].view());
        let kept = bank_update(&bank, &[1], fresh.view(), 1.0).unwrap();
        assert_eq!(kept.entries(), bank.entries());
    }

    #[test]
    fn two_half_momentum_updates() {
        let b = 4.0;
        let v = 8.0;
        let mut bank = MemoryBank::new(array![[b]], 0.5).unwrap();
        bank.update(&[0], array![[v]].view()).unwrap();
        bank.update(&[0], array![[v]].view()).unwrap();
        assert_eq!(bank.entries()[[0, 0]], b / 4.0 + 3.0 * v / 4.0);
    }

    #[test]
    fn bank_update_errors() {
        let mut bank = MemoryBank::new(array![[0.0]], 0.5).unwrap();
        assert!(bank.update(&[3], array![[1.0]].view()).is_err());
        assert!(bank.update(&[0], array![[1.0, 2.0]].view()).is_err());
        assert!(MemoryBank::new(array![[0.0]], 1.5).is_err());
    }

    #[test]
    fn knn_trivial_cases() {
        let bank = MemoryBank::new(array![[0.0, 0.0], [5.0, 5.0], [5.0, 6.0]], 0.5).unwrap();
        let labels = [0, 1, 1];
        assert_eq!(knn_predict(&bank, &labels, array![[5.0, 5.0]].view(), 1, 2).unwrap(), vec![1]);
        assert_eq!(knn_predict(&bank, &labels, array![[0.0, 0.0]].view(), 1, 2).unwrap(), vec![0]);
        let same = [1, 1, 1];
        for k in 1..=3 {
            assert_eq!(knn_predict(&bank, &same, array![[0.0, 0.0]].view(), k, 2).unwrap(), vec![1]);
        }
    }

    #[test]
    fn knn_vote_tie_goes_to_smaller_class() {
        let bank = MemoryBank::new(array![[1.0], [-1.0]], 0.5).unwrap();
        assert_eq!(knn_predict(&bank, &[1, 0], array![[0.0]].view(), 2, 2).unwrap(), vec![0]);
    }

    #[test]
    fn knn_errors() {
        let empty = MemoryBank::new(Array2::zeros((0, 2)), 0.5).unwrap();
        assert!(knn_predict(&empty, &[], array![[0.0, 0.0]].view(), 1, 2).is_err());
        let bank = MemoryBank::new(array![[0.0]], 0.5).unwrap();
        assert!(knn_predict(&bank, &[0], array![[0.0]].view(), 0, 2).is_err());
        assert!(knn_predict(&bank, &[0], array![[0.0]].view(), 2, 2).is_err());
    }
}
