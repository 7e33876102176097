use itertools::Itertools;

use super::CostMatrix;
use crate::{Error, Result};

/// Largest size the permutation oracle accepts (7! = 5040 assignments).
pub const MAX_ORACLE_SIZE: usize = 7;

/// `(1/n) · min_σ Σ_i C[i, σ(i)]` by exhaustive permutation search.
///
/// With uniform marginals the transport polytope is the scaled Birkhoff
/// polytope, whose vertices are permutation matrices, so this equals the
/// optimal transport cost.
pub fn brute_force_oracle(cost: &CostMatrix) -> Result<f64> {
    let (n, m) = cost.shape();
    if n != m {
        return Err(Error::DimensionMismatch(format!(
            "oracle needs a square cost, got {n}x{m}"
        )));
    }
    if n > MAX_ORACLE_SIZE {
        return Err(Error::InvalidParameter(format!(
            "oracle size {n} exceeds {MAX_ORACLE_SIZE}"
        )));
    }
    let c = cost.entries();
    let best = (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(best / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn tiny_cases() {
        let c = CostMatrix::new(array![[3.0]]).unwrap();
        assert_eq!(brute_force_oracle(&c).unwrap(), 3.0);
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(brute_force_oracle(&c).unwrap(), 0.0);
    }

    #[test]
    fn rejects_large_and_rectangular() {
        let c = CostMatrix::new(Array2::zeros((8, 8))).unwrap();
        assert!(brute_force_oracle(&c).is_err());
        let c = CostMatrix::new(Array2::zeros((2, 3))).unwrap();
        assert!(brute_force_oracle(&c).is_err());
    }
}
