//! Distinguishability of the raw, order-randomised commitment sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{density_from_ensemble, symmetrize, trace_distance, DensityMatrix};
use crate::states::{all_permutations, commit_ensemble, Bit};

/// Largest `n` for the full permutation sum; above it weight classes are used.
pub const FULL_SUM_MAX_N: usize = 3;
pub const PRELIM_MAX_N: usize = 4;

/// One Hamming-weight class of `2n`-particle z-strings (weight = number of ↓).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightClass {
    pub weight: usize,
    /// Total spin of every string in the class, in units of ħ/2.
    pub sz: i64,
    pub size: u64,
    /// Common diagonal entry of the averaged state, per bit.
    pub entry: [f64; 2],
    /// Largest minus smallest diagonal entry inside the class, per bit.
    pub spread: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityReport {
    pub n: usize,
    pub trace_distance_full: f64,
    pub tv_distance_sz: f64,
    /// `(S_z, probability)` per bit.
    pub sz_distribution: [Vec<(i64, f64)>; 2],
    /// Largest off-diagonal modulus of either averaged state.
    pub max_off_diagonal: f64,
    pub max_class_spread: f64,
    pub classes: Vec<WeightClass>,
    /// Whether the averaged states came from the full permutation sum.
    pub exact_sum: bool,
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn max_off_diagonal(rho: &DensityMatrix) -> f64 {
    let e = rho.entries();
    let mut m: f64 = 0.0;
    for j in 0..e.ncols() {
        for i in 0..e.nrows() {
            if i != j {
                m = m.max(e[(i, j)].norm());
            }
        }
    }
    m
}

/// Permutation-averaged state of a raw `n`-pair commitment.
///
/// For `n ≤ 3` this is the explicit sum over all `(2n)!` reorderings. For
/// `n = 4` the unaveraged state is first checked to be diagonal; averaging a
/// diagonal state replaces each entry by the mean over its weight class.
pub fn averaged_commit_state(b: Bit, n: usize) -> Result<(DensityMatrix, bool)> {
    if n == 0 || n > PRELIM_MAX_N {
        return Err(Error::TooLarge(format!("permutation averaging at n = {n}")));
    }
    let rho = density_from_ensemble(&commit_ensemble(b, n)?);
    if n <= FULL_SUM_MAX_N {
        let factors: Vec<usize> = (0..2 * n).collect();
        return Ok((symmetrize(&rho, &factors, &all_permutations(2 * n))?, true));
    }
    let off = max_off_diagonal(&rho);
    if off > 1e-12 {
        return Err(Error::InvalidState(format!("raw state not diagonal (off-diagonal {off:e})")));
    }
    let d = rho.dim();
    let mut sums = vec![0.0; 2 * n + 1];
    for i in 0..d {
        sums[i.count_ones() as usize] += rho.entries()[(i, i)].re;
    }
    let mut entries = crate::linalg::CMatrix::zeros(d, d);
    for i in 0..d {
        let w = i.count_ones() as usize;
        entries[(i, i)] = (sums[w] / binomial(2 * n, w) as f64).into();
    }
    Ok((DensityMatrix::new(rho.dims().to_vec(), entries)?, false))
}

pub fn prelim_one_report(n: usize) -> Result<DistinguishabilityReport> {
    let (r0, exact) = averaged_commit_state(Bit::Zero, n)?;
    let (r1, _) = averaged_commit_state(Bit::One, n)?;
    let d = r0.dim();
    let mut classes: Vec<WeightClass> = (0..=2 * n)
        .map(|w| WeightClass {
            weight: w,
            sz: 2 * n as i64 - 2 * w as i64,
            size: binomial(2 * n, w),
            entry: [0.0; 2],
            spread: [0.0; 2],
        })
        .collect();
    for (k, rho) in [&r0, &r1].into_iter().enumerate() {
        let mut lo = vec![f64::INFINITY; 2 * n + 1];
        let mut hi = vec![f64::NEG_INFINITY; 2 * n + 1];
        for i in 0..d {
            let w = i.count_ones() as usize;
            let x = rho.entries()[(i, i)].re;
            lo[w] = lo[w].min(x);
            hi[w] = hi[w].max(x);
        }
        for c in classes.iter_mut() {
            c.entry[k] = lo[c.weight];
            c.spread[k] = hi[c.weight] - lo[c.weight];
        }
    }
    let dist = |k: usize| -> Vec<(i64, f64)> {
        classes.iter().rev().map(|c| (c.sz, c.size as f64 * c.entry[k])).filter(|&(_, p)| p > 1e-15).collect()
    };
    let sz_distribution = [dist(0), dist(1)];
    let tv = 0.5 * classes.iter().map(|c| c.size as f64 * (c.entry[0] - c.entry[1]).abs()).sum::<f64>();
    Ok(DistinguishabilityReport {
        n,
        trace_distance_full: trace_distance(&r0, &r1)?,
        tv_distance_sz: tv,
        sz_distribution,
        max_off_diagonal: max_off_diagonal(&r0).max(max_off_diagonal(&r1)),
        max_class_spread: classes.iter().flat_map(|c| c.spread).fold(0.0, f64::max),
        classes,
        exact_sum: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(6, 0), 1);
        assert_eq!(binomial(6, 6), 1);
    }

    #[test]
    fn zero_bit_has_zero_spin() {
        for n in 1..=3 {
            let r = prelim_one_report(n).unwrap();
            assert_eq!(r.sz_distribution[0].len(), 1);
            assert_eq!(r.sz_distribution[0][0].0, 0);
            assert!((r.sz_distribution[0][0].1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_class_shortcut_agrees_with_the_full_sum_where_both_apply() {
        // Apply the n = 4 shortcut logic by hand at n = 2 and compare.
        for b in [Bit::Zero, Bit::One] {
            let (full, exact) = averaged_commit_state(b, 2).unwrap();
            assert!(exact);
            let rho = density_from_ensemble(&commit_ensemble(b, 2).unwrap());
            for i in 0..16usize {
                let w = i.count_ones();
                let class: Vec<usize> = (0..16usize).filter(|j| j.count_ones() == w).collect();
                let mean = class.iter().map(|&j| rho.entries()[(j, j)].re).sum::<f64>() / class.len() as f64;
                assert!((full.entries()[(i, i)].re - mean).abs() < 1e-12);
            }
        }
    }
}
