//! Paired bootstrap significance test.

use rand::Rng;

use crate::error::{Error, Result};
use crate::util::seeded_rng;

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// One-sided p-value for "system A scores higher than system B" on paired
/// per-item scores: the fraction of resampled mean differences `A - B` that
/// are `<= 0`.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("bootstrap needs at least one pair".into()));
    }
    if resamples == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score in bootstrap input".into()));
    }
    let n = diffs.len();
    let mut rng = seeded_rng(seed);
    let mut not_better = 0usize;
    for _ in 0..resamples {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += diffs[rng.gen_range(0..n)];
        }
        if sum <= 0.0 {
            not_better += 1;
        }
    }
    Ok(not_better as f64 / resamples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_systems_give_one() {
        let a = [0.3, 0.5, 0.9];
        assert_eq!(paired_bootstrap(&a, &a, 500, 1).unwrap(), 1.0);
    }

    #[test]
    fn uniform_gain_is_significant() {
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 0.5).collect();
        assert!(paired_bootstrap(&a, &b, DEFAULT_RESAMPLES, 3).unwrap() < 0.01);
    }

    #[test]
    fn reproducible_and_bounded() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| ((i * 5) % 11) as f64).collect();
        let p = paired_bootstrap(&a, &b, 1000, 9).unwrap();
        assert_eq!(p, paired_bootstrap(&a, &b, 1000, 9).unwrap());
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn input_errors() {
        assert!(paired_bootstrap(&[1.0], &[], 10, 0).is_err());
        assert!(paired_bootstrap(&[], &[], 10, 0).is_err());
        assert!(paired_bootstrap(&[1.0], &[1.0], 0, 0).is_err());
    }
}
