//! Pairwise margin ranking loss over one candidate set.
//!
//! For gold qualities `Q` and predictions `R` of `n` candidates:
//!
//! ```text
//! L = sum_{i != j} max(0, -z_ij * (zhat_ij + gamma)) / (n (n - 1))
//! z_ij = Q_i - Q_j,  zhat_ij = R_i - R_j
//! ```
//!
//! `|z_ij|` weights each pair, so pairs with a large quality gap matter more.

use crate::error::{Error, Result};

use super::features::SparseFeatures;

fn check(gold: &[f64], pred: &[f64], gamma: f64) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "gold has {} entries, predictions {}",
            gold.len(),
            pred.len()
        )));
    }
    if gold.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "set loss needs at least 2 candidates, got {}",
            gold.len()
        )));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("margin must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

#[inline]
fn hinge(z: f64, zhat: f64, gamma: f64) -> f64 {
    -z * (zhat + gamma)
}

pub fn set_loss(gold: &[f64], pred: &[f64], gamma: f64) -> Result<f64> {
    check(gold, pred, gamma)?;
    let n = gold.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let h = hinge(gold[i] - gold[j], pred[i] - pred[j], gamma);
            if h > 0.0 {
                total += h;
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// dL/dR_k for every candidate. Inactive and kink terms (`h <= 0`)
/// contribute nothing.
pub fn set_loss_pred_gradient(gold: &[f64], pred: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check(gold, pred, gamma)?;
    let n = gold.len();
    let norm = (n * (n - 1)) as f64;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let z = gold[i] - gold[j];
            if hinge(z, pred[i] - pred[j], gamma) > 0.0 {
                // d/dR_i of -z (R_i - R_j + gamma) is -z; d/dR_j is +z
                grad[i] -= z;
                grad[j] += z;
            }
        }
    }
    for g in &mut grad {
        *g /= norm;
    }
    Ok(grad)
}

/// Subgradient of the loss with respect to linear-model weights, where
/// `R_k = w . x_k + b`. Returned as sorted `(index, value)` pairs; the bias
/// gradient is always zero because only score differences enter.
pub fn set_loss_gradient(
    gold: &[f64],
    pred: &[f64],
    gamma: f64,
    features: &[SparseFeatures],
) -> Result<Vec<(usize, f64)>> {
    if features.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature vectors for {} candidates",
            features.len(),
            gold.len()
        )));
    }
    let coef = set_loss_pred_gradient(gold, pred, gamma)?;
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for (c, x) in coef.iter().zip(features) {
        if *c == 0.0 {
            continue;
        }
        pairs.extend(x.iter().map(|(i, v)| (i, c * v)));
    }
    pairs.sort_by_key(|p| p.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
    for (i, v) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        assert_eq!(set_loss(&[1.0, 0.0], &[0.0, 1.0], 0.1).unwrap(), 1.0);
        assert_eq!(set_loss(&[1.0, 0.0], &[5.0, 0.0], 0.1).unwrap(), 0.0);
        assert_eq!(set_loss(&[3.0, -1.0, 2.0], &[0.7; 3], 0.0).unwrap(), 0.0);
        // correct order but inside the margin: only the mirrored pair fires
        let l = set_loss(&[1.0, 0.0], &[0.05, 0.0], 0.1).unwrap();
        assert!((l - 0.025).abs() < 1e-15);
    }

    #[test]
    fn argument_errors() {
        assert!(set_loss(&[1.0], &[1.0], 0.1).is_err());
        assert!(set_loss(&[1.0, 2.0], &[1.0], 0.1).is_err());
        assert!(set_loss(&[1.0, 2.0], &[1.0, 0.0], -0.1).is_err());
        assert!(set_loss_gradient(&[1.0, 2.0], &[1.0, 0.0], 0.1, &[]).is_err());
    }

    #[test]
    fn ties_contribute_nothing() {
        let g = set_loss_pred_gradient(&[0.5, 0.5, 0.5], &[3.0, -1.0, 0.0], 0.2).unwrap();
        assert_eq!(g, vec![0.0; 3]);
        assert_eq!(set_loss(&[0.5, 0.5], &[3.0, -1.0], 0.2).unwrap(), 0.0);
    }

    #[test]
    fn inactive_region_has_zero_gradient() {
        let g = set_loss_pred_gradient(&[2.0, 1.0, 0.0], &[10.0, 5.0, 0.0], 0.1).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn doubling_gold_doubles_active_gradient() {
        let q = [0.3, 1.0, -0.4, 0.2];
        let r = [0.5, -0.2, 0.1, 0.0];
        let g1 = set_loss_pred_gradient(&q, &r, 0.1).unwrap();
        let q2: Vec<f64> = q.iter().map(|x| 2.0 * x).collect();
        let g2 = set_loss_pred_gradient(&q2, &r, 0.1).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn weight_gradient_merges_shared_indices() {
        let x = |pairs: &[(u32, f64)]| SparseFeatures {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        };
        let feats = [x(&[(0, 1.0), (2, 1.0)]), x(&[(2, 1.0), (3, 2.0)])];
        // Q=[1,0], R=[0,1], gamma 0.1 -> dL/dR = [-1, 1]
        let g = set_loss_gradient(&[1.0, 0.0], &[0.0, 1.0], 0.1, &feats).unwrap();
        assert_eq!(g, vec![(0, -1.0), (2, 0.0), (3, 2.0)]);
    }

    fn sized(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        n.prop_flat_map(|n| {
            (
                proptest::collection::vec(-2f64..2.0, n),
                proptest::collection::vec(-2f64..2.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn nonnegative_and_shift_invariant((q, r) in sized(2..9), gamma in 0f64..1.0, c in -5f64..5.0) {
            let l = set_loss(&q, &r, gamma).unwrap();
            prop_assert!(l >= 0.0);
            // shift by a value whose differences stay exact
            let c = (c * 4.0).round() / 4.0;
            let shifted: Vec<f64> = r.iter().map(|x| x + c).collect();
            let ls = set_loss(&q, &shifted, gamma).unwrap();
            prop_assert!((l - ls).abs() <= 1e-12 * (1.0 + l));
        }

        #[test]
        fn permutation_invariant((q, r) in sized(2..9), gamma in 0f64..1.0, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut idx: Vec<usize> = (0..q.len()).collect();
            idx.shuffle(&mut crate::util::seeded_rng(seed));
            let qp: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
            let rp: Vec<f64> = idx.iter().map(|&i| r[i]).collect();
            let a = set_loss(&q, &r, gamma).unwrap();
            let b = set_loss(&qp, &rp, gamma).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn zero_loss_iff_margin_respected((q, r) in sized(2..7), gamma in 0f64..0.5) {
            let l = set_loss(&q, &r, gamma).unwrap();
            let ok = (0..q.len()).all(|i| (0..q.len()).all(|j| {
                q[i] - q[j] <= 0.0 || r[i] - r[j] >= gamma
            }));
            prop_assert_eq!(l == 0.0, ok);
        }

        #[test]
        fn constructed_zero_loss(q in proptest::collection::vec(-2f64..2.0, 2..7), gamma in 0f64..0.5) {
            // predictions that copy the gold order with gaps of at least gamma
            let mut order: Vec<usize> = (0..q.len()).collect();
            order.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
            let mut r = vec![0.0; q.len()];
            let mut level = 0.0;
            for w in 0..order.len() {
                if w > 0 && q[order[w]] > q[order[w - 1]] {
                    level += gamma + 0.25;
                }
                r[order[w]] = level;
            }
            prop_assert_eq!(set_loss(&q, &r, gamma).unwrap(), 0.0);
        }
    }
}
