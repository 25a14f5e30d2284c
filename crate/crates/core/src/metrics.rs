//! Per-iteration convergence scalars computed from decoder soft output.

use std::f64::consts::LN_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decoder::{log1p_exp_neg, MaxStar};
use crate::error::{check_len, Result};

/// Truncated form of `1 / ln 2` found in hardware-oriented descriptions.
pub const TRUNCATED_INV_LN2: f64 = 1.44;

/// What a stopping rule sees after every full iteration.
///
/// All vectors are in natural order. `decisions` are the hard decisions of
/// `app2`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationObservation {
    pub iter: u32,
    pub app1: Vec<f64>,
    pub ext1: Vec<f64>,
    pub app2: Vec<f64>,
    pub ext2: Vec<f64>,
    pub decisions: Vec<u8>,
    pub snr_db: f64,
    pub true_bits: Option<Arc<[u8]>>,
}

/// `ln(1 + e^-x)` for any real `x`, without overflow.
#[inline]
fn softplus_neg(x: f64) -> f64 {
    (-x).max(0.0) + log1p_exp_neg(x)
}

/// Time-averaged mutual information between bits and their LLRs,
/// `1 - mean(log2(1 + exp(-u * L)))`, with `u` in `{+1, -1}`.
///
/// Terms are capped at 1 (reached when `u * L = +inf`); confidently wrong
/// LLRs contribute negative terms.
pub fn mutual_info_true(llrs: &[f64], bits_pm1: &[f64]) -> Result<f64> {
    check_len(llrs.len(), bits_pm1.len())?;
    if llrs.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = llrs
        .iter()
        .zip(bits_pm1)
        .map(|(&l, &u)| (1.0 - softplus_neg(u * l) / LN_2).min(1.0))
        .sum();
    Ok(sum / llrs.len() as f64)
}

/// Scale applied to the summed corrections.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvLn2 {
    #[default]
    Exact,
    /// Uses 1.44 in place of `1 / ln 2`.
    Truncated,
}

/// `eps = (1 / (N ln 2)) * sum ln(1 + e^-|L|)`.
pub fn epsilon(app: &[f64]) -> f64 {
    epsilon_with(app, &MaxStar::Exact, InvLn2::Exact)
}

/// Epsilon with the correction term taken exactly or from the LUT of
/// `correction`, scaled by the chosen `1 / ln 2` constant.
pub fn epsilon_with(app: &[f64], correction: &MaxStar, scale: InvLn2) -> f64 {
    if app.is_empty() {
        return 1.0;
    }
    // Terms are scaled before summing so an all-zero vector gives exactly 1.
    let sum: f64 = match scale {
        InvLn2::Exact => app.iter().map(|&l| correction.correction(l) / LN_2).sum(),
        InvLn2::Truncated => app
            .iter()
            .map(|&l| correction.correction(l) * TRUNCATED_INV_LN2)
            .sum(),
    };
    sum / app.len() as f64
}

/// `1 - eps`: the mutual information estimate with hard decisions standing
/// in for the unknown bits.
pub fn mutual_info_approx(app: &[f64], mode: &MaxStar) -> f64 {
    1.0 - epsilon_with(app, mode, InvLn2::Exact)
}

/// Mean conditional bit-error probability `1 / (1 + e^|L|)`.
pub fn ber_estimate(app: &[f64]) -> f64 {
    if app.is_empty() {
        return 0.0;
    }
    let sum: f64 = app.iter().map(|&l| ber_given_llr(l)).sum();
    sum / app.len() as f64
}

/// `1 / (1 + e^|L|)` for a single LLR.
#[inline]
pub fn ber_given_llr(llr: f64) -> f64 {
    let e = (-llr.abs()).exp();
    e / (1.0 + e)
}

/// How the a-posteriori LLR enters the cross-entropy denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeExponent {
    /// `e^|L_app|`
    #[default]
    Magnitude,
    /// `e^L_app`, as the formula is sometimes printed.
    Signed,
}

/// `(1/N) * sum |ext_cur - ext_prev|^2 / e^{L_app}`.
pub fn cross_entropy(
    ext_prev: &[f64],
    ext_cur: &[f64],
    app_cur: &[f64],
    exponent: CeExponent,
) -> Result<f64> {
    check_len(ext_prev.len(), ext_cur.len())?;
    check_len(ext_cur.len(), app_cur.len())?;
    if ext_cur.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = ext_prev
        .iter()
        .zip(ext_cur)
        .zip(app_cur)
        .map(|((&p, &c), &a)| {
            let d = c - p;
            let x = match exponent {
                CeExponent::Magnitude => a.abs(),
                CeExponent::Signed => a,
            };
            d * d * (-x).exp()
        })
        .sum();
    Ok(sum / ext_cur.len() as f64)
}

/// Number and fraction of positions where two decision vectors differ.
pub fn hard_decision_agreement(dec_prev: &[u8], dec_cur: &[u8]) -> Result<(usize, f64)> {
    check_len(dec_prev.len(), dec_cur.len())?;
    let changed = dec_prev.iter().zip(dec_cur).filter(|(a, b)| a != b).count();
    let ratio = if dec_cur.is_empty() {
        0.0
    } else {
        changed as f64 / dec_cur.len() as f64
    };
    Ok((changed, ratio))
}

/// Sign changes between two LLR vectors (a zero LLR counts as positive).
pub fn sign_changes(prev: &[f64], cur: &[f64]) -> Result<(usize, f64)> {
    check_len(prev.len(), cur.len())?;
    let changed = prev
        .iter()
        .zip(cur)
        .filter(|(&a, &b)| (a < 0.0) != (b < 0.0))
        .count();
    let ratio = if cur.is_empty() {
        0.0
    } else {
        changed as f64 / cur.len() as f64
    };
    Ok((changed, ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::CorrectionLut;
    use proptest::prelude::*;

    fn pm1(llrs: &[f64]) -> Vec<f64> {
        llrs.iter()
            .map(|&l| if l < 0.0 { -1.0 } else { 1.0 })
            .collect()
    }

    #[test]
    fn true_mi_limits() {
        assert_eq!(
            mutual_info_true(&[0.0; 4], &[1.0, -1.0, 1.0, 1.0]).unwrap(),
            0.0
        );
        let i = mutual_info_true(&[20.0, -20.0], &[1.0, -1.0]).unwrap();
        assert!((1.0 - i).abs() < 1e-8);
        let half = mutual_info_true(&[0.0, f64::INFINITY], &[1.0, 1.0]).unwrap();
        assert_eq!(half, 0.5);
        assert!(mutual_info_true(&[1.0], &[]).is_err());
    }

    #[test]
    fn epsilon_values() {
        assert_eq!(epsilon(&[0.0; 17]), 1.0);
        let e = epsilon(&[10.0, -10.0, 10.0]);
        assert!((e - 6.549_676_676_198_847e-5).abs() < 1e-15);
    }

    #[test]
    fn approx_is_one_minus_epsilon() {
        let v = [0.3, -2.0, 7.5, -0.01, 12.0];
        assert_eq!(mutual_info_approx(&v, &MaxStar::Exact), 1.0 - epsilon(&v));
        assert_eq!(mutual_info_approx(&[0.0; 3], &MaxStar::Exact), 0.0);
        let truncated = 1.0 - epsilon_with(&[0.0; 3], &MaxStar::Exact, InvLn2::Truncated);
        assert!((truncated - 0.001_868).abs() < 1e-6);
        let big = mutual_info_approx(&[f64::INFINITY, f64::NEG_INFINITY], &MaxStar::Exact);
        assert_eq!(big, 1.0);
    }

    #[test]
    fn lut_approx_close_to_exact() {
        let lut = MaxStar::Lut(CorrectionLut::default());
        let v: Vec<f64> = (0..200).map(|i| (i as f64 - 100.0) * 0.07).collect();
        let gap = (mutual_info_approx(&v, &lut) - mutual_info_approx(&v, &MaxStar::Exact)).abs();
        assert!(gap < 0.032 / LN_2);
    }

    #[test]
    fn ber_estimate_values() {
        assert_eq!(ber_estimate(&[0.0]), 0.5);
        assert!((ber_estimate(&[4.6]) - 0.009_951_801_866_904_324).abs() < 1e-15);
        assert!((ber_estimate(&[-4.6]) - 0.009_951_801_866_904_324).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_values() {
        let a = [1.0, -2.0, 3.0];
        assert_eq!(
            cross_entropy(&a, &a, &[5.0; 3], CeExponent::Magnitude).unwrap(),
            0.0
        );
        let ce = cross_entropy(&[1.0], &[3.0], &[-3.0], CeExponent::Magnitude).unwrap();
        assert!((ce - 0.199_148_273_471_455_78).abs() < 1e-15);
        let signed = cross_entropy(&[1.0], &[3.0], &[-3.0], CeExponent::Signed).unwrap();
        assert!((signed - 4.0 * 3f64.exp()).abs() < 1e-12);
        let doubled = cross_entropy(&[2.0], &[6.0], &[-3.0], CeExponent::Magnitude).unwrap();
        assert!((doubled - 4.0 * ce).abs() < 1e-15);
    }

    #[test]
    fn decision_agreement_counts() {
        assert_eq!(
            hard_decision_agreement(&[0, 1, 1], &[0, 1, 1]).unwrap(),
            (0, 0.0)
        );
        assert_eq!(
            hard_decision_agreement(&[0, 1, 1], &[1, 0, 0]).unwrap(),
            (3, 1.0)
        );
        let a = vec![0u8; 900];
        let mut b = a.clone();
        for i in 0..9 {
            b[i * 100] = 1;
        }
        assert_eq!(hard_decision_agreement(&a, &b).unwrap(), (9, 0.01));
        assert!(hard_decision_agreement(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn sign_change_counts() {
        assert_eq!(
            sign_changes(&[1.0, -1.0, 0.0], &[2.0, 3.0, -0.5]).unwrap(),
            (2, 2.0 / 3.0)
        );
    }

    proptest! {
        #[test]
        fn approx_equals_true_mi_with_hard_decisions(v in prop::collection::vec(-30.0f64..30.0, 1..64)) {
            let t = mutual_info_true(&v, &pm1(&v)).unwrap();
            let a = mutual_info_approx(&v, &MaxStar::Exact);
            prop_assert!((t - a).abs() < 1e-12);
        }

        #[test]
        fn approx_dominates_true_mi(
            v in prop::collection::vec(-30.0f64..30.0, 1..64),
            flips in prop::collection::vec(any::<bool>(), 64),
        ) {
            let bits: Vec<f64> = flips.iter().take(v.len()).map(|&f| if f { -1.0 } else { 1.0 }).collect();
            let t = mutual_info_true(&v, &bits).unwrap();
            prop_assert!(mutual_info_approx(&v, &MaxStar::Exact) >= t - 1e-12);
        }

        #[test]
        fn epsilon_bounded_and_monotone(
            v in prop::collection::vec(-40.0f64..40.0, 1..64),
            bump in prop::collection::vec(0.0f64..5.0, 64),
        ) {
            let e = epsilon(&v);
            prop_assert!((0.0..=1.0).contains(&e));
            let louder: Vec<f64> = v.iter().zip(&bump).map(|(&l, &b)| l.signum() * (l.abs() + b)).collect();
            prop_assert!(epsilon(&louder) <= e + 1e-15);
        }
    }
}
