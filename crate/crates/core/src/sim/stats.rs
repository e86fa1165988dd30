//! Summary statistics over Monte Carlo replicates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseDecomposition {
    pub bias: f64,
    /// Mean squared deviation from the mean of the estimates (1/R divisor).
    pub variance: f64,
    /// Mean squared deviation from the truth.
    pub mse: f64,
    /// `bias^2 / mse`, 0 when `mse` is 0.
    pub bias_sq_share: f64,
}

pub fn mse_decomposition(estimates: &[f64], truth: f64) -> Result<MseDecomposition> {
    if estimates.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: estimates.len(),
        });
    }
    let r = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / r;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / r;
    let bias = mean - truth;
    let bias_sq_share = if mse > 0.0 {
        (bias * bias / mse).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(MseDecomposition {
        bias,
        variance,
        mse,
        bias_sq_share,
    })
}

/// `mse_base / mse_new`: how many times more efficient the new estimator is.
pub fn relative_efficiency(mse_base: f64, mse_new: f64) -> Result<f64> {
    if !(mse_new > 0.0) {
        return Err(Error::ZeroDenominator("relative efficiency with zero MSE"));
    }
    Ok(mse_base / mse_new)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolaFit {
    /// Height of `mse = a p (1 - p)`.
    pub a: f64,
    /// Points used, complements included.
    pub points: Vec<(f64, f64)>,
}

/// Fits `mse = a p (1 - p)` with the ratio estimator `a = sum mse / sum p(1-p)`.
/// With `include_complements`, every `(p, mse)` also contributes `(1 - p, mse)`.
pub fn fit_parabola(points: &[(f64, f64)], include_complements: bool) -> Result<ParabolaFit> {
    if !points.iter().any(|&(p, _)| p > 0.0 && p < 1.0) {
        return Err(Error::config(
            "parabola fit needs a proportion strictly between 0 and 1",
        ));
    }
    let mut all = points.to_vec();
    if include_complements {
        all.extend(points.iter().map(|&(p, mse)| (1.0 - p, mse)));
    }
    let (sy, sx) = all
        .iter()
        .fold((0.0, 0.0), |(sy, sx), &(p, mse)| (sy + mse, sx + p * (1.0 - p)));
    Ok(ParabolaFit { a: sy / sx, points: all })
}

/// Fraction of intervals with `low <= truth <= high`.
pub fn coverage(intervals: &[(f64, f64)], truth: f64) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::Empty);
    }
    let hits = intervals
        .iter()
        .filter(|&&(lo, hi)| lo <= truth && truth <= hi)
        .count();
    Ok(hits as f64 / intervals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decomposition_examples() {
        let d = mse_decomposition(&[1.0, 3.0], 2.0).unwrap();
        assert_eq!((d.bias, d.variance, d.mse, d.bias_sq_share), (0.0, 1.0, 1.0, 0.0));
        let d = mse_decomposition(&[3.0, 3.0], 2.0).unwrap();
        assert_eq!((d.bias, d.variance, d.mse, d.bias_sq_share), (1.0, 0.0, 1.0, 1.0));
        let d = mse_decomposition(&[2.0, 4.0], 1.0).unwrap();
        assert_eq!((d.bias, d.variance, d.mse), (2.0, 1.0, 5.0));
        assert!(mse_decomposition(&[1.0], 1.0).is_err());
    }

    #[test]
    fn efficiency_examples() {
        let re = relative_efficiency(40.453589, 0.264755).unwrap();
        assert!((re - 152.8).abs() < 0.05, "{re}");
        let re = relative_efficiency(7.249053, 0.264755).unwrap();
        assert!((re - 27.4).abs() < 0.05, "{re}");
        assert_eq!(relative_efficiency(0.3, 0.3).unwrap(), 1.0);
        assert!(relative_efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn parabola_examples() {
        let pts: Vec<(f64, f64)> = [0.05, 0.1, 0.24, 0.43]
            .iter()
            .map(|&p| (p, 0.02 * p * (1.0 - p)))
            .collect();
        let fit = fit_parabola(&pts, false).unwrap();
        assert!((fit.a - 0.02).abs() < 1e-15);
        let with = fit_parabola(&pts, true).unwrap();
        assert_eq!(with.points.len(), 8);
        assert!((with.a - fit.a).abs() < 1e-15);
        assert!(fit_parabola(&[(0.0, 1.0), (1.0, 2.0)], true).is_err());

        let ratio = relative_efficiency(0.02231997, 0.002791733).unwrap();
        assert!((ratio - 8.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage(&[(0.0, 2.0), (0.5, 1.5)], 1.0).unwrap(), 1.0);
        assert_eq!(coverage(&[(2.0, 3.0), (-1.0, 0.5)], 1.0).unwrap(), 0.0);
        assert_eq!(coverage(&[(1.0, 1.0), (2.0, 3.0)], 1.0).unwrap(), 0.5);
        assert!(coverage(&[], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn identity_holds(est in prop::collection::vec(-1e3f64..1e3, 2..100), truth in -1e3f64..1e3) {
            let d = mse_decomposition(&est, truth).unwrap();
            let lhs = d.mse;
            let rhs = d.variance + d.bias * d.bias;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-300));
            prop_assert!((0.0..=1.0).contains(&d.bias_sq_share));
        }

        #[test]
        fn complements_do_not_move_a(pts in prop::collection::vec((0.01f64..0.99, 0.0f64..1.0), 1..20)) {
            let a = fit_parabola(&pts, false).unwrap().a;
            let b = fit_parabola(&pts, true).unwrap().a;
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }
}
