//! Power-law fits by least squares in log–log space.

use serde::Serialize;

use crate::error::{Error, Result};

/// `ordinate ≈ e^{intercept} · abscissa^{exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: Vec<(f64, f64)>,
}

impl ScalingFit {
    /// Prefactor `e^{intercept}`.
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }

    pub fn predict(&self, abscissa: f64) -> f64 {
        self.prefactor() * abscissa.powf(self.exponent)
    }

    /// Decades spanned by the abscissae.
    pub fn decades(&self) -> f64 {
        decades(&self.samples)
    }
}

fn decades(samples: &[(f64, f64)]) -> f64 {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    (hi / lo).log10()
}

/// Fit a power law through positive samples.
///
/// `min_decades` guards against fitting an exponent over a range too narrow
/// to mean anything; pass `0.0` to skip it.
pub fn power_law(samples: &[(f64, f64)], min_samples: usize, min_decades: f64) -> Result<ScalingFit> {
    if samples.len() < min_samples.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least {}",
            samples.len(),
            min_samples.max(2)
        )));
    }
    if let Some(&(x, y)) = samples.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::InsufficientData(format!("non-positive sample ({x}, {y}) in power-law fit")));
    }
    let span = decades(samples);
    if span + 1e-12 < min_decades {
        return Err(Error::InsufficientData(format!("abscissae span {span:.3} decades, need {min_decades}")));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae equal".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - exponent * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ScalingFit { exponent, intercept, r_squared, samples: samples.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let s: Vec<_> = [1e-4, 1e-3, 1e-2, 1e-1].iter().map(|&e: &f64| (e, 3.0 * e.powf(2.0 / 3.0))).collect();
        let fit = power_law(&s, 4, 2.0).unwrap();
        assert!((fit.exponent - 2.0 / 3.0).abs() < 1e-12);
        assert!((fit.prefactor() - 3.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.decades() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        assert!(power_law(&[(1.0, 1.0)], 4, 0.0).is_err());
        assert!(power_law(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 4.0)], 4, 2.0).is_err());
        assert!(power_law(&[(1.0, -1.0), (10.0, 2.0)], 2, 0.0).is_err());
    }

    #[test]
    fn noisy_fit_reports_lower_r_squared() {
        let s = vec![(1.0, 1.0), (10.0, 30.0), (100.0, 50.0), (1000.0, 2000.0)];
        let fit = power_law(&s, 4, 2.0).unwrap();
        assert!(fit.r_squared < 0.99 && fit.r_squared > 0.0);
    }

    proptest! {
        #[test]
        fn exponent_invariant_under_rescaling(p in -2.0f64..2.0, c in 0.01f64..100.0) {
            let s: Vec<_> = (0..5).map(|k| { let x = 10f64.powi(k - 2); (x, c * x.powf(p)) }).collect();
            let fit = power_law(&s, 4, 2.0).unwrap();
            prop_assert!((fit.exponent - p).abs() < 1e-9);
        }
    }
}
