//! Transition functions `ψ` that smooth the switching multiplier across
//! the layer `|v| ≤ 1`.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// A monotone map of `[-1, 1]` onto itself, saturated to `±1` outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransitionFunction {
    /// `ψ(v) = v (3 − v²) / 2`.
    #[default]
    Cubic,
    /// User polynomial `Σ cₖ vᵏ` with coefficients in ascending order.
    Polynomial { coefficients: Vec<f64> },
}

/// Outcome of one property check run on a transition function.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

const VALIDATION_SAMPLES: usize = 2001;

impl TransitionFunction {
    /// Load a user polynomial from a JSON file `{"coefficients": [...]}`.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let psi = Self::parse_json(text)?;
        psi.validate()?;
        Ok(psi)
    }

    /// Parse without running the property checks; accepts either the tagged
    /// form or a bare `{"coefficients": [...]}`.
    pub fn parse_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            coefficients: Vec<f64>,
        }
        let psi: TransitionFunction = match serde_json::from_str::<TransitionFunction>(text) {
            Ok(p) => p,
            Err(_) => {
                let raw: Raw = serde_json::from_str(text)?;
                TransitionFunction::Polynomial { coefficients: raw.coefficients }
            }
        };
        Ok(psi)
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransitionFunction::Cubic => "cubic",
            TransitionFunction::Polynomial { .. } => "user",
        }
    }

    /// `ψ(v)`, equal to `sign(v)` for `|v| ≥ 1`.
    pub fn psi(&self, v: f64) -> f64 {
        if v >= 1.0 {
            return 1.0;
        }
        if v <= -1.0 {
            return -1.0;
        }
        self.raw(v, 0)
    }

    pub fn psi_prime(&self, v: f64) -> f64 {
        if v.abs() >= 1.0 {
            return 0.0;
        }
        self.raw(v, 1)
    }

    pub fn psi_second(&self, v: f64) -> f64 {
        if v.abs() >= 1.0 {
            return 0.0;
        }
        self.raw(v, 2)
    }

    /// One-sided `ψ''(±1)` from inside the layer; `sign` selects the end.
    pub fn boundary_curvature(&self, sign: f64) -> f64 {
        self.raw(sign.signum(), 2)
    }

    /// Derivatives of the unsaturated polynomial; used for one-sided limits at `±1`.
    fn raw(&self, v: f64, order: u32) -> f64 {
        match self {
            TransitionFunction::Cubic => match order {
                0 => 0.5 * v * (3.0 - v * v),
                1 => 1.5 * (1.0 - v * v),
                _ => -3.0 * v,
            },
            TransitionFunction::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(order as usize)
                .map(|(k, &c)| {
                    let k = k as u32;
                    let falling: f64 = (0..order).map(|j| f64::from(k - j)).product();
                    c * falling * v.powi((k - order) as i32)
                })
                .sum(),
        }
    }

    /// `ψ⁻¹(λ)` for `λ ∈ [-1, 1]`, by safeguarded Newton/bisection to `1e-13`.
    pub fn inverse(&self, lambda: f64) -> Result<f64> {
        if lambda.is_nan() || lambda.abs() > 1.0 {
            return Err(Error::Domain(format!("ψ⁻¹ undefined at λ = {lambda}")));
        }
        if lambda == 1.0 || lambda == -1.0 {
            return Ok(lambda);
        }
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        let mut v = lambda.clamp(-0.999, 0.999);
        for _ in 0..200 {
            let g = self.raw(v, 0) - lambda;
            if g > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            if hi - lo < 1e-13 || g == 0.0 {
                return Ok(v);
            }
            let d = self.raw(v, 1);
            let newton = v - g / d;
            if d > 0.0 && newton > lo && newton < hi {
                if (newton - v).abs() < 1e-14 {
                    return Ok(newton);
                }
                v = newton;
            } else {
                v = 0.5 * (lo + hi);
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Run the full property suite; every check is reported.
    pub fn property_checks(&self) -> Vec<PropertyCheck> {
        let mut checks = Vec::new();
        if let TransitionFunction::Polynomial { coefficients } = self {
            checks.push(PropertyCheck {
                name: "finite-coefficients",
                passed: !coefficients.is_empty() && coefficients.iter().all(|c| c.is_finite()),
                detail: format!("{} coefficients", coefficients.len()),
            });
        }
        let at_plus = self.raw(1.0, 0);
        let at_minus = self.raw(-1.0, 0);
        checks.push(PropertyCheck {
            name: "boundary-values",
            passed: (at_plus - 1.0).abs() < 1e-12 && (at_minus + 1.0).abs() < 1e-12,
            detail: format!("ψ(1) = {at_plus}, ψ(-1) = {at_minus}"),
        });
        let mut min_slope = f64::INFINITY;
        let mut at = 0.0;
        for i in 1..VALIDATION_SAMPLES {
            let v = -1.0 + 2.0 * i as f64 / VALIDATION_SAMPLES as f64;
            let d = self.raw(v, 1);
            if d < min_slope {
                min_slope = d;
                at = v;
            }
        }
        checks.push(PropertyCheck {
            name: "monotone",
            passed: min_slope > 0.0,
            detail: format!("min ψ' = {min_slope:.6e} at v = {at:.4}"),
        });
        let s_plus = self.raw(1.0, 2);
        let s_minus = self.raw(-1.0, 2);
        checks.push(PropertyCheck {
            name: "boundary-curvature",
            passed: s_plus < 0.0 && s_minus > 0.0,
            detail: format!("ψ''(1) = {s_plus}, ψ''(-1) = {s_minus}"),
        });
        checks
    }

    pub fn validate(&self) -> Result<()> {
        let failed: Vec<String> = self
            .property_checks()
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("transition function fails: {}", failed.join("; "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cubic_passes_property_suite() {
        let psi = TransitionFunction::Cubic;
        assert!(psi.property_checks().iter().all(|c| c.passed));
        assert_eq!(psi.psi(2.0), 1.0);
        assert_eq!(psi.psi(-7.0), -1.0);
        assert_eq!(psi.psi_prime(0.0), 1.5);
    }

    #[test]
    fn inverse_matches_bisection_oracle() {
        // v(3 - v²)/2 = 0.5 ⇔ v³ - 3v + 1 = 0, root 2 cos(4π/9)
        let v = TransitionFunction::Cubic.inverse(0.5).unwrap();
        let exact = 2.0 * (4.0 * std::f64::consts::PI / 9.0).cos();
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn inverse_rejects_out_of_range() {
        assert!(TransitionFunction::Cubic.inverse(1.2).is_err());
    }

    #[test]
    fn polynomial_equivalent_to_cubic() {
        let poly = TransitionFunction::Polynomial { coefficients: vec![0.0, 1.5, 0.0, -0.5] };
        for i in 0..=40 {
            let v = -1.0 + i as f64 * 0.05;
            let c = TransitionFunction::Cubic;
            assert!((poly.psi(v) - c.psi(v)).abs() < 1e-14);
            assert!((poly.psi_prime(v) - c.psi_prime(v)).abs() < 1e-14);
            assert!((poly.psi_second(v) - c.psi_second(v)).abs() < 1e-14);
        }
        assert!(poly.validate().is_ok());
    }

    #[test]
    fn linear_ramp_is_rejected() {
        // ψ(v) = v has zero curvature at the boundary
        let ramp = TransitionFunction::Polynomial { coefficients: vec![0.0, 1.0] };
        let err = ramp.validate().unwrap_err();
        assert!(err.to_string().contains("boundary-curvature"));
    }

    #[test]
    fn json_round_trip() {
        let psi = TransitionFunction::from_json_str(r#"{"coefficients": [0, 1.5, 0, -0.5]}"#).unwrap();
        assert!(matches!(psi, TransitionFunction::Polynomial { .. }));
        let tagged = TransitionFunction::from_json_str(r#"{"kind": "cubic"}"#).unwrap();
        assert_eq!(tagged, TransitionFunction::Cubic);
        assert!(TransitionFunction::from_json_str(r#"{"coefficients": [0, 2]}"#).is_err());
    }

    proptest! {
        #[test]
        fn inverse_is_left_inverse(v in -0.9999f64..0.9999) {
            let psi = TransitionFunction::Cubic;
            let back = psi.inverse(psi.psi(v)).unwrap();
            prop_assert!((back - v).abs() < 1e-9);
        }

        #[test]
        fn psi_is_monotone(v in -1.0f64..1.0, dv in 1e-6f64..0.5) {
            let psi = TransitionFunction::Cubic;
            prop_assert!(psi.psi(v + dv) > psi.psi(v) || v + dv >= 1.0);
        }
    }
}
