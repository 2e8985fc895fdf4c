//! Domain types, the two forcing models and threshold classification.
//!
//! The oscillator is written autonomously as `x' = 1`, `y' = -a y - f(x, λ)`
//! where `λ = sign(y)` off the threshold `y = 0`. The forcing `f` is either
//! a convex combination of two sinusoids (linear switching) or a single
//! sinusoid whose frequency depends on `λ` (nonlinear switching).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::regularization::transition::TransitionFunction;

/// How the switching multiplier enters the forcing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchingModel {
    /// `f_L(x, λ) = ½(1+λ) sin(πω₊x) + ½(1−λ) sin(πω₋x)`.
    Linear,
    /// `f_N(x, λ) = sin(πx [(1+λ)ω₊ + (1−λ)ω₋] / 2)`.
    Nonlinear,
}

impl fmt::Display for SwitchingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchingModel::Linear => write!(f, "linear"),
            SwitchingModel::Nonlinear => write!(f, "nonlinear"),
        }
    }
}

impl std::str::FromStr for SwitchingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "l" => Ok(SwitchingModel::Linear),
            "nonlinear" | "n" => Ok(SwitchingModel::Nonlinear),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// A positive rational frequency `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frequency {
    pub num: u32,
    pub den: u32,
}

impl Frequency {
    pub const fn new(num: u32, den: u32) -> Self {
        Frequency { num, den }
    }

    pub fn value(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// `ω·x` reduced modulo 2, i.e. the argument of `sin(πωx)` in units of π.
    pub fn phase(self, x: f64) -> f64 {
        reduce_mod2(f64::from(self.num) * x / f64::from(self.den))
    }

    pub fn sin_pi(self, x: f64) -> f64 {
        sin_pi(self.phase(x))
    }

    pub fn cos_pi(self, x: f64) -> f64 {
        cos_pi(self.phase(x))
    }
}

/// Reduce `t` into `[-1, 1)`, the fundamental period of `sin(πt)`.
pub fn reduce_mod2(t: f64) -> f64 {
    let r = t.rem_euclid(2.0);
    if r >= 1.0 {
        r - 2.0
    } else {
        r
    }
}

/// `sin(πt)` with the argument reduced before evaluation.
pub fn sin_pi(t: f64) -> f64 {
    let r = reduce_mod2(t);
    // fold onto [-1/2, 1/2] where sin is best conditioned
    let folded = if r > 0.5 {
        1.0 - r
    } else if r < -0.5 {
        -1.0 - r
    } else {
        r
    };
    (PI * folded).sin()
}

/// `cos(πt)` with the argument reduced before evaluation.
pub fn cos_pi(t: f64) -> f64 {
    sin_pi(t + 0.5)
}

/// The pair of forcing frequencies used above and below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frequencies {
    pub plus: Frequency,
    pub minus: Frequency,
}

impl Frequencies {
    pub const STANDARD: Frequencies = Frequencies {
        plus: Frequency::new(3, 2),
        minus: Frequency::new(1, 2),
    };

    pub fn is_standard(&self) -> bool {
        *self == Self::STANDARD
    }

    pub fn get(&self, side: Side) -> Frequency {
        match side {
            Side::Plus => self.plus,
            Side::Minus => self.minus,
        }
    }

    /// Forcing of `model` at `x` with multiplier `λ ∈ [-1, 1]`.
    pub fn forcing(&self, model: SwitchingModel, x: f64, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok(self.forcing_unchecked(model, x, lambda))
    }

    pub(crate) fn forcing_unchecked(&self, model: SwitchingModel, x: f64, lambda: f64) -> f64 {
        match model {
            SwitchingModel::Linear => {
                0.5 * (1.0 + lambda) * self.plus.sin_pi(x)
                    + 0.5 * (1.0 - lambda) * self.minus.sin_pi(x)
            }
            SwitchingModel::Nonlinear => {
                if lambda == 1.0 {
                    self.plus.sin_pi(x)
                } else if lambda == -1.0 {
                    self.minus.sin_pi(x)
                } else {
                    sin_pi(self.nonlinear_phase(x, lambda))
                }
            }
        }
    }

    /// `∂f/∂λ` at `(x, λ)`.
    pub(crate) fn forcing_dlambda(&self, model: SwitchingModel, x: f64, lambda: f64) -> f64 {
        match model {
            SwitchingModel::Linear => 0.5 * (self.plus.sin_pi(x) - self.minus.sin_pi(x)),
            SwitchingModel::Nonlinear => {
                let dw = 0.5 * (self.plus.value() - self.minus.value());
                PI * x * dw * cos_pi(self.nonlinear_phase(x, lambda))
            }
        }
    }

    /// Argument (in units of π) of the nonlinear forcing, reduced mod 2.
    fn nonlinear_phase(&self, x: f64, lambda: f64) -> f64 {
        // ω(λ)·x split so that the λ-independent part is reduced exactly
        let wp = self.plus.value();
        let wm = self.minus.value();
        let mean = reduce_mod2(0.5 * (wp + wm) * x);
        let half_diff = reduce_mod2(0.5 * (wp - wm) * x);
        reduce_mod2(mean + lambda * half_diff + lambda * (0.5 * (wp - wm) * x - half_diff))
    }
}

impl Default for Frequencies {
    fn default() -> Self {
        Self::STANDARD
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&lambda) || lambda.is_nan() {
        return Err(Error::Domain(format!("switching multiplier λ = {lambda} outside [-1, 1]")));
    }
    Ok(())
}

/// Forcing with the standard frequencies `ω₊ = 3/2`, `ω₋ = 1/2`.
pub fn forcing(model: SwitchingModel, x: f64, lambda: f64) -> Result<f64> {
    Frequencies::STANDARD.forcing(model, x, lambda)
}

/// One of the two half-planes `S₊ = {y > 0}` and `S₋ = {y < 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn lambda(self) -> f64 {
        self.sign()
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }

    pub fn of(y: f64) -> Option<Side> {
        if y > 0.0 {
            Some(Side::Plus)
        } else if y < 0.0 {
            Some(Side::Minus)
        } else {
            None
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Plus => "+",
            Side::Minus => "-",
        })
    }
}

/// Parameters of the oscillator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// Damping rate `a > 0`.
    pub a: f64,
    pub frequencies: Frequencies,
    /// Half-width of the switching layer; `0` selects the discontinuous system.
    pub epsilon: f64,
    /// Transition function, used only when `epsilon > 0`.
    pub psi: TransitionFunction,
}

impl OscillatorParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("damping a = {a} must be positive")));
        }
        Ok(OscillatorParams {
            a,
            frequencies: Frequencies::STANDARD,
            epsilon: 0.0,
            psi: TransitionFunction::Cubic,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("layer width ε = {epsilon} must be ≥ 0")));
        }
        if epsilon > 0.0 && self.a * epsilon >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "a·ε = {} must be < 1 for the layer to have fold points",
                self.a * epsilon
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_psi(mut self, psi: TransitionFunction) -> Result<Self> {
        psi.validate()?;
        self.psi = psi;
        Ok(self)
    }

    /// Override `ω±`; results are then flagged non-standard.
    pub fn with_frequencies(mut self, frequencies: Frequencies) -> Result<Self> {
        if frequencies.plus.num == 0
            || frequencies.minus.num == 0
            || frequencies.plus.den == 0
            || frequencies.minus.den == 0
        {
            return Err(Error::InvalidParameter("frequencies must be positive".into()));
        }
        self.frequencies = frequencies;
        Ok(self)
    }

    pub fn is_standard(&self) -> bool {
        self.frequencies.is_standard()
    }

    pub fn is_regularized(&self) -> bool {
        self.epsilon > 0.0
    }

    pub fn omega(&self, side: Side) -> f64 {
        self.frequencies.get(side).value()
    }

    pub(crate) fn require_standard(&self, what: &str) -> Result<()> {
        if self.is_standard() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{what} is tabulated for the standard frequencies ω₊ = 3/2, ω₋ = 1/2 only"
            )))
        }
    }
}

/// Oscillator parameters of an RL circuit driven by `V(t) = -L sin(πωt)`.
pub fn params_from_circuit(resistance: f64, inductance: f64) -> Result<OscillatorParams> {
    if !(resistance > 0.0) || !(inductance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "circuit needs R > 0 and L > 0 (got R = {resistance}, L = {inductance})"
        )));
    }
    OscillatorParams::new(resistance / inductance)
}

/// Identifier of a sliding branch (discontinuous) or critical branch (layer).
///
/// For the linear model `index` is the interval index `k` of
/// `(2/3 + 2k, 4/3 + 2k)`; for the nonlinear model it is `n` of
/// `(2n/3, 2n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchId {
    pub model: SwitchingModel,
    pub index: i64,
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.model {
            SwitchingModel::Linear => write!(f, "L{}", self.index),
            SwitchingModel::Nonlinear => write!(f, "N{}", self.index),
        }
    }
}

/// Dynamical mode of a hybrid state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    FlowPlus,
    FlowMinus,
    Sliding(BranchId),
    Layer,
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::FlowPlus => "flow+",
            Mode::FlowMinus => "flow-",
            Mode::Sliding(_) => "slide",
            Mode::Layer => "layer",
        }
    }

    pub fn flow(side: Side) -> Mode {
        match side {
            Side::Plus => Mode::FlowPlus,
            Side::Minus => Mode::FlowMinus,
        }
    }
}

/// A point of the hybrid system. In layer scale `y` holds `v = y/ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub x: f64,
    pub y: f64,
    pub mode: Mode,
}

impl HybridState {
    /// A state off the threshold; the mode follows the sign of `y`.
    pub fn off_threshold(x: f64, y: f64) -> Result<Self> {
        let side = Side::of(y).ok_or(Error::OnThreshold { x })?;
        Ok(HybridState { x, y, mode: Mode::flow(side) })
    }

    /// A state on the threshold that departs into `side`.
    pub fn departing(x: f64, side: Side) -> Self {
        HybridState { x, y: 0.0, mode: Mode::flow(side) }
    }

    pub fn sliding(x: f64, branch: BranchId) -> Self {
        HybridState { x, y: 0.0, mode: Mode::Sliding(branch) }
    }

    /// Checks the mode/coordinate invariants. `v` scale when `mode == Layer`.
    pub fn check(&self) -> Result<()> {
        let ok = match self.mode {
            Mode::FlowPlus => self.y >= 0.0,
            Mode::FlowMinus => self.y <= 0.0,
            Mode::Sliding(_) => self.y == 0.0,
            Mode::Layer => self.y.abs() <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "state (x = {}, y = {}) inconsistent with mode {}",
                self.x,
                self.y,
                self.mode.label()
            )))
        }
    }
}

/// Vector field `(1, -a y - f(x, sign y))` off the threshold.
pub fn vector_field(
    model: SwitchingModel,
    params: &OscillatorParams,
    state: &HybridState,
) -> Result<(f64, f64)> {
    let side = Side::of(state.y).ok_or(Error::OnThreshold { x: state.x })?;
    let f = params.frequencies.forcing_unchecked(model, state.x, side.lambda());
    Ok((1.0, -params.a * state.y - f))
}

/// Classification of a point `(x, 0)` of the switching threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Attracting,
    Repelling,
    Crossing,
    TangencyPlus,
    TangencyMinus,
}

/// Tolerance (in units of the phase `ωx`) for recognising tangency points.
const TANGENCY_PHASE_TOL: f64 = 1e-12;

/// Classify `(x, 0)` from the signs of the half-plane fields `-sin(πω±x)`.
///
/// At `x = 2n` both fields are tangent; the point is reported as
/// `TangencyMinus`.
pub fn classify_threshold_point(x: f64) -> Region {
    classify_with(&Frequencies::STANDARD, x)
}

pub fn classify_with(freqs: &Frequencies, x: f64) -> Region {
    let near_integer = |t: f64| {
        let r = reduce_mod2(t);
        r.abs() < TANGENCY_PHASE_TOL || (r.abs() - 1.0).abs() < TANGENCY_PHASE_TOL
    };
    let scale = |fr: Frequency| fr.value() * x.abs().max(1.0);
    if near_integer(freqs.minus.value() * x) || freqs.minus.sin_pi(x).abs() < 1e-15 * scale(freqs.minus) {
        return Region::TangencyMinus;
    }
    if near_integer(freqs.plus.value() * x) || freqs.plus.sin_pi(x).abs() < 1e-15 * scale(freqs.plus) {
        return Region::TangencyPlus;
    }
    let field_plus = -freqs.plus.sin_pi(x);
    let field_minus = -freqs.minus.sin_pi(x);
    if field_plus < 0.0 && field_minus > 0.0 {
        Region::Attracting
    } else if field_plus > 0.0 && field_minus < 0.0 {
        Region::Repelling
    } else {
        Region::Crossing
    }
}

/// `ẏ` of the half-plane field of `side` on the threshold.
pub(crate) fn threshold_field(params: &OscillatorParams, side: Side, x: f64) -> f64 {
    -params.frequencies.get(side).sin_pi(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_examples() {
        let v = forcing(SwitchingModel::Linear, 0.4, 1.0).unwrap();
        assert!((v - (1.5 * PI * 0.4).sin()).abs() < 1e-14);
        let v = forcing(SwitchingModel::Nonlinear, 2.0, 0.0).unwrap();
        assert!(v.abs() < 1e-15);
        let v = forcing(SwitchingModel::Linear, 0.5, 0.0).unwrap();
        assert!((v - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn forcing_rejects_lambda_out_of_range() {
        assert!(matches!(forcing(SwitchingModel::Linear, 0.3, 1.5), Err(Error::Domain(_))));
        assert!(forcing(SwitchingModel::Nonlinear, 0.3, f64::NAN).is_err());
    }

    #[test]
    fn vector_field_examples() {
        let p = OscillatorParams::new(1.0).unwrap();
        let s = HybridState::off_threshold(0.0, 1.0).unwrap();
        for model in [SwitchingModel::Linear, SwitchingModel::Nonlinear] {
            let (dx, dy) = vector_field(model, &p, &s).unwrap();
            assert_eq!(dx, 1.0);
            assert!((dy + 1.0).abs() < 1e-15);
        }
        let p = OscillatorParams::new(0.5).unwrap();
        let s = HybridState::off_threshold(1.0 / 3.0, -2.0).unwrap();
        let (_, dy) = vector_field(SwitchingModel::Nonlinear, &p, &s).unwrap();
        assert!((dy - 0.5).abs() < 1e-14);

        // independent evaluation: λ = +1 gives sin(3πx/2)
        let p = OscillatorParams::new(2.0).unwrap();
        let s = HybridState::off_threshold(0.9, 0.1).unwrap();
        let (_, dy) = vector_field(SwitchingModel::Linear, &p, &s).unwrap();
        let expect = -0.2 - (1.35 * PI).sin();
        assert!((dy - expect).abs() < 1e-14);
    }

    #[test]
    fn vector_field_rejects_threshold() {
        let p = OscillatorParams::new(1.0).unwrap();
        let s = HybridState { x: 0.3, y: 0.0, mode: Mode::FlowPlus };
        assert!(matches!(vector_field(SwitchingModel::Linear, &p, &s), Err(Error::OnThreshold { .. })));
    }

    #[test]
    fn region_examples() {
        assert_eq!(classify_threshold_point(3.0), Region::Attracting);
        assert_eq!(classify_threshold_point(1.0), Region::Repelling);
        assert_eq!(classify_threshold_point(2.0 / 3.0), Region::TangencyPlus);
        assert_eq!(classify_threshold_point(2.0), Region::TangencyMinus);
        assert_eq!(classify_threshold_point(0.5), Region::Crossing);
        assert_eq!(classify_threshold_point(3.5), Region::Crossing);
        assert_eq!(classify_threshold_point(103.0), Region::Attracting);
    }

    #[test]
    fn region_signs_on_dense_grid() {
        let p = OscillatorParams::new(1.0).unwrap();
        for k in 1..4000 {
            let x = k as f64 * 0.001 + 1e-4;
            let up = threshold_field(&p, Side::Plus, x);
            let down = threshold_field(&p, Side::Minus, x);
            match classify_threshold_point(x) {
                Region::Attracting => assert!(up < 0.0 && down > 0.0, "x = {x}"),
                Region::Repelling => assert!(up > 0.0 && down < 0.0, "x = {x}"),
                Region::Crossing => assert!(up * down > 0.0, "x = {x}"),
                _ => {}
            }
        }
    }

    #[test]
    fn circuit_params() {
        assert_eq!(params_from_circuit(1.0, 1.0).unwrap().a, 1.0);
        assert!((params_from_circuit(2.0, 100.0).unwrap().a - 0.02).abs() < 1e-16);
        assert!(params_from_circuit(0.0, 1.0).is_err());
        assert!(params_from_circuit(1.0, -1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(OscillatorParams::new(0.0).is_err());
        assert!(OscillatorParams::new(-1.0).is_err());
        assert!(OscillatorParams::new(1.0).unwrap().with_epsilon(-0.1).is_err());
        assert!(OscillatorParams::new(10.0).unwrap().with_epsilon(0.2).is_err());
        let p = OscillatorParams::new(1.0)
            .unwrap()
            .with_frequencies(Frequencies { plus: Frequency::new(2, 1), minus: Frequency::new(1, 2) })
            .unwrap();
        assert!(!p.is_standard());
    }

    #[test]
    fn reduced_trig_is_accurate_at_large_x() {
        // sin(3π/2 · (1000 + 1/7)) evaluated through exact reduction
        let x = 1000.0 + 1.0 / 7.0;
        let direct = Frequency::new(3, 2).sin_pi(x);
        let reduced = (1.5 * PI * (1.0 / 7.0)).sin();
        assert!((direct - reduced).abs() < 1e-12);
    }

    #[test]
    fn hybrid_state_invariants() {
        assert!(HybridState::off_threshold(1.0, 0.0).is_err());
        let bad = HybridState { x: 0.0, y: -1.0, mode: Mode::FlowPlus };
        assert!(bad.check().is_err());
        let ok = HybridState { x: 0.0, y: 0.5, mode: Mode::Layer };
        assert!(ok.check().is_ok());
    }
}
