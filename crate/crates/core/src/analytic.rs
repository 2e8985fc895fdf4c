//! Closed-form flows in the half-planes `S±` and the crossing functions.
//!
//! In `S±` the forcing is `sin(πω±x)` and the equation is linear, so every
//! orbit is `y(x) = y_p(x) + (y₀ − y_p(x₀)) e^{−a(x−x₀)}` with the periodic
//! particular solution `y_p(x) = −sin(πωx − φ)/√(ω²π² + a²)`,
//! `tan φ = ωπ/a`. For an orbit leaving the threshold at `x_i` this collapses
//! to `y = h(x − x_i, x_i)/√(ω²π² + a²)` with
//! `h(x̄, x_i) = e^{−a x̄} sin φ(x_i) − sin(ωπ x̄ + φ(x_i))`.

use std::f64::consts::PI;

use crate::model::{reduce_mod2, sin_pi, Frequency, OscillatorParams, Side};

/// The phase lags `φ±` of the particular solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseConstants {
    pub phi_plus: f64,
    pub phi_minus: f64,
}

impl PhaseConstants {
    pub fn get(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.phi_plus,
            Side::Minus => self.phi_minus,
        }
    }
}

pub fn phase_constants(params: &OscillatorParams) -> PhaseConstants {
    PhaseConstants {
        phi_plus: (params.omega(Side::Plus) * PI).atan2(params.a),
        phi_minus: (params.omega(Side::Minus) * PI).atan2(params.a),
    }
}

/// The closed-form flow of one half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlaneFlow {
    pub side: Side,
    pub a: f64,
    pub omega: Frequency,
    /// `φ = atan(ωπ/a)`.
    pub phi: f64,
    /// `√(ω²π² + a²)`.
    pub amplitude: f64,
}

impl HalfPlaneFlow {
    pub fn new(params: &OscillatorParams, side: Side) -> Self {
        let omega = params.frequencies.get(side);
        let w = omega.value() * PI;
        HalfPlaneFlow { side, a: params.a, omega, phi: w.atan2(params.a), amplitude: w.hypot(params.a) }
    }

    /// Phase offset `φ(x_i) = ωπx_i − φ`, returned in units of π and reduced.
    fn offset_phase(&self, x_i: f64) -> f64 {
        reduce_mod2(self.omega.phase(x_i) - self.phi / PI)
    }

    /// `φ(x_i)` in radians, reduced to `[-π, π)` before the shift.
    pub fn varphi(&self, x_i: f64) -> f64 {
        PI * self.omega.phase(x_i) - self.phi
    }

    /// Periodic particular solution `y_p(x)`.
    pub fn particular(&self, x: f64) -> f64 {
        -sin_pi(self.omega.phase(x) - self.phi / PI) / self.amplitude
    }

    /// `y(x)` for the orbit through `(x0, y0)`.
    pub fn flow(&self, x0: f64, y0: f64, x: f64) -> f64 {
        self.particular(x) + (y0 - self.particular(x0)) * (-self.a * (x - x0)).exp()
    }

    /// `y'(x)` along the orbit through `(x0, y0)`.
    pub fn slope(&self, x0: f64, y0: f64, x: f64) -> f64 {
        -self.a * self.flow(x0, y0, x) - self.omega.sin_pi(x)
    }

    /// `h(x̄, x_i)`, evaluated in the shifted form.
    pub fn h(&self, xbar: f64, x_i: f64) -> f64 {
        let off = self.offset_phase(x_i);
        (-self.a * xbar).exp() * sin_pi(off) - sin_pi(self.omega.phase(xbar) + off)
    }

    /// `∂h/∂x̄`.
    pub fn dh(&self, xbar: f64, x_i: f64) -> f64 {
        let off = self.offset_phase(x_i);
        let w = self.omega.value() * PI;
        -self.a * (-self.a * xbar).exp() * sin_pi(off)
            - w * sin_pi(self.omega.phase(xbar) + off + 0.5)
    }

    /// `h⁰(x̄, x_i)`, the `a → 0` envelope.
    pub fn h0(&self, xbar: f64, x_i: f64) -> f64 {
        let off = self.offset_phase(x_i);
        sin_pi(off) - sin_pi(self.omega.phase(xbar) + off)
    }

    /// `h^∞(x̄, x_i)`, the `x̄ → ∞` envelope.
    pub fn hinf(&self, xbar: f64, x_i: f64) -> f64 {
        -sin_pi(self.omega.phase(xbar) + self.offset_phase(x_i))
    }

    /// Nonnegative zeros of `h⁰`, ascending.
    pub fn h0_lattice(&self, x_i: f64) -> impl Iterator<Item = f64> {
        let period = 2.0 / self.omega.value();
        let shifted = 1.0 / self.omega.value() + 2.0 * self.phi / (self.omega.value() * PI) - 2.0 * x_i;
        Merge::new(Progression::from_zero(0.0, period), Progression::from_zero(shifted, period))
    }

    /// Nonnegative zeros of `h^∞`, ascending.
    pub fn hinf_lattice(&self, x_i: f64) -> impl Iterator<Item = f64> {
        let step = 1.0 / self.omega.value();
        Progression::from_zero(self.phi / (self.omega.value() * PI) - x_i, step)
    }
}

/// `Y±(x, x_i)`: the orbit leaving the threshold at `x_i`.
///
/// Evaluated from the unshifted general solution; [`shifted_flow`] is the
/// algebraically equivalent `h`-based form.
pub fn flow_solution(side: Side, x: f64, x_i: f64, params: &OscillatorParams) -> f64 {
    HalfPlaneFlow::new(params, side).flow(x_i, 0.0, x)
}

/// `y±(x̄, x_i) = h±(x̄, x_i)/√(ω²π² + a²)`.
pub fn shifted_flow(side: Side, xbar: f64, x_i: f64, params: &OscillatorParams) -> f64 {
    let flow = HalfPlaneFlow::new(params, side);
    flow.h(xbar, x_i) / flow.amplitude
}

pub fn h(side: Side, xbar: f64, x_i: f64, params: &OscillatorParams) -> f64 {
    HalfPlaneFlow::new(params, side).h(xbar, x_i)
}

/// First `count` nonnegative zeros of `h⁰`.
pub fn h0_zeros(side: Side, x_i: f64, params: &OscillatorParams, count: usize) -> Vec<f64> {
    HalfPlaneFlow::new(params, side).h0_lattice(x_i).take(count).collect()
}

/// First `count` nonnegative zeros of `h^∞`.
pub fn hinf_zeros(side: Side, x_i: f64, params: &OscillatorParams, count: usize) -> Vec<f64> {
    HalfPlaneFlow::new(params, side).hinf_lattice(x_i).take(count).collect()
}

/// The `a = 0` crossing map `(2/ω)(1 + ⌊ωx_i⌋) − x_i`.
pub fn p0_map(side: Side, x_i: f64) -> f64 {
    let w = match side {
        Side::Plus => 1.5,
        Side::Minus => 0.5,
    };
    (2.0 / w) * (1.0 + (w * x_i).floor()) - x_i
}

/// Arithmetic progression `offset + k·step`, started at its first nonnegative term.
#[derive(Debug, Clone)]
struct Progression {
    offset: f64,
    step: f64,
    k: f64,
}

impl Progression {
    fn from_zero(offset: f64, step: f64) -> Self {
        let k = (-offset / step).ceil();
        Progression { offset, step, k }
    }
}

impl Iterator for Progression {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let v = self.offset + self.k * self.step;
        self.k += 1.0;
        Some(v.max(0.0))
    }
}

/// Sorted merge of two ascending infinite sequences.
#[derive(Debug, Clone)]
pub(crate) struct Merge<A: Iterator<Item = f64>, B: Iterator<Item = f64>> {
    a: std::iter::Peekable<A>,
    b: std::iter::Peekable<B>,
}

impl<A: Iterator<Item = f64>, B: Iterator<Item = f64>> Merge<A, B> {
    pub(crate) fn new(a: A, b: B) -> Self {
        Merge { a: a.peekable(), b: b.peekable() }
    }
}

impl<A: Iterator<Item = f64>, B: Iterator<Item = f64>> Iterator for Merge<A, B> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        match (self.a.peek(), self.b.peek()) {
            (Some(x), Some(y)) => {
                if x <= y {
                    self.a.next()
                } else {
                    self.b.next()
                }
            }
            (Some(_), None) => self.a.next(),
            (None, _) => self.b.next(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(a: f64) -> OscillatorParams {
        OscillatorParams::new(a).unwrap()
    }

    #[test]
    fn phase_constant_examples() {
        let pc = phase_constants(&params(1.5 * PI));
        assert!((pc.phi_plus - PI / 4.0).abs() < 1e-15);
        let pc = phase_constants(&params(1e-12));
        assert!((pc.phi_minus - PI / 2.0).abs() < 1e-10);
        let pc = phase_constants(&params(1e6));
        assert!(pc.phi_plus < 1e-5 && pc.phi_minus < 1e-5);
        for a in [0.01, 1.0, 37.0] {
            let pc = phase_constants(&params(a));
            assert!((pc.phi_plus.tan() - 1.5 * PI / a).abs() < 1e-12 * (1.5 * PI / a).max(1.0));
        }
    }

    #[test]
    fn flow_initial_value_and_slope() {
        let p = params(0.3);
        for side in [Side::Plus, Side::Minus] {
            for x_i in [0.2, 3.7, 41.0] {
                assert!(flow_solution(side, x_i, x_i, &p).abs() < 1e-15);
                let flow = HalfPlaneFlow::new(&p, side);
                let expect = -flow.omega.sin_pi(x_i);
                assert!((flow.slope(x_i, 0.0, x_i) - expect).abs() < 1e-14);
            }
        }
    }

    /// Classical RK4 on the smooth half-plane equation, used as the oracle.
    fn rk4(a: f64, w: f64, x0: f64, y0: f64, x1: f64, n: usize) -> f64 {
        let f = |x: f64, y: f64| -a * y - (PI * w * x).sin();
        let hstep = (x1 - x0) / n as f64;
        let (mut x, mut y) = (x0, y0);
        for _ in 0..n {
            let k1 = f(x, y);
            let k2 = f(x + 0.5 * hstep, y + 0.5 * hstep * k1);
            let k3 = f(x + 0.5 * hstep, y + 0.5 * hstep * k2);
            let k4 = f(x + hstep, y + hstep * k3);
            y += hstep / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x += hstep;
        }
        y
    }

    #[test]
    fn flow_matches_numerical_integration() {
        let p = params(0.01);
        let exact = flow_solution(Side::Minus, 3.0, 0.5, &p);
        let numeric = rk4(0.01, 0.5, 0.5, 0.0, 3.0, 20_000);
        assert!((exact - numeric).abs() < 1e-9, "{exact} vs {numeric}");
    }

    #[test]
    fn h_examples() {
        let p = params(1.0);
        assert_eq!(h(Side::Plus, 0.0, 2.3, &p).abs() < 1e-15, true);
        // the orbit from 10/3 returns before x̄ = 4/3, so h₊ has already changed sign
        assert!(h(Side::Plus, 0.5, 10.0 / 3.0, &p) > 0.0);
        assert!(h(Side::Plus, 4.0 / 3.0, 10.0 / 3.0, &p) < 0.0);
        let flow = HalfPlaneFlow::new(&p, Side::Plus);
        let xbar = 30.0;
        assert!((flow.h(xbar, 1.1) - flow.hinf(xbar, 1.1)).abs() < (-xbar).exp() * 1.0001);
    }

    #[test]
    fn zero_lattices() {
        let small = params(1e-9);
        let z = h0_zeros(Side::Plus, 10.0 / 3.0, &small, 4);
        let first_positive = z.iter().copied().find(|&v| v > 1e-6).unwrap();
        assert!((first_positive - 4.0 / 3.0).abs() < 1e-6);
        let large = params(1e9);
        let z = hinf_zeros(Side::Plus, 10.0 / 3.0, &large, 3);
        let first_positive = z.iter().copied().find(|&v| v > 1e-6).unwrap();
        assert!((first_positive - 2.0 / 3.0).abs() < 1e-6);
        let p = params(0.7);
        let z = h0_zeros(Side::Minus, 1.3, &p, 12);
        for k in 0..4 {
            let lattice = 4.0 * k as f64;
            assert!(z.iter().any(|&v| (v - lattice).abs() < 1e-12), "missing {lattice}");
        }
        assert!(z.windows(2).all(|w| w[0] <= w[1]));
        let flow = HalfPlaneFlow::new(&p, Side::Minus);
        for &v in &z {
            assert!(flow.h0(v, 1.3).abs() < 1e-12);
        }
        for v in hinf_zeros(Side::Minus, 1.3, &p, 6) {
            assert!(flow.hinf(v, 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn p0_examples() {
        assert_eq!(p0_map(Side::Minus, 0.5), 3.5);
        assert_eq!(p0_map(Side::Minus, 1e-300), 4.0 - 1e-300);
        for x in [0.1, 0.3, 0.6] {
            assert!((p0_map(Side::Plus, 4.0 - x) - (4.0 + x)).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn shifted_form_agrees(x_i in 0.0f64..40.0, xbar in 0.0f64..12.0, a in 0.005f64..20.0) {
            let p = params(a);
            for side in [Side::Plus, Side::Minus] {
                let direct = flow_solution(side, x_i + xbar, x_i, &p);
                let shifted = shifted_flow(side, xbar, x_i, &p);
                prop_assert!((direct - shifted).abs() < 1e-12, "{} vs {}", direct, shifted);
            }
        }

        #[test]
        fn sandwich_between_envelopes(x_i in 0.0f64..8.0, xbar in 1e-3f64..10.0, a in 0.01f64..5.0) {
            // beyond a·x̄ ≈ 30 the exponential term is below double resolution
            prop_assume!(a * xbar < 30.0);
            let p = params(a);
            for side in [Side::Plus, Side::Minus] {
                let flow = HalfPlaneFlow::new(&p, side);
                let s = flow.varphi(x_i).sin();
                let (lo, mid, hi) = (flow.hinf(xbar, x_i), flow.h(xbar, x_i), flow.h0(xbar, x_i));
                if s > 1e-9 {
                    prop_assert!(lo < mid && mid < hi);
                } else if s < -1e-9 {
                    prop_assert!(hi < mid && mid < lo);
                }
            }
        }
    }
}
