//! Crossing maps between successive threshold contacts and the
//! non-sliding period-4 orbit of the linear system.

use std::f64::consts::PI;

use crate::analytic::{HalfPlaneFlow, Merge};
use crate::error::{Error, Result};
use crate::model::{sin_pi, OscillatorParams, Side};
use crate::roots::bisect;

/// Bracket width at which crossing bisection stops.
pub const CROSSING_XTOL: f64 = 1e-13;
/// `|∂h/∂x̄|` below which a root is reported as a possible grazing contact.
pub const GRAZING_SLOPE: f64 = 1e-8;
/// Default scan horizon in `x̄`.
pub const DEFAULT_HORIZON: f64 = 500.0;

/// Outcome of one crossing-map evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareResult {
    pub x_next: f64,
    /// `|h|` at the returned root.
    pub residual: f64,
    /// Scan bracket in `x̄ = x − x_i`, with a sign change of `h` across it.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub grazing_suspect: bool,
}

/// Check that an orbit may leave `(x_i, 0)` into `side`.
pub fn departure_admissible(flow: &HalfPlaneFlow, x_i: f64) -> bool {
    let s = flow.side.sign();
    let first = -flow.omega.sin_pi(x_i);
    // lattice points such as 106/3 are not representable; their rounding
    // error grows with |x|
    if first.abs() > 1e-14 * (1.0 + x_i.abs()) {
        return first * s > 0.0;
    }
    // tangency: the second derivative decides
    let second = -flow.omega.value() * PI * sin_pi(flow.omega.phase(x_i) + 0.5);
    second * s > 0.0
}

/// Next contact with `y = 0` of the orbit leaving `(x_i, 0)` into `side`.
pub fn next_crossing(side: Side, x_i: f64, params: &OscillatorParams, tol: f64) -> Result<PoincareResult> {
    next_crossing_with_horizon(side, x_i, params, tol, DEFAULT_HORIZON)
}

pub fn next_crossing_with_horizon(
    side: Side,
    x_i: f64,
    params: &OscillatorParams,
    tol: f64,
    horizon: f64,
) -> Result<PoincareResult> {
    let flow = HalfPlaneFlow::new(params, side);
    if !departure_admissible(&flow, x_i) {
        return Err(Error::InadmissibleDeparture { side: side.name(), x: x_i });
    }
    let s = side.sign();
    let h = |xbar: f64| flow.h(xbar, x_i);
    let w = flow.omega.value();
    let step = (1.0 / (8.0 * w)).min(1.0 / (4.0 * params.a));

    let grid = (1..).map(move |k| k as f64 * step);
    let lattice = Merge::new(flow.h0_lattice(x_i), flow.hinf_lattice(x_i));
    let mut probes = Merge::new(grid, lattice).filter(|&p| p > 0.0).peekable();

    // The orbit may return before the first probe; pull the first probe in
    // towards 0 until it sits on the departure side.
    let first = *probes.peek().expect("probe sequence is infinite");
    let mut start = first;
    let mut halvings = 0;
    while h(start) * s <= 0.0 {
        start *= 0.5;
        halvings += 1;
        if halvings > 80 {
            return Err(Error::InadmissibleDeparture { side: side.name(), x: x_i });
        }
    }

    let mut prev = start;
    let mut bracket = None;
    if halvings > 0 {
        bracket = Some((start, first));
    } else {
        probes.next();
        for p in probes {
            if p <= prev {
                continue;
            }
            if p > horizon {
                break;
            }
            if h(p) * s <= 0.0 {
                bracket = Some((prev, p));
                break;
            }
            prev = p;
        }
    }
    let (lo, hi) = bracket.ok_or(Error::NoRoot { x: x_i, horizon })?;
    let root = bisect(h, lo, hi, CROSSING_XTOL)?;
    let residual = h(root.root).abs();
    if residual > tol {
        return Err(Error::Tolerance(format!(
            "crossing from x = {x_i}: |h| = {residual:e} exceeds {tol:e}"
        )));
    }
    Ok(PoincareResult {
        x_next: x_i + root.root,
        residual,
        bracket: (lo, hi),
        iterations: root.iterations,
        grazing_suspect: flow.dh(root.root, x_i).abs() < GRAZING_SLOPE,
    })
}

/// Default residual tolerance on `|h|` used by the composite maps.
pub const MAP_TOL: f64 = 1e-10;

/// `P(x, a) = P₊ᵃ(P₋ᵃ(x))`.
pub fn composite_map(x: f64, a: f64) -> Result<f64> {
    composite_map_with(&OscillatorParams::new(a)?, x)
}

pub fn composite_map_with(params: &OscillatorParams, x: f64) -> Result<f64> {
    let down = next_crossing(Side::Minus, x, params, MAP_TOL)?;
    Ok(next_crossing(Side::Plus, down.x_next, params, MAP_TOL)?.x_next)
}

/// `∂P/∂a` at `a = 0`, whose root in `(1/2, 2/3)` is the `a → 0` orbit.
pub fn dp_da_at_zero(x0: f64) -> f64 {
    if x0 >= 2.0 / 3.0 - 1e-15 {
        return f64::NEG_INFINITY;
    }
    let cot = |t: f64| t.cos() / t.sin();
    (2.0 / PI)
        * (32.0 / (9.0 * PI) + (2.0 * x0 / 3.0) * cot(1.5 * PI * x0) + (4.0 - 2.0 * x0) * cot(0.5 * PI * x0))
}

/// Root of [`dp_da_at_zero`] in `(1/2, 2/3)`.
pub fn solve_x0() -> f64 {
    bisect(dp_da_at_zero, 0.5, 2.0 / 3.0 - 1e-9, 1e-15)
        .expect("dP/da changes sign on (1/2, 2/3)")
        .root
}

/// How `∂P/∂x` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Product of the two crossing-map derivatives; the fixed-point formula
    /// when `x` is a fixed point.
    ClosedForm,
    /// Central difference of the composite map, step `1e-6`.
    FiniteDifference,
}

/// `∂P/∂x` at `(x, a)`.
pub fn dp_dx(x: f64, a: f64, mode: DerivativeMode) -> Result<f64> {
    let params = OscillatorParams::new(a)?;
    match mode {
        DerivativeMode::FiniteDifference => {
            let h = 1e-6;
            Ok((composite_map_with(&params, x + h)? - composite_map_with(&params, x - h)?) / (2.0 * h))
        }
        DerivativeMode::ClosedForm => {
            let x1 = next_crossing(Side::Minus, x, &params, MAP_TOL)?.x_next;
            let x2 = next_crossing(Side::Plus, x1, &params, MAP_TOL)?.x_next;
            if (x2 - x - 4.0).abs() < 1e-9 {
                fixed_point_multiplier(x, x1, a)
            } else {
                // implicit differentiation of both crossings
                let d1 = sin_pi(0.5 * x) / sin_pi(0.5 * x1) * (-a * (x1 - x)).exp();
                let d2 = sin_pi(1.5 * x1) / sin_pi(1.5 * x2) * (-a * (x2 - x1)).exp();
                Ok(d1 * d2)
            }
        }
    }
}

/// `[3 − 4 sin²(πx₁/2)] / [3 − 4 sin²(πx/2)] · e^{−4a}` with `x₁ = P₋ᵃ(x)`.
pub fn fixed_point_multiplier(x: f64, x1: f64, a: f64) -> Result<f64> {
    let den = 3.0 - 4.0 * sin_pi(0.5 * x).powi(2);
    if den.abs() < 1e-12 {
        return Err(Error::Domain(format!("multiplier denominator vanishes at x = {x}")));
    }
    Ok((3.0 - 4.0 * sin_pi(0.5 * x1).powi(2)) / den * (-4.0 * a).exp())
}

/// The non-sliding period-4 orbit of the linear system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonSlidingOrbit {
    pub a: f64,
    /// Downward crossing point (from `S₊` into `S₋`) in `(0, 2/3)`.
    pub x_star: f64,
    /// Downward crossing `P₋ᵃ(x*)`.
    pub x_mid: f64,
    pub multiplier: f64,
    /// `|P(x*) − x* − 4|`.
    pub residual: f64,
}

impl NonSlidingOrbit {
    pub fn is_stable(&self) -> bool {
        self.multiplier > 0.0 && self.multiplier < 1.0
    }
}

const DELTA_SUBINTERVALS: usize = 64;

/// `Δ(x, a) = P(x, a) − (x + 4)` on the 63 interior grid points of `(0, 2/3)`.
pub fn delta_scan(a: f64) -> Result<Vec<(f64, Option<f64>)>> {
    let params = OscillatorParams::new(a)?;
    Ok((1..DELTA_SUBINTERVALS)
        .map(|k| {
            let x = k as f64 * (2.0 / 3.0) / DELTA_SUBINTERVALS as f64;
            (x, composite_map_with(&params, x).ok().map(|p| p - x - 4.0))
        })
        .collect())
}

/// Root of `Δ(·, a)` in `(0, 2/3)` and its multiplier.
///
/// Sign changes `+ → −` (the stable orientation) are preferred; grid points
/// where the map fails (sliding, grazing) are skipped.
pub fn find_nonsliding_period4(a: f64, tol: f64) -> Result<NonSlidingOrbit> {
    let params = OscillatorParams::new(a)?;
    let scan = delta_scan(a)?;
    let valid: Vec<(f64, f64)> = scan.iter().filter_map(|&(x, d)| d.map(|d| (x, d))).collect();
    let mut candidates: Vec<(f64, f64, bool)> = valid
        .windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| (w[0].0, w[1].0, w[0].1 > 0.0))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoOrbit(format!(
            "Δ(x, {a}) has no sign change on (0, 2/3) ({} of {} grid points evaluable)",
            valid.len(),
            scan.len()
        )));
    }
    candidates.sort_by_key(|c| !c.2);
    let (lo, hi, _) = candidates[0];
    let delta = |x: f64| composite_map_with(&params, x).map(|p| p - x - 4.0).unwrap_or(f64::NAN);
    let root = bisect(delta, lo, hi, tol.max(1e-15))?;
    let x_star = root.root;
    let x_mid = next_crossing(Side::Minus, x_star, &params, MAP_TOL)?.x_next;
    let residual = (composite_map_with(&params, x_star)? - x_star - 4.0).abs();
    Ok(NonSlidingOrbit { a, x_star, x_mid, multiplier: fixed_point_multiplier(x_star, x_mid, a)?, residual })
}
