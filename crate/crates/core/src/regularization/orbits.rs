//! Periodic orbits of the regularized linear system.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{OscillatorParams, SwitchingModel};
use crate::poincare::find_nonsliding_period4;
use crate::roots::bisect;
use crate::trajectory::EventKind;

use super::integrator::{integrate_layer, integrate_layer_until, LayerOptions, LayerRun, StopReason, StopRule};
use super::layer::{LayerState, LayerSystem};

/// Layer visits longer than this mean the orbit was caught by a branch.
pub const MAX_TRANSIT: f64 = 0.25;

/// One application of `P_ε` from `(x, 0)` to the next downward `v = 0`.
#[derive(Debug, Clone)]
pub struct RegularizedReturn {
    pub x_next: f64,
    /// `dP_ε/dx` from the variational equation.
    pub derivative: f64,
    pub longest_transit: f64,
    pub run: LayerRun,
}

/// `P_ε(x, a)`: the return to `v = 0` (crossing downwards) of the linear
/// regularized system, the analogue of `P₊ ∘ P₋`.
pub fn regularized_poincare_linear(x: f64, params: &OscillatorParams, opts: &LayerOptions) -> Result<RegularizedReturn> {
    let sys = LayerSystem::new(SwitchingModel::Linear, params)?;
    let slope0 = sys.rhs(x, 0.0);
    if slope0 >= 0.0 {
        return Err(Error::Domain(format!("x = {x} is not in the downward crossing window (v' = {slope0})")));
    }
    let run = integrate_layer_until(
        SwitchingModel::Linear,
        params,
        LayerState::new(x, 0.0),
        x + 12.0,
        StopRule::DownwardZero { after: x + 2.0 },
        opts,
    )?;
    if run.stop != StopReason::DownwardZero {
        return Err(Error::NoRoot { x, horizon: 12.0 });
    }
    let longest_transit = run.layer_visits().iter().map(|(a, b)| b - a).fold(0.0, f64::max);
    if longest_transit > MAX_TRANSIT {
        return Err(Error::Regime(format!(
            "orbit from x = {x} stayed {longest_transit:.3} in the layer: captured by a branch"
        )));
    }
    let x_next = run.end.x;
    let derivative = run.log_derivative.exp() * slope0 / sys.rhs(x_next, 0.0);
    Ok(RegularizedReturn { x_next, derivative, longest_transit, run })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularizedNonSlidingOrbit {
    pub a: f64,
    pub epsilon: f64,
    pub x_star: f64,
    /// The fixed point of the discontinuous map.
    pub x_star_discontinuous: f64,
    pub multiplier: f64,
    pub residual: f64,
}

/// Fixed point of `P_ε(x) − (x + 4)` near the discontinuous `x*`.
pub fn find_regularized_nonsliding_orbit(params: &OscillatorParams, opts: &LayerOptions) -> Result<RegularizedNonSlidingOrbit> {
    let disc = find_nonsliding_period4(params.a, 1e-13)?;
    let g = |x: f64| regularized_poincare_linear(x, params, opts).map(|r| r.x_next - x - 4.0);
    let lo = disc.x_star - 0.05;
    let hi = (disc.x_star + 0.03).min(2.0 / 3.0 - 1e-6);
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if glo * ghi > 0.0 {
        return Err(Error::NoOrbit(format!(
            "P_ε(x) − x − 4 keeps its sign on [{lo}, {hi}] ({glo:e}, {ghi:e})"
        )));
    }
    let mut failure = None;
    let root = bisect(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-12,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let ret = regularized_poincare_linear(root.root, params, opts)?;
    Ok(RegularizedNonSlidingOrbit {
        a: params.a,
        epsilon: params.epsilon,
        x_star: root.root,
        x_star_discontinuous: disc.x_star,
        multiplier: ret.derivative,
        residual: ret.x_next - root.root - 4.0,
    })
}

#[derive(Debug, Clone)]
pub struct RegularizedSlidingOrbit {
    pub a: f64,
    pub epsilon: f64,
    /// Stroboscopic section `x = x_section (mod 4)`.
    pub x_section: f64,
    pub v_star: f64,
    /// `|dv(x_s + 4)/dv(x_s)|` from the variational equation.
    pub contraction: f64,
    /// Same quantity by central differences; floors at round-off once the
    /// true value drops below ~1e-10.
    pub contraction_fd: f64,
    /// Largest `|Δx − 4|` between consecutive layer exits over two periods.
    pub period_error: f64,
    pub longest_transit: f64,
    /// One period starting on the section.
    pub period: LayerRun,
}

/// Section used for the sliding orbit: `x ≡ −2/3 (mod 4)`, the end of the
/// attracting linear branch.
pub const SLIDING_SECTION: f64 = 10.0 / 3.0;

/// The 4-periodic sliding orbit of the linear regularized system, as a
/// fixed point of the time-4 map on `x = 10/3`.
pub fn find_regularized_sliding_orbit_linear(params: &OscillatorParams, opts: &LayerOptions) -> Result<RegularizedSlidingOrbit> {
    let xs = SLIDING_SECTION;
    let strobe = |v: f64| integrate_layer(SwitchingModel::Linear, params, LayerState::new(xs, v), xs + 4.0, opts);
    let mut v = 0.0;
    let mut run = strobe(v)?;
    for _ in 0..30 {
        let next = run.end.v;
        let done = (next - v).abs() < 1e-13;
        v = next;
        run = strobe(v)?;
        if done {
            break;
        }
    }
    if (run.end.v - v).abs() > 1e-10 {
        return Err(Error::NoOrbit(format!("time-4 map did not settle: |Δv| = {:e}", (run.end.v - v).abs())));
    }
    let longest_transit = run.layer_visits().iter().map(|(a, b)| b - a).fold(0.0, f64::max);
    if longest_transit <= MAX_TRANSIT {
        return Err(Error::Regime(format!(
            "no sliding segment at a = {} (longest layer visit {longest_transit:.3})",
            params.a
        )));
    }
    let two = integrate_layer(SwitchingModel::Linear, params, LayerState::new(xs, v), xs + 8.0, opts)?;
    let exits: Vec<f64> = two.trajectory.events_of(EventKind::LayerExit).map(|e| e.x).collect();
    let per_period = exits.iter().filter(|&&x| x < xs + 4.0).count();
    let period_error = (0..per_period)
        .filter_map(|i| exits.get(i + per_period).map(|x2| (x2 - exits[i] - 4.0).abs()))
        .fold(0.0, f64::max);
    let d = 1e-4;
    let contraction_fd = ((strobe(v + d)?.end.v - strobe(v - d)?.end.v) / (2.0 * d)).abs();
    Ok(RegularizedSlidingOrbit {
        a: params.a,
        epsilon: params.epsilon,
        x_section: xs,
        v_star: v,
        contraction: run.log_derivative.exp(),
        contraction_fd,
        period_error,
        longest_transit,
        period: run,
    })
}
