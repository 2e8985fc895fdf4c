//! Capture by attracting slow manifolds of the nonlinear layer and exit
//! near the lower fold points.
//!
//! A trajectory sliding on branch `2n` follows `v₀ + εv₁` until the fold
//! `x⁻_{ε,2n}` near `4n`, where `ψ'(v₀) → 0` and the expansion breaks
//! down. Rescaling around the fold turns the layer equation into the
//! Riccati equation `ṽ' = −(x̃ + ṽ²)`, which puts the exit point
//! `(ε²/n)^{1/3}` past the fold.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{power_law, ScalingFit};
use crate::model::{Mode, OscillatorParams, Side, SwitchingModel};
use crate::sliding::{SlidingBranch, Stability};
use crate::trajectory::EventKind;

use super::integrator::{integrate_layer, integrate_layer_until, LayerOptions, LayerRun, StopRule};
use super::layer::{fold_points, slow_manifold_expansion, LayerState, LayerSystem};

/// Band half-width in units of `ε|v₁|` that counts as "on the slow manifold".
pub const CAPTURE_BAND: f64 = 5.0;
/// Length in `x` the band must hold for.
pub const CAPTURE_LENGTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Capture {
    pub branch: SlidingBranch,
    /// Where the band was first entered for the streak that qualified.
    pub x_capture: f64,
}

fn attracting_branches_at(model: SwitchingModel, x: f64) -> Vec<SlidingBranch> {
    crate::sliding::branches(model, (x, x))
        .into_iter()
        .filter(|b| b.stability == Stability::Attracting && b.contains(x))
        .collect()
}

/// First capture of `run` by an attracting branch within `[from, to]`.
pub fn detect_capture(run: &LayerRun, model: SwitchingModel, from: f64, to: f64) -> Option<Capture> {
    let params = run.params();
    let eps = params.epsilon;
    for seg in run.trajectory.segments.iter().filter(|s| s.mode == Mode::Layer) {
        // streak start per branch index
        let mut streaks: Vec<(i64, f64)> = Vec::new();
        for &(x, v) in seg.points.iter().filter(|p| p.0 >= from && p.0 <= to) {
            let mut next = Vec::new();
            for b in attracting_branches_at(model, x) {
                let Ok(s) = slow_manifold_expansion(&b, x, params) else { continue };
                if (v - s.v0).abs() < CAPTURE_BAND * eps * s.v1.abs() {
                    let start = streaks.iter().find(|(i, _)| *i == b.index).map_or(x, |&(_, x0)| x0);
                    if x - start >= CAPTURE_LENGTH {
                        return Some(Capture { branch: b, x_capture: start });
                    }
                    next.push((b.index, start));
                }
            }
            streaks = next;
        }
    }
    None
}

/// Exit of a trajectory started on the slow manifold of branch `2n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitMeasurement {
    /// Half-index: the branch is `2n`.
    pub n: i64,
    pub epsilon: f64,
    pub x_start: f64,
    pub capture: Capture,
    pub x_exit: f64,
    /// `x⁻_{ε,2n}`.
    pub fold: f64,
    /// `x_exit − x⁻_{ε,2n}`.
    pub deviation: f64,
}

/// Start distance before `4n` of the run that measures the exit.
const EXIT_LEAD: f64 = 1.5;

/// Exit point `x_e` through `v = −1` of a trajectory captured on branch `2n`.
pub fn measure_exit_point(n: i64, params: &OscillatorParams, opts: &LayerOptions) -> Result<ExitMeasurement> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!("half-index n must be ≥ 1, got {n}")));
    }
    let branch = SlidingBranch::nonlinear(2 * n)?;
    let x0 = 4.0 * n as f64 - EXIT_LEAD;
    if !branch.contains(x0) {
        return Err(Error::Domain(format!("branch {} too short to measure its exit", branch.id())));
    }
    let start = slow_manifold_expansion(&branch, x0, params)?;
    let run = integrate_layer_until(
        SwitchingModel::Nonlinear,
        params,
        LayerState::new(x0, start.v),
        4.0 * n as f64 + 2.0,
        StopRule::FirstLayerExit,
        opts,
    )?;
    let capture = detect_capture(&run, SwitchingModel::Nonlinear, x0, run.end.x)
        .filter(|c| c.branch.index == 2 * n)
        .ok_or_else(|| Error::NotCaptured(format!("run from x = {x0} never held the band of branch {}", 2 * n)))?;
    if run.end.v != -1.0 {
        return Err(Error::NotCaptured(format!("run from x = {x0} did not exit through v = −1")));
    }
    let fold = fold_points(Side::Minus, 2 * n, params)?;
    Ok(ExitMeasurement {
        n,
        epsilon: params.epsilon,
        x_start: x0,
        capture,
        x_exit: run.end.x,
        fold,
        deviation: run.end.x - fold,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitScaling {
    pub epsilon_rows: Vec<ExitMeasurement>,
    pub n_rows: Vec<ExitMeasurement>,
    /// Deviation vs `ε` at fixed `n`; expected exponent `2/3`.
    pub epsilon_fit: ScalingFit,
    /// Deviation vs `n` at fixed `ε`; expected exponent `−1/3`.
    pub n_fit: ScalingFit,
}

/// Samples outside the asymptotic regime are dropped before fitting.
fn in_scaling_regime(m: &ExitMeasurement, a: f64) -> bool {
    m.n >= 3 && a * m.epsilon <= 0.01
}

/// Exit-point deviations over an `ε` grid at fixed `n` and an `n` grid at
/// fixed `ε`, with power-law fits of each.
pub fn exit_scaling_fit(
    a: f64,
    epsilons: &[f64],
    n_fixed: i64,
    ns: &[i64],
    eps_fixed: f64,
    opts: &LayerOptions,
) -> Result<ExitScaling> {
    let measure = |n: i64, eps: f64| -> Result<ExitMeasurement> {
        let p = OscillatorParams::new(a)?.with_epsilon(eps)?;
        measure_exit_point(n, &p, opts)
    };
    let epsilon_rows: Vec<ExitMeasurement> =
        epsilons.par_iter().map(|&e| measure(n_fixed, e)).collect::<Result<_>>()?;
    let n_rows: Vec<ExitMeasurement> = ns.par_iter().map(|&n| measure(n, eps_fixed)).collect::<Result<_>>()?;
    let pick = |rows: &[ExitMeasurement], by_eps: bool| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|m| in_scaling_regime(m, a))
            .map(|m| (if by_eps { m.epsilon } else { m.n as f64 }, m.deviation))
            .collect()
    };
    let epsilon_fit = power_law(&pick(&epsilon_rows, true), 4, 2.0)?;
    // n grids are naturally narrow (doubling four times spans 0.9 decades)
    let n_fit = power_law(&pick(&n_rows, false), 4, 0.9)?;
    Ok(ExitScaling { epsilon_rows, n_rows, epsilon_fit, n_fit })
}

/// Largest relative size of the terms dropped from the Riccati normal form
/// `ṽ' = −(x̃ + ṽ²)` over `|x̃| ≤ window`, `0 ≤ ṽ ≤ window`, measured as
/// `|exact − normal form| / (1 + |x̃| + ṽ²)`.
pub fn riccati_residual(n: i64, params: &OscillatorParams, window: f64) -> Result<f64> {
    let sys = LayerSystem::new(SwitchingModel::Nonlinear, params)?;
    let eps = params.epsilon;
    let fold = fold_points(Side::Minus, 2 * n, params)?;
    let curvature = params.psi.boundary_curvature(-1.0);
    let alpha = (0.5 * PI * (params.a * eps).asin() + 0.5 * n as f64 * PI * PI * curvature).cbrt();
    let e13 = eps.cbrt();
    let mut worst: f64 = 0.0;
    let k = 40;
    for i in 0..=k {
        let xt = -window + 2.0 * window * i as f64 / k as f64;
        for j in 0..=k {
            let vt = window * j as f64 / k as f64;
            let x = fold + e13 * e13 * xt / alpha;
            let v = -1.0 + PI * e13 * vt / (2.0 * alpha * alpha);
            let exact = sys.rhs(x, v) * 2.0 * alpha * e13 / PI;
            let normal = -(xt + vt * vt);
            worst = worst.max((exact - normal).abs() / (1.0 + xt.abs() + vt * vt));
        }
    }
    Ok(worst)
}

/// Distance of a captured trajectory from the critical manifold of branch `2n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosenessReport {
    pub n: i64,
    /// `[7n/3, 3n + 2]`.
    pub window: (f64, f64),
    /// `[7n/3, 3n+2] ∩ [5n/3, 10n/3]`.
    pub inner_window: (f64, f64),
    /// `max |v − v₀| / (ε|v₁|)` over `window`.
    pub max_ratio: f64,
    pub max_ratio_inner: f64,
    /// `max |v − v₀|` over `window`.
    pub max_distance: f64,
}

/// Track branch `2n` from `x = 5n/3` (on the slow manifold) across the
/// closeness window and report the largest distance from `v₀` in units of `ε|v₁|`.
pub fn slow_manifold_closeness(n: i64, params: &OscillatorParams, opts: &LayerOptions) -> Result<ClosenessReport> {
    let nf = n as f64;
    let branch = SlidingBranch::nonlinear(2 * n)?;
    let window = (7.0 * nf / 3.0, 3.0 * nf + 2.0);
    let inner_window = (window.0.max(5.0 * nf / 3.0), window.1.min(10.0 * nf / 3.0));
    let x0 = 5.0 * nf / 3.0;
    if !branch.contains(window.1) {
        return Err(Error::Domain(format!("closeness window leaves branch {} for n = {n}", branch.id())));
    }
    let start = slow_manifold_expansion(&branch, x0, params)?;
    let run = integrate_layer(SwitchingModel::Nonlinear, params, LayerState::new(x0, start.v), window.1 + 0.01, opts)?;
    if run.trajectory.events_of(EventKind::LayerExit).next().is_some() {
        return Err(Error::NotCaptured(format!("trajectory left the layer inside the window (n = {n})")));
    }
    let eps = params.epsilon;
    let (mut max_ratio, mut max_ratio_inner, mut max_distance) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (x, v, _) in run.trajectory.samples().filter(|&(x, _, _)| x >= window.0 && x <= window.1) {
        let s = slow_manifold_expansion(&branch, x, params)?;
        let d = (v - s.v0).abs();
        let ratio = d / (eps * s.v1.abs());
        max_distance = max_distance.max(d);
        max_ratio = max_ratio.max(ratio);
        if x >= inner_window.0 && x <= inner_window.1 {
            max_ratio_inner = max_ratio_inner.max(ratio);
        }
    }
    Ok(ClosenessReport { n, window, inner_window, max_ratio, max_ratio_inner, max_distance })
}

/// A long nonlinear run from above the layer: capture, slide, exit, confinement.
#[derive(Debug, Clone, Serialize)]
pub struct SlideReport {
    pub x_start: f64,
    pub x_entry: f64,
    pub capture: Option<Capture>,
    pub x_exit: Option<f64>,
    /// `x_exit − x_start`.
    pub slid_length: Option<f64>,
    /// `x_exit − x_entry`.
    pub residence: Option<f64>,
    /// `max v` after the exit.
    pub max_v_after_exit: f64,
    pub confined: bool,
    #[serde(skip)]
    pub run: LayerRun,
}

/// Integrate from `start` to `x_end` and read off the first slide.
pub fn first_slide(params: &OscillatorParams, start: LayerState, x_end: f64, opts: &LayerOptions) -> Result<SlideReport> {
    let run = integrate_layer(SwitchingModel::Nonlinear, params, start, x_end, opts)?;
    let x_entry = if start.in_layer() {
        start.x
    } else {
        run.trajectory
            .events_of(EventKind::LayerEntry)
            .next()
            .map(|e| e.x)
            .ok_or_else(|| Error::NotCaptured("never entered the layer".into()))?
    };
    let capture = detect_capture(&run, SwitchingModel::Nonlinear, x_entry, x_end);
    let x_exit = capture.and_then(|c| {
        run.trajectory.events_of(EventKind::LayerExit).map(|e| e.x).find(|&x| x > c.x_capture)
    });
    let after = x_exit.unwrap_or(f64::INFINITY);
    let max_v_after_exit = run
        .trajectory
        .samples()
        .filter(|&(x, _, _)| x > after)
        .map(|(_, v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let confined = x_exit.is_some() && max_v_after_exit <= 1.0 + 1e-9;
    Ok(SlideReport {
        x_start: start.x,
        x_entry,
        capture,
        x_exit,
        slid_length: x_exit.map(|x| x - start.x),
        residence: x_exit.map(|x| x - x_entry),
        max_v_after_exit,
        confined,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, eps: f64) -> OscillatorParams {
        OscillatorParams::new(a).unwrap().with_epsilon(eps).unwrap()
    }

    #[test]
    fn exit_lies_just_past_the_fold() {
        let p = params(0.01, 1e-3);
        let m = measure_exit_point(10, &p, &LayerOptions::default()).unwrap();
        assert_eq!(m.capture.branch.index, 20);
        assert!((m.deviation - 0.0019268348090).abs() < 1e-8, "{}", m.deviation);
        assert!(m.deviation > 0.0 && m.deviation < 0.05, "{m:?}");
        // scale (ε²/n)^{1/3}; independent stiff-solver oracle gives 0.0019268348
        let scale = (1e-6f64 / 10.0).cbrt();
        assert!(m.deviation / scale > 0.2 && m.deviation / scale < 5.0, "{} vs {scale}", m.deviation);
    }

    #[test]
    fn exit_tends_to_4n_as_epsilon_vanishes() {
        let d: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| measure_exit_point(5, &params(0.01, e), &LayerOptions::default()).unwrap().x_exit - 20.0)
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2] && d[2] > 0.0, "{d:?}");
    }

    #[test]
    fn riccati_normal_form_dominates_near_the_fold() {
        for n in [4, 10, 32] {
            let r = riccati_residual(n, &params(0.01, 1e-3), 2.0).unwrap();
            assert!(r < 0.1, "n = {n}: residual {r}");
        }
    }

    #[test]
    fn capture_requires_the_band() {
        let p = params(0.01, 1e-3);
        // start far from any critical manifold, above the layer
        let run = integrate_layer(SwitchingModel::Nonlinear, &p, LayerState::new(10.0, 0.9), 10.3, &LayerOptions::default()).unwrap();
        assert!(detect_capture(&run, SwitchingModel::Nonlinear, 10.0, 10.3).is_none());
    }

    #[test]
    fn closeness_holds_on_a_short_branch() {
        let r = slow_manifold_closeness(6, &params(0.01, 1e-3), &LayerOptions::default()).unwrap();
        assert!(r.max_ratio <= CAPTURE_BAND, "{r:?}");
        assert!(r.max_ratio_inner <= r.max_ratio);
    }
}
