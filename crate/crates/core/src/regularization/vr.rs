//! The 4-periodic object `v_r` that long nonlinear runs approach.
//!
//! From the lower fold `x⁻_{ε,2n}` the reference leaves the layer along the
//! exterior solution through `(x⁻_{ε,2n}, −1)`, re-enters after
//! `x_{ε,a}`, and then stays at `v = −1` until the next fold `4` later.

use serde::Serialize;

use crate::analytic::HalfPlaneFlow;
use crate::error::{Error, Result};
use crate::model::{OscillatorParams, Side};

use super::integrator::{exterior_return, LayerRun};
use super::layer::fold_points;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrReference {
    pub x_fold: f64,
    pub x_reentry: f64,
    /// `x_{ε,a}`: length of the exterior excursion.
    pub excursion: f64,
    #[serde(skip)]
    epsilon: f64,
    #[serde(skip)]
    flow: HalfPlaneFlow,
}

impl VrReference {
    /// `v_r(x)`, extended 4-periodically.
    pub fn value(&self, x: f64) -> f64 {
        let t = (x - self.x_fold).rem_euclid(4.0);
        if t <= self.excursion {
            self.flow.flow(self.x_fold, -self.epsilon, self.x_fold + t) / self.epsilon
        } else {
            -1.0
        }
    }

    /// `k + 1` evenly spaced samples over one period from the fold.
    pub fn samples(&self, k: usize) -> Vec<(f64, f64)> {
        (0..=k)
            .map(|i| {
                let x = self.x_fold + 4.0 * i as f64 / k as f64;
                (x, self.value(x))
            })
            .collect()
    }
}

/// `v_r` anchored at the fold `x⁻_{ε,2n}`.
pub fn v_r_reference(n: i64, params: &OscillatorParams) -> Result<VrReference> {
    let eps = params.epsilon;
    if eps <= 0.0 {
        return Err(Error::InvalidParameter("v_r needs ε > 0".into()));
    }
    let x_fold = fold_points(Side::Minus, 2 * n, params)?;
    let x_reentry = exterior_return(params, Side::Minus, x_fold, -eps, 4.0)?
        .ok_or_else(|| Error::Regime(format!("exterior orbit from the fold at {x_fold} does not return within 4")))?;
    Ok(VrReference {
        x_fold,
        x_reentry,
        excursion: x_reentry - x_fold,
        epsilon: eps,
        flow: HalfPlaneFlow::new(params, Side::Minus),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowDistance {
    pub n: i64,
    pub window: (f64, f64),
    /// `sup |v − v_r|` over the window.
    pub to_reference: f64,
    /// `sup |v(x) − v(x − 4)|` over the window; `NaN` for the first one.
    pub to_previous: f64,
}

/// Grid points per 4-window.
pub const WINDOW_SAMPLES: usize = 4000;

/// Sup-distances of a long run to `v_r` over the windows
/// `[x⁻_{ε,2n}, x⁻_{ε,2n} + 4]`, `n ∈ windows`.
pub fn convergence_to_vr(run: &LayerRun, windows: std::ops::RangeInclusive<i64>) -> Result<Vec<WindowDistance>> {
    let params = run.params();
    let first = *windows.start();
    let mut out = Vec::new();
    for n in windows {
        let vr = v_r_reference(n, params)?;
        let (lo, hi) = (vr.x_fold, vr.x_fold + 4.0);
        let x_start = run.trajectory.segments.first().map_or(f64::NAN, |s| s.x_start());
        if run.end.x < hi || x_start > lo || (n > first && x_start > lo - 4.0) {
            return Err(Error::InsufficientData(format!(
                "run covers [{x_start}, {}], window n = {n} needs [{lo}, {hi}]",
                run.end.x
            )));
        }
        let mut to_reference: f64 = 0.0;
        let mut to_previous: f64 = if n > first { 0.0 } else { f64::NAN };
        for i in 0..=WINDOW_SAMPLES {
            let x = lo + 4.0 * i as f64 / WINDOW_SAMPLES as f64;
            let v = run.value_at(x).ok_or_else(|| Error::InsufficientData(format!("no sample at x = {x}")))?;
            to_reference = to_reference.max((v - vr.value(x)).abs());
            if n > first {
                let back = run.value_at(x - 4.0).ok_or_else(|| Error::InsufficientData(format!("no sample at x = {}", x - 4.0)))?;
                to_previous = to_previous.max((v - back).abs());
            }
        }
        out.push(WindowDistance { n, window: (lo, hi), to_reference, to_previous });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, eps: f64) -> OscillatorParams {
        OscillatorParams::new(a).unwrap().with_epsilon(eps).unwrap()
    }

    #[test]
    fn excursion_within_bounds() {
        let (a, eps) = (0.01, 0.0025);
        let vr = v_r_reference(5, &params(a, eps)).unwrap();
        assert!(vr.excursion > 2.0 - 2.0 * (a * eps).asin() && vr.excursion < 4.0, "{}", vr.excursion);
    }

    #[test]
    fn reference_is_continuous_and_periodic() {
        let vr = v_r_reference(3, &params(0.01, 0.0025)).unwrap();
        assert!((vr.value(vr.x_reentry) + 1.0).abs() < 1e-10);
        assert!((vr.value(vr.x_fold) + 1.0).abs() < 1e-10);
        let x = vr.x_fold + 1.3;
        assert!((vr.value(x) - vr.value(x + 8.0)).abs() < 1e-9);
        assert!(vr.value(x) < -1.0);
        let other = v_r_reference(7, &params(0.01, 0.0025)).unwrap();
        assert!((other.value(x) - vr.value(x)).abs() < 1e-9);
    }

    #[test]
    fn small_epsilon_reference_matches_discontinuous_orbit() {
        // y = ε v_r tends to the discontinuous period-4 orbit leaving (4n, 0)
        let a = 0.5;
        let disc = crate::sliding::find_sliding_period4_nonlinear(a).unwrap();
        for (eps, bound) in [(1e-3, 5e-3), (1e-5, 5e-5)] {
            let p = params(a, eps);
            let vr = v_r_reference(0, &p).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..=400 {
                let x = 4.0 * i as f64 / 400.0;
                let y = disc.trajectory.sample_at(x).unwrap();
                worst = worst.max((eps * vr.value(x) - y).abs());
            }
            assert!(worst < bound, "ε = {eps}: {worst}");
        }
    }
}
