//! Stiff integration of the regularized system.
//!
//! Inside the layer `|v| < 1` the equation `v' = −av − f(x, ψ(v))/ε` is
//! stiff with rate `~1/ε`, so it is advanced with the 3-stage Radau IIA
//! method (order 5, L-stable) under step-doubling error control. Outside
//! the layer the field reduces to the linear half-plane equation and the
//! closed-form flow carries the orbit to its next contact with `|v| = 1`.
//!
//! Alongside the state the integrator accumulates `ln ∂v(x)/∂v(x₀)` from
//! the variational equation `w' = (∂v'/∂v) w`. The field is `C¹` across
//! `|v| = 1` (`ψ'(±1) = 0`), so no saltation is needed at layer events.

use serde::Serialize;

use crate::analytic::HalfPlaneFlow;
use crate::error::{Error, Result};
use crate::model::{Mode, OscillatorParams, Side, SwitchingModel};
use crate::roots::bisect;
use crate::trajectory::{EventKind, Trajectory};

use super::layer::{boundary_equation, LayerState, LayerSystem};

const SQ6: f64 = 2.449_489_742_783_178;

const C: [f64; 3] = [(4.0 - SQ6) / 10.0, (4.0 + SQ6) / 10.0, 1.0];

const A: [[f64; 3]; 3] = [
    [(88.0 - 7.0 * SQ6) / 360.0, (296.0 - 169.0 * SQ6) / 1800.0, (-2.0 + 3.0 * SQ6) / 225.0],
    [(296.0 + 169.0 * SQ6) / 1800.0, (88.0 + 7.0 * SQ6) / 360.0, (-2.0 - 3.0 * SQ6) / 225.0],
    [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
];

const NEWTON_ITERATIONS: usize = 12;
const NEWTON_TOL: f64 = 1e-13;
/// `|f| > FAST_FORCING` marks the fast part of the layer, where steps are capped at `c·ε`.
const FAST_FORCING: f64 = 0.1;
/// Event location tolerance in `x`.
pub const EVENT_XTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOptions {
    /// Local error per unit `x`.
    pub tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// `c` in the fast-region cap `h ≤ c·ε`.
    pub fast_step_factor: f64,
    /// Sample spacing on closed-form exterior arcs.
    pub sample_dx: f64,
    pub max_steps: usize,
}

impl Default for LayerOptions {
    fn default() -> Self {
        LayerOptions {
            tol: 1e-10,
            max_step: 0.02,
            min_step: 1e-13,
            fast_step_factor: 1.0,
            sample_dx: 0.01,
            max_steps: 5_000_000,
        }
    }
}

/// When to stop before `x_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run to `x_end`.
    XEnd,
    /// Stop at the first exit through `|v| = 1`.
    FirstLayerExit,
    /// Stop where `v` crosses `0` downwards, ignoring crossings before `after`.
    DownwardZero { after: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    XEnd,
    LayerExit,
    DownwardZero,
}

/// A closed-form piece of orbit outside the layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExteriorArc {
    pub side: Side,
    pub x0: f64,
    /// `y = εv` at `x0`.
    pub y0: f64,
    pub x1: f64,
}

#[derive(Debug, Clone)]
pub struct LayerRun {
    pub trajectory: Trajectory,
    pub arcs: Vec<ExteriorArc>,
    /// `ln |∂v(x_end)/∂v(x₀)|` from the variational equation.
    pub log_derivative: f64,
    pub end: LayerState,
    pub stop: StopReason,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    params: OscillatorParams,
}

impl LayerRun {
    /// `v(x)`, exact on exterior arcs and interpolated between layer steps.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let eps = self.params.epsilon;
        if let Some(arc) = self.arcs.iter().find(|a| x >= a.x0 && x <= a.x1) {
            let flow = HalfPlaneFlow::new(&self.params, arc.side);
            return Some(flow.flow(arc.x0, arc.y0, x) / eps);
        }
        self.trajectory.sample_at(x)
    }

    /// `(x_entry, x_exit)` of every layer visit; an unfinished visit ends at `x_end`.
    pub fn layer_visits(&self) -> Vec<(f64, f64)> {
        self.trajectory
            .segments
            .iter()
            .filter(|s| s.mode == Mode::Layer && s.points.len() > 1)
            .map(|s| (s.x_start(), s.x_end()))
            .collect()
    }

    pub fn params(&self) -> &OscillatorParams {
        &self.params
    }
}

/// Result of one Radau step: new state and `∫ ∂v'/∂v dx` over the step.
#[derive(Debug, Clone, Copy)]
struct StepResult {
    v: f64,
    jint: f64,
}

fn radau_step(sys: &LayerSystem, x: f64, v: f64, h: f64) -> Option<StepResult> {
    let mut z = [0.0; 3];
    for _ in 0..NEWTON_ITERATIONS {
        let mut f = [0.0; 3];
        let mut jac = [0.0; 3];
        for j in 0..3 {
            f[j] = sys.rhs(x + C[j] * h, v + z[j]);
            jac[j] = sys.jacobian(x + C[j] * h, v + z[j]);
        }
        let mut m = [[0.0; 3]; 3];
        let mut r = [0.0; 3];
        for i in 0..3 {
            r[i] = -(z[i] - h * (0..3).map(|j| A[i][j] * f[j]).sum::<f64>());
            for j in 0..3 {
                m[i][j] = if i == j { 1.0 } else { 0.0 } - h * A[i][j] * jac[j];
            }
        }
        let dz = solve3(m, r)?;
        let mut size: f64 = 0.0;
        for j in 0..3 {
            z[j] += dz[j];
            size = size.max(dz[j].abs());
        }
        if !size.is_finite() {
            return None;
        }
        if size <= NEWTON_TOL * (1.0 + v.abs()) {
            let jint = h * (0..3).map(|j| A[2][j] * sys.jacobian(x + C[j] * h, v + z[j])).sum::<f64>();
            return Some(StepResult { v: v + z[2], jint });
        }
    }
    None
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    Some(x)
}

/// Does the field at `(x, ±1)` point out of the layer?
fn points_outward(params: &OscillatorParams, side: Side, x: f64) -> bool {
    let s = side.sign();
    let g = s * boundary_equation(side, x, params);
    if g != 0.0 {
        return g > 0.0;
    }
    s * boundary_equation(side, x + 1e-9, params) > 0.0
}

/// First return to `|v| = 1` of the exterior orbit through `(x0, y0)`,
/// `|y0| ≥ ε`, within `horizon`; `None` when it stays outside.
pub fn exterior_return(params: &OscillatorParams, side: Side, x0: f64, y0: f64, horizon: f64) -> Result<Option<f64>> {
    let eps = params.epsilon;
    let s = side.sign();
    let flow = HalfPlaneFlow::new(params, side);
    let g = |x: f64| s * flow.flow(x0, y0, x) - eps;
    let w = params.omega(side);
    let step = (1.0 / (32.0 * w)).min(1.0 / (4.0 * params.a));

    // Pull the first probe in until it is strictly outside.
    let first = step.min(horizon.max(0.0));
    if first <= 0.0 {
        return Ok(None);
    }
    let mut p = first;
    let mut inner_fail = None;
    let mut halvings = 0;
    while g(x0 + p) <= 0.0 {
        if g(x0) > 0.0 {
            // started strictly outside: the return lies before the probe
            return Ok(Some(bisect(g, x0, x0 + p, EVENT_XTOL * 0.1)?.root));
        }
        inner_fail = Some(p);
        p *= 0.5;
        halvings += 1;
        if halvings > 60 {
            // grazing contact: no excursion at all
            return Ok(Some(x0));
        }
    }
    if let Some(hi) = inner_fail {
        return Ok(Some(bisect(g, x0 + p, x0 + hi, EVENT_XTOL * 0.1)?.root));
    }
    let mut prev = p;
    let mut k = 1.0;
    loop {
        let q = (first + k * step).min(horizon);
        if g(x0 + q) <= 0.0 {
            return Ok(Some(bisect(g, x0 + prev, x0 + q, EVENT_XTOL * 0.1)?.root));
        }
        if q >= horizon {
            return Ok(None);
        }
        prev = q;
        k += 1.0;
    }
}

/// Integrate from `initial` to `x_end`.
pub fn integrate_layer(
    model: SwitchingModel,
    params: &OscillatorParams,
    initial: LayerState,
    x_end: f64,
    opts: &LayerOptions,
) -> Result<LayerRun> {
    integrate_layer_until(model, params, initial, x_end, StopRule::XEnd, opts)
}

pub fn integrate_layer_until(
    model: SwitchingModel,
    params: &OscillatorParams,
    initial: LayerState,
    x_end: f64,
    rule: StopRule,
    opts: &LayerOptions,
) -> Result<LayerRun> {
    let sys = LayerSystem::new(model, params)?;
    if !(initial.x.is_finite() && initial.v.is_finite()) || x_end <= initial.x {
        return Err(Error::InvalidParameter(format!(
            "bad integration request from ({}, {}) to x = {x_end}",
            initial.x, initial.v
        )));
    }
    Integration::new(sys, initial, x_end, rule, opts).run()
}

struct Integration<'a> {
    sys: LayerSystem,
    opts: &'a LayerOptions,
    rule: StopRule,
    x_end: f64,
    x: f64,
    v: f64,
    h: f64,
    traj: Trajectory,
    arcs: Vec<ExteriorArc>,
    log_w: f64,
    accepted: usize,
    rejected: usize,
}

enum Phase {
    Continue,
    Stop(StopReason),
}

impl<'a> Integration<'a> {
    fn new(sys: LayerSystem, initial: LayerState, x_end: f64, rule: StopRule, opts: &'a LayerOptions) -> Self {
        let eps = sys.epsilon();
        let mut traj = Trajectory::new(eps);
        let mode = if initial.v.abs() < 1.0 {
            Mode::Layer
        } else {
            let side = if initial.v > 0.0 { Side::Plus } else { Side::Minus };
            if initial.v.abs() == 1.0 && !points_outward(&sys.params, side, initial.x) {
                Mode::Layer
            } else {
                Mode::flow(side)
            }
        };
        traj.begin(mode, initial.x, initial.v);
        Integration {
            h: opts.max_step.min(eps),
            sys,
            opts,
            rule,
            x_end,
            x: initial.x,
            v: initial.v,
            traj,
            arcs: Vec::new(),
            log_w: 0.0,
            accepted: 0,
            rejected: 0,
        }
    }

    fn run(mut self) -> Result<LayerRun> {
        let mut stalls = 0;
        let stop = loop {
            if self.x >= self.x_end {
                break StopReason::XEnd;
            }
            let x_before = self.x;
            let phase = if self.traj.current_mode() == Some(Mode::Layer) { self.layer_phase()? } else { self.exterior_phase()? };
            if let Phase::Stop(reason) = phase {
                break reason;
            }
            if self.x <= x_before {
                stalls += 1;
                if stalls > 3 {
                    return Err(Error::Solver(format!("no progress at layer boundary x = {}", self.x)));
                }
            } else {
                stalls = 0;
            }
        };
        self.traj.tidy();
        Ok(LayerRun {
            trajectory: self.traj,
            arcs: self.arcs,
            log_derivative: self.log_w,
            end: LayerState::new(self.x, self.v),
            stop,
            accepted_steps: self.accepted,
            rejected_steps: self.rejected,
            params: self.sys.params,
        })
    }

    fn exterior_phase(&mut self) -> Result<Phase> {
        let params = &self.sys.params;
        let eps = params.epsilon;
        let side = if self.v > 0.0 { Side::Plus } else { Side::Minus };
        let (x0, y0) = (self.x, eps * self.v);
        let ret = exterior_return(params, side, x0, y0, self.x_end - x0)?;
        let x1 = ret.unwrap_or(self.x_end);
        let flow = HalfPlaneFlow::new(params, side);
        let n = ((x1 - x0) / self.opts.sample_dx).ceil().max(1.0) as usize;
        for i in 1..n {
            let x = x0 + (x1 - x0) * i as f64 / n as f64;
            self.traj.push(x, flow.flow(x0, y0, x) / eps);
        }
        self.arcs.push(ExteriorArc { side, x0, y0, x1 });
        self.log_w -= params.a * (x1 - x0);
        self.x = x1;
        match ret {
            Some(_) => {
                self.v = side.sign();
                self.traj.switch(x1, self.v, Mode::Layer, EventKind::LayerEntry, None);
                Ok(Phase::Continue)
            }
            None => {
                self.v = flow.flow(x0, y0, x1) / eps;
                self.traj.push(x1, self.v);
                Ok(Phase::Stop(StopReason::XEnd))
            }
        }
    }

    /// Attempt steps until one is accepted; returns after that step or an event.
    fn layer_phase(&mut self) -> Result<Phase> {
        let eps = self.sys.epsilon();
        loop {
            if self.accepted + self.rejected > self.opts.max_steps {
                return Err(Error::Tolerance(format!("step budget exhausted at x = {}", self.x)));
            }
            let remaining = self.x_end - self.x;
            let mut hmax = self.opts.max_step;
            if self.sys.forcing(self.x, self.v).abs() > FAST_FORCING {
                hmax = hmax.min(self.opts.fast_step_factor * eps);
            }
            let h = self.h.min(hmax).min(remaining);
            if h < self.opts.min_step && h < remaining {
                return Err(Error::StepUnderflow { x: self.x });
            }
            let (x, v) = (self.x, self.v);
            let big = radau_step(&self.sys, x, v, h);
            let half1 = radau_step(&self.sys, x, v, 0.5 * h);
            let half2 = half1.and_then(|s| radau_step(&self.sys, x + 0.5 * h, s.v, 0.5 * h));
            let (Some(big), Some(half1), Some(half2)) = (big, half1, half2) else {
                self.rejected += 1;
                self.h = 0.25 * h;
                continue;
            };
            let err = (big.v - half2.v).abs() / 31.0;
            let allowed = self.opts.tol * h;
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 4.0) };
            if err > allowed {
                self.rejected += 1;
                self.h = h * factor.min(0.9);
                continue;
            }
            self.accepted += 1;
            self.h = h * factor;
            let v_new = half2.v;

            // exit through |v| = 1
            if v_new.abs() >= 1.0 {
                let s = v_new.signum();
                let (theta, step) = self.locate(x, v, h, |vm| s * vm >= 1.0)?;
                self.log_w += step.jint;
                self.x = x + theta;
                self.v = s;
                let side = if s > 0.0 { Side::Plus } else { Side::Minus };
                self.traj.switch(self.x, self.v, Mode::flow(side), EventKind::LayerExit, None);
                if self.rule == StopRule::FirstLayerExit {
                    return Ok(Phase::Stop(StopReason::LayerExit));
                }
                return Ok(Phase::Continue);
            }
            if let StopRule::DownwardZero { after } = self.rule {
                if x + h > after && v > 0.0 && v_new <= 0.0 {
                    let (theta, step) = self.locate(x, v, h, |vm| vm <= 0.0)?;
                    if x + theta >= after {
                        self.log_w += step.jint;
                        self.x = x + theta;
                        self.v = 0.0;
                        self.traj.push(self.x, 0.0);
                        return Ok(Phase::Stop(StopReason::DownwardZero));
                    }
                }
            }
            self.log_w += half1.jint + half2.jint;
            self.x = if remaining - h <= 1e-15 * remaining.abs().max(1.0) { self.x_end } else { x + h };
            self.v = v_new;
            self.traj.push(self.x, self.v);
            return Ok(Phase::Continue);
        }
    }

    /// Smallest `θ ∈ (0, h]` where the single-step solution satisfies `hit`.
    fn locate(&self, x: f64, v: f64, h: f64, hit: impl Fn(f64) -> bool) -> Result<(f64, StepResult)> {
        let fail = || Error::Solver(format!("event location failed near x = {x}"));
        let full = radau_step(&self.sys, x, v, h).ok_or_else(fail)?;
        if !hit(full.v) {
            // the doubled step saw the event, the single one grazes it
            return Ok((h, full));
        }
        let (mut lo, mut hi) = (0.0, h);
        let mut at_hi = full;
        while hi - lo > EVENT_XTOL {
            let mid = 0.5 * (lo + hi);
            let s = radau_step(&self.sys, x, v, mid).ok_or_else(fail)?;
            if hit(s.v) {
                hi = mid;
                at_hi = s;
            } else {
                lo = mid;
            }
        }
        Ok((hi, at_hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularization::layer::fold_points;

    fn params(a: f64, eps: f64) -> OscillatorParams {
        OscillatorParams::new(a).unwrap().with_epsilon(eps).unwrap()
    }

    #[test]
    fn radau_tableau_is_consistent() {
        for i in 0..3 {
            let row: f64 = A[i].iter().sum();
            assert!((row - C[i]).abs() < 1e-15);
        }
        // order conditions Σ b c^k = 1/(k+1), k ≤ 4
        for k in 0..5 {
            let s: f64 = (0..3).map(|j| A[2][j] * C[j].powi(k)).sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn radau_step_is_fifth_order_on_a_smooth_problem() {
        // with v far outside [-1, 1] the field is linear: v' = −av − sin(πx/2)/ε
        let p = params(0.5, 1.0);
        let sys = LayerSystem::new(SwitchingModel::Linear, &p).unwrap();
        let flow = HalfPlaneFlow::new(&p, Side::Minus);
        let exact = flow.flow(0.3, -5.0, 0.3 + 0.4);
        let errs: Vec<f64> = [0.4, 0.2]
            .iter()
            .map(|&h| {
                let mut v = -5.0;
                let mut x = 0.3;
                while x < 0.7 - 1e-12 {
                    v = radau_step(&sys, x, v, h).unwrap().v;
                    x += h;
                }
                (v - exact).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.5, "order {order}, errors {errs:?}");
    }

    #[test]
    fn exterior_matches_integration_of_linear_field() {
        let p = params(1.0, 1e-3);
        // start well above the layer in S+ and come back
        let run = integrate_layer(SwitchingModel::Linear, &p, LayerState::new(0.1, 50.0), 0.6, &LayerOptions::default()).unwrap();
        let flow = HalfPlaneFlow::new(&p, Side::Plus);
        let arc = run.arcs[0];
        assert!((flow.flow(0.1, 0.05, arc.x1) - 1e-3).abs() < 1e-12);
        let xm = 0.5 * (arc.x0 + arc.x1);
        assert!((run.value_at(xm).unwrap() - flow.flow(0.1, 0.05, xm) / 1e-3).abs() < 1e-9);
        assert_eq!(run.trajectory.events[0].kind, EventKind::LayerEntry);
    }

    #[test]
    fn fast_transit_is_captured_by_attracting_linear_branch() {
        // linear branch (8/3, 10/3) attracts: start in the layer and watch v approach v₀
        let p = params(2.0, 1e-3);
        let b = crate::sliding::SlidingBranch::linear(1);
        let run = integrate_layer(SwitchingModel::Linear, &p, LayerState::new(2.9, 0.0), 3.1, &LayerOptions::default()).unwrap();
        let v0 = crate::regularization::layer::critical_branch(&b, 3.1, &p).unwrap();
        assert!((run.end.v - v0).abs() < 0.01, "{} vs {v0}", run.end.v);
        assert!(run.log_derivative < -50.0);
    }

    #[test]
    fn layer_exit_located_on_boundary() {
        let p = params(0.01, 1e-3);
        let b = crate::sliding::SlidingBranch::nonlinear(8).unwrap();
        let x0 = 14.5;
        let v0 = crate::regularization::layer::critical_branch(&b, x0, &p).unwrap();
        let run = integrate_layer_until(
            SwitchingModel::Nonlinear,
            &p,
            LayerState::new(x0, v0),
            20.0,
            StopRule::FirstLayerExit,
            &LayerOptions::default(),
        )
        .unwrap();
        assert_eq!(run.stop, StopReason::LayerExit);
        assert_eq!(run.end.v, -1.0);
        let fold = fold_points(Side::Minus, 8, &p).unwrap();
        assert!(run.end.x > fold && run.end.x < fold + 0.2, "{} vs fold {fold}", run.end.x);
        assert!(run.trajectory.check().is_ok());
    }

    #[test]
    fn event_location_is_tight() {
        let p = params(0.01, 1e-3);
        let opts = LayerOptions::default();
        let b = crate::sliding::SlidingBranch::nonlinear(8).unwrap();
        let v0 = crate::regularization::layer::critical_branch(&b, 14.5, &p).unwrap();
        let run = integrate_layer_until(SwitchingModel::Nonlinear, &p, LayerState::new(14.5, v0), 20.0, StopRule::FirstLayerExit, &opts).unwrap();
        let loose = LayerOptions { max_step: 0.005, ..opts };
        let run2 = integrate_layer_until(SwitchingModel::Nonlinear, &p, LayerState::new(14.5, v0), 20.0, StopRule::FirstLayerExit, &loose).unwrap();
        assert!((run.end.x - run2.end.x).abs() < 1e-7, "{} vs {}", run.end.x, run2.end.x);
    }

    #[test]
    fn exterior_return_from_fold_leaves_outwards() {
        let p = params(1.0, 1e-3);
        let x = fold_points(Side::Plus, 1, &p).unwrap();
        let r = exterior_return(&p, Side::Plus, x, 1e-3, 50.0).unwrap().unwrap();
        assert!(r > fold_points(Side::Plus, 2, &p).unwrap() && r < fold_points(Side::Plus, 3, &p).unwrap(), "{r}");
    }

    #[test]
    fn variational_log_matches_finite_difference() {
        let p = params(0.5, 0.05);
        let opts = LayerOptions { tol: 1e-12, ..Default::default() };
        let go = |v: f64| integrate_layer(SwitchingModel::Linear, &p, LayerState::new(0.2, v), 3.0, &opts).unwrap();
        let base = go(0.3);
        let d = 1e-5;
        let fd = (go(0.3 + d).end.v - go(0.3 - d).end.v) / (2.0 * d);
        let var = base.log_derivative.exp();
        assert!((fd - var).abs() < 1e-4 * var.abs().max(1e-3), "fd {fd}, variational {var}");
    }
}
