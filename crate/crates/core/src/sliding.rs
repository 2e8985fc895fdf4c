//! Threshold semantics of the discontinuous system: sliding branches,
//! entry-branch selection, event-driven hybrid simulation and the sliding
//! period-4 orbits of both switching models.
//!
//! Which branch a trajectory lands on when several overlap is not decided by
//! the discontinuous system itself. The rule used here is the `ε → 0` limit
//! of the layer's fast dynamics `v' = −f(x, ψ(v))/ε`: starting from
//! `λ = ±1` on the entry side, `λ` moves inward until the first root of
//! `f(x, ·)`. That root is fast-attracting by construction.

use serde::{Deserialize, Serialize};

use crate::analytic::HalfPlaneFlow;
use crate::error::{Error, Result};
use crate::model::{
    classify_threshold_point, BranchId, HybridState, Mode, OscillatorParams, Region, Side, SwitchingModel,
};
use crate::poincare::{departure_admissible, next_crossing, MAP_TOL};
use crate::roots::bisect;
use crate::trajectory::{EventKind, Trajectory};

/// Stability of a branch under the fast layer dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attracting,
    Repelling,
}

/// One connected branch of the sliding manifold `{f(x, λ) = 0, |λ| < 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlidingBranch {
    pub model: SwitchingModel,
    /// Interval index `k` (linear) or branch number `n` (nonlinear).
    pub index: i64,
    /// Open domain in `x`.
    pub domain: (f64, f64),
    pub stability: Stability,
}

impl SlidingBranch {
    pub fn linear(k: i64) -> Self {
        let lo = 2.0 / 3.0 + 2.0 * k as f64;
        SlidingBranch {
            model: SwitchingModel::Linear,
            index: k,
            domain: (lo, lo + 2.0 / 3.0),
            // k even: (2/3, 4/3) mod 4 repels; k odd: (8/3, 10/3) mod 4 attracts
            stability: if k.rem_euclid(2) == 0 { Stability::Repelling } else { Stability::Attracting },
        }
    }

    pub fn nonlinear(n: i64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter(format!("nonlinear branch index must be ≥ 1, got {n}")));
        }
        let top = 2.0 * n as f64;
        Ok(SlidingBranch {
            model: SwitchingModel::Nonlinear,
            index: n,
            domain: (top / 3.0, top),
            stability: if n % 2 == 0 { Stability::Attracting } else { Stability::Repelling },
        })
    }

    pub fn id(&self) -> BranchId {
        BranchId { model: self.model, index: self.index }
    }

    pub fn from_id(id: BranchId) -> Result<Self> {
        match id.model {
            SwitchingModel::Linear => Ok(Self::linear(id.index)),
            SwitchingModel::Nonlinear => Self::nonlinear(id.index),
        }
    }

    pub fn width(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.domain.0 && x < self.domain.1
    }

    /// `λ(x)` without the domain check.
    pub fn lambda_unchecked(&self, x: f64) -> f64 {
        match self.model {
            SwitchingModel::Linear => -1.0 - 1.0 / crate::model::cos_pi(x),
            SwitchingModel::Nonlinear => 2.0 * (self.index as f64 / x - 1.0),
        }
    }

    pub fn lambda(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside branch {} domain ({}, {})",
                self.id(),
                self.domain.0,
                self.domain.1
            )));
        }
        Ok(self.lambda_unchecked(x))
    }

    /// `dλ/dx`.
    pub fn dlambda(&self, x: f64) -> f64 {
        match self.model {
            SwitchingModel::Linear => {
                let c = crate::model::cos_pi(x);
                -std::f64::consts::PI * crate::model::sin_pi(x) / (c * c)
            }
            SwitchingModel::Nonlinear => -2.0 * self.index as f64 / (x * x),
        }
    }

    /// Side selected by `λ → ±1` at the right end of the domain. The
    /// simulator falls back to the other side when this field curves back
    /// into the threshold (repelling branches).
    pub fn exit_side(&self) -> Side {
        match self.model {
            SwitchingModel::Linear => Side::Plus,
            SwitchingModel::Nonlinear => Side::Minus,
        }
    }
}

/// Linear branches meeting `[lo, hi]`.
pub fn linear_branches(x_range: (f64, f64)) -> Vec<SlidingBranch> {
    let (lo, hi) = x_range;
    let k_min = ((lo - 4.0 / 3.0) / 2.0).floor() as i64;
    let k_max = ((hi - 2.0 / 3.0) / 2.0).ceil() as i64;
    (k_min..=k_max)
        .map(SlidingBranch::linear)
        .filter(|b| b.domain.1 > lo && b.domain.0 < hi)
        .collect()
}

/// Nonlinear branches meeting `[lo, hi]`; they overlap for `x > 4/3`.
pub fn nonlinear_branches(x_range: (f64, f64)) -> Vec<SlidingBranch> {
    let (lo, hi) = x_range;
    let n_min = ((lo / 2.0).floor() as i64).max(1);
    let n_max = (1.5 * hi).ceil() as i64;
    (n_min..=n_max)
        .filter_map(|n| SlidingBranch::nonlinear(n).ok())
        .filter(|b| b.domain.1 > lo && b.domain.0 < hi)
        .collect()
}

pub fn branches(model: SwitchingModel, x_range: (f64, f64)) -> Vec<SlidingBranch> {
    match model {
        SwitchingModel::Linear => linear_branches(x_range),
        SwitchingModel::Nonlinear => nonlinear_branches(x_range),
    }
}

/// Result of landing on the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntrySelection {
    /// No root of `f(x, ·)` in `(−1, 1)` blocks the passage.
    Crossing,
    Branch { branch: SlidingBranch, lambda: f64 },
    /// The first root sits at `λ = ±1`: a tangency that needs fold handling.
    Tangency { lambda: f64 },
}

const TANGENCY_LAMBDA_TOL: f64 = 1e-12;

/// Select the branch captured by a trajectory arriving at `(x_entry, 0)` from `from_side`.
pub fn select_branch_on_entry(model: SwitchingModel, x_entry: f64, from_side: Side) -> Result<EntrySelection> {
    let params = OscillatorParams::new(1.0)?;
    let inward = crate::model::threshold_field(&params, from_side, x_entry) * from_side.sign();
    if inward >= 0.0 {
        return Err(Error::Domain(format!(
            "field of S{from_side} does not point into the threshold at x = {x_entry}"
        )));
    }
    let candidate = match model {
        SwitchingModel::Linear => {
            let k = ((x_entry - 2.0 / 3.0) / 2.0).floor() as i64;
            let b = SlidingBranch::linear(k);
            let lambda = b.lambda_unchecked(x_entry);
            (lambda.abs() <= 1.0 && !lambda.is_nan()).then_some((b, lambda))
        }
        SwitchingModel::Nonlinear => {
            let n = match from_side {
                // largest n with λ_n < 1
                Side::Plus => (1.5 * x_entry).ceil() as i64 - 1,
                // smallest n with λ_n > −1
                Side::Minus => (0.5 * x_entry).floor() as i64 + 1,
            };
            match SlidingBranch::nonlinear(n) {
                Ok(b) => {
                    let lambda = b.lambda_unchecked(x_entry);
                    (lambda.abs() <= 1.0).then_some((b, lambda))
                }
                Err(_) => None,
            }
        }
    };
    Ok(match candidate {
        None => EntrySelection::Crossing,
        Some((_, lambda)) if 1.0 - lambda.abs() < TANGENCY_LAMBDA_TOL => EntrySelection::Tangency { lambda },
        Some((branch, lambda)) => EntrySelection::Branch { branch, lambda },
    })
}

/// Settings of the hybrid simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Residual tolerance on `|h|` at each contact.
    pub tol: f64,
    /// Sampling interval of the stored path.
    pub sample_dx: f64,
    pub max_events: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { tol: MAP_TOL, sample_dx: 0.01, max_events: 100_000 }
    }
}

enum Phase {
    Flow { side: Side, x0: f64, y0: f64 },
    Slide { branch: SlidingBranch },
}

/// Event-driven simulation of the discontinuous system from `initial` to `x_end`.
pub fn simulate_discontinuous(
    model: SwitchingModel,
    params: &OscillatorParams,
    initial: HybridState,
    x_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    simulate_discontinuous_with(model, params, initial, x_end, &SimOptions { tol, ..SimOptions::default() })
}

pub fn simulate_discontinuous_with(
    model: SwitchingModel,
    params: &OscillatorParams,
    initial: HybridState,
    x_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if params.is_regularized() {
        return Err(Error::InvalidParameter("discontinuous simulation needs ε = 0".into()));
    }
    if !(x_end > initial.x) {
        return Err(Error::InvalidParameter(format!("x_end = {x_end} must exceed start x = {}", initial.x)));
    }
    initial.check()?;
    let mut traj = Trajectory::new(0.0);
    let mut phase = match initial.mode {
        Mode::Layer => return Err(Error::InvalidParameter("layer states need ε > 0".into())),
        Mode::Sliding(id) => {
            let branch = SlidingBranch::from_id(id)?;
            if branch.model != model || !branch.contains(initial.x) {
                return Err(Error::InvalidParameter(format!("x = {} is not on branch {id}", initial.x)));
            }
            traj.begin(Mode::Sliding(id), initial.x, 0.0);
            Phase::Slide { branch }
        }
        Mode::FlowPlus | Mode::FlowMinus => {
            let side = if initial.mode == Mode::FlowPlus { Side::Plus } else { Side::Minus };
            if initial.y == 0.0 {
                if classify_threshold_point(initial.x) == Region::Repelling {
                    return Err(Error::InvalidParameter(format!(
                        "start ({}, 0) lies on a repelling sliding region; departure is not unique",
                        initial.x
                    )));
                }
                if !departure_admissible(&HalfPlaneFlow::new(params, side), initial.x) {
                    return Err(Error::InadmissibleDeparture { side: side.name(), x: initial.x });
                }
            }
            traj.begin(Mode::flow(side), initial.x, initial.y);
            Phase::Flow { side, x0: initial.x, y0: initial.y }
        }
    };

    for _ in 0..opts.max_events {
        match phase {
            Phase::Flow { side, x0, y0 } => {
                let flow = HalfPlaneFlow::new(params, side);
                let x_c = if y0 == 0.0 {
                    next_crossing(side, x0, params, opts.tol)?.x_next
                } else {
                    next_contact(&flow, x0, y0)?
                };
                let stop = x_c.min(x_end);
                sample_flow(&mut traj, &flow, x0, y0, stop, opts.sample_dx);
                if x_c >= x_end {
                    traj.push(x_end, flow.flow(x0, y0, x_end));
                    break;
                }
                match select_branch_on_entry(model, x_c, side) {
                    Ok(EntrySelection::Branch { branch, .. }) => {
                        traj.switch(x_c, 0.0, Mode::Sliding(branch.id()), EventKind::SlideEntry, Some(branch.id()));
                        phase = Phase::Slide { branch };
                    }
                    Ok(EntrySelection::Crossing) => {
                        let next = side.opposite();
                        traj.switch(x_c, 0.0, Mode::flow(next), EventKind::Cross, None);
                        phase = Phase::Flow { side: next, x0: x_c, y0: 0.0 };
                    }
                    Ok(EntrySelection::Tangency { lambda }) => {
                        let next = if lambda > 0.0 { Side::Plus } else { Side::Minus };
                        traj.switch(x_c, 0.0, Mode::flow(next), EventKind::Cross, None);
                        phase = Phase::Flow { side: next, x0: x_c, y0: 0.0 };
                    }
                    Err(e) => {
                        return Err(Error::Solver(format!("grazing contact at x = {x_c}: {e}")));
                    }
                }
            }
            Phase::Slide { branch } => {
                let x0 = traj.x_end();
                let x_exit = branch.domain.1;
                let stop = x_exit.min(x_end);
                let mut x = x0;
                while x + opts.sample_dx < stop {
                    x += opts.sample_dx;
                    traj.push(x, 0.0);
                }
                if x_exit >= x_end {
                    traj.push(x_end, 0.0);
                    break;
                }
                // leave into the half-plane whose field points away from the threshold
                let preferred = branch.exit_side();
                let side = [preferred, preferred.opposite()]
                    .into_iter()
                    .find(|&s| departure_admissible(&HalfPlaneFlow::new(params, s), x_exit))
                    .ok_or(Error::InadmissibleDeparture { side: preferred.name(), x: x_exit })?;
                traj.switch(x_exit, 0.0, Mode::flow(side), EventKind::SlideExit, Some(branch.id()));
                phase = Phase::Flow { side, x0: x_exit, y0: 0.0 };
            }
        }
    }
    traj.tidy();
    Ok(traj)
}

fn sample_flow(traj: &mut Trajectory, flow: &HalfPlaneFlow, x0: f64, y0: f64, x1: f64, dx: f64) {
    let mut x = x0;
    while x + dx < x1 {
        x += dx;
        traj.push(x, flow.flow(x0, y0, x));
    }
}

/// First zero of the orbit through `(x0, y0 ≠ 0)`.
pub fn next_contact(flow: &HalfPlaneFlow, x0: f64, y0: f64) -> Result<f64> {
    let s = y0.signum();
    let step = (1.0 / (8.0 * flow.omega.value())).min(1.0 / (4.0 * flow.a));
    let horizon = crate::poincare::DEFAULT_HORIZON;
    let y = |x: f64| flow.flow(x0, y0, x);
    let mut prev = x0;
    let mut k = 1.0;
    while k * step <= horizon {
        let x = x0 + k * step;
        if y(x) * s <= 0.0 {
            return Ok(bisect(y, prev, x, 1e-13)?.root);
        }
        prev = x;
        k += 1.0;
    }
    Err(Error::NoRoot { x: x0, horizon })
}

/// The sliding period-4 orbit of the linear system through `(10/3, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSlidingOrbit {
    pub a: f64,
    /// `P₊(10/3)`, `P₋(P₊(10/3))`, `P₊(P₋(P₊(10/3)))`.
    pub crossings: [f64; 3],
    /// `|slide exit − (10/3 + 4)|` in the hybrid simulation.
    pub closure: f64,
    pub trajectory: Trajectory,
}

/// Construct the linear sliding orbit, or report that it does not exist at this `a`.
pub fn find_sliding_period4_linear(a: f64) -> Result<LinearSlidingOrbit> {
    let params = OscillatorParams::new(a)?;
    let start = 10.0 / 3.0;
    let x1 = next_crossing(Side::Plus, start, &params, MAP_TOL)?.x_next;
    let x2 = next_crossing(Side::Minus, x1, &params, MAP_TOL)?.x_next;
    let x3 = next_crossing(Side::Plus, x2, &params, MAP_TOL)?.x_next;
    let window = (20.0 / 3.0, 22.0 / 3.0);
    if !(x3 > window.0 && x3 < window.1) {
        return Err(Error::NoOrbit(format!(
            "three-crossing landing {x3:.12} outside the attracting interval (20/3, 22/3) at a = {a}"
        )));
    }
    let trajectory = simulate_discontinuous(
        SwitchingModel::Linear,
        &params,
        HybridState::departing(start, Side::Plus),
        start + 4.25,
        MAP_TOL,
    )?;
    let exit = trajectory
        .events_of(EventKind::SlideExit)
        .map(|e| e.x)
        .find(|&x| x > start + 2.0)
        .ok_or_else(|| Error::NoOrbit("hybrid run did not leave the attracting branch".into()))?;
    Ok(LinearSlidingOrbit { a, crossings: [x1, x2, x3], closure: (exit - start - 4.0).abs(), trajectory })
}

/// The sliding period-4 orbit `y_d` of the nonlinear system.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSlidingOrbit {
    pub a: f64,
    /// Return point `P₋(0) ∈ (2, 4)`.
    pub x_a: f64,
    /// Worst mismatch between consecutive periods of the hybrid run.
    pub closure: f64,
    /// Two periods from `(0, 0)`.
    pub trajectory: Trajectory,
}

pub fn find_sliding_period4_nonlinear(a: f64) -> Result<NonlinearSlidingOrbit> {
    let params = OscillatorParams::new(a)?;
    let x_a = next_crossing(Side::Minus, 0.0, &params, MAP_TOL)?.x_next;
    if !(x_a > 2.0 && x_a < 4.0) {
        return Err(Error::NoOrbit(format!("P₋(0) = {x_a} outside (2, 4)")));
    }
    let trajectory = simulate_discontinuous(
        SwitchingModel::Nonlinear,
        &params,
        HybridState::departing(0.0, Side::Minus),
        8.0 + 1e-9,
        MAP_TOL,
    )?;
    let entries: Vec<f64> = trajectory.events_of(EventKind::SlideEntry).map(|e| e.x).collect();
    let exits: Vec<f64> = trajectory.events_of(EventKind::SlideExit).map(|e| e.x).collect();
    if entries.len() < 2 || exits.len() < 2 {
        return Err(Error::NoOrbit(format!("expected two slides, found {} entries / {} exits", entries.len(), exits.len())));
    }
    let closure = [(entries[0] - x_a).abs(), (entries[1] - 4.0 - x_a).abs(), (exits[0] - 4.0).abs(), (exits[1] - 8.0).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(NonlinearSlidingOrbit { a, x_a, closure, trajectory })
}

/// Landing margins of the crossing maps from the lattice points `4n − 2` and `4n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeMargin {
    pub n: i64,
    /// `P₊(4n − 2)` and its distance inside `(4n − 4/3, 4n − 2/3)`.
    pub p_plus: Option<(f64, f64)>,
    /// `P₋(4n)` and its distance inside `(4n + 2, 4n + 4)`.
    pub p_minus: (f64, f64),
}

impl LatticeMargin {
    pub fn all_inside(&self) -> bool {
        self.p_minus.1 > 0.0 && self.p_plus.is_none_or(|p| p.1 > 0.0)
    }
}

fn margin(x: f64, lo: f64, hi: f64) -> f64 {
    (x - lo).min(hi - x)
}

/// Orbits leaving `S₀` at `x = 2n` return within two units, so no
/// non-sliding periodic orbit can alternate between `S₊` and `S₋`.
pub fn check_no_nonsliding_periodic_nonlinear(a: f64, n_max: i64) -> Result<Vec<LatticeMargin>> {
    let params = OscillatorParams::new(a)?;
    (0..=n_max)
        .map(|n| {
            let nf = n as f64;
            let p_plus = if n >= 1 {
                let x = next_crossing(Side::Plus, 4.0 * nf - 2.0, &params, MAP_TOL)?.x_next;
                Some((x, margin(x, 4.0 * nf - 4.0 / 3.0, 4.0 * nf - 2.0 / 3.0)))
            } else {
                None
            };
            let x = next_crossing(Side::Minus, 4.0 * nf, &params, MAP_TOL)?.x_next;
            Ok(LatticeMargin { n, p_plus, p_minus: (x, margin(x, 4.0 * nf + 2.0, 4.0 * nf + 4.0)) })
        })
        .collect()
}

/// First threshold hit `x_T` and whether the run stays in the closed lower
/// half-plane afterwards (`v ≤ 1` for regularized runs).
pub fn confinement_check(trajectory: &Trajectory) -> (f64, bool) {
    let start = trajectory.segments.first().and_then(|s| s.points.first().copied());
    let Some((x0, y0)) = start else {
        return (f64::NAN, false);
    };
    let ceiling = if trajectory.epsilon > 0.0 { 1.0 } else { 0.0 };
    let x_t = if y0 < -ceiling {
        x0
    } else {
        match trajectory.events.first() {
            Some(e) => e.x,
            None => return (f64::NAN, false),
        }
    };
    let slack = 1e-9;
    let confined = trajectory.samples().filter(|&(x, _, _)| x > x_t).all(|(_, y, _)| y <= ceiling + slack);
    (x_t, confined)
}

/// One row of the ageing table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeingRow {
    pub branch: i64,
    pub width: f64,
    /// Total slid length on this branch in the supplied trajectory.
    pub slid_length: Option<f64>,
}

/// Branch widths over `x_range` and, if given, the slid lengths of `trajectory`.
pub fn ageing_metrics(model: SwitchingModel, x_range: (f64, f64), trajectory: Option<&Trajectory>) -> Vec<AgeingRow> {
    let slid = |index: i64| -> Option<f64> {
        let t = trajectory?;
        let total: f64 = t
            .segments
            .iter()
            .filter(|s| matches!(s.mode, Mode::Sliding(id) if id.index == index && id.model == model))
            .map(|s| s.length())
            .sum();
        Some(total)
    };
    branches(model, x_range)
        .into_iter()
        .map(|b| AgeingRow { branch: b.index, width: b.width(), slid_length: slid(b.index) })
        .collect()
}

/// Verdict on an apparent periodicity of a hybrid run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodicityVerdict {
    Periodic,
    NotPeriodic,
    /// Repeats in the discontinuous picture, but relies on threshold dynamics
    /// that only a regularized run can confirm.
    UnverifiedAtThreshold,
}

/// Compare event sequences one `period` apart.
///
/// Nonlinear runs that slide are only accepted as periodic when every slide
/// is entered from `S₋` and left at an even lattice point `4n`, the canonical
/// structure of `y_d`; anything else is flagged.
pub fn periodicity_verdict(model: SwitchingModel, trajectory: &Trajectory, period: f64, tol: f64) -> PeriodicityVerdict {
    let events = &trajectory.events;
    let Some(first) = events.first() else {
        return PeriodicityVerdict::NotPeriodic;
    };
    let x_limit = trajectory.x_end();
    let in_first: Vec<_> = events.iter().filter(|e| e.x < first.x + period - tol).collect();
    let mut matched = !in_first.is_empty();
    for e in &in_first {
        if e.x + period > x_limit {
            matched = false;
            break;
        }
        let found = events.iter().any(|f| f.kind == e.kind && (f.x - e.x - period).abs() < tol);
        if !found {
            matched = false;
            break;
        }
    }
    if !matched {
        return PeriodicityVerdict::NotPeriodic;
    }
    let slides = trajectory.segments.iter().any(|s| matches!(s.mode, Mode::Sliding(_)));
    if model == SwitchingModel::Nonlinear && slides {
        let canonical = (period - 4.0).abs() < tol
            && trajectory.segments.windows(2).all(|w| match w[1].mode {
                Mode::Sliding(_) => w[0].mode == Mode::FlowMinus,
                _ => true,
            })
            && trajectory.events_of(EventKind::SlideExit).all(|e| (e.x / 4.0 - (e.x / 4.0).round()).abs() < 1e-12);
        if !canonical {
            return PeriodicityVerdict::UnverifiedAtThreshold;
        }
    }
    PeriodicityVerdict::Periodic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Frequencies;
    use proptest::prelude::*;

    fn params(a: f64) -> OscillatorParams {
        OscillatorParams::new(a).unwrap()
    }

    #[test]
    fn linear_branch_table() {
        let b = linear_branches((0.0, 4.0));
        assert_eq!(b.len(), 2);
        assert!((b[0].domain.0 - 2.0 / 3.0).abs() < 1e-15 && (b[0].domain.1 - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(b[0].stability, Stability::Repelling);
        assert!((b[1].domain.0 - 8.0 / 3.0).abs() < 1e-15 && (b[1].domain.1 - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(b[1].stability, Stability::Attracting);
        assert!(b[0].lambda(1.0).unwrap().abs() < 1e-15);
        for end in [2.0 / 3.0 + 1e-9, 4.0 / 3.0 - 1e-9] {
            assert!((b[0].lambda_unchecked(end).abs() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn nonlinear_branch_table() {
        let b = nonlinear_branches((0.0, 8.0));
        assert!(b.iter().any(|b| b.index == 1 && (b.domain.1 - 2.0).abs() < 1e-15));
        assert!(b.iter().any(|b| b.index == 2 && (b.domain.1 - 4.0).abs() < 1e-15));
        let n3 = SlidingBranch::nonlinear(3).unwrap();
        assert!((n3.width() - 4.0).abs() < 1e-14);
        for n in 1..30 {
            let b = SlidingBranch::nonlinear(n).unwrap();
            assert!(b.lambda(n as f64).unwrap().abs() < 1e-15);
            assert!((b.width() - 4.0 * n as f64 / 3.0).abs() < 1e-12);
        }
        for b in linear_branches((0.0, 40.0)) {
            assert!((b.width() - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn branches_are_nullclines() {
        let freqs = Frequencies::STANDARD;
        for b in linear_branches((0.0, 12.0)).into_iter().chain(nonlinear_branches((0.0, 60.0))) {
            for i in 1..50 {
                let x = b.domain.0 + b.width() * i as f64 / 50.0;
                let lambda = b.lambda(x).unwrap();
                assert!(lambda.abs() < 1.0);
                let r = freqs.forcing(b.model, x, lambda).unwrap();
                assert!(r.abs() < 1e-12, "branch {} x = {x}: {r:e}", b.id());
            }
        }
    }

    #[test]
    fn stability_matches_fast_linearization() {
        // attracting ⇔ ∂f/∂λ > 0 at the root (v' = −f/ε decreases through the root)
        let freqs = Frequencies::STANDARD;
        for b in linear_branches((0.0, 12.0)).into_iter().chain(nonlinear_branches((0.0, 30.0))) {
            let x = 0.5 * (b.domain.0 + b.domain.1);
            let d = freqs.forcing_dlambda(b.model, x, b.lambda(x).unwrap());
            assert_eq!(d > 0.0, b.stability == Stability::Attracting, "branch {}", b.id());
        }
    }

    #[test]
    fn entry_selection_examples() {
        match select_branch_on_entry(SwitchingModel::Linear, 3.0, Side::Plus).unwrap() {
            EntrySelection::Branch { branch, lambda } => {
                assert_eq!(branch.index, 1);
                assert!(lambda.abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            select_branch_on_entry(SwitchingModel::Nonlinear, 0.5, Side::Plus).unwrap(),
            EntrySelection::Crossing
        );
        match select_branch_on_entry(SwitchingModel::Nonlinear, 3.0, Side::Plus).unwrap() {
            EntrySelection::Branch { branch, lambda } => {
                assert_eq!(branch.index, 4);
                assert!((lambda - 2.0 / 3.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert!(select_branch_on_entry(SwitchingModel::Linear, 1.0, Side::Plus).is_err());
    }

    /// Freeze `x` and integrate the fast subsystem from just inside the layer.
    fn fast_limit(model: SwitchingModel, x: f64, from: Side) -> f64 {
        let eps = 1e-4;
        let psi = crate::TransitionFunction::Cubic;
        let freqs = Frequencies::STANDARD;
        let f = |v: f64| -freqs.forcing_unchecked(model, x, psi.psi(v)) / eps;
        let mut v = from.sign() * 0.999;
        let h = eps * 0.05;
        for _ in 0..400_000 {
            let k1 = f(v);
            let k2 = f(v + 0.5 * h * k1);
            let k3 = f(v + 0.5 * h * k2);
            let k4 = f(v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        psi.psi(v)
    }

    #[test]
    fn selection_agrees_with_fast_subsystem() {
        let cases = [
            (SwitchingModel::Nonlinear, 3.0, Side::Plus),
            (SwitchingModel::Nonlinear, 3.5, Side::Minus),
            (SwitchingModel::Nonlinear, 15.228, Side::Plus),
            (SwitchingModel::Linear, 2.9, Side::Minus),
        ];
        for (model, x, side) in cases {
            let EntrySelection::Branch { lambda, .. } = select_branch_on_entry(model, x, side).unwrap() else {
                panic!("expected a branch at x = {x}");
            };
            let limit = fast_limit(model, x, side);
            assert!((limit - lambda).abs() < 1e-6, "x = {x}: {limit} vs {lambda}");
        }
    }

    #[test]
    fn linear_sliding_orbit_at_large_damping() {
        let orbit = find_sliding_period4_linear(10.0).unwrap();
        assert!(orbit.crossings[0] > 4.0 && orbit.crossings[0] < 14.0 / 3.0);
        assert!(orbit.closure < 1e-8);
        assert!(orbit.trajectory.check().is_ok());
        assert!(matches!(find_sliding_period4_linear(1e-3), Err(Error::NoOrbit(_))));
    }

    #[test]
    fn nonlinear_sliding_orbit() {
        for a in [0.1, 0.5, 2.0] {
            let orbit = find_sliding_period4_nonlinear(a).unwrap();
            assert!(orbit.x_a > 2.0 && orbit.x_a < 4.0);
            assert!(orbit.closure < 1e-12, "a = {a}: {}", orbit.closure);
            assert!(orbit.trajectory.samples().all(|(_, y, _)| y <= 0.0));
            assert_eq!(
                periodicity_verdict(SwitchingModel::Nonlinear, &orbit.trajectory, 4.0, 1e-9),
                PeriodicityVerdict::Periodic
            );
        }
        let far = next_crossing(Side::Minus, 0.0, &params(1e3), MAP_TOL).unwrap().x_next;
        assert!(far > 2.0 && far - 2.0 < 1e-2);
    }

    #[test]
    fn lattice_margins_positive() {
        for a in [0.1, 1.0, 10.0] {
            for m in check_no_nonsliding_periodic_nonlinear(a, 10).unwrap() {
                assert!(m.all_inside(), "a = {a}, n = {}: {m:?}", m.n);
            }
        }
    }

    #[test]
    fn confinement_after_first_hit() {
        let t = simulate_discontinuous(
            SwitchingModel::Nonlinear,
            &params(0.5),
            HybridState::off_threshold(0.1, 0.5).unwrap(),
            20.0,
            MAP_TOL,
        )
        .unwrap();
        let (x_t, confined) = confinement_check(&t);
        assert!(x_t > 0.1 && confined);
        let t = simulate_discontinuous(
            SwitchingModel::Nonlinear,
            &params(0.5),
            HybridState::off_threshold(0.1, -0.5).unwrap(),
            10.0,
            MAP_TOL,
        )
        .unwrap();
        assert_eq!(confinement_check(&t), (0.1, true));
    }

    #[test]
    fn linear_hybrid_run_reproduces_map_fixed_point() {
        let orbit = crate::poincare::find_nonsliding_period4(0.01, 1e-14).unwrap();
        let t = simulate_discontinuous(
            SwitchingModel::Linear,
            &params(0.01),
            HybridState::departing(orbit.x_star, Side::Minus),
            orbit.x_star + 4.5,
            MAP_TOL,
        )
        .unwrap();
        let crosses: Vec<f64> = t.events_of(EventKind::Cross).map(|e| e.x).collect();
        assert!((crosses[1] - orbit.x_star - 4.0).abs() < 1e-8);
        assert!(t.events_of(EventKind::SlideEntry).next().is_none());
    }

    #[test]
    fn repelling_start_is_rejected() {
        let r = simulate_discontinuous(
            SwitchingModel::Linear,
            &params(1.0),
            HybridState::departing(1.0, Side::Plus),
            5.0,
            MAP_TOL,
        );
        assert!(r.is_err());
        // explicit on-branch start is accepted
        let b = SlidingBranch::linear(0);
        let r = simulate_discontinuous(SwitchingModel::Linear, &params(1.0), HybridState::sliding(1.0, b.id()), 5.0, MAP_TOL);
        assert!(r.is_ok());
    }

    #[test]
    fn apparent_eight_periodicity_is_flagged() {
        // A hand-built run that repeats every 8 and slides after an entry from S₊.
        let mut t = Trajectory::new(0.0);
        let b = BranchId { model: SwitchingModel::Nonlinear, index: 4 };
        for k in 0..3 {
            let o = 8.0 * k as f64;
            if k == 0 {
                t.begin(Mode::FlowPlus, o, 0.1);
            }
            t.push(o + 2.5, 0.2);
            t.switch(o + 3.0, 0.0, Mode::Sliding(b), EventKind::SlideEntry, Some(b));
            t.switch(o + 5.0, 0.0, Mode::FlowMinus, EventKind::SlideExit, Some(b));
            t.push(o + 6.0, -0.2);
            t.switch(o + 7.0, 0.0, Mode::FlowPlus, EventKind::Cross, None);
            t.push(o + 8.0, 0.1);
        }
        assert_eq!(
            periodicity_verdict(SwitchingModel::Nonlinear, &t, 8.0, 1e-9),
            PeriodicityVerdict::UnverifiedAtThreshold
        );
        assert_eq!(periodicity_verdict(SwitchingModel::Linear, &t, 8.0, 1e-9), PeriodicityVerdict::Periodic);
        assert_eq!(periodicity_verdict(SwitchingModel::Linear, &t, 5.0, 1e-9), PeriodicityVerdict::NotPeriodic);
    }

    #[test]
    fn ageing_table() {
        let rows = ageing_metrics(SwitchingModel::Nonlinear, (0.0, 6.0), None);
        let r3 = rows.iter().find(|r| r.branch == 3).unwrap();
        assert!((r3.width - 4.0).abs() < 1e-14);
        assert!(ageing_metrics(SwitchingModel::Linear, (0.0, 20.0), None)
            .iter()
            .all(|r| (r.width - 2.0 / 3.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn entry_lands_on_even_branch(x in 0.7f64..200.0) {
            for side in [Side::Plus, Side::Minus] {
                if let Ok(EntrySelection::Branch { branch, .. }) = select_branch_on_entry(SwitchingModel::Nonlinear, x, side) {
                    prop_assert_eq!(branch.stability, Stability::Attracting);
                    let k = branch.index / 2;
                    let kf = k as f64;
                    match side {
                        Side::Plus => prop_assert!(x > (4.0 * kf - 2.0) / 3.0 && x < 4.0 * kf - 2.0),
                        Side::Minus => prop_assert!(x > 4.0 * kf / 3.0 && x < 4.0 * kf),
                    }
                }
            }
        }

        #[test]
        fn region_pattern_is_four_periodic(x in -50.0f64..50.0) {
            prop_assert_eq!(classify_threshold_point(x), classify_threshold_point(x + 4.0));
        }
    }
}
