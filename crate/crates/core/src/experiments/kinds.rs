//! The experiments a scenario can bind, with their settings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{shooting, Outcome, Results};
use crate::error::{Error, Result};
use crate::fit::power_law;
use crate::io::{Cell, Table};
use crate::model::{classify_threshold_point, forcing, HybridState, Mode, OscillatorParams, Region, Side, SwitchingModel};
use crate::plot::{Plot, Series};
use crate::poincare::{self, composite_map_with, next_crossing, DerivativeMode, MAP_TOL};
use crate::regularization::{
    critical_branch, exit, fold_points, integrate_layer, layer::fold_point_by_bisection, orbits, vr, LayerOptions,
    LayerState, LayerSystem,
};
use crate::sliding::{self, SlidingBranch, Stability};
use crate::trajectory::{EventKind, Trajectory};

fn default_tol() -> f64 {
    1e-13
}

fn default_step() -> f64 {
    0.002
}

/// One experiment and its settings; `a`, `ε` and the switching model come
/// from the enclosing scenario unless a setting overrides them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Root `x₀ ∈ (1/2, 2/3)` of `∂P/∂a` at `a = 0`.
    X0Root,
    /// Non-sliding period-4 orbit of the linear system, cross-checked by
    /// RK4 shooting.
    NonslidingOrbit {
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// `max |P(x) − (x + 4)|` over `samples` midpoints of `(0, 2/3)`.
    SmallALimit { samples: usize },
    /// Landing intervals of the crossing maps from `10/3`, `4n` and `4n − 2`.
    IntervalConfinement { a_values: Vec<f64>, n_max: i64 },
    /// Linear sliding orbit through `(10/3, 0)` where it exists, and its
    /// reported absence where it does not.
    LinearSliding { present_a: f64, absent_a: f64 },
    /// Whether the linear sliding orbit through `(10/3, 0)` exists at `a`.
    SlidingExistence,
    /// Nonlinear sliding period-4 orbit `y_d` for several `a`.
    NonlinearSliding { a_values: Vec<f64> },
    /// Closed-form fold points against bisection roots, for several `aε`.
    FoldPoints { products: Vec<f64>, n_max: i64 },
    /// Regularized linear fixed points over an `ε` grid at `a`, and the
    /// contraction of the sliding orbit at `large_a`.
    RegularizedLinear { epsilons: Vec<f64>, large_a: f64, contraction_epsilons: Vec<f64> },
    /// Single regularized linear fixed point at the scenario `(a, ε)`.
    RegularizedFixedPoint,
    /// Exit-point deviations and their power-law fits.
    ExitScaling { epsilons: Vec<f64>, n_fixed: i64, ns: Vec<i64>, eps_fixed: f64 },
    /// Single exit point of branch `2n`.
    ExitPoint { n: i64 },
    /// `max |v − v₀| / (ε|v₁|)` on the closeness windows of branches `2n`.
    SlowManifoldCloseness { ns: Vec<i64> },
    /// First capture, slide and exit of a run started at `(x0, v0)`.
    Collapse {
        x0: f64,
        v0: f64,
        x_end: f64,
        /// Half-indices of `v_r` windows to measure after the exit.
        #[serde(default)]
        vr_windows: Option<(i64, i64)>,
    },
    /// Window distances of a long run to `v_r`.
    VrConvergence {
        x0: f64,
        v0: f64,
        n_first: i64,
        n_last: i64,
        #[serde(default = "default_step")]
        max_step: f64,
    },
    /// Forcing-model agreement, `ψ` properties, nullcline residuals and
    /// the shooting cross-check of the non-sliding orbit.
    PropertySuites { x_max: f64, n_max: i64 },
    /// Sliding orbit at `sliding_a` and the non-sliding orbit at
    /// `nonsliding_a` with its two crossings.
    LinearPeriodicPair { sliding_a: f64, nonsliding_a: f64 },
    /// Attracting/repelling/crossing segments of the threshold over `x_range`.
    ThresholdRegions { x_range: (f64, f64) },
    /// Nonlinear branch domains and their overlap over `x_range`.
    NonlinearBranches { x_range: (f64, f64), overlap_at: Vec<f64> },
    /// `y_d` plus runs from `starts` that are attracted onto it.
    NonlinearOrbits { starts: Vec<(f64, f64)>, x_end: f64 },
    /// Long linear runs from `(10/3, 0)` for several `a`: settled period and
    /// slid length per period.
    LinearPeriodFamily { a_values: Vec<f64>, x_end: f64 },
    /// Fold points on both boundaries, their tangency and alternation.
    FoldTable { n_max: i64 },
    /// Regularized linear non-sliding and sliding orbits and their heights
    /// at probe abscissae.
    RegularizedLinearOrbits { nonsliding_a: f64, sliding_a: f64, probe_x: f64 },
    /// Component maps of `P_ε` against their discontinuous limits.
    MapDecomposition { x: f64, epsilons: Vec<f64> },
    /// Critical manifolds of the nonlinear layer for `n = 1..=n_max`.
    LayerManifolds { n_max: i64, samples: usize },
}

impl Experiment {
    /// Copy with the branch half-index replaced, for `n` sweeps.
    pub fn with_n(&self, n: i64) -> Result<Experiment> {
        match self {
            Experiment::ExitPoint { .. } => Ok(Experiment::ExitPoint { n }),
            Experiment::SlowManifoldCloseness { .. } => Ok(Experiment::SlowManifoldCloseness { ns: vec![n] }),
            other => Err(Error::InvalidParameter(format!("experiment {other:?} has no branch index"))),
        }
    }

    pub fn run(&self, model: SwitchingModel, params: &OscillatorParams) -> Result<Outcome> {
        let opts = LayerOptions::default();
        match self {
            Experiment::X0Root => x0_root(),
            Experiment::NonslidingOrbit { tol } => nonsliding_orbit(params, *tol),
            Experiment::SmallALimit { samples } => small_a_limit(params, *samples),
            Experiment::IntervalConfinement { a_values, n_max } => interval_confinement(a_values, *n_max),
            Experiment::LinearSliding { present_a, absent_a } => linear_sliding(*present_a, *absent_a),
            Experiment::SlidingExistence => sliding_existence(params.a),
            Experiment::NonlinearSliding { a_values } => nonlinear_sliding(a_values),
            Experiment::FoldPoints { products, n_max } => fold_point_check(params.a, products, *n_max),
            Experiment::RegularizedLinear { epsilons, large_a, contraction_epsilons } => {
                regularized_linear(params.a, epsilons, *large_a, contraction_epsilons, &opts)
            }
            Experiment::RegularizedFixedPoint => regularized_fixed_point(params, &opts),
            Experiment::ExitScaling { epsilons, n_fixed, ns, eps_fixed } => {
                exit_scaling(params.a, epsilons, *n_fixed, ns, *eps_fixed, &opts)
            }
            Experiment::ExitPoint { n } => exit_point(*n, params, &opts),
            Experiment::SlowManifoldCloseness { ns } => closeness(ns, params, &opts),
            Experiment::Collapse { x0, v0, x_end, vr_windows } => collapse(params, *x0, *v0, *x_end, *vr_windows, &opts),
            Experiment::VrConvergence { x0, v0, n_first, n_last, max_step } => {
                let opts = LayerOptions { max_step: *max_step, ..opts };
                vr_convergence(params, *x0, *v0, *n_first, *n_last, &opts)
            }
            Experiment::PropertySuites { x_max, n_max } => property_suites(params, *x_max, *n_max),
            Experiment::LinearPeriodicPair { sliding_a, nonsliding_a } => linear_periodic_pair(*sliding_a, *nonsliding_a),
            Experiment::ThresholdRegions { x_range } => threshold_regions(*x_range),
            Experiment::NonlinearBranches { x_range, overlap_at } => nonlinear_branch_table(*x_range, overlap_at),
            Experiment::NonlinearOrbits { starts, x_end } => nonlinear_orbits(params, starts, *x_end),
            Experiment::LinearPeriodFamily { a_values, x_end } => linear_period_family(a_values, *x_end),
            Experiment::FoldTable { n_max } => fold_table(model, params, *n_max),
            Experiment::RegularizedLinearOrbits { nonsliding_a, sliding_a, probe_x } => {
                regularized_linear_orbits(params.epsilon, *nonsliding_a, *sliding_a, *probe_x, &opts)
            }
            Experiment::MapDecomposition { x, epsilons } => map_decomposition(params.a, *x, epsilons, &opts),
            Experiment::LayerManifolds { n_max, samples } => layer_manifolds(params, *n_max, *samples),
        }
    }
}

fn key(name: &str, param: &str, value: impl std::fmt::Display) -> String {
    format!("{name}@{param}={value}")
}

fn require_epsilon(params: &OscillatorParams) -> Result<()> {
    if params.epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter("this experiment needs ε > 0".into()))
    }
}

fn with_a(a: f64) -> Result<OscillatorParams> {
    OscillatorParams::new(a)
}

fn with_a_eps(a: f64, eps: f64) -> Result<OscillatorParams> {
    OscillatorParams::new(a)?.with_epsilon(eps)
}

fn x0_root() -> Result<Outcome> {
    let x0 = poincare::solve_x0();
    let mut t = Table::new(["quantity", "value"]);
    t.push(vec!["x0".into(), x0.into()]);
    t.push(vec!["dP/da(x0)".into(), poincare::dp_da_at_zero(x0).into()]);
    let mut o = Outcome::new(Results::Table(t));
    o.set("x0", x0);
    o.set("residual", poincare::dp_da_at_zero(x0).abs());
    Ok(o)
}

fn nonsliding_orbit(params: &OscillatorParams, tol: f64) -> Result<Outcome> {
    let orbit = poincare::find_nonsliding_period4(params.a, tol)?;
    let traj = sliding::simulate_discontinuous(
        SwitchingModel::Linear,
        &with_a(params.a)?,
        HybridState::departing(orbit.x_star, Side::Minus),
        orbit.x_star + 8.0,
        MAP_TOL,
    )?;
    let shoot = shooting::shooting_fixed_point(&with_a(params.a)?, orbit.x_star)?;
    let mut o = Outcome::new(Results::Trajectory { trajectory: traj, title: format!("non-sliding period-4 orbit, a = {}", params.a) });
    o.set("x_star", orbit.x_star);
    o.set("x_mid", orbit.x_mid);
    o.set("multiplier", orbit.multiplier);
    o.set("residual", orbit.residual);
    o.set("x_star_shooting", shoot);
    o.set("cross_validation", (shoot - orbit.x_star).abs());
    Ok(o)
}

fn small_a_limit(params: &OscillatorParams, samples: usize) -> Result<Outcome> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut t = Table::new(["x", "P(x)", "deviation"]);
    let mut worst: f64 = 0.0;
    // the deviation behaves like C·a/x near the tangency at x = 0
    let mut scaled: f64 = 0.0;
    for k in 0..samples {
        let x = (k as f64 + 0.5) * (2.0 / 3.0) / samples as f64;
        let p = composite_map_with(params, x)?;
        let d = (p - x - 4.0).abs();
        worst = worst.max(d);
        scaled = scaled.max(d * x / params.a);
        t.push(vec![x.into(), p.into(), d.into()]);
    }
    let mut o = Outcome::new(Results::Table(t));
    o.set("max_deviation", worst);
    o.set("max_scaled_deviation", scaled);
    o.set("samples", samples as f64);
    Ok(o)
}

fn interval_confinement(a_values: &[f64], n_max: i64) -> Result<Outcome> {
    let mut t = Table::new(["a", "map", "n", "value", "lo", "hi", "inside"]);
    let mut all = true;
    let mut min_margin = f64::INFINITY;
    let mut record = |t: &mut Table, a: f64, map: &str, n: i64, v: f64, lo: f64, hi: f64| {
        let inside = v > lo && v < hi;
        all &= inside;
        min_margin = min_margin.min((v - lo).min(hi - v));
        t.push(vec![a.into(), map.into(), n.into(), v.into(), lo.into(), hi.into(), if inside { "1" } else { "0" }.into()]);
    };
    for &a in a_values {
        let p = with_a(a)?;
        let v = next_crossing(Side::Plus, 10.0 / 3.0, &p, MAP_TOL)?.x_next;
        record(&mut t, a, "P+(10/3)", 0, v, 4.0, 14.0 / 3.0);
        for m in sliding::check_no_nonsliding_periodic_nonlinear(a, n_max)? {
            let n4 = 4.0 * m.n as f64;
            record(&mut t, a, "P-(4n)", m.n, m.p_minus.0, n4 + 2.0, n4 + 4.0);
            if let Some((x, _)) = m.p_plus {
                record(&mut t, a, "P+(4n-2)", m.n, x, n4 - 4.0 / 3.0, n4 - 2.0 / 3.0);
            }
        }
    }
    let mut o = Outcome::new(Results::Table(t));
    o.flag("all_inside", all);
    o.set("min_margin", min_margin);
    Ok(o)
}

fn linear_sliding(present_a: f64, absent_a: f64) -> Result<Outcome> {
    let orbit = sliding::find_sliding_period4_linear(present_a)?;
    let absent = sliding::find_sliding_period4_linear(absent_a);
    let mut o = Outcome::new(Results::Trajectory {
        trajectory: orbit.trajectory.clone(),
        title: format!("linear sliding period-4 orbit, a = {present_a}"),
    });
    o.set("landing", orbit.crossings[2]);
    o.set("closure", orbit.closure);
    o.flag("absent_reported", matches!(absent, Err(Error::NoOrbit(_))));
    if let Err(e) = absent {
        o.notes.push(format!("a = {absent_a}: {e}"));
    }
    Ok(o)
}

fn sliding_existence(a: f64) -> Result<Outcome> {
    let res = sliding::find_sliding_period4_linear(a);
    let mut t = Table::new(["a", "exists", "landing"]);
    t.push(vec![a.into(), if res.is_ok() { "1" } else { "0" }.into(), res.as_ref().ok().map(|o| o.crossings[2]).into()]);
    let mut o = Outcome::new(Results::Table(t));
    o.flag("exists", res.is_ok());
    Ok(o)
}

fn nonlinear_sliding(a_values: &[f64]) -> Result<Outcome> {
    let orbits: Vec<_> = a_values.par_iter().map(|&a| sliding::find_sliding_period4_nonlinear(a)).collect::<Result<_>>()?;
    let mut t = Table::new(["a", "x_a", "closure"]);
    let mut plot = Plot::new("nonlinear sliding period-4 orbits", "x", "y");
    let mut o = Outcome::new(Results::Table(Table::default()));
    for (i, orb) in orbits.iter().enumerate() {
        t.push(vec![orb.a.into(), orb.x_a.into(), orb.closure.into()]);
        o.set(key("x_a", "a", orb.a), orb.x_a);
        o.set(key("closure", "a", orb.a), orb.closure);
        let pts = orb.trajectory.samples().map(|(x, y, _)| (x, y)).collect();
        plot.series.push(Series::line(format!("a = {}", orb.a), pts, i));
    }
    o.results = Results::Table(t);
    o.figures.push(("orbits".into(), plot));
    Ok(o)
}

fn fold_point_check(a: f64, products: &[f64], n_max: i64) -> Result<Outcome> {
    let mut t = Table::new(["a_eps", "side", "n", "closed_form", "bisection", "difference"]);
    let mut o = Outcome::new(Results::Table(Table::default()));
    let mut overall: f64 = 0.0;
    for &prod in products {
        let p = with_a_eps(a, prod / a)?;
        let mut worst: f64 = 0.0;
        for side in [Side::Plus, Side::Minus] {
            for n in 1..=n_max {
                let c = fold_points(side, n, &p)?;
                let b = fold_point_by_bisection(side, n, &p)?;
                worst = worst.max((c - b).abs());
                t.push(vec![prod.into(), side.name().into(), n.into(), c.into(), b.into(), (c - b).abs().into()]);
            }
        }
        o.set(key("max_difference", "a_eps", prod), worst);
        overall = overall.max(worst);
    }
    o.set("max_difference", overall);
    o.results = Results::Table(t);
    Ok(o)
}

fn regularized_linear(
    a: f64,
    epsilons: &[f64],
    large_a: f64,
    contraction_epsilons: &[f64],
    opts: &LayerOptions,
) -> Result<Outcome> {
    if epsilons.len() < 2 || contraction_epsilons.len() < 2 {
        return Err(Error::InvalidParameter("need at least two ε values for each sweep".into()));
    }
    let fixed: Vec<_> = epsilons
        .par_iter()
        .map(|&e| orbits::find_regularized_nonsliding_orbit(&with_a_eps(a, e)?, opts))
        .collect::<Result<_>>()?;
    let sliding: Vec<_> = contraction_epsilons
        .par_iter()
        .map(|&e| orbits::find_regularized_sliding_orbit_linear(&with_a_eps(large_a, e)?, opts))
        .collect::<Result<_>>()?;
    let mut t = Table::new(["part", "a", "epsilon", "value", "error_or_fd", "multiplier_or_period_error"]);
    let mut o = Outcome::new(Results::Table(Table::default()));
    let errors: Vec<f64> = fixed.iter().map(|f| (f.x_star - f.x_star_discontinuous).abs()).collect();
    for (f, e) in fixed.iter().zip(&errors) {
        t.push(vec!["fixed-point".into(), a.into(), f.epsilon.into(), f.x_star.into(), (*e).into(), f.multiplier.into()]);
        o.set(key("error", "eps", f.epsilon), *e);
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let local_orders: Vec<f64> = (1..fixed.len())
        .map(|i| (errors[i - 1] / errors[i]).ln() / (fixed[i - 1].epsilon / fixed[i].epsilon).ln())
        .collect();
    let samples: Vec<(f64, f64)> = fixed.iter().zip(&errors).map(|(f, e)| (f.epsilon, *e)).collect();
    let fitted = power_law(&samples, 2, 0.5)?;
    o.flag("monotone", monotone);
    o.set("order_min", local_orders.iter().copied().fold(f64::INFINITY, f64::min));
    o.set("order_fit", fitted.exponent);
    for (i, p) in local_orders.iter().enumerate() {
        o.set(key("order", "eps", fixed[i + 1].epsilon), *p);
    }
    o.notes.push(format!(
        "error/ε: {}",
        fixed.iter().zip(&errors).map(|(f, e)| format!("{:.4}", e / f.epsilon)).collect::<Vec<_>>().join(", ")
    ));
    for s in &sliding {
        t.push(vec!["contraction".into(), s.a.into(), s.epsilon.into(), s.contraction.into(), s.contraction_fd.into(), s.period_error.into()]);
        o.set(key("contraction", "eps", s.epsilon), s.contraction);
        o.set(key("contraction_fd", "eps", s.epsilon), s.contraction_fd);
        o.set(key("v_star", "eps", s.epsilon), s.v_star);
    }
    let (first, last) = (&sliding[0], &sliding[sliding.len() - 1]);
    o.set("contraction_ratio", first.contraction / last.contraction);
    o.set("contraction_fd_ratio", first.contraction_fd / last.contraction_fd);
    o.set("period_error_max", sliding.iter().map(|s| s.period_error).fold(0.0, f64::max));
    o.results = Results::Table(t);
    let mut fig = Plot { log_x: true, log_y: true, ..Plot::new("regularized fixed point error", "ε", "|x*(ε) − x*|") };
    fig.series.push(Series::markers("measured", samples.clone(), 0));
    fig.series.push(Series::line(
        format!("fit, slope {:.3}", fitted.exponent),
        samples.iter().map(|&(e, _)| (e, fitted.predict(e))).collect(),
        1,
    ));
    o.figures.push(("fixed_point_error".into(), fig));
    Ok(o)
}

fn regularized_fixed_point(params: &OscillatorParams, opts: &LayerOptions) -> Result<Outcome> {
    require_epsilon(params)?;
    let f = orbits::find_regularized_nonsliding_orbit(params, opts)?;
    let mut t = Table::new(["epsilon", "x_star", "x_star_discontinuous", "multiplier"]);
    t.push(vec![f.epsilon.into(), f.x_star.into(), f.x_star_discontinuous.into(), f.multiplier.into()]);
    let mut o = Outcome::new(Results::Table(t));
    o.set("x_star", f.x_star);
    o.set("error", (f.x_star - f.x_star_discontinuous).abs());
    o.set("multiplier", f.multiplier);
    Ok(o)
}

fn exit_rows(t: &mut Table, sweep: &str, rows: &[exit::ExitMeasurement]) {
    for m in rows {
        t.push(vec![
            sweep.into(),
            m.n.into(),
            m.epsilon.into(),
            m.capture.x_capture.into(),
            m.x_exit.into(),
            m.fold.into(),
            m.deviation.into(),
        ]);
    }
}

fn exit_scaling(a: f64, epsilons: &[f64], n_fixed: i64, ns: &[i64], eps_fixed: f64, opts: &LayerOptions) -> Result<Outcome> {
    let s = exit::exit_scaling_fit(a, epsilons, n_fixed, ns, eps_fixed, opts)?;
    let mut t = Table::new(["sweep", "n", "epsilon", "x_capture", "x_exit", "fold", "deviation"]);
    exit_rows(&mut t, "epsilon", &s.epsilon_rows);
    exit_rows(&mut t, "n", &s.n_rows);
    let mut o = Outcome::new(Results::Table(t));
    o.set("eps_exponent", s.epsilon_fit.exponent);
    o.set("eps_r_squared", s.epsilon_fit.r_squared);
    o.set("n_exponent", s.n_fit.exponent);
    o.set("n_r_squared", s.n_fit.r_squared);
    o.set("eps_samples", s.epsilon_fit.samples.len() as f64);
    o.set("n_samples", s.n_fit.samples.len() as f64);
    let fit_plot = |title: &str, xl: &str, pts: Vec<(f64, f64)>, fit: &crate::fit::ScalingFit| {
        let line = pts.iter().map(|&(x, _)| (x, fit.predict(x))).collect();
        Plot { log_x: true, log_y: true, ..Plot::new(title, xl, "x_e − fold") }
            .with(Series::markers("measured", pts, 0))
            .with(Series::line(format!("fit, slope {:.4}", fit.exponent), line, 1))
    };
    let eps_pts = s.epsilon_rows.iter().map(|m| (m.epsilon, m.deviation)).collect();
    let n_pts = s.n_rows.iter().map(|m| (m.n as f64, m.deviation)).collect();
    o.figures.push(("fit_epsilon".into(), fit_plot("exit deviation against ε", "ε", eps_pts, &s.epsilon_fit)));
    o.figures.push(("fit_n".into(), fit_plot("exit deviation against n", "n", n_pts, &s.n_fit)));
    Ok(o)
}

fn exit_point(n: i64, params: &OscillatorParams, opts: &LayerOptions) -> Result<Outcome> {
    require_epsilon(params)?;
    let m = exit::measure_exit_point(n, params, opts)?;
    let mut t = Table::new(["sweep", "n", "epsilon", "x_capture", "x_exit", "fold", "deviation"]);
    exit_rows(&mut t, "single", &[m]);
    let mut o = Outcome::new(Results::Table(t));
    o.set("x_exit", m.x_exit);
    o.set("deviation", m.deviation);
    o.set("fold", m.fold);
    Ok(o)
}

fn closeness(ns: &[i64], params: &OscillatorParams, opts: &LayerOptions) -> Result<Outcome> {
    require_epsilon(params)?;
    let reports: Vec<_> = ns.par_iter().map(|&n| exit::slow_manifold_closeness(n, params, opts)).collect::<Result<_>>()?;
    let mut t = Table::new(["n", "window_lo", "window_hi", "max_ratio", "inner_lo", "inner_hi", "max_ratio_inner", "max_distance"]);
    let mut o = Outcome::new(Results::Table(Table::default()));
    let mut worst: f64 = 0.0;
    for r in &reports {
        t.push(vec![
            r.n.into(),
            r.window.0.into(),
            r.window.1.into(),
            r.max_ratio.into(),
            r.inner_window.0.into(),
            r.inner_window.1.into(),
            r.max_ratio_inner.into(),
            r.max_distance.into(),
        ]);
        o.set(key("max_ratio", "n", r.n), r.max_ratio);
        o.set(key("max_ratio_inner", "n", r.n), r.max_ratio_inner);
        worst = worst.max(r.max_ratio);
    }
    o.set("max_ratio", worst);
    o.results = Results::Table(t);
    Ok(o)
}

fn collapse(params: &OscillatorParams, x0: f64, v0: f64, x_end: f64, vr_windows: Option<(i64, i64)>, opts: &LayerOptions) -> Result<Outcome> {
    require_epsilon(params)?;
    let r = exit::first_slide(params, LayerState::new(x0, v0), x_end, opts)?;
    let capture = r.capture.ok_or_else(|| Error::NotCaptured(format!("run from ({x0}, {v0}) was not captured")))?;
    let mut o = Outcome::new(Results::Trajectory {
        trajectory: r.run.trajectory.clone(),
        title: format!("nonlinear regularized run from ({x0}, {v0}), a = {}, ε = {}", params.a, params.epsilon),
    });
    o.set("x_entry", r.x_entry);
    o.set("capture_branch", capture.branch.index as f64);
    o.set("x_capture", capture.x_capture);
    if let (Some(x_exit), Some(slid), Some(res)) = (r.x_exit, r.slid_length, r.residence) {
        o.set("x_exit", x_exit);
        o.set("slid_length", slid);
        o.set("residence", res);
    }
    o.set("max_v_after_exit", r.max_v_after_exit);
    o.flag("confined", r.confined);
    if let Some((lo, hi)) = vr_windows {
        let d = vr::convergence_to_vr(&r.run, lo..=hi)?;
        o.set("vr_distance_first", d[0].to_reference);
        o.set("vr_distance_last", d[d.len() - 1].to_reference);
        o.flag("vr_decreasing", d.windows(2).all(|w| w[1].to_reference < w[0].to_reference));
    }
    Ok(o)
}

fn vr_convergence(params: &OscillatorParams, x0: f64, v0: f64, n_first: i64, n_last: i64, opts: &LayerOptions) -> Result<Outcome> {
    require_epsilon(params)?;
    let x_end = fold_points(Side::Minus, 2 * n_last, params)? + 4.5;
    let run = integrate_layer(SwitchingModel::Nonlinear, params, LayerState::new(x0, v0), x_end, opts)?;
    let d = vr::convergence_to_vr(&run, n_first..=n_last)?;
    let mut t = Table::new(["n", "window_lo", "window_hi", "to_reference", "to_previous"]);
    for w in &d {
        t.push(vec![w.n.into(), w.window.0.into(), w.window.1.into(), w.to_reference.into(), w.to_previous.into()]);
    }
    let mut o = Outcome::new(Results::Table(t));
    o.flag("decreasing", d.windows(2).all(|w| w[1].to_reference < w[0].to_reference));
    o.set("min_consecutive_gap", d.iter().skip(1).map(|w| w.to_previous).fold(f64::INFINITY, f64::min));
    o.set("distance_first", d[0].to_reference);
    o.set("distance_last", d[d.len() - 1].to_reference);
    o.figures.push((
        "vr_distance".into(),
        Plot { log_y: true, ..Plot::new("distance to the 4-periodic reference", "n", "sup |v − v_r|") }
            .with(Series::line("to v_r", d.iter().map(|w| (w.n as f64, w.to_reference)).collect(), 0))
            .with(Series::line("to previous window", d.iter().skip(1).map(|w| (w.n as f64, w.to_previous)).collect(), 1)),
    ));
    o.trajectories.push(("run".into(), run.trajectory));
    Ok(o)
}

fn property_suites(params: &OscillatorParams, x_max: f64, n_max: i64) -> Result<Outcome> {
    let mut t = Table::new(["suite", "item", "value", "passed"]);
    let mut o = Outcome::new(Results::Table(Table::default()));
    // forcing models agree off the threshold
    let mut agreement: f64 = 0.0;
    let k = 20_000;
    for i in 0..=k {
        let x = x_max * i as f64 / k as f64;
        for lambda in [-1.0, 1.0] {
            let d = (forcing(SwitchingModel::Linear, x, lambda)? - forcing(SwitchingModel::Nonlinear, x, lambda)?).abs();
            agreement = agreement.max(d);
        }
    }
    t.push(vec!["forcing".into(), "max |f_L − f_N| at λ = ±1".into(), agreement.into(), "".into()]);
    o.set("forcing_agreement", agreement);
    // transition function properties
    let checks = params.psi.property_checks();
    for c in &checks {
        t.push(vec!["psi".into(), c.name.into(), Cell::Empty, if c.passed { "1" } else { "0" }.into()]);
    }
    o.flag("psi_valid", checks.iter().all(|c| c.passed));
    // sliding and critical manifolds are nullclines
    let mut nullcline: f64 = 0.0;
    let mut critical: f64 = 0.0;
    let regularized = params.clone().with_epsilon(1e-3f64.min(0.5 / params.a))?;
    for model in [SwitchingModel::Linear, SwitchingModel::Nonlinear] {
        for b in sliding::branches(model, (0.0, 2.0 * n_max as f64)) {
            if model == SwitchingModel::Nonlinear && b.index > n_max {
                continue;
            }
            let (lo, hi) = b.domain;
            for j in 1..200 {
                let x = lo + (hi - lo) * j as f64 / 200.0;
                let lambda = b.lambda(x)?;
                nullcline = nullcline.max(forcing(model, x, lambda)?.abs());
                let v0 = critical_branch(&b, x, &regularized)?;
                let sys = LayerSystem::new(model, &regularized)?;
                critical = critical.max(sys.forcing(x, v0).abs());
            }
        }
    }
    t.push(vec!["nullcline".into(), "max |f(x, λ(x))|".into(), nullcline.into(), "".into()]);
    t.push(vec!["nullcline".into(), "max |f(x, ψ(v₀(x)))|".into(), critical.into(), "".into()]);
    o.set("nullcline_residual", nullcline);
    o.set("critical_residual", critical);
    // the non-sliding orbit by two independent routes
    let orbit = poincare::find_nonsliding_period4(0.01, 1e-13)?;
    let shot = shooting::shooting_fixed_point(&with_a(0.01)?, orbit.x_star)?;
    t.push(vec!["cross-validation".into(), "x* closed-form maps".into(), orbit.x_star.into(), "".into()]);
    t.push(vec!["cross-validation".into(), "x* RK4 shooting".into(), shot.into(), "".into()]);
    o.set("cross_validation", (shot - orbit.x_star).abs());
    o.results = Results::Table(t);
    Ok(o)
}

fn linear_periodic_pair(sliding_a: f64, nonsliding_a: f64) -> Result<Outcome> {
    let s = sliding::find_sliding_period4_linear(sliding_a)?;
    let n = poincare::find_nonsliding_period4(nonsliding_a, 1e-13)?;
    let p = with_a(nonsliding_a)?;
    let up = next_crossing(Side::Plus, n.x_mid, &p, MAP_TOL)?.x_next;
    let back = next_crossing(Side::Minus, up, &p, MAP_TOL)?.x_next;
    let nonsliding = sliding::simulate_discontinuous(
        SwitchingModel::Linear,
        &p,
        HybridState::departing(n.x_mid, Side::Plus),
        n.x_mid + 4.0,
        MAP_TOL,
    )?;
    let mut t = Table::new(["orbit", "a", "point", "x"]);
    for (i, x) in s.crossings.iter().enumerate() {
        t.push(vec!["sliding".into(), sliding_a.into(), format!("crossing {}", i + 1).into(), (*x).into()]);
    }
    t.push(vec!["non-sliding".into(), nonsliding_a.into(), "start".into(), n.x_mid.into()]);
    t.push(vec!["non-sliding".into(), nonsliding_a.into(), "crossing".into(), up.into()]);
    t.push(vec!["non-sliding".into(), nonsliding_a.into(), "return".into(), back.into()]);
    let mut o = Outcome::new(Results::Table(t));
    o.set("sliding_landing", s.crossings[2]);
    o.set("sliding_closure", s.closure);
    o.set("crossings_before_slide", s.crossings.len() as f64 - 1.0);
    o.set("nonsliding_start", n.x_mid);
    o.set("nonsliding_return", back);
    o.set("nonsliding_period_error", (back - n.x_mid - 4.0).abs());
    o.flag("start_in_crossing_region", classify_threshold_point(n.x_mid) == Region::Crossing);
    o.flag("return_in_crossing_region", classify_threshold_point(back) == Region::Crossing);
    o.trajectories.push(("sliding".into(), s.trajectory));
    o.trajectories.push(("nonsliding".into(), nonsliding));
    Ok(o)
}

fn threshold_regions(x_range: (f64, f64)) -> Result<Outcome> {
    let (lo, hi) = x_range;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("empty range ({lo}, {hi})")));
    }
    // sample on a grid of step 1/600 offset from the 1/3 lattice
    let steps = ((hi - lo) * 600.0).round() as usize;
    let mut runs: Vec<(Region, f64, f64)> = Vec::new();
    for i in 0..steps {
        let x = lo + (i as f64 + 0.5) / 600.0;
        let r = classify_threshold_point(x);
        match runs.last_mut() {
            Some(last) if last.0 == r => last.2 = x,
            _ => runs.push((r, x, x)),
        }
    }
    let label = |r: Region| match r {
        Region::Attracting => "attracting",
        Region::Repelling => "repelling",
        Region::Crossing => "crossing",
        Region::TangencyPlus => "tangency+",
        Region::TangencyMinus => "tangency-",
    };
    // widen each run to the lattice point it approximates
    let snap = |x: f64| (x * 3.0).round() / 3.0;
    let mut t = Table::new(["region", "from", "to"]);
    for (r, a, b) in &runs {
        t.push(vec![label(*r).into(), snap(*a).into(), snap(*b).into()]);
    }
    let count = |r: Region| runs.iter().filter(|x| x.0 == r).count() as f64;
    let mut o = Outcome::new(Results::Table(t));
    o.set("attracting_intervals", count(Region::Attracting));
    o.set("repelling_intervals", count(Region::Repelling));
    o.set("crossing_intervals", count(Region::Crossing));
    if let Some((_, a, b)) = runs.iter().find(|r| r.0 == Region::Attracting) {
        o.set("first_attracting_lo", snap(*a));
        o.set("first_attracting_hi", snap(*b));
    }
    let curve = |w: f64| (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).map(|x| (x, -(std::f64::consts::PI * w * x).sin())).collect();
    o.figures.push((
        "fields".into(),
        Plot::new("threshold fields −sin(πωx)", "x", "y'")
            .with(Series::line("ω = 3/2", curve(1.5), 0))
            .with(Series::line("ω = 1/2", curve(0.5), 1)),
    ));
    Ok(o)
}

fn nonlinear_branch_table(x_range: (f64, f64), overlap_at: &[f64]) -> Result<Outcome> {
    let all = sliding::nonlinear_branches(x_range);
    let contained: Vec<&SlidingBranch> = all.iter().filter(|b| b.domain.0 >= x_range.0 && b.domain.1 <= x_range.1).collect();
    let mut t = Table::new(["n", "lo", "hi", "width", "stability"]);
    let mut fig = Plot::new("nonlinear sliding branches λ = 2n/x − 2", "x", "λ");
    for b in &all {
        let stab = if b.stability == Stability::Attracting { "attracting" } else { "repelling" };
        t.push(vec![b.index.into(), b.domain.0.into(), b.domain.1.into(), b.width().into(), stab.into()]);
        let (lo, hi) = (b.domain.0.max(x_range.0), b.domain.1.min(x_range.1));
        let pts = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).map(|x| (x, b.lambda_unchecked(x))).collect();
        fig.series.push(Series::line(stab, pts, if b.stability == Stability::Attracting { 2 } else { 1 }));
    }
    let mut o = Outcome::new(Results::Table(t));
    o.set("contained_branches", contained.len() as f64);
    o.flag(
        "domains_match",
        contained.iter().all(|b| {
            let n = b.index as f64;
            (b.domain.0 - 2.0 * n / 3.0).abs() < 1e-12 && (b.domain.1 - 2.0 * n).abs() < 1e-12
        }),
    );
    let overlaps: Vec<usize> = overlap_at.iter().map(|&x| all.iter().filter(|b| b.contains(x)).count()).collect();
    for (x, c) in overlap_at.iter().zip(&overlaps) {
        o.set(key("overlap", "x", x), *c as f64);
    }
    o.flag("overlap_increasing", overlaps.windows(2).all(|w| w[1] > w[0]));
    o.figures.push(("branches".into(), fig));
    Ok(o)
}

/// First lattice exit `4k` after which every slide of `traj` follows `y_d`:
/// entries at `4j + x_a`, exits at `4j`.
fn joins_orbit(traj: &Trajectory, x_a: f64, tol: f64) -> Option<f64> {
    let events: Vec<_> = traj.events.iter().filter(|e| matches!(e.kind, EventKind::SlideEntry | EventKind::SlideExit)).collect();
    let fits = |e: &&crate::trajectory::Event| {
        let r = match e.kind {
            EventKind::SlideEntry => e.x - x_a,
            _ => e.x,
        };
        (r / 4.0 - (r / 4.0).round()).abs() * 4.0 < tol
    };
    let mut join = None;
    for (i, e) in events.iter().enumerate() {
        if e.kind == EventKind::SlideExit && fits(e) && events[i + 1..].iter().all(fits) && events.len() > i + 2 {
            join = Some(e.x);
            break;
        }
    }
    join
}

fn nonlinear_orbits(params: &OscillatorParams, starts: &[(f64, f64)], x_end: f64) -> Result<Outcome> {
    let orbit = sliding::find_sliding_period4_nonlinear(params.a)?;
    let mut t = Table::new(["run", "x0", "y0", "joins_at"]);
    let mut o = Outcome::new(Results::Table(Table::default()));
    o.set("x_a", orbit.x_a);
    o.set("closure", orbit.closure);
    o.flag(
        "orbit_verdict_periodic",
        sliding::periodicity_verdict(SwitchingModel::Nonlinear, &orbit.trajectory, 4.0, 1e-8) == sliding::PeriodicityVerdict::Periodic,
    );
    let mut all_join = true;
    for (i, &(x0, y0)) in starts.iter().enumerate() {
        let traj = sliding::simulate_discontinuous(SwitchingModel::Nonlinear, params, HybridState::off_threshold(x0, y0)?, x_end, MAP_TOL)?;
        let join = joins_orbit(&traj, orbit.x_a, 1e-8);
        all_join &= join.is_some();
        t.push(vec![format!("start {}", i + 1).into(), x0.into(), y0.into(), join.into()]);
        if let Some(j) = join {
            o.set(format!("joins_at_{}", i + 1), j);
        }
        o.trajectories.push((format!("attracted_{}", i + 1), traj));
    }
    o.flag("all_attracted", all_join);
    o.results = Results::Trajectory {
        trajectory: orbit.trajectory,
        title: format!("nonlinear sliding period-4 orbit, a = {}", params.a),
    };
    o.notes.push(format!("attracted runs: {}", t.to_csv_string().trim_end().replace('\n', " | ")));
    Ok(o)
}

/// Slid length in `[x_end − period, x_end]` and whether the events of the
/// last two periods repeat.
fn settled_period(traj: &Trajectory, period: f64, tol: f64) -> (bool, f64) {
    let x_end = traj.x_end();
    let in_window = |lo: f64, hi: f64| -> Vec<(EventKind, f64)> {
        traj.events.iter().filter(|e| e.x >= lo && e.x < hi).map(|e| (e.kind, e.x)).collect()
    };
    let last = in_window(x_end - period, x_end);
    let before = in_window(x_end - 2.0 * period, x_end - period);
    let repeats = !last.is_empty()
        && last.len() == before.len()
        && last.iter().zip(&before).all(|(a, b)| a.0 == b.0 && (a.1 - b.1 - period).abs() < tol);
    let slid: f64 = traj
        .segments
        .iter()
        .filter(|s| matches!(s.mode, Mode::Sliding(_)))
        .map(|s| (s.x_end().min(x_end) - s.x_start().max(x_end - period)).max(0.0))
        .sum();
    (repeats, slid)
}

fn linear_period_family(a_values: &[f64], x_end: f64) -> Result<Outcome> {
    let runs: Vec<Trajectory> = a_values
        .par_iter()
        .map(|&a| {
            sliding::simulate_discontinuous(
                SwitchingModel::Linear,
                &with_a(a)?,
                HybridState::departing(10.0 / 3.0, Side::Plus),
                x_end,
                MAP_TOL,
            )
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(["a", "periodic", "slid_per_period"]);
    let mut o = Outcome::new(Results::Table(Table::default()));
    let mut fig = Plot::new("settled period-4 orbits of the linear system", "x", "y");
    for (i, (a, traj)) in a_values.iter().zip(&runs).enumerate() {
        let (periodic, slid) = settled_period(traj, 4.0, 1e-6);
        t.push(vec![(*a).into(), if periodic { "1" } else { "0" }.into(), slid.into()]);
        o.flag(key("periodic", "a", a), periodic);
        o.set(key("slid_per_period", "a", a), slid);
        let shift = 4.0 * ((x_end - 4.0) / 4.0).floor();
        let pts = traj.samples().filter(|p| p.0 >= x_end - 4.0).map(|(x, y, _)| (x - shift, y)).collect();
        fig.series.push(Series::line(format!("a = {a}"), pts, i));
    }
    o.results = Results::Table(t);
    o.figures.push(("orbits".into(), fig));
    Ok(o)
}

fn fold_table(model: SwitchingModel, params: &OscillatorParams, n_max: i64) -> Result<Outcome> {
    require_epsilon(params)?;
    let sys = LayerSystem::new(model, params)?;
    let mut t = Table::new(["side", "n", "x_fold", "offset", "curvature"]);
    let mut tangency: f64 = 0.0;
    let mut alternating = true;
    for side in [Side::Plus, Side::Minus] {
        let w = params.omega(side);
        let v = side.sign();
        let mut prev: Option<f64> = None;
        for n in 1..=n_max {
            let x = fold_points(side, n, params)?;
            let offset = x - n as f64 / w;
            tangency = tangency.max(sys.rhs(x, v).abs());
            // v'' at the fold along the boundary: d/dx of v' at fixed v
            let h = 1e-6;
            let curvature = (sys.rhs(x + h, v) - sys.rhs(x - h, v)) / (2.0 * h);
            if let Some(p) = prev {
                alternating &= p.signum() != offset.signum();
            }
            prev = Some(offset);
            t.push(vec![side.name().into(), n.into(), x.into(), offset.into(), curvature.into()]);
        }
    }
    let mut o = Outcome::new(Results::Table(t));
    o.set("tangency_residual", tangency);
    o.flag("offsets_alternate", alternating);
    Ok(o)
}

fn regularized_linear_orbits(eps: f64, nonsliding_a: f64, sliding_a: f64, probe_x: f64, opts: &LayerOptions) -> Result<Outcome> {
    let pn = with_a_eps(nonsliding_a, eps)?;
    let ps = with_a_eps(sliding_a, eps)?;
    let (fixed, slide) = rayon::join(
        || orbits::find_regularized_nonsliding_orbit(&pn, opts),
        || orbits::find_regularized_sliding_orbit_linear(&ps, opts),
    );
    let (fixed, slide) = (fixed?, slide?);
    let ret = orbits::regularized_poincare_linear(fixed.x_star, &pn, opts)?;
    // first abscissa after the departure that is congruent to probe_x (mod 4)
    let probe = fixed.x_star + (probe_x - fixed.x_star).rem_euclid(4.0);
    let v_probe = ret.run.value_at(probe).ok_or_else(|| Error::InsufficientData(format!("no sample at x = {probe}")))?;
    let mut t = Table::new(["orbit", "a", "x", "v", "y"]);
    t.push(vec!["non-sliding".into(), nonsliding_a.into(), probe.into(), v_probe.into(), (eps * v_probe).into()]);
    t.push(vec!["sliding".into(), sliding_a.into(), slide.x_section.into(), slide.v_star.into(), (eps * slide.v_star).into()]);
    let mut o = Outcome::new(Results::Table(t));
    o.set("nonsliding_x_star", fixed.x_star);
    o.set("nonsliding_y_at_probe", eps * v_probe);
    o.set("nonsliding_longest_transit", ret.longest_transit);
    o.set("sliding_v_star", slide.v_star);
    o.set("sliding_y_at_section", eps * slide.v_star);
    o.set("sliding_longest_transit", slide.longest_transit);
    o.trajectories.push(("nonsliding".into(), ret.run.trajectory));
    o.trajectories.push(("sliding".into(), slide.period.trajectory));
    Ok(o)
}

fn map_decomposition(a: f64, x: f64, epsilons: &[f64], opts: &LayerOptions) -> Result<Outcome> {
    let p0 = with_a(a)?;
    let p_minus = next_crossing(Side::Minus, x, &p0, MAP_TOL)?.x_next;
    let p_full = composite_map_with(&p0, x)?;
    let dp = poincare::dp_dx(x, a, DerivativeMode::ClosedForm)?;
    let rows: Vec<_> = epsilons
        .par_iter()
        .map(|&e| -> Result<_> {
            let r = orbits::regularized_poincare_linear(x, &with_a_eps(a, e)?, opts)?;
            let exit = r.run.trajectory.events_of(EventKind::LayerExit).next().map(|e| e.x);
            let entry = r.run.trajectory.events_of(EventKind::LayerEntry).next().map(|e| e.x);
            match (exit, entry) {
                (Some(x1), Some(x2)) => Ok((e, x1, x2, r.x_next, r.derivative)),
                _ => Err(Error::Regime(format!("no exterior excursion below the layer at ε = {e}"))),
            }
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(["epsilon", "k1_exit", "k2_entry", "P_eps", "gap_k1", "gap_k2", "gap_map", "gap_derivative"]);
    let mut o = Outcome::new(Results::Table(Table::default()));
    let mut gaps: Vec<[f64; 4]> = Vec::new();
    for &(e, x1, x2, xn, d) in &rows {
        let g = [(x1 - x).abs(), (x2 - p_minus).abs(), (xn - p_full).abs(), (d - dp).abs()];
        t.push(vec![e.into(), x1.into(), x2.into(), xn.into(), g[0].into(), g[1].into(), g[2].into(), g[3].into()]);
        o.set(key("gap_map", "eps", e), g[2]);
        o.set(key("gap_derivative", "eps", e), g[3]);
        gaps.push(g);
    }
    for (k, name) in ["k1", "k2", "map", "derivative"].iter().enumerate() {
        o.flag(format!("{name}_decreasing"), gaps.windows(2).all(|w| w[1][k] < w[0][k]));
    }
    o.set("P", p_full);
    o.set("dP_dx", dp);
    o.results = Results::Table(t);
    Ok(o)
}

fn layer_manifolds(params: &OscillatorParams, n_max: i64, samples: usize) -> Result<Outcome> {
    require_epsilon(params)?;
    let sys = LayerSystem::new(SwitchingModel::Nonlinear, params)?;
    let mut t = Table::new(["n", "x", "v0", "stability"]);
    let mut fig = Plot::new("critical manifolds of the nonlinear layer", "x", "v");
    let (mut attracting, mut repelling, mut consistent) = (0, 0, true);
    let mut residual: f64 = 0.0;
    for n in 1..=n_max {
        let b = SlidingBranch::nonlinear(n)?;
        let attr = b.stability == Stability::Attracting;
        if attr {
            attracting += 1;
        } else {
            repelling += 1;
        }
        let mut pts = Vec::new();
        for j in 1..samples {
            let x = b.domain.0 + (b.domain.1 - b.domain.0) * j as f64 / samples as f64;
            let v0 = critical_branch(&b, x, params)?;
            residual = residual.max(sys.forcing(x, v0).abs());
            // linearisation −a − f_λ ψ'/ε must be negative exactly on attracting branches
            consistent &= (sys.jacobian(x, v0) < 0.0) == attr;
            t.push(vec![n.into(), x.into(), v0.into(), if attr { "attracting" } else { "repelling" }.into()]);
            pts.push((x, v0));
        }
        fig.series.push(Series::line(if attr { "attracting" } else { "repelling" }, pts, if attr { 2 } else { 1 }));
    }
    let mut o = Outcome::new(Results::Table(t));
    o.set("attracting_branches", attracting as f64);
    o.set("repelling_branches", repelling as f64);
    o.set("critical_residual", residual);
    o.flag("stability_consistent", consistent);
    o.figures.push(("manifolds".into(), fig));
    Ok(o)
}
