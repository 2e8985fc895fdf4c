//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Tolerances and runtime budgets are pinned below.

use std::time::Instant;

use switchosc::experiments::shooting_fixed_point;
use switchosc::poincare::{self, composite_map, next_crossing, MAP_TOL};
use switchosc::regularization::{
    exit, fold_points, integrate_layer, layer::fold_point_by_bisection, orbits, vr, critical_branch, LayerOptions,
    LayerState, LayerSystem,
};
use switchosc::sliding;
use switchosc::{forcing, OscillatorParams, Side, SwitchingModel, TransitionFunction};

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    format!("error: {e}")
}

fn params(a: f64, eps: f64) -> OscillatorParams {
    OscillatorParams::new(a).unwrap().with_epsilon(eps).unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let x0 = poincare::solve_x0();
    let secs = t.elapsed().as_secs_f64();
    verdict((x0 - 0.6357545163).abs() <= 1e-9 && secs < 1.0, format!("x0 = {x0:.12}, {secs:.3} s"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let o = poincare::find_nonsliding_period4(0.01, 1e-13).map_err(fail)?;
    let secs = t.elapsed().as_secs_f64();
    verdict(
        (o.x_star - 0.6261249968).abs() <= 1e-8 && o.multiplier > 0.0 && o.multiplier < 1.0 && secs < 1.0,
        format!("x* = {:.12}, multiplier = {:.6}, {secs:.3} s", o.x_star, o.multiplier),
    )
}

fn criterion_3() -> Outcome {
    let samples = 50;
    let mut worst: (f64, f64) = (0.0, f64::NAN);
    for k in 0..samples {
        let x = (k as f64 + 0.5) * (2.0 / 3.0) / samples as f64;
        let d = (composite_map(x, 1e-8).map_err(fail)? - (x + 4.0)).abs();
        if d > worst.0 {
            worst = (d, x);
        }
    }
    verdict(worst.0 < 1e-6, format!("max |P(x) − (x+4)| = {:.3e} at x = {:.5} over {samples} samples", worst.0, worst.1))
}

fn criterion_4() -> Outcome {
    let mut checked = 0;
    for a in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let p = OscillatorParams::new(a).unwrap();
        let x = next_crossing(Side::Plus, 10.0 / 3.0, &p, MAP_TOL).map_err(fail)?.x_next;
        if !(x > 4.0 && x < 14.0 / 3.0) {
            return Err(format!("a = {a}: P₊(10/3) = {x} outside (4, 14/3)"));
        }
        checked += 1;
        for m in sliding::check_no_nonsliding_periodic_nonlinear(a, 10).map_err(fail)? {
            let n4 = 4.0 * m.n as f64;
            let xm = m.p_minus.0;
            if !(xm > n4 + 2.0 && xm < n4 + 4.0) {
                return Err(format!("a = {a}: P₋(4·{}) = {xm} outside ({}, {})", m.n, n4 + 2.0, n4 + 4.0));
            }
            checked += 1;
            if let Some((xp, _)) = m.p_plus {
                if !(xp > n4 - 4.0 / 3.0 && xp < n4 - 2.0 / 3.0) {
                    return Err(format!("a = {a}: P₊(4·{}−2) = {xp} outside the interval", m.n));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} landing points inside their open intervals"))
}

fn criterion_5() -> Outcome {
    let o = sliding::find_sliding_period4_linear(10.0).map_err(fail)?;
    let absent = sliding::find_sliding_period4_linear(1e-3);
    let landing = o.crossings[2];
    verdict(
        landing > 20.0 / 3.0 && landing < 22.0 / 3.0 && o.closure <= 1e-8 && absent.is_err(),
        format!("a = 10: landing = {landing:.9}, closure = {:.1e}; a = 1e-3 absent: {}", o.closure, absent.is_err()),
    )
}

fn criterion_6() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for a in [0.1, 0.5, 2.0] {
        let o = sliding::find_sliding_period4_nonlinear(a).map_err(fail)?;
        ok &= o.x_a > 2.0 && o.x_a < 4.0 && o.closure <= 1e-8;
        parts.push(format!("a = {a}: x_a = {:.6}, closure = {:.1e}", o.x_a, o.closure));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let a = 0.01;
    let mut worst: f64 = 0.0;
    for prod in [1e-5, 1e-3] {
        let p = params(a, prod / a);
        for side in [Side::Plus, Side::Minus] {
            for n in 1..=20 {
                let c = fold_points(side, n, &p).map_err(fail)?;
                let b = fold_point_by_bisection(side, n, &p).map_err(fail)?;
                worst = worst.max((c - b).abs());
            }
        }
    }
    verdict(worst <= 1e-10, format!("max |closed form − bisection| = {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let opts = LayerOptions::default();
    let eps = [1e-2, 2.5e-3, 1e-3];
    let mut errors = Vec::new();
    for e in eps {
        let o = orbits::find_regularized_nonsliding_orbit(&params(0.01, e), &opts).map_err(fail)?;
        errors.push((o.x_star - o.x_star_discontinuous).abs());
    }
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let orders: Vec<f64> = (1..3).map(|i| (errors[i - 1] / errors[i]).ln() / (eps[i - 1] / eps[i]).ln()).collect();
    let coarse = orbits::find_regularized_sliding_orbit_linear(&params(2.0, 1e-2), &opts).map_err(fail)?;
    let fine = orbits::find_regularized_sliding_orbit_linear(&params(2.0, 1e-3), &opts).map_err(fail)?;
    let drop = coarse.contraction / fine.contraction;
    let secs = t.elapsed().as_secs_f64();
    verdict(
        monotone && orders.iter().all(|&p| p >= 1.0) && drop >= 10.0 && secs < 60.0,
        format!(
            "errors {:.3e} {:.3e} {:.3e}, orders {:.3} {:.3}; contraction {:.2e} → {:.2e} (finite differences {:.1e} → {:.1e}), {secs:.1} s",
            errors[0], errors[1], errors[2], orders[0], orders[1], coarse.contraction, fine.contraction,
            coarse.contraction_fd, fine.contraction_fd
        ),
    )
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let s = exit::exit_scaling_fit(0.01, &[1e-2, 3e-3, 1e-3, 3e-4, 1e-4], 10, &[4, 8, 16, 32], 1e-3, &LayerOptions::default())
        .map_err(fail)?;
    let secs = t.elapsed().as_secs_f64();
    let (pe, pn) = (s.epsilon_fit.exponent, s.n_fit.exponent);
    verdict(
        (pe - 2.0 / 3.0).abs() <= 0.07
            && (pn + 1.0 / 3.0).abs() <= 0.07
            && s.epsilon_fit.r_squared > 0.98
            && s.n_fit.r_squared > 0.98
            && secs < 120.0,
        format!(
            "ε exponent {pe:.4} (r² {:.6}), n exponent {pn:.4} (r² {:.6}), {secs:.1} s",
            s.epsilon_fit.r_squared, s.n_fit.r_squared
        ),
    )
}

fn criterion_10() -> Outcome {
    let p = params(0.01, 1e-3);
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [6, 12, 22] {
        let r = exit::slow_manifold_closeness(n, &p, &LayerOptions::default()).map_err(fail)?;
        ok &= r.max_ratio <= 5.0;
        parts.push(format!("n = {n}: {:.4}", r.max_ratio));
    }
    verdict(ok, format!("max |v − v0| / (ε|v1|): {}", parts.join(", ")))
}

fn criterion_11() -> Outcome {
    let t = Instant::now();
    let r = exit::first_slide(&params(0.01, 0.0025), LayerState::new(14.1, 1.1), 60.0, &LayerOptions::default())
        .map_err(fail)?;
    let secs = t.elapsed().as_secs_f64();
    let branch = r.capture.map(|c| c.branch.index);
    let (Some(x_exit), Some(slid)) = (r.x_exit, r.slid_length) else {
        return Err(format!("no exit after capture (branch {branch:?})"));
    };
    verdict(
        branch == Some(22) && (x_exit - 44.0).abs() <= 0.5 && (slid - 29.9).abs() <= 1.0 && r.confined && secs < 30.0,
        format!(
            "branch {branch:?}, exit {x_exit:.4}, slid {slid:.4}, max v after exit {:.4}, {secs:.2} s",
            r.max_v_after_exit
        ),
    )
}

fn criterion_12() -> Outcome {
    let p = params(0.01, 0.0025);
    let x_end = fold_points(Side::Minus, 60, &p).map_err(fail)? + 4.5;
    let opts = LayerOptions { max_step: 0.002, ..LayerOptions::default() };
    let run = integrate_layer(SwitchingModel::Nonlinear, &p, LayerState::new(12.1, -1.1), x_end, &opts).map_err(fail)?;
    let d = vr::convergence_to_vr(&run, 5..=30).map_err(fail)?;
    let decreasing = d.windows(2).all(|w| w[1].to_reference < w[0].to_reference);
    let min_gap = d.iter().skip(1).map(|w| w.to_previous).fold(f64::INFINITY, f64::min);
    verdict(
        decreasing && min_gap > 1e-12,
        format!(
            "sup |v − v_r|: {:.4} (n = 5) → {:.4} (n = 30), decreasing: {decreasing}; min window gap {min_gap:.2e}",
            d[0].to_reference,
            d[d.len() - 1].to_reference
        ),
    )
}

fn criterion_13() -> Outcome {
    let mut agreement: f64 = 0.0;
    for i in 0..=40_000 {
        let x = i as f64 * 1e-3;
        for lambda in [-1.0, 1.0] {
            let l = forcing(SwitchingModel::Linear, x, lambda).map_err(fail)?;
            let n = forcing(SwitchingModel::Nonlinear, x, lambda).map_err(fail)?;
            agreement = agreement.max((l - n).abs());
        }
    }
    let psi_ok = TransitionFunction::Cubic.property_checks().iter().all(|c| c.passed);
    let p = params(0.01, 1e-3);
    let mut residual: f64 = 0.0;
    for model in [SwitchingModel::Linear, SwitchingModel::Nonlinear] {
        let sys = LayerSystem::new(model, &p).map_err(fail)?;
        for b in sliding::branches(model, (0.0, 20.0)).into_iter().filter(|b| b.domain.1 <= 20.0) {
            for j in 1..100 {
                let x = b.domain.0 + (b.domain.1 - b.domain.0) * j as f64 / 100.0;
                residual = residual.max(forcing(model, x, b.lambda(x).map_err(fail)?).map_err(fail)?.abs());
                residual = residual.max(sys.forcing(x, critical_branch(&b, x, &p).map_err(fail)?).abs());
            }
        }
    }
    let map = poincare::find_nonsliding_period4(0.01, 1e-13).map_err(fail)?.x_star;
    let shot = shooting_fixed_point(&OscillatorParams::new(0.01).unwrap(), map).map_err(fail)?;
    let cross = (map - shot).abs();
    verdict(
        agreement <= 1e-12 && psi_ok && residual < 1e-12 && cross <= 1e-8,
        format!(
            "forcing agreement {agreement:.1e}, cubic ψ valid: {psi_ok}, nullcline residual {residual:.1e}, map vs shooting {cross:.1e}"
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 13] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
        (13, criterion_13),
    ];
    let mut failed = 0;
    for (id, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {id:>2}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2}: FAIL  {detail}");
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
