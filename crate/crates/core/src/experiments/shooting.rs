//! An independent route to the linear non-sliding period-4 orbit: classical
//! RK4 on the hybrid ODE with sign-change event location, followed by a
//! secant solve of `Π(x) = x + 4`. It shares no code with the closed-form
//! crossing maps and is used to cross-check them.

use crate::error::{Error, Result};
use crate::model::{forcing, OscillatorParams, Side, SwitchingModel};

const STEP: f64 = 1e-3;

fn rk4(params: &OscillatorParams, side: Side, x: f64, y: f64, h: f64) -> f64 {
    let a = params.a;
    let lambda = side.lambda();
    let f = |x: f64, y: f64| -a * y - forcing(SwitchingModel::Linear, x, lambda).expect("λ = ±1 is valid");
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(x + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(x + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrate in `side` from `(x, 0)` until the orbit returns to `y = 0`.
fn half_plane_return(params: &OscillatorParams, side: Side, x0: f64, horizon: f64) -> Result<f64> {
    let s = side.sign();
    let (mut x, mut y) = (x0, 0.0);
    while x < x0 + horizon {
        let y_next = rk4(params, side, x, y, STEP);
        // the first step leaves y = 0; only later sign changes are returns
        if x > x0 && y_next * s <= 0.0 {
            let (mut lo, mut hi) = (0.0, STEP);
            while hi - lo > 1e-15 {
                let mid = 0.5 * (lo + hi);
                if rk4(params, side, x, y, mid) * s > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(x + 0.5 * (lo + hi));
        }
        x += STEP;
        y = y_next;
    }
    Err(Error::NoRoot { x: x0, horizon })
}

/// `x ↦` next downward crossing, starting downward at `(x, 0)`.
pub fn shooting_return(params: &OscillatorParams, x: f64) -> Result<f64> {
    let up = half_plane_return(params, Side::Minus, x, 8.0)?;
    half_plane_return(params, Side::Plus, up, 8.0)
}

/// Secant solve of `shooting_return(x) = x + 4` from `guess`.
pub fn shooting_fixed_point(params: &OscillatorParams, guess: f64) -> Result<f64> {
    let g = |x: f64| shooting_return(params, x).map(|p| p - x - 4.0);
    let (mut x0, mut x1) = (guess - 1e-3, guess + 1e-3);
    let (mut g0, mut g1) = (g(x0)?, g(x1)?);
    for _ in 0..50 {
        if (x1 - x0).abs() < 1e-14 || g1 == 0.0 {
            return Ok(x1);
        }
        let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        x0 = x1;
        g0 = g1;
        x1 = x2;
        g1 = g(x1)?;
    }
    Err(Error::Tolerance(format!("secant iteration stalled at x = {x1}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agrees_with_closed_form_map() {
        let p = OscillatorParams::new(0.01).unwrap();
        let closed = crate::poincare::composite_map(0.6, 0.01).unwrap();
        assert!((shooting_return(&p, 0.6).unwrap() - closed).abs() < 1e-10);
    }
}
