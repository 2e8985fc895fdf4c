//! The non-sliding period-4 orbit of the linear system: closed-form crossing
//! maps, the fixed point of `P = P₊ ∘ P₋`, its multiplier, and an RK4
//! shooting cross-check that shares no code with the maps.
//!
//!     cargo run --example nonsliding_orbit

use switchosc::experiments::shooting_fixed_point;
use switchosc::poincare::{self, DerivativeMode};
use switchosc::OscillatorParams;

fn main() {
    let x0 = poincare::solve_x0();
    println!("root of dP/da at a = 0:   x0 = {x0:.10}");

    let a = 0.01;
    let orbit = poincare::find_nonsliding_period4(a, 1e-13).unwrap();
    println!("a = {a}: fixed point       x* = {:.10}", orbit.x_star);
    println!("         upward crossing   {:.10}", orbit.x_mid);
    println!("         multiplier        {:.6} (stable: {})", orbit.multiplier, orbit.is_stable());

    let fd = poincare::dp_dx(orbit.x_star, a, DerivativeMode::FiniteDifference).unwrap();
    println!("         dP/dx by differences {fd:.6}");

    let shot = shooting_fixed_point(&OscillatorParams::new(a).unwrap(), orbit.x_star).unwrap();
    println!("         RK4 shooting      x* = {shot:.10} (difference {:.1e})", (shot - orbit.x_star).abs());

    // the map flattens to x + 4 as the damping vanishes
    for a in [1e-2, 1e-4, 1e-6, 1e-8] {
        let p = poincare::composite_map(0.3, a).unwrap();
        println!("P(0.3) - 4.3 at a = {a:e}: {:.3e}", p - 4.3);
    }
}
