//! Regularizing with a user transition function `ψ`, given as polynomial
//! coefficients, after checking it against the property suite.
//!
//!     cargo run --example custom_transition

use switchosc::regularization::{fold_points, orbits, LayerOptions};
use switchosc::{OscillatorParams, Side, TransitionFunction};

fn main() {
    // ψ(v) = (5v − v⁵)/4: odd, monotone, ψ(±1) = ±1, ψ''(±1) = ∓5
    let quintic = TransitionFunction::from_json_str(r#"{"coefficients": [0, 1.25, 0, 0, 0, -0.25]}"#);
    // the C² smoothstep (15v − 10v³ + 3v⁵)/8 is flat at the boundary and has no fold points
    let smooth = TransitionFunction::from_json_str(r#"{"coefficients": [0, 1.875, 0, -1.25, 0, 0.375]}"#);
    println!("smoothstep: {}", smooth.map(|_| "accepted".to_string()).unwrap_or_else(|e| e.to_string()));
    let flat = TransitionFunction::parse_json(r#"{"coefficients": [0, 1]}"#).unwrap();
    for c in flat.property_checks() {
        println!("ψ(v) = v: {} {} ({})", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    match quintic {
        Ok(psi) => {
            let p = OscillatorParams::new(0.01).unwrap().with_epsilon(2.5e-3).unwrap().with_psi(psi).unwrap();
            let o = orbits::find_regularized_nonsliding_orbit(&p, &LayerOptions::default()).unwrap();
            println!("quintic ψ: x*(ε) = {:.8}, fold x⁺₁ = {:.8}", o.x_star, fold_points(Side::Plus, 1, &p).unwrap());
        }
        Err(e) => println!("quintic ψ rejected: {e}"),
    }
}
