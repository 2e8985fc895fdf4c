//! The linear orbits persist under regularization: the `P_ε` fixed point
//! approaches `x*`, and the sliding orbit contracts at a rate that is
//! exponentially small in `1/ε`.
//!
//!     cargo run --example regularized_orbits

use switchosc::regularization::{orbits, LayerOptions};
use switchosc::OscillatorParams;

fn main() {
    let opts = LayerOptions::default();
    for eps in [1e-2, 2.5e-3, 1e-3] {
        let p = OscillatorParams::new(0.01).unwrap().with_epsilon(eps).unwrap();
        let o = orbits::find_regularized_nonsliding_orbit(&p, &opts).unwrap();
        println!(
            "a = 0.01, ε = {eps:<6}: x*(ε) = {:.8}, |x*(ε) − x*| = {:.3e}, multiplier {:.4}",
            o.x_star,
            (o.x_star - o.x_star_discontinuous).abs(),
            o.multiplier
        );
    }
    for eps in [1e-2, 2.5e-3, 1e-3] {
        let p = OscillatorParams::new(2.0).unwrap().with_epsilon(eps).unwrap();
        let o = orbits::find_regularized_sliding_orbit_linear(&p, &opts).unwrap();
        println!(
            "a = 2,    ε = {eps:<6}: v* = {:.6} at x = 10/3, contraction {:.2e} (differences {:.1e})",
            o.v_star, o.contraction, o.contraction_fd
        );
    }
}
