//! Where captured trajectories leave the layer: just past the fold `4n`, by
//! an amount scaling like `ε^{2/3} n^{-1/3}`.
//!
//!     cargo run --example exit_scaling

use switchosc::regularization::{exit, LayerOptions};

fn main() {
    let s = exit::exit_scaling_fit(0.01, &[1e-2, 3e-3, 1e-3, 3e-4, 1e-4], 10, &[4, 8, 16, 32], 1e-3, &LayerOptions::default())
        .unwrap();
    for m in s.epsilon_rows.iter().chain(&s.n_rows) {
        println!("n = {:>2}, ε = {:<7}: exit {:.6}, past the fold by {:.4e}", m.n, m.epsilon, m.x_exit, m.deviation);
    }
    println!("ε exponent {:.4} (r² {:.6})", s.epsilon_fit.exponent, s.epsilon_fit.r_squared);
    println!("n exponent {:.4} (r² {:.6})", s.n_fit.exponent, s.n_fit.r_squared);
}
