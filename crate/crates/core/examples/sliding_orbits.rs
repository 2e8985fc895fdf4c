//! Sliding period-4 orbits: the linear one exists only for large enough
//! damping, the nonlinear `y_d` for every `a`.
//!
//!     cargo run --example sliding_orbits

use switchosc::sliding::{find_sliding_period4_linear, find_sliding_period4_nonlinear};

fn main() {
    for a in [1e-3, 1e-2, 0.1, 2.0, 10.0] {
        match find_sliding_period4_linear(a) {
            Ok(o) => println!(
                "linear, a = {a:<6}: crossings {:.5} {:.5} {:.5}, closure {:.1e}",
                o.crossings[0], o.crossings[1], o.crossings[2], o.closure
            ),
            Err(e) => println!("linear, a = {a:<6}: {e}"),
        }
    }
    println!();
    for a in [0.1, 0.5, 2.0] {
        let o = find_sliding_period4_nonlinear(a).unwrap();
        println!("nonlinear, a = {a:<4}: x_a = P-(0) = {:.6}, closure {:.1e}", o.x_a, o.closure);
    }
}
