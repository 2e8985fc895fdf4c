//! Fold points of the switching layer, `x^±_{ε,n} = n/ω± ± (−1)^{n+1} arcsin(aε)/(πω±)`,
//! against bisection roots of the boundary equation.
//!
//!     cargo run --example fold_points

use switchosc::regularization::{fold_points, layer::fold_point_by_bisection};
use switchosc::{OscillatorParams, Side};

fn main() {
    let p = OscillatorParams::new(0.01).unwrap().with_epsilon(0.1).unwrap();
    println!("side  n   closed form       bisection         difference");
    for side in [Side::Plus, Side::Minus] {
        for n in 1..=6 {
            let c = fold_points(side, n, &p).unwrap();
            let b = fold_point_by_bisection(side, n, &p).unwrap();
            println!("{side:<4} {n:>2}  {c:>16.12}  {b:>16.12}  {:.1e}", (c - b).abs());
        }
    }
}
