//! Event-driven runs of the discontinuous system under both switching models.
//!
//!     cargo run --example discontinuous_simulation

use switchosc::sliding::simulate_discontinuous;
use switchosc::{HybridState, OscillatorParams, SwitchingModel};

fn main() {
    let params = OscillatorParams::new(0.5).unwrap();
    let start = HybridState::off_threshold(0.3, -0.2).unwrap();

    for model in [SwitchingModel::Linear, SwitchingModel::Nonlinear] {
        let traj = simulate_discontinuous(model, &params, start, 16.0, 1e-12).unwrap();
        println!("{model} model, a = {}, from (0.3, -0.2):", params.a);
        for e in &traj.events {
            let branch = e.branch.map(|b| format!(" on {b}")).unwrap_or_default();
            println!("  x = {:>9.5}  {}{branch}", e.x, e.kind.label());
        }
        let slid: f64 = traj.segments.iter().filter(|s| s.mode.label() == "slide").map(|s| s.length()).sum();
        println!("  slid {slid:.4} of {:.1}\n", traj.x_end() - 0.3);
    }
}
