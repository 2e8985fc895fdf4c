//! Sliding branches of both models, the threshold classification, and the
//! ageing of the nonlinear model: branches widen as `4n/3`, so late
//! trajectories slide longer.
//!
//!     cargo run --example branches_and_ageing

use switchosc::sliding::{ageing_metrics, branches, simulate_discontinuous};
use switchosc::{classify_threshold_point, HybridState, OscillatorParams, SwitchingModel};

fn main() {
    for x in [0.5, 1.5, 3.0, 5.0, 7.0] {
        println!("threshold at x = {x}: {:?}", classify_threshold_point(x));
    }
    println!();
    for model in [SwitchingModel::Linear, SwitchingModel::Nonlinear] {
        for b in branches(model, (0.0, 8.0)).iter().filter(|b| b.domain.1 <= 8.0) {
            println!("{}: ({:.4}, {:.4}) {:?}", b.id(), b.domain.0, b.domain.1, b.stability);
        }
    }

    let params = OscillatorParams::new(0.5).unwrap();
    let start = HybridState::off_threshold(0.3, -0.2).unwrap();
    let traj = simulate_discontinuous(SwitchingModel::Nonlinear, &params, start, 24.0, 1e-12).unwrap();
    println!("\nbranch  width    slid");
    for row in ageing_metrics(SwitchingModel::Nonlinear, (0.0, 24.0), Some(&traj)) {
        if let Some(s) = row.slid_length.filter(|&s| s > 0.0) {
            println!("N{:<5} {:>7.4} {:>7.4}", row.branch, row.width, s);
        }
    }
}
