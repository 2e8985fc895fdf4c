//! Long nonlinear runs approach the 4-periodic object `v_r` without ever
//! becoming periodic: window distances shrink, but consecutive windows
//! never coincide.
//!
//!     cargo run --example vr_convergence

use switchosc::regularization::{fold_points, integrate_layer, vr, LayerOptions, LayerState};
use switchosc::{OscillatorParams, Side, SwitchingModel};

fn main() {
    let p = OscillatorParams::new(0.01).unwrap().with_epsilon(0.0025).unwrap();
    let reference = vr::v_r_reference(5, &p).unwrap();
    println!("v_r leaves the layer at the fold {:.6} and re-enters {:.4} later", reference.x_fold, reference.excursion);

    let x_end = fold_points(Side::Minus, 40, &p).unwrap() + 4.5;
    let opts = LayerOptions { max_step: 0.002, ..LayerOptions::default() };
    let run = integrate_layer(SwitchingModel::Nonlinear, &p, LayerState::new(12.1, -1.1), x_end, &opts).unwrap();
    for w in vr::convergence_to_vr(&run, 5..=20).unwrap() {
        println!("n = {:>2}: sup|v − v_r| = {:.5}, sup|v(x) − v(x−4)| = {:.3e}", w.n, w.to_reference, w.to_previous);
    }
}
