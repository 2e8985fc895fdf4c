//! A nonlinear regularized run from above the layer: it is captured by a
//! late, wide attracting branch, slides across most of it, exits near the
//! fold and stays confined below the layer. Writes the trajectory as CSV and
//! SVG to `out/collapse_run/`.
//!
//!     cargo run --example collapse_run

use std::path::Path;

use switchosc::io::write_trajectory_file;
use switchosc::plot::svg_from_trajectory_csv;
use switchosc::regularization::{exit, LayerOptions, LayerState};
use switchosc::OscillatorParams;

fn main() {
    let params = OscillatorParams::new(0.01).unwrap().with_epsilon(0.0025).unwrap();
    let r = exit::first_slide(&params, LayerState::new(14.1, 1.1), 60.0, &LayerOptions::default()).unwrap();
    let c = r.capture.expect("captured");
    println!("entered the layer at x = {:.5}", r.x_entry);
    println!("captured by {} at x = {:.5}", c.branch.id(), c.x_capture);
    println!("left it at x = {:.5} after sliding {:.4}", r.x_exit.unwrap(), r.slid_length.unwrap());
    println!("largest v afterwards: {:.4} (confined: {})", r.max_v_after_exit, r.confined);

    let dir = Path::new("out/collapse_run");
    std::fs::create_dir_all(dir).unwrap();
    let csv = dir.join("trajectory.csv");
    write_trajectory_file(&r.run.trajectory, &csv).unwrap();
    let svg = svg_from_trajectory_csv(&std::fs::read_to_string(&csv).unwrap(), "collapse run").unwrap();
    std::fs::write(dir.join("trajectory.svg"), svg).unwrap();
    println!("wrote {}", dir.display());
}
