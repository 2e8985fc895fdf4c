//! Trajectory CSV (fixed columns `x,y_or_v,mode,branch,event`, 12
//! significant digits) and the SVG rendered from it.
//!
//!     cargo run --example csv_and_svg

use switchosc::io::{read_trajectory, write_trajectory};
use switchosc::plot::svg_from_trajectory_csv;
use switchosc::sliding::simulate_discontinuous;
use switchosc::{HybridState, OscillatorParams, Side, SwitchingModel};

fn main() {
    let p = OscillatorParams::new(2.0).unwrap();
    let traj = simulate_discontinuous(SwitchingModel::Linear, &p, HybridState::departing(10.0 / 3.0, Side::Plus), 12.0, 1e-12)
        .unwrap();
    let mut buf = Vec::new();
    write_trajectory(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for line in text.lines().filter(|l| !l.ends_with(',')).take(8) {
        println!("{line}");
    }
    let rows = read_trajectory(text.as_bytes()).unwrap();
    println!("{} rows read back", rows.len());

    let svg = svg_from_trajectory_csv(&text, "sliding period-4 orbit, a = 2").unwrap();
    // the same CSV always renders to the same bytes
    assert_eq!(svg, svg_from_trajectory_csv(&text, "sliding period-4 orbit, a = 2").unwrap());
    println!("SVG: {} bytes", svg.len());
}
