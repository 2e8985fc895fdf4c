//! Running declarative scenarios and a parameter sweep from code. The same
//! files drive `switchosc reproduce <id>`.
//!
//!     cargo run --example scenarios

use std::path::Path;

use switchosc::experiments::{evaluate, find_scenario, sweep, SweepParameter};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let fig5 = find_scenario(&dir, "FIG5").unwrap();
    let (report, _) = evaluate(&fig5);
    print!("{}", report.render());

    // does the linear sliding orbit exist? sweep the damping
    let mut template = find_scenario(&dir, "E5").unwrap();
    template.experiment = serde_json::from_str(r#"{"kind": "sliding_existence"}"#).unwrap();
    template.expected = serde_json::from_str(r#"[{"quantity": "exists", "check": "holds", "source": "published"}]"#).unwrap();
    let grid = [1e-3, 1e-2, 0.1, 1.0, 10.0];
    let result = sweep(SweepParameter::A, &grid, &template).unwrap();
    print!("\n{}", result.table().to_csv_string());
}
