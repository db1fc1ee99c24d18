//! Runs the full auto-calibration sequence on the bundled PPG scenario and
//! prints the controller's event log plus the post-calibration metrics.

use ppg_afe_sim::runner::{compute_metrics, simulate};
use ppg_afe_sim::scenario::ScenarioFile;
use std::fs;

fn main() {
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/fig5.toml"
    ))
    .expect("bundled scenario");
    let file = ScenarioFile::parse(&text).expect("valid scenario");
    let out = simulate(&file).expect("simulation");

    println!("controller event log:");
    for event in &out.events {
        println!("  {}", event.log_line());
    }

    let m = compute_metrics(&out);
    println!("\nsummary:");
    print!("{}", m.to_key_values());
}
