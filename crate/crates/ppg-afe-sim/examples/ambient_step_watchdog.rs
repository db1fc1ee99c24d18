//! Demonstrates the MONITOR watchdog: an ambient-light step knocks the sense
//! voltage past the threshold, the debounced watchdog fires one RECAL, and
//! the system recalibrates onto the new offset.

use ppg_afe_sim::controller::EventKind;
use ppg_afe_sim::runner::{compute_metrics, simulate};
use ppg_afe_sim::scenario::ScenarioFile;
use std::fs;

fn main() {
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/watchdog.toml"
    ))
    .expect("bundled scenario");
    let file = ScenarioFile::parse(&text).expect("valid scenario");
    let out = simulate(&file).expect("simulation");

    println!("offset steps from 50 uA to 90 uA at t = 10 s\n");
    for e in &out.events {
        let marker = match e.kind {
            EventKind::Recal => " <-- watchdog",
            _ => "",
        };
        println!("  {}{marker}", e.log_line());
    }

    let m = compute_metrics(&out);
    println!(
        "\nrecals: {}, errors: {}, final iDAC code {} ({:.1} uA), residual after recovery {:.3} mV",
        m.recal_count,
        m.error_count,
        m.idac_final_code,
        file.front_end_config().idac_spec.current(m.idac_final_code) * 1e6,
        m.residual_dc_v.unwrap_or(f64::NAN) * 1e3
    );
}
