//! Sweeps the constant offset over two decades and reports post-calibration
//! residual, final transimpedance, and compensation time for each point —
//! the programmatic version of `ppgsim sweep`.

use ppg_afe_sim::runner::{compute_metrics, simulate};
use ppg_afe_sim::scenario::ScenarioFile;
use std::fs;

fn main() {
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/offset_only.toml"
    ))
    .expect("bundled scenario");
    let base = ScenarioFile::parse(&text).expect("valid scenario");

    println!(
        "{:>10} {:>14} {:>12} {:>12} {:>8}",
        "offset_uA", "residual_mV", "rf_kOhm", "comp_time_s", "errors"
    );
    for offset_ua in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0] {
        let file = base
            .with_overrides(&[format!("offset.ambient_baseline_a={}", offset_ua * 1e-6)])
            .expect("override");
        let out = simulate(&file).expect("simulation");
        let m = compute_metrics(&out);
        println!(
            "{:>10.1} {:>14.4} {:>12.1} {:>12.2} {:>8}",
            offset_ua,
            m.residual_dc_v.unwrap_or(f64::NAN) * 1e3,
            m.rf_final_ohm / 1e3,
            m.compensation_time_s.unwrap_or(f64::NAN),
            m.error_count
        );
    }
}
