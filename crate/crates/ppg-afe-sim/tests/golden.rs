//! Regression bounds for the bundled scenarios: every file parses, survives a
//! serialize round trip, validates, and lands inside known-good metric
//! envelopes. Catches behavioral drift without pinning every trace byte.

use ppg_afe_sim::runner::{compute_metrics, simulate};
use ppg_afe_sim::scenario::ScenarioFile;
use std::fs;

const BUNDLED: &[&str] = &["fig5", "fig4_baseline", "watchdog", "offset_only"];

fn scenario(name: &str) -> ScenarioFile {
    let path = format!("{}/scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    ScenarioFile::parse(&fs::read_to_string(path).expect("bundled scenario")).expect("parses")
}

#[test]
fn bundled_scenarios_parse_validate_and_round_trip() {
    for name in BUNDLED {
        let file = scenario(name);
        file.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        let round = ScenarioFile::parse(&file.to_toml()).unwrap();
        assert_eq!(file, round, "{name} does not round-trip");
    }
}

#[test]
fn fig5_envelope() {
    let m = compute_metrics(&simulate(&scenario("fig5")).unwrap());
    assert_eq!(m.error_count, 0);
    assert_eq!(m.recal_count, 0);
    assert_eq!(m.rf_final_code, 255, "full ladder expected with exact cancellation");
    assert_eq!(m.idac_final_code, 49, "49 -> 50 uA on the 7-bit sink");
    assert!(m.residual_dc_v.unwrap() < 4.1e-3);
    let t = m.compensation_time_s.unwrap();
    assert!(t > 2.0 && t < 15.0, "compensation took {t} s");
    // Baseline distorts the PPG; the calibrated path must not.
    let p = m.proposed.unwrap();
    let b = m.baseline.unwrap();
    assert!(p.pearson_r > b.pearson_r);
    assert!(p.amplitude_ratio > 0.995 && p.amplitude_ratio < 1.005);
    assert!(b.amplitude_ratio < 0.98);
}

#[test]
fn fig4_envelope() {
    let m = compute_metrics(&simulate(&scenario("fig4_baseline")).unwrap());
    let b = m.baseline.unwrap();
    assert!((-b.lag_deg - 33.7).abs() < 2.0, "baseline lead {}", -b.lag_deg);
    assert!((b.amplitude_ratio - 0.832).abs() < 0.02);
    let p = m.proposed.unwrap();
    assert!(p.pearson_r > 0.9999 && p.lag_s.abs() < 2e-3);
}

#[test]
fn watchdog_envelope() {
    let m = compute_metrics(&simulate(&scenario("watchdog")).unwrap());
    assert_eq!(m.recal_count, 1);
    assert_eq!(m.error_count, 0);
    // Recovered onto the stepped 90 uA offset (within a code of exact).
    assert!(m.idac_final_code.abs_diff(89) <= 1, "idac {}", m.idac_final_code);
    assert!(m.residual_dc_v.unwrap() < 4.1e-3);
}

#[test]
fn offset_only_envelope() {
    let m = compute_metrics(&simulate(&scenario("offset_only")).unwrap());
    assert_eq!(m.error_count, 0);
    assert!(m.residual_dc_v.unwrap() < 4.1e-3);
    // 39 uA quantization leaves ~9.8 uA residual; headroom caps RF at 168 kOhm.
    assert_eq!(m.rf_final_code, 42);
    assert!(m.proposed.is_none(), "no AC signal, no fidelity numbers");
}
