//! Scenario file handling: sectioned key-value (TOML) config covering the
//! signal, front end, converters, calibration, and baseline. Unknown keys are
//! rejected; parse -> serialize -> parse is the identity.

use crate::afe::FrontEndConfig;
use crate::baseline::ContinuousCancelConfig;
use crate::controller::CalibrationConfig;
use crate::converters::{AdcSpec, IdacSpec, QuantizerSpec, Transfer};
use crate::signals::{AcFamily, AcSignalSpec, AmbientSpec, PhotocurrentScenario, StepEvent};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("failed to parse scenario: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key.path=value")]
    BadOverride(String),
    #[error("override key `{0}` does not name a scenario field")]
    UnknownOverrideKey(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

const REQUIRED_SECTIONS: &[&str] = &["sim", "signal", "offset"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    /// sinusoid | synthetic_ppg | fnirs_slow
    pub family: String,
    pub f0_hz: f64,
    pub amplitude_a: f64,
    #[serde(default = "default_dicrotic_amplitude")]
    pub dicrotic_amplitude: f64,
    #[serde(default = "default_dicrotic_delay")]
    pub dicrotic_delay: f64,
    #[serde(default = "default_systolic_width")]
    pub systolic_width: f64,
    #[serde(default = "default_dicrotic_width")]
    pub dicrotic_width: f64,
    #[serde(default)]
    pub noise_rms_a: f64,
}

fn default_dicrotic_amplitude() -> f64 {
    0.4
}
fn default_dicrotic_delay() -> f64 {
    0.35
}
fn default_systolic_width() -> f64 {
    0.045
}
fn default_dicrotic_width() -> f64 {
    0.08
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetSection {
    #[serde(default)]
    pub dark_a: f64,
    #[serde(default)]
    pub ambient_baseline_a: f64,
    #[serde(default)]
    pub ambient_drift_a_per_s: f64,
    #[serde(default)]
    pub flicker_amplitude_a: f64,
    #[serde(default = "default_flicker_hz")]
    pub flicker_hz: f64,
    #[serde(default)]
    pub reflection_a: f64,
    #[serde(default)]
    pub steps: Vec<StepSection>,
}

fn default_flicker_hz() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSection {
    pub t_s: f64,
    pub ambient_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendSection {
    pub supply_v: f64,
    pub v_cm_v: f64,
    pub rf_bits: u32,
    pub rf_lo_ohm: f64,
    pub rf_hi_ohm: f64,
    pub rl_ohm: f64,
    pub cl_f: f64,
    pub oa2_gain: f64,
    pub invert_polarity: bool,
}

impl Default for FrontendSection {
    fn default() -> Self {
        Self {
            supply_v: 3.3,
            v_cm_v: 1.65,
            rf_bits: 8,
            rf_lo_ohm: 3.9e3,
            rf_hi_ohm: 1e6,
            rl_ohm: 20e3,
            cl_f: 10e-6,
            oa2_gain: 10.0,
            invert_polarity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdacSection {
    /// full_range_8bit | soc_7bit
    pub preset: String,
    pub transfer: Transfer,
}

impl Default for IdacSection {
    fn default() -> Self {
        Self { preset: "full_range_8bit".into(), transfer: Transfer::Linear }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcSection {
    pub base_bits: u32,
    pub oversample: u32,
    pub noise_rms_lsb: f64,
}

impl Default for AdcSection {
    fn default() -> Self {
        Self { base_bits: 12, oversample: 256, noise_rms_lsb: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VrefDacSection {
    pub bits: u32,
}

impl Default for VrefDacSection {
    fn default() -> Self {
        Self { bits: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub enabled: bool,
    pub v_dc_threshold_v: f64,
    pub settle_factor: f64,
    pub rf_initial_code: u32,
    pub rf_target_code: u32,
    pub controller_tick_s: f64,
    pub fine_loop_max_iters: u32,
    pub dc_read_window_s: f64,
    pub debounce_tau: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let d = CalibrationConfig::default();
        Self {
            enabled: true,
            v_dc_threshold_v: d.v_dc_threshold,
            settle_factor: d.settle_factor,
            rf_initial_code: d.rf_initial_code,
            rf_target_code: d.rf_target_code,
            controller_tick_s: d.controller_tick,
            fine_loop_max_iters: d.fine_loop_max_iters,
            dc_read_window_s: d.dc_read_window,
            debounce_tau: d.debounce_tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub enabled: bool,
    pub fc_hp_hz: f64,
    pub rf_code: u32,
    pub oa2_gain: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self { enabled: true, fc_hp_hz: 0.8, rf_code: 0, oa2_gain: 10.0 }
    }
}

/// The whole scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub sim: SimSection,
    pub signal: SignalSection,
    pub offset: OffsetSection,
    #[serde(default)]
    pub frontend: FrontendSection,
    #[serde(default)]
    pub idac: IdacSection,
    #[serde(default)]
    pub adc: AdcSection,
    #[serde(default)]
    pub vref_dac: VrefDacSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub baseline: BaselineSection,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        for &section in REQUIRED_SECTIONS {
            if !table.contains_key(section) {
                return Err(ScenarioError::MissingSection(section));
            }
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Applies `key.path=value` overrides onto the parsed document.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, ScenarioError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table: toml::Table = self.to_toml().parse().expect("round-trip");
        for ov in overrides {
            let (path, raw) =
                ov.split_once('=').ok_or_else(|| ScenarioError::BadOverride(ov.clone()))?;
            let mut keys: Vec<&str> = path.trim().split('.').collect();
            let last = keys.pop().ok_or_else(|| ScenarioError::BadOverride(ov.clone()))?;
            let mut node = &mut table;
            for k in keys {
                node = node
                    .entry(k.to_string())
                    .or_insert(toml::Value::Table(Default::default()))
                    .as_table_mut()
                    .ok_or_else(|| ScenarioError::UnknownOverrideKey(path.to_string()))?;
            }
            node.insert(last.to_string(), parse_override_value(raw.trim()));
        }
        let file: ScenarioFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        Ok(file)
    }

    pub fn photocurrent(&self) -> PhotocurrentScenario {
        let family = match self.signal.family.as_str() {
            "synthetic_ppg" => AcFamily::SyntheticPpg {
                dicrotic_amplitude: self.signal.dicrotic_amplitude,
                dicrotic_delay: self.signal.dicrotic_delay,
                systolic_width: self.signal.systolic_width,
                dicrotic_width: self.signal.dicrotic_width,
            },
            "fnirs_slow" => AcFamily::FnirsSlow,
            _ => AcFamily::Sinusoid,
        };
        PhotocurrentScenario {
            duration: self.sim.duration_s,
            dt: self.sim.dt_s,
            ac: AcSignalSpec {
                family,
                f0: self.signal.f0_hz,
                amplitude_peak: self.signal.amplitude_a,
            },
            dark_current: self.offset.dark_a,
            ambient: AmbientSpec {
                baseline: self.offset.ambient_baseline_a,
                drift: self.offset.ambient_drift_a_per_s,
                flicker_amplitude: self.offset.flicker_amplitude_a,
                flicker_hz: self.offset.flicker_hz,
                steps: self
                    .offset
                    .steps
                    .iter()
                    .map(|s| StepEvent { t: s.t_s, baseline: s.ambient_a })
                    .collect(),
            },
            reflection_offset: self.offset.reflection_a,
            rng_seed: self.sim.seed,
            noise_rms: self.signal.noise_rms_a,
        }
    }

    pub fn front_end_config(&self) -> FrontEndConfig {
        let f = &self.frontend;
        let idac_spec = match self.idac.preset.as_str() {
            "soc_7bit" => IdacSpec::soc_7bit(),
            _ => IdacSpec::full_range(self.idac.transfer),
        };
        FrontEndConfig {
            supply: f.supply_v,
            v_cm: f.v_cm_v,
            rf_spec: QuantizerSpec::linear(f.rf_bits, f.rf_lo_ohm, f.rf_hi_ohm),
            rl: f.rl_ohm,
            cl: f.cl_f,
            oa2_gain: f.oa2_gain,
            idac_spec,
            vref_dac_spec: QuantizerSpec::linear(self.vref_dac.bits, 0.0, f.supply_v),
            invert_polarity: f.invert_polarity,
        }
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        let c = &self.calibration;
        CalibrationConfig {
            v_dc_threshold: c.v_dc_threshold_v,
            settle_factor: c.settle_factor,
            rf_initial_code: c.rf_initial_code,
            rf_target_code: c.rf_target_code,
            controller_tick: c.controller_tick_s,
            fine_loop_max_iters: c.fine_loop_max_iters,
            dc_read_window: c.dc_read_window_s,
            debounce_tau: c.debounce_tau,
        }
    }

    pub fn adc_spec(&self) -> AdcSpec {
        AdcSpec::new(self.adc.base_bits, self.adc.oversample, self.frontend.supply_v)
    }

    pub fn baseline_config(&self) -> ContinuousCancelConfig {
        ContinuousCancelConfig {
            fc_hp: self.baseline.fc_hp_hz,
            oa2_gain: self.baseline.oa2_gain,
            v_cm: self.frontend.v_cm_v,
            supply: self.frontend.supply_v,
        }
    }

    /// Full cross-section validation; hard errors fail, soft issues come back
    /// as warning strings.
    pub fn validate(&self) -> Result<Vec<String>, ScenarioError> {
        let mut warnings = Vec::new();
        let scn = self.photocurrent();
        warnings.extend(scn.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?);

        let fe = self.front_end_config();
        fe.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.sim.dt_s > fe.tau() / 10.0 {
            return Err(ScenarioError::Invalid(format!(
                "dt {} exceeds tau/10 = {}",
                self.sim.dt_s,
                fe.tau() / 10.0
            )));
        }
        let adc = self.adc_spec();
        adc.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if self.calibration.enabled {
            self.calibration_config()
                .validate(&adc, self.sim.dt_s)
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            let rf_max = fe.rf_ohms(self.calibration.rf_target_code);
            let ripple = CalibrationConfig::ripple_bound(
                self.signal.amplitude_a,
                rf_max,
                self.signal.f0_hz,
                fe.fc(),
            );
            if self.calibration.v_dc_threshold_v < 2.0 * ripple {
                warnings.push(format!(
                    "v_dc threshold {} V below twice the worst-case LPF ripple bound {:.4} V; \
the watchdog may chatter on the AC signal",
                    self.calibration.v_dc_threshold_v, ripple
                ));
            }
        }
        if self.baseline.enabled {
            if !(self.baseline.fc_hp_hz > 0.0) {
                return Err(ScenarioError::Invalid("baseline fc_hp must be > 0".into()));
            }
            if self.sim.dt_s > 1.0 / (20.0 * self.baseline.fc_hp_hz) {
                return Err(ScenarioError::Invalid(
                    "dt exceeds baseline stability contract 1/(20*fc_hp)".into(),
                ));
            }
        }
        Ok(warnings)
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.trim_matches('"').to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[sim]
duration_s = 10.0

[signal]
family = "sinusoid"
f0_hz = 1.2
amplitude_a = 1e-6

[offset]
ambient_baseline_a = 50e-6
"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = ScenarioFile::parse(MINIMAL).unwrap();
        assert_eq!(s.sim.dt_s, 1e-3);
        assert_eq!(s.frontend.supply_v, 3.3);
        assert_eq!(s.adc.oversample, 256);
        assert!(s.calibration.enabled);
        s.validate().unwrap();
    }

    #[test]
    fn empty_scenario_reports_missing_section() {
        let err = ScenarioFile::parse("").unwrap_err();
        assert!(err.to_string().contains("missing section"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[frontend]\nbogus_key = 1\n");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn parse_serialize_parse_is_identity() {
        let s = ScenarioFile::parse(MINIMAL).unwrap();
        let round = ScenarioFile::parse(&s.to_toml()).unwrap();
        assert_eq!(s, round);
    }

    #[test]
    fn overrides_apply_and_typecheck() {
        let s = ScenarioFile::parse(MINIMAL).unwrap();
        let s2 = s
            .with_overrides(&[
                "offset.ambient_baseline_a=2e-5".into(),
                "calibration.enabled=false".into(),
                "sim.seed=7".into(),
            ])
            .unwrap();
        assert_eq!(s2.offset.ambient_baseline_a, 2e-5);
        assert!(!s2.calibration.enabled);
        assert_eq!(s2.sim.seed, 7);
        assert!(s.with_overrides(&["frontend.nonsense=1".into()]).is_err());
        assert!(s.with_overrides(&["no-equals-sign".into()]).is_err());
    }

    #[test]
    fn zero_threshold_rejected() {
        let s = ScenarioFile::parse(MINIMAL).unwrap();
        let s = s.with_overrides(&["calibration.v_dc_threshold_v=0.0".into()]).unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn ripple_warning_when_threshold_too_low() {
        // 1 uA at 1 Mohm gives ~0.55 V of ripple at 1.2 Hz; 50 mV must warn.
        let s = ScenarioFile::parse(MINIMAL).unwrap();
        let warnings = s.validate().unwrap();
        assert!(warnings.iter().any(|w| w.contains("ripple")), "{warnings:?}");
    }

    #[test]
    fn band_warning_outside_physio_range() {
        let s = ScenarioFile::parse(MINIMAL).unwrap();
        let s = s.with_overrides(&["signal.f0_hz=20.0".into()]).unwrap();
        let warnings = s.validate().unwrap();
        assert!(warnings.iter().any(|w| w.contains("physiological band")));
    }
}
