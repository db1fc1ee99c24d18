//! Discretized analog chain: photodiode summing node, iDAC sink, TIA with
//! programmable RF and VREF, rail saturation, RC low-pass extraction of Vdc,
//! and the OA2 output gain stage.

use crate::converters::{ConverterError, IdacSpec, QuantizerSpec, Transfer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AfeError {
    #[error("v_cm {v_cm} must lie strictly inside the supply rails (0, {supply})")]
    BadCommonMode { v_cm: f64, supply: f64 },
    #[error("rl and cl must be > 0")]
    BadLoadFilter,
    #[error("oa2 gain {0} must be >= 1")]
    BadGain(f64),
    #[error("dt {dt} exceeds stability contract tau/10 = {limit}")]
    DtTooLarge { dt: f64, limit: f64 },
    #[error(transparent)]
    Converter(#[from] ConverterError),
}

/// Which node the TIA reference switch S2 selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum S2Sel {
    VCm,
    VrefDac,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndConfig {
    pub supply: f64,
    pub v_cm: f64,
    /// RF digipot, ohms.
    pub rf_spec: QuantizerSpec,
    /// Low-pass load resistor, ohms.
    pub rl: f64,
    /// Low-pass load capacitor, farads.
    pub cl: f64,
    pub oa2_gain: f64,
    pub idac_spec: IdacSpec,
    /// VREF DAC, volts over [0, supply].
    pub vref_dac_spec: QuantizerSpec,
    /// Flip the TIA sign convention (output falls with photocurrent).
    pub invert_polarity: bool,
}

impl FrontEndConfig {
    pub fn default_3v3() -> Self {
        Self {
            supply: 3.3,
            v_cm: 1.65,
            rf_spec: QuantizerSpec::linear(8, 3.9e3, 1e6),
            rl: 20e3,
            cl: 10e-6,
            oa2_gain: 10.0,
            idac_spec: IdacSpec::full_range(Transfer::Linear),
            vref_dac_spec: QuantizerSpec::linear(10, 0.0, 3.3),
            invert_polarity: false,
        }
    }

    pub fn validate(&self) -> Result<(), AfeError> {
        if !(self.v_cm > 0.0 && self.v_cm < self.supply) {
            return Err(AfeError::BadCommonMode { v_cm: self.v_cm, supply: self.supply });
        }
        if !(self.rl > 0.0 && self.cl > 0.0) {
            return Err(AfeError::BadLoadFilter);
        }
        if !(self.oa2_gain >= 1.0) {
            return Err(AfeError::BadGain(self.oa2_gain));
        }
        self.rf_spec.validate()?;
        self.idac_spec.validate()?;
        self.vref_dac_spec.validate()?;
        Ok(())
    }

    /// LPF time constant RL*CL, seconds.
    pub fn tau(&self) -> f64 {
        self.rl * self.cl
    }

    /// LPF cutoff 1/(2*pi*RL*CL), Hz.
    pub fn fc(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.tau())
    }

    pub fn rf_ohms(&self, code: u32) -> f64 {
        self.rf_spec.value_clamped(code)
    }

    fn clamp_rail(&self, v: f64) -> f64 {
        v.clamp(0.0, self.supply)
    }
}

/// Instantaneous analog state: switch positions, latched codes, node voltages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEndState {
    pub s1_closed: bool,
    pub s2_sel: S2Sel,
    pub rf_code: u32,
    pub idac_code: u32,
    pub vref_code: u32,
    pub v_out: f64,
    pub v_dc: f64,
    pub v_sig: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    pub cfg: FrontEndConfig,
    pub state: FrontEndState,
}

impl FrontEnd {
    pub fn new(cfg: FrontEndConfig) -> Result<Self, AfeError> {
        cfg.validate()?;
        let vref_mid = cfg.vref_dac_spec.quantize(cfg.v_cm);
        let state = FrontEndState {
            s1_closed: false,
            s2_sel: S2Sel::VCm,
            rf_code: 0,
            idac_code: 0,
            vref_code: vref_mid,
            v_out: cfg.v_cm,
            v_dc: cfg.v_cm,
            v_sig: cfg.v_cm,
            saturated: false,
        };
        Ok(Self { cfg, state })
    }

    /// Active TIA reference voltage, per S2.
    pub fn v_ref(&self) -> f64 {
        match self.state.s2_sel {
            S2Sel::VCm => self.cfg.v_cm,
            S2Sel::VrefDac => self.cfg.vref_dac_spec.value_clamped(self.state.vref_code),
        }
    }

    /// Compensation current sunk at the summing node (0 when S1 is open).
    pub fn i_comp(&self) -> f64 {
        if self.state.s1_closed {
            self.cfg.idac_spec.current(self.state.idac_code)
        } else {
            0.0
        }
    }

    /// TIA output for photocurrent `i_pd`; sets the saturation flag when the
    /// ideal output would leave the rails.
    pub fn tia_output(&mut self, i_pd: f64) -> f64 {
        let sign = if self.cfg.invert_polarity { -1.0 } else { 1.0 };
        let ideal = self.v_ref() + sign * (i_pd - self.i_comp()) * self.cfg.rf_ohms(self.state.rf_code);
        let v_out = self.cfg.clamp_rail(ideal);
        self.state.saturated = v_out != ideal;
        v_out
    }

    /// First-order RC update of the Vdc node. Contract: dt <= tau/10.
    pub fn lpf_step(&mut self, v_out: f64, dt: f64) -> Result<f64, AfeError> {
        let tau = self.cfg.tau();
        if dt > tau / 10.0 {
            return Err(AfeError::DtTooLarge { dt, limit: tau / 10.0 });
        }
        self.state.v_dc += dt / tau * (v_out - self.state.v_dc);
        Ok(self.state.v_dc)
    }

    /// Non-inverting OA2 gain stage about v_cm.
    pub fn oa2_output(&self, v_out: f64) -> f64 {
        self.cfg
            .clamp_rail(self.cfg.v_cm + self.cfg.oa2_gain * (v_out - self.cfg.v_cm))
    }

    /// One simulation tick: TIA, LPF, OA2 in order.
    pub fn step(&mut self, i_pd: f64, dt: f64) -> Result<(), AfeError> {
        let v_out = self.tia_output(i_pd);
        self.state.v_out = v_out;
        self.lpf_step(v_out, dt)?;
        self.state.v_sig = self.oa2_output(v_out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe() -> FrontEnd {
        FrontEnd::new(FrontEndConfig::default_3v3()).unwrap()
    }

    #[test]
    fn zero_current_identity() {
        let mut f = fe();
        assert_eq!(f.tia_output(0.0), 1.65);
        assert!(!f.state.saturated);
    }

    #[test]
    fn rail_at_33k_with_50ua() {
        // (supply - v_cm) / 50 uA = 33 kohm: exactly at the rail there.
        let mut f = fe();
        f.state.rf_code = f.cfg.rf_spec.quantize(33e3);
        let rf = f.cfg.rf_ohms(f.state.rf_code);
        let v = f.tia_output(50e-6);
        let ideal = 1.65 + 50e-6 * rf;
        assert_eq!(v, ideal.min(3.3));
        // Any RF above 33 kohm saturates.
        f.state.rf_code = f.cfg.rf_spec.quantize(40e3);
        f.tia_output(50e-6);
        assert!(f.state.saturated);
    }

    #[test]
    fn perfect_cancellation_holds_v_cm() {
        let mut f = fe();
        f.state.rf_code = f.cfg.rf_spec.max_code(); // 1 Mohm
        f.state.s1_closed = true;
        f.state.idac_code = f.cfg.idac_spec.code_for(50e-6);
        let i_comp = f.i_comp();
        let v = f.tia_output(i_comp);
        assert_eq!(v, 1.65);
        assert!(!f.state.saturated);
    }

    #[test]
    fn lpf_time_constant_and_cutoff() {
        let f = fe();
        assert!((f.cfg.tau() - 0.2).abs() < 1e-12);
        assert!((f.cfg.fc() - 0.7957747).abs() < 1e-4);
    }

    #[test]
    fn lpf_step_response_632_percent_at_tau() {
        let mut f = fe();
        f.state.v_dc = 0.0;
        let dt = 1e-3;
        let steps = (f.cfg.tau() / dt).round() as usize;
        for _ in 0..steps {
            f.lpf_step(1.0, dt).unwrap();
        }
        let expected = 1.0 - (-1.0f64).exp();
        assert!(
            (f.state.v_dc - expected).abs() < 0.01 * expected,
            "v_dc = {}, expected {}",
            f.state.v_dc,
            expected
        );
    }

    #[test]
    fn lpf_converges_to_constant_input() {
        let mut f = fe();
        for _ in 0..20_000 {
            f.lpf_step(2.5, 1e-3).unwrap();
        }
        assert!((f.state.v_dc - 2.5).abs() < 1e-9);
    }

    #[test]
    fn lpf_rejects_large_dt() {
        let mut f = fe();
        assert!(matches!(f.lpf_step(1.0, 0.05), Err(AfeError::DtTooLarge { .. })));
    }

    #[test]
    fn oa2_center_and_gain() {
        let f = fe();
        assert_eq!(f.oa2_output(1.65), 1.65);
        assert!((f.oa2_output(1.67) - 1.85).abs() < 1e-12);
        assert_eq!(f.oa2_output(1.65 + 0.3), 3.3); // 1.65 + 3.0 clips
    }

    #[test]
    fn identity_scenario_settles_to_v_cm() {
        let mut f = fe();
        for _ in 0..5000 {
            f.step(0.0, 1e-3).unwrap();
        }
        assert!((f.state.v_out - 1.65).abs() < 1e-12);
        assert!((f.state.v_dc - 1.65).abs() < 1e-9);
        assert!((f.state.v_sig - 1.65).abs() < 1e-12);
    }

    #[test]
    fn tia_affine_in_photocurrent() {
        let mut f = fe();
        f.state.rf_code = 17;
        let rf = f.cfg.rf_ohms(17);
        let v1 = f.tia_output(2e-6);
        let v2 = f.tia_output(3e-6);
        let slope = (v2 - v1) / 1e-6;
        assert!((slope - rf).abs() / rf < 1e-9, "slope {slope} vs rf {rf}");
    }

    #[test]
    fn compensation_superposition() {
        let mut f = fe();
        f.state.rf_code = 100;
        f.state.s1_closed = true;
        f.state.idac_code = f.cfg.idac_spec.code_for(20e-6);
        let i_comp = f.i_comp();
        let with_comp = f.tia_output(25e-6);
        f.state.s1_closed = false;
        let equivalent = f.tia_output(25e-6 - i_comp);
        assert!((with_comp - equivalent).abs() < 1e-12);
    }

    #[test]
    fn rail_containment_over_sweep() {
        let mut f = fe();
        f.state.rf_code = f.cfg.rf_spec.max_code();
        for k in -50..50 {
            f.step(k as f64 * 1e-5, 1e-3).unwrap();
            for v in [f.state.v_out, f.state.v_dc, f.state.v_sig] {
                assert!((0.0..=3.3).contains(&v), "v = {v}");
            }
        }
    }

    #[test]
    fn inverted_polarity_flips_sign() {
        let mut cfg = FrontEndConfig::default_3v3();
        cfg.invert_polarity = true;
        let mut f = FrontEnd::new(cfg).unwrap();
        assert!(f.tia_output(10e-6) < 1.65);
    }
}
