//! Firmware model: dual-loop discrete auto-calibration state machine with a
//! threshold watchdog. The controller sees the front end only through
//! quantized reads (ADC codes) and quantized writes (iDAC, RF, VREF codes and
//! the two switches).
//!
//! Phase graph:
//!   IDLE -> COARSE_MEASURE -> COARSE_SET -> GAIN_RAISE -> FINE_TRIM -> MONITOR
//! with MONITOR -> COARSE_MEASURE on a debounced threshold crossing.

use crate::afe::{FrontEnd, S2Sel};
use crate::converters::AdcSpec;
use rand::Rng;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("v_dc_threshold {threshold} V must exceed 4 ADC LSB = {limit} V")]
    ThresholdTooSmall { threshold: f64, limit: f64 },
    #[error("settle_factor {0} must be >= 3")]
    SettleTooShort(f64),
    #[error("controller_tick {tick} s must be >= simulation dt {dt} s")]
    TickTooFast { tick: f64, dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    CoarseMeasure,
    CoarseSet,
    GainRaise,
    FineTrim,
    Monitor,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Idle => "IDLE",
            Phase::CoarseMeasure => "COARSE_MEASURE",
            Phase::CoarseSet => "COARSE_SET",
            Phase::GainRaise => "GAIN_RAISE",
            Phase::FineTrim => "FINE_TRIM",
            Phase::Monitor => "MONITOR",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteTarget {
    Idac,
    Rf,
    Vref,
    S1,
    S2,
}

impl fmt::Display for WriteTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WriteTarget::Idac => "idac",
            WriteTarget::Rf => "rf",
            WriteTarget::Vref => "vref",
            WriteTarget::S1 => "s1",
            WriteTarget::S2 => "s2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    PhaseChange { from: Phase, to: Phase },
    Write { target: WriteTarget, code: u32 },
    Warning,
    Error,
    Recal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

impl Event {
    pub fn is_write(&self) -> bool {
        matches!(self.kind, EventKind::Write { .. })
    }

    pub fn log_line(&self) -> String {
        let tag = match self.kind {
            EventKind::PhaseChange { .. } => "PHASE",
            EventKind::Write { .. } => "WRITE",
            EventKind::Warning => "WARN",
            EventKind::Error => "ERROR",
            EventKind::Recal => "RECAL",
        };
        format!("{}\t{}\t{}", crate::trace::fmt_sig9(self.t), tag, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// MONITOR watchdog threshold on |v_dc - v_cm|, volts.
    pub v_dc_threshold: f64,
    /// Multiples of tau to wait before trusting a v_dc reading.
    pub settle_factor: f64,
    pub rf_initial_code: u32,
    pub rf_target_code: u32,
    /// Controller scheduling period, seconds.
    pub controller_tick: f64,
    pub fine_loop_max_iters: u32,
    /// When > 0, each DC reading averages one conversion per tick over this
    /// window, cancelling periodic LPF ripple. 0 means a single conversion.
    pub dc_read_window: f64,
    /// Debounce before recalibration, in multiples of tau.
    pub debounce_tau: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            v_dc_threshold: 0.050,
            settle_factor: 5.0,
            rf_initial_code: 0,
            rf_target_code: 255,
            controller_tick: 0.010,
            fine_loop_max_iters: 8,
            dc_read_window: 0.0,
            debounce_tau: 1.0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self, adc: &AdcSpec, sim_dt: f64) -> Result<(), ControllerError> {
        let limit = 4.0 * adc.base_lsb();
        if self.v_dc_threshold <= limit {
            return Err(ControllerError::ThresholdTooSmall {
                threshold: self.v_dc_threshold,
                limit,
            });
        }
        if self.settle_factor < 3.0 {
            return Err(ControllerError::SettleTooShort(self.settle_factor));
        }
        if self.controller_tick < sim_dt {
            return Err(ControllerError::TickTooFast { tick: self.controller_tick, dt: sim_dt });
        }
        Ok(())
    }

    /// Worst-case LPF ripple of a sinusoid at `f0` with peak current
    /// `amplitude` seen at v_dc when RF is at `rf_ohms`. The MONITOR
    /// threshold should exceed twice this bound.
    pub fn ripple_bound(amplitude: f64, rf_ohms: f64, f0: f64, fc: f64) -> f64 {
        amplitude * rf_ohms / (1.0 + (f0 / fc) * (f0 / fc)).sqrt()
    }
}

/// Averaging accumulator for one DC reading.
#[derive(Debug, Clone, PartialEq)]
struct ReadAcc {
    sum: f64,
    n: u32,
    ticks_left: u32,
}

#[derive(Debug, Clone, PartialEq)]
enum GainRaiseStep {
    /// Doubling resistance toward the target; `last_good` verified clean.
    Doubling { last_good: u32 },
    /// Binary refinement between a clean code and a saturating one.
    Refining { last_good: u32, first_bad: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    cfg: CalibrationConfig,
    adc: AdcSpec,
    adc_noise: f64,
    tau: f64,
    phase: Phase,
    settle_ticks_left: u32,
    read: Option<ReadAcc>,
    idac_code: Option<u32>,
    latched_estimate: f64,
    fine_iters: u32,
    raise: Option<GainRaiseStep>,
    raise_errored: bool,
    debounce_ticks: u32,
    rf_floor_warned: bool,
    events: Vec<Event>,
}

impl Controller {
    pub fn new(cfg: CalibrationConfig, adc: AdcSpec, adc_noise: f64, tau: f64) -> Self {
        Self {
            cfg,
            adc,
            adc_noise,
            tau,
            phase: Phase::Idle,
            settle_ticks_left: 0,
            read: None,
            idac_code: None,
            latched_estimate: 0.0,
            fine_iters: 0,
            raise: None,
            raise_errored: false,
            debounce_ticks: 0,
            rf_floor_warned: false,
            events: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn idac_code(&self) -> Option<u32> {
        self.idac_code
    }

    pub fn latched_estimate(&self) -> f64 {
        self.latched_estimate
    }

    /// True while the signal path should be flagged invalid in the trace.
    pub fn in_calibration(&self) -> bool {
        !matches!(self.phase, Phase::Idle | Phase::Monitor)
    }

    pub fn error_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Error)).count()
    }

    pub fn recal_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e.kind, EventKind::Recal)).count()
    }

    fn settle_ticks(&self) -> u32 {
        (self.cfg.settle_factor * self.tau / self.cfg.controller_tick).ceil() as u32
    }

    fn window_ticks(&self) -> u32 {
        (self.cfg.dc_read_window / self.cfg.controller_tick).round() as u32
    }

    fn log(&mut self, t: f64, kind: EventKind, detail: String) {
        self.events.push(Event { t, kind, detail });
    }

    fn transition(&mut self, t: f64, to: Phase) {
        let from = self.phase;
        self.log(t, EventKind::PhaseChange { from, to }, format!("{from}->{to}"));
        self.phase = to;
    }

    fn write_rf(&mut self, t: f64, fe: &mut FrontEnd, code: u32) {
        fe.state.rf_code = code;
        self.log(t, EventKind::Write { target: WriteTarget::Rf, code }, format!("rf={code}"));
    }

    fn write_vref(&mut self, t: f64, fe: &mut FrontEnd, code: u32) {
        fe.state.vref_code = code;
        self.log(t, EventKind::Write { target: WriteTarget::Vref, code }, format!("vref={code}"));
    }

    fn write_idac(&mut self, t: f64, fe: &mut FrontEnd, code: u32) {
        fe.state.idac_code = code;
        self.idac_code = Some(code);
        self.log(t, EventKind::Write { target: WriteTarget::Idac, code }, format!("idac={code}"));
    }

    fn write_s1(&mut self, t: f64, fe: &mut FrontEnd, closed: bool) {
        fe.state.s1_closed = closed;
        let code = closed as u32;
        self.log(
            t,
            EventKind::Write { target: WriteTarget::S1, code },
            format!("s1={}", if closed { "closed" } else { "open" }),
        );
    }

    fn write_s2(&mut self, t: f64, fe: &mut FrontEnd, sel: S2Sel) {
        fe.state.s2_sel = sel;
        let code = matches!(sel, S2Sel::VrefDac) as u32;
        self.log(
            t,
            EventKind::Write { target: WriteTarget::S2, code },
            format!("s2={}", if code == 1 { "vref_dac" } else { "v_cm" }),
        );
    }

    /// Enter COARSE_MEASURE from scratch: S1 open, S2 at v_cm, RF at the
    /// initial code, VREF back to mid-scale.
    fn enter_coarse(&mut self, t: f64, fe: &mut FrontEnd) {
        self.transition(t, Phase::CoarseMeasure);
        if fe.state.s1_closed {
            self.write_s1(t, fe, false);
        }
        self.idac_code = None;
        if fe.state.s2_sel != S2Sel::VCm {
            self.write_s2(t, fe, S2Sel::VCm);
        }
        if fe.state.rf_code != self.cfg.rf_initial_code {
            self.write_rf(t, fe, self.cfg.rf_initial_code);
        }
        let vref_mid = fe.cfg.vref_dac_spec.quantize(fe.cfg.v_cm);
        if fe.state.vref_code != vref_mid {
            self.write_vref(t, fe, vref_mid);
        }
        self.settle_ticks_left = self.settle_ticks();
        self.read = None;
        self.fine_iters = 0;
        self.raise = None;
        self.raise_errored = false;
        self.debounce_ticks = 0;
    }

    /// One averaged (or single) DC reading through the full-oversampling ADC.
    /// Returns Some(volts) once the reading is complete.
    fn dc_read<R: Rng + ?Sized>(&mut self, v_dc: f64, rng: &mut R) -> Option<f64> {
        let volts = self.adc.volts(self.adc.sample(v_dc, self.adc_noise, rng));
        let window = self.window_ticks();
        if window <= 1 {
            return Some(volts);
        }
        let acc = self.read.get_or_insert(ReadAcc { sum: 0.0, n: 0, ticks_left: window });
        acc.sum += volts;
        acc.n += 1;
        acc.ticks_left -= 1;
        if acc.ticks_left == 0 {
            let mean = acc.sum / acc.n as f64;
            self.read = None;
            Some(mean)
        } else {
            None
        }
    }

    /// One controller tick at time `t`. The front end must already be stepped
    /// to `t`; all observation goes through the ADC.
    pub fn tick<R: Rng + ?Sized>(&mut self, t: f64, fe: &mut FrontEnd, rng: &mut R) {
        match self.phase {
            Phase::Idle => self.enter_coarse(t, fe),
            Phase::CoarseMeasure => self.tick_coarse_measure(t, fe, rng),
            Phase::CoarseSet => unreachable!("COARSE_SET is a transient phase"),
            Phase::GainRaise => self.tick_gain_raise(t, fe, rng),
            Phase::FineTrim => self.tick_fine_trim(t, fe, rng),
            Phase::Monitor => self.tick_monitor(t, fe, rng),
        }
    }

    fn tick_coarse_measure<R: Rng + ?Sized>(&mut self, t: f64, fe: &mut FrontEnd, rng: &mut R) {
        // A railed v_out means RF is too high to measure: back off a decade.
        if self.adc.probe_railed(fe.state.v_out, self.adc_noise, rng) {
            let cur = fe.state.rf_code;
            let lower = fe.cfg.rf_spec.quantize(fe.cfg.rf_ohms(cur) / 10.0);
            let lower = if lower >= cur { cur.saturating_sub(1) } else { lower };
            if lower < cur {
                self.log(
                    t,
                    EventKind::Warning,
                    format!("saturation during coarse measure, rf {cur} -> {lower}"),
                );
                self.write_rf(t, fe, lower);
                self.settle_ticks_left = self.settle_ticks();
                self.read = None;
                return;
            }
            if !self.rf_floor_warned {
                self.rf_floor_warned = true;
                self.log(
                    t,
                    EventKind::Warning,
                    "saturation during coarse measure with rf already at minimum".into(),
                );
            }
            // Measure anyway against the clamped rail; the estimate will be
            // clamped into the iDAC range below.
        }
        if self.settle_ticks_left > 0 {
            self.settle_ticks_left -= 1;
            return;
        }
        let Some(v_dc) = self.dc_read(fe.state.v_dc, rng) else { return };

        self.transition(t, Phase::CoarseSet);
        let rf = fe.cfg.rf_ohms(fe.state.rf_code);
        let sign = if fe.cfg.invert_polarity { -1.0 } else { 1.0 };
        let estimate = sign * (v_dc - fe.cfg.v_cm) / rf;
        self.latched_estimate = estimate;
        let idac = &fe.cfg.idac_spec;
        if estimate > idac.quant.hi || estimate < 0.0 {
            self.log(
                t,
                EventKind::Warning,
                format!(
                    "coarse estimate {:.3e} A outside iDAC range [{:.1e}, {:.1e}] A, clamping",
                    estimate, idac.quant.lo, idac.quant.hi
                ),
            );
        }
        let code = idac.code_for(estimate.max(0.0));
        self.write_idac(t, fe, code);
        self.write_s1(t, fe, true);
        self.transition(t, Phase::GainRaise);
        self.raise = Some(GainRaiseStep::Doubling { last_good: fe.state.rf_code });
    }

    /// Next code on the doubling ladder from `cur`, capped at the target.
    fn double_code(&self, fe: &FrontEnd, cur: u32) -> u32 {
        let next = fe.cfg.rf_spec.quantize(2.0 * fe.cfg.rf_ohms(cur));
        next.max(cur + 1).min(self.cfg.rf_target_code)
    }

    fn finish_gain_raise(&mut self, t: f64, fe: &mut FrontEnd, settled: u32) {
        if fe.state.rf_code != settled {
            self.write_rf(t, fe, settled);
        }
        if settled == self.cfg.rf_initial_code
            && self.cfg.rf_target_code > self.cfg.rf_initial_code
            && self.raise_errored
        {
            self.log(
                t,
                EventKind::Error,
                "gain raise: residual offset saturates at every code above initial".into(),
            );
        }
        self.raise = None;
        self.transition(t, Phase::FineTrim);
        self.write_s2(t, fe, S2Sel::VrefDac);
        self.settle_ticks_left = self.settle_ticks();
        self.read = None;
        self.fine_iters = 0;
    }

    fn tick_gain_raise<R: Rng + ?Sized>(&mut self, t: f64, fe: &mut FrontEnd, rng: &mut R) {
        let cur = fe.state.rf_code;
        let railed = self.adc.probe_railed(fe.state.v_out, self.adc_noise, rng);
        let step = self.raise.clone().expect("raise state present in GAIN_RAISE");
        match step {
            GainRaiseStep::Doubling { last_good } => {
                if railed {
                    if last_good == self.cfg.rf_initial_code {
                        self.raise_errored = true;
                    }
                    if cur <= last_good + 1 {
                        self.finish_gain_raise(t, fe, last_good);
                    } else {
                        let mid = (last_good + cur) / 2;
                        self.raise = Some(GainRaiseStep::Refining { last_good, first_bad: cur });
                        self.write_rf(t, fe, mid);
                    }
                } else if cur >= self.cfg.rf_target_code {
                    self.finish_gain_raise(t, fe, cur);
                } else {
                    let next = self.double_code(fe, cur);
                    self.raise = Some(GainRaiseStep::Doubling { last_good: cur });
                    self.write_rf(t, fe, next);
                }
            }
            GainRaiseStep::Refining { last_good, first_bad } => {
                let (lo, hi) = if railed { (last_good, cur) } else { (cur, first_bad) };
                if hi <= lo + 1 {
                    self.finish_gain_raise(t, fe, lo);
                } else {
                    let mid = (lo + hi) / 2;
                    self.raise = Some(GainRaiseStep::Refining { last_good: lo, first_bad: hi });
                    self.write_rf(t, fe, mid);
                }
            }
        }
    }

    fn tick_fine_trim<R: Rng + ?Sized>(&mut self, t: f64, fe: &mut FrontEnd, rng: &mut R) {
        if self.settle_ticks_left > 0 {
            self.settle_ticks_left -= 1;
            return;
        }
        let Some(v_dc) = self.dc_read(fe.state.v_dc, rng) else { return };
        let err = v_dc - fe.cfg.v_cm;
        let vref_lsb = fe.cfg.vref_dac_spec.lsb();
        let tol = self.adc.effective_lsb().max(0.5 * vref_lsb);
        if err.abs() <= tol {
            self.enter_monitor(t);
            return;
        }
        if self.fine_iters >= self.cfg.fine_loop_max_iters {
            self.log(
                t,
                EventKind::Error,
                format!("fine trim did not converge, residual {:.4e} V", err),
            );
            self.enter_monitor(t);
            return;
        }
        let sign = if fe.cfg.invert_polarity { -1.0 } else { 1.0 };
        let delta = (sign * err / vref_lsb).round() as i64;
        let new = (fe.state.vref_code as i64 - delta)
            .clamp(0, fe.cfg.vref_dac_spec.max_code() as i64) as u32;
        if new != fe.state.vref_code {
            self.write_vref(t, fe, new);
        }
        self.fine_iters += 1;
        self.settle_ticks_left = self.settle_ticks();
        self.read = None;
    }

    fn enter_monitor(&mut self, t: f64) {
        self.transition(t, Phase::Monitor);
        self.debounce_ticks = 0;
    }

    fn tick_monitor<R: Rng + ?Sized>(&mut self, t: f64, fe: &mut FrontEnd, rng: &mut R) {
        let v = self.adc.volts(self.adc.sample(fe.state.v_dc, self.adc_noise, rng));
        if (v - fe.cfg.v_cm).abs() > self.cfg.v_dc_threshold {
            self.debounce_ticks += 1;
        } else {
            self.debounce_ticks = 0;
        }
        if self.debounce_ticks as f64 * self.cfg.controller_tick >= self.cfg.debounce_tau * self.tau
        {
            self.log(
                t,
                EventKind::Recal,
                format!("v_dc {:.4} V crossed threshold, recalibrating", v),
            );
            // Full recalibration from scratch.
            self.enter_coarse(t, fe);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afe::{FrontEnd, FrontEndConfig};
    use crate::converters::IdacSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn adc16(supply: f64) -> AdcSpec {
        AdcSpec::new(12, 256, supply)
    }

    /// Run the closed loop on a constant offset until `stop` says so or the
    /// time budget runs out. Returns (front end, controller, elapsed time).
    fn run_loop(
        fe_cfg: FrontEndConfig,
        cal: CalibrationConfig,
        offset: f64,
        max_t: f64,
        stop: impl Fn(&Controller) -> bool,
    ) -> (FrontEnd, Controller, f64) {
        let dt = 1e-3;
        let mut fe = FrontEnd::new(fe_cfg).unwrap();
        let mut ctrl = Controller::new(cal, adc16(fe.cfg.supply), 0.0, fe.cfg.tau());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ticks_per = (ctrl.cfg.controller_tick / dt).round() as usize;
        let n = (max_t / dt).round() as usize;
        let mut t = 0.0;
        for k in 0..n {
            t = k as f64 * dt;
            fe.step(offset, dt).unwrap();
            if k % ticks_per == 0 {
                ctrl.tick(t, &mut fe, &mut rng);
                if stop(&ctrl) {
                    break;
                }
            }
        }
        (fe, ctrl, t)
    }

    #[test]
    fn coarse_estimate_50ua_within_quantizer_bound() {
        // High settle factor isolates the quantizer-chain error from the
        // first-order settling tail.
        let mut cal = CalibrationConfig::default();
        cal.settle_factor = 12.0;
        let (_, ctrl, _) = run_loop(FrontEndConfig::default_3v3(), cal, 50e-6, 5.0, |c| {
            c.phase() == Phase::GainRaise
        });
        let est = ctrl.latched_estimate();
        assert!(
            (est - 50e-6).abs() <= 0.103e-6,
            "estimate {est} not within half an ADC LSB over RF of 50 uA"
        );
    }

    #[test]
    fn coarse_zero_offset_picks_bottom_code() {
        let (fe, ctrl, _) = run_loop(
            FrontEndConfig::default_3v3(),
            CalibrationConfig::default(),
            0.0,
            5.0,
            |c| c.phase() == Phase::GainRaise,
        );
        // Worst case is v_cm sitting exactly on a half-code boundary.
        assert!(ctrl.latched_estimate().abs() <= 0.51 * 3.3 / 4095.0 / 3.9e3);
        assert_eq!(ctrl.idac_code(), Some(0));
        // The minimum sink current barely moves v_out.
        assert!((fe.state.v_out - 1.65).abs() < 0.01);
    }

    #[test]
    fn coarse_128ua_soc_preset_matches_exhaustive_optimum() {
        let mut cfg = FrontEndConfig::default_3v3();
        cfg.idac_spec = IdacSpec::soc_7bit();
        let idac = cfg.idac_spec;
        let (_, ctrl, _) =
            run_loop(cfg, CalibrationConfig::default(), 128e-6, 5.0, |c| {
                c.phase() == Phase::GainRaise
            });
        let chosen = ctrl.idac_code().unwrap();
        let best = (0..=idac.quant.max_code())
            .min_by(|&a, &b| {
                (idac.current(a) - 128e-6)
                    .abs()
                    .partial_cmp(&(idac.current(b) - 128e-6).abs())
                    .unwrap()
            })
            .unwrap();
        assert!(chosen.abs_diff(best) <= 1, "chosen {chosen}, best {best}");
    }

    #[test]
    fn gain_raise_reaches_target_with_small_residual() {
        let mut cfg = FrontEndConfig::default_3v3();
        cfg.idac_spec = IdacSpec::soc_7bit();
        // 50 uA sits exactly on a 7-bit code, so the residual is tiny.
        let (fe, _, _) = run_loop(cfg, CalibrationConfig::default(), 50e-6, 15.0, |c| {
            c.phase() == Phase::FineTrim
        });
        assert_eq!(fe.state.rf_code, 255);
    }

    #[test]
    fn gain_raise_settles_at_headroom_limit() {
        // Full-range iDAC step is ~39 uA, so a 70 uA offset leaves ~9 uA of
        // residual and the gain raise must stop well short of the target.
        let cfg = FrontEndConfig::default_3v3();
        let offset = 70e-6;
        let (fe, _, _) = run_loop(cfg.clone(), CalibrationConfig::default(), offset, 15.0, |c| {
            c.phase() == Phase::FineTrim
        });
        assert!(fe.state.rf_code < 255);
        // Exhaustive oracle: largest code whose amplified residual stays off
        // the ADC rails.
        let residual = offset - cfg.idac_spec.current(cfg.idac_spec.code_for(offset));
        let best = (0..=255u32)
            .filter(|&c| {
                let v = (1.65 + residual * cfg.rf_ohms(c)).clamp(0.0, 3.3);
                let code = ((v / 3.3) * 4095.0).round() as u32;
                code != 0 && code != 4095
            })
            .max()
            .unwrap();
        assert_eq!(fe.state.rf_code, best, "rf {} vs oracle {}", fe.state.rf_code, best);
    }

    #[test]
    fn fine_trim_converges_and_holds_v_cm() {
        let (fe, ctrl, _) = run_loop(
            FrontEndConfig::default_3v3(),
            CalibrationConfig::default(),
            20e-6,
            30.0,
            |c| c.phase() == Phase::Monitor,
        );
        assert_eq!(ctrl.phase(), Phase::Monitor);
        assert_eq!(ctrl.error_count(), 0);
        let vref_lsb = 3.3 / 1023.0;
        let adc_lsb = 3.3 / 4095.0;
        assert!(
            (fe.state.v_out - 1.65).abs() <= vref_lsb + adc_lsb,
            "residual {} V",
            (fe.state.v_out - 1.65).abs()
        );
    }

    #[test]
    fn fine_trim_zero_residual_immediate() {
        let mut cfg = FrontEndConfig::default_3v3();
        cfg.idac_spec = IdacSpec::soc_7bit();
        let (fe, ctrl, _) = run_loop(cfg, CalibrationConfig::default(), 50e-6, 30.0, |c| {
            c.phase() == Phase::Monitor
        });
        assert_eq!(ctrl.error_count(), 0);
        // Exact iDAC cancellation leaves only the half-LSB VREF ambiguity
        // around v_cm: the trim settles next to mid-scale in one step at most.
        let mid = fe.cfg.vref_dac_spec.quantize(fe.cfg.v_cm);
        assert!(fe.state.vref_code.abs_diff(mid) <= 1, "vref {}", fe.state.vref_code);
    }

    #[test]
    fn fine_trim_beyond_authority_errors_out() {
        // Offset far above the SoC preset range: the clamped iDAC leaves a
        // residual the first doubling cannot survive and VREF cannot null.
        let mut cfg = FrontEndConfig::default_3v3();
        cfg.idac_spec = IdacSpec::soc_7bit();
        let (_, ctrl, _) = run_loop(cfg, CalibrationConfig::default(), 800e-6, 40.0, |c| {
            c.phase() == Phase::Monitor
        });
        assert!(ctrl.error_count() >= 1);
    }

    #[test]
    fn monitor_no_writes_without_crossing() {
        let (_, ctrl, _) = run_loop(
            FrontEndConfig::default_3v3(),
            CalibrationConfig::default(),
            20e-6,
            40.0,
            |_| false,
        );
        assert_eq!(ctrl.phase(), Phase::Monitor);
        let monitor_start = ctrl
            .events()
            .iter()
            .find(|e| matches!(e.kind, EventKind::PhaseChange { to: Phase::Monitor, .. }))
            .unwrap()
            .t;
        let writes_after = ctrl
            .events()
            .iter()
            .filter(|e| e.is_write() && e.t > monitor_start)
            .count();
        assert_eq!(writes_after, 0);
        assert_eq!(ctrl.recal_count(), 0);
    }

    #[test]
    fn s1_never_closed_without_idac_code() {
        let (_, ctrl, _) = run_loop(
            FrontEndConfig::default_3v3(),
            CalibrationConfig::default(),
            50e-6,
            30.0,
            |_| false,
        );
        let mut idac_set = false;
        for e in ctrl.events() {
            match e.kind {
                EventKind::Write { target: WriteTarget::Idac, .. } => idac_set = true,
                EventKind::Write { target: WriteTarget::S1, code: 1 } => {
                    assert!(idac_set, "S1 closed before the iDAC code was set");
                }
                _ => {}
            }
        }
    }

    #[test]
    fn phase_transitions_follow_the_graph() {
        let (_, ctrl, _) = run_loop(
            FrontEndConfig::default_3v3(),
            CalibrationConfig::default(),
            50e-6,
            30.0,
            |_| false,
        );
        let allowed: &[(Phase, Phase)] = &[
            (Phase::Idle, Phase::CoarseMeasure),
            (Phase::CoarseMeasure, Phase::CoarseSet),
            (Phase::CoarseSet, Phase::GainRaise),
            (Phase::GainRaise, Phase::FineTrim),
            (Phase::FineTrim, Phase::Monitor),
            (Phase::Monitor, Phase::CoarseMeasure),
        ];
        for e in ctrl.events() {
            if let EventKind::PhaseChange { from, to } = e.kind {
                assert!(allowed.contains(&(from, to)), "illegal transition {from}->{to}");
            }
        }
    }

    #[test]
    fn threshold_below_adc_floor_rejected() {
        let cal = CalibrationConfig { v_dc_threshold: 0.0, ..Default::default() };
        assert!(cal.validate(&adc16(3.3), 1e-3).is_err());
        let cal = CalibrationConfig { v_dc_threshold: 0.002, ..Default::default() };
        assert!(cal.validate(&adc16(3.3), 1e-3).is_err());
        let cal = CalibrationConfig::default();
        assert!(cal.validate(&adc16(3.3), 1e-3).is_ok());
    }

    #[test]
    fn behavior_invariant_to_sub_lsb_offset_perturbation() {
        // A perturbation far below the ADC step at every read must produce an
        // identical event log: the controller sees only codes.
        let run = |offset: f64| {
            let (_, ctrl, _) = run_loop(
                FrontEndConfig::default_3v3(),
                CalibrationConfig::default(),
                offset,
                25.0,
                |_| false,
            );
            ctrl.events()
                .iter()
                .map(|e| e.log_line())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(20e-6), run(20e-6 + 1e-12));
    }
}
