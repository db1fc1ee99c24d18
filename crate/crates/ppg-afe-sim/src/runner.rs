//! Scenario runner: wires scenario -> front end -> controller (and baseline)
//! -> trace -> metrics, and emits trace.csv, metrics.txt, and events.log.

use crate::afe::FrontEnd;
use crate::baseline::ContinuousCancel;
use crate::controller::{Controller, Event, Phase};
use crate::metrics::{self, Fidelity};
use crate::scenario::{ScenarioError, ScenarioFile};
use crate::signals::{self, SignalParts};
use crate::trace::{self, TraceRow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("simulation error: {0}")]
    Sim(String),
    #[error("sweep values list is empty")]
    EmptySweep,
    #[error("sweep failed for {failed} of {total} values")]
    SweepFailures { failed: usize, total: usize },
}

impl RunError {
    /// CLI exit code: 2 for config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::EmptySweep => 2,
            _ => 1,
        }
    }
}

/// In-memory result of one simulation.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub rows: Vec<TraceRow>,
    pub events: Vec<Event>,
    pub warnings: Vec<String>,
    pub parts: SignalParts,
    pub scenario: ScenarioFile,
}

/// Scalar summary written to metrics.txt.
#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pub residual_dc_v: Option<f64>,
    pub proposed: Option<Fidelity>,
    pub baseline: Option<Fidelity>,
    pub compensation_time_s: Option<f64>,
    pub recal_count: usize,
    pub error_count: usize,
    pub warning_count: usize,
    pub monitor_write_count: usize,
    pub saturated_fraction: f64,
    pub rf_final_code: u32,
    pub rf_final_ohm: f64,
    pub idac_final_code: u32,
    pub vref_final_code: u32,
}

impl Metrics {
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let f = |x: f64| trace::fmt_sig9(x);
        if let Some(v) = self.residual_dc_v {
            push("residual_dc_v", f(v));
        }
        if let Some(p) = &self.proposed {
            push("pearson_r", f(p.pearson_r));
            push("lag_s", f(p.lag_s));
            push("lag_deg", f(p.lag_deg));
            push("amplitude_ratio", f(p.amplitude_ratio));
        }
        if let Some(b) = &self.baseline {
            push("baseline_pearson_r", f(b.pearson_r));
            push("baseline_lag_s", f(b.lag_s));
            push("baseline_lag_deg", f(b.lag_deg));
            push("baseline_amplitude_ratio", f(b.amplitude_ratio));
        }
        if let Some(v) = self.compensation_time_s {
            push("compensation_time_s", f(v));
        }
        push("recal_count", self.recal_count.to_string());
        push("error_count", self.error_count.to_string());
        push("warning_count", self.warning_count.to_string());
        push("monitor_write_count", self.monitor_write_count.to_string());
        push("saturated_fraction", f(self.saturated_fraction));
        push("rf_final_code", self.rf_final_code.to_string());
        push("rf_final_ohm", f(self.rf_final_ohm));
        push("idac_final_code", self.idac_final_code.to_string());
        push("vref_final_code", self.vref_final_code.to_string());
        out
    }
}

/// Runs one scenario entirely in memory.
pub fn simulate(file: &ScenarioFile) -> Result<SimOutput, RunError> {
    let warnings = file.validate()?;
    let scn = file.photocurrent();
    let parts = signals::synthesize(&scn).map_err(|e| RunError::Sim(e.to_string()))?;

    let fe_cfg = file.front_end_config();
    let mut fe = FrontEnd::new(fe_cfg.clone()).map_err(|e| RunError::Sim(e.to_string()))?;
    let cal = file.calibration_config();
    fe.state.rf_code = cal.rf_initial_code;

    let adc = file.adc_spec();
    let adc_noise = file.adc.noise_rms_lsb * adc.base_lsb();
    let mut ctrl = if file.calibration.enabled {
        Some(Controller::new(cal.clone(), adc, adc_noise, fe_cfg.tau()))
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(scn.rng_seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut baseline_fe = if file.baseline.enabled {
        let mut b = FrontEnd::new(fe_cfg.clone()).map_err(|e| RunError::Sim(e.to_string()))?;
        b.state.rf_code = file.baseline.rf_code;
        let cancel = ContinuousCancel::new(file.baseline_config())
            .map_err(|e| RunError::Sim(e.to_string()))?;
        Some((b, cancel))
    } else {
        None
    };

    let dt = scn.dt;
    let ticks_per_ctrl = (cal.controller_tick / dt).round().max(1.0) as usize;
    let n = scn.n_samples();
    let mut rows = Vec::with_capacity(n);

    for k in 0..n {
        let t = k as f64 * dt;
        let i_pd = parts.total[k];
        fe.step(i_pd, dt).map_err(|e| RunError::Sim(e.to_string()))?;

        let v_sig_baseline = match &mut baseline_fe {
            Some((b, cancel)) => {
                b.step(i_pd, dt).map_err(|e| RunError::Sim(e.to_string()))?;
                cancel.step(b.state.v_out, dt).map_err(|e| RunError::Sim(e.to_string()))?
            }
            None => fe_cfg.v_cm,
        };

        if let Some(c) = &mut ctrl {
            if k % ticks_per_ctrl == 0 {
                c.tick(t, &mut fe, &mut rng);
            }
        }

        let (phase, in_cal) = match &ctrl {
            Some(c) => (c.phase(), c.in_calibration()),
            None => (Phase::Idle, false),
        };
        rows.push(TraceRow {
            time_s: t,
            i_pd,
            i_ac_truth: parts.ac[k],
            i_offset_truth: parts.dark[k] + parts.ambient[k] + parts.reflection[k],
            idac_code: fe.state.idac_code,
            rf_code: fe.state.rf_code,
            vref_code: fe.state.vref_code,
            v_out: fe.state.v_out,
            v_dc: fe.state.v_dc,
            v_sig: fe.state.v_sig,
            v_sig_baseline,
            phase,
            in_calibration: in_cal,
            saturated: fe.state.saturated,
        });
    }

    let events = ctrl.map(|c| c.events().to_vec()).unwrap_or_default();
    Ok(SimOutput { rows, events, warnings, parts, scenario: file.clone() })
}

/// The longest trailing stretch of MONITOR samples (or, with the controller
/// disabled, the second half of the trace), with a short guard after entry.
pub fn measurement_window(out: &SimOutput) -> Option<std::ops::Range<usize>> {
    let n = out.rows.len();
    if n == 0 {
        return None;
    }
    if !out.scenario.calibration.enabled {
        return Some(n / 2..n);
    }
    let mut start = None;
    for (k, row) in out.rows.iter().enumerate() {
        match (row.phase, start) {
            (Phase::Monitor, None) => start = Some(k),
            (Phase::Monitor, Some(_)) => {}
            (_, Some(_)) => start = None,
            _ => {}
        }
    }
    let start = start?;
    // Guard half a second so the window starts on settled output.
    let guard = (0.5 / out.scenario.sim.dt_s).round() as usize;
    let start = (start + guard).min(n);
    if start >= n {
        None
    } else {
        Some(start..n)
    }
}

/// Computes the scalar summary for a finished simulation.
pub fn compute_metrics(out: &SimOutput) -> Metrics {
    let file = &out.scenario;
    let fe_cfg = file.front_end_config();
    let dt = file.sim.dt_s;
    let f0 = file.signal.f0_hz;
    let n = out.rows.len();

    let mut m = Metrics {
        recal_count: out
            .events
            .iter()
            .filter(|e| matches!(e.kind, crate::controller::EventKind::Recal))
            .count(),
        error_count: out
            .events
            .iter()
            .filter(|e| matches!(e.kind, crate::controller::EventKind::Error))
            .count(),
        warning_count: out
            .events
            .iter()
            .filter(|e| matches!(e.kind, crate::controller::EventKind::Warning))
            .count(),
        saturated_fraction: out.rows.iter().filter(|r| r.saturated).count() as f64
            / n.max(1) as f64,
        ..Default::default()
    };
    if let Some(last) = out.rows.last() {
        m.rf_final_code = last.rf_code;
        m.rf_final_ohm = fe_cfg.rf_ohms(last.rf_code);
        m.idac_final_code = last.idac_code;
        m.vref_final_code = last.vref_code;
    }
    m.compensation_time_s = metrics::compensation_time(&out.events).ok();

    if let Some(window) = measurement_window(out) {
        let v_out: Vec<f64> = out.rows.iter().map(|r| r.v_out).collect();
        let in_cal: Vec<bool> = out.rows.iter().map(|r| r.in_calibration).collect();
        m.residual_dc_v =
            metrics::residual_dc(&v_out, &in_cal, window.clone(), fe_cfg.v_cm).ok();

        let truth_power: f64 = out.parts.ac[window.clone()].iter().map(|x| x * x).sum();
        if window.len() > 1 && truth_power > 0.0 {
            let rf = fe_cfg.rf_ohms(out.rows[window.start].rf_code);
            let recovered: Vec<f64> = out.rows[window.clone()].iter().map(|r| r.v_sig).collect();
            let truth: Vec<f64> = out.parts.ac[window.clone()]
                .iter()
                .map(|&i| i * rf * fe_cfg.oa2_gain)
                .collect();
            m.proposed = metrics::shape_fidelity(&recovered, &truth, dt, f0).ok();

            if file.baseline.enabled {
                let rf_b = fe_cfg.rf_ohms(file.baseline.rf_code);
                let recovered_b: Vec<f64> =
                    out.rows[window.clone()].iter().map(|r| r.v_sig_baseline).collect();
                let truth_b: Vec<f64> = out.parts.ac[window.clone()]
                    .iter()
                    .map(|&i| i * rf_b * file.baseline.oa2_gain)
                    .collect();
                m.baseline = metrics::shape_fidelity(&recovered_b, &truth_b, dt, f0).ok();
            }
        }
        if let Some(first_monitor) = out
            .events
            .iter()
            .find(|e| matches!(e.kind, crate::controller::EventKind::PhaseChange { to: Phase::Monitor, .. }))
        {
            m.monitor_write_count = out
                .events
                .iter()
                .filter(|e| e.is_write() && e.t > first_monitor.t)
                .count();
        }
    }
    m
}

/// Exit status of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub metrics: Metrics,
    pub out_dir: PathBuf,
    pub controller_errors: usize,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.controller_errors > 0 {
            3
        } else {
            0
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Loads, overrides, validates, simulates, and writes trace.csv, metrics.txt,
/// and events.log into `out_dir`.
pub fn run(
    scenario_path: &Path,
    out_dir: &Path,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<RunSummary, RunError> {
    let text = fs::read_to_string(scenario_path)
        .map_err(|source| RunError::Io { path: scenario_path.to_path_buf(), source })?;
    let mut file = ScenarioFile::parse(&text)?.with_overrides(overrides)?;
    if let Some(seed) = seed {
        file.sim.seed = seed;
    }
    run_file(&file, out_dir)
}

/// Same as [`run`] but from an already-parsed scenario.
pub fn run_file(file: &ScenarioFile, out_dir: &Path) -> Result<RunSummary, RunError> {
    let out = simulate(file)?;
    let metrics = compute_metrics(&out);

    fs::create_dir_all(out_dir)
        .map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;

    let mut csv = Vec::new();
    trace::write_csv(&mut csv, &out.rows)
        .map_err(|source| RunError::Io { path: out_dir.join("trace.csv"), source })?;
    write_file(&out_dir.join("trace.csv"), &String::from_utf8(csv).expect("ascii csv"))?;

    write_file(&out_dir.join("metrics.txt"), &metrics.to_key_values())?;

    let mut log = String::new();
    for w in &out.warnings {
        log.push_str(&format!("0.00000000e0\tWARN\tconfig: {w}\n"));
    }
    for e in &out.events {
        log.push_str(&e.log_line());
        log.push('\n');
    }
    write_file(&out_dir.join("events.log"), &log)?;

    Ok(RunSummary {
        controller_errors: metrics.error_count,
        metrics,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Runs the scenario once per value of `key`, each into its own directory,
/// and writes a combined summary CSV of metrics vs the swept value.
pub fn sweep(
    scenario_path: &Path,
    key: &str,
    values: &[String],
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<Vec<RunSummary>, RunError> {
    if values.is_empty() {
        return Err(RunError::EmptySweep);
    }
    fs::create_dir_all(out_dir)
        .map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;

    let mut summaries = Vec::new();
    let mut failed = 0usize;
    let mut summary_csv = String::from(
        "value,residual_dc_v,pearson_r,lag_s,amplitude_ratio,compensation_time_s,\
recal_count,error_count,rf_final_ohm\n",
    );
    for value in values {
        let sub = out_dir.join(format!("{}={}", key.replace('.', "_"), value));
        let overrides = vec![format!("{key}={value}")];
        match run(scenario_path, &sub, &overrides, seed) {
            Ok(summary) => {
                let m = &summary.metrics;
                let opt = |x: Option<f64>| x.map(trace::fmt_sig9).unwrap_or_default();
                summary_csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    value,
                    opt(m.residual_dc_v),
                    opt(m.proposed.map(|p| p.pearson_r)),
                    opt(m.proposed.map(|p| p.lag_s)),
                    opt(m.proposed.map(|p| p.amplitude_ratio)),
                    opt(m.compensation_time_s),
                    m.recal_count,
                    m.error_count,
                    trace::fmt_sig9(m.rf_final_ohm),
                ));
                summaries.push(summary);
            }
            Err(_) => failed += 1,
        }
    }
    write_file(&out_dir.join("summary.csv"), &summary_csv)?;
    if failed > 0 {
        return Err(RunError::SweepFailures { failed, total: values.len() });
    }
    Ok(summaries)
}
