//! Discrete-time simulator of a photoplethysmography / fNIRS analog front
//! end with discrete offset-current compensation.
//!
//! The signal chain is: photodiode current (AC physiological signal riding on
//! a large DC offset from dark current, ambient light, and static tissue
//! reflection) into a transimpedance stage with a programmable feedback
//! resistor, an offset-subtracting current DAC at the summing node, a
//! low-pass sense filter, and a gain stage. A firmware-style controller
//! auto-calibrates the subtraction in two loops — a coarse current-DAC pass
//! and a fine reference-DAC trim — then raises the transimpedance gain as far
//! as output headroom allows and watches for drift. A conventional
//! continuous-cancellation path (high-pass feedback) is modelled alongside it
//! for comparison.
//!
//! The controller only ever sees ADC codes and only ever writes converter
//! codes and switch states, so quantization effects are first-class: every
//! device in the chain is modelled at its real bit depth.
//!
//! Entry points: [`scenario::ScenarioFile`] for configuration,
//! [`runner::run`] / [`runner::sweep`] for end-to-end simulations with file
//! outputs, or the individual modules for programmatic use.

pub mod afe;
pub mod baseline;
pub mod controller;
pub mod converters;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod signals;
pub mod trace;

pub use afe::{FrontEnd, FrontEndConfig, FrontEndState, S2Sel};
pub use baseline::{ContinuousCancel, ContinuousCancelConfig};
pub use controller::{CalibrationConfig, Controller, Event, EventKind, Phase, WriteTarget};
pub use converters::{AdcSpec, IdacSpec, QuantizerSpec, Transfer};
pub use metrics::{compensation_time, residual_dc, shape_fidelity, Fidelity};
pub use runner::{run, simulate, sweep, Metrics, RunError, RunSummary, SimOutput};
pub use scenario::ScenarioFile;
pub use signals::{synthesize, AcFamily, PhotocurrentScenario, SignalParts};
pub use trace::{TraceRow, CSV_HEADER};
