//! Traditional continuous offset cancellation: a near-DC feedback nullifier,
//! behaviorally a first-order high-pass ahead of the output gain stage. Used
//! to quantify the delay and shape morphing the discrete loop avoids.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("fc_hp must be > 0, got {0}")]
    BadCutoff(f64),
    #[error("dt {dt} exceeds stability contract 1/(20*fc_hp) = {limit}")]
    DtTooLarge { dt: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousCancelConfig {
    /// High-pass corner of the feedback nullifier, Hz.
    pub fc_hp: f64,
    pub oa2_gain: f64,
    pub v_cm: f64,
    pub supply: f64,
}

/// State of the continuous-cancellation signal path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousCancel {
    cfg: ContinuousCancelConfig,
    /// Feedback LPF tracking v_out; the pre-gain node sees v_out minus this.
    lpf_state: f64,
}

impl ContinuousCancel {
    pub fn new(cfg: ContinuousCancelConfig) -> Result<Self, BaselineError> {
        if !(cfg.fc_hp > 0.0) {
            return Err(BaselineError::BadCutoff(cfg.fc_hp));
        }
        Ok(Self { cfg, lpf_state: cfg.v_cm })
    }

    pub fn tau(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.cfg.fc_hp)
    }

    /// One tick: track v_out through the feedback LPF, amplify the residual.
    pub fn step(&mut self, v_out: f64, dt: f64) -> Result<f64, BaselineError> {
        let limit = 1.0 / (20.0 * self.cfg.fc_hp);
        if dt > limit {
            return Err(BaselineError::DtTooLarge { dt, limit });
        }
        self.lpf_state += dt / self.tau() * (v_out - self.lpf_state);
        let v = self.cfg.v_cm + self.cfg.oa2_gain * (v_out - self.lpf_state);
        Ok(v.clamp(0.0, self.cfg.supply))
    }
}
