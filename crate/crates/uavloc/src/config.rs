//! Scenario configuration: JSON schema, defaults, validation.
//!
//! Every field is optional in the JSON file and falls back to the reference
//! scenario: UAV starting at `[0, 0, 50]` m flying `[10, 0, 0]` m/s, emitter
//! at `[35, 15]` m, `f0 = 3e8` Hz, `c = 3e8` m/s, `delta = 0.05` s, `K = 10`
//! samples per frame, noise variances `0.01` Hz^2 and `1e-6` s^2, 10 frames,
//! 50 Monte Carlo trials. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{EmitterPosition, SignalParams, UavState};
use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterConfig {
    pub x_s: f64,
    pub y_s: f64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        Self { x_s: 35.0, y_s: 15.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UavInitConfig {
    /// `[x, y, z]` in meters.
    pub position: [f64; 3],
    /// `[vx, vy, vz]` in m/s; `vz` must be 0 (planar flight).
    pub velocity: [f64; 3],
}

impl Default for UavInitConfig {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 50.0],
            velocity: [10.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    /// Emitter tone frequency (Hz).
    pub f0: f64,
    /// Propagation speed (m/s).
    pub c: f64,
    /// Sample period (s).
    pub delta: f64,
    /// Samples per frame.
    #[serde(rename = "K")]
    pub k_per_frame: usize,
    /// Doppler noise variance (Hz^2).
    pub sigma_w2: f64,
    /// ToA noise variance (s^2).
    pub sigma_tau2: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            f0: 3e8,
            c: 3e8,
            delta: 0.05,
            k_per_frame: 10,
            sigma_w2: 0.01,
            sigma_tau2: 1e-6,
        }
    }
}

/// SNR sweep specification: either target SNR values in dB (noise variances
/// derived per measurement type from the noiseless signal power) or explicit
/// `(sigma_w2, sigma_tau2)` variance pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSweepSpec {
    SnrDb(Vec<f64>),
    VariancePairs(Vec<(f64, f64)>),
}

/// Full scenario description for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub emitter: EmitterConfig,
    pub uav_init: UavInitConfig,
    pub signal: SignalConfig,
    /// Number of frames `L` per trial.
    pub num_frames: usize,
    /// Re-design the velocity between frames.
    pub trajectory_enabled: bool,
    /// Monte Carlo trials per experiment.
    pub num_trials: usize,
    /// SNR sweep points for the `snr-sweep` command.
    pub snr_sweep: Option<SnrSweepSpec>,
    /// Hard UAV speed bound (m/s).
    pub v_max: f64,
    /// Root RNG seed; every trial/frame/sample stream derives from it.
    pub seed: u64,
    /// Rescale the Doppler-derived row of the augmented system to the mean
    /// ToA row norm (conditioning aid; off keeps the reference formulation).
    pub normalize_doppler_row: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            emitter: EmitterConfig::default(),
            uav_init: UavInitConfig::default(),
            signal: SignalConfig::default(),
            num_frames: 10,
            trajectory_enabled: true,
            num_trials: 50,
            snr_sweep: None,
            v_max: 30.0,
            seed: 1,
            normalize_doppler_row: false,
        }
    }
}

impl ScenarioConfig {
    pub fn signal_params(&self) -> SignalParams {
        SignalParams {
            f0: self.signal.f0,
            c: self.signal.c,
            delta: self.signal.delta,
            k_per_frame: self.signal.k_per_frame,
            sigma_w2: self.signal.sigma_w2,
            sigma_tau2: self.signal.sigma_tau2,
        }
    }

    pub fn emitter_position(&self) -> EmitterPosition {
        EmitterPosition::new(self.emitter.x_s, self.emitter.y_s)
    }

    pub fn initial_uav(&self) -> UavState {
        UavState {
            position: Vector3::from(self.uav_init.position),
            velocity: Vector3::from(self.uav_init.velocity),
            time_index: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.signal_params().validate()?;
        for (name, v) in [
            ("emitter.x_s", self.emitter.x_s),
            ("emitter.y_s", self.emitter.y_s),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.uav_init.position.iter().any(|v| !v.is_finite())
            || self.uav_init.velocity.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Config("uav_init entries must be finite".into()));
        }
        if self.uav_init.velocity[2] != 0.0 {
            return Err(Error::Config(format!(
                "uav_init.velocity z-component must be 0 (planar flight), got {}",
                self.uav_init.velocity[2]
            )));
        }
        if self.num_frames == 0 {
            return Err(Error::Config("num_frames must be >= 1".into()));
        }
        if self.num_trials == 0 {
            return Err(Error::Config("num_trials must be >= 1".into()));
        }
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::Config(format!("v_max must be finite and > 0, got {}", self.v_max)));
        }
        let speed = (self.uav_init.velocity[0].powi(2) + self.uav_init.velocity[1].powi(2)).sqrt();
        if speed > self.v_max {
            return Err(Error::Config(format!(
                "initial speed {speed} exceeds v_max {}",
                self.v_max
            )));
        }
        if let Some(SnrSweepSpec::VariancePairs(pairs)) = &self.snr_sweep {
            for (i, (w2, t2)) in pairs.iter().enumerate() {
                if !(w2.is_finite() && *w2 >= 0.0 && t2.is_finite() && *t2 >= 0.0) {
                    return Err(Error::Config(format!(
                        "snr_sweep[{i}] variances must be finite and >= 0, got ({w2}, {t2})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parse and validate a config from a JSON string.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    /// SHA-256 over the canonical JSON serialization, as a hex digest.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_string(self).expect("config serialization");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse and validate a config file.
pub fn parse_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text)
}
