//! Doppler and time-of-arrival measurement models.
//!
//! A quasi-static emitter on the ground plane (`z = 0`) is observed by a UAV
//! flying at a fixed height. Noiseless models:
//!
//! - Doppler: `f_d = gamma * v . (p_u - p_s) / |p_u - p_s|` with
//!   `gamma = f0 / c` (positive when the UAV recedes — the sign convention of
//!   the synthesis is mirrored by the estimator, which is all that matters),
//! - ToA: `tau = |p_u - p_s| / c`.
//!
//! Noise is additive zero-mean Gaussian with per-channel variances
//! `sigma_w2` (Hz^2) and `sigma_tau2` (s^2). All randomness is derived from
//! explicit integer seeds so frames are reproducible sample-by-sample and
//! Monte Carlo trials are order-independent.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Emitter position on the ground plane (meters). `z_s = 0` by assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterPosition {
    pub x: f64,
    pub y: f64,
}

impl EmitterPosition {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Embedded 3D position `[x, y, 0]`.
    pub fn as_vec3(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, 0.0)
    }

    pub fn planar(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// UAV kinematic state at one sample epoch.
///
/// Within a run the height is constant and flight is planar, so
/// `velocity.z == 0` and `position.z` never changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    /// Position in meters.
    pub position: Vector3<f64>,
    /// Velocity in meters/second (planar: z-component is 0).
    pub velocity: Vector3<f64>,
    /// 1-based sample index within the frame.
    pub time_index: usize,
}

/// Physical and sampling parameters shared by every frame of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    /// Emitter tone frequency in Hz.
    pub f0: f64,
    /// Propagation speed in m/s.
    pub c: f64,
    /// Sample period in seconds.
    pub delta: f64,
    /// Samples per frame.
    pub k_per_frame: usize,
    /// Doppler noise variance in Hz^2.
    pub sigma_w2: f64,
    /// ToA noise variance in s^2.
    pub sigma_tau2: f64,
}

impl SignalParams {
    /// `gamma = f0 / c`, the Doppler scale factor.
    pub fn gamma(&self) -> f64 {
        self.f0 / self.c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && self.f0 >= 0.0) {
            return Err(Error::Config(format!("signal.f0 must be finite and >= 0, got {}", self.f0)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Config(format!("signal.c must be finite and > 0, got {}", self.c)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Config(format!("signal.delta must be finite and > 0, got {}", self.delta)));
        }
        if self.k_per_frame < 3 {
            return Err(Error::Config(format!(
                "signal.K must be >= 3 (three unknowns in the linearized system), got {}",
                self.k_per_frame
            )));
        }
        if !(self.sigma_w2.is_finite() && self.sigma_w2 >= 0.0) {
            return Err(Error::Config(format!("signal.sigma_w2 must be >= 0, got {}", self.sigma_w2)));
        }
        if !(self.sigma_tau2.is_finite() && self.sigma_tau2 >= 0.0) {
            return Err(Error::Config(format!("signal.sigma_tau2 must be >= 0, got {}", self.sigma_tau2)));
        }
        Ok(())
    }
}

/// One frame: `K` UAV states with the paired noisy Doppler and ToA samples.
///
/// All states of a frame share one velocity vector (straight
/// constant-velocity flight within the frame).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub uav_states: Vec<UavState>,
    /// Doppler samples `f_{d,k}` in Hz.
    pub doppler: Vec<f64>,
    /// ToA samples `tau_k` in seconds.
    pub toa: Vec<f64>,
    /// 1-based frame index.
    pub frame_index: usize,
}

impl MeasurementFrame {
    pub fn len(&self) -> usize {
        self.uav_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uav_states.is_empty()
    }

    /// The common frame velocity.
    pub fn velocity(&self) -> Vector3<f64> {
        self.uav_states[0].velocity
    }
}

/// Noiseless Doppler frequency in Hz.
pub fn doppler_true(uav: &UavState, emitter: &EmitterPosition, params: &SignalParams) -> Result<f64> {
    let diff = uav.position - emitter.as_vec3();
    let range = diff.norm();
    if range == 0.0 {
        return Err(Error::ZeroRange);
    }
    Ok(params.gamma() * uav.velocity.dot(&diff) / range)
}

/// Noiseless time of arrival in seconds.
pub fn toa_true(uav: &UavState, emitter: &EmitterPosition, params: &SignalParams) -> Result<f64> {
    let diff = uav.position - emitter.as_vec3();
    let range = diff.norm();
    if range == 0.0 {
        return Err(Error::ZeroRange);
    }
    Ok(range / params.c)
}

/// splitmix64 finalizer; stable across platforms.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one frame of one trial, derived from the root seed.
///
/// Each (trial, frame) pair gets an independent stream, so trials can run in
/// any order (or in parallel) and still produce identical data.
pub fn derive_frame_seed(root_seed: u64, trial: u64, frame: u64) -> u64 {
    mix64(root_seed ^ mix64(trial ^ mix64(frame)))
}

/// Seed for one sample epoch within a frame stream.
pub fn derive_sample_seed(frame_seed: u64, k: u64) -> u64 {
    mix64(frame_seed ^ mix64(k.wrapping_add(0x5bd1_e995)))
}

/// Draw one noisy (Doppler, ToA) pair at the given state.
///
/// The Doppler perturbation is always drawn before the ToA one so a sample
/// stream is reproducible regardless of which channel a caller consumes.
pub fn synthesize_sample(
    uav: &UavState,
    emitter: &EmitterPosition,
    params: &SignalParams,
    sample_seed: u64,
) -> Result<(f64, f64)> {
    let f_true = doppler_true(uav, emitter, params)?;
    let tau_true = toa_true(uav, emitter, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let w = draw_noise(&mut rng, params.sigma_w2);
    let n_tau = draw_noise(&mut rng, params.sigma_tau2);
    Ok((f_true + w, tau_true + n_tau))
}

fn draw_noise(rng: &mut ChaCha8Rng, variance: f64) -> f64 {
    if variance == 0.0 {
        // Keep the zero-noise case bit-exact and still consume one draw so
        // channel alignment does not depend on the variance values.
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let _ = normal.sample(rng);
        0.0
    } else {
        let normal = Normal::new(0.0, variance.sqrt()).expect("nonnegative std dev");
        normal.sample(rng)
    }
}

/// Synthesize a frame of `K` samples along the straight constant-velocity
/// path `p_{u,k} = p_{u,1} + (k-1) * delta * v`.
///
/// Deterministic for a fixed `frame_seed`.
pub fn synthesize_frame(
    initial_uav: &UavState,
    emitter: &EmitterPosition,
    params: &SignalParams,
    frame_index: usize,
    frame_seed: u64,
) -> Result<MeasurementFrame> {
    params.validate()?;
    let k_count = params.k_per_frame;
    let mut uav_states = Vec::with_capacity(k_count);
    let mut doppler = Vec::with_capacity(k_count);
    let mut toa = Vec::with_capacity(k_count);
    for k in 1..=k_count {
        let state = UavState {
            position: initial_uav.position + (k as f64 - 1.0) * params.delta * initial_uav.velocity,
            velocity: initial_uav.velocity,
            time_index: k,
        };
        let seed = derive_sample_seed(frame_seed, k as u64);
        let (f, tau) = synthesize_sample(&state, emitter, params, seed)?;
        uav_states.push(state);
        doppler.push(f);
        toa.push(tau);
    }
    Ok(MeasurementFrame {
        uav_states,
        doppler,
        toa,
        frame_index,
    })
}
