//! One agent's control tick and its double-integrator plant.
//!
//! The inverse embedding needs the deformation at the agent's phase, and the
//! phase is read from the inverse embedding. The loop is broken by inverting
//! at the phase stored from the previous tick and re-reading the phase from
//! the result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::deformation::EvaluationError;
use crate::embedding::{phase_of, to_embedding, EmbeddingConfig, EmbeddingError};
use crate::phase::{phase_rate, PhaseError, PhaseGains, PhaseView};
use crate::reference::{next_target, pd_accel, PositionGains};
use crate::so3::Vec3;

pub type AgentId = u32;

/// Fixed-point iterations used to find a spawn point's phase.
const INIT_PHASE_ITERATIONS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TickError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
}

/// True plant state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AgentState {
    pub x: Vec3,
    pub v: Vec3,
}

/// How the PD derivative term is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    /// Backward difference of the position error; no velocity sensing.
    #[default]
    PositionDifference,
    /// `−v` from the plant (ignores the reference's own motion).
    PlantVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentGains {
    pub position: PositionGains,
    pub phase: PhaseGains,
    pub derivative: DerivativeSource,
}

/// Per-agent controller memory.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRuntime {
    pub id: AgentId,
    pub lead_id: AgentId,
    pub lag_id: AgentId,
    /// Phase state used to invert the embedding on the next tick.
    pub phi: f64,
    pub e_x_prev: Option<Vec3>,
    pub last_broadcast_phi: f64,
    pub last_target: Option<Vec3>,
}

impl AgentRuntime {
    /// Creates a runtime for an agent spawned at `x`. Its initial phase is
    /// the fixed point of `φ ↦ phase_of(to_embedding(x, φ))`, started from the
    /// planar angle around the center.
    pub fn spawn(id: AgentId, x: Vec3, cfg: &EmbeddingConfig) -> Result<AgentRuntime, TickError> {
        let rel = x - cfg.center;
        let mut phi = phase_of(rel)?;
        for _ in 0..INIT_PHASE_ITERATIONS {
            phi = phase_of(to_embedding(x, phi, cfg)?)?;
        }
        Ok(AgentRuntime { id, lead_id: id, lag_id: id, phi, e_x_prev: None, last_broadcast_phi: phi, last_target: None })
    }
}

/// Additive white Gaussian position noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    /// Per-axis standard deviation (m).
    pub sigma: f64,
    pub rng_seed: u64,
}

/// Identifies one noise draw: the same `(seed, agent, sample)` always
/// produces the same vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseIndex {
    pub agent: AgentId,
    pub sample: u64,
}

pub fn noise_vector(sensor: &SensorModel, idx: NoiseIndex) -> Vec3 {
    if sensor.sigma == 0.0 {
        return Vec3::ZERO;
    }
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&sensor.rng_seed.to_le_bytes());
    seed[8..12].copy_from_slice(&idx.agent.to_le_bytes());
    seed[16..24].copy_from_slice(&idx.sample.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    let normal = Normal::new(0.0, sensor.sigma).expect("sigma is finite and non-negative");
    Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng))
}

pub fn measure(state: &AgentState, sensor: &SensorModel, idx: NoiseIndex) -> Vec3 {
    state.x + noise_vector(sensor, idx)
}

/// What the agent senses this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub position: Vec3,
    /// Only read with [`DerivativeSource::PlantVelocity`].
    pub velocity: Vec3,
}

/// Broadcast phases of the two ring neighbors, from the previous round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborPhases {
    pub lead: f64,
    pub lag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub target: Vec3,
    pub u: Vec3,
    pub phi_broadcast: f64,
    pub omega_zdi: f64,
    pub runtime: AgentRuntime,
}

fn control(e: Vec3, rt: &AgentRuntime, meas: &Measurement, gains: &AgentGains, dt: f64) -> Vec3 {
    match gains.derivative {
        DerivativeSource::PositionDifference => pd_accel(e, rt.e_x_prev.unwrap_or(e), dt, &gains.position),
        DerivativeSource::PlantVelocity => e * gains.position.k_x - meas.velocity * gains.position.k_v,
    }
}

/// Phase the agent broadcasts this round: the measured position pulled back
/// through the embedding at the stored phase state.
pub fn sense_phase(rt: &AgentRuntime, meas: &Measurement, cfg: &EmbeddingConfig) -> Result<f64, TickError> {
    Ok(phase_of(to_embedding(meas.position, rt.phi, cfg)?)?)
}

/// Runs the phase and position controllers for one agent. `neighbors` must
/// come from the same sensing instant as `meas`.
pub fn agent_tick(
    rt: &AgentRuntime,
    meas: Measurement,
    neighbors: NeighborPhases,
    cfg: &EmbeddingConfig,
    gains: &AgentGains,
    dt: f64,
) -> Result<TickOutput, TickError> {
    let phi_meas = sense_phase(rt, &meas, cfg)?;
    let view = PhaseView { phi_i: phi_meas, phi_k: neighbors.lead, phi_j: neighbors.lag };
    let omega_zdi = phase_rate(view, &gains.phase)?;
    let (target, phi_next) = next_target(phi_meas, omega_zdi, cfg, dt)?;
    let e = target - meas.position;
    let u = control(e, rt, &meas, gains, dt);
    Ok(TickOutput {
        target,
        u,
        phi_broadcast: phi_meas,
        omega_zdi,
        runtime: AgentRuntime { phi: phi_next, e_x_prev: Some(e), last_broadcast_phi: phi_meas, last_target: Some(target), ..rt.clone() },
    })
}

/// Fallback tick after [`agent_tick`] failed: keep steering toward the
/// previous target (or hold position if there is none) and leave the phase
/// state untouched. The commanded rate is reported as NaN.
pub fn hold_tick(rt: &AgentRuntime, meas: Measurement, gains: &AgentGains, dt: f64) -> TickOutput {
    let target = rt.last_target.unwrap_or(meas.position);
    let e = target - meas.position;
    let u = control(e, rt, &meas, gains, dt);
    TickOutput {
        target,
        u,
        phi_broadcast: rt.last_broadcast_phi,
        omega_zdi: f64::NAN,
        runtime: AgentRuntime { e_x_prev: Some(e), last_target: Some(target), ..rt.clone() },
    }
}

/// Semi-implicit Euler step of `ẋ = v, v̇ = u`.
pub fn step_plant(state: &AgentState, u: Vec3, dt: f64) -> AgentState {
    let v = state.v + u * dt;
    AgentState { x: state.x + v * dt, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::{preset, DeformationSpec};
    use crate::embedding::{circle_point, to_world};
    use std::f64::consts::TAU;

    fn cfg(deformation: DeformationSpec, r_d: f64, h: f64, omega_zd: f64) -> EmbeddingConfig {
        EmbeddingConfig { r_d, omega_zd, center: Vec3::new(0.0, 0.0, h), deformation }
    }

    fn gains(k_phi: f64, omega_zd: f64) -> AgentGains {
        AgentGains {
            position: PositionGains::default(),
            phase: PhaseGains::new(k_phi, omega_zd),
            derivative: DerivativeSource::PositionDifference,
        }
    }

    #[test]
    fn noiseless_measurement_is_exact() {
        let s = AgentState { x: Vec3::new(1.0, 2.0, 3.0), v: Vec3::ZERO };
        let sensor = SensorModel { sigma: 0.0, rng_seed: 9 };
        assert_eq!(measure(&s, &sensor, NoiseIndex { agent: 3, sample: 17 }), s.x);
    }

    #[test]
    fn noise_statistics() {
        let sensor = SensorModel { sigma: 0.03, rng_seed: 42 };
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for k in 0..n {
            let v = noise_vector(&sensor, NoiseIndex { agent: 1, sample: k }).to_array();
            for a in 0..3 {
                sum[a] += v[a];
                sq[a] += v[a] * v[a];
            }
        }
        for a in 0..3 {
            let mean = sum[a] / n as f64;
            let std = (sq[a] / n as f64 - mean * mean).sqrt();
            assert!((0.029..=0.031).contains(&std), "axis {a}: {std}");
            assert!(mean.abs() < 5e-4);
        }
    }

    #[test]
    fn noise_replays() {
        let sensor = SensorModel { sigma: 0.03, rng_seed: 7 };
        let idx = NoiseIndex { agent: 4, sample: 1234 };
        assert_eq!(noise_vector(&sensor, idx), noise_vector(&sensor, idx));
        assert_ne!(noise_vector(&sensor, idx), noise_vector(&sensor, NoiseIndex { agent: 5, sample: 1234 }));
        assert_ne!(noise_vector(&sensor, idx), noise_vector(&sensor, NoiseIndex { agent: 4, sample: 1235 }));
    }

    #[test]
    fn plant_steps() {
        let s = AgentState { x: Vec3::new(1.0, 2.0, 3.0), v: Vec3::ZERO };
        assert_eq!(step_plant(&s, Vec3::ZERO, 0.1), s);
        let s = step_plant(&AgentState::default(), Vec3::new(1.0, 0.0, 0.0), 0.1);
        assert!((s.v.x - 0.1).abs() < 1e-15 && (s.x.x - 0.01).abs() < 1e-15);
    }

    #[test]
    fn constant_acceleration_matches_closed_form() {
        // Semi-implicit Euler gives x_k = u·dt²·k(k+1)/2, i.e. ½u t² + ½u·dt·t.
        let u = Vec3::new(0.3, -1.2, 2.0);
        let dt = 0.01;
        let mut s = AgentState::default();
        for k in 1..=1000 {
            s = step_plant(&s, u, dt);
            let t = k as f64 * dt;
            let exact = u * (0.5 * t * t);
            assert!((s.x - exact).norm() <= 0.5 * u.norm() * dt * t + 1e-9);
            assert!((s.v - u * t).norm() < 1e-9);
        }
    }

    #[test]
    fn on_reference_at_uniform_spacing() {
        let c = cfg(preset("eq23").unwrap(), 10.0, 10.0, 1.5);
        let g = gains(0.02, 1.5);
        let phi = 0.8;
        let x = to_world(circle_point(phi, 10.0), phi, &c).unwrap();
        let mut rt = AgentRuntime::spawn(0, x, &c).unwrap();
        assert!((rt.phi - phi).abs() < 1e-12);
        rt.phi = phi;
        let gap = TAU / 3.0;
        let out = agent_tick(
            &rt,
            Measurement { position: x, velocity: Vec3::ZERO },
            NeighborPhases { lead: phi + gap, lag: phi - gap },
            &c,
            &g,
            0.1,
        )
        .unwrap();
        assert!((out.omega_zdi - 1.5).abs() < 1e-12);
        let phi_next = phi + 0.15;
        let expected = to_world(circle_point(phi_next, 10.0), phi_next, &c).unwrap();
        assert!((out.target - expected).norm() < 1e-9);
        assert!((out.phi_broadcast - phi).abs() < 1e-12);
        assert!((out.runtime.phi - phi_next).abs() < 1e-12);
    }

    #[test]
    fn displaced_agent_pulled_inward() {
        let c = cfg(DeformationSpec::identity(), 10.0, 10.0, 1.5);
        let g = gains(0.02, 1.5);
        let x = Vec3::new(11.0, 0.0, 10.0);
        let rt = AgentRuntime::spawn(0, x, &c).unwrap();
        assert_eq!(rt.phi, 0.0);
        let gap = TAU / 3.0;
        let out = agent_tick(&rt, Measurement { position: x, velocity: Vec3::ZERO }, NeighborPhases { lead: gap, lag: -gap }, &c, &g, 0.1)
            .unwrap();
        assert_eq!(out.omega_zdi, 1.5);
        // Target (10cos0.15, 10sin0.15, 10); e = target − x; first tick has no derivative.
        let e = Vec3::new(10.0 * 0.15f64.cos() - 11.0, 10.0 * 0.15f64.sin(), 0.0);
        assert!((out.u - e * 6.0).norm() < 1e-12);
        assert!(out.u.x < 0.0);
        assert!((out.u.norm() - 6.0 * e.norm()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_phase_is_reported() {
        let c = cfg(DeformationSpec::identity(), 10.0, 10.0, 1.5);
        let g = gains(0.02, 1.5);
        let rt = AgentRuntime::spawn(0, Vec3::new(3.0, 0.0, 10.0), &c).unwrap();
        let meas = Measurement { position: Vec3::new(0.0, 0.0, 12.0), velocity: Vec3::ZERO };
        let err = agent_tick(&rt, meas, NeighborPhases { lead: 1.0, lag: -1.0 }, &c, &g, 0.1).unwrap_err();
        assert!(matches!(err, TickError::Embedding(EmbeddingError::DegeneratePhase(..))));
        let held = hold_tick(&rt, meas, &g, 0.1);
        assert_eq!(held.target, meas.position);
        assert_eq!(held.u, Vec3::ZERO);
        assert!(held.omega_zdi.is_nan());
        assert_eq!(held.runtime.phi, rt.phi);
    }

    #[test]
    fn noise_free_fixpoint_holds() {
        // Undistorted circle, three agents at rest at uniform spacing: the
        // configuration must stay an exact 120° rotation of itself with the
        // commanded rate pinned at nominal.
        let c = cfg(DeformationSpec::identity(), 10.0, 10.0, 1.5);
        let g = gains(0.02, 1.5);
        let dt = 0.1;
        let n = 3;
        let mut rts = Vec::new();
        let mut states = Vec::new();
        for i in 0..n {
            let phi = crate::phase::wrap_to_pi(TAU * i as f64 / n as f64);
            let x = to_world(circle_point(phi, 10.0), phi, &c).unwrap();
            rts.push(AgentRuntime::spawn(i as AgentId, x, &c).unwrap());
            states.push(AgentState { x, v: Vec3::ZERO });
        }
        let rot = crate::so3::exp_so3(Vec3::new(0.0, 0.0, TAU / 3.0));
        for _ in 0..1000 {
            let meas: Vec<Measurement> = states.iter().map(|s| Measurement { position: s.x, velocity: s.v }).collect();
            let phis: Vec<f64> = (0..n).map(|i| sense_phase(&rts[i], &meas[i], &c).unwrap()).collect();
            let outs: Vec<TickOutput> = (0..n)
                .map(|i| {
                    let nb = NeighborPhases { lead: phis[(i + 1) % n], lag: phis[(i + n - 1) % n] };
                    agent_tick(&rts[i], meas[i], nb, &c, &g, dt).unwrap()
                })
                .collect();
            for (i, out) in outs.into_iter().enumerate() {
                assert!((out.omega_zdi - 1.5).abs() < 1e-9, "{} {}", out.omega_zdi - 1.5, out.phi_broadcast);
                assert!((out.target.z - 10.0).abs() < 1e-9);
                states[i] = step_plant(&states[i], out.u, dt);
                rts[i] = out.runtime;
            }
            for i in 0..n {
                let rel = states[i].x - c.center;
                let next = states[(i + 1) % n].x - c.center;
                assert!((rot.apply(rel) - next).norm() < 1e-6);
                assert!(rel.z.abs() < 1e-9);
            }
        }
    }
}
