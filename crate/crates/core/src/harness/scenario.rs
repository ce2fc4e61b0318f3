//! Scenario files: JSON schema, validation and initial placement.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentGains, DerivativeSource};
use crate::deformation::{preset, DeformationError, DeformationSpec};
use crate::embedding::{circle_point, to_world, EmbeddingConfig};
use crate::phase::PhaseGains;
use crate::reference::PositionGains;
use crate::so3::Vec3;

/// Attempts per agent when rejection-sampling spawn points.
const SPAWN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("deformation: {0}")]
    Deformation(#[from] DeformationError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    pub r_d: f64,
    pub omega_zd: f64,
    pub center: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeformationSection {
    Preset {
        preset: String,
        /// Overrides the preset's distortion factor.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<f64>,
    },
    Inline {
        omega_x: String,
        omega_y: String,
        s: f64,
    },
}

impl DeformationSection {
    pub fn build(&self) -> Result<DeformationSpec, DeformationError> {
        match self {
            DeformationSection::Preset { preset: name, s } => {
                let d = preset(name)?;
                match s {
                    Some(s) => d.with_s(*s),
                    None => Ok(d),
                }
            }
            DeformationSection::Inline { omega_x, omega_y, s } => DeformationSpec::from_text(omega_x, omega_y, *s),
        }
    }
}

/// Initial placement of the starting agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpawnSpec {
    /// A uniformly random point of the reference curve plus a uniformly
    /// random offset inside a ball of radius `max_offset`.
    NearTrajectory {
        max_offset: f64,
        #[serde(default)]
        min_separation: f64,
    },
    /// Uniform in an axis-aligned box.
    Box {
        min: [f64; 3],
        max: [f64; 3],
        #[serde(default)]
        min_separation: f64,
    },
    /// On the curve at uniform spacing, each phase jittered uniformly by up
    /// to `jitter` times the nominal gap.
    OnCurve {
        #[serde(default)]
        phase_offset: f64,
        #[serde(default)]
        jitter: f64,
    },
    Explicit {
        positions: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub n: usize,
    pub spawn: SpawnSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub k_x: f64,
    pub k_v: f64,
    pub k_phi: f64,
    #[serde(default = "default_eps_clamp")]
    pub eps_clamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_cap: Option<f64>,
    #[serde(default)]
    pub derivative: DerivativeSource,
}

fn default_eps_clamp() -> f64 {
    crate::phase::DEFAULT_EPS_CLAMP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
}

/// Where an inserted agent appears.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InsertSpawn {
    Position { position: [f64; 3] },
    Anchor { at: SpawnAnchor },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnAnchor {
    /// On the curve at the middle of the widest phase gap at event time.
    LargestGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Insert { spawn: InsertSpawn },
    Remove { id: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Optional overrides for the convergence criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold_s: Option<f64>,
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub embedding: EmbeddingSection,
    pub deformation: DeformationSection,
    pub agents: AgentsSection,
    pub gains: GainsSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub sim: SimSection,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
    #[serde(default)]
    pub metrics: MetricsSection,
}

/// Validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub embedding: EmbeddingConfig,
    pub n_agents: usize,
    pub gains: AgentGains,
    pub sigma: f64,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub spawn: SpawnSpec,
    /// Sorted by time; ties keep file order.
    pub events: Vec<TimedEvent>,
    pub metrics: MetricsSection,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<ScenarioFile, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let e = &self.embedding;
        let embedding = EmbeddingConfig {
            r_d: e.r_d,
            omega_zd: e.omega_zd,
            center: Vec3::from_array(e.center),
            deformation: self.deformation.build()?,
        };
        embedding.validate().map_err(|err| ScenarioError::Invalid(err.to_string()))?;

        let g = &self.gains;
        if !(g.k_x > 0.0 && g.k_v > 0.0 && g.k_phi > 0.0) {
            return invalid("gains k_x, k_v, k_phi must be > 0");
        }
        if !(g.eps_clamp > 0.0) {
            return invalid("eps_clamp must be > 0");
        }
        if let Some(cap) = g.omega_cap {
            if !(cap >= 0.0) {
                return invalid("omega_cap must be >= 0");
            }
        }
        let gains = AgentGains {
            position: PositionGains { k_x: g.k_x, k_v: g.k_v },
            phase: PhaseGains { k_phi: g.k_phi, omega_zd: e.omega_zd, eps_clamp: g.eps_clamp, omega_cap: g.omega_cap },
            derivative: g.derivative,
        };

        if self.agents.n < 2 {
            return invalid(format!("need at least 2 agents, got {}", self.agents.n));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return invalid("noise sigma must be >= 0");
        }
        let s = &self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return invalid("sim.dt must be > 0");
        }
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return invalid("sim.duration must be > 0");
        }
        match &self.agents.spawn {
            SpawnSpec::Explicit { positions } if positions.len() != self.agents.n => {
                return invalid(format!("{} explicit positions for {} agents", positions.len(), self.agents.n));
            }
            SpawnSpec::NearTrajectory { max_offset, .. } if !(*max_offset >= 0.0) => {
                return invalid("max_offset must be >= 0");
            }
            SpawnSpec::Box { min, max, .. } if (0..3).any(|a| !(min[a] <= max[a])) => {
                return invalid("spawn box min must be <= max");
            }
            SpawnSpec::OnCurve { jitter, .. } if !(0.0..0.5).contains(jitter) => {
                return invalid("on_curve jitter must be in [0, 0.5)");
            }
            _ => {}
        }
        for ev in &self.events {
            if !(ev.t >= 0.0 && ev.t <= s.duration) {
                return invalid(format!("event at t={} outside [0, {}]", ev.t, s.duration));
            }
        }
        if let Some(b) = self.metrics.band_deg {
            if !(b > 0.0) {
                return invalid("metrics.band_deg must be > 0");
            }
        }
        let mut events = self.events.clone();
        events.sort_by(|a, b| a.t.total_cmp(&b.t));

        Ok(Scenario {
            name: self.name.clone(),
            embedding,
            n_agents: self.agents.n,
            gains,
            sigma: self.noise.sigma,
            dt: s.dt,
            duration: s.duration,
            seed: s.seed,
            spawn: self.agents.spawn.clone(),
            events,
            metrics: self.metrics.clone(),
        })
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        ScenarioFile::from_json(text)?.build()
    }

    /// Number of ticks simulated.
    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    /// Initial positions for agents `0..n`, drawn from a stream separate from
    /// the sensor noise.
    pub fn spawn_positions(&self) -> Result<Vec<Vec3>, ScenarioError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5EED_5BA5_u64);
        let cfg = &self.embedding;
        let n = self.n_agents;
        let curve_point = |phi: f64| -> Result<Vec3, ScenarioError> {
            to_world(circle_point(phi, cfg.r_d), phi, cfg).map_err(|e| ScenarioError::Invalid(e.to_string()))
        };
        let sample_separated = |rng: &mut ChaCha8Rng,
                                min_sep: f64,
                                draw: &dyn Fn(&mut ChaCha8Rng) -> Result<Vec3, ScenarioError>|
         -> Result<Vec<Vec3>, ScenarioError> {
            let mut out: Vec<Vec3> = Vec::with_capacity(n);
            while out.len() < n {
                let mut placed = false;
                for _ in 0..SPAWN_ATTEMPTS {
                    let p = draw(rng)?;
                    if out.iter().all(|q| q.distance(p) >= min_sep) {
                        out.push(p);
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return invalid(format!("could not place {n} agents with min_separation {min_sep}"));
                }
            }
            Ok(out)
        };
        match &self.spawn {
            SpawnSpec::NearTrajectory { max_offset, min_separation } => {
                let r = *max_offset;
                sample_separated(&mut rng, *min_separation, &|rng| {
                    let phi = rng.random_range(-PI..PI);
                    Ok(curve_point(phi)? + random_in_ball(rng, r))
                })
            }
            SpawnSpec::Box { min, max, min_separation } => {
                let (lo, hi) = (*min, *max);
                sample_separated(&mut rng, *min_separation, &|rng| {
                    let mut p = [0.0; 3];
                    for a in 0..3 {
                        p[a] = if lo[a] < hi[a] { rng.random_range(lo[a]..hi[a]) } else { lo[a] };
                    }
                    Ok(Vec3::from_array(p))
                })
            }
            SpawnSpec::OnCurve { phase_offset, jitter } => (0..n)
                .map(|i| {
                    let gap = TAU / n as f64;
                    let j = if *jitter > 0.0 { rng.random_range(-*jitter..*jitter) } else { 0.0 };
                    let phi = crate::phase::wrap_to_pi(phase_offset + gap * (i as f64 + j));
                    curve_point(phi)
                })
                .collect(),
            SpawnSpec::Explicit { positions } => Ok(positions.iter().map(|p| Vec3::from_array(*p)).collect()),
        }
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    if radius == 0.0 {
        return Vec3::ZERO;
    }
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}
