//! Scenario orchestration: spawning, ring topology, synchronous rounds,
//! timed events and telemetry.
//!
//! Each tick is one round. All agents first sense and broadcast their phase;
//! every agent then runs its controller against that snapshot, and finally
//! all plants are stepped. A round is a pure function of the snapshot, so the
//! parallel and sequential schedules produce identical bits.

pub mod kinematic;
pub mod ring;
pub mod scenario;
pub mod telemetry;

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::agent::{
    agent_tick, hold_tick, measure, sense_phase, AgentId, AgentRuntime, AgentState, Measurement, NeighborPhases, NoiseIndex, SensorModel,
    TickError,
};
use crate::embedding::{circle_point, to_world, EmbeddingError};
use crate::phase::wrap_to_pi;
use crate::so3::Vec3;

pub use ring::Ring;
pub use scenario::{Scenario, ScenarioError, ScenarioFile};
pub use telemetry::{flags, TelemetryRecord};

use scenario::{EventKind, InsertSpawn, SpawnAnchor};

/// How many agents of radius `r_a` fit on a circle of radius `r_d`.
pub fn capacity(r_d: f64, r_a: f64) -> u64 {
    (TAU * r_d / r_a).floor() as u64
}

fn error_flag(e: &TickError) -> u8 {
    match e {
        TickError::Embedding(EmbeddingError::DegeneratePhase { .. }) => flags::DEGENERATE,
        TickError::Embedding(_) | TickError::Evaluation(_) => flags::EVALUATION,
        TickError::Phase(_) => flags::COINCIDENT,
    }
}

#[derive(Debug, Clone)]
struct Agent {
    rt: AgentRuntime,
    state: AgentState,
    pending_flags: u8,
}

/// One agent's view of a round, produced before any control runs.
#[derive(Debug, Clone, Copy)]
struct Sensed {
    meas: Measurement,
    phi: Result<f64, u8>,
}

/// Applied event, for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub tick: u64,
    pub t: f64,
    pub kind: AppliedEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AppliedEvent {
    Inserted {
        id: AgentId,
        position: Vec3,
        phi: f64,
    },
    Removed {
        id: AgentId,
    },
    /// Removal of an agent that does not exist (or would leave fewer than two).
    Ignored {
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    pub events: Vec<EventRecord>,
    pub dt: f64,
    pub ticks: u64,
}

/// A scenario being stepped.
pub struct Simulation {
    scenario: Scenario,
    sensor: SensorModel,
    /// Sorted by id.
    agents: Vec<Agent>,
    ring: Ring,
    tick: u64,
    next_event: usize,
    next_id: AgentId,
    events: Vec<EventRecord>,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Simulation, ScenarioError> {
        let positions = scenario.spawn_positions()?;
        let agents: Vec<Agent> = positions.iter().enumerate().map(|(i, &x)| new_agent(i as AgentId, x, Vec3::ZERO, &scenario)).collect();
        let ring = Ring::assign(&agents.iter().map(|a| (a.rt.id, a.rt.phi)).collect::<Vec<_>>());
        let sensor = SensorModel { sigma: scenario.sigma, rng_seed: scenario.seed };
        let mut sim =
            Simulation { next_id: agents.len() as AgentId, scenario, sensor, agents, ring, tick: 0, next_event: 0, events: Vec::new() };
        sim.relink();
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.dt
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn runtimes(&self) -> impl Iterator<Item = &AgentRuntime> {
        self.agents.iter().map(|a| &a.rt)
    }

    pub fn states(&self) -> impl Iterator<Item = (AgentId, AgentState)> + '_ {
        self.agents.iter().map(|a| (a.rt.id, a.state))
    }

    fn index(&self, id: AgentId) -> Option<usize> {
        self.agents.binary_search_by_key(&id, |a| a.rt.id).ok()
    }

    fn relink(&mut self) {
        for i in 0..self.agents.len() {
            let id = self.agents[i].rt.id;
            self.agents[i].rt.lead_id = self.ring.lead(id).unwrap_or(id);
            self.agents[i].rt.lag_id = self.ring.lag(id).unwrap_or(id);
        }
    }

    /// Tick index at which an event at time `t` first takes effect.
    fn event_tick(&self, t: f64) -> u64 {
        let k = t / self.scenario.dt;
        // Tolerate representation error, e.g. 15.0 / 0.1 = 150.00000000000003.
        (k - 1e-9 * k.abs().max(1.0)).ceil().max(0.0) as u64
    }

    fn apply_due_events(&mut self) {
        while let Some(ev) = self.scenario.events.get(self.next_event) {
            if self.event_tick(ev.t) > self.tick {
                break;
            }
            let ev = ev.clone();
            self.next_event += 1;
            let kind = match ev.kind {
                EventKind::Insert { spawn } => self.insert(&spawn),
                EventKind::Remove { id } => self.remove(id),
            };
            self.events.push(EventRecord { tick: self.tick, t: self.time(), kind });
        }
    }

    fn insert(&mut self, spawn: &InsertSpawn) -> AppliedEvent {
        let cfg = &self.scenario.embedding;
        let position = match spawn {
            InsertSpawn::Position { position } => Vec3::from_array(*position),
            InsertSpawn::Anchor { at: SpawnAnchor::LargestGap } => {
                let phi = self.largest_gap_midpoint();
                match to_world(circle_point(phi, cfg.r_d), phi, cfg) {
                    Ok(p) => p,
                    Err(e) => return AppliedEvent::Ignored { reason: e.to_string() },
                }
            }
        };
        let id = self.next_id;
        self.next_id += 1;
        let mut agent = new_agent(id, position, Vec3::ZERO, &self.scenario);
        agent.pending_flags |= flags::INSERTED;
        let phi = agent.rt.phi;
        let phases: Vec<(AgentId, f64)> = self.agents.iter().map(|a| (a.rt.id, a.rt.last_broadcast_phi)).collect();
        self.ring.insert(id, phi, |a| phases.iter().find(|p| p.0 == a).map_or(0.0, |p| p.1));
        self.agents.push(agent);
        self.relink();
        AppliedEvent::Inserted { id, position, phi }
    }

    fn remove(&mut self, id: AgentId) -> AppliedEvent {
        let Some(i) = self.index(id) else {
            return AppliedEvent::Ignored { reason: format!("no agent {id}") };
        };
        if self.agents.len() <= 2 {
            return AppliedEvent::Ignored { reason: format!("removing {id} would leave fewer than 2 agents") };
        }
        self.agents.remove(i);
        self.ring.remove(id);
        self.relink();
        AppliedEvent::Removed { id }
    }

    /// Middle of the widest gap between ring neighbors, by last broadcast phase.
    fn largest_gap_midpoint(&self) -> f64 {
        let order = self.ring.order();
        let phase = |id: AgentId| self.index(id).map_or(0.0, |i| self.agents[i].rt.last_broadcast_phi);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (r, &id) in order.iter().enumerate() {
            let from = phase(id);
            let to = phase(order[(r + 1) % order.len()]);
            let mut gap = (to - from).rem_euclid(TAU);
            if order.len() == 1 || gap == 0.0 {
                gap = TAU;
            }
            if gap > best.0 {
                best = (gap, from + gap / 2.0);
            }
        }
        wrap_to_pi(best.1)
    }

    /// Runs one round and returns its telemetry, ordered by agent id.
    pub fn step(&mut self, opts: RunOptions) -> Vec<TelemetryRecord> {
        self.apply_due_events();
        let t = self.time();
        let tick = self.tick;
        let cfg = &self.scenario.embedding;
        let gains = &self.scenario.gains;
        let dt = self.scenario.dt;
        let sensor = self.sensor;

        let sense = |a: &Agent| -> Sensed {
            let position = measure(&a.state, &sensor, NoiseIndex { agent: a.rt.id, sample: tick });
            let meas = Measurement { position, velocity: a.state.v };
            let phi = sense_phase(&a.rt, &meas, cfg).map_err(|e| error_flag(&e));
            Sensed { meas, phi }
        };
        let sensed: Vec<Sensed> =
            if opts.parallel { self.agents.par_iter().map(sense).collect() } else { self.agents.iter().map(sense).collect() };
        let broadcast: Vec<f64> = self.agents.iter().zip(&sensed).map(|(a, s)| s.phi.unwrap_or(a.rt.last_broadcast_phi)).collect();
        let phase_of = |id: AgentId| {
            let i = self.agents.binary_search_by_key(&id, |a| a.rt.id).expect("ring only holds live agents");
            broadcast[i]
        };
        let n = self.agents.len();

        let act = |(i, a): (usize, &Agent)| -> (AgentState, AgentRuntime, TelemetryRecord) {
            let s = &sensed[i];
            let mut fl = a.pending_flags;
            let neighbors = NeighborPhases { lead: phase_of(a.rt.lead_id), lag: phase_of(a.rt.lag_id) };
            let out = match s.phi {
                Ok(_) => agent_tick(&a.rt, s.meas, neighbors, cfg, gains, dt).unwrap_or_else(|e| {
                    fl |= error_flag(&e);
                    hold_tick(&a.rt, s.meas, gains, dt)
                }),
                Err(f) => {
                    fl |= f;
                    hold_tick(&a.rt, s.meas, gains, dt)
                }
            };
            if n >= 3 && wrap_to_pi(neighbors.lead - broadcast[i]) < 0.0 {
                fl |= flags::OVERTAKE;
            }
            let rec =
                TelemetryRecord { t, id: a.rt.id, x: a.state.x, x_d: out.target, phi: broadcast[i], omega_zdi: out.omega_zdi, flags: fl };
            let mut rt = out.runtime;
            rt.last_broadcast_phi = broadcast[i];
            (crate::agent::step_plant(&a.state, out.u, dt), rt, rec)
        };
        let results: Vec<_> = if opts.parallel {
            self.agents.par_iter().enumerate().map(act).collect()
        } else {
            self.agents.iter().enumerate().map(act).collect()
        };

        let mut records = Vec::with_capacity(results.len());
        for (a, (state, rt, rec)) in self.agents.iter_mut().zip(results) {
            a.state = state;
            a.rt = rt;
            a.pending_flags = 0;
            records.push(rec);
        }
        self.tick += 1;
        records
    }

    pub fn run(mut self, opts: RunOptions) -> RunOutput {
        let ticks = self.scenario.steps();
        let mut records = Vec::with_capacity(ticks as usize * self.agents.len());
        for _ in 0..ticks {
            records.extend(self.step(opts));
        }
        RunOutput { records, events: self.events, dt: self.scenario.dt, ticks }
    }
}

/// Creates an agent at rest at `x`. A spawn point whose phase cannot be read
/// starts at phase 0 and is flagged; its first ticks then hold position.
fn new_agent(id: AgentId, x: Vec3, v: Vec3, scenario: &Scenario) -> Agent {
    match AgentRuntime::spawn(id, x, &scenario.embedding) {
        Ok(rt) => Agent { rt, state: AgentState { x, v }, pending_flags: 0 },
        Err(e) => Agent {
            rt: AgentRuntime { id, lead_id: id, lag_id: id, phi: 0.0, e_x_prev: None, last_broadcast_phi: 0.0, last_target: None },
            state: AgentState { x, v },
            pending_flags: error_flag(&e),
        },
    }
}

pub fn run(scenario: Scenario, opts: RunOptions) -> Result<RunOutput, ScenarioError> {
    Ok(Simulation::new(scenario)?.run(opts))
}
