//! Ring neighbor topology.
//!
//! The ring is an ordering of agent ids by ascending phase; the agent at
//! rank `r+1` (mod n) leads the one at rank `r`. It is computed once and
//! then only edited locally on insertion or removal.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use crate::agent::AgentId;
use crate::phase::wrap_to_pi;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ring {
    order: Vec<AgentId>,
}

fn forward(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(TAU)
}

impl Ring {
    /// Sorts by wrapped phase, ties broken by ascending id.
    pub fn assign(phases: &[(AgentId, f64)]) -> Ring {
        let mut v: Vec<(AgentId, f64)> = phases.iter().map(|&(id, p)| (id, wrap_to_pi(p))).collect();
        v.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        Ring { order: v.into_iter().map(|(id, _)| id).collect() }
    }

    pub fn order(&self) -> &[AgentId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.order.contains(&id)
    }

    fn rank(&self, id: AgentId) -> Option<usize> {
        self.order.iter().position(|&a| a == id)
    }

    pub fn lead(&self, id: AgentId) -> Option<AgentId> {
        let r = self.rank(id)?;
        Some(self.order[(r + 1) % self.order.len()])
    }

    pub fn lag(&self, id: AgentId) -> Option<AgentId> {
        let r = self.rank(id)?;
        let n = self.order.len();
        Some(self.order[(r + n - 1) % n])
    }

    /// Splices `id` in directly ahead of the agent closest behind `phi`.
    /// `phase_of` gives the current phase of every agent already in the
    /// ring. Only the new agent's two neighbors change links.
    pub fn insert(&mut self, id: AgentId, phi: f64, phase_of: impl Fn(AgentId) -> f64) {
        if self.order.is_empty() {
            self.order.push(id);
            return;
        }
        let behind = self
            .order
            .iter()
            .enumerate()
            .map(|(r, &a)| {
                let d = forward(phase_of(a), phi);
                // Equal phase: the lower id goes first.
                let d = if d == 0.0 && a > id { TAU } else { d };
                (r, d)
            })
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal))
            .map(|(r, _)| r)
            .unwrap_or(0);
        self.order.insert(behind + 1, id);
    }

    /// Removes `id`; its lag and lead become each other's neighbors.
    pub fn remove(&mut self, id: AgentId) -> bool {
        match self.rank(id) {
            Some(r) => {
                self.order.remove(r);
                true
            }
            None => false,
        }
    }

    /// Checks that `links` (id, lead, lag) describe one directed cycle
    /// covering exactly the ring's agents.
    pub fn is_consistent(&self, links: &[(AgentId, AgentId, AgentId)]) -> bool {
        if links.len() != self.order.len() {
            return false;
        }
        let n = self.order.len();
        if n == 0 {
            return true;
        }
        let find = |id: AgentId| links.iter().find(|l| l.0 == id);
        let start = self.order[0];
        let mut cur = start;
        for step in 0..n {
            let Some(&(_, lead, _)) = find(cur) else { return false };
            let Some(&(_, _, lead_lag)) = find(lead) else { return false };
            if lead_lag != cur {
                return false;
            }
            cur = lead;
            if cur == start && step + 1 != n {
                return false;
            }
        }
        cur == start
    }
}
