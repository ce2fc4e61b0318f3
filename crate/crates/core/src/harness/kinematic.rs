//! Phase-only ring: virtual agents that sit exactly on the embedding circle
//! and move at their commanded rate. Used to study the phase law without
//! plant dynamics.

use crate::phase::{lyapunov_value, phase_rate, ring_errors, PhaseError, PhaseGains, PhaseView};
use crate::reference::advance_phase;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRing {
    /// Element `r+1` leads element `r`.
    pub phases: Vec<f64>,
    pub gains: PhaseGains,
    pub r_d: f64,
}

impl PhaseRing {
    pub fn rates(&self) -> Result<Vec<f64>, PhaseError> {
        let n = self.phases.len();
        (0..n)
            .map(|r| {
                let view = PhaseView { phi_i: self.phases[r], phi_k: self.phases[(r + 1) % n], phi_j: self.phases[(r + n - 1) % n] };
                phase_rate(view, &self.gains)
            })
            .collect()
    }

    /// One synchronous round; returns the rates that were applied.
    pub fn step(&mut self, dt: f64) -> Result<Vec<f64>, PhaseError> {
        let rates = self.rates()?;
        for (phi, w) in self.phases.iter_mut().zip(&rates) {
            *phi = advance_phase(*phi, *w, dt, self.r_d);
        }
        Ok(rates)
    }

    pub fn lyapunov(&self) -> Result<f64, PhaseError> {
        lyapunov_value(&ring_errors(&self.phases))
    }
}
