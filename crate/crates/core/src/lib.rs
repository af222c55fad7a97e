//! Simulation of a hybrid trapped-ion / Rydberg-atom two-qubit CNOT gate
//! driven by phonon blockade.
//!
//! The pipeline: build the truncated atom ⊗ ion ⊗ phonon Hilbert space
//! ([`hilbert`]), encode the interaction potential and every Hamiltonian
//! ([`physics`]), time-evolve states with unitarity monitoring and analytic
//! cross-checks ([`propagate`]), run the three-pulse gate protocol and score
//! it ([`protocol`]), scan parameters ([`sweep`]), and drive it all from a
//! flat-file configuration ([`cli`]).

pub mod cli;
pub mod hilbert;
pub mod physics;
pub mod propagate;
pub mod protocol;
pub mod sweep;

/// A value bundled with non-fatal validity warnings.
#[derive(Debug, Clone)]
pub struct Warned<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Warned<T> {
    pub fn clean(value: T) -> Self {
        Self { value, warnings: Vec::new() }
    }
}
