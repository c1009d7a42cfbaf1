//! Linear-optical backend: photons in polarization and path modes, passive
//! elements, coincidence post-selection, and apparatus noise.

pub mod element;
pub mod fock;
pub mod gates;
pub mod noise;

use thiserror::Error;

use crate::qcore::QcoreError;

pub use element::{OpticalCircuit, OpticalElement};
pub use fock::{mode_index, FockState, Polarization};
pub use gates::{
    distinguishability_mix, equatorial_phase, hom_coincidence, pbs_phase_add, phase_add_map, phase_add_target,
    ppbs_cnot, ppbs_cz, PhaseAddOutcome, PostSelectedMap,
};
pub use noise::{background_model, background_subtract, Exposure, NoiseParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("mode {mode} outside a space of {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("more than {} photons", fock::MAX_PHOTONS)]
    PhotonOverflow,
    #[error("parameter {name} = {value} out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("invalid optical circuit: {0}")]
    BadCircuit(String),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}
