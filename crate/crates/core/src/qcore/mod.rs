//! Exact small-register quantum state engine.
//!
//! Qubit ordering: qubit 0 is the leftmost tensor factor, so it is the most
//! significant bit of a basis index (`|q0 q1 ...>`). Every module in the crate
//! follows this convention.

pub mod channel;
pub mod gate;
pub mod linalg;
pub mod pauli;
pub mod state;

use rand::Rng;
use thiserror::Error;

pub use channel::{channel_chi, pauli_basis, Channel, ProcessMatrix};
pub use gate::{apply_all, apply_gate, ApplyGate, Gate, GateKind};
pub use pauli::{conjugate_pauli, Conjugation, PauliBits};
pub use state::{DensityMatrix, PureState, MAX_QUBITS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcoreError {
    #[error("state or operator dimension {len} is not a supported power of two")]
    BadDimension { len: usize },
    #[error("register of {requested} qubits exceeds the limit of {MAX_QUBITS}")]
    TooManyQubits { requested: usize },
    #[error("state norm {norm} differs from 1")]
    NotNormalized { norm: f64 },
    #[error("zero-norm state")]
    ZeroNorm,
    #[error("matrix is not Hermitian")]
    NotHermitian,
    #[error("trace {trace} differs from 1")]
    BadTrace { trace: f64 },
    #[error("matrix has negative eigenvalue {min_eigenvalue}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("qubit {qubit} outside a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("gate matrix with {rows} rows does not fit {targets} targets")]
    GateShape { rows: usize, targets: usize },
    #[error("gate targets must be distinct")]
    RepeatedTarget,
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("custom gates need an explicit matrix")]
    CustomNeedsMatrix,
    #[error("measurement branch qubit {qubit} = {outcome} has zero probability")]
    ZeroProbabilityBranch { qubit: usize, outcome: bool },
    #[error("gate `{0}` is neither Clifford nor T")]
    UnsupportedGate(&'static str),
    #[error("pad word has {got} entries, gate acts on {expected}")]
    WordLength { expected: usize, got: usize },
    #[error("channel has no Kraus operators")]
    EmptyChannel,
    #[error("Kraus operators sum to more than identity (max eigenvalue {max_eigenvalue})")]
    NotContractive { max_eigenvalue: f64 },
    #[error("expected a single-qubit channel, got dimension {dim}")]
    NotSingleQubit { dim: usize },
    #[error("singular linear system")]
    Singular,
}

/// Outcome of a computational-basis measurement.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub outcome: bool,
    pub collapsed: PureState,
    /// Born probability of `outcome` before the measurement.
    pub probability: f64,
}

/// Samples a computational-basis measurement of `qubit` by the Born rule.
pub fn measure_computational<R: Rng + ?Sized>(
    state: &PureState,
    qubit: usize,
    rng: &mut R,
) -> Result<Measurement, QcoreError> {
    let p1 = state.probability(qubit, true)?;
    let outcome = rng.random::<f64>() < p1;
    let (collapsed, probability) = state.project(qubit, outcome)?;
    Ok(Measurement {
        outcome,
        collapsed,
        probability,
    })
}
