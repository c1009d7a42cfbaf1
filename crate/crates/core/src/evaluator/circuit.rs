//! Circuits Bob evaluates: Clifford gates plus T, at T-depth at most one.

use serde::{Deserialize, Serialize};

use crate::qcore::{Gate, GateKind, QcoreError, MAX_QUBITS};

use super::EvalError;

/// Serializable name and targets of a gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub gate: String,
    pub targets: Vec<usize>,
}

impl GateSpec {
    pub fn to_gate(&self) -> Result<Gate, EvalError> {
        let kind = match self.gate.to_ascii_lowercase().as_str() {
            "i" => GateKind::I,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "h" => GateKind::H,
            "p" | "s" => GateKind::P,
            "pdg" | "sdg" => GateKind::Pdg,
            "t" => GateKind::T,
            "cnot" | "cx" => GateKind::Cnot,
            "cz" => GateKind::Cz,
            _ => return Err(EvalError::UnknownGate(self.gate.clone())),
        };
        Ok(Gate::new(kind, &self.targets)?)
    }

    pub fn from_gate(gate: &Gate) -> Self {
        Self {
            gate: gate.kind().name().to_ascii_lowercase(),
            targets: gate.targets().to_vec(),
        }
    }
}

/// Ordered gate list over `wires` data qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    wires: usize,
    gates: Vec<Gate>,
    t_count: usize,
    t_depth: usize,
}

/// Largest number of data wires: two ancillas must still fit in the register.
pub const MAX_WIRES: usize = MAX_QUBITS - 2;

impl Circuit {
    pub fn new(wires: usize, gates: Vec<Gate>) -> Result<Self, EvalError> {
        if wires == 0 || wires > MAX_WIRES {
            return Err(EvalError::WireCount {
                max: MAX_WIRES,
                got: wires,
            });
        }
        let mut depth = vec![0usize; wires];
        let mut t_count = 0;
        for g in &gates {
            if let Some(&q) = g.targets().iter().find(|&&q| q >= wires) {
                return Err(QcoreError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: wires,
                }
                .into());
            }
            let kind = g.kind();
            if !(kind.is_clifford() || kind == GateKind::T) {
                return Err(EvalError::UnsupportedGate(kind.name()));
            }
            let mut d = g.targets().iter().map(|&q| depth[q]).max().unwrap_or(0);
            if kind == GateKind::T {
                d += 1;
                t_count += 1;
            }
            for &q in g.targets() {
                depth[q] = d;
            }
        }
        let t_depth = depth.into_iter().max().unwrap_or(0);
        if t_depth > 1 {
            return Err(EvalError::TDepth(t_depth));
        }
        Ok(Self {
            wires,
            gates,
            t_count,
            t_depth,
        })
    }

    pub fn from_specs(wires: usize, specs: &[GateSpec]) -> Result<Self, EvalError> {
        let gates = specs.iter().map(GateSpec::to_gate).collect::<Result<_, _>>()?;
        Self::new(wires, gates)
    }

    /// One of the three single-wire circuits `T`, `TH`, `THP`.
    pub fn canonical(case: CanonicalCircuit) -> Self {
        let gates = match case {
            CanonicalCircuit::T => vec![Gate::t(0)],
            CanonicalCircuit::Th => vec![Gate::h(0), Gate::t(0)],
            CanonicalCircuit::Thp => vec![Gate::p(0), Gate::h(0), Gate::t(0)],
        };
        Self::new(1, gates).expect("canonical circuits are valid")
    }

    pub fn wires(&self) -> usize {
        self.wires
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn t_count(&self) -> usize {
        self.t_count
    }

    pub fn t_depth(&self) -> usize {
        self.t_depth
    }

    pub fn specs(&self) -> Vec<GateSpec> {
        self.gates.iter().map(GateSpec::from_gate).collect()
    }

    /// The whole circuit as one unitary on the data wires.
    pub fn unitary(&self) -> crate::qcore::linalg::CMatrix {
        self.gates
            .iter()
            .fold(crate::qcore::linalg::identity(1 << self.wires), |acc, g| {
                g.full_matrix(self.wires).expect("validated targets") * acc
            })
    }
}

/// The three demonstration circuits, named as operators (`THP` applies `P`
/// first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanonicalCircuit {
    T,
    Th,
    Thp,
}

impl CanonicalCircuit {
    pub fn all() -> [CanonicalCircuit; 3] {
        [CanonicalCircuit::T, CanonicalCircuit::Th, CanonicalCircuit::Thp]
    }

    pub fn name(self) -> &'static str {
        match self {
            CanonicalCircuit::T => "t",
            CanonicalCircuit::Th => "th",
            CanonicalCircuit::Thp => "thp",
        }
    }
}

impl std::str::FromStr for CanonicalCircuit {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(CanonicalCircuit::T),
            "th" => Ok(CanonicalCircuit::Th),
            "thp" => Ok(CanonicalCircuit::Thp),
            _ => Err(EvalError::UnknownGate(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_depth_counts_sequential_t_gates() {
        let c = Circuit::new(2, vec![Gate::t(0), Gate::t(1)]).unwrap();
        assert_eq!((c.t_count(), c.t_depth()), (2, 1));
        assert!(matches!(
            Circuit::new(1, vec![Gate::t(0), Gate::h(0), Gate::t(0)]),
            Err(EvalError::TDepth(2))
        ));
        assert!(matches!(
            Circuit::new(2, vec![Gate::t(0), Gate::cnot(0, 1), Gate::t(1)]),
            Err(EvalError::TDepth(2))
        ));
    }

    #[test]
    fn specs_round_trip() {
        let c = Circuit::canonical(CanonicalCircuit::Thp);
        let again = Circuit::from_specs(1, &c.specs()).unwrap();
        assert_eq!(again, c);
        assert!(GateSpec {
            gate: "toffoli".into(),
            targets: vec![0]
        }
        .to_gate()
        .is_err());
    }

    #[test]
    fn too_many_wires() {
        assert!(Circuit::new(3, vec![]).is_err());
    }
}
