//! The evaluating party. Nothing here can reach a plaintext key bit: the
//! only inputs are the ciphertext, an [`EvaluationResources`] view and the
//! circuit.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fhe::{self, CipherBit};
use crate::optics::{self, NoiseParams, PostSelectedMap};
use crate::qcore::{self, ApplyGate, Gate, GateKind, PureState};
use crate::qotp::{key_update, KeyExpr, Symbol, WireKey};

use super::{
    AncillaKind, Circuit, EncryptedPad, EvalError, EvalTranscript, EvaluationResources, MeasurementRecord,
    TRANSCRIPT_VERSION,
};

/// Which hidden combination the x-key of a T wire reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetCase {
    /// `b' = a`
    A,
    /// `b' = b`
    B,
    /// `b' = a + b`
    AB,
}

impl GadgetCase {
    /// Classifies the symbolic part of an x-key. Returns the owning wire.
    pub fn classify(x: &KeyExpr) -> Option<(GadgetCase, usize)> {
        let syms: Vec<Symbol> = x.symbols.iter().copied().collect();
        match syms.as_slice() {
            [Symbol::A(v)] => Some((GadgetCase::A, *v)),
            [Symbol::B(v)] => Some((GadgetCase::B, *v)),
            [Symbol::A(v), Symbol::B(w)] if v == w => Some((GadgetCase::AB, *v)),
            _ => None,
        }
    }

    /// The symbolic phase bit `e` of the ancilla used.
    fn phase_expr(self, owner: usize) -> KeyExpr {
        match self {
            GadgetCase::A => KeyExpr::symbol(Symbol::A(owner)),
            GadgetCase::B => KeyExpr::symbol(Symbol::B(owner)),
            GadgetCase::AB => KeyExpr::symbol(Symbol::A(owner)) ^ KeyExpr::symbol(Symbol::B(owner)),
        }
    }
}

/// Post-selected photonic gates at the configured visibilities.
#[derive(Debug, Clone)]
pub struct OpticalGates {
    pub noise: NoiseParams,
    /// CNOT between photons of one pair.
    pub cnot_intra: PostSelectedMap,
    /// CNOT between photons of different pairs.
    pub cnot_inter: PostSelectedMap,
    pub phase_add: PostSelectedMap,
}

impl OpticalGates {
    pub fn new(noise: NoiseParams) -> Result<Self, EvalError> {
        noise.validate()?;
        Ok(Self {
            noise,
            cnot_intra: optics::ppbs_cnot(noise.visibility_intra)?,
            cnot_inter: optics::ppbs_cnot(noise.visibility_inter)?,
            phase_add: optics::phase_add_map(noise.visibility_intra)?,
        })
    }
}

/// How two-qubit gates are physically realized.
#[derive(Debug, Clone)]
pub enum Backend {
    Qubit,
    Optics(Box<OpticalGates>),
}

impl Backend {
    pub fn optics(noise: NoiseParams) -> Result<Self, EvalError> {
        Ok(Backend::Optics(Box::new(OpticalGates::new(noise)?)))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Backend::Qubit => "qubit",
            Backend::Optics(_) => "optics",
        }
    }

    /// Two-qubit Clifford between data wires. On the optics backend the
    /// photons come from different pairs.
    fn two_qubit<R: Rng + ?Sized>(&self, state: &PureState, gate: &Gate, rng: &mut R) -> Result<PureState, EvalError> {
        match self {
            Backend::Qubit => Ok(state.apply_gate(gate)?),
            Backend::Optics(g) => {
                let t = [gate.targets()[0], gate.targets()[1]];
                let (state, pre_post) = match gate.kind() {
                    GateKind::Cnot => (state.clone(), None),
                    // CZ = (I x H) CNOT (I x H)
                    _ => (state.apply_gate(&Gate::h(t[1]))?, Some(Gate::h(t[1]))),
                };
                let (out, _) = g
                    .cnot_inter
                    .sample(&state, t, rng)?
                    .ok_or(EvalError::PostSelectionFailed("two-qubit gate"))?;
                Ok(match pre_post {
                    Some(h) => out.apply_gate(&h)?,
                    None => out,
                })
            }
        }
    }
}

/// Result of one T-gadget.
#[derive(Debug, Clone)]
pub struct GadgetOutput {
    /// Register with the ancillas removed.
    pub state: PureState,
    pub measurements: Vec<MeasurementRecord>,
    /// Symbolic change to the wire's z-key contributed by the ancillas:
    /// `mu + m e`.
    pub z_delta: KeyExpr,
}

fn measure_and_drop<R: Rng + ?Sized>(
    state: &PureState,
    qubit: usize,
    rng: &mut R,
) -> Result<(bool, PureState), EvalError> {
    let m = qcore::measure_computational(state, qubit, rng)?;
    let reduced = m.collapsed.discard_qubit(qubit, m.outcome)?;
    Ok((m.outcome, reduced))
}

/// Consumes the ancilla(s) of `owner` to apply `Z^{mu + m e} P^e` to `wire`.
/// `outcome_base` numbers the new measurement symbols.
#[allow(clippy::too_many_arguments)]
pub fn t_gadget<E: EvaluationResources, R: Rng + ?Sized>(
    state: &PureState,
    wire: usize,
    case: GadgetCase,
    owner: usize,
    resources: &E,
    backend: &Backend,
    outcome_base: usize,
    rng: &mut R,
) -> Result<GadgetOutput, EvalError> {
    let fetch = |kind| {
        resources
            .ancilla(owner, kind)
            .ok_or_else(|| EvalError::MissingResource(format!("{kind:?} ancilla of wire {owner}")))
    };
    let n = state.num_qubits();
    let mut measurements = Vec::new();
    let outcome = |label: String, bit: bool, measurements: &mut Vec<MeasurementRecord>| {
        measurements.push(MeasurementRecord { label, bit });
        KeyExpr::symbol(Symbol::Outcome(outcome_base + measurements.len() - 1))
    };
    let e = case.phase_expr(owner);

    let (register, mu, gadget_cnot) = match case {
        GadgetCase::A | GadgetCase::B => {
            let (kind, mask) = if case == GadgetCase::A {
                (AncillaKind::XiA, Symbol::Q(owner))
            } else {
                (AncillaKind::XiB, Symbol::R(owner))
            };
            let reg = state.tensor(fetch(kind)?)?;
            let cnot = match backend {
                Backend::Qubit => None,
                Backend::Optics(g) => Some(&g.cnot_intra),
            };
            (reg, KeyExpr::symbol(mask), cnot)
        }
        GadgetCase::AB => {
            let reg = state
                .tensor(fetch(AncillaKind::XiA)?)?
                .tensor(fetch(AncillaKind::XiB)?)?;
            let base = KeyExpr::symbol(Symbol::Q(owner))
                ^ KeyExpr::symbol(Symbol::R(owner))
                ^ KeyExpr::symbol(Symbol::Ab(owner));
            match backend {
                Backend::Qubit => {
                    let reg = reg.apply_gate(&Gate::cnot(n, n + 1))?;
                    let (m, reg) = measure_and_drop(&reg, n + 1, rng)?;
                    outcome(format!("phase_add[{owner}]"), m, &mut measurements);
                    // Outcome m' multiplies the b-key: mu = q + r + ab + m' b.
                    let mu = base ^ KeyExpr::symbol(Symbol::B(owner)).times(m);
                    (reg, mu, None)
                }
                Backend::Optics(g) => {
                    let (reg, branch) = g
                        .phase_add
                        .sample(&reg, [n, n + 1], rng)?
                        .ok_or(EvalError::PostSelectionFailed("phase-add"))?;
                    let k1 = optics::gates::herald_bit(branch.herald.expect("phase-add has a herald"));
                    let reg = reg.discard_qubit(n + 1, false)?;
                    let sym = outcome(format!("phase_add[{owner}]"), k1, &mut measurements);
                    (reg, base ^ sym, Some(&g.cnot_inter))
                }
            }
        }
    };

    let register = match gadget_cnot {
        None => register.apply_gate(&Gate::cnot(wire, n))?,
        Some(map) => {
            map.sample(&register, [wire, n], rng)?
                .ok_or(EvalError::PostSelectionFailed("gadget CNOT"))?
                .0
        }
    };
    let (m, register) = measure_and_drop(&register, n, rng)?;
    outcome(format!("gadget[{wire}]"), m, &mut measurements);
    Ok(GadgetOutput {
        state: register,
        measurements,
        z_delta: mu ^ e.times(m),
    })
}

/// Gadget case and owning wire of every T gate, from symbolic keys alone.
pub fn plan_gadgets(circuit: &Circuit) -> Result<Vec<(GadgetCase, usize)>, EvalError> {
    let mut keys: Vec<WireKey> = (0..circuit.wires()).map(WireKey::fresh).collect();
    let mut used = BTreeSet::new();
    let mut plan = Vec::new();
    for g in circuit.gates() {
        if g.kind() == GateKind::T {
            let w = g.targets()[0];
            let x = keys[w].x.clone();
            let (case, owner) = GadgetCase::classify(&x).ok_or_else(|| EvalError::NonCanonicalKey {
                wire: w,
                key: x.to_string(),
            })?;
            if !used.insert(owner) {
                return Err(EvalError::AncillasExhausted(owner));
            }
            plan.push((case, owner));
            // The gadget only adds to z; the x-key is unchanged.
            keys[w].z ^= &x;
        } else {
            key_update(g, &mut keys)?;
        }
    }
    Ok(plan)
}

/// Homomorphically encrypts a key expression from the encrypted hidden bits
/// and Bob's own measurement outcomes.
fn encrypt_expr<E: EvaluationResources, R: Rng + ?Sized>(
    expr: &KeyExpr,
    outcomes: &[MeasurementRecord],
    resources: &E,
    rng: &mut R,
) -> Result<CipherBit, EvalError> {
    let mut constant = expr.constant;
    let mut acc: Option<CipherBit> = None;
    for &s in &expr.symbols {
        if let Symbol::Outcome(i) = s {
            constant ^= outcomes
                .get(i)
                .ok_or_else(|| EvalError::MissingResource(format!("measurement k{i}")))?
                .bit;
            continue;
        }
        let c = resources
            .encrypted_bit(s)
            .ok_or_else(|| EvalError::MissingResource(format!("encrypted {s}")))?;
        acc = Some(match acc {
            None => c.clone(),
            Some(a) => fhe::hxor(&a, c)?,
        });
    }
    let acc = match acc {
        Some(a) => a,
        None => fhe::enc(false, resources.public_key(), rng),
    };
    Ok(fhe::hxor_const(&acc, constant))
}

/// Runs `circuit` on `ciphertext`. Clifford gates act directly and update the
/// symbolic keys; each T gate is followed by a gadget.
pub fn evaluate<E: EvaluationResources, R: Rng + ?Sized>(
    ciphertext: &PureState,
    resources: &E,
    circuit: &Circuit,
    backend: &Backend,
    rng: &mut R,
) -> Result<EvalTranscript, EvalError> {
    let wires = circuit.wires();
    if ciphertext.num_qubits() != wires || resources.wires() < wires {
        return Err(EvalError::WireCount {
            max: resources.wires().min(ciphertext.num_qubits()),
            got: wires,
        });
    }
    let plan = plan_gadgets(circuit)?;
    let mut plan = plan.into_iter();
    let mut state = ciphertext.clone();
    let mut keys: Vec<WireKey> = (0..wires).map(WireKey::fresh).collect();
    let mut measurements: Vec<MeasurementRecord> = Vec::new();

    for g in circuit.gates() {
        match g.kind() {
            GateKind::T => {
                let w = g.targets()[0];
                let (case, owner) = plan.next().expect("one plan entry per T");
                let constant = keys[w].x.constant;
                state = state.apply_gate(g)?;
                let x = keys[w].x.clone();
                keys[w].z ^= &x;
                let out = t_gadget(&state, w, case, owner, resources, backend, measurements.len(), rng)?;
                state = out.state;
                measurements.extend(out.measurements);
                keys[w].z ^= &out.z_delta;
                if constant {
                    let pdg = Gate::pdg(w);
                    state = state.apply_gate(&pdg)?;
                    key_update(&pdg, &mut keys)?;
                }
            }
            _ if g.targets().len() == 2 => {
                state = backend.two_qubit(&state, g, rng)?;
                key_update(g, &mut keys)?;
            }
            _ => {
                state = state.apply_gate(g)?;
                key_update(g, &mut keys)?;
            }
        }
    }

    let final_encrypted_keys = keys
        .iter()
        .map(|k| {
            Ok(EncryptedPad {
                z: encrypt_expr(&k.z, &measurements, resources, rng)?,
                x: encrypt_expr(&k.x, &measurements, resources, rng)?,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(EvalTranscript {
        version: TRANSCRIPT_VERSION,
        backend: backend.tag().to_string(),
        seed: None,
        gates: circuit.specs(),
        measurement_bits: measurements,
        final_keys: keys,
        final_encrypted_keys,
        output_state: state,
    })
}
