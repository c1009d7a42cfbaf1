//! Two-party estimation of the overlap between Alice's and Bob's qubits.
//!
//! Alice pads `n` copies of her state and sends them with the encrypted pad
//! bits. Bob runs the comparator (CNOT from Alice's qubit onto his, then H on
//! Alice's, then measures both) against fresh copies of his state, folds his
//! outcomes into the encrypted pads, shuffles the pairs and returns them. The
//! comparator's Clifford key update leaves the pad's z bit on the first
//! outcome and its x bit on the second, so Alice decrypts
//! `(a ^ k1, b ^ k2)`, whose product is the plaintext `(1,1)` indicator.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{Backend, EvalError};
use crate::experiment::BackendKind;
use crate::fhe::{self, CipherBit, FheError, FheKeyPair, FheParams};
use crate::optics::NoiseParams;
use crate::qcore::{linalg, measure_computational, ApplyGate, DensityMatrix, Gate, PureState, QcoreError};
use crate::qotp::{self, PadKey, QotpError};
use crate::rng::{stream, RandomStream};
use crate::stats;

#[derive(Debug, Error)]
pub enum TpscError {
    #[error("protocol needs at least one copy")]
    NoCopies,
    #[error("{0} qubits given where a single qubit is required")]
    NotSingleQubit(usize),
    #[error("copy {copy} failed post-selection {attempts} times")]
    RetriesExhausted { copy: usize, attempts: u64 },
    #[error("Bob returned {got} results for {expected} copies")]
    ResultCount { expected: usize, got: usize },
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error(transparent)]
    Qotp(#[from] QotpError),
    #[error(transparent)]
    Fhe(#[from] FheError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Attempts per copy before the run is abandoned.
pub const MAX_ATTEMPTS: u64 = 10_000;

/// Comparator on `alpha (x) beta`. Returns `(k1, k2)`; `(true, true)` occurs
/// with probability `(1 - |<alpha|beta>|^2)/2`.
pub fn comparator<R: Rng + ?Sized>(
    alpha: &PureState,
    beta: &PureState,
    rng: &mut R,
) -> Result<(bool, bool), TpscError> {
    let state = comparator_state(&alpha.tensor(beta)?, &Backend::Qubit, rng)?.expect("qubit backend never fails");
    measure_pair(&state, rng)
}

/// Joint outcome probabilities `[P00, P01, P10, P11]` of the comparator on a
/// two-qubit state.
pub fn comparator_distribution(state: &PureState) -> Result<[f64; 4], TpscError> {
    let s = state.apply_gate(&Gate::cnot(0, 1))?.apply_gate(&Gate::h(0))?;
    Ok(std::array::from_fn(|i| s.amplitude(i).norm_sqr()))
}

/// The comparator's gates on a two-qubit register. On the optics backend the
/// CNOT is post-selected and `None` signals a failure.
fn comparator_state<R: Rng + ?Sized>(
    state: &PureState,
    backend: &Backend,
    rng: &mut R,
) -> Result<Option<PureState>, TpscError> {
    let after = match backend {
        Backend::Qubit => state.apply_gate(&Gate::cnot(0, 1))?,
        Backend::Optics(g) => match g.cnot_inter.sample(state, [0, 1], rng)? {
            Some((s, _)) => s,
            None => return Ok(None),
        },
    };
    Ok(Some(after.apply_gate(&Gate::h(0))?))
}

fn measure_pair<R: Rng + ?Sized>(state: &PureState, rng: &mut R) -> Result<(bool, bool), TpscError> {
    let m1 = measure_computational(state, 0, rng)?;
    let m2 = measure_computational(&m1.collapsed, 1, rng)?;
    Ok((m1.outcome, m2.outcome))
}

/// `D^(2) = Tr(rho_b^{1/2} rho_a rho_b^{1/2})`; `|<a|b>|^2` for pure states.
pub fn true_overlap(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64, TpscError> {
    for r in [rho_a, rho_b] {
        DensityMatrix::new(r.matrix().clone())?;
        if r.num_qubits() != 1 {
            return Err(TpscError::NotSingleQubit(r.num_qubits()));
        }
    }
    let s = linalg::psd_sqrt(rho_b.matrix());
    Ok(linalg::trace(&(&s * rho_a.matrix() * &s)).re)
}

/// Draws a pure state from the spectral ensemble of `rho`.
fn sample_pure<R: Rng + ?Sized>(ensemble: &[(f64, PureState)], rng: &mut R) -> PureState {
    let mut u: f64 = rng.random();
    for (p, s) in ensemble {
        if u < *p {
            return s.clone();
        }
        u -= p;
    }
    ensemble.last().expect("non-empty ensemble").1.clone()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub shuffle: bool,
    pub backend: BackendKind,
    pub noise: NoiseParams,
    pub fhe: FheParams,
    pub alice_seed: u64,
    pub bob_seed: u64,
    /// Alice decrypts Bob's reply with an unrelated secret key.
    pub wrong_key: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n: 960,
            shuffle: true,
            backend: BackendKind::Qubit,
            noise: NoiseParams::ideal(),
            fhe: FheParams::mock(),
            alice_seed: 1,
            bob_seed: 2,
            wrong_key: false,
        }
    }
}

/// Classical part of one encrypted copy: `Enc(a)`, `Enc(b)` of the pad
/// `Z^a X^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncryptedPadBits {
    pub a: CipherBit,
    pub b: CipherBit,
}

/// Messages in the order they cross the party boundary. Qubits travel
/// alongside `Copies` and are not serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    /// Alice to Bob: padded copies `index..` with their encrypted pads.
    Copies {
        first_index: usize,
        keys: Vec<EncryptedPadBits>,
    },
    /// Bob to Alice: these copies failed post-selection; send fresh ones.
    Retry { indices: Vec<usize> },
    /// Bob to Alice: updated encrypted pads, in shuffled order.
    Results { pairs: Vec<EncryptedPadBits> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: ProtocolConfig,
    pub messages: Vec<Message>,
}

/// What Alice knows after the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliceView {
    /// Decrypted `(a ^ k1) & (b ^ k2)` in the order Bob returned them.
    pub products: Vec<bool>,
    /// Estimate of `<Pi_11>`.
    pub pi11: f64,
    /// Copies re-sent after failed post-selection.
    pub resent: u64,
}

impl AliceView {
    /// `2 <Pi_11>`, which estimates `1 - D^(2)`.
    pub fn estimate(&self) -> f64 {
        2.0 * self.pi11
    }
}

/// What Bob knows after the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BobView {
    /// Measured `(k1, k2)` per copy index.
    pub outcomes: Vec<(bool, bool)>,
    /// Result slot `j` carries copy `permutation[j]`.
    pub permutation: Vec<usize>,
    pub failed_attempts: u64,
}

/// Alice's side: her state, pads and keys.
pub struct Alice {
    ensemble: Vec<(f64, PureState)>,
    probes: Option<Vec<PureState>>,
    keys: FheKeyPair,
    decrypt_keys: FheKeyPair,
    pads: Vec<PadKey>,
    rng: RandomStream,
    resent: u64,
}

/// A padded copy in flight.
pub struct QuantumCopy {
    pub index: usize,
    pub qubit: PureState,
}

impl Alice {
    pub fn new(state: &DensityMatrix, config: &ProtocolConfig) -> Result<Self, TpscError> {
        if state.num_qubits() != 1 {
            return Err(TpscError::NotSingleQubit(state.num_qubits()));
        }
        let mut rng = stream(config.alice_seed);
        let keys = fhe::keygen(&config.fhe, &mut rng)?;
        let decrypt_keys = if config.wrong_key {
            fhe::keygen(&config.fhe, &mut rng)?
        } else {
            keys.clone()
        };
        Ok(Self {
            ensemble: state.ensemble(),
            probes: None,
            keys,
            decrypt_keys,
            pads: Vec::new(),
            rng,
            resent: 0,
        })
    }

    /// Copy `i` carries `probes[i % probes.len()]` instead of Alice's state.
    pub fn with_probes(mut self, probes: Vec<PureState>) -> Self {
        self.probes = Some(probes);
        self
    }

    fn plaintext(&mut self, index: usize) -> PureState {
        match &self.probes {
            Some(p) => p[index % p.len()].clone(),
            None => sample_pure(&self.ensemble, &mut self.rng),
        }
    }

    fn encrypt_copy(&mut self, index: usize) -> Result<(QuantumCopy, EncryptedPadBits), TpscError> {
        let plain = self.plaintext(index);
        let pad = PadKey::random(&mut self.rng);
        if index < self.pads.len() {
            self.pads[index] = pad;
        } else {
            self.pads.push(pad);
        }
        let qubit = qotp::encrypt(&plain, pad)?;
        let keys = EncryptedPadBits {
            a: fhe::enc(pad.a, &self.keys.public, &mut self.rng),
            b: fhe::enc(pad.b, &self.keys.public, &mut self.rng),
        };
        Ok((QuantumCopy { index, qubit }, keys))
    }

    pub fn send_copies(&mut self, n: usize) -> Result<(Vec<QuantumCopy>, Message), TpscError> {
        if n == 0 {
            return Err(TpscError::NoCopies);
        }
        let (copies, keys) = (0..n)
            .map(|i| self.encrypt_copy(i))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .unzip();
        Ok((copies, Message::Copies { first_index: 0, keys }))
    }

    /// Fresh pads for copies that failed; the replies are sent one message
    /// per copy.
    pub fn resend(&mut self, indices: &[usize]) -> Result<Vec<(QuantumCopy, Message)>, TpscError> {
        self.resent += indices.len() as u64;
        indices
            .iter()
            .map(|&i| {
                let (copy, keys) = self.encrypt_copy(i)?;
                Ok((
                    copy,
                    Message::Copies {
                        first_index: i,
                        keys: vec![keys],
                    },
                ))
            })
            .collect()
    }

    /// Decrypts Bob's reply. Summands are taken mod 2 and summed as integers.
    pub fn finish(&self, pairs: &[EncryptedPadBits]) -> Result<AliceView, TpscError> {
        if pairs.len() != self.pads.len() {
            return Err(TpscError::ResultCount {
                expected: self.pads.len(),
                got: pairs.len(),
            });
        }
        let secret = &self.decrypt_keys.secret;
        let products: Vec<bool> = pairs
            .iter()
            .map(|p| fhe::dec(&p.a, secret) && fhe::dec(&p.b, secret))
            .collect();
        let ones = products.iter().filter(|&&x| x).count();
        Ok(AliceView {
            pi11: ones as f64 / products.len() as f64,
            products,
            resent: self.resent,
        })
    }
}

/// Bob's side: his state and the comparator backend.
pub struct Bob {
    ensemble: Vec<(f64, PureState)>,
    backend: Backend,
    shuffle: bool,
    rng: RandomStream,
    outcomes: Vec<Option<(bool, bool)>>,
    keys: Vec<Option<EncryptedPadBits>>,
    failed: u64,
}

impl Bob {
    pub fn new(state: &DensityMatrix, config: &ProtocolConfig) -> Result<Self, TpscError> {
        if state.num_qubits() != 1 {
            return Err(TpscError::NotSingleQubit(state.num_qubits()));
        }
        Ok(Self {
            ensemble: state.ensemble(),
            backend: config.backend.build(&config.noise)?,
            shuffle: config.shuffle,
            rng: stream(config.bob_seed),
            outcomes: Vec::new(),
            keys: Vec::new(),
            failed: 0,
        })
    }

    /// Runs the comparator on each received copy. Returns a retry request
    /// for copies that failed post-selection.
    pub fn receive(&mut self, copies: Vec<QuantumCopy>, message: &Message) -> Result<Option<Message>, TpscError> {
        let Message::Copies { first_index, keys } = message else {
            return Ok(None);
        };
        let mut retry = Vec::new();
        for (copy, key) in copies.into_iter().zip(keys) {
            debug_assert!(copy.index >= *first_index);
            let i = copy.index;
            if self.outcomes.len() <= i {
                self.outcomes.resize(i + 1, None);
                self.keys.resize(i + 1, None);
            }
            let mine = sample_pure(&self.ensemble, &mut self.rng);
            let joint = copy.qubit.tensor(&mine)?;
            match comparator_state(&joint, &self.backend, &mut self.rng)? {
                Some(s) => {
                    let (k1, k2) = measure_pair(&s, &mut self.rng)?;
                    self.outcomes[i] = Some((k1, k2));
                    self.keys[i] = Some(EncryptedPadBits {
                        a: fhe::hxor_const(&key.a, k1),
                        b: fhe::hxor_const(&key.b, k2),
                    });
                }
                None => {
                    self.failed += 1;
                    retry.push(i);
                }
            }
        }
        Ok((!retry.is_empty()).then_some(Message::Retry { indices: retry }))
    }

    /// Shuffles the updated pads and reports them.
    pub fn reply(mut self) -> (Message, BobView) {
        let mut permutation: Vec<usize> = (0..self.keys.len()).collect();
        if self.shuffle {
            permutation.shuffle(&mut self.rng);
        }
        let pairs = permutation
            .iter()
            .map(|&i| self.keys[i].clone().expect("every copy answered"))
            .collect();
        let view = BobView {
            outcomes: self
                .outcomes
                .into_iter()
                .map(|o| o.expect("every copy answered"))
                .collect(),
            permutation,
            failed_attempts: self.failed,
        };
        (Message::Results { pairs }, view)
    }
}

/// Runs Alice and Bob to completion.
pub fn run_protocol(
    alice_state: &DensityMatrix,
    bob_state: &DensityMatrix,
    config: &ProtocolConfig,
) -> Result<(AliceView, BobView, Transcript), TpscError> {
    let alice = Alice::new(alice_state, config)?;
    run_with(alice, bob_state, config)
}

fn run_with(
    mut alice: Alice,
    bob_state: &DensityMatrix,
    config: &ProtocolConfig,
) -> Result<(AliceView, BobView, Transcript), TpscError> {
    let mut bob = Bob::new(bob_state, config)?;
    let mut messages = Vec::new();
    let (copies, msg) = alice.send_copies(config.n)?;
    let mut pending = bob.receive(copies, &msg)?;
    messages.push(msg);
    let mut attempts = vec![1u64; config.n];
    while let Some(Message::Retry { indices }) = pending.take() {
        for &i in &indices {
            attempts[i] += 1;
            if attempts[i] > MAX_ATTEMPTS {
                return Err(TpscError::RetriesExhausted {
                    copy: i,
                    attempts: MAX_ATTEMPTS,
                });
            }
        }
        messages.push(Message::Retry {
            indices: indices.clone(),
        });
        let mut next = Vec::new();
        for (copy, msg) in alice.resend(&indices)? {
            if let Some(Message::Retry { indices }) = bob.receive(vec![copy], &msg)? {
                next.extend(indices);
            }
            messages.push(msg);
        }
        if !next.is_empty() {
            pending = Some(Message::Retry { indices: next });
        }
    }
    let (reply, bob_view) = bob.reply();
    let Message::Results { pairs } = &reply else {
        unreachable!()
    };
    let alice_view = alice.finish(pairs)?;
    messages.push(reply);
    Ok((
        alice_view,
        bob_view,
        Transcript {
            config: config.clone(),
            messages,
        },
    ))
}

/// Per-probe statistics of the leakage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEstimate {
    /// Bloch vector of the probe.
    pub probe: [f64; 3],
    pub copies: usize,
    pub ones: usize,
    /// Alice's estimate of `|<probe|bob>|^2`.
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub shuffle: bool,
    pub probes: Vec<ProbeEstimate>,
    /// Bob's Bloch vector as Alice would infer it from the probes.
    pub reconstructed_bloch: [f64; 3],
    /// Homogeneity of the per-probe outcome frequencies.
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Alice cycles the six Pauli eigenstates through her copies and groups
/// Bob's results by the probe she believes each one came from.
pub fn leakage_probe(bob_state: &DensityMatrix, config: &ProtocolConfig) -> Result<LeakageReport, TpscError> {
    use crate::tomo::PauliState;
    let probes: Vec<PureState> = PauliState::all().iter().map(|p| p.state()).collect();
    let alice = Alice::new(&DensityMatrix::maximally_mixed(1), config)?.with_probes(probes.clone());
    let (view, _, _) = run_with(alice, bob_state, config)?;
    let k = probes.len();
    let estimates: Vec<ProbeEstimate> = probes
        .iter()
        .enumerate()
        .map(|(p, state)| {
            let group: Vec<bool> = view.products.iter().skip(p).step_by(k).copied().collect();
            let ones = group.iter().filter(|&&x| x).count();
            ProbeEstimate {
                probe: state.bloch(),
                copies: group.len(),
                ones,
                overlap: 1.0 - 2.0 * ones as f64 / group.len().max(1) as f64,
            }
        })
        .collect();
    // |<probe|bob>|^2 = (1 + r.n)/2, so opposite probes give r.n directly.
    let r = [0, 2, 4].map(|i| estimates[i].overlap - estimates[i + 1].overlap);
    let reconstructed_bloch = [r[1], r[2], r[0]];
    let groups: Vec<(usize, usize)> = estimates.iter().map(|e| (e.ones, e.copies)).collect();
    let (chi_square, dof, p_value) = stats::homogeneity_test(&groups);
    Ok(LeakageReport {
        shuffle: config.shuffle,
        probes: estimates,
        reconstructed_bloch,
        chi_square,
        dof,
        p_value,
    })
}

/// One point of an overlap sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: usize,
    pub true_overlap: f64,
    /// `1 - D^(2)`, the value the estimate should track.
    pub expected: f64,
    pub estimate: f64,
    pub n: usize,
    pub backend: BackendKind,
    pub wrong_key: bool,
    pub resent: u64,
}

/// Sweep of Bob's state along a great circle of radius `bob_purity`
/// (Bloch length) while Alice holds `|0>`. Point `j` of `points` sits at
/// polar angle `pi j/(points-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub points: usize,
    pub bob_bloch_length: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            points: 20,
            bob_bloch_length: 1.0,
        }
    }
}

impl SweepSpec {
    pub fn states(&self) -> Result<Vec<(DensityMatrix, DensityMatrix)>, TpscError> {
        let alice = PureState::zero().to_density();
        (0..self.points)
            .map(|j| {
                let theta = std::f64::consts::PI * j as f64 / (self.points.max(2) - 1) as f64;
                let r = self.bob_bloch_length;
                let bob = DensityMatrix::from_bloch([r * theta.sin(), 0.0, r * theta.cos()])?;
                Ok((alice.clone(), bob))
            })
            .collect()
    }

    /// Configuration of point `j`: both seeds offset by a multiple of `j`.
    pub fn point_config(&self, config: &ProtocolConfig, j: usize) -> ProtocolConfig {
        ProtocolConfig {
            alice_seed: config.alice_seed.wrapping_add(j as u64 * 7919),
            bob_seed: config.bob_seed.wrapping_add(j as u64 * 7919),
            ..config.clone()
        }
    }
}

/// Runs the protocol at every sweep point.
pub fn sweep(spec: &SweepSpec, config: &ProtocolConfig) -> Result<Vec<SweepRow>, TpscError> {
    spec.states()?
        .iter()
        .enumerate()
        .map(|(j, (a, b))| {
            let (view, _, _) = run_protocol(a, b, &spec.point_config(config, j))?;
            let d2 = true_overlap(a, b)?;
            Ok(SweepRow {
                point: j,
                true_overlap: d2,
                expected: 1.0 - d2,
                estimate: view.estimate(),
                n: config.n,
                backend: config.backend,
                wrong_key: config.wrong_key,
                resent: view.resent,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::c;
    use crate::rng::substream;

    fn pure(theta: f64, phi: f64) -> PureState {
        PureState::from_bloch_angles(theta, phi)
    }

    #[test]
    fn comparator_examples() {
        let d = |a: &PureState, b: &PureState| comparator_distribution(&a.tensor(b).unwrap()).unwrap()[3];
        assert!(d(&PureState::plus(), &PureState::plus()).abs() < 1e-15);
        assert!((d(&PureState::zero(), &PureState::one()) - 0.5).abs() < 1e-15);
        assert!((d(&PureState::zero(), &PureState::plus()) - 0.25).abs() < 1e-15);
        let mut rng = substream(1, 0);
        let ones = (0..20_000)
            .filter(|_| comparator(&PureState::zero(), &PureState::plus(), &mut rng).unwrap() == (true, true))
            .count();
        assert!((ones as f64 / 20_000.0 - 0.25).abs() < 5.0 * stats::binomial_sigma(0.25, 20_000));
    }

    #[test]
    fn appendix_formula_on_a_grid() {
        // Output amplitudes (c0 d0 +- c1 d1), (c0 d1 +- c1 d0) from the
        // expansion of the comparator, checked against the closed form.
        for i in 0..10 {
            for j in 0..10 {
                let a = pure(std::f64::consts::PI * i as f64 / 9.0, 0.7 * j as f64);
                let b = pure(std::f64::consts::PI * j as f64 / 9.0, 1.3 * i as f64);
                let dist = comparator_distribution(&a.tensor(&b).unwrap()).unwrap();
                let (c0, c1) = (a.amplitude(0), a.amplitude(1));
                let (d0, d1) = (b.amplitude(0), b.amplitude(1));
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let amp11 = (c0 * d1 - c1 * d0) * c(s, 0.0);
                assert!((dist[3] - amp11.norm_sqr()).abs() < 1e-12);
                let d2 = a.fidelity(&b);
                assert!((dist[3] - 0.5 * (1.0 - d2)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pairing_matches_plaintext_for_every_pad() {
        // Exhaustive over pads: (k1 ^ a, k2 ^ b) has the plaintext outcome
        // distribution. Swapping the keys does not.
        let mut swapped_fails = false;
        for i in 0..5 {
            for j in 0..5 {
                let a = pure(0.7 * i as f64, 0.4 + j as f64);
                let b = pure(0.5 * j as f64 + 0.2, 1.1 * i as f64);
                let plain = comparator_distribution(&a.tensor(&b).unwrap()).unwrap();
                for pad in PadKey::all() {
                    let enc = qotp::encrypt(&a, pad).unwrap();
                    let dist = comparator_distribution(&enc.tensor(&b).unwrap()).unwrap();
                    for (k, &d) in dist.iter().enumerate() {
                        let (k1, k2) = (k >> 1 == 1, k & 1 == 1);
                        let t = ((k1 ^ pad.a) as usize) << 1 | (k2 ^ pad.b) as usize;
                        assert!((d - plain[t]).abs() < 1e-12);
                        let s = ((k1 ^ pad.b) as usize) << 1 | (k2 ^ pad.a) as usize;
                        swapped_fails |= (d - plain[s]).abs() > 1e-6;
                    }
                }
            }
        }
        assert!(swapped_fails);
    }

    #[test]
    fn decrypted_products_equal_plaintext_indicator() {
        let config = ProtocolConfig {
            n: 200,
            shuffle: false,
            ..Default::default()
        };
        let alice = PureState::from_bloch_angles(1.0, 0.3).to_density();
        let bob = PureState::from_bloch_angles(2.0, 1.3).to_density();
        let a = Alice::new(&alice, &config).unwrap();
        let pads_rng_check = config.clone();
        let (view, bob_view, _) = run_with(a, &bob, &pads_rng_check).unwrap();
        // Replay Alice's pads from her stream to compare copy by copy.
        let mut replay = Alice::new(&alice, &config).unwrap();
        let (_, _) = replay.send_copies(config.n).unwrap();
        for (i, &(k1, k2)) in bob_view.outcomes.iter().enumerate() {
            let pad = replay.pads[i];
            assert_eq!(view.products[i], (k1 ^ pad.a) && (k2 ^ pad.b));
        }
    }

    #[test]
    fn true_overlap_examples() {
        let zero = PureState::zero().to_density();
        assert!((true_overlap(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!((true_overlap(&zero, &PureState::plus().to_density()).unwrap() - 0.5).abs() < 1e-12);
        assert!((true_overlap(&zero, &DensityMatrix::maximally_mixed(1)).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn protocol_examples() {
        let cfg = ProtocolConfig {
            n: 10_000,
            ..Default::default()
        };
        let zero = PureState::zero().to_density();
        let (v, bob_view, _) = run_protocol(&zero, &zero, &cfg).unwrap();
        assert!(v.estimate().abs() < 0.01);
        let mut sorted = bob_view.permutation.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10_000).collect::<Vec<_>>());
        let (v, _, _) = run_protocol(&zero, &PureState::one().to_density(), &cfg).unwrap();
        assert!((v.estimate() - 1.0).abs() < 0.03);
        let (v, _, _) = run_protocol(&pure(1.2, 0.5).to_density(), &DensityMatrix::maximally_mixed(1), &cfg).unwrap();
        assert!((v.estimate() - 0.5).abs() < 0.03);
    }

    #[test]
    fn estimator_is_unbiased_on_a_grid() {
        for i in 0..5 {
            for j in 0..5 {
                let a = pure(std::f64::consts::PI * i as f64 / 4.0, 0.0);
                let b = pure(std::f64::consts::PI * j as f64 / 4.0, 0.9);
                let cfg = ProtocolConfig {
                    n: 10_000,
                    alice_seed: 10 + (i * 5 + j) as u64,
                    bob_seed: 100 + (i * 5 + j) as u64,
                    ..Default::default()
                };
                let (v, _, _) = run_protocol(&a.to_density(), &b.to_density(), &cfg).unwrap();
                let p = 0.5 * (1.0 - a.fidelity(&b));
                assert!((v.pi11 - p).abs() <= 4.0 * stats::binomial_sigma(p, 10_000) + 1e-12);
            }
        }
    }

    #[test]
    fn wrong_key_hovers_at_one_half() {
        let cfg = ProtocolConfig {
            n: 10_000,
            wrong_key: true,
            ..Default::default()
        };
        let zero = PureState::zero().to_density();
        let (v, _, _) = run_protocol(&zero, &zero, &cfg).unwrap();
        assert!((v.estimate() - 0.5).abs() < 0.03);
    }

    #[test]
    fn optics_backend_retries_failed_copies() {
        let cfg = ProtocolConfig {
            n: 300,
            backend: BackendKind::Optics,
            ..Default::default()
        };
        let zero = PureState::zero().to_density();
        let (v, bob_view, transcript) = run_protocol(&zero, &PureState::one().to_density(), &cfg).unwrap();
        assert!(v.resent > 0);
        assert_eq!(v.resent, bob_view.failed_attempts);
        assert!((v.estimate() - 1.0).abs() < 0.1);
        assert!(matches!(transcript.messages.last(), Some(Message::Results { .. })));
        let json = serde_json::to_string(&transcript).unwrap();
        assert_eq!(serde_json::from_str::<Transcript>(&json).unwrap(), transcript);
    }

    #[test]
    fn shuffle_hides_the_probe_linkage() {
        let bob = PureState::zero().to_density();
        let base = ProtocolConfig {
            n: 6 * 2000,
            shuffle: false,
            ..Default::default()
        };
        let open = leakage_probe(&bob, &base).unwrap();
        let r = open.reconstructed_bloch;
        let err = (r[0].powi(2) + r[1].powi(2) + (r[2] - 1.0).powi(2)).sqrt();
        assert!(err < 0.1, "{r:?}");
        assert!(open.p_value < 1e-6);
        let hidden = leakage_probe(&bob, &ProtocolConfig { shuffle: true, ..base }).unwrap();
        assert!(hidden.p_value > 0.01);
        let pooled = hidden.probes.iter().map(|p| p.ones).sum::<usize>() as f64 / 12_000.0;
        for p in &hidden.probes {
            let f = p.ones as f64 / p.copies as f64;
            assert!((f - pooled).abs() < 3.0 * stats::binomial_sigma(pooled, p.copies));
        }
    }

    #[test]
    fn single_probe_is_unaffected_by_shuffling() {
        let bob = PureState::plus().to_density();
        let probe = vec![PureState::zero()];
        let mut sums = Vec::new();
        for shuffle in [false, true] {
            let cfg = ProtocolConfig {
                n: 500,
                shuffle,
                ..Default::default()
            };
            let alice = Alice::new(&DensityMatrix::maximally_mixed(1), &cfg)
                .unwrap()
                .with_probes(probe.clone());
            let (v, _, _) = run_with(alice, &bob, &cfg).unwrap();
            sums.push(v.pi11);
        }
        assert_eq!(sums[0], sums[1]);
    }

    #[test]
    fn sweep_tracks_the_diagonal() {
        let rows = sweep(&SweepSpec::default(), &ProtocolConfig::default()).unwrap();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|r| (r.estimate - r.expected).abs() <= 0.06));
        let wrong = sweep(
            &SweepSpec::default(),
            &ProtocolConfig {
                wrong_key: true,
                ..Default::default()
            },
        )
        .unwrap();
        // Each wrong-key product is Bernoulli(1/4): sigma of the estimate is
        // 2 sqrt(3/16/960) = 0.028 per point.
        let sigma = 2.0 * stats::binomial_sigma(0.25, 960);
        assert!(wrong.iter().all(|r| (r.estimate - 0.5).abs() <= 4.0 * sigma));
        let mean = wrong.iter().map(|r| r.estimate).sum::<f64>() / 20.0;
        assert!((mean - 0.5).abs() < 4.0 * sigma / 20f64.sqrt());
    }
}
