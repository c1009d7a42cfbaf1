//! Post-selected two-photon gates and their effective qubit maps.
//!
//! Qubits are polarization-encoded, `H = |0>` and `V = |1>`. The first input
//! photon always carries internal label 0. The second carries
//! `sqrt(v) |0> + sqrt(1-v) |1>`, so `v` is the two-photon interference
//! visibility between them.

use std::collections::BTreeMap;

use rand::Rng;

use crate::qcore::gate::Gate;
use crate::qcore::linalg::{c, kron, CMatrix, C64, ZERO};
use crate::qcore::{PureState, QcoreError};

use super::element::{OpticalCircuit, OpticalElement};
use super::fock::{mode_count, mode_index, mode_parts, FockState, Polarization};
use super::OpticsError;

/// Rotates every label-0 photon in `spatial` into
/// `sqrt(v) (label 0) + sqrt(1-v) (label 1)`.
pub fn distinguishability_mix(state: &FockState, spatial: usize, visibility: f64) -> Result<FockState, OpticsError> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(OpticsError::BadParameter {
            name: "visibility",
            value: visibility,
        });
    }
    let n = state.modes();
    let mut u = CMatrix::identity(n, n);
    let (s, r) = (visibility.sqrt(), (1.0 - visibility).sqrt());
    for pol in Polarization::both() {
        let m0 = mode_index(spatial, pol, 0);
        let m1 = mode_index(spatial, pol, 1);
        if m1 >= n {
            return Err(OpticsError::ModeOutOfRange { mode: m1, modes: n });
        }
        u[(m0, m0)] = c(s, 0.0);
        u[(m1, m0)] = c(r, 0.0);
        u[(m0, m1)] = c(-r, 0.0);
        u[(m1, m1)] = c(s, 0.0);
    }
    state.apply_unitary(&u)
}

/// Coincidence probability behind a balanced beamsplitter for two H photons
/// with visibility `v`.
pub fn hom_coincidence(visibility: f64) -> Result<f64, OpticsError> {
    let bs = OpticalCircuit::new(
        2,
        vec![OpticalElement::Bs {
            modes: [0, 1],
            transmission: 0.5,
        }],
    )?;
    let input = FockState::from_photons(
        mode_count(2),
        &[mode_index(0, Polarization::H, 0), mode_index(1, Polarization::H, 0)],
    )?;
    let out = bs.apply(&distinguishability_mix(&input, 1, visibility)?)?;
    Ok(port_filter(&out, &[0, 1]).norm_sqr())
}

/// Terms with exactly one photon in each of `ports` and none elsewhere.
fn port_filter(state: &FockState, ports: &[usize]) -> FockState {
    state.filter(|occ| {
        let mut per_port = BTreeMap::<usize, u8>::new();
        for (m, &n) in occ.iter().enumerate() {
            if n > 0 {
                *per_port.entry(mode_parts(m).0).or_default() += n;
            }
        }
        per_port.len() == ports.len() && ports.iter().all(|p| per_port.get(p) == Some(&1))
    })
}

/// One post-selected outcome: the herald polarization (if any), the internal
/// labels found at the detected ports (qubit ports first, then the herald),
/// and the Kraus operator it applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub herald: Option<Polarization>,
    pub labels: Vec<usize>,
    pub kraus: CMatrix,
}

/// Conditional map of a two-photon circuit: two input qubits, one or two
/// output qubits, an optional herald port. The Kraus sum is contractive; its
/// deficit is the post-selection failure probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PostSelectedMap {
    pub branches: Vec<Branch>,
    pub output_qubits: usize,
}

impl PostSelectedMap {
    /// Builds the map by enumerating Fock amplitudes over the four input
    /// polarization pairs.
    pub fn from_circuit(
        circuit: &OpticalCircuit,
        input_ports: [usize; 2],
        qubit_ports: &[usize],
        herald_port: Option<usize>,
        visibility: f64,
    ) -> Result<Self, OpticsError> {
        let modes = mode_count(circuit.total_spatial());
        let u = circuit.unitary();
        let mut detect: Vec<usize> = qubit_ports.to_vec();
        detect.extend(herald_port);
        let rows = 1usize << qubit_ports.len();
        let mut branches: BTreeMap<(Option<Polarization>, Vec<usize>), CMatrix> = BTreeMap::new();
        for col in 0..4 {
            let p1 = Polarization::from_bit(col & 2 != 0);
            let p2 = Polarization::from_bit(col & 1 != 0);
            let input = FockState::from_photons(
                modes,
                &[mode_index(input_ports[0], p1, 0), mode_index(input_ports[1], p2, 0)],
            )?;
            let input = distinguishability_mix(&input, input_ports[1], visibility)?;
            let out = port_filter(&input.apply_unitary(&u)?, &detect);
            for (occ, amp) in out.terms() {
                let mut row = 0;
                let mut labels = vec![0; detect.len()];
                let mut herald = None;
                for (m, &n) in occ.iter().enumerate() {
                    if n == 0 {
                        continue;
                    }
                    let (port, pol, label) = mode_parts(m);
                    let j = detect
                        .iter()
                        .position(|&q| q == port)
                        .expect("filtered to detected ports");
                    labels[j] = label;
                    if j < qubit_ports.len() {
                        if pol == Polarization::V {
                            row |= 1 << (qubit_ports.len() - 1 - j);
                        }
                    } else {
                        herald = Some(pol);
                    }
                }
                let k = branches
                    .entry((herald, labels))
                    .or_insert_with(|| CMatrix::zeros(rows, 4));
                k[(row, col)] += amp;
            }
        }
        Ok(Self {
            branches: branches
                .into_iter()
                .filter(|(_, k)| k.iter().any(|a| a.norm_sqr() > 1e-28))
                .map(|((herald, labels), kraus)| Branch { herald, labels, kraus })
                .collect(),
            output_qubits: qubit_ports.len(),
        })
    }

    /// `sum_j K_j^dagger K_j`.
    pub fn effect(&self) -> CMatrix {
        self.branches
            .iter()
            .fold(CMatrix::zeros(4, 4), |acc, b| acc + b.kraus.adjoint() * &b.kraus)
    }

    /// Success probability on a two-qubit input.
    pub fn success_probability(&self, input: &PureState) -> f64 {
        let v = input.to_vector();
        self.branches.iter().map(|b| (&b.kraus * &v).norm_squared()).sum()
    }

    /// Conjugates every Kraus operator: `K -> left K right`.
    pub fn conjugated(&self, left: &CMatrix, right: &CMatrix) -> Self {
        Self {
            branches: self
                .branches
                .iter()
                .map(|b| Branch {
                    kraus: left * &b.kraus * right,
                    ..b.clone()
                })
                .collect(),
            output_qubits: self.output_qubits,
        }
    }

    /// Square `4 x 4` form of a branch; a one-qubit output is placed on the
    /// first target with the second target left in `|0>`.
    fn square(&self, branch: &Branch) -> CMatrix {
        if self.output_qubits == 2 {
            return branch.kraus.clone();
        }
        let mut k = CMatrix::zeros(4, 4);
        for o in 0..2 {
            for col in 0..4 {
                k[(o << 1, col)] = branch.kraus[(o, col)];
            }
        }
        k
    }

    /// Quantum-trajectory step on qubits `targets` of `state`. Returns `None`
    /// when post-selection fails. A one-qubit output leaves `targets[1]` in
    /// `|0>` for the caller to discard.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        state: &PureState,
        targets: [usize; 2],
        rng: &mut R,
    ) -> Result<Option<(PureState, &Branch)>, QcoreError> {
        let mut u: f64 = rng.random();
        for b in &self.branches {
            let k = self.square(b);
            let amps = crate::qcore::gate::apply_local(&k, &targets, state.amplitudes(), state.num_qubits());
            let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            if u < p {
                return Ok(Some((PureState::normalized(amps)?, b)));
            }
            u -= p;
        }
        Ok(None)
    }
}

pub const PPBS_T_V: f64 = 1.0 / 3.0;

/// PPBS with `T_H = 1`, `T_V = 1/3`, and `1/3` H attenuation in both outputs.
pub fn ppbs_cz_circuit() -> OpticalCircuit {
    OpticalCircuit::new(
        2,
        vec![
            OpticalElement::Ppbs {
                modes: [0, 1],
                t_h: 1.0,
                t_v: PPBS_T_V,
            },
            OpticalElement::Attenuator {
                mode: 0,
                transmission: PPBS_T_V,
                polarization: Some(Polarization::H),
            },
            OpticalElement::Attenuator {
                mode: 1,
                transmission: PPBS_T_V,
                polarization: Some(Polarization::H),
            },
        ],
    )
    .expect("valid built-in circuit")
}

/// PBS followed by a half-wave plate at 22.5 degrees on port 1; port 1 is the
/// herald.
pub fn pbs_phase_add_circuit() -> OpticalCircuit {
    OpticalCircuit::new(
        2,
        vec![
            OpticalElement::Pbs { modes: [0, 1] },
            OpticalElement::Hwp {
                mode: 1,
                angle_deg: 22.5,
            },
        ],
    )
    .expect("valid built-in circuit")
}

/// Post-selected controlled-Z on photons in ports 0 and 1 (coincidence).
pub fn ppbs_cz(visibility: f64) -> Result<PostSelectedMap, OpticsError> {
    PostSelectedMap::from_circuit(&ppbs_cz_circuit(), [0, 1], &[0, 1], None, visibility)
}

/// CNOT built from [`ppbs_cz`] by half-wave plates on the target before and after.
pub fn ppbs_cnot(visibility: f64) -> Result<PostSelectedMap, OpticsError> {
    let h = Gate::h(0).matrix().clone();
    let ih = kron(&CMatrix::identity(2, 2), &h);
    Ok(ppbs_cz(visibility)?.conjugated(&ih, &ih))
}

/// Phase-add map: two equatorial qubits in, one qubit out on port 0, herald
/// polarization on port 1.
pub fn phase_add_map(visibility: f64) -> Result<PostSelectedMap, OpticsError> {
    PostSelectedMap::from_circuit(&pbs_phase_add_circuit(), [0, 1], &[0], Some(1), visibility)
}

/// Herald bit: `V -> 0`, `H -> 1`.
pub fn herald_bit(pol: Polarization) -> bool {
    pol == Polarization::H
}

/// One herald outcome of the phase-add gate.
#[derive(Debug, Clone)]
pub struct PhaseAddOutcome {
    pub k1: bool,
    pub probability: f64,
    /// Conditional output as a density matrix (labels traced out).
    pub output: crate::qcore::DensityMatrix,
}

/// Runs the phase-add gate on `(|0> + e^{i alpha}|1>)(|0> + e^{i beta}|1>)/2`
/// and returns both herald outcomes.
pub fn pbs_phase_add(alpha: f64, beta: f64, visibility: f64) -> Result<Vec<PhaseAddOutcome>, OpticsError> {
    let map = phase_add_map(visibility)?;
    let input = PureState::equatorial(alpha).tensor(&PureState::equatorial(beta))?;
    let v = input.to_vector();
    let mut out = Vec::new();
    for pol in [Polarization::V, Polarization::H] {
        let mut rho = CMatrix::zeros(2, 2);
        for b in map.branches.iter().filter(|b| b.herald == Some(pol)) {
            let psi = &b.kraus * &v;
            rho += &psi * psi.adjoint();
        }
        let p = rho.trace().re;
        out.push(PhaseAddOutcome {
            k1: herald_bit(pol),
            probability: p,
            output: crate::qcore::DensityMatrix::new(rho.unscale(p))?,
        });
    }
    Ok(out)
}

/// Expected conditional output phase of the phase-add gate.
pub fn phase_add_target(alpha: f64, beta: f64, k1: bool) -> PureState {
    let extra = if k1 { std::f64::consts::PI } else { 0.0 };
    PureState::equatorial(alpha + beta + extra)
}

/// Equatorial phase of a single-qubit state, ignoring global phase.
pub fn equatorial_phase(state: &PureState) -> f64 {
    let a = state.amplitudes();
    let rel: C64 = a[1] * a[0].conj();
    if rel == ZERO {
        0.0
    } else {
        rel.arg()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::max_abs_diff;
    use crate::rng::substream;
    use rand::Rng;
    use std::f64::consts::PI;

    fn cz() -> CMatrix {
        Gate::cz(0, 1).matrix().clone()
    }

    #[test]
    fn ppbs_cz_is_a_third_of_cz() {
        let map = ppbs_cz(1.0).unwrap();
        assert_eq!(map.branches.len(), 1);
        let k = &map.branches[0].kraus;
        assert!(max_abs_diff(&k.scale(3.0), &cz()) < 1e-12);
        assert!(max_abs_diff(&map.effect(), &CMatrix::identity(4, 4).scale(1.0 / 9.0)) < 1e-12);
        // |VV> picks up the minus sign, |HH> does not.
        assert!((k[(3, 3)] - c(-1.0 / 3.0, 0.0)).norm() < 1e-12);
        assert!((k[(0, 0)] - c(1.0 / 3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ppbs_cnot_at_unit_visibility() {
        let map = ppbs_cnot(1.0).unwrap();
        let cnot = Gate::cnot(0, 1).matrix().clone();
        assert!(max_abs_diff(&map.branches[0].kraus.scale(3.0), &cnot) < 1e-12);
    }

    #[test]
    fn partial_visibility_leaks_into_label_branches() {
        let map = ppbs_cz(0.9).unwrap();
        assert!(map.branches.len() > 1);
        // HH never interferes: its success stays 1/9 at any visibility.
        let hh = PureState::basis(2, 0).unwrap();
        assert!((map.success_probability(&hh) - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn hom_dip_is_linear_in_visibility() {
        for (v, expected) in [(1.0, 0.0), (0.0, 0.5), (0.97, 0.015)] {
            assert!((hom_coincidence(v).unwrap() - expected).abs() < 1e-12, "v={v}");
        }
    }

    #[test]
    fn phase_add_heralds_are_quarter_each() {
        let mut rng = substream(40, 0);
        for _ in 0..10 {
            let (a, b) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
            let out = pbs_phase_add(a, b, 1.0).unwrap();
            for o in &out {
                assert!((o.probability - 0.25).abs() < 1e-12);
                let target = phase_add_target(a, b, o.k1);
                assert!((o.output.fidelity_pure(&target) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phase_add_examples() {
        let out = pbs_phase_add(0.0, 0.0, 1.0).unwrap();
        let v_herald = out.iter().find(|o| !o.k1).unwrap();
        assert!((v_herald.output.fidelity_pure(&PureState::plus()) - 1.0).abs() < 1e-12);
        // Two P|+> inputs add to phase pi.
        let out = pbs_phase_add(PI / 2.0, PI / 2.0, 1.0).unwrap();
        let v_herald = out.iter().find(|o| !o.k1).unwrap();
        assert!((v_herald.output.fidelity_pure(&PureState::minus()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinguishable_phase_add_loses_coherence() {
        let out = pbs_phase_add(0.3, 0.4, 0.0).unwrap();
        for o in &out {
            let f = o.output.fidelity_pure(&phase_add_target(0.3, 0.4, o.k1));
            assert!((f - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_sampling_matches_branch_weights() {
        let map = ppbs_cz(1.0).unwrap();
        let state = PureState::basis(2, 3).unwrap();
        let mut rng = substream(41, 0);
        let n = 9000;
        let hits = (0..n)
            .filter(|_| map.sample(&state, [0, 1], &mut rng).unwrap().is_some())
            .count();
        let sigma = (n as f64 * (1.0 / 9.0) * (8.0 / 9.0)).sqrt();
        assert!((hits as f64 - n as f64 / 9.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn shipped_configs_match_builders() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let load = |name: &str| OpticalCircuit::load(&dir.join(name)).unwrap();
        assert_eq!(load("ppbs_cz.json"), ppbs_cz_circuit());
        assert_eq!(load("pbs_phase_add.json"), pbs_phase_add_circuit());
        let bs = load("hom_balanced_bs.json");
        let out = bs
            .apply(
                &FockState::from_photons(
                    mode_count(bs.total_spatial()),
                    &[mode_index(0, Polarization::H, 0), mode_index(1, Polarization::H, 0)],
                )
                .unwrap(),
            )
            .unwrap();
        let coincidence = out.amplitude(&{
            let mut occ = vec![0u8; out.modes()];
            occ[mode_index(0, Polarization::H, 0)] = 1;
            occ[mode_index(1, Polarization::H, 0)] = 1;
            occ
        });
        assert!(coincidence.norm() < 1e-12);
    }
}
