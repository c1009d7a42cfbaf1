//! Passive linear optical elements and declarative circuits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::qcore::linalg::{c, cis, identity, CMatrix, C64, ZERO};

use super::fock::{mode_count, mode_index, FockState, Polarization};
use super::OpticsError;

/// One element. Spatial ports are numbered from zero; attenuators get a
/// private loss port each, appended after the circuit's declared ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpticalElement {
    /// Partially polarizing beamsplitter with intensity transmissions per
    /// polarization.
    Ppbs {
        modes: [usize; 2],
        t_h: f64,
        t_v: f64,
    },
    /// Polarizing beamsplitter: transmits H, reflects V.
    Pbs {
        modes: [usize; 2],
    },
    /// Polarization-independent beamsplitter.
    Bs {
        modes: [usize; 2],
        transmission: f64,
    },
    Hwp {
        mode: usize,
        angle_deg: f64,
    },
    Qwp {
        mode: usize,
        angle_deg: f64,
    },
    /// Phase shift on one port; restricted to one polarization if given.
    Phase {
        mode: usize,
        phase_rad: f64,
        #[serde(default)]
        polarization: Option<Polarization>,
    },
    /// Intensity transmission `transmission`; the rest goes to a loss port.
    Attenuator {
        mode: usize,
        transmission: f64,
        #[serde(default)]
        polarization: Option<Polarization>,
    },
}

/// Real beamsplitter between two flat modes:
/// `c_a -> t c_a + r c_b`, `c_b -> -r c_a + t c_b` with `t = sqrt(T)`.
fn mix(u: &mut CMatrix, a: usize, b: usize, transmission: f64) {
    let t = transmission.sqrt();
    let r = (1.0 - transmission).max(0.0).sqrt();
    let mut block = identity(u.nrows());
    block[(a, a)] = c(t, 0.0);
    block[(b, a)] = c(r, 0.0);
    block[(a, b)] = c(-r, 0.0);
    block[(b, b)] = c(t, 0.0);
    *u = &block * &*u;
}

/// Jones matrix acting on one port (columns are input polarizations).
fn jones(u: &mut CMatrix, spatial: usize, j: [[C64; 2]; 2]) {
    let mut block = identity(u.nrows());
    for label in 0..2 {
        for (pi, pin) in Polarization::both().into_iter().enumerate() {
            for (po, pout) in Polarization::both().into_iter().enumerate() {
                block[(mode_index(spatial, pout, label), mode_index(spatial, pin, label))] = j[po][pi];
            }
        }
    }
    *u = &block * &*u;
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), OpticsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(OpticsError::BadParameter { name, value })
    }
}

impl OpticalElement {
    fn ports(&self) -> Vec<usize> {
        match self {
            OpticalElement::Ppbs { modes, .. } | OpticalElement::Pbs { modes } | OpticalElement::Bs { modes, .. } => {
                modes.to_vec()
            }
            OpticalElement::Hwp { mode, .. }
            | OpticalElement::Qwp { mode, .. }
            | OpticalElement::Phase { mode, .. }
            | OpticalElement::Attenuator { mode, .. } => vec![*mode],
        }
    }

    fn validate(&self, spatial: usize) -> Result<(), OpticsError> {
        let ports = self.ports();
        if let Some(&p) = ports.iter().find(|&&p| p >= spatial) {
            return Err(OpticsError::ModeOutOfRange {
                mode: p,
                modes: spatial,
            });
        }
        if ports.len() == 2 && ports[0] == ports[1] {
            return Err(OpticsError::BadCircuit(
                "a two-port element needs distinct ports".into(),
            ));
        }
        match self {
            OpticalElement::Ppbs { t_h, t_v, .. } => {
                check_fraction("t_h", *t_h)?;
                check_fraction("t_v", *t_v)
            }
            OpticalElement::Bs { transmission, .. } | OpticalElement::Attenuator { transmission, .. } => {
                check_fraction("transmission", *transmission)
            }
            _ => Ok(()),
        }
    }

    /// Left-multiplies `u` by this element's mode transformation. `loss` is
    /// the loss port reserved for an attenuator.
    fn compose(&self, u: &mut CMatrix, loss: Option<usize>) {
        match *self {
            OpticalElement::Ppbs {
                modes: [a, b],
                t_h,
                t_v,
            } => {
                for label in 0..2 {
                    for (pol, t) in [(Polarization::H, t_h), (Polarization::V, t_v)] {
                        mix(u, mode_index(a, pol, label), mode_index(b, pol, label), t);
                    }
                }
            }
            OpticalElement::Pbs { modes } => OpticalElement::Ppbs {
                modes,
                t_h: 1.0,
                t_v: 0.0,
            }
            .compose(u, loss),
            OpticalElement::Bs { modes, transmission } => OpticalElement::Ppbs {
                modes,
                t_h: transmission,
                t_v: transmission,
            }
            .compose(u, loss),
            OpticalElement::Hwp { mode, angle_deg } => {
                let th = 2.0 * angle_deg.to_radians();
                let (s, co) = th.sin_cos();
                jones(u, mode, [[c(co, 0.0), c(s, 0.0)], [c(s, 0.0), c(-co, 0.0)]]);
            }
            OpticalElement::Qwp { mode, angle_deg } => {
                let th = angle_deg.to_radians();
                let (s, co) = th.sin_cos();
                let off = c(1.0, -1.0) * (s * co);
                jones(u, mode, [[c(co * co, s * s), off], [off, c(s * s, co * co)]]);
            }
            OpticalElement::Phase {
                mode,
                phase_rad,
                polarization,
            } => {
                let w = cis(phase_rad);
                let one = c(1.0, 0.0);
                let (h, v) = match polarization {
                    None => (w, w),
                    Some(Polarization::H) => (w, one),
                    Some(Polarization::V) => (one, w),
                };
                jones(u, mode, [[h, ZERO], [ZERO, v]]);
            }
            OpticalElement::Attenuator {
                mode,
                transmission,
                polarization,
            } => {
                let loss = loss.expect("attenuator has a loss port");
                let pols: Vec<Polarization> = match polarization {
                    None => Polarization::both().to_vec(),
                    Some(p) => vec![p],
                };
                for label in 0..2 {
                    for &p in &pols {
                        mix(u, mode_index(mode, p, label), mode_index(loss, p, label), transmission);
                    }
                }
            }
        }
    }
}

/// Ordered list of elements over `spatial_modes` ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalCircuit {
    pub spatial_modes: usize,
    pub elements: Vec<OpticalElement>,
}

impl OpticalCircuit {
    pub fn new(spatial_modes: usize, elements: Vec<OpticalElement>) -> Result<Self, OpticsError> {
        let circuit = Self {
            spatial_modes,
            elements,
        };
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if self.spatial_modes == 0 {
            return Err(OpticsError::BadCircuit("no spatial modes".into()));
        }
        self.elements.iter().try_for_each(|e| e.validate(self.spatial_modes))
    }

    pub fn from_json(text: &str) -> Result<Self, OpticsError> {
        let circuit: Self = serde_json::from_str(text).map_err(|e| OpticsError::BadCircuit(e.to_string()))?;
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn load(path: &Path) -> Result<Self, OpticsError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| OpticsError::BadCircuit(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn loss_ports(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, OpticalElement::Attenuator { .. }))
            .count()
    }

    /// Declared ports plus one loss port per attenuator.
    pub fn total_spatial(&self) -> usize {
        self.spatial_modes + self.loss_ports()
    }

    /// Mode transformation on the flat mode space of [`Self::total_spatial`]
    /// ports.
    pub fn unitary(&self) -> CMatrix {
        let n = mode_count(self.total_spatial());
        let mut u = identity(n);
        let mut next_loss = self.spatial_modes;
        for e in &self.elements {
            let loss = if matches!(e, OpticalElement::Attenuator { .. }) {
                next_loss += 1;
                Some(next_loss - 1)
            } else {
                None
            };
            e.compose(&mut u, loss);
        }
        u
    }

    pub fn apply(&self, state: &FockState) -> Result<FockState, OpticsError> {
        state.apply_unitary(&self.unitary())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::is_unitary;

    fn single(spatial: usize, pol: Polarization, total: usize) -> FockState {
        FockState::from_photons(mode_count(total), &[mode_index(spatial, pol, 0)]).unwrap()
    }

    #[test]
    fn pbs_routes_by_polarization() {
        let circ = OpticalCircuit::new(2, vec![OpticalElement::Pbs { modes: [0, 1] }]).unwrap();
        let h = circ.apply(&single(0, Polarization::H, 2)).unwrap();
        assert!((h.norm_sqr() - 1.0).abs() < 1e-12);
        let mut occ = vec![0u8; 8];
        occ[mode_index(0, Polarization::H, 0)] = 1;
        assert!((h.amplitude(&occ).norm() - 1.0).abs() < 1e-12);
        let v = circ.apply(&single(0, Polarization::V, 2)).unwrap();
        let mut occ = vec![0u8; 8];
        occ[mode_index(1, Polarization::V, 0)] = 1;
        assert!((v.amplitude(&occ).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_element_is_unitary_on_the_extended_space() {
        let circ = OpticalCircuit::new(
            2,
            vec![
                OpticalElement::Ppbs {
                    modes: [0, 1],
                    t_h: 1.0,
                    t_v: 1.0 / 3.0,
                },
                OpticalElement::Bs {
                    modes: [1, 0],
                    transmission: 0.3,
                },
                OpticalElement::Hwp {
                    mode: 1,
                    angle_deg: 22.5,
                },
                OpticalElement::Qwp {
                    mode: 0,
                    angle_deg: 10.0,
                },
                OpticalElement::Phase {
                    mode: 0,
                    phase_rad: 0.7,
                    polarization: Some(Polarization::V),
                },
                OpticalElement::Attenuator {
                    mode: 1,
                    transmission: 0.4,
                    polarization: None,
                },
            ],
        )
        .unwrap();
        assert_eq!(circ.total_spatial(), 3);
        assert!(is_unitary(&circ.unitary(), 1e-12));
    }

    #[test]
    fn half_wave_plate_at_22_5_is_a_hadamard() {
        let circ = OpticalCircuit::new(
            1,
            vec![OpticalElement::Hwp {
                mode: 0,
                angle_deg: 22.5,
            }],
        )
        .unwrap();
        let out = circ.apply(&single(0, Polarization::V, 1)).unwrap();
        let mut h = vec![0u8; 4];
        h[mode_index(0, Polarization::H, 0)] = 1;
        let mut v = vec![0u8; 4];
        v[mode_index(0, Polarization::V, 0)] = 1;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&h) - c(s, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&v) - c(-s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn invalid_circuits_are_rejected() {
        assert!(OpticalCircuit::new(1, vec![OpticalElement::Pbs { modes: [0, 1] }]).is_err());
        assert!(OpticalCircuit::new(
            2,
            vec![OpticalElement::Attenuator {
                mode: 0,
                transmission: 1.5,
                polarization: None
            }]
        )
        .is_err());
        assert!(OpticalCircuit::from_json("{\"spatial_modes\": 2, \"elements\": [{\"kind\": \"mirror\"}]}").is_err());
    }

    #[test]
    fn json_round_trip() {
        let circ = OpticalCircuit::new(
            2,
            vec![
                OpticalElement::Pbs { modes: [0, 1] },
                OpticalElement::Hwp {
                    mode: 1,
                    angle_deg: 22.5,
                },
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&circ).unwrap();
        assert_eq!(OpticalCircuit::from_json(&text).unwrap(), circ);
    }

    #[test]
    fn two_photon_amplitudes_match_permanents() {
        use crate::rng::substream;
        use rand::Rng;
        let mut rng = substream(77, 0);
        for _ in 0..50 {
            let mut elements = Vec::new();
            for _ in 0..3 {
                let a = rng.random_range(0..3);
                let b = (a + rng.random_range(1..3)) % 3;
                elements.push(match rng.random_range(0..5) {
                    0 => OpticalElement::Ppbs {
                        modes: [a, b],
                        t_h: rng.random(),
                        t_v: rng.random(),
                    },
                    1 => OpticalElement::Bs {
                        modes: [a, b],
                        transmission: rng.random(),
                    },
                    2 => OpticalElement::Hwp {
                        mode: a,
                        angle_deg: rng.random_range(0.0..180.0),
                    },
                    3 => OpticalElement::Qwp {
                        mode: a,
                        angle_deg: rng.random_range(0.0..180.0),
                    },
                    _ => OpticalElement::Phase {
                        mode: a,
                        phase_rad: rng.random_range(0.0..6.3),
                        polarization: None,
                    },
                });
            }
            let circ = OpticalCircuit::new(3, elements).unwrap();
            let u = circ.unitary();
            let n = u.nrows();
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let out = FockState::from_photons(n, &[i, j]).unwrap().apply_unitary(&u).unwrap();
            assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
            let fact = |x: u8| if x == 2 { 2.0f64 } else { 1.0 };
            let in_mult = if i == j { 2.0f64 } else { 1.0 };
            for k in 0..n {
                for l in k..n {
                    let perm = u[(k, i)] * u[(l, j)] + u[(l, i)] * u[(k, j)];
                    let out_mult = if k == l { fact(2) } else { 1.0 };
                    let expected = perm / (in_mult * out_mult).sqrt();
                    let mut occ = vec![0u8; n];
                    occ[k] += 1;
                    occ[l] += 1;
                    assert!((out.amplitude(&occ) - expected).norm() < 1e-12);
                }
            }
        }
    }
}
