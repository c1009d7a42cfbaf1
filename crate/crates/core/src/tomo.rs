//! Single-qubit process tomography: prepare Pauli eigenstates, run the
//! pipeline under test shot by shot, measure in Pauli bases, and fit a chi
//! matrix.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::linalg::{self, c, psd_sqrt, CMatrix, C64};
use crate::qcore::{pauli_basis, Channel, ProcessMatrix, PureState, QcoreError};
use crate::rng::{substream, RandomStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomoError {
    #[error("pipeline failed for preparation {preparation}, basis {basis}: {message}")]
    Pipeline {
        preparation: PauliState,
        basis: PauliAxis,
        message: String,
    },
    #[error("settings are not informationally complete (rank {rank} of 16); missing: {missing:?}")]
    RankDeficient { rank: usize, missing: Vec<String> },
    #[error("plan needs at least one shot per setting")]
    NoShots,
    #[error("process matrix trace {0} is not 1")]
    NotNormalized(f64),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

/// The six Pauli eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PauliState {
    #[serde(rename = "+z")]
    ZPlus,
    #[serde(rename = "-z")]
    ZMinus,
    #[serde(rename = "+x")]
    XPlus,
    #[serde(rename = "-x")]
    XMinus,
    #[serde(rename = "+y")]
    YPlus,
    #[serde(rename = "-y")]
    YMinus,
}

impl PauliState {
    pub fn all() -> [PauliState; 6] {
        use PauliState::*;
        [ZPlus, ZMinus, XPlus, XMinus, YPlus, YMinus]
    }

    pub fn state(self) -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            PauliState::ZPlus => PureState::zero(),
            PauliState::ZMinus => PureState::one(),
            PauliState::XPlus => PureState::plus(),
            PauliState::XMinus => PureState::minus(),
            PauliState::YPlus => PureState::qubit(c(s, 0.0), c(0.0, s)),
            PauliState::YMinus => PureState::qubit(c(s, 0.0), c(0.0, -s)),
        }
    }
}

impl fmt::Display for PauliState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PauliState::ZPlus => "+z",
            PauliState::ZMinus => "-z",
            PauliState::XPlus => "+x",
            PauliState::XMinus => "-x",
            PauliState::YPlus => "+y",
            PauliState::YMinus => "-y",
        };
        f.write_str(s)
    }
}

/// Measurement axis. Outcome 0 is the +1 eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub fn all() -> [PauliAxis; 3] {
        [PauliAxis::X, PauliAxis::Y, PauliAxis::Z]
    }

    /// Eigenstate for `outcome` (0 = +1).
    pub fn eigenstate(self, outcome: bool) -> PureState {
        let (plus, minus) = match self {
            PauliAxis::X => (PauliState::XPlus, PauliState::XMinus),
            PauliAxis::Y => (PauliState::YPlus, PauliState::YMinus),
            PauliAxis::Z => (PauliState::ZPlus, PauliState::ZMinus),
        };
        if outcome { minus } else { plus }.state()
    }

    pub fn projector(self, outcome: bool) -> CMatrix {
        self.eigenstate(outcome).to_density().matrix().clone()
    }

    /// Probability of outcome 0 for a single-qubit state.
    pub fn p_plus(self, state: &PureState) -> f64 {
        state.fidelity(&self.eigenstate(false))
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauliAxis::X => "x",
            PauliAxis::Y => "y",
            PauliAxis::Z => "z",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoPlan {
    pub preparations: Vec<PauliState>,
    pub bases: Vec<PauliAxis>,
    pub shots_per_setting: u64,
}

impl TomoPlan {
    /// Six Pauli eigenstates times three Pauli bases.
    pub fn standard(shots_per_setting: u64) -> Self {
        Self {
            preparations: PauliState::all().to_vec(),
            bases: PauliAxis::all().to_vec(),
            shots_per_setting,
        }
    }

    pub fn settings(&self) -> Vec<(PauliState, PauliAxis)> {
        self.preparations
            .iter()
            .flat_map(|&p| self.bases.iter().map(move |&b| (p, b)))
            .collect()
    }
}

/// Result of one run of the pipeline under test.
#[derive(Debug, Clone)]
pub struct Shot {
    pub state: PureState,
    /// Failed post-selection attempts before this shot succeeded.
    pub discarded: u64,
}

/// Outcome counts for one `(preparation, basis)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub preparation: PauliState,
    pub basis: PauliAxis,
    pub counts: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    pub shots_per_setting: u64,
    /// Failed post-selection attempts over the whole run.
    pub discarded: u64,
    pub settings: Vec<SettingCounts>,
}

impl CountsTable {
    /// Replaces every setting's counts.
    pub fn map_counts<F: Fn(&SettingCounts) -> [f64; 2]>(&self, f: F) -> Self {
        Self {
            settings: self
                .settings
                .iter()
                .map(|s| SettingCounts {
                    counts: f(s),
                    ..s.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// Runs `pipeline` for every shot of every setting. Shot `i` (counting across
/// settings) uses substream `i` of `seed`, so counts do not depend on the
/// number of threads.
pub fn run_tomography<F, E>(pipeline: F, plan: &TomoPlan, seed: u64) -> Result<CountsTable, TomoError>
where
    F: Fn(&PureState, &mut RandomStream) -> Result<Shot, E> + Sync,
    E: fmt::Display,
{
    if plan.shots_per_setting == 0 {
        return Err(TomoError::NoShots);
    }
    let settings = plan.settings();
    let shots = plan.shots_per_setting;
    let results: Vec<Result<(bool, u64), TomoError>> = (0..settings.len() as u64 * shots)
        .into_par_iter()
        .map(|i| {
            let (prep, basis) = settings[(i / shots) as usize];
            let mut rng = substream(seed, i);
            let shot = pipeline(&prep.state(), &mut rng).map_err(|e| TomoError::Pipeline {
                preparation: prep,
                basis,
                message: e.to_string(),
            })?;
            let outcome = rng.random::<f64>() >= basis.p_plus(&shot.state);
            Ok((outcome, shot.discarded))
        })
        .collect();
    let mut table = CountsTable {
        shots_per_setting: shots,
        discarded: 0,
        settings: settings
            .iter()
            .map(|&(preparation, basis)| SettingCounts {
                preparation,
                basis,
                counts: [0.0; 2],
            })
            .collect(),
    };
    for (i, r) in results.into_iter().enumerate() {
        let (outcome, discarded) = r?;
        table.settings[i / shots as usize].counts[outcome as usize] += 1.0;
        table.discarded += discarded;
    }
    Ok(table)
}

/// Shot-by-shot simulation of a known channel: a Kraus branch is drawn with
/// its Born weight.
pub fn channel_pipeline(
    channel: &Channel,
) -> impl Fn(&PureState, &mut RandomStream) -> Result<Shot, QcoreError> + Sync + '_ {
    move |input, rng| {
        let v = input.to_vector();
        let mut u: f64 = rng.random();
        let mut last = None;
        for k in channel.kraus() {
            let out = k * &v;
            let p = out.norm_squared();
            if p > 0.0 {
                last = Some(out.clone());
            }
            if u < p {
                return Ok(Shot {
                    state: PureState::normalized(out.iter().copied().collect())?,
                    discarded: 0,
                });
            }
            u -= p;
        }
        let out = last.ok_or(QcoreError::ZeroNorm)?;
        Ok(Shot {
            state: PureState::normalized(out.iter().copied().collect())?,
            discarded: 0,
        })
    }
}

/// Exact expected counts of a process for a plan.
pub fn expected_counts(process: &ProcessMatrix, plan: &TomoPlan) -> CountsTable {
    let n = plan.shots_per_setting as f64;
    CountsTable {
        shots_per_setting: plan.shots_per_setting,
        discarded: 0,
        settings: plan
            .settings()
            .into_iter()
            .map(|(preparation, basis)| {
                let out = process.apply(preparation.state().to_density().matrix());
                let p0 = linalg::trace(&(basis.projector(false) * &out)).re;
                SettingCounts {
                    preparation,
                    basis,
                    counts: [n * p0, n * (1.0 - p0)],
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Least-squares linear inversion, projected to the nearest physical chi.
    #[default]
    LinearInversion,
    /// Linear inversion followed by projected-gradient likelihood ascent.
    MaximumLikelihood,
}

/// `A[m,n] = Tr(Pi sigma_m rho sigma_n)`, so that `p = sum_mn chi_mn A[m,n]`.
fn design_block(rho: &CMatrix, projector: &CMatrix) -> CMatrix {
    let s = pauli_basis();
    CMatrix::from_fn(4, 4, |m, n| linalg::trace(&(projector * &s[m] * rho * &s[n])))
}

/// Hermitian basis of 4x4 matrices; chi = sum_k theta_k G_k with real theta.
fn hermitian_basis() -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(16);
    for m in 0..4 {
        for n in m..4 {
            let mut g = CMatrix::zeros(4, 4);
            if m == n {
                g[(m, m)] = c(1.0, 0.0);
                out.push(g);
            } else {
                g[(m, n)] = c(1.0, 0.0);
                g[(n, m)] = c(1.0, 0.0);
                out.push(g);
                let mut h = CMatrix::zeros(4, 4);
                h[(m, n)] = c(0.0, 1.0);
                h[(n, m)] = c(0.0, -1.0);
                out.push(h);
            }
        }
    }
    out
}

struct Observation {
    block: CMatrix,
    count: f64,
    frequency: f64,
}

fn observations(counts: &CountsTable) -> Vec<Observation> {
    let mut out = Vec::new();
    for s in &counts.settings {
        let total = s.counts[0] + s.counts[1];
        if total <= 0.0 {
            continue;
        }
        let rho = s.preparation.state().to_density().matrix().clone();
        for (o, &n) in s.counts.iter().enumerate() {
            out.push(Observation {
                block: design_block(&rho, &s.basis.projector(o == 1)),
                count: n,
                frequency: n / total,
            });
        }
    }
    out
}

fn probability(chi: &CMatrix, block: &CMatrix) -> f64 {
    chi.iter().zip(block.iter()).map(|(x, a)| x * a).sum::<C64>().re
}

fn missing_settings(counts: &CountsTable) -> Vec<String> {
    let present: BTreeSet<(PauliState, PauliAxis)> = counts
        .settings
        .iter()
        .filter(|s| s.counts[0] + s.counts[1] > 0.0)
        .map(|s| (s.preparation, s.basis))
        .collect();
    TomoPlan::standard(1)
        .settings()
        .into_iter()
        .filter(|k| !present.contains(k))
        .map(|(p, b)| format!("{p}/{b}"))
        .collect()
}

/// Hermitian matrices `B_j` with `<B_j, chi> = Tr(sigma_j sum_mn chi_mn sigma_n sigma_m) / 2`;
/// the map is trace preserving when these read `(1, 0, 0, 0)`.
fn trace_preserving_functionals() -> [CMatrix; 4] {
    let s = pauli_basis();
    std::array::from_fn(|j| {
        let k = CMatrix::from_fn(4, 4, |m, n| linalg::trace(&(&s[j] * &s[n] * &s[m])) * 0.5);
        (k.conjugate() + k.transpose()).scale(0.5)
    })
}

fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn project_trace_preserving(chi: &CMatrix, functionals: &[CMatrix; 4]) -> CMatrix {
    let gram = nalgebra::Matrix4::from_fn(|j, k| inner(&functionals[j], &functionals[k]));
    let residual = nalgebra::Vector4::from_fn(|j, _| inner(&functionals[j], chi) - if j == 0 { 1.0 } else { 0.0 });
    let coeffs = gram.try_inverse().expect("independent constraints") * residual;
    functionals
        .iter()
        .zip(coeffs.iter())
        .fold(chi.clone(), |acc, (b, &x)| acc - b.scale(x))
}

fn project_psd(chi: &CMatrix) -> CMatrix {
    let (values, vectors) = linalg::hermitian_eigen(chi);
    let diag = DVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v.max(0.0), 0.0)));
    &vectors * CMatrix::from_diagonal(&diag) * vectors.adjoint()
}

/// Nearest completely positive, trace-preserving chi (Dykstra's alternating
/// projections between the PSD cone and the trace-preserving affine set).
pub fn project_cptp(chi: &CMatrix) -> CMatrix {
    let functionals = trace_preserving_functionals();
    let herm = (chi + chi.adjoint()).scale(0.5);
    let mut x = herm;
    let mut p = CMatrix::zeros(4, 4);
    let mut q = CMatrix::zeros(4, 4);
    for _ in 0..20_000 {
        let y = project_trace_preserving(&(&x + &p), &functionals);
        p = &x + &p - &y;
        let next = project_psd(&(&y + &q));
        q = &y + &q - &next;
        let moved = linalg::max_abs_diff(&next, &x);
        let gap = linalg::max_abs_diff(&next, &y);
        x = next;
        if moved < 1e-13 && gap < 1e-11 {
            break;
        }
    }
    let tr = linalg::trace(&x).re;
    x.scale(1.0 / tr)
}

/// Fits chi to the observed frequencies.
pub fn reconstruct(counts: &CountsTable, method: Reconstruction) -> Result<ProcessMatrix, TomoError> {
    let obs = observations(counts);
    let basis = hermitian_basis();
    let design = DMatrix::from_fn(obs.len(), 16, |r, k| probability(&basis[k], &obs[r].block));
    let rhs = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.frequency));
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-9 * max_sv.max(1e-300))
        .count();
    if rank < 16 {
        return Err(TomoError::RankDeficient {
            rank,
            missing: missing_settings(counts),
        });
    }
    let theta = svd.solve(&rhs, 1e-12).map_err(|_| QcoreError::Singular)?;
    let raw = basis
        .iter()
        .zip(theta.iter())
        .fold(CMatrix::zeros(4, 4), |acc, (g, t)| acc + g.scale(*t));
    let mut chi = project_cptp(&raw);
    if method == Reconstruction::MaximumLikelihood {
        chi = likelihood_ascent(chi, &obs);
    }
    Ok(ProcessMatrix::new(chi)?)
}

fn log_likelihood(chi: &CMatrix, obs: &[Observation]) -> f64 {
    obs.iter()
        .filter(|o| o.count > 0.0)
        .map(|o| o.count * probability(chi, &o.block).max(1e-12).ln())
        .sum()
}

fn likelihood_ascent(mut chi: CMatrix, obs: &[Observation]) -> CMatrix {
    let total: f64 = obs.iter().map(|o| o.count).sum::<f64>().max(1.0);
    let mut step = 1.0;
    let mut current = log_likelihood(&chi, obs);
    for _ in 0..500 {
        let mut grad = CMatrix::zeros(4, 4);
        for o in obs.iter().filter(|o| o.count > 0.0) {
            let p = probability(&chi, &o.block).max(1e-12);
            // p = Tr(chi H) with H the Hermitian part of A^T.
            let h = (o.block.transpose() + o.block.conjugate()).scale(0.5);
            grad += h.scale(o.count / p / total);
        }
        let mut improved = false;
        while step > 1e-8 {
            let candidate = project_cptp(&(&chi + grad.scale(step)));
            let value = log_likelihood(&candidate, obs);
            if value > current + 1e-12 {
                chi = candidate;
                current = value;
                improved = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    chi
}

/// Average gate fidelity `(2 F_e + 1)/3` with `F_e = Tr(chi_U chi)`.
pub fn average_fidelity(chi: &ProcessMatrix, target: &CMatrix) -> Result<f64, TomoError> {
    let tr = chi.trace();
    if (tr - 1.0).abs() > 1e-6 {
        return Err(TomoError::NotNormalized(tr));
    }
    let ideal = ProcessMatrix::from_unitary(target)?;
    let fe = linalg::trace(&(ideal.chi() * chi.chi())).re;
    Ok((2.0 * fe + 1.0) / 3.0)
}

/// Uhlmann fidelity between two trace-one chi matrices,
/// `(Tr sqrt(sqrt(chi1) chi2 sqrt(chi1)))^2`.
pub fn process_fidelity(a: &ProcessMatrix, b: &ProcessMatrix) -> Result<f64, TomoError> {
    for m in [a, b] {
        if (m.trace() - 1.0).abs() > 1e-6 {
            return Err(TomoError::NotNormalized(m.trace()));
        }
    }
    let sa = psd_sqrt(a.chi());
    let (values, _) = linalg::hermitian_eigen(&(&sa * b.chi() * &sa));
    let top = values.iter().cloned().fold(0.0, f64::max);
    // Rounding noise on a rank-deficient product would otherwise add sqrt(eps).
    let root_sum: f64 = values.iter().filter(|&&v| v > 1e-12 * top).map(|v| v.sqrt()).sum();
    Ok(root_sum.powi(2))
}

/// One sampled input point and its image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub input: [f64; 3],
    pub output: [f64; 3],
    /// Latitude ring of the input, for coloring.
    pub color: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochMapExport {
    pub points: Vec<BlochPoint>,
}

/// Maps a latitude/longitude grid of pure states through `chi` using its
/// affine Bloch representation.
pub fn bloch_export(chi: &ProcessMatrix, latitudes: usize, longitudes: usize) -> BlochMapExport {
    let (t, m) = chi.bloch_affine();
    let mut points = Vec::with_capacity(latitudes * longitudes);
    for i in 0..latitudes {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / latitudes as f64;
        for j in 0..longitudes {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / longitudes as f64;
            let input = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let mut output = t;
            for (r, row) in m.iter().enumerate() {
                output[r] += row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>();
            }
            points.push(BlochPoint {
                input,
                output,
                color: i,
            });
        }
    }
    BlochMapExport { points }
}
