//! End-to-end runs: the encrypted pipeline under tomography, spurious
//! background injection, and calibration of the background rates.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{
    decrypt_output, evaluate, prepare_with_keys, AliceSecret, Backend, CanonicalCircuit, Circuit, EvalError,
};
use crate::fhe::{self, FheKeyPair, FheParams};
use crate::optics::{background_model, background_subtract, Exposure, NoiseParams, OpticsError};
use crate::qcore::{ProcessMatrix, PureState};
use crate::rng::{stream, substream, RandomStream};
use crate::tomo::{self, CountsTable, Reconstruction, Shot, TomoError, TomoPlan};

/// Attempts allowed per shot before a run is abandoned.
pub const MAX_ATTEMPTS: u64 = 100_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tomo(#[from] TomoError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Fhe(#[from] fhe::FheError),
    #[error("calibration impossible: {0}")]
    Calibration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Qubit,
    Optics,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Qubit => "qubit",
            BackendKind::Optics => "optics",
        }
    }

    pub fn build(self, noise: &NoiseParams) -> Result<Backend, EvalError> {
        match self {
            BackendKind::Qubit => Ok(Backend::Qubit),
            BackendKind::Optics => Backend::optics(*noise),
        }
    }
}

/// Photon resources behind one run of a canonical circuit. The data photon
/// and one ancilla come from one down-conversion pair; the two-ancilla case
/// needs a second pair, a third detector, and the phase-add post-selection.
pub fn exposure(case: CanonicalCircuit) -> Exposure {
    match case {
        CanonicalCircuit::T | CanonicalCircuit::Th => Exposure {
            pairs: 1,
            detectors: 2,
            success_probability: 1.0 / 9.0,
        },
        CanonicalCircuit::Thp => Exposure {
            pairs: 2,
            detectors: 3,
            success_probability: 1.0 / 18.0,
        },
    }
}

/// One shot of prepare, evaluate, decrypt. A failed post-selection discards
/// the attempt and starts over with fresh pads.
pub fn run_shot(
    plaintext: &PureState,
    circuit: &Circuit,
    backend: &Backend,
    keys: &FheKeyPair,
    decrypt_with: Option<&FheKeyPair>,
    rng: &mut RandomStream,
) -> Result<Shot, EvalError> {
    let mut discarded = 0;
    loop {
        let (ciphertext, eval_key, secret) = prepare_with_keys(plaintext, keys.clone(), rng)?;
        match evaluate(&ciphertext, &eval_key, circuit, backend, rng) {
            Ok(transcript) => {
                let secret = match decrypt_with {
                    Some(k) => AliceSecret {
                        fhe: k.clone(),
                        ..secret
                    },
                    None => secret,
                };
                return Ok(Shot {
                    state: decrypt_output(&transcript, &secret)?,
                    discarded,
                });
            }
            Err(e) if e.is_retriable() && discarded + 1 < MAX_ATTEMPTS => discarded += 1,
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub case: CanonicalCircuit,
    pub backend: BackendKind,
    pub noise: NoiseParams,
    pub fhe: FheParams,
    pub shots_per_setting: u64,
    pub seed: u64,
    /// Decrypt the output pads with an unrelated FHE secret key.
    pub wrong_key: bool,
    pub background_subtract: bool,
    pub reconstruction: Reconstruction,
}

impl CaseConfig {
    pub fn new(case: CanonicalCircuit, backend: BackendKind, noise: NoiseParams) -> Self {
        Self {
            case,
            backend,
            noise,
            fhe: FheParams::mock(),
            shots_per_setting: 2000,
            seed: 1,
            wrong_key: false,
            background_subtract: false,
            reconstruction: Reconstruction::LinearInversion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub config: CaseConfig,
    /// Detected counts, including injected background.
    pub counts: CountsTable,
    /// Expected background per setting and outcome, when any was injected.
    pub expected_background: Option<CountsTable>,
    /// Counts fed to the reconstruction.
    pub analyzed: CountsTable,
    pub chi: ProcessMatrix,
    pub fidelity: f64,
    pub fidelity_depolarizing: f64,
}

/// Streams reserved for the key pairs and background sampling, far from the
/// per-shot substreams.
const KEY_STREAM: u64 = u64::MAX;
const WRONG_KEY_STREAM: u64 = u64::MAX - 1;
const BACKGROUND_STREAM: u64 = u64::MAX - 2;

/// Tomography of the encrypted pipeline for one canonical circuit.
pub fn run_case(config: &CaseConfig) -> Result<CaseReport, ExperimentError> {
    let circuit = Circuit::canonical(config.case);
    let backend = config.backend.build(&config.noise)?;
    let keys = fhe::keygen(&config.fhe, &mut substream(config.seed, KEY_STREAM))?;
    let wrong = if config.wrong_key {
        Some(fhe::keygen(&config.fhe, &mut substream(config.seed, WRONG_KEY_STREAM))?)
    } else {
        None
    };
    let plan = TomoPlan::standard(config.shots_per_setting);
    let signal = tomo::run_tomography(
        |input: &PureState, rng: &mut RandomStream| run_shot(input, &circuit, &backend, &keys, wrong.as_ref(), rng),
        &plan,
        config.seed,
    )?;

    let (counts, expected_background) = if config.backend == BackendKind::Optics && config.noise.has_background() {
        let (counts, expected) = inject_background(&signal, &config.noise, &exposure(config.case), config.seed)?;
        (counts, Some(expected))
    } else {
        (signal, None)
    };
    analyze(config.clone(), counts, expected_background)
}

fn analyze(
    config: CaseConfig,
    counts: CountsTable,
    expected_background: Option<CountsTable>,
) -> Result<CaseReport, ExperimentError> {
    let analyzed = match (&expected_background, config.background_subtract) {
        (Some(expected), true) => subtract(&counts, expected),
        _ => counts.clone(),
    };
    let chi = tomo::reconstruct(&analyzed, config.reconstruction)?;
    let fidelity = tomo::average_fidelity(&chi, &Circuit::canonical(config.case).unitary())?;
    let fidelity_depolarizing = tomo::process_fidelity(&chi, &ProcessMatrix::depolarizing())?;
    Ok(CaseReport {
        config,
        counts,
        expected_background,
        analyzed,
        chi,
        fidelity,
        fidelity_depolarizing,
    })
}

impl CaseReport {
    /// Reanalyzes the same detected counts with or without subtraction.
    pub fn with_subtraction(&self, subtract: bool) -> Result<CaseReport, ExperimentError> {
        let mut config = self.config.clone();
        config.background_subtract = subtract;
        analyze(config, self.counts.clone(), self.expected_background.clone())
    }
}

/// Adds Poisson-distributed spurious counts to every setting. Returns the
/// noisy table and the expected background.
pub fn inject_background(
    signal: &CountsTable,
    noise: &NoiseParams,
    exposure: &Exposure,
    seed: u64,
) -> Result<(CountsTable, CountsTable), OpticsError> {
    let mut expected = signal.clone();
    for s in &mut expected.settings {
        let b = background_model(&s.counts, noise, exposure)?;
        s.counts = [b[0], b[1]];
    }
    let mut rng = substream(seed, BACKGROUND_STREAM);
    let mut noisy = signal.clone();
    for (s, e) in noisy.settings.iter_mut().zip(&expected.settings) {
        for k in 0..2 {
            if e.counts[k] > 0.0 {
                let poisson = Poisson::new(e.counts[k]).expect("positive mean");
                s.counts[k] += poisson.sample(&mut rng);
            }
        }
    }
    Ok((noisy, expected))
}

pub fn subtract(raw: &CountsTable, expected: &CountsTable) -> CountsTable {
    let mut out = raw.clone();
    for (s, e) in out.settings.iter_mut().zip(&expected.settings) {
        let c = background_subtract(&s.counts, &e.counts);
        s.counts = [c[0], c[1]];
    }
    out
}

/// Settings of the background calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Average fidelity the two-ancilla circuit should reach with background.
    pub target_fidelity: f64,
    /// Fixed ratio of accidental to double-pair rate.
    pub accidental_per_double_pair: f64,
    pub visibility_intra: f64,
    pub visibility_inter: f64,
    /// Shots per setting of the visibility-only tomography.
    pub shots_per_setting: u64,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            target_fidelity: 0.83,
            accidental_per_double_pair: 0.25,
            visibility_intra: crate::optics::noise::VISIBILITY_INTRA,
            visibility_inter: crate::optics::noise::VISIBILITY_INTER,
            shots_per_setting: 5_000,
            seed: 2017,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseExposure {
    pub case: CanonicalCircuit,
    /// Spurious events per signal event at the calibrated rates.
    pub background_ratio: f64,
    /// Weight of the depolarizing admixture, `b/(1+b)`.
    pub depolarizing_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub options: CalibrationOptions,
    /// Two-ancilla circuit fidelity with imperfect interference only.
    pub visibility_only_fidelity: f64,
    pub noise: NoiseParams,
    pub cases: Vec<CaseExposure>,
}

/// Measures the visibility-only fidelity of the two-ancilla circuit, then
/// picks background rates that bring it to the target.
///
/// Uniform background at `b` spurious events per signal event turns the
/// reconstructed channel into `(1-w) E + w D` with `w = b/(1+b)` and `D` the
/// fully depolarizing channel, so `F = (1-w) F_vis + w/2`.
pub fn calibrate(options: &CalibrationOptions) -> Result<Calibration, ExperimentError> {
    let vis = NoiseParams {
        visibility_intra: options.visibility_intra,
        visibility_inter: options.visibility_inter,
        double_pair_rate: 0.0,
        accidental_rate: 0.0,
    };
    let mut config = CaseConfig::new(CanonicalCircuit::Thp, BackendKind::Optics, vis);
    config.shots_per_setting = options.shots_per_setting;
    config.seed = options.seed;
    let f_vis = run_case(&config)?.fidelity;
    if !(options.target_fidelity > 0.5 && options.target_fidelity <= f_vis) {
        return Err(ExperimentError::Calibration(format!(
            "target {} is not between 0.5 and the visibility-only fidelity {f_vis}",
            options.target_fidelity
        )));
    }
    let w = (f_vis - options.target_fidelity) / (f_vis - 0.5);
    let ratio = w / (1.0 - w);
    let unit = vis.with_rates(1.0, options.accidental_per_double_pair);
    let double_pair_rate = ratio / exposure(CanonicalCircuit::Thp).background_ratio(&unit);
    let noise = vis.with_rates(double_pair_rate, options.accidental_per_double_pair * double_pair_rate);
    let cases = CanonicalCircuit::all()
        .into_iter()
        .map(|case| {
            let b = exposure(case).background_ratio(&noise);
            CaseExposure {
                case,
                background_ratio: b,
                depolarizing_weight: b / (1.0 + b),
            }
        })
        .collect();
    Ok(Calibration {
        options: *options,
        visibility_only_fidelity: f_vis,
        noise,
        cases,
    })
}

/// Visibilities of the reference setup with background rates from
/// [`calibrate`] at its default options. Computed once per process.
pub fn calibrated_defaults() -> Result<NoiseParams, ExperimentError> {
    static CACHE: OnceLock<Result<NoiseParams, String>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            calibrate(&CalibrationOptions::default())
                .map(|c| c.noise)
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(ExperimentError::Calibration)
}

/// One row of a visibility sweep of the photonic gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomRow {
    pub visibility: f64,
    /// Coincidence probability behind a balanced beamsplitter.
    pub hom_coincidence: f64,
    /// Post-selection probability of the controlled-Z, averaged over
    /// computational inputs.
    pub cz_success: f64,
    /// Process fidelity of the normalized controlled-Z map to CZ.
    pub cz_fidelity: f64,
    pub phase_add_success: f64,
    /// Mean fidelity of the heralded phase-add output to its target.
    pub phase_add_fidelity: f64,
}

/// Gate figures of merit at `visibility`. Phase-add numbers average over
/// `phase_pairs` random equatorial input pairs.
pub fn hom_row(visibility: f64, phase_pairs: usize, seed: u64) -> Result<HomRow, OpticsError> {
    use crate::optics::{hom_coincidence, pbs_phase_add, phase_add_target, ppbs_cz};
    let cz = ppbs_cz(visibility)?;
    let mut cz_success = 0.0;
    for i in 0..4 {
        let s = PureState::basis(2, i).expect("two qubits");
        cz_success += cz.success_probability(&s) / 4.0;
    }
    let cz_fidelity = cz_process_fidelity(&cz)?;
    let mut rng = stream(seed);
    let (mut success, mut fidelity) = (0.0, 0.0);
    for _ in 0..phase_pairs {
        let alpha: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let beta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let outcomes = pbs_phase_add(alpha, beta, visibility)?;
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        success += total;
        fidelity += outcomes
            .iter()
            .map(|o| o.probability * o.output.fidelity_pure(&phase_add_target(alpha, beta, o.k1)))
            .sum::<f64>()
            / total;
    }
    let n = phase_pairs.max(1) as f64;
    Ok(HomRow {
        visibility,
        hom_coincidence: hom_coincidence(visibility)?,
        cz_success,
        cz_fidelity,
        phase_add_success: success / n,
        phase_add_fidelity: fidelity / n,
    })
}

/// Process fidelity of a normalized two-qubit post-selected map to CZ,
/// from the Choi state of the map on a maximally entangled input.
fn cz_process_fidelity(map: &crate::optics::PostSelectedMap) -> Result<f64, OpticsError> {
    use crate::qcore::linalg::CMatrix;
    use crate::qcore::Gate;
    let cz = Gate::cz(0, 1).matrix().clone();
    let mut total = 0.0;
    let mut overlap = 0.0;
    for branch in &map.branches {
        // |<<CZ|K>>|^2 / d^2 with the Hilbert-Schmidt inner product.
        let k: &CMatrix = &branch.kraus;
        let ip = (cz.adjoint() * k).trace();
        overlap += ip.norm_sqr();
        total += (k.adjoint() * k).trace().re * 4.0;
    }
    Ok(overlap / total)
}
