use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qfhe::evaluator::CanonicalCircuit;
use qfhe::experiment::{self, BackendKind, CalibrationOptions, CaseConfig};
use qfhe::fhe::{selftest, FheParams};
use qfhe::optics::NoiseParams;
use qfhe::tomo::{self, Reconstruction};
use qfhe::tpsc::{self, ProtocolConfig, SweepSpec};

mod output;

/// Simulated experiments on encrypted single-qubit circuits and the two-party
/// overlap protocol.
#[derive(Debug, Parser)]
#[command(name = "qfhe", version)]
struct Cli {
    /// Worker threads for shot-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Process tomography of an encrypted circuit.
    Case(CaseArgs),
    /// Overlap sweep of the two-party protocol.
    Tpsc(TpscArgs),
    /// Photonic gate figures of merit against two-photon visibility.
    Hom(HomArgs),
    /// Functional checks of the classical encryption layer.
    FheSelftest(FheArgs),
    /// Fit background rates to the reference two-ancilla fidelity.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseName {
    T,
    Th,
    Thp,
}

impl From<CaseName> for CanonicalCircuit {
    fn from(c: CaseName) -> Self {
        match c {
            CaseName::T => CanonicalCircuit::T,
            CaseName::Th => CanonicalCircuit::Th,
            CaseName::Thp => CanonicalCircuit::Thp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Qubit,
    Optics,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Qubit => BackendKind::Qubit,
            BackendArg::Optics => BackendKind::Optics,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReconstructionArg {
    /// Least-squares inversion projected onto physical maps.
    Linear,
    /// Linear inversion refined by maximum likelihood.
    Mle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FheArg {
    Mock,
    Lwe,
}

impl From<FheArg> for FheParams {
    fn from(f: FheArg) -> Self {
        match f {
            FheArg::Mock => FheParams::mock(),
            FheArg::Lwe => FheParams::lwe_default(),
        }
    }
}

/// `ideal`, `visibility`, `paper-defaults`, or a JSON file of noise
/// parameters.
#[derive(Debug, Clone, PartialEq)]
enum NoiseSpec {
    Ideal,
    Visibility,
    Calibrated,
    File(PathBuf),
}

impl std::str::FromStr for NoiseSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ideal" => NoiseSpec::Ideal,
            "visibility" => NoiseSpec::Visibility,
            "paper-defaults" => NoiseSpec::Calibrated,
            path if path.ends_with(".json") => NoiseSpec::File(path.into()),
            other => return Err(format!("unknown noise model `{other}`")),
        })
    }
}

impl NoiseSpec {
    fn resolve(&self) -> Result<NoiseParams, Failure> {
        match self {
            NoiseSpec::Ideal => Ok(NoiseParams::ideal()),
            NoiseSpec::Visibility => Ok(NoiseParams::visibility_only()),
            NoiseSpec::Calibrated => Ok(experiment::calibrated_defaults()?),
            NoiseSpec::File(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                let noise: NoiseParams =
                    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                noise.validate().map_err(|e| Failure::Usage(e.to_string()))?;
                Ok(noise)
            }
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_enum, default_value = "qubit")]
    backend: BackendArg,
    /// Noise model for the optics backend.
    #[arg(long, default_value = "ideal")]
    noise: NoiseSpec,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mock")]
    fhe: FheArg,
    /// Decrypt with an unrelated key.
    #[arg(long)]
    wrong_key: bool,
}

impl Common {
    fn noise(&self) -> Result<NoiseParams, Failure> {
        if matches!(self.backend, BackendArg::Qubit) && self.noise != NoiseSpec::Ideal {
            return Err(Failure::Usage("--noise applies only to --backend optics".into()));
        }
        self.noise.resolve()
    }
}

#[derive(Debug, Args)]
struct CaseArgs {
    #[arg(value_enum)]
    case: CaseName,
    #[command(flatten)]
    common: Common,
    /// Shots per tomography setting.
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    /// Subtract the modeled background before reconstruction.
    #[arg(long)]
    background_subtract: bool,
    #[arg(long, value_enum, default_value = "mle")]
    reconstruction: ReconstructionArg,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TpscArgs {
    #[command(flatten)]
    common: Common,
    /// Copies per sweep point.
    #[arg(long, default_value_t = 960)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Bloch length of Bob's states; below 1 they are mixed.
    #[arg(long, default_value_t = 1.0)]
    bloch_length: f64,
    /// Return results in copy order.
    #[arg(long)]
    no_shuffle: bool,
    #[arg(long, default_value = "out/tpsc_sweep.csv")]
    out: PathBuf,
    /// Also write the message transcript of the first point.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HomArgs {
    /// Visibility steps between 0 and 1.
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Random phase pairs averaged per phase-add row.
    #[arg(long, default_value_t = 20)]
    phase_pairs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out/hom.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FheArgs {
    #[arg(long, value_enum, default_value = "lwe")]
    fhe: FheArg,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = CalibrationOptions::default().shots_per_setting)]
    shots: u64,
    #[arg(long, default_value_t = CalibrationOptions::default().seed)]
    seed: u64,
    /// Target average fidelity of the two-ancilla circuit.
    #[arg(long, default_value_t = CalibrationOptions::default().target_fidelity)]
    target: f64,
    #[arg(long, default_value_t = CalibrationOptions::default().accidental_per_double_pair)]
    accidental_ratio: f64,
    #[arg(long, default_value = "out/calibration.json")]
    out: PathBuf,
}

/// Why a command stopped. Usage problems exit with 2, everything else with 1.
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Domain(m) => f.write_str(m),
        }
    }
}

#[derive(Serialize)]
struct BlochCsvRow {
    input_x: f64,
    input_y: f64,
    input_z: f64,
    output_x: f64,
    output_y: f64,
    output_z: f64,
    color: usize,
}

fn case(args: &CaseArgs) -> Result<(), Failure> {
    let noise = args.common.noise()?;
    if args.shots == 0 {
        return Err(Failure::Usage("--shots must be positive".into()));
    }
    let circuit: CanonicalCircuit = args.case.into();
    let config = CaseConfig {
        case: circuit,
        backend: args.common.backend.into(),
        noise,
        fhe: args.common.fhe.into(),
        shots_per_setting: args.shots,
        seed: args.common.seed,
        wrong_key: args.common.wrong_key,
        background_subtract: args.background_subtract,
        reconstruction: match args.reconstruction {
            ReconstructionArg::Linear => Reconstruction::LinearInversion,
            ReconstructionArg::Mle => Reconstruction::MaximumLikelihood,
        },
    };
    let report = experiment::run_case(&config)?;
    let name = circuit.name().to_lowercase();
    output::write_json(
        &args.out.join(format!("case_{name}.json")),
        &report,
        output::CASE_REPORT,
    )?;
    let rows: Vec<BlochCsvRow> = tomo::bloch_export(&report.chi, 9, 16)
        .points
        .into_iter()
        .map(|p| BlochCsvRow {
            input_x: p.input[0],
            input_y: p.input[1],
            input_z: p.input[2],
            output_x: p.output[0],
            output_y: p.output[1],
            output_z: p.output[2],
            color: p.color,
        })
        .collect();
    output::write_csv(
        &args.out.join(format!("case_{name}_bloch.csv")),
        &rows,
        output::BLOCH_ROW,
    )?;
    println!(
        "case {name} backend {} shots {} wrong_key {} background_subtracted {}",
        report.config.backend.name(),
        args.shots,
        args.common.wrong_key,
        args.background_subtract
    );
    println!("average fidelity vs ideal  {:.4}", report.fidelity);
    println!("fidelity vs depolarizing   {:.4}", report.fidelity_depolarizing);
    println!("discarded attempts         {}", report.counts.discarded);
    Ok(())
}

fn tpsc_cmd(args: &TpscArgs) -> Result<(), Failure> {
    let noise = args.common.noise()?;
    if args.n == 0 || args.points == 0 {
        return Err(Failure::Usage("--n and --points must be positive".into()));
    }
    if !(0.0..=1.0).contains(&args.bloch_length) {
        return Err(Failure::Usage("--bloch-length must lie in [0, 1]".into()));
    }
    let config = ProtocolConfig {
        n: args.n,
        shuffle: !args.no_shuffle,
        backend: args.common.backend.into(),
        noise,
        fhe: args.common.fhe.into(),
        alice_seed: args.common.seed,
        bob_seed: args.common.seed.wrapping_add(1),
        wrong_key: args.common.wrong_key,
    };
    let spec = SweepSpec {
        points: args.points,
        bob_bloch_length: args.bloch_length,
    };
    let rows = tpsc::sweep(&spec, &config)?;
    output::write_csv(&args.out, &rows, output::SWEEP_ROW)?;
    if let Some(path) = &args.transcript {
        let (a, b) = spec.states()?.swap_remove(0);
        let (_, _, transcript) = tpsc::run_protocol(&a, &b, &spec.point_config(&config, 0))?;
        output::write_json(path, &transcript, output::TPSC_TRANSCRIPT)?;
    }
    let worst = rows.iter().map(|r| (r.estimate - r.expected).abs()).fold(0.0, f64::max);
    println!(
        "{} points, n = {}, max |estimate - (1 - D2)| = {worst:.4}",
        rows.len(),
        args.n
    );
    Ok(())
}

fn hom(args: &HomArgs) -> Result<(), Failure> {
    if args.steps == 0 {
        return Err(Failure::Usage("--steps must be positive".into()));
    }
    let rows = (0..=args.steps)
        .map(|i| experiment::hom_row(i as f64 / args.steps as f64, args.phase_pairs, args.seed))
        .collect::<Result<Vec<_>, _>>()?;
    output::write_csv(&args.out, &rows, output::HOM_ROW)?;
    println!("{} rows written to {}", rows.len(), args.out.display());
    Ok(())
}

fn fhe_selftest(args: &FheArgs) -> Result<(), Failure> {
    if args.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let report = selftest::self_test(&args.fhe.into(), args.samples, args.seed)?;
    print!("{}", output::to_json(&report, output::FHE_SELFTEST)?);
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Domain("self-test failed".into()))
    }
}

fn calibrate(args: &CalibrateArgs) -> Result<(), Failure> {
    if args.shots == 0 || args.accidental_ratio < 0.0 {
        return Err(Failure::Usage(
            "--shots must be positive and --accidental-ratio non-negative".into(),
        ));
    }
    let options = CalibrationOptions {
        target_fidelity: args.target,
        accidental_per_double_pair: args.accidental_ratio,
        shots_per_setting: args.shots,
        seed: args.seed,
        ..CalibrationOptions::default()
    };
    let cal = experiment::calibrate(&options)?;
    output::write_json(&args.out, &cal, output::CALIBRATION)?;
    println!("visibility-only fidelity   {:.4}", cal.visibility_only_fidelity);
    println!("double-pair rate           {:.6}", cal.noise.double_pair_rate);
    println!("accidental rate            {:.6}", cal.noise.accidental_rate);
    for c in &cal.cases {
        println!(
            "{:<4} background ratio {:.4}, depolarizing weight {:.4}",
            c.case.name(),
            c.background_ratio,
            c.depolarizing_weight
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Domain(e.to_string()))?;
    }
    match &cli.command {
        Command::Case(a) => case(a),
        Command::Tpsc(a) => tpsc_cmd(a),
        Command::Hom(a) => hom(a),
        Command::FheSelftest(a) => fhe_selftest(a),
        Command::Calibrate(a) => calibrate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(match f {
                Failure::Usage(_) => 2,
                Failure::Domain(_) => 1,
            })
        }
    }
}
