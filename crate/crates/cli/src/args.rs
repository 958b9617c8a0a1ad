use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvkit::C64;
use serde::Serialize;

/// Structured arguments accept inline JSON or a path to a JSON file.
pub type Doc = String;

#[derive(Parser, Debug)]
#[command(name = "cvkit", version, about = "Continuous-variable and linear-optics numerics")]
pub struct Cli {
    /// Seed for every random draw; required by sampling verbs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the artifact here instead of (csv) or in addition to (json) stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub tol: TolArgs,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Default, Serialize)]
pub struct TolArgs {
    #[arg(long = "tol.unitarity", global = true, value_name = "V")]
    pub unitarity: Option<f64>,
    #[arg(long = "tol.normalization", global = true, value_name = "V")]
    pub normalization: Option<f64>,
    #[arg(long = "tol.symmetry", global = true, value_name = "V")]
    pub symmetry: Option<f64>,
    #[arg(long = "tol.condition", global = true, value_name = "V")]
    pub condition: Option<f64>,
    #[arg(long = "tol.negative_density", global = true, value_name = "V")]
    pub negative_density: Option<f64>,
    #[arg(long = "tol.contour_floor", global = true, value_name = "V")]
    pub contour_floor: Option<f64>,
    #[arg(long = "tol.residue", global = true, value_name = "V")]
    pub residue: Option<f64>,
    #[arg(long = "tol.optimizer", global = true, value_name = "V")]
    pub optimizer: Option<f64>,
    #[arg(long = "tol.acceptance", global = true, value_name = "V")]
    pub acceptance: Option<f64>,
}

impl TolArgs {
    pub fn overrides(&self) -> Vec<(&'static str, f64)> {
        let all = [
            ("unitarity", self.unitarity),
            ("normalization", self.normalization),
            ("symmetry", self.symmetry),
            ("condition", self.condition),
            ("negative_density", self.negative_density),
            ("contour_floor", self.contour_floor),
            ("residue", self.residue),
            ("optimizer", self.optimizer),
            ("acceptance", self.acceptance),
        ];
        all.into_iter().filter_map(|(n, v)| v.map(|v| (n, v))).collect()
    }
}

/// `re` or `re,im`.
pub fn parse_c64(s: &str) -> Result<C64, String> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected `re` or `re,im`, got `{s}`")),
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
pub enum Verb {
    /// Permanent of a square complex matrix.
    Permanent(MatrixArgs),
    /// Hafnian of a symmetric complex matrix.
    Hafnian(MatrixArgs),
    /// Loop hafnian of a symmetric complex matrix.
    LoopHafnian(MatrixArgs),
    /// Output-pattern probability of single photons through an interferometer.
    BsProb(BsProbArgs),
    /// Exact samples of output patterns.
    BsSample(BsSampleArgs),
    /// Probability of a final pattern of an adaptive circuit.
    AdaptiveProb(AdaptiveProbArgs),
    /// Overlap of the conditional states of two adaptive circuits.
    AdaptiveOverlap(AdaptiveOverlapArgs),
    /// Heterodyne density of a Gaussian circuit applied to a core state.
    GcoreDensity(GcoreArgs),
    /// Closed-form origin density of the squeezed Boson-Sampling circuit.
    CvsOrigin(CvsArgs),
    /// Symmetric orthogonal embedding of a real matrix.
    EmbedSigma(EmbedArgs),
    /// Value of a stellar function.
    StellarEval(StellarEvalArgs),
    /// Zeros of a stellar function inside a contour.
    StellarZeros(StellarZerosArgs),
    /// Core polynomial of a Gaussian-times-polynomial stellar function.
    CoreExtract(CoreExtractArgs),
    /// Robustness of a core state (single rank or profile).
    Robustness(RobustnessArgs),
    /// Robustness of a cat state.
    CatRobustness(CatRobustnessArgs),
    /// Heterodyne samples of a Fock or Gaussian state.
    HetSample(HetSampleArgs),
    /// Density-matrix estimate from heterodyne samples.
    Tomo(TomoArgs),
    /// Fidelity lower bound with a pure target.
    Certify(CertifyArgs),
    /// Failure probabilities of the non-i.i.d. verification protocol.
    VerifyBounds(VerifyBoundsArgs),
    /// Wigner function estimate at one point.
    WignerPoint(WignerArgs),
    /// Stellar-rank lower bound from a certified fidelity.
    RankWitness(RankWitnessArgs),
    /// Boson Sampling fidelity witness from heterodyne samples.
    BsVerify(BsVerifyArgs),
    /// Acceptance probability of the order-m swap test.
    SwapStats(SwapStatsArgs),
    /// Parity post-processing of a Hadamard interferometer outcome.
    HadamardAccept(HadamardArgs),
    /// Coherent-state scheme statistics.
    CoherentScheme(CoherentArgs),
    /// Completeness and soundness of the imperfect merger.
    MergerImperfect(MergerArgs),
    /// Weak coin flipping advantage scan over distance.
    WcfScan(WcfScanArgs),
    /// Weak coin flipping probabilities at one parameter set.
    WcfPoint(WcfPointArgs),
    /// Strong coin flip parameters and bias.
    ScfSolve,
    /// Run a named end-to-end check and report pass/fail.
    Reproduce(ReproduceArgs),
}

impl Verb {
    pub fn name(&self) -> &'static str {
        match self {
            Verb::Permanent(_) => "permanent",
            Verb::Hafnian(_) => "hafnian",
            Verb::LoopHafnian(_) => "loop-hafnian",
            Verb::BsProb(_) => "bs-prob",
            Verb::BsSample(_) => "bs-sample",
            Verb::AdaptiveProb(_) => "adaptive-prob",
            Verb::AdaptiveOverlap(_) => "adaptive-overlap",
            Verb::GcoreDensity(_) => "gcore-density",
            Verb::CvsOrigin(_) => "cvs-origin",
            Verb::EmbedSigma(_) => "embed-sigma",
            Verb::StellarEval(_) => "stellar-eval",
            Verb::StellarZeros(_) => "stellar-zeros",
            Verb::CoreExtract(_) => "core-extract",
            Verb::Robustness(_) => "robustness",
            Verb::CatRobustness(_) => "cat-robustness",
            Verb::HetSample(_) => "het-sample",
            Verb::Tomo(_) => "tomo",
            Verb::Certify(_) => "certify",
            Verb::VerifyBounds(_) => "verify-bounds",
            Verb::WignerPoint(_) => "wigner-point",
            Verb::RankWitness(_) => "rank-witness",
            Verb::BsVerify(_) => "bs-verify",
            Verb::SwapStats(_) => "swap-stats",
            Verb::HadamardAccept(_) => "hadamard-accept",
            Verb::CoherentScheme(_) => "coherent-scheme",
            Verb::MergerImperfect(_) => "merger-imperfect",
            Verb::WcfScan(_) => "wcf-scan",
            Verb::WcfPoint(_) => "wcf-point",
            Verb::ScfSolve => "scf-solve",
            Verb::Reproduce(_) => "reproduce",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct MatrixArgs {
    /// Matrix as rows of [re, im] pairs.
    #[arg(long)]
    pub matrix: Doc,
    /// Permanent algorithm (ignored by the hafnian verbs).
    #[arg(long, value_enum, default_value_t = PermMethod::Auto)]
    pub method: PermMethod,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PermMethod {
    Auto,
    Naive,
    Ryser,
}

#[derive(Args, Debug, Serialize)]
pub struct BsProbArgs {
    #[arg(long)]
    pub unitary: Doc,
    #[arg(long, value_delimiter = ',', required = true)]
    pub input: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub output: Vec<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct BsSampleArgs {
    #[arg(long)]
    pub unitary: Doc,
    #[arg(long, value_delimiter = ',', required = true)]
    pub input: Vec<usize>,
    #[arg(long)]
    pub count: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct AdaptiveProbArgs {
    /// {modes, photons, adaptive_modes, base, stages: [{prefix, unitary}]}
    #[arg(long)]
    pub circuit: Doc,
    /// Final pattern on the unmeasured modes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pattern: Vec<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct AdaptiveOverlapArgs {
    #[arg(long)]
    pub circuit_p: Doc,
    #[arg(long, value_delimiter = ',', required = true)]
    pub prefix_p: Vec<usize>,
    #[arg(long)]
    pub circuit_q: Doc,
    #[arg(long, value_delimiter = ',', required = true)]
    pub prefix_q: Vec<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct GcoreArgs {
    /// List of elements: {"kind": "squeeze"|"passive"|"displace", "value": ...}.
    #[arg(long)]
    pub circuit: Doc,
    #[arg(long)]
    pub core: Doc,
    /// Point as a list of [re, im] pairs.
    #[arg(long)]
    pub point: Doc,
    /// Evaluate by truncated Fock-space evolution at this cutoff instead.
    #[arg(long)]
    pub fock_cutoff: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct CvsArgs {
    #[arg(long)]
    pub circuit: Doc,
}

#[derive(Args, Debug, Serialize)]
pub struct EmbedArgs {
    /// Real matrix as nested lists.
    #[arg(long)]
    pub x: Doc,
    #[arg(long)]
    pub modes: usize,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct StellarEvalArgs {
    #[arg(long)]
    pub spec: Doc,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub z: C64,
}

#[derive(Args, Debug, Serialize)]
pub struct StellarZerosArgs {
    #[arg(long)]
    pub spec: Doc,
    /// {"shape": "rectangle", "center", "width", "height"} or {"shape": "circle", "center", "radius"}.
    #[arg(long)]
    pub contour: Doc,
    #[arg(long, default_value_t = 256)]
    pub points: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CoreExtractArgs {
    /// Fock coefficients of the Gaussian-times-polynomial state.
    #[arg(long)]
    pub poly: Doc,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub xi: C64,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub alpha: C64,
}

#[derive(Args, Debug, Serialize)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 4000)]
    pub iterations: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(group = clap::ArgGroup::new("rank").required(true).args(["k", "kmax"]))]
pub struct RobustnessArgs {
    /// Fock coefficients of the core state.
    #[arg(long)]
    pub core: Doc,
    #[arg(long)]
    pub k: Option<usize>,
    /// Profile for ranks 1..=kmax.
    #[arg(long)]
    pub kmax: Option<usize>,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct CatRobustnessArgs {
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub alpha: C64,
    #[arg(long, value_enum, default_value_t = Parity::Even)]
    pub parity: Parity,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Args, Debug, Serialize)]
pub struct HetSampleArgs {
    /// {"kind": "fock", ...FockVector} or {"kind": "gaussian", modes, covariance, displacement}.
    #[arg(long)]
    pub state: Doc,
    #[arg(long)]
    pub count: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct TomoArgs {
    /// Sample CSV (re,im columns) or SampleBatch JSON.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub cutoff: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub eps_prime: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Target Fock coefficients.
    #[arg(long)]
    pub psi: Doc,
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    #[arg(long, default_value_t = 0)]
    pub support_threshold: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub eps_prime: f64,
}

#[derive(Args, Debug, Serialize)]
#[command(group = clap::ArgGroup::new("plan").required(true).args(["budget", "modes"]))]
pub struct VerifyBoundsArgs {
    /// Full {n, k, q, s, m, cutoff, epsilon, epsilon_prime} record.
    #[arg(long)]
    pub budget: Option<Doc>,
    /// Use the polynomial scaling family for this number of modes.
    #[arg(long, requires = "cutoff")]
    pub modes: Option<u64>,
    #[arg(long)]
    pub cutoff: Option<u32>,
    /// Target Fock coefficients.
    #[arg(long)]
    pub psi: Doc,
}

#[derive(Args, Debug, Serialize)]
pub struct WignerArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub alpha: C64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub cutoff: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct RankWitnessArgs {
    /// {value, bound, failure_probability}
    #[arg(long)]
    pub fidelity: Doc,
    /// Robustness values R_1, R_2, ...
    #[arg(long)]
    pub profile: Doc,
}

#[derive(Args, Debug, Serialize)]
pub struct BsVerifyArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub unitary: Doc,
    /// Modes receiving single photons.
    #[arg(long, value_delimiter = ',', required = true)]
    pub photon_modes: Vec<usize>,
    #[arg(long)]
    pub eps: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct SwapStatsArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub overlap_sq: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct HadamardArgs {
    /// Interferometer of order 2^n.
    #[arg(long)]
    pub n: u32,
    #[arg(long, value_delimiter = ',', required = true)]
    pub pattern: Vec<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct CoherentArgs {
    #[arg(long)]
    pub m: usize,
    /// Squared overlap of the two coherent states.
    #[arg(long)]
    pub x: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct MergerArgs {
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub alpha: C64,
    #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
    pub beta: C64,
    #[arg(long)]
    pub nu: f64,
    #[arg(long)]
    pub eta: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct WcfScanArgs {
    #[arg(long, default_value_t = 0.57)]
    pub z: f64,
    #[arg(long, default_value_t = 0.95)]
    pub eta_d: f64,
    /// Switch loss in dB.
    #[arg(long, default_value_t = 0.02)]
    pub switch_loss: f64,
    /// Fiber loss in dB per km.
    #[arg(long, default_value_t = 0.2)]
    pub fiber_loss: f64,
    #[arg(long, default_value_t = 20.0)]
    pub d_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub d_step: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct WcfPointArgs {
    /// Lossless fair point for this x; overrides --y and --z.
    #[arg(long)]
    pub fair: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    pub x: f64,
    #[arg(long, default_value_t = 0.5)]
    pub y: f64,
    #[arg(long, default_value_t = 0.6)]
    pub z: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_f_a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_f_b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_d_a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_d_b: f64,
    #[arg(long, value_enum, default_value_t = DetectorArg::Threshold)]
    pub detector: DetectorArg,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorArg {
    Threshold,
    NumberResolving,
}

#[derive(Args, Debug, Serialize)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub recipe: Recipe,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    RfockRobustness,
    WcfAdvantage,
    GkpZeros,
    HadamardM4,
    BsWitnessM4,
}
