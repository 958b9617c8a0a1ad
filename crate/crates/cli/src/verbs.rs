use std::collections::HashMap;

use cvkit::config;
use cvkit::fock::FockVector;
use cvkit::gaussian::{cvs_origin_density, embed_orthogonal, gcore_density, gcore_density_fock, CvsCircuit, GaussianElement};
use cvkit::heterodyne::{
    c_psi, certify_fidelity, rank_witness, sample_husimi, tomo_estimate, verification_bounds, wigner_point, HusimiSource,
    VerificationBudget,
};
use cvkit::interf::{adaptive_final_probability, adaptive_overlap, bs_probability, bs_sample, AdaptiveCircuit, TableStages};
use cvkit::matfun::{hafnian_exact, loop_hafnian_exact, permanent, permanent_exact, PermanentMethod};
use cvkit::mverify::bs_witness_with_placement;
use cvkit::progmeas::{
    coherent_scheme_stats, distinguishability_probs, hadamard_walsh, merger_imperfect, parity_postprocess, pi_value,
    swap_test_stats,
};
use cvkit::stellar::{
    cat_robustness, count_zeros, extract_core, robustness, robustness_profile, stellar_eval, Contour, OptimizerBudget,
    StellarSpec,
};
use cvkit::types::{ConfidenceValue, MatrixRepr};
use cvkit::wcf::{advantage_scan, bias, cheat_probs, honest_probs, strong_cf_solve, Detector, DistanceModel, WcfParams};
use cvkit::{ComplexMatrix, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::io::{fmt_f64, samples_table, Inputs, Sidecar, Table};
use crate::{reproduce, to_json, CliError, Outcome};

#[derive(Deserialize)]
struct StageJson {
    prefix: Vec<usize>,
    unitary: MatrixRepr,
}

#[derive(Deserialize)]
struct AdaptiveJson {
    modes: usize,
    photons: usize,
    adaptive_modes: usize,
    base: MatrixRepr,
    #[serde(default)]
    stages: Vec<StageJson>,
}

fn adaptive_circuit(inputs: &mut Inputs, doc: &str) -> Result<AdaptiveCircuit, CliError> {
    let spec: AdaptiveJson = inputs.doc(doc, "circuit")?;
    let mut table = HashMap::new();
    for s in spec.stages {
        table.insert(s.prefix, ComplexMatrix::try_from(s.unitary).map_err(|e| CliError::Input(format!("stage: {e}")))?);
    }
    let base = ComplexMatrix::try_from(spec.base).map_err(|e| CliError::Input(format!("base: {e}")))?;
    Ok(AdaptiveCircuit::new(
        spec.modes,
        spec.photons,
        spec.adaptive_modes,
        base,
        Box::new(TableStages { modes: spec.modes, table }),
    )?)
}

fn budget(b: &BudgetArgs) -> OptimizerBudget {
    OptimizerBudget { restarts: b.restarts, iterations: b.iterations, tolerance: config::tolerances().optimizer }
}

fn need_seed(seed: Option<u64>, verb: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("`{verb}` draws random samples and needs --seed")))
}

#[derive(Serialize)]
struct HadamardReport {
    pi: C64,
    accepted: bool,
    pr_indistinguishable: f64,
    pr_distinguishable: f64,
}

#[derive(Serialize)]
struct WcfPointReport {
    params: WcfParams,
    honest: cvkit::wcf::HonestProbs,
    cheat: cvkit::wcf::CheatProbs,
    bias: f64,
}

pub fn dispatch(verb: &Verb, seed: Option<u64>, inputs: &mut Inputs) -> Result<Outcome, CliError> {
    match verb {
        Verb::Permanent(a) => {
            let m = inputs.matrix(&a.matrix, "matrix")?;
            let v = match a.method {
                PermMethod::Auto => {
                    cvkit::types::ensure_square(&m)?;
                    permanent(&m)
                }
                PermMethod::Naive => permanent_exact(&m, PermanentMethod::Naive)?,
                PermMethod::Ryser => permanent_exact(&m, PermanentMethod::Ryser)?,
            };
            Outcome::value(&v)
        }
        Verb::Hafnian(a) => Outcome::value(&hafnian_exact(&inputs.matrix(&a.matrix, "matrix")?)?),
        Verb::LoopHafnian(a) => Outcome::value(&loop_hafnian_exact(&inputs.matrix(&a.matrix, "matrix")?)?),
        Verb::BsProb(a) => {
            let u = inputs.matrix(&a.unitary, "unitary")?;
            Outcome::value(&bs_probability(&u, &a.input, &a.output)?)
        }
        Verb::BsSample(a) => {
            let seed = need_seed(seed, "bs-sample")?;
            let u = inputs.matrix(&a.unitary, "unitary")?;
            let samples = bs_sample(&u, &a.input, a.count, seed)?;
            let header: Vec<String> = (0..u.nrows()).map(|k| format!("n_{k}")).collect();
            let rows = samples.iter().map(|s| s.iter().map(|n| n.to_string()).collect()).collect();
            let mut out = Outcome::value(&samples)?;
            out.table = Some(Table { header, rows });
            Ok(out)
        }
        Verb::AdaptiveProb(a) => {
            let c = adaptive_circuit(inputs, &a.circuit)?;
            Outcome::value(&adaptive_final_probability(&c, &a.pattern)?)
        }
        Verb::AdaptiveOverlap(a) => {
            let cp = adaptive_circuit(inputs, &a.circuit_p)?;
            let cq = adaptive_circuit(inputs, &a.circuit_q)?;
            Outcome::value(&adaptive_overlap(&cp, &a.prefix_p, &cq, &a.prefix_q)?)
        }
        Verb::GcoreDensity(a) => {
            let els: Vec<GaussianElement> = inputs.doc(&a.circuit, "circuit")?;
            let core: FockVector = inputs.doc(&a.core, "core")?;
            let point: Vec<C64> = inputs.doc(&a.point, "point")?;
            let v = match a.fock_cutoff {
                Some(e) => gcore_density_fock(&els, &core, &point, e)?,
                None => gcore_density(&els, &core, &point)?,
            };
            Outcome::value(&v)
        }
        Verb::CvsOrigin(a) => {
            let circ: CvsCircuit = inputs.doc(&a.circuit, "circuit")?;
            Outcome::value(&cvs_origin_density(&circ)?)
        }
        Verb::EmbedSigma(a) => {
            let rows: Vec<Vec<f64>> = inputs.doc(&a.x, "x")?;
            let cols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != cols) {
                return Err(CliError::Input("x: ragged rows".into()));
            }
            let x = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
            let s = embed_orthogonal(&x, a.modes, a.nu)?;
            Outcome::value(&MatrixRepr::from(&s))
        }
        Verb::StellarEval(a) => {
            let spec: StellarSpec = inputs.doc(&a.spec, "spec")?;
            Outcome::value(&stellar_eval(&spec, a.z)?)
        }
        Verb::StellarZeros(a) => {
            let spec: StellarSpec = inputs.doc(&a.spec, "spec")?;
            let contour: Contour = inputs.doc(&a.contour, "contour")?;
            Outcome::value(&count_zeros(&spec, &contour, a.points)?)
        }
        Verb::CoreExtract(a) => {
            let poly: Vec<C64> = inputs.doc(&a.poly, "poly")?;
            Outcome::value(&extract_core(&poly, a.xi, a.alpha)?)
        }
        Verb::Robustness(a) => {
            let core: Vec<C64> = inputs.doc(&a.core, "core")?;
            let b = budget(&a.budget);
            if let Some(k) = a.k {
                return Outcome::value(&robustness(&core, k, &b)?);
            }
            let kmax = a.kmax.unwrap_or(1);
            let profile = robustness_profile(&core, kmax, &b)?;
            let mut table = Table::new(&["k", "R_k", "max_fidelity"]);
            for r in &profile {
                table.rows.push(vec![r.k.to_string(), fmt_f64(r.r_k), fmt_f64(r.max_fidelity)]);
            }
            let mut out = Outcome::value(&profile)?;
            out.table = Some(table);
            Ok(out)
        }
        Verb::CatRobustness(a) => {
            let even = matches!(a.parity, Parity::Even);
            Outcome::value(&cat_robustness(a.alpha, even, a.k, &budget(&a.budget))?)
        }
        Verb::HetSample(a) => {
            let seed = need_seed(seed, "het-sample")?;
            let state: HusimiSource = inputs.doc(&a.state, "state")?;
            let batch = sample_husimi(&state, a.count, seed)?;
            let sidecar = Sidecar {
                modes: batch.modes,
                count: batch.len(),
                seed: batch.seed,
                source: batch.source.clone(),
                state: to_json(&state)?,
            };
            let mut out = Outcome::value(&batch)?;
            out.table = Some(samples_table(&batch));
            out.sidecar = Some(sidecar);
            Ok(out)
        }
        Verb::Tomo(a) => {
            let s = inputs.samples(&a.samples)?;
            Outcome::value(&tomo_estimate(&s, a.cutoff, a.eps, a.eps_prime)?)
        }
        Verb::Certify(a) => {
            let s = inputs.samples(&a.samples)?;
            let psi: Vec<C64> = inputs.doc(&a.psi, "psi")?;
            Outcome::value(&certify_fidelity(&s, &psi, a.copies, a.support_threshold, a.eps, a.eps_prime)?)
        }
        Verb::VerifyBounds(a) => {
            let b: VerificationBudget = match (&a.budget, a.modes, a.cutoff) {
                (Some(doc), _, _) => inputs.doc(doc, "budget")?,
                (None, Some(m), Some(e)) => VerificationBudget::scaling_family(m, e),
                _ => return Err(CliError::Usage("give --budget or --modes with --cutoff".into())),
            };
            let psi: Vec<C64> = inputs.doc(&a.psi, "psi")?;
            let c = c_psi(&psi, b.epsilon, b.m as usize);
            let bounds = verification_bounds(&b, c)?;
            Outcome::value(&json!({ "budget": b, "c_psi": c, "bounds": bounds }))
        }
        Verb::WignerPoint(a) => {
            let s = inputs.samples(&a.samples)?;
            Outcome::value(&wigner_point(&s, a.alpha, a.eta, a.cutoff, a.delta)?)
        }
        Verb::RankWitness(a) => {
            let f: ConfidenceValue = inputs.doc(&a.fidelity, "fidelity")?;
            let profile: Vec<f64> = inputs.doc(&a.profile, "profile")?;
            Outcome::value(&rank_witness(&f, &profile)?)
        }
        Verb::BsVerify(a) => {
            let s = inputs.samples(&a.samples)?;
            let u = inputs.matrix(&a.unitary, "unitary")?;
            Outcome::value(&bs_witness_with_placement(&s, &u, &a.photon_modes, a.eps)?)
        }
        Verb::SwapStats(a) => {
            if a.m < 2 || !(0.0..=1.0).contains(&a.overlap_sq) {
                return Err(cvkit::CvError::InvalidParameter("need m >= 2 and overlap_sq in [0,1]".into()).into());
            }
            Outcome::value(&swap_test_stats(a.m, a.overlap_sq))
        }
        Verb::HadamardAccept(a) => {
            let s = hadamard_walsh(a.n)?;
            if a.pattern.len() != s.order() {
                return Err(cvkit::CvError::DimensionMismatch(format!("pattern needs {} modes", s.order())).into());
            }
            let (pr_i, pr_d) = distinguishability_probs(&s.unitary(), &a.pattern)?;
            Outcome::value(&HadamardReport {
                pi: pi_value(&s, &a.pattern),
                accepted: parity_postprocess(&s, &a.pattern),
                pr_indistinguishable: pr_i,
                pr_distinguishable: pr_d,
            })
        }
        Verb::CoherentScheme(a) => Outcome::value(&coherent_scheme_stats(a.m, a.x)?),
        Verb::MergerImperfect(a) => Outcome::value(&merger_imperfect(a.alpha, a.beta, a.nu, a.eta)?),
        Verb::WcfScan(a) => {
            if !(a.d_step > 0.0 && a.d_max >= 0.0) {
                return Err(CliError::Usage("need --d-step > 0 and --d-max >= 0".into()));
            }
            let steps = (a.d_max / a.d_step + 1e-9).floor() as usize;
            let distances: Vec<f64> = (0..=steps).map(|i| i as f64 * a.d_step).collect();
            let model = DistanceModel { fiber_db_per_km: a.fiber_loss, switch_loss_db: a.switch_loss };
            let rows = advantage_scan(a.z, a.eta_d, &model, &distances)?;
            let mut table = Table::new(&["d", "P_h", "P_ab", "P_d_Q", "P_d_C", "advantage"]);
            for r in &rows {
                table.rows.push(vec![
                    fmt_f64(r.d),
                    fmt_f64(r.p_h),
                    fmt_f64(r.p_ab),
                    fmt_f64(r.p_d_q),
                    fmt_f64(r.p_d_c),
                    r.advantage.to_string(),
                ]);
            }
            let mut out = Outcome::value(&rows)?;
            out.table = Some(table);
            Ok(out)
        }
        Verb::WcfPoint(a) => {
            let base = match a.fair {
                Some(x) => WcfParams::lossless_fair(x)?,
                None => WcfParams::lossless(a.x, a.y, a.z),
            };
            let params = WcfParams {
                eta_t: a.eta_t,
                eta_f_a: a.eta_f_a,
                eta_f_b: a.eta_f_b,
                eta_d_a: a.eta_d_a,
                eta_d_b: a.eta_d_b,
                ..base
            };
            let detector = match a.detector {
                DetectorArg::Threshold => Detector::Threshold,
                DetectorArg::NumberResolving => Detector::NumberResolving,
            };
            let cheat = cheat_probs(&params, detector)?;
            Outcome::value(&WcfPointReport { params, honest: honest_probs(&params)?, cheat, bias: bias(&cheat) })
        }
        Verb::ScfSolve => Outcome::value(&strong_cf_solve()?),
        Verb::Reproduce(a) => reproduce::run(a.recipe),
    }
}
