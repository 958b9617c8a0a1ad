//! Named end-to-end checks with fixed inputs and seeds.

use std::f64::consts::PI;

use cvkit::fock::{apply_interferometer_fock, enumerate_sector, FockVector};
use cvkit::heterodyne::{sample_husimi, HusimiSource};
use cvkit::mverify::bs_witness;
use cvkit::progmeas::{distinguishability_probs, hadamard_walsh, parity_postprocess, pi_value};
use cvkit::stellar::{count_zeros, robustness, Contour, OptimizerBudget, StellarSpec, DEFAULT_GKP_TRUNCATION};
use cvkit::types::{c, random_unitary};
use cvkit::wcf::{advantage_scan, DistanceModel};
use cvkit::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::Recipe;
use crate::{to_json, CliError, Outcome};

#[derive(Serialize)]
struct Report {
    recipe: &'static str,
    pass: bool,
    measured: serde_json::Value,
    expected: serde_json::Value,
}

pub fn run(recipe: Recipe) -> Result<Outcome, CliError> {
    let report = match recipe {
        Recipe::RfockRobustness => rfock()?,
        Recipe::WcfAdvantage => wcf()?,
        Recipe::GkpZeros => gkp()?,
        Recipe::HadamardM4 => hadamard()?,
        Recipe::BsWitnessM4 => bs_witness_m4()?,
    };
    let line = format!(
        "{} {}: measured {} expected {}",
        if report.pass { "PASS" } else { "FAIL" },
        report.recipe,
        report.measured,
        report.expected
    );
    eprintln!("{line}");
    let mut out = Outcome::value(&report)?;
    if !report.pass {
        out.failed = Some(line);
    }
    Ok(out)
}

fn rfock() -> Result<Report, CliError> {
    let want = 3.0 * 3f64.sqrt() / (4.0 * 1f64.exp());
    let r = robustness(&[C64::default(), c(1.0, 0.0)], 1, &OptimizerBudget::default())?;
    Ok(Report {
        recipe: "rfock-robustness",
        pass: (r.max_fidelity - want).abs() < 1e-4,
        measured: json!({ "max_fidelity": r.max_fidelity, "r_k": r.r_k }),
        expected: json!({ "max_fidelity": want, "tolerance": 1e-4 }),
    })
}

fn wcf() -> Result<Report, CliError> {
    let distances: Vec<f64> = (0..=400).map(|i| i as f64 * 0.25).collect();
    let rows = advantage_scan(0.57, 0.95, &DistanceModel::default(), &distances)?;
    let first_loss = rows.iter().find(|r| !r.advantage).map(|r| r.d);
    let at_zero = rows[0].advantage;
    Ok(Report {
        recipe: "wcf-advantage",
        pass: at_zero && first_loss.is_some(),
        measured: json!({ "advantage_at_0": at_zero, "first_distance_without_advantage_km": first_loss }),
        expected: json!({ "advantage_at_0": true, "region": "bounded" }),
    })
}

fn gkp() -> Result<Report, CliError> {
    let side = 4.0 * PI.sqrt();
    let spec = StellarSpec::Gkp { truncation: DEFAULT_GKP_TRUNCATION };
    let mut counts = Vec::new();
    for center in [c(0.1, 0.23), c(1.3, -0.7), c(-2.1, 1.05)] {
        counts.push(count_zeros(&spec, &Contour::Rectangle { center, width: side, height: side }, 256)?.count);
    }
    Ok(Report {
        recipe: "gkp-zeros",
        pass: counts.iter().all(|&n| n == 16),
        measured: to_json(&counts)?,
        expected: json!(16),
    })
}

fn hadamard() -> Result<Report, CliError> {
    let s = hadamard_walsh(2)?;
    let u = s.unitary();
    let (mut sum_i, mut sum_d, mut mismatches) = (0.0, 0.0, 0usize);
    for d in enumerate_sector(4, 4)? {
        let accepted = (pi_value(&s, &d) - 4.0).norm() < 1e-9;
        mismatches += usize::from(accepted != parity_postprocess(&s, &d));
        if accepted {
            let (pi, pd) = distinguishability_probs(&u, &d)?;
            sum_i += pi;
            sum_d += pd;
        }
    }
    Ok(Report {
        recipe: "hadamard-m4",
        pass: (sum_i - 1.0).abs() < 1e-10 && (sum_d - 0.25).abs() < 1e-10 && mismatches == 0,
        measured: json!({ "sum_pr_indistinguishable": sum_i, "sum_pr_distinguishable": sum_d, "parity_mismatches": mismatches }),
        expected: json!({ "sum_pr_indistinguishable": 1.0, "sum_pr_distinguishable": 0.25, "tolerance": 1e-10 }),
    })
}

fn bs_witness_m4() -> Result<Report, CliError> {
    let (eps, count) = (0.3, 100_000);
    let u = random_unitary(4, &mut ChaCha8Rng::seed_from_u64(9));
    let witnesses = |input: &[usize], offset: u64| -> Result<Vec<f64>, CliError> {
        let state = apply_interferometer_fock(&u, &FockVector::basis(input, 2)?)?;
        let src = HusimiSource::Fock(state);
        (0..20u64)
            .into_par_iter()
            .map(|seed| Ok(bs_witness(&sample_husimi(&src, count, offset + seed)?, &u, 2, eps)?.witness))
            .collect()
    };
    let ideal = witnesses(&[1, 1, 0, 0], 2000)?;
    let corrupted = witnesses(&[1, 0, 0, 0], 3000)?;
    let accepted = ideal.iter().filter(|w| **w >= 1.0 - eps).count();
    let rejected = corrupted.iter().filter(|w| **w < 1.0 - eps).count();
    Ok(Report {
        recipe: "bs-witness-m4",
        pass: accepted >= 18 && rejected >= 18,
        measured: json!({ "ideal_accepted": accepted, "corrupted_rejected": rejected, "runs": 20 }),
        expected: json!({ "ideal_accepted_min": 18, "corrupted_rejected_min": 18, "threshold": 1.0 - eps }),
    })
}
