use serde_json::json;

use super::config::ExtractConfig;
use super::report::{num, Check, Outcome, Report, Table};
use crate::error::{Error, Result};
use crate::extraction::{
    extract_moment_function, select_microstates, verify_moment_convergence, ExtractionResult,
};
use crate::matrices::RngStream;
use crate::serde_ext::csv_f64;

pub const EXTRACTION_ARTIFACT: &str = "extraction.json";

pub fn run(config: &ExtractConfig) -> Result<Outcome> {
    let master = RngStream::new(config.run.seed);
    let mut params = config.extraction.clone();
    params.cover.chunks = config.run.chunks;
    let previous = match &config.resume {
        Some(path) => Some(
            ExtractionResult::from_json(&std::fs::read_to_string(path)?)
                .map_err(Error::at("loading resumed extraction"))?,
        ),
        None => None,
    };
    let mut result = extract_moment_function(
        &config.zone,
        &config.scale,
        &params,
        &master.substream(0),
        previous.as_ref(),
    )
    .map_err(Error::at("moment extraction"))?;

    let n = config.zone.n();
    let mut checks = Vec::new();
    let epsilon = *params.cover.epsilons.last().expect("validated schedule");

    let over_bound: Vec<String> = result
        .words
        .iter()
        .zip(result.values())
        .filter(|(w, v)| v.norm() > result.bound.powi(w.degree() as i32) * (1.0 + 1e-12))
        .map(|(w, _)| w.to_string())
        .collect();
    checks.push(Check::new(
        "norm_bound",
        over_bound.is_empty(),
        if over_bound.is_empty() {
            format!("every |f(w)| ≤ {}^deg(w)", result.bound)
        } else {
            format!("exceeded for {}", over_bound.join(", "))
        },
    ));
    checks.push(Check::new(
        "extraction_complete",
        result.failed_at.is_none(),
        match result.failed_at {
            Some(j) => format!("no admissible center for word {} ({})", j + 1, result.words[j]),
            None => format!("{} words fixed", result.steps.len()),
        },
    ));
    checks.push(Check::new(
        "zones_nested",
        result.nested,
        "entropy of the constrained zones is non-increasing",
    ));

    let mut rows = Vec::new();
    let mut reference_rows = Vec::new();
    for (j, step) in result.steps.iter().enumerate() {
        let w = &result.words[j];
        let sel = step.refinement.last();
        let lambda = step.refinement.lambda();
        let half = sel.ci_half_width();
        let reference = config.reference.as_ref().map(|r| r.moment(w)).transpose()?;
        if let Some(r) = reference {
            let err = (lambda - r).norm();
            let tolerance = epsilon + 3.0 * half;
            checks.push(Check::new(
                format!("matches_reference_{}", w.to_string().replace(' ', "_")),
                err <= tolerance,
                format!("f = {lambda:.4}, reference {r:.4}, error {err:.4}, tolerance {tolerance:.4}"),
            ));
            reference_rows.push(json!({
                "word": w.to_string(),
                "reference_re": num(r.re),
                "reference_im": num(r.im),
                "error": num(err),
                "tolerance": num(tolerance),
            }));
        }
        rows.push(format!(
            "{w},{},{},{},{},{}",
            csv_f64(lambda.re),
            csv_f64(lambda.im),
            csv_f64(half),
            step.refinement.stabilized,
            csv_f64(step.zone_chi)
        ));
    }
    let mut tables = vec![Table::new(
        "extraction",
        "word,re,im,ci_half_width,stabilized,zone_chi",
        rows,
    )];

    let mut exhausted = false;
    if result.failed_at.is_none() {
        let f = result.moment_spec(n).map_err(Error::at("moment table"))?;
        let seq = select_microstates(
            &config.zone,
            &f,
            &result.words,
            &config.schedule,
            &config.selection,
            &master.substream(1),
        )
        .map_err(Error::at("microstate selection"))?;
        exhausted = seq.exhausted_at.is_some();
        checks.push(Check::new(
            "microstates_found",
            !exhausted,
            match seq.exhausted_at {
                Some(m) => format!("budget of {} proposals exhausted at m = {m}", config.selection.budget),
                None => format!("{} stages found", seq.tuples.len()),
            },
        ));
        let ms: Vec<usize> = seq.stages.iter().filter(|s| s.found).map(|s| s.m).collect();
        if !seq.tuples.is_empty() {
            let report = verify_moment_convergence(&seq.tuples, &ms, &f, &result.words)
                .map_err(Error::at("convergence check"))?;
            checks.push(Check::new(
                "moment_convergence",
                report.pass && !exhausted,
                if report.failed_stages.is_empty() {
                    "every stage within 1/m".to_string()
                } else {
                    format!("stages m = {:?} exceed 1/m", report.failed_stages)
                },
            ));
            tables.push(Table::new(
                "selection_residuals",
                &format!(
                    "m,{}",
                    result.words.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
                ),
                report.ms.iter().zip(&report.residuals).map(|(m, r)| {
                    format!(
                        "{m},{}",
                        r.iter().map(|&x| csv_f64(x)).collect::<Vec<_>>().join(",")
                    )
                }),
            ));
            result.convergence = Some(report);
        }
        result.selection = seq.stages;
    }

    let results = json!({
        "extraction": result,
        "reference_comparison": reference_rows,
    });
    let mut outcome = Outcome::new(Report::new("extract", config, results, checks), tables);
    outcome.exhausted = exhausted;
    let mut artifact = result.to_json();
    artifact.push('\n');
    outcome.artifacts.push((EXTRACTION_ARTIFACT.to_string(), artifact));
    Ok(outcome)
}
