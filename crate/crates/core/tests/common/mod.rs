#![allow(dead_code)]

use std::io::Write;
use std::time::{Duration, Instant};

use microstates::cli::report::Report;

/// Prints a result line past the test harness capture so it shows up in
/// every run.
pub fn line(text: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{text}");
}

/// Runs `body`, prints `criterion N PASS|FAIL name (t s, limit L s)` and
/// returns whether both the body and the time limit held.
pub fn criterion(number: u32, name: &str, limit: Duration, body: impl FnOnce() -> Result<String, String>) -> bool {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let (pass, detail) = match outcome {
        Ok(d) => (in_time, d),
        Err(d) => (false, d),
    };
    line(&format!(
        "criterion {number:>2} {} {name} ({:.1} s, limit {} s){}: {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { " over time" },
    ));
    pass
}

/// Err with the failing checks of a report, Ok with a summary otherwise.
pub fn checks_pass(report: &Report, names: &[&str]) -> Result<String, String> {
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    for name in names {
        match report.check(name) {
            Some(c) if c.pass => summary.push(format!("{name}: {}", c.detail)),
            Some(c) => failed.push(format!("{name}: {}", c.detail)),
            None => failed.push(format!("{name}: missing")),
        }
    }
    if failed.is_empty() {
        Ok(summary.join("; "))
    } else {
        Err(failed.join("; "))
    }
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean with a batch-means standard error for correlated chains.
pub fn batch_mean_and_se(values: &[f64], batches: usize) -> (f64, f64) {
    let size = values.len() / batches;
    let means: Vec<f64> = values
        .chunks(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    mean_and_se(&means)
}
