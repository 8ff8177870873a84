use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use super::config::ConcentrationConfig;
use super::report::{num, Check, Outcome, Report, Table};
use crate::entropy::{hit_ratio_from_counts, HitParams, HitRatio};
use crate::error::Result;
use crate::matrices::{ChunkPlan, RngStream, TupleBallSampler};
use crate::moments::{is_microstate, view_traces, MomentSpec, Provenance};
use crate::serde_ext::csv_f64;
use crate::words::enumerate_words_with;

/// Mean star-free moments of `samples` uniform-ball tuples at size k.
pub fn empirical_limit_spec(config: &ConcentrationConfig, stream: &RngStream) -> Result<MomentSpec> {
    let words = enumerate_words_with(config.n, config.m0, true)?;
    let k = config.reference_k;
    let parts = ChunkPlan::new(config.run.chunks).run(stream, config.reference_samples, |_, count, rng| {
        let mut sampler = TupleBallSampler::new(config.n, k, config.radius, &config.sampler, rng)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); words.len()];
        for _ in 0..count {
            let xi = sampler.next(rng)?;
            for (a, t) in acc.iter_mut().zip(view_traces(&xi.view(), &words)?) {
                *a += t;
            }
        }
        Ok::<_, crate::Error>(acc)
    });
    let mut total = vec![Complex64::new(0.0, 0.0); words.len()];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p?) {
            *t += v;
        }
    }
    let scale = config.reference_samples as f64;
    let table: BTreeMap<_, _> = words.into_iter().zip(total.into_iter().map(|t| t / scale)).collect();
    MomentSpec::from_table(config.n, config.radius, table, Provenance::Empirical)
}

/// Least-squares line through (k², log p_k).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// exp(slope): the fitted per-k² decay factor.
    pub c_hat: f64,
}

pub fn fit_decay(ks: &[usize], probabilities: &[f64]) -> DecayFit {
    let xs: Vec<f64> = ks.iter().map(|&k| (k * k) as f64).collect();
    let ys: Vec<f64> = probabilities.iter().map(|p| p.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    DecayFit {
        slope,
        intercept: my - slope * mx,
        c_hat: slope.exp(),
    }
}

#[derive(Clone, Debug, Serialize)]
struct ModeSeries {
    mode: &'static str,
    outside: Vec<HitRatio>,
    /// p̂, or the rule-of-three bound when no sample fell outside.
    fitted_values: Vec<f64>,
    fit: DecayFit,
    strictly_decreasing: bool,
}

pub fn run(config: &ConcentrationConfig) -> Result<Outcome> {
    let master = RngStream::new(config.run.seed);
    let empirical = empirical_limit_spec(config, &master.substream(0))?;
    let semicircle = MomentSpec::free_semicircle_family(config.n)?;
    let specs = [("empirical_limit", &empirical), ("semicircle", &semicircle)];
    let hit_params = HitParams {
        samples: config.samples,
        bootstrap: config.bootstrap,
        level: config.level,
        sampler: config.sampler.clone(),
        chunks: config.run.chunks,
    };

    let mut outside: Vec<Vec<HitRatio>> = vec![Vec::new(); specs.len()];
    for &k in &config.k_list {
        let stream = master.path(&[1, k as u64]);
        let parts = ChunkPlan::new(config.run.chunks).run(&stream, config.samples, |_, count, rng| {
            let mut sampler = TupleBallSampler::new(config.n, k, config.radius, &config.sampler, rng)?;
            let mut counts = [0usize; 2];
            for _ in 0..count {
                let xi = sampler.next(rng)?;
                for (c, (_, spec)) in counts.iter_mut().zip(&specs) {
                    if !is_microstate(&xi, spec, config.m0, config.gamma0)? {
                        *c += 1;
                    }
                }
            }
            Ok::<_, crate::Error>(counts)
        });
        let mut totals = [0usize; 2];
        for p in parts {
            for (t, c) in totals.iter_mut().zip(p?) {
                *t += c;
            }
        }
        for (i, &count) in totals.iter().enumerate() {
            outside[i].push(hit_ratio_from_counts(
                count,
                config.samples,
                &hit_params,
                &stream.substream(i as u64),
            )?);
        }
    }

    let series: Vec<ModeSeries> = specs
        .iter()
        .zip(outside)
        .map(|(&(mode, _), outside)| {
            let fitted_values: Vec<f64> = outside
                .iter()
                .map(|h| if h.hits == 0 { 3.0 / h.samples as f64 } else { h.p_hat })
                .collect();
            let fit = fit_decay(&config.k_list, &fitted_values);
            let strictly_decreasing = outside.windows(2).all(|w| w[1].p_hat < w[0].p_hat);
            ModeSeries {
                mode,
                outside,
                fitted_values,
                fit,
                strictly_decreasing,
            }
        })
        .collect();

    let emp = &series[0];
    let ps: Vec<String> = emp.outside.iter().map(|h| format!("{:.4}", h.p_hat)).collect();
    let checks = vec![
        Check::new(
            "empirical_limit_strictly_decreasing",
            emp.strictly_decreasing,
            format!("p_k = [{}] over k = {:?}", ps.join(", "), config.k_list),
        ),
        Check::new(
            "empirical_limit_decay_factor_below_one",
            emp.fit.c_hat < 1.0,
            format!("fitted c = {:.6} (slope {:.4e})", emp.fit.c_hat, emp.fit.slope),
        ),
    ];

    let mut rows = Vec::new();
    for s in &series {
        for (k, h) in config.k_list.iter().zip(&s.outside) {
            rows.push(format!(
                "{},{k},{},{},{},{},{}",
                s.mode,
                h.hits,
                h.samples,
                csv_f64(h.p_hat),
                csv_f64(h.ci_lo),
                csv_f64(h.ci_hi)
            ));
        }
    }
    let tables = vec![Table::new(
        "concentration",
        "mode,k,outside,samples,p_hat,ci_lo,ci_hi",
        rows,
    )];

    let reference: Vec<_> = enumerate_words_with(config.n, config.m0, true)?
        .iter()
        .map(|w| {
            let v = empirical.moment(w).unwrap_or_default();
            json!({"word": w.to_string(), "re": num(v.re), "im": num(v.im)})
        })
        .collect();
    let results = json!({
        "empirical_reference": reference,
        "modes": series,
    });
    Ok(Outcome::new(
        Report::new("concentration", config, results, checks),
        tables,
    ))
}
