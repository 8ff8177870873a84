use serde::Serialize;
use serde_json::json;

use super::config::{Ensemble, FreenessConfig, ProductFreenessConfig};
use super::report::{num, Check, Outcome, Report, Table};
use crate::entropy::chi_estimate;
use crate::error::{Error, Result};
use crate::matrices::{sample_gue, ChunkPlan, MatrixTuple, RngStream, StreamRng, TupleBallSampler};
use crate::moments::freeness_defect;
use crate::serde_ext::csv_f64;
use crate::zones::product_all;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreenessLevel {
    pub k: usize,
    pub draws: usize,
    pub median_defect: f64,
    pub max_defect: f64,
    pub free: usize,
    pub fraction_free: f64,
}

fn draw_block(config: &FreenessConfig, k: usize, rng: &mut StreamRng) -> Result<MatrixTuple> {
    match config.ensemble {
        Ensemble::Gue => {
            let mats = (0..config.block_n)
                .map(|_| sample_gue(k, config.variance, rng))
                .collect::<Result<Vec<_>>>()?;
            MatrixTuple::new(mats, true)
        }
        Ensemble::UniformBall => {
            TupleBallSampler::new(config.block_n, k, 1.0, &Default::default(), rng)?.next(rng)
        }
    }
}

/// Freeness defects of `draws` block families at size k. With `dependent`
/// every block is a copy of the first.
pub fn freeness_defects(
    config: &FreenessConfig,
    k: usize,
    dependent: bool,
    chunks: usize,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    let parts = ChunkPlan::new(chunks).run(stream, config.draws, |_, count, rng| {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let blocks = if dependent {
                vec![draw_block(config, k, rng)?; config.blocks]
            } else {
                (0..config.blocks)
                    .map(|_| draw_block(config, k, rng))
                    .collect::<Result<Vec<_>>>()?
            };
            out.push(freeness_defect(&blocks, config.m0)?);
        }
        Ok::<_, Error>(out)
    });
    let mut all = Vec::with_capacity(config.draws);
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

fn summarize(k: usize, defects: &[f64], gamma0: f64) -> FreenessLevel {
    let mut sorted = defects.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let free = sorted.iter().filter(|&&d| d < gamma0).count();
    FreenessLevel {
        k,
        draws: n,
        median_defect: median,
        max_defect: sorted[n - 1],
        free,
        fraction_free: free as f64 / n as f64,
    }
}

pub fn run(config: &ProductFreenessConfig) -> Result<Outcome> {
    let master = RngStream::new(config.run.seed);
    let mut checks = Vec::new();
    let mut tables = Vec::new();

    // Additivity over a Cartesian product of identical factors.
    let a = &config.additivity;
    let mut mc = a.monte_carlo.clone();
    mc.hits.chunks = config.run.chunks;
    let product = product_all(&vec![a.factor.clone(); a.copies])?;
    let factor_est = chi_estimate(&a.factor, &a.scale, a.m, a.gamma, &a.k_grid, &mc, &master.path(&[0, 0]))
        .map_err(Error::at("factor entropy"))?;
    let product_est = chi_estimate(&product, &a.scale, a.m, a.gamma, &a.k_grid, &mc, &master.path(&[0, 1]))
        .map_err(Error::at("product entropy"))?;
    let copies = a.copies as f64;
    let mut residuals = Vec::new();
    let mut rows = Vec::new();
    for (f, p) in factor_est.points.iter().zip(&product_est.points) {
        let residual = p.chi - copies * f.chi;
        let tolerance = 3.0 * p.half_width().hypot(copies * f.half_width());
        let ok = residual.abs() <= tolerance;
        checks.push(Check::new(
            format!("additivity_k{}", p.k),
            ok,
            format!(
                "product {:.6} vs {} x factor {:.6}: residual {:.2e}, 3ci {:.2e}",
                p.chi, a.copies, f.chi, residual, tolerance
            ),
        ));
        rows.push(format!(
            "{},{},{},{},{}",
            p.k,
            csv_f64(f.chi),
            csv_f64(p.chi),
            csv_f64(residual),
            csv_f64(tolerance)
        ));
        residuals.push(json!({
            "k": p.k,
            "factor": num(f.chi),
            "product": num(p.chi),
            "residual": num(residual),
            "three_ci": num(tolerance),
            "within": ok,
        }));
    }
    tables.push(Table::new(
        "additivity",
        "k,chi_factor,chi_product,residual,three_ci",
        rows,
    ));

    // Asymptotic freeness of independent blocks.
    let f = &config.freeness;
    let mut levels = Vec::new();
    for &k in &f.k_list {
        let defects = freeness_defects(f, k, false, config.run.chunks, &master.path(&[1, k as u64]))?;
        levels.push(summarize(k, &defects, f.gamma0));
    }
    let k_max = *f.k_list.last().expect("validated nonempty");
    let dependent = summarize(
        k_max,
        &freeness_defects(f, k_max, true, config.run.chunks, &master.path(&[2, k_max as u64]))?,
        f.gamma0,
    );

    let first = &levels[0];
    let last = levels.last().expect("nonempty");
    checks.push(Check::new(
        "freeness_fraction_grows",
        last.fraction_free > first.fraction_free,
        format!(
            "fraction free {:.2} at k={} vs {:.2} at k={}",
            last.fraction_free, last.k, first.fraction_free, first.k
        ),
    ));
    // Compare against the second size when there is one.
    let earlier = if levels.len() >= 3 { &levels[1] } else { first };
    checks.push(Check::new(
        "freeness_median_shrinks",
        last.median_defect < earlier.median_defect,
        format!(
            "median defect {:.4} at k={} vs {:.4} at k={}",
            last.median_defect, last.k, earlier.median_defect, earlier.k
        ),
    ));
    checks.push(Check::new(
        "freeness_fraction_at_largest_k",
        last.fraction_free >= f.min_fraction,
        format!("fraction free {:.2} at k={}, required {:.2}", last.fraction_free, last.k, f.min_fraction),
    ));
    checks.push(Check::new(
        "dependent_blocks_not_free",
        dependent.fraction_free <= 0.05,
        format!("identical blocks free in {} of {} draws", dependent.free, dependent.draws),
    ));

    tables.push(Table::new(
        "freeness",
        "k,draws,median_defect,max_defect,free,fraction_free",
        levels.iter().map(|l| {
            format!(
                "{},{},{},{},{},{}",
                l.k,
                l.draws,
                csv_f64(l.median_defect),
                csv_f64(l.max_defect),
                l.free,
                csv_f64(l.fraction_free)
            )
        }),
    ));

    let results = json!({
        "additivity": {
            "factor": factor_est,
            "product": product_est,
            "residuals": residuals,
        },
        "freeness": {
            "levels": levels,
            "dependent_blocks": dependent,
        },
    });
    Ok(Outcome::new(
        Report::new("product-freeness", config, results, checks),
        tables,
    ))
}
