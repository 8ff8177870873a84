use std::f64::consts::{LN_2, PI};

use serde_json::json;

use super::config::EntropyConfig;
use super::report::{num, Check, Outcome, Report, Table};
use crate::entropy::{
    chi_estimate, chi_single_selfadjoint_exact, exact_log_volume, ChiParams, EntropyEstimate,
    GridDensity,
};
use crate::error::{Error, Result};
use crate::matrices::RngStream;
use crate::zones::{product_all, Zone};

/// Single-variable reference values for the comparison lines.
fn reference_values(config: &EntropyConfig) -> Result<Vec<(&'static str, f64)>> {
    let cells = config.density_cells;
    let semicircle2 = chi_single_selfadjoint_exact(&GridDensity::semicircle(2.0, cells)?)?;
    let semicircle1 = chi_single_selfadjoint_exact(&GridDensity::semicircle(1.0, cells)?)?;
    let arcsine = chi_single_selfadjoint_exact(&GridDensity::arcsine(-1.0, 1.0, cells)?)?;
    Ok(vec![
        ("claimed_half_log_2_pi_e", 0.5 * (2.0 * PI * std::f64::consts::E).ln()),
        ("semicircle_radius_2", semicircle2),
        ("semicircle_radius_1", semicircle1),
        ("arcsine_unit_interval", arcsine),
        ("arcsine_unit_interval_minus_half_log_2", arcsine - 0.5 * LN_2),
        ("ball_series_limit", 0.5 * PI.ln() + 0.75 - LN_2),
    ])
}

fn power(zone: &Zone, p: usize) -> Result<Zone> {
    if p == 1 {
        Ok(zone.clone())
    } else {
        product_all(&vec![zone.clone(); p])
    }
}

pub fn run(config: &EntropyConfig) -> Result<Outcome> {
    let master = RngStream::new(config.run.seed);
    let mut mc_params = config.monte_carlo.clone();
    mc_params.hits.chunks = config.run.chunks;
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    let mut per_power = Vec::new();
    let mut base_exact: Option<EntropyEstimate> = None;

    for &p in &config.powers {
        let z = power(&config.zone, p)?;
        let has_exact = config
            .exact_k_grid
            .iter()
            .all(|&k| exact_log_volume(&z, k).is_some());
        let exact = if has_exact {
            Some(chi_estimate(
                &z,
                &config.scale,
                config.m,
                config.gamma,
                &config.exact_k_grid,
                &ChiParams::exact(),
                &master,
            )?)
        } else {
            None
        };
        let mc = chi_estimate(
            &z,
            &config.scale,
            config.m,
            config.gamma,
            &config.mc_k_grid,
            &mc_params,
            &master.path(&[1, p as u64]),
        )
        .map_err(Error::at("monte carlo route"))?;

        if p == 1 {
            if let Some(e) = &exact {
                checks.push(Check::new(
                    "exact_tail_spread",
                    e.spread < 0.05,
                    format!("spread {:.6} over k = {:?}", e.spread, e.tail_ks),
                ));
            }
            base_exact = exact.clone();
        }

        let mut comparisons = Vec::new();
        for point in &mc.points {
            let k = point.k;
            // Exact value of Z^p, or p times that of Z when only the factor is known.
            let target = match (exact_log_volume(&z, k), &base_exact) {
                (Some(v), _) => Some(config.scale.chi_from_log_volume(z.n(), k, v)),
                (None, Some(_)) => exact_log_volume(&config.zone, k)
                    .map(|v| p as f64 * config.scale.chi_from_log_volume(config.zone.n(), k, v)),
                _ => None,
            };
            let Some(target) = target else { continue };
            let hw = point.half_width();
            let diff = (point.chi - target).abs();
            let ok = diff <= 3.0 * hw;
            let name = if p == 1 {
                format!("mc_matches_exact_k{k}")
            } else {
                format!("power_{p}_scaling_k{k}")
            };
            checks.push(Check::new(
                name,
                ok,
                format!("mc {:.6} exact {:.6} diff {:.2e} 3ci {:.2e}", point.chi, target, diff, 3.0 * hw),
            ));
            comparisons.push(json!({
                "k": k,
                "mc": num(point.chi),
                "exact": num(target),
                "difference": num(diff),
                "three_ci": num(3.0 * hw),
                "within": ok,
            }));
        }

        if let Some(e) = &exact {
            tables.push(Table {
                name: format!("entropy_exact_p{p}"),
                csv: e.to_csv(),
            });
        }
        tables.push(Table {
            name: format!("entropy_mc_p{p}"),
            csv: mc.to_csv(),
        });
        per_power.push(json!({
            "power": p,
            "n": z.n(),
            "exact": exact,
            "monte_carlo": mc,
            "mc_vs_exact": comparisons,
        }));
    }

    let refs = reference_values(config)?;
    let base_tail = base_exact.as_ref().map(|e| e.tail);
    let mut lines = Vec::new();
    for &p in &config.powers {
        for (label, v) in &refs {
            let scaled = p as f64 * v;
            lines.push(json!({
                "power": p,
                "label": label,
                "value": num(scaled),
                "gap_to_tail": base_tail.map_or(serde_json::Value::Null, |t| num(p as f64 * t - scaled)),
            }));
        }
    }
    tables.push(Table::new(
        "entropy_comparison",
        "power,label,value",
        config.powers.iter().flat_map(|&p| {
            refs.iter()
                .map(move |(l, v)| format!("{p},{l},{}", crate::serde_ext::csv_f64(p as f64 * v)))
        }),
    ));

    let results = json!({
        "powers": per_power,
        "comparison": lines,
    });
    Ok(Outcome::new(Report::new("entropy", config, results, checks), tables))
}
