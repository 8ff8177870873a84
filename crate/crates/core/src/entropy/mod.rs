//! Scales, the finite-k free entropy estimator and its exact special cases.

mod hit;
mod single;
mod volume;

pub use hit::{
    bootstrap_ci, count_hits, estimate_hit_ratio, estimate_hit_ratios, hit_ratio_from_counts,
    indicator_bootstrap_ci, HitParams, HitRatio,
};
pub use single::{chi_single_selfadjoint_exact, GridDensity};
pub use volume::{log_volume_opball, log_volume_opball_exact};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrices::{diag, MatrixTuple, RngStream};
use crate::serde_ext::{csv_f64, extended_f64, extended_f64_vec};
use crate::zones::{union_all, Zone, ZoneDescriptor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// Lebesgue measure on self-adjoint tuples with c_k = k^{nk²}.
    #[default]
    SelfadjointLebesgue,
}

/// A measure family with rate r_k = k^{-rate_exponent}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scale {
    pub measure: MeasureKind,
    pub rate_exponent: f64,
}

impl Default for Scale {
    fn default() -> Self {
        Self {
            measure: MeasureKind::SelfadjointLebesgue,
            rate_exponent: 2.0,
        }
    }
}

impl Scale {
    pub fn new(rate_exponent: f64) -> Result<Self> {
        if !(rate_exponent.is_finite() && rate_exponent > 0.0) {
            return Err(invalid("rate exponent must be positive"));
        }
        Ok(Self {
            measure: MeasureKind::SelfadjointLebesgue,
            rate_exponent,
        })
    }

    pub fn rate(&self, k: usize) -> f64 {
        (k as f64).powf(-self.rate_exponent)
    }

    /// log c_k = n k² log k.
    pub fn log_normalizer(&self, n: usize, k: usize) -> f64 {
        let k2 = (k * k) as f64;
        n as f64 * k2 * (k as f64).ln()
    }

    /// χ_k from a log-volume in standard entry coordinates. The ‖·‖₂
    /// normalization of the self-adjoint volume contributes -(n k²/2) log k.
    pub fn chi_from_log_volume(&self, n: usize, k: usize, log_volume: f64) -> f64 {
        if log_volume == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let k2 = (k * k) as f64;
        let coord = -0.5 * n as f64 * k2 * (k as f64).ln();
        self.rate(k) * (self.log_normalizer(n, k) + log_volume + coord)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Exact,
    ScalarQuadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutePreference {
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChiParams {
    pub route: RoutePreference,
    /// Radius of the reference ball for Monte Carlo; defaults to the zone bound.
    pub reference_radius: Option<f64>,
    pub hits: HitParams,
    /// Midpoint cells for the k = 1 scalar route.
    pub scalar_cells: usize,
}

impl Default for ChiParams {
    fn default() -> Self {
        Self {
            route: RoutePreference::Auto,
            reference_radius: None,
            hits: HitParams::default(),
            scalar_cells: 1 << 16,
        }
    }
}

impl ChiParams {
    pub fn monte_carlo(samples: usize) -> Self {
        Self {
            route: RoutePreference::MonteCarlo,
            hits: HitParams::with_samples(samples),
            ..Self::default()
        }
    }

    pub fn exact() -> Self {
        Self {
            route: RoutePreference::Exact,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiPoint {
    pub k: usize,
    #[serde(with = "extended_f64")]
    pub chi: f64,
    #[serde(with = "extended_f64")]
    pub ci_lo: f64,
    #[serde(with = "extended_f64")]
    pub ci_hi: f64,
    pub route: Route,
    pub n_samples: usize,
    pub hits: usize,
    #[serde(with = "extended_f64")]
    pub log_volume: f64,
}

impl ChiPoint {
    /// Half the interval width, 0 for exact routes.
    pub fn half_width(&self) -> f64 {
        if self.ci_lo.is_finite() && self.ci_hi.is_finite() {
            0.5 * (self.ci_hi - self.ci_lo)
        } else if self.ci_hi.is_finite() {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

fn ball_radius(d: &ZoneDescriptor) -> Option<f64> {
    match d {
        ZoneDescriptor::Ball { radius } => Some(*radius),
        ZoneDescriptor::Intersect { children } => children
            .iter()
            .map(ball_radius)
            .collect::<Option<Vec<_>>>()
            .and_then(|v| v.into_iter().reduce(f64::min)),
        ZoneDescriptor::Union { children } => children
            .iter()
            .map(ball_radius)
            .collect::<Option<Vec<_>>>()
            .and_then(|v| v.into_iter().reduce(f64::max)),
        _ => None,
    }
}

fn exact_descriptor_volume(d: &ZoneDescriptor, n: usize, k: usize) -> Option<f64> {
    if let Some(r) = ball_radius(d) {
        return Some(n as f64 * log_volume_opball(k, r));
    }
    match d {
        ZoneDescriptor::Product { parts } => parts
            .iter()
            .map(|p| exact_descriptor_volume(&p.zone, p.n, k))
            .sum(),
        _ => None,
    }
}

/// Closed-form log-volume for zones built from balls by intersection, union
/// and products.
pub fn exact_log_volume(z: &Zone, k: usize) -> Option<f64> {
    exact_descriptor_volume(z.descriptor(), z.n(), k)
}

/// log length of {t ∈ [-R, R] : (t) ∈ Z(m, 1, γ)} by midpoint counting; exact
/// for finite unions of intervals with endpoints on the grid.
pub fn scalar_log_length(z: &Zone, m: usize, gamma: f64, cells: usize) -> Result<f64> {
    if z.n() != 1 {
        return Err(invalid("the scalar route needs n = 1"));
    }
    if cells == 0 {
        return Err(invalid("scalar route needs at least one cell"));
    }
    let r = z.bound().ok_or(Error::Unbounded)?;
    let h = 2.0 * r / cells as f64;
    let mut count = 0usize;
    for i in 0..cells {
        let t = -r + (i as f64 + 0.5) * h;
        let xi = MatrixTuple::new(vec![diag(&[t])], true)?;
        if z.contains(m, gamma, &xi)? {
            count += 1;
        }
    }
    Ok((count as f64 * h).ln())
}

/// r_k · log μ(Z(m, k, γ)) with an interval.
#[allow(clippy::too_many_arguments)]
pub fn chi_at_k(
    z: &Zone,
    scale: &Scale,
    m: usize,
    k: usize,
    gamma: f64,
    params: &ChiParams,
    stream: &RngStream,
) -> Result<ChiPoint> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let n = z.n();
    let exact = |log_volume: f64, route: Route| {
        let chi = scale.chi_from_log_volume(n, k, log_volume);
        ChiPoint {
            k,
            chi,
            ci_lo: chi,
            ci_hi: chi,
            route,
            n_samples: 0,
            hits: 0,
            log_volume,
        }
    };
    let scalar_ok = n == 1 && k == 1;
    match params.route {
        RoutePreference::Auto | RoutePreference::Exact => {
            if let Some(v) = exact_log_volume(z, k) {
                return Ok(exact(v, Route::Exact));
            }
            if scalar_ok {
                let v = scalar_log_length(z, m, gamma, params.scalar_cells)?;
                return Ok(exact(v, Route::ScalarQuadrature));
            }
            if params.route == RoutePreference::Exact {
                return Err(Error::NoExactRoute);
            }
        }
        RoutePreference::MonteCarlo => {}
    }
    let bound = z.bound().ok_or(Error::Unbounded)?;
    let r_ref = params.reference_radius.unwrap_or(bound);
    let hr = estimate_hit_ratio(z, m, k, gamma, r_ref, &params.hits, stream)?;
    Ok(mc_point(scale, n, k, r_ref, &hr))
}

fn mc_point(scale: &Scale, n: usize, k: usize, r_ref: f64, hr: &HitRatio) -> ChiPoint {
    let base = n as f64 * log_volume_opball(k, r_ref);
    let chi_of = |p: f64| scale.chi_from_log_volume(n, k, base + p.ln());
    ChiPoint {
        k,
        chi: chi_of(hr.p_hat),
        ci_lo: chi_of(hr.ci_lo),
        ci_hi: chi_of(hr.ci_hi),
        route: Route::MonteCarlo,
        n_samples: hr.samples,
        hits: hr.hits,
        log_volume: base + hr.p_hat.ln(),
    }
}

/// χ_k over a grid with the limsup surrogate: the max over the top half.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub m: usize,
    pub gamma: f64,
    pub scale: Scale,
    pub points: Vec<ChiPoint>,
    /// Grid values whose χ_k enter the tail statistic.
    pub tail_ks: Vec<usize>,
    #[serde(with = "extended_f64")]
    pub tail: f64,
    /// max - min of χ_k over `tail_ks`.
    #[serde(with = "extended_f64")]
    pub spread: f64,
    pub monotone_increasing: bool,
    pub monotone_decreasing: bool,
}

impl EntropyEstimate {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,chi_k,ci_lo,ci_hi,n_samples,hits\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.k,
                csv_f64(p.chi),
                csv_f64(p.ci_lo),
                csv_f64(p.ci_hi),
                p.n_samples,
                p.hits
            ));
        }
        s
    }

    pub fn point(&self, k: usize) -> Option<&ChiPoint> {
        self.points.iter().find(|p| p.k == k)
    }
}

fn summarize(m: usize, gamma: f64, scale: Scale, mut points: Vec<ChiPoint>) -> EntropyEstimate {
    points.sort_by_key(|p| p.k);
    let half = points.len().div_ceil(2);
    let top = &points[points.len() - half..];
    let tail = top.iter().map(|p| p.chi).fold(f64::NEG_INFINITY, f64::max);
    let lo = top.iter().map(|p| p.chi).fold(f64::INFINITY, f64::min);
    let spread = if tail == f64::NEG_INFINITY {
        0.0
    } else {
        tail - lo
    };
    let chis: Vec<f64> = points.iter().map(|p| p.chi).collect();
    EntropyEstimate {
        m,
        gamma,
        scale,
        tail_ks: top.iter().map(|p| p.k).collect(),
        tail,
        spread,
        monotone_increasing: chis.windows(2).all(|w| w[0] < w[1]),
        monotone_decreasing: chis.windows(2).all(|w| w[0] > w[1]),
        points,
    }
}

/// Evaluates [`chi_at_k`] on every k of the grid.
#[allow(clippy::too_many_arguments)]
pub fn chi_estimate(
    z: &Zone,
    scale: &Scale,
    m: usize,
    gamma: f64,
    k_grid: &[usize],
    params: &ChiParams,
    stream: &RngStream,
) -> Result<EntropyEstimate> {
    if k_grid.is_empty() {
        return Err(invalid("k grid is empty"));
    }
    let points = k_grid
        .iter()
        .map(|&k| chi_at_k(z, scale, m, k, gamma, params, &stream.substream(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(m, gamma, *scale, points))
}

/// Tail estimates along a (m, γ) schedule and their running minimum, the
/// surrogate of the infimum over (m, γ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEstimate {
    pub estimates: Vec<EntropyEstimate>,
    #[serde(with = "extended_f64_vec")]
    pub running_min: Vec<f64>,
    #[serde(with = "extended_f64")]
    pub value: f64,
}

pub fn chi_schedule(
    z: &Zone,
    scale: &Scale,
    schedule: &[(usize, f64)],
    k_grid: &[usize],
    params: &ChiParams,
    stream: &RngStream,
) -> Result<ScheduleEstimate> {
    if schedule.is_empty() {
        return Err(invalid("(m, γ) schedule is empty"));
    }
    let estimates = schedule
        .iter()
        .enumerate()
        .map(|(i, &(m, g))| chi_estimate(z, scale, m, g, k_grid, params, &stream.substream(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let running_min: Vec<f64> = estimates
        .iter()
        .scan(f64::INFINITY, |acc, e| {
            *acc = acc.min(e.tail);
            Some(*acc)
        })
        .collect();
    Ok(ScheduleEstimate {
        value: *running_min.last().expect("nonempty schedule"),
        running_min,
        estimates,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionMaxLevel {
    pub k: usize,
    pub route: Route,
    #[serde(with = "extended_f64")]
    pub union_chi: f64,
    #[serde(with = "extended_f64_vec")]
    pub member_chi: Vec<f64>,
    #[serde(with = "extended_f64")]
    pub max_chi: f64,
    /// χ_k(∪ Z_j) - max_j χ_k(Z_j).
    #[serde(with = "extended_f64")]
    pub discrepancy: f64,
    /// r_k log(count), the largest admissible discrepancy.
    pub bound: f64,
    /// Monte Carlo allowance: three combined interval half-widths.
    #[serde(with = "extended_f64")]
    pub tolerance: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionMaxReport {
    pub m: usize,
    pub gamma: f64,
    pub levels: Vec<UnionMaxLevel>,
    pub all_within: bool,
}

fn union_level(
    k: usize,
    route: Route,
    union_chi: f64,
    member_chi: Vec<f64>,
    bound: f64,
    tolerance: f64,
) -> UnionMaxLevel {
    let max_chi = member_chi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let discrepancy = if union_chi == max_chi {
        0.0
    } else {
        union_chi - max_chi
    };
    let within = max_chi <= union_chi + tolerance + 1e-12
        && (union_chi <= max_chi + bound + tolerance + 1e-12);
    UnionMaxLevel {
        k,
        route,
        union_chi,
        member_chi,
        max_chi,
        discrepancy,
        bound,
        tolerance,
        within,
    }
}

/// Checks max_j χ_k(Z_j) ≤ χ_k(∪ Z_j) ≤ max_j χ_k(Z_j) + r_k log(count) on
/// every grid point. k = 1 with n = 1 uses the scalar route; other points use
/// common Monte Carlo samples for the union and the members.
#[allow(clippy::too_many_arguments)]
pub fn union_max_check(
    zones: &[Zone],
    scale: &Scale,
    m: usize,
    gamma: f64,
    k_grid: &[usize],
    params: &ChiParams,
    stream: &RngStream,
) -> Result<UnionMaxReport> {
    let union = union_all(zones)?;
    let n = union.n();
    let count = zones.len() as f64;
    let r_ref = match params.reference_radius {
        Some(r) => r,
        None => union.bound().ok_or(Error::Unbounded)?,
    };
    let mut levels = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let bound = scale.rate(k) * count.ln();
        if n == 1 && k == 1 && params.route != RoutePreference::MonteCarlo {
            let chi = |z: &Zone| -> Result<f64> {
                let v = scalar_log_length(z, m, gamma, params.scalar_cells)?;
                Ok(scale.chi_from_log_volume(1, 1, v))
            };
            let members = zones.iter().map(chi).collect::<Result<Vec<_>>>()?;
            levels.push(union_level(k, Route::ScalarQuadrature, chi(&union)?, members, bound, 0.0));
            continue;
        }
        let s = stream.substream(k as u64);
        let mut all = vec![union.clone()];
        all.extend(zones.iter().cloned());
        let hits = count_hits(&all, m, k, gamma, r_ref, &params.hits, &s)?;
        let points = hits
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let hr = hit_ratio_from_counts(h, params.hits.samples, &params.hits, &s.substream(i as u64))?;
                Ok(mc_point(scale, n, k, r_ref, &hr))
            })
            .collect::<Result<Vec<_>>>()?;
        let union_point = &points[0];
        let members = &points[1..];
        let arg = members
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.chi.total_cmp(&b.1.chi))
            .map(|(i, _)| i)
            .expect("at least one zone");
        let tolerance = 3.0 * (union_point.half_width() + members[arg].half_width());
        levels.push(union_level(
            k,
            Route::MonteCarlo,
            union_point.chi,
            members.iter().map(|p| p.chi).collect(),
            bound,
            tolerance,
        ));
    }
    Ok(UnionMaxReport {
        m,
        gamma,
        all_within: levels.iter().all(|l| l.within),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::StarMonomial;
    use crate::zones::{intersect, CenterSet, ConstraintMode};
    use num_complex::Complex64;

    fn interval(lo: f64, hi: f64) -> Zone {
        Zone::ball(1, 1.0)
            .unwrap()
            .with_constraint(
                "x1".parse::<StarMonomial>().unwrap(),
                CenterSet::Segment { lo, hi },
                ConstraintMode::Exact,
            )
            .unwrap()
    }

    #[test]
    fn scalar_ball_is_log_two() {
        let p = chi_at_k(&Zone::ball(1, 1.0).unwrap(), &Scale::default(), 1, 1, 0.1, &ChiParams::default(), &RngStream::new(0)).unwrap();
        assert!((p.chi - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn k2_exact_value() {
        let p = chi_at_k(&Zone::ball(1, 1.0).unwrap(), &Scale::default(), 1, 2, 0.1, &ChiParams::exact(), &RngStream::new(0)).unwrap();
        let expect = 0.25 * (4.0 * std::f64::consts::PI / 3.0).ln() + 0.5 * 2f64.ln();
        assert!((p.chi - expect).abs() < 1e-12);
    }

    #[test]
    fn exact_series_converges() {
        let e = chi_estimate(
            &Zone::ball(1, 1.0).unwrap(),
            &Scale::default(),
            1,
            0.1,
            &[2, 4, 8, 16, 24, 32],
            &ChiParams::exact(),
            &RngStream::new(0),
        )
        .unwrap();
        assert!(e.spread < 0.05, "{}", e.spread);
        assert!(e.monotone_decreasing);
        assert_eq!(e.tail_ks, vec![16, 24, 32]);
    }

    #[test]
    fn single_k_grid_equals_chi_at_k() {
        let z = Zone::ball(1, 1.0).unwrap();
        let s = RngStream::new(3);
        let p = ChiParams::monte_carlo(500);
        let e = chi_estimate(&z, &Scale::default(), 1, 0.1, &[3], &p, &s).unwrap();
        let direct = chi_at_k(&z, &Scale::default(), 1, 3, 0.1, &p, &s.substream(3)).unwrap();
        assert_eq!(e.points[0], direct);
        assert_eq!(e.tail, direct.chi);
    }

    #[test]
    fn empty_zone_is_minus_infinity() {
        let z = interval(0.5, 1.0)
            .with_constraint(
                "x1".parse::<StarMonomial>().unwrap(),
                CenterSet::Segment { lo: -1.0, hi: -0.5 },
                ConstraintMode::Exact,
            )
            .unwrap();
        let e = chi_estimate(&z, &Scale::default(), 1, 0.1, &[2, 3], &ChiParams::monte_carlo(200), &RngStream::new(1)).unwrap();
        assert!(e.points.iter().all(|p| p.chi == f64::NEG_INFINITY));
        assert!(e.to_csv().contains("-inf"));
        let json = serde_json::to_string(&e).unwrap();
        let back: EntropyEstimate = serde_json::from_str(&json).unwrap();
        assert_eq!(back.tail, f64::NEG_INFINITY);
    }

    #[test]
    fn union_of_two_intervals() {
        let r = union_max_check(
            &[interval(-1.0, 0.0), interval(0.0, 1.0)],
            &Scale::default(),
            1,
            0.1,
            &[1],
            &ChiParams::default(),
            &RngStream::new(0),
        )
        .unwrap();
        let l = &r.levels[0];
        assert_eq!(l.route, Route::ScalarQuadrature);
        assert!((l.union_chi - 2f64.ln()).abs() < 1e-12);
        assert!(l.max_chi.abs() < 1e-12);
        assert!((l.discrepancy - 2f64.ln()).abs() < 1e-12);
        assert!(r.all_within);
    }

    #[test]
    fn union_of_identical_balls() {
        let b = Zone::ball(1, 1.0).unwrap();
        let r = union_max_check(&[b.clone(), b], &Scale::default(), 1, 0.1, &[2, 3], &ChiParams::default(), &RngStream::new(0)).unwrap();
        assert!(r.levels.iter().all(|l| l.discrepancy == 0.0));
    }

    #[test]
    fn subzone_is_not_larger() {
        let z = Zone::ball(1, 1.0).unwrap();
        let w = intersect(&z, &Zone::ball(1, 0.9).unwrap()).unwrap();
        let w = w
            .with_constraint(
                "x1 x1".parse::<StarMonomial>().unwrap(),
                CenterSet::point(Complex64::new(0.3, 0.0)),
                ConstraintMode::Neighborhood,
            )
            .unwrap();
        let p = ChiParams::monte_carlo(2000);
        let s = RngStream::new(8);
        let a = chi_at_k(&w, &Scale::default(), 2, 3, 0.1, &ChiParams { reference_radius: Some(1.0), ..p.clone() }, &s).unwrap();
        let b = chi_at_k(&z, &Scale::default(), 2, 3, 0.1, &p, &s).unwrap();
        assert!(a.chi <= b.chi);
    }
}
