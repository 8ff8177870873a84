use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrices::{BallSampler, ChunkPlan, RngStream, TupleBallSampler};
use crate::zones::Zone;

/// Monte Carlo settings for hit-ratio estimation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HitParams {
    pub samples: usize,
    pub bootstrap: usize,
    pub level: f64,
    pub sampler: BallSampler,
    pub chunks: usize,
}

impl Default for HitParams {
    fn default() -> Self {
        Self {
            samples: 10_000,
            bootstrap: 1000,
            level: 0.95,
            sampler: BallSampler::default(),
            chunks: 8,
        }
    }
}

impl HitParams {
    pub fn with_samples(samples: usize) -> Self {
        Self {
            samples,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 100 {
            return Err(invalid("hit-ratio estimation needs at least 100 samples"));
        }
        if self.bootstrap < 200 {
            return Err(invalid("bootstrap needs at least 200 resamples"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("confidence level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// p̂ with a percentile-bootstrap interval. With zero hits the interval is the
/// one-sided rule-of-three bound [0, 3/N].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRatio {
    pub hits: usize,
    pub samples: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub zero_hits: bool,
}

/// Percentile bootstrap interval for the mean of `samples`.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    samples: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples.len() < 100 {
        return Err(invalid("bootstrap needs at least 100 samples"));
    }
    if resamples < 200 {
        return Err(invalid("bootstrap needs at least 200 resamples"));
    }
    let n = samples.len();
    let means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    Ok(percentile_interval(means, level))
}

/// Bootstrap interval for a proportion. Resampling N indicators with
/// replacement gives Binomial(N, p̂) hits, which is drawn directly.
pub fn indicator_bootstrap_ci<R: Rng + ?Sized>(
    hits: usize,
    samples: usize,
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples < 100 || resamples < 200 || hits > samples {
        return Err(invalid("bootstrap needs ≥ 100 samples, ≥ 200 resamples, hits ≤ samples"));
    }
    let p = hits as f64 / samples as f64;
    let binom = Binomial::new(samples as u64, p).map_err(|e| invalid(e.to_string()))?;
    let means = (0..resamples)
        .map(|_| binom.sample(rng) as f64 / samples as f64)
        .collect();
    Ok(percentile_interval(means, level))
}

fn percentile_interval(mut means: Vec<f64>, level: f64) -> (f64, f64) {
    means.sort_by(f64::total_cmp);
    let b = means.len();
    let idx = |q: f64| (((b as f64) * q).ceil() as usize).clamp(1, b) - 1;
    let tail = 0.5 * (1.0 - level);
    (means[idx(tail)], means[idx(1.0 - tail)])
}

fn check_reference(z: &Zone, reference_radius: f64) -> Result<()> {
    let bound = z.bound().ok_or(Error::Unbounded)?;
    if !(reference_radius.is_finite() && reference_radius > 0.0) {
        return Err(invalid("reference radius must be positive"));
    }
    if bound > reference_radius * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "zone bound {bound} exceeds the reference radius {reference_radius}"
        )));
    }
    Ok(())
}

/// Hit counts of several zones on one shared stream of reference samples.
#[allow(clippy::too_many_arguments)]
pub fn count_hits(
    zones: &[Zone],
    m: usize,
    k: usize,
    gamma: f64,
    reference_radius: f64,
    params: &HitParams,
    stream: &RngStream,
) -> Result<Vec<usize>> {
    let first = zones.first().ok_or_else(|| invalid("no zones given"))?;
    for z in zones {
        if z.n() != first.n() {
            return Err(crate::error::mismatch("zones have different variable counts"));
        }
        check_reference(z, reference_radius)?;
    }
    params.validate()?;
    let plan = ChunkPlan::new(params.chunks);
    let parts = plan.run(stream, params.samples, |_, count, rng| {
        let mut sampler =
            TupleBallSampler::new(first.n(), k, reference_radius, &params.sampler, rng)?;
        let mut hits = vec![0usize; zones.len()];
        for _ in 0..count {
            let xi = sampler.next(rng)?;
            for (h, z) in hits.iter_mut().zip(zones) {
                if z.contains(m, gamma, &xi)? {
                    *h += 1;
                }
            }
        }
        Ok::<_, Error>(hits)
    });
    let mut total = vec![0usize; zones.len()];
    for p in parts {
        for (t, h) in total.iter_mut().zip(p?) {
            *t += h;
        }
    }
    Ok(total)
}

/// Turns a hit count into p̂ with its bootstrap interval.
pub fn hit_ratio_from_counts(
    hits: usize,
    samples: usize,
    params: &HitParams,
    stream: &RngStream,
) -> Result<HitRatio> {
    let p_hat = hits as f64 / samples as f64;
    let (ci_lo, ci_hi) = if hits == 0 {
        (0.0, (3.0 / samples as f64).min(1.0))
    } else {
        let mut rng = stream.substream(u64::MAX).rng();
        indicator_bootstrap_ci(hits, samples, params.bootstrap, params.level, &mut rng)?
    };
    Ok(HitRatio {
        hits,
        samples,
        p_hat,
        ci_lo: ci_lo.min(p_hat),
        ci_hi: ci_hi.max(p_hat),
        zero_hits: hits == 0,
    })
}

/// Fraction of uniform samples of the radius-R_ref ball (per coordinate)
/// that lie in Z(m, k, γ).
pub fn estimate_hit_ratio(
    z: &Zone,
    m: usize,
    k: usize,
    gamma: f64,
    reference_radius: f64,
    params: &HitParams,
    stream: &RngStream,
) -> Result<HitRatio> {
    Ok(estimate_hit_ratios(
        std::slice::from_ref(z),
        m,
        k,
        gamma,
        reference_radius,
        params,
        stream,
    )?
    .remove(0))
}

/// [`estimate_hit_ratio`] for several zones with common random numbers.
pub fn estimate_hit_ratios(
    zones: &[Zone],
    m: usize,
    k: usize,
    gamma: f64,
    reference_radius: f64,
    params: &HitParams,
    stream: &RngStream,
) -> Result<Vec<HitRatio>> {
    let hits = count_hits(zones, m, k, gamma, reference_radius, params, stream)?;
    hits.into_iter()
        .enumerate()
        .map(|(i, h)| hit_ratio_from_counts(h, params.samples, params, &stream.substream(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::StarMonomial;
    use crate::zones::{CenterSet, ConstraintMode};
    use num_complex::Complex64;

    #[test]
    fn degenerate_bootstrap() {
        let mut rng = RngStream::new(1).rng();
        assert_eq!(bootstrap_ci(&[1.0; 200], 300, 0.95, &mut rng).unwrap(), (1.0, 1.0));
        assert_eq!(bootstrap_ci(&[0.0; 200], 300, 0.95, &mut rng).unwrap(), (0.0, 0.0));
        assert!(bootstrap_ci(&[0.0; 50], 300, 0.95, &mut rng).is_err());
        assert!(bootstrap_ci(&[0.0; 200], 100, 0.95, &mut rng).is_err());
    }

    #[test]
    fn bootstrap_coverage() {
        let mut rng = RngStream::new(2).rng();
        let mut covered = 0;
        for _ in 0..100 {
            let s: Vec<f64> = (0..1000).map(|_| f64::from(rng.random_bool(0.5))).collect();
            let (lo, hi) = bootstrap_ci(&s, 400, 0.95, &mut rng).unwrap();
            if lo <= 0.5 && 0.5 <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 80, "{covered}");
    }

    #[test]
    fn binomial_path_matches_resampling() {
        let mut rng = RngStream::new(3).rng();
        let s: Vec<f64> = (0..1000).map(|i| f64::from(i % 4 == 0)).collect();
        let a = bootstrap_ci(&s, 2000, 0.9, &mut rng).unwrap();
        let b = indicator_bootstrap_ci(250, 1000, 2000, 0.9, &mut rng).unwrap();
        assert!((a.0 - b.0).abs() < 0.01 && (a.1 - b.1).abs() < 0.01, "{a:?} {b:?}");
    }

    #[test]
    fn full_ball_hits_everything() {
        let z = Zone::ball(1, 1.0).unwrap();
        let r = estimate_hit_ratio(&z, 1, 3, 0.1, 1.0, &HitParams::with_samples(500), &RngStream::new(4)).unwrap();
        assert_eq!(r.p_hat, 1.0);
    }

    #[test]
    fn scalar_ratios() {
        let p = HitParams::with_samples(20_000);
        let s = RngStream::new(5);
        let half = Zone::ball(1, 0.5).unwrap();
        let r = estimate_hit_ratio(&half, 1, 1, 0.1, 1.0, &p, &s).unwrap();
        assert!(r.ci_lo - 0.01 < 0.5 && 0.5 < r.ci_hi + 0.01, "{r:?}");
        let c = Zone::ball(1, 1.0)
            .unwrap()
            .with_constraint(
                "x1".parse::<StarMonomial>().unwrap(),
                CenterSet::point(Complex64::new(0.0, 0.0)),
                ConstraintMode::Neighborhood,
            )
            .unwrap();
        let r = estimate_hit_ratio(&c, 1, 1, 0.1, 1.0, &p, &s).unwrap();
        assert!((r.p_hat - 0.1).abs() < 0.01, "{r:?}");
    }

    #[test]
    fn zone_outside_reference_is_rejected() {
        let z = Zone::ball(1, 2.0).unwrap();
        assert!(estimate_hit_ratio(&z, 1, 2, 0.1, 1.0, &HitParams::default(), &RngStream::new(0)).is_err());
    }
}
