//! Moment extraction from a zone: entropy-maximizing covers of word-trace
//! values, nested refinement, and selection of microstate sequences.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{hit_ratio_from_counts, log_volume_opball, HitParams, Scale};
use crate::error::{invalid, Error, Result};
use crate::matrices::{
    hermitize, op_norm, sample_gue, BallSampler, ChunkPlan, MatrixTuple, RngStream, StreamRng,
    TupleBallSampler,
};
use crate::moments::{view_traces, MomentSpec, Provenance};
use crate::serde_ext::{extended_f64, extended_f64_vec};
use crate::words::{enumerate_words_with, StarMonomial};
use crate::zones::Zone;

/// Centers of a hexagonal lattice with covering radius `rho`, restricted to
/// the closed disc |z| ≤ radius. Lattice points just outside the disc are
/// projected onto the circle, which keeps the covering radius.
pub fn hex_net(radius: f64, rho: f64) -> Result<Vec<Complex64>> {
    if !(radius > 0.0 && rho > 0.0 && radius.is_finite() && rho.is_finite()) {
        return Err(invalid("net needs positive radius and covering radius"));
    }
    let a = rho * 3f64.sqrt();
    let h = a * 3f64.sqrt() / 2.0;
    let reach = radius + rho;
    let rows = (reach / h).ceil() as i64;
    let cols = (reach / a).ceil() as i64 + 1;
    let mut out: Vec<Complex64> = Vec::new();
    for j in -rows..=rows {
        let y = j as f64 * h;
        let shift = if j.rem_euclid(2) == 1 { 0.5 * a } else { 0.0 };
        for i in -cols..=cols {
            let p = Complex64::new(i as f64 * a + shift, y);
            let r = p.norm();
            if r <= radius {
                out.push(p);
            } else if r <= reach {
                out.push(p * (radius / r));
            }
        }
    }
    out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    out.dedup_by(|x, y| (*x - *y).norm() < 1e-12 * radius.max(1.0));
    Ok(out)
}

/// Settings shared by cover selection, refinement and extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverParams {
    pub m: usize,
    pub gamma: f64,
    pub k_grid: Vec<usize>,
    pub samples: usize,
    pub reference_radius: Option<f64>,
    pub sampler: BallSampler,
    pub chunks: usize,
    pub bootstrap: usize,
    pub level: f64,
    /// Decreasing net radii ε_1 > ε_2 > ⋯.
    pub epsilons: Vec<f64>,
}

impl Default for CoverParams {
    fn default() -> Self {
        Self {
            m: 4,
            gamma: 0.05,
            k_grid: vec![4],
            samples: 400_000,
            reference_radius: None,
            sampler: BallSampler::default(),
            chunks: 8,
            bootstrap: 200,
            level: 0.95,
            epsilons: (1..=10).map(|j| 1.0 / j as f64).collect(),
        }
    }
}

impl CoverParams {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || !(self.gamma > 0.0) {
            return Err(invalid("cover needs m ≥ 1 and γ > 0"));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(invalid("cover needs a nonempty grid of positive k"));
        }
        if self.samples < 100 || self.bootstrap < 200 {
            return Err(invalid("cover needs ≥ 100 samples and ≥ 200 bootstrap resamples"));
        }
        if self.epsilons.is_empty()
            || self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0))
            || self.epsilons.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(invalid("ε schedule must be positive and strictly decreasing"));
        }
        Ok(())
    }
}

/// Word traces of the reference samples that fall in the base zone, per k.
#[derive(Clone, Debug)]
struct PoolLevel {
    k: usize,
    total: usize,
    traces: Vec<Vec<Complex64>>,
}

#[derive(Clone, Debug)]
struct SamplePool {
    n: usize,
    reference_radius: f64,
    levels: Vec<PoolLevel>,
}

impl SamplePool {
    fn build(
        z: &Zone,
        words: &[StarMonomial],
        params: &CoverParams,
        stream: &RngStream,
    ) -> Result<Self> {
        let bound = z.bound().ok_or(Error::Unbounded)?;
        let r_ref = params.reference_radius.unwrap_or(bound);
        if bound > r_ref * (1.0 + 1e-12) {
            return Err(invalid("zone bound exceeds the reference radius"));
        }
        let plan = ChunkPlan::new(params.chunks);
        let mut levels = Vec::with_capacity(params.k_grid.len());
        for &k in &params.k_grid {
            let parts = plan.run(&stream.substream(k as u64), params.samples, |_, count, rng| {
                let mut s = TupleBallSampler::new(z.n(), k, r_ref, &params.sampler, rng)?;
                let mut out = Vec::new();
                for _ in 0..count {
                    let xi = s.next(rng)?;
                    if z.contains(params.m, params.gamma, &xi)? {
                        out.push(view_traces(&xi.view(), words)?);
                    }
                }
                Ok::<_, Error>(out)
            });
            let mut traces = Vec::new();
            for p in parts {
                traces.extend(p?);
            }
            levels.push(PoolLevel {
                k,
                total: params.samples,
                traces,
            });
        }
        Ok(Self {
            n: z.n(),
            reference_radius: r_ref,
            levels,
        })
    }

    fn chi(&self, scale: &Scale, level: usize, hits: f64) -> f64 {
        let l = &self.levels[level];
        let base = self.n as f64 * log_volume_opball(l.k, self.reference_radius);
        scale.chi_from_log_volume(self.n, l.k, base + (hits / l.total as f64).ln())
    }

    /// Indices of the levels entering the tail statistic.
    fn tail_levels(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.levels.len()).collect();
        idx.sort_by_key(|&i| self.levels[i].k);
        let half = idx.len().div_ceil(2);
        idx.split_off(idx.len() - half)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterEstimate {
    pub center: [f64; 2],
    #[serde(with = "extended_f64")]
    pub chi: f64,
    #[serde(with = "extended_f64")]
    pub ci_lo: f64,
    #[serde(with = "extended_f64")]
    pub ci_hi: f64,
    pub hits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSelection {
    pub word: StarMonomial,
    pub lambda: [f64; 2],
    pub epsilon: f64,
    /// C(w) = R^{deg w}, the radius of the covered disc.
    pub disc_radius: f64,
    pub centers_total: usize,
    /// Centers with at least one hit, best first.
    pub centers: Vec<CenterEstimate>,
    #[serde(with = "extended_f64")]
    pub chi: f64,
    /// χ gap between the selected center and the runner-up.
    #[serde(with = "extended_f64")]
    pub margin: f64,
    /// Bounding box [Re, Im] of the centers whose χ interval reaches the
    /// lower end of the selected center's interval.
    pub lambda_ci: [[f64; 2]; 2],
}

impl CoverSelection {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.lambda[0], self.lambda[1])
    }

    /// Largest distance from λ to an edge of its confidence box.
    pub fn ci_half_width(&self) -> f64 {
        self.lambda_ci
            .iter()
            .zip(self.lambda)
            .map(|(c, x)| (x - c[0]).max(c[1] - x))
            .fold(0.0, f64::max)
    }
}

/// Hit counts per level for each center.
fn center_hits(
    pool: &SamplePool,
    word_idx: usize,
    centers: &[Complex64],
    radius: f64,
    active: &[Vec<bool>],
) -> Vec<Vec<usize>> {
    centers
        .par_iter()
        .map(|&c| {
            pool.levels
                .iter()
                .zip(active)
                .map(|(l, act)| {
                    l.traces
                        .iter()
                        .zip(act)
                        .filter(|(t, a)| **a && (t[word_idx] - c).norm() < radius)
                        .count()
                })
                .collect()
        })
        .collect()
}

/// Index of the best center: largest χ, then smallest |λ|, then (Re, Im).
fn argmax_center(chi: &[f64], centers: &[Complex64]) -> Option<usize> {
    (0..centers.len())
        .filter(|&i| chi[i] > f64::NEG_INFINITY)
        .min_by(|&a, &b| {
            chi[b]
                .total_cmp(&chi[a])
                .then(centers[a].norm().total_cmp(&centers[b].norm()))
                .then(centers[a].re.total_cmp(&centers[b].re))
                .then(centers[a].im.total_cmp(&centers[b].im))
        })
}

#[allow(clippy::too_many_arguments)]
fn select_on_pool(
    pool: &SamplePool,
    scale: &Scale,
    word: &StarMonomial,
    word_idx: usize,
    epsilon: f64,
    bound: f64,
    active: &[Vec<bool>],
    params: &CoverParams,
    stream: &RngStream,
) -> Result<CoverSelection> {
    let disc_radius = bound.powi(word.degree() as i32);
    let centers = hex_net(disc_radius, 0.5 * epsilon)?;
    // dist(tr w, B(λ, ε)) < γ
    let radius = epsilon + params.gamma;
    let hits = center_hits(pool, word_idx, &centers, radius, active);
    let tail = pool.tail_levels();
    let chi: Vec<f64> = hits
        .iter()
        .map(|h| {
            tail.iter()
                .map(|&li| pool.chi(scale, li, h[li] as f64))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let best = argmax_center(&chi, &centers).ok_or_else(|| Error::AllEmpty(word.to_string()))?;
    let mut ranked: Vec<usize> = (0..centers.len())
        .filter(|&i| chi[i] > f64::NEG_INFINITY)
        .collect();
    ranked.sort_by(|&a, &b| chi[b].total_cmp(&chi[a]).then(a.cmp(&b)));
    let runner_up = ranked
        .iter()
        .find(|&&i| i != best)
        .map_or(f64::NEG_INFINITY, |&i| chi[i]);

    let hit_params = HitParams {
        samples: params.samples,
        bootstrap: params.bootstrap,
        level: params.level,
        ..HitParams::default()
    };
    let estimates = ranked
        .iter()
        .map(|&i| {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &li in &tail {
                let r = hit_ratio_from_counts(
                    hits[i][li],
                    pool.levels[li].total,
                    &hit_params,
                    &stream.path(&[i as u64, li as u64]),
                )?;
                lo = lo.max(pool.chi(scale, li, r.ci_lo * r.samples as f64));
                hi = hi.max(pool.chi(scale, li, r.ci_hi * r.samples as f64));
            }
            Ok(CenterEstimate {
                center: [centers[i].re, centers[i].im],
                chi: chi[i],
                ci_lo: lo,
                ci_hi: hi,
                hits: hits[i].clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = estimates
        .iter()
        .find(|e| e.center == [centers[best].re, centers[best].im])
        .map_or(chi[best], |e| e.ci_lo);
    let plausible: Vec<&CenterEstimate> = estimates.iter().filter(|e| e.ci_hi >= floor).collect();
    let span = |f: fn(&[f64; 2]) -> f64| {
        let v = plausible.iter().map(|e| f(&e.center));
        [v.clone().fold(f64::INFINITY, f64::min), v.fold(f64::NEG_INFINITY, f64::max)]
    };

    Ok(CoverSelection {
        word: word.clone(),
        lambda: [centers[best].re, centers[best].im],
        epsilon,
        disc_radius,
        centers_total: centers.len(),
        lambda_ci: [span(|c| c[0]), span(|c| c[1])],
        centers: estimates,
        chi: chi[best],
        margin: chi[best] - runner_up,
    })
}

fn all_active(pool: &SamplePool) -> Vec<Vec<bool>> {
    pool.levels.iter().map(|l| vec![true; l.traces.len()]).collect()
}

fn zone_bound(z: &Zone) -> Result<f64> {
    z.bound().ok_or(Error::Unbounded)
}

/// Picks the center λ of an ε-net of the disc |λ| ≤ R^{deg w} maximizing the
/// tail χ of Z ∩ M_{w, B(λ, ε)}.
pub fn cover_select(
    z: &Zone,
    scale: &Scale,
    word: &StarMonomial,
    epsilon: f64,
    params: &CoverParams,
    stream: &RngStream,
) -> Result<CoverSelection> {
    params.validate()?;
    if !(epsilon > 0.0) {
        return Err(invalid("ε must be positive"));
    }
    let pool = SamplePool::build(z, std::slice::from_ref(word), params, &stream.substream(0))?;
    let active = all_active(&pool);
    select_on_pool(&pool, scale, word, 0, epsilon, zone_bound(z)?, &active, params, &stream.substream(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub word: StarMonomial,
    pub lambda: [f64; 2],
    pub stabilized: bool,
    pub selections: Vec<CoverSelection>,
}

impl Refinement {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.lambda[0], self.lambda[1])
    }

    pub fn last(&self) -> &CoverSelection {
        self.selections.last().expect("nonempty schedule")
    }
}

/// Stabilized when the last three centers lie within the final ε of each other.
fn stabilized(selections: &[CoverSelection]) -> bool {
    let Some(last) = selections.last() else {
        return false;
    };
    if selections.len() < 3 {
        return false;
    }
    let tail = &selections[selections.len() - 3..];
    tail.iter().all(|a| {
        tail.iter()
            .all(|b| (a.lambda() - b.lambda()).norm() <= last.epsilon)
    })
}

#[allow(clippy::too_many_arguments)]
fn refine_on_pool(
    pool: &SamplePool,
    scale: &Scale,
    word: &StarMonomial,
    word_idx: usize,
    bound: f64,
    active: &[Vec<bool>],
    params: &CoverParams,
    stream: &RngStream,
) -> Result<Refinement> {
    let selections = params
        .epsilons
        .iter()
        .enumerate()
        .map(|(j, &eps)| {
            select_on_pool(pool, scale, word, word_idx, eps, bound, active, params, &stream.substream(j as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let last = selections.last().expect("nonempty schedule");
    Ok(Refinement {
        word: word.clone(),
        lambda: last.lambda,
        stabilized: stabilized(&selections),
        selections,
    })
}

/// Runs [`cover_select`] along the ε schedule on one sample pool.
pub fn refine_lambda(
    z: &Zone,
    scale: &Scale,
    word: &StarMonomial,
    params: &CoverParams,
    stream: &RngStream,
) -> Result<Refinement> {
    params.validate()?;
    let pool = SamplePool::build(z, std::slice::from_ref(word), params, &stream.substream(0))?;
    let active = all_active(&pool);
    refine_on_pool(&pool, scale, word, 0, zone_bound(z)?, &active, params, &stream.substream(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionParams {
    pub cover: CoverParams,
    /// Number of words J, taken in enumeration order.
    pub words: usize,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            cover: CoverParams::default(),
            words: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStep {
    pub refinement: Refinement,
    /// Tail χ of Z_j, the zone before this word was fixed.
    #[serde(with = "extended_f64")]
    pub zone_chi: f64,
    /// Pool samples in Z_j per k.
    pub zone_hits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub params: ExtractionParams,
    pub seed: RngStream,
    pub words: Vec<StarMonomial>,
    pub steps: Vec<ExtractionStep>,
    /// Set when some step found no admissible center; `steps` is then truncated.
    pub failed_at: Option<usize>,
    pub bound: f64,
    /// χ of Z_j is non-increasing in j.
    pub nested: bool,
    #[serde(default)]
    pub selection: Vec<SelectionStage>,
    #[serde(default)]
    pub convergence: Option<ConvergenceReport>,
}

impl ExtractionResult {
    /// The extracted values in word order.
    pub fn values(&self) -> Vec<Complex64> {
        self.steps.iter().map(|s| s.refinement.lambda()).collect()
    }

    /// The extracted table as a moment function. Values are extended to
    /// starred words through x_i* = x_i, as all samples are self-adjoint.
    pub fn moment_spec(&self, n: usize) -> Result<MomentSpec> {
        let mut table = BTreeMap::new();
        let max_degree = self.words.iter().map(|w| w.degree()).max().unwrap_or(1);
        let fixed: BTreeMap<&StarMonomial, Complex64> = self
            .words
            .iter()
            .zip(self.values())
            .collect();
        for w in enumerate_words_with(n, max_degree, false)? {
            if let Some(v) = fixed.get(&w.destarred()) {
                table.insert(w, *v);
            }
        }
        MomentSpec::from_table(n, self.bound, table, Provenance::Extracted)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("extraction result serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The first `count` star-free words in n variables.
pub fn extraction_words(n: usize, count: usize) -> Result<Vec<StarMonomial>> {
    if count == 0 {
        return Err(invalid("word budget must be at least 1"));
    }
    let mut d = 1;
    loop {
        let words = enumerate_words_with(n, d, true)?;
        if words.len() >= count {
            return Ok(words.into_iter().take(count).collect());
        }
        d += 1;
    }
}

/// Fixes f(w_1), …, f(w_J) one word at a time, intersecting the zone with
/// M_{w_j, f(w_j)} after each choice. A previous result with the same
/// parameters and seed may be passed to resume from its completed steps.
pub fn extract_moment_function(
    z: &Zone,
    scale: &Scale,
    params: &ExtractionParams,
    stream: &RngStream,
    resume: Option<&ExtractionResult>,
) -> Result<ExtractionResult> {
    params.cover.validate()?;
    let words = extraction_words(z.n(), params.words)?;
    let bound = zone_bound(z)?;
    let mut steps: Vec<ExtractionStep> = Vec::new();
    if let Some(prev) = resume {
        let prefix = prev.steps.len() <= words.len() && words.starts_with(&prev.words[..prev.steps.len()]);
        if prev.params.cover != params.cover || prev.seed != *stream || !prefix {
            return Err(Error::Config(
                "resumed extraction must use the same cover parameters, seed and word order".into(),
            ));
        }
        steps = prev.steps.clone();
    }
    let pool = SamplePool::build(z, &words, &params.cover, &stream.substream(0))?;
    // Z_{j+1} = Z_j ∩ M_{w_j, B(λ_j, ε)} with the final net radius ε.
    let radius = params.cover.epsilons.last().expect("validated schedule") + params.cover.gamma;
    let mut active = all_active(&pool);
    for (j, s) in steps.iter().enumerate() {
        constrain(&pool, &mut active, j, s.refinement.lambda(), radius);
    }
    let mut failed_at = None;
    for (j, w) in words.iter().enumerate().skip(steps.len()) {
        let zone_hits: Vec<usize> = active.iter().map(|a| a.iter().filter(|&&x| x).count()).collect();
        let zone_chi = pool
            .tail_levels()
            .iter()
            .map(|&li| pool.chi(scale, li, zone_hits[li] as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        match refine_on_pool(&pool, scale, w, j, bound, &active, &params.cover, &stream.path(&[1, j as u64])) {
            Ok(refinement) => {
                constrain(&pool, &mut active, j, refinement.lambda(), radius);
                steps.push(ExtractionStep {
                    refinement,
                    zone_chi,
                    zone_hits,
                });
            }
            Err(Error::AllEmpty(_)) => {
                failed_at = Some(j);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let nested = steps.windows(2).all(|s| s[1].zone_chi <= s[0].zone_chi + 1e-12);
    Ok(ExtractionResult {
        params: params.clone(),
        seed: *stream,
        words,
        steps,
        failed_at,
        bound,
        nested,
        selection: Vec::new(),
        convergence: None,
    })
}

fn constrain(pool: &SamplePool, active: &mut [Vec<bool>], j: usize, value: Complex64, radius: f64) {
    for (l, act) in pool.levels.iter().zip(active.iter_mut()) {
        for (a, t) in act.iter_mut().zip(&l.traces) {
            if (t[j] - value).norm() >= radius {
                *a = false;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    /// Uniform samples of the reference ball.
    #[default]
    UniformBall,
    /// GUE with variance f(x_i x_i), shrunk into the ball when needed.
    Gue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionParams {
    pub proposal: Proposal,
    pub sampler: BallSampler,
    /// Proposals per stage before giving up.
    pub budget: usize,
    /// Local perturbation steps tried on each proposal that misses.
    pub refine_steps: usize,
    pub refine_scale: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            proposal: Proposal::UniformBall,
            sampler: BallSampler::default(),
            budget: 1000,
            refine_steps: 0,
            refine_scale: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionStage {
    pub m: usize,
    pub k: usize,
    pub gamma: f64,
    pub attempts: usize,
    pub found: bool,
    /// |tr w_j(ξ_m) - f(w_j)| for j ≤ m.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MicrostateSequence {
    pub stages: Vec<SelectionStage>,
    pub tuples: Vec<MatrixTuple>,
    /// Stage m at which the proposal budget ran out.
    pub exhausted_at: Option<usize>,
}

fn residuals(xi: &MatrixTuple, f: &MomentSpec, words: &[StarMonomial]) -> Result<Vec<f64>> {
    let traces = view_traces(&xi.view(), words)?;
    words
        .iter()
        .zip(traces)
        .map(|(w, t)| Ok((t - f.moment(w)?).norm()))
        .collect()
}

struct Proposer {
    kind: Proposal,
    k: usize,
    radius: f64,
    variances: Vec<f64>,
    ball: Option<TupleBallSampler>,
}

impl Proposer {
    fn new(
        params: &SelectionParams,
        f: &MomentSpec,
        n: usize,
        k: usize,
        radius: f64,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        let variances = match params.proposal {
            Proposal::Gue => (1..=n)
                .map(|i| Ok(f.moment(&StarMonomial::power(i, 2))?.re.max(0.0)))
                .collect::<Result<Vec<_>>>()?,
            Proposal::UniformBall => Vec::new(),
        };
        let ball = match params.proposal {
            Proposal::UniformBall => Some(TupleBallSampler::new(n, k, radius, &params.sampler, rng)?),
            Proposal::Gue => None,
        };
        Ok(Self {
            kind: params.proposal,
            k,
            radius,
            variances,
            ball,
        })
    }

    fn next(&mut self, rng: &mut StreamRng) -> Result<MatrixTuple> {
        match self.kind {
            Proposal::UniformBall => self.ball.as_mut().expect("ball sampler").next(rng),
            Proposal::Gue => {
                let mats = self
                    .variances
                    .iter()
                    .map(|&v| {
                        let a = sample_gue(self.k, v, rng)?;
                        Ok(shrink_into_ball(a, self.radius))
                    })
                    .collect::<Result<Vec<_>>>()?;
                MatrixTuple::new(mats, true)
            }
        }
    }
}

fn shrink_into_ball(mut a: crate::matrices::CMatrix, radius: f64) -> crate::matrices::CMatrix {
    let norm = op_norm(&a);
    if norm > radius {
        a *= Complex64::new(radius / norm, 0.0);
        hermitize(&mut a);
    }
    a
}

fn perturb(
    xi: &MatrixTuple,
    scale: f64,
    radius: f64,
    rng: &mut StreamRng,
) -> Result<MatrixTuple> {
    let k = xi.k();
    let mats = xi
        .coords()
        .iter()
        .map(|a| {
            let d = sample_gue(k, scale * scale, rng)?;
            Ok(shrink_into_ball(a + d, radius))
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixTuple::new(mats, true)
}

/// For each stage (m, k_m), searches for ξ_m ∈ Z(m, k_m, 1/m) with
/// |tr w_j(ξ_m) - f(w_j)| < 1/m for j ≤ m.
pub fn select_microstates(
    z: &Zone,
    f: &MomentSpec,
    words: &[StarMonomial],
    schedule: &[(usize, usize)],
    params: &SelectionParams,
    stream: &RngStream,
) -> Result<MicrostateSequence> {
    if f.n() != z.n() {
        return Err(crate::error::mismatch("moment function and zone have different n"));
    }
    if params.budget == 0 {
        return Err(invalid("selection budget must be positive"));
    }
    if let Some(&(m, _)) = schedule.iter().find(|(m, k)| *m == 0 || *k == 0) {
        return Err(invalid(format!("bad schedule stage m = {m}")));
    }
    let max_m = schedule.iter().map(|s| s.0).max().unwrap_or(0);
    if words.len() < max_m {
        return Err(invalid(format!(
            "schedule needs {max_m} words, only {} given",
            words.len()
        )));
    }
    let radius = z.bound().unwrap_or(f.bound());
    let mut stages = Vec::new();
    let mut tuples = Vec::new();
    let mut exhausted_at = None;
    for (si, &(m, k)) in schedule.iter().enumerate() {
        let gamma = 1.0 / m as f64;
        let constraint = &words[..m];
        let mut rng = stream.substream(si as u64).rng();
        let mut proposer = Proposer::new(params, f, z.n(), k, radius, &mut rng)?;
        let mut found = None;
        let mut attempts = 0;
        let accept = |xi: &MatrixTuple| -> Result<(bool, f64)> {
            let r = residuals(xi, f, constraint)?;
            let worst = r.iter().copied().fold(0.0, f64::max);
            Ok((worst < gamma && z.contains(m, gamma, xi)?, worst))
        };
        while attempts < params.budget {
            attempts += 1;
            let mut xi = proposer.next(&mut rng)?;
            let (ok, mut worst) = accept(&xi)?;
            if ok {
                found = Some(xi);
                break;
            }
            for _ in 0..params.refine_steps {
                let cand = perturb(&xi, params.refine_scale, radius, &mut rng)?;
                let (ok, w) = accept(&cand)?;
                if ok {
                    found = Some(cand);
                    break;
                }
                if w < worst {
                    worst = w;
                    xi = cand;
                }
            }
            if found.is_some() {
                break;
            }
        }
        match found {
            Some(xi) => {
                stages.push(SelectionStage {
                    m,
                    k,
                    gamma,
                    attempts,
                    found: true,
                    residuals: residuals(&xi, f, constraint)?,
                });
                tuples.push(xi);
            }
            None => {
                stages.push(SelectionStage {
                    m,
                    k,
                    gamma,
                    attempts,
                    found: false,
                    residuals: Vec::new(),
                });
                exhausted_at = Some(m);
                break;
            }
        }
    }
    Ok(MicrostateSequence {
        stages,
        tuples,
        exhausted_at,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ms: Vec<usize>,
    pub words: Vec<StarMonomial>,
    /// residuals[s][j] = |tr w_j(ξ_s) - f(w_j)|.
    pub residuals: Vec<Vec<f64>>,
    /// Stage s passes when every residual with j ≤ m_s is below 1/m_s.
    pub stage_pass: Vec<bool>,
    /// max_j |tr w_j(ξ_s) - tr w_j(ξ_{s+1})| for consecutive stages.
    #[serde(with = "extended_f64_vec")]
    pub cauchy: Vec<f64>,
    pub failed_stages: Vec<usize>,
    pub pass: bool,
}

/// Residual table of a microstate sequence against f on the first J words.
pub fn verify_moment_convergence(
    tuples: &[MatrixTuple],
    ms: &[usize],
    f: &MomentSpec,
    words: &[StarMonomial],
) -> Result<ConvergenceReport> {
    if tuples.len() != ms.len() {
        return Err(invalid("one m per tuple is required"));
    }
    let traces = tuples
        .iter()
        .map(|xi| view_traces(&xi.view(), words))
        .collect::<Result<Vec<_>>>()?;
    let targets = words.iter().map(|w| f.moment(w)).collect::<Result<Vec<_>>>()?;
    let residuals: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| t.iter().zip(&targets).map(|(a, b)| (a - b).norm()).collect())
        .collect();
    let stage_pass: Vec<bool> = residuals
        .iter()
        .zip(ms)
        .map(|(r, &m)| m > 0 && r.iter().take(m).all(|&x| x < 1.0 / m as f64))
        .collect();
    let cauchy = traces
        .windows(2)
        .map(|p| {
            p[0].iter()
                .zip(&p[1])
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let failed_stages: Vec<usize> = stage_pass
        .iter()
        .zip(ms)
        .filter(|(p, _)| !**p)
        .map(|(_, &m)| m)
        .collect();
    Ok(ConvergenceReport {
        ms: ms.to_vec(),
        words: words.to_vec(),
        residuals,
        pass: failed_stages.is_empty(),
        stage_pass,
        cauchy,
        failed_stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::semicircle_moment;
    use crate::zones::microstate_zone;

    #[test]
    fn hex_net_covers_the_disc() {
        for &(r, eps) in &[(1.0, 0.3), (1.0, 0.1), (2.0, 0.25)] {
            let net = hex_net(r, 0.5 * eps).unwrap();
            assert!(net.iter().all(|c| c.norm() <= r * (1.0 + 1e-12)));
            let steps = 60;
            for i in 0..=steps {
                for j in 0..=steps {
                    let p = Complex64::new(
                        -r + 2.0 * r * i as f64 / steps as f64,
                        -r + 2.0 * r * j as f64 / steps as f64,
                    );
                    if p.norm() > r {
                        continue;
                    }
                    let d = net.iter().map(|c| (c - p).norm()).fold(f64::INFINITY, f64::min);
                    assert!(d <= 0.5 * eps + 1e-12, "{p} at distance {d}");
                }
            }
        }
    }

    fn small_params() -> CoverParams {
        CoverParams {
            m: 2,
            gamma: 0.1,
            k_grid: vec![2],
            samples: 20_000,
            epsilons: vec![0.5, 0.3, 0.2],
            ..CoverParams::default()
        }
    }

    #[test]
    fn first_moment_of_semicircle_zone() {
        let z = microstate_zone(&MomentSpec::semicircle(), Some(1.0)).unwrap();
        let p = small_params();
        let w: StarMonomial = "x1".parse().unwrap();
        let s = cover_select(&z, &Scale::default(), &w, 0.2, &p, &RngStream::new(1)).unwrap();
        assert!(s.lambda().norm() <= 0.2 + 3.0 * s.ci_half_width() + 1e-12, "{:?}", s.lambda);
    }

    #[test]
    fn second_moment_of_semicircle_zone() {
        let z = microstate_zone(&MomentSpec::semicircle(), Some(1.0)).unwrap();
        let p = small_params();
        let w: StarMonomial = "x1 x1".parse().unwrap();
        let r = refine_lambda(&z, &Scale::default(), &w, &p, &RngStream::new(2)).unwrap();
        let eps = r.last().epsilon;
        let err = (r.lambda() - Complex64::new(semicircle_moment(2), 0.0)).norm();
        assert!(err <= eps + 3.0 * r.last().ci_half_width(), "{:?}", r.lambda);
    }

    #[test]
    fn empty_zone_reports_all_empty() {
        let z = Zone::ball(1, 1.0)
            .unwrap()
            .with_constraint(
                "x1 x1".parse().unwrap(),
                crate::zones::CenterSet::Segment { lo: 2.0, hi: 3.0 },
                crate::zones::ConstraintMode::Exact,
            )
            .unwrap();
        let w: StarMonomial = "x1".parse().unwrap();
        let r = cover_select(&z, &Scale::default(), &w, 0.5, &small_params(), &RngStream::new(3));
        assert!(matches!(r, Err(Error::AllEmpty(_))));
    }

    #[test]
    fn symmetric_tie_has_zero_margin() {
        let base = Zone::ball(1, 1.0).unwrap();
        let w: StarMonomial = "x1".parse().unwrap();
        let left = base
            .with_constraint(w.clone(), crate::zones::CenterSet::Segment { lo: -0.8, hi: -0.6 }, crate::zones::ConstraintMode::Exact)
            .unwrap();
        let right = base
            .with_constraint(w.clone(), crate::zones::CenterSet::Segment { lo: 0.6, hi: 0.8 }, crate::zones::ConstraintMode::Exact)
            .unwrap();
        let z = crate::zones::union(&left, &right).unwrap();
        let p = CoverParams {
            k_grid: vec![1],
            ..small_params()
        };
        let r = refine_lambda(&z, &Scale::default(), &w, &p, &RngStream::new(4)).unwrap();
        let s = r.last();
        assert!(!r.stabilized || s.margin.abs() < 0.1, "{} {}", r.stabilized, s.margin);
    }

    #[test]
    fn verify_flags_corrupted_stage() {
        let f = MomentSpec::semicircle();
        let words = extraction_words(1, 3).unwrap();
        let good = MatrixTuple::new(vec![crate::matrices::diag(&[0.5, -0.5])], true).unwrap();
        let bad = MatrixTuple::new(vec![crate::matrices::diag(&[1.0, 1.0])], true).unwrap();
        let r = verify_moment_convergence(&[good.clone(), bad, good], &[1, 2, 3], &f, &words).unwrap();
        assert_eq!(r.failed_stages, vec![2]);
        assert!(!r.pass);
    }

    #[test]
    fn infeasible_target_exhausts_budget() {
        let mut t = BTreeMap::new();
        t.insert("x1".parse().unwrap(), Complex64::new(0.0, 0.0));
        t.insert("x1 x1".parse().unwrap(), Complex64::new(5.0, 0.0));
        let f = MomentSpec::from_table(1, 1.0, t, Provenance::Extracted).unwrap();
        let z = Zone::ball(1, 1.0).unwrap();
        let words = extraction_words(1, 2).unwrap();
        let params = SelectionParams {
            budget: 50,
            ..SelectionParams::default()
        };
        let seq = select_microstates(&z, &f, &words, &[(2, 8)], &params, &RngStream::new(5)).unwrap();
        assert_eq!(seq.exhausted_at, Some(2));
        assert!(seq.tuples.is_empty());
    }

    #[test]
    fn semicircle_microstates_are_found() {
        let f = MomentSpec::semicircle();
        let z = microstate_zone(&f, Some(1.0)).unwrap();
        let words = extraction_words(1, 3).unwrap();
        let schedule = [(1, 32), (2, 64), (3, 128)];
        let seq = select_microstates(&z, &f, &words, &schedule, &SelectionParams::default(), &RngStream::new(6)).unwrap();
        assert_eq!(seq.exhausted_at, None);
        let r = verify_moment_convergence(&seq.tuples, &[1, 2, 3], &f, &words).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
    }
}
