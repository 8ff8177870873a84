use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{conjugate_diagonal, hermitian_op_norm, hermitize, CMatrix, MatrixTuple};
use crate::error::{invalid, Error, Result};

/// Hermitian k×k matrix with independent Gaussian entries scaled so that
/// E[tr_k(A²)] = `variance`.
pub fn sample_gue<R: Rng + ?Sized>(k: usize, variance: f64, rng: &mut R) -> Result<CMatrix> {
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    if !(variance > 0.0) {
        return Err(invalid("GUE variance must be positive"));
    }
    // E|a_ij|² = variance / k for every entry
    let sigma = (variance / k as f64).sqrt();
    let off = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let mut a = CMatrix::zeros(k, k);
    for i in 0..k {
        a[(i, i)] = Complex64::new(sigma * rng.sample::<f64, _>(StandardNormal), 0.0);
        for j in (i + 1)..k {
            let z = Complex64::new(
                off * rng.sample::<f64, _>(StandardNormal),
                off * rng.sample::<f64, _>(StandardNormal),
            );
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    Ok(a)
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
/// diag(R) moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<CMatrix> {
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMatrix::from_fn(k, k, |_, _| {
        Complex64::new(
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
        )
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        let d = r[(j, j)];
        let n = d.norm();
        let phase = if n > 0.0 { d / n } else { Complex64::new(1.0, 0.0) };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    Ok(q)
}

/// Metropolis settings for the eigenvalue chain of the uniform operator-norm
/// ball sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcParams {
    pub burn_in_sweeps: usize,
    pub thin_sweeps: usize,
    pub target_acceptance: f64,
    pub adapt_every: usize,
    /// Sweeps at fixed step size used to check the acceptance window.
    pub check_sweeps: usize,
    pub min_acceptance: f64,
    pub max_acceptance: f64,
}

impl Default for McmcParams {
    fn default() -> Self {
        Self {
            burn_in_sweeps: 2000,
            thin_sweeps: 10,
            target_acceptance: 0.35,
            adapt_every: 50,
            check_sweeps: 100,
            min_acceptance: 0.1,
            max_acceptance: 0.7,
        }
    }
}

const MAX_STEP: f64 = 2.0;
const MIN_STEP: f64 = 1e-6;

/// Random-walk Metropolis chain on the spectrum of a uniform point of the
/// Hermitian operator-norm unit ball.
///
/// The eigenvalue density of the uniform measure is proportional to
/// ∏_{i<j} (λ_i − λ_j)² on [−1, 1]^k; matrices are produced by conjugating the
/// current spectrum with an independent Haar unitary.
#[derive(Clone, Debug)]
pub struct OpBallChain {
    eigs: Vec<f64>,
    step: f64,
    params: McmcParams,
    proposed: u64,
    accepted: u64,
}

impl OpBallChain {
    /// Starts a chain, runs the adaptive burn-in, and checks the acceptance rate.
    pub fn new<R: Rng + ?Sized>(k: usize, params: &McmcParams, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be positive"));
        }
        let eigs = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut chain = Self {
            eigs,
            step: (2.0 / k as f64).min(MAX_STEP),
            params: params.clone(),
            proposed: 0,
            accepted: 0,
        };
        chain.burn_in(rng)?;
        Ok(chain)
    }

    fn burn_in<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let k = self.eigs.len();
        let every = self.params.adapt_every.max(1);
        let mut window_acc = 0usize;
        for s in 0..self.params.burn_in_sweeps {
            window_acc += self.sweep(rng);
            if (s + 1) % every == 0 {
                let rate = window_acc as f64 / (every * k) as f64;
                self.step = (self.step * (2.0 * (rate - self.params.target_acceptance)).exp())
                    .clamp(MIN_STEP, MAX_STEP);
                window_acc = 0;
            }
        }
        let mut acc = 0usize;
        for _ in 0..self.params.check_sweeps {
            acc += self.sweep(rng);
        }
        self.proposed = 0;
        self.accepted = 0;
        if self.params.check_sweeps > 0 {
            let rate = acc as f64 / (self.params.check_sweeps * k) as f64;
            if rate < self.params.min_acceptance || rate > self.params.max_acceptance {
                return Err(Error::NonConvergence(format!(
                    "acceptance {rate:.3} outside [{}, {}] at k={k}, step {:.3e}",
                    self.params.min_acceptance, self.params.max_acceptance, self.step
                )));
            }
        }
        Ok(())
    }

    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let k = self.eigs.len();
        let mut acc = 0;
        for i in 0..k {
            let old = self.eigs[i];
            let prop = old + self.step * rng.random_range(-1.0..1.0);
            self.proposed += 1;
            if prop.abs() > 1.0 {
                continue;
            }
            let mut ratio = 1.0;
            for (j, &l) in self.eigs.iter().enumerate() {
                if j != i {
                    let q = (prop - l) / (old - l);
                    ratio *= q * q;
                }
            }
            let u: f64 = rng.random();
            if u < ratio {
                self.eigs[i] = prop;
                self.accepted += 1;
                acc += 1;
            }
        }
        acc
    }

    /// Advances the chain by the thinning interval and returns the spectrum.
    pub fn next_spectrum<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        for _ in 0..self.params.thin_sweeps.max(1) {
            self.sweep(rng);
        }
        &self.eigs
    }

    /// Next sample as a Hermitian matrix, conjugated by a fresh Haar unitary.
    pub fn next_matrix<R: Rng + ?Sized>(&mut self, rng: &mut R) -> CMatrix {
        let k = self.eigs.len();
        self.next_spectrum(rng);
        let u = haar_unitary(k, rng).expect("k > 0");
        conjugate_diagonal(&u, &self.eigs)
    }

    /// Acceptance rate since the end of burn-in.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn k(&self) -> usize {
        self.eigs.len()
    }
}

/// One independent uniform sample of the Hermitian operator-norm unit ball,
/// from a fresh chain.
pub fn sample_uniform_opball<R: Rng + ?Sized>(
    k: usize,
    rng: &mut R,
    params: &McmcParams,
) -> Result<CMatrix> {
    let mut chain = OpBallChain::new(k, params, rng)?;
    Ok(chain.next_matrix(rng))
}

pub const REJECTION_MAX_K: usize = 4;
/// Proposals tried by [`sample_uniform_opball_rejection`] before giving up;
/// no acceptance in this many trials means acceptance < 1e-6.
pub const REJECTION_PROPOSAL_BUDGET: u64 = 10_000_000;

/// Single proposal of the rejection sampler: uniform on the entry-coordinate
/// box [−1, 1]^{k²}, kept iff the operator norm is at most 1.
pub fn opball_rejection_trial<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Option<CMatrix> {
    let mut a = CMatrix::zeros(k, k);
    for i in 0..k {
        a[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in (i + 1)..k {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
        }
    }
    // ‖A e_i‖ ≤ ‖A‖, so a column of norm > 1 already rules the point out
    for j in 0..k {
        let col: f64 = (0..k).map(|i| a[(i, j)].norm_sqr()).sum();
        if col > 1.0 {
            return None;
        }
    }
    (hermitian_op_norm(&a) <= 1.0).then_some(a)
}

/// Exact uniform sample of the Hermitian operator-norm unit ball by rejection
/// from the coordinate box. Only practical for k ≤ 4.
pub fn sample_uniform_opball_rejection<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<CMatrix> {
    if k == 0 || k > REJECTION_MAX_K {
        return Err(invalid(format!(
            "rejection sampling supports 1 ≤ k ≤ {REJECTION_MAX_K}, got {k}"
        )));
    }
    for _ in 0..REJECTION_PROPOSAL_BUDGET {
        if let Some(a) = opball_rejection_trial(k, rng) {
            return Ok(a);
        }
    }
    Err(Error::BudgetExceeded(format!(
        "no acceptance in {REJECTION_PROPOSAL_BUDGET} box proposals at k={k}"
    )))
}

/// Which exact-law sampler backs uniform-ball draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BallSampler {
    Mcmc(McmcParams),
    Rejection,
}

impl Default for BallSampler {
    fn default() -> Self {
        BallSampler::Mcmc(McmcParams::default())
    }
}

/// Draws n-tuples whose coordinates are independent uniform points of the
/// Hermitian operator-norm ball of a given radius.
#[derive(Clone, Debug)]
pub struct TupleBallSampler {
    k: usize,
    n: usize,
    radius: f64,
    chains: Vec<OpBallChain>,
}

impl TupleBallSampler {
    pub fn new<R: Rng + ?Sized>(
        n: usize,
        k: usize,
        radius: f64,
        sampler: &BallSampler,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(invalid("tuple sampler needs n ≥ 1 and k ≥ 1"));
        }
        if !(radius > 0.0) {
            return Err(invalid("reference radius must be positive"));
        }
        let chains = match sampler {
            BallSampler::Mcmc(p) => (0..n)
                .map(|_| OpBallChain::new(k, p, rng))
                .collect::<Result<Vec<_>>>()?,
            BallSampler::Rejection => {
                if k > REJECTION_MAX_K {
                    return Err(invalid(format!(
                        "rejection sampler needs k ≤ {REJECTION_MAX_K}"
                    )));
                }
                Vec::new()
            }
        };
        Ok(Self {
            k,
            n,
            radius,
            chains,
        })
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<MatrixTuple> {
        let mats = if self.chains.is_empty() {
            (0..self.n)
                .map(|_| sample_uniform_opball_rejection(self.k, rng))
                .collect::<Result<Vec<_>>>()?
        } else {
            self.chains.iter_mut().map(|c| c.next_matrix(rng)).collect()
        };
        let mats = mats
            .into_iter()
            .map(|mut m| {
                if self.radius != 1.0 {
                    m *= Complex64::new(self.radius, 0.0);
                    hermitize(&mut m);
                }
                m
            })
            .collect();
        MatrixTuple::new(mats, true)
    }

    /// Smallest post-burn-in acceptance rate over the coordinate chains.
    pub fn min_acceptance(&self) -> Option<f64> {
        self.chains
            .iter()
            .map(|c| c.acceptance_rate())
            .reduce(f64::min)
    }
}
