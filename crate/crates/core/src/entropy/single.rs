use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A probability density on [lo, hi] discretized into equal cells, stored as
/// the mass of each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub lo: f64,
    pub hi: f64,
    pub masses: Vec<f64>,
}

// 8-point Gauss–Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

impl GridDensity {
    fn check(lo: f64, hi: f64, cells: usize) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || cells == 0 {
            return Err(invalid("density grid needs lo < hi and at least one cell"));
        }
        Ok(())
    }

    /// Cell masses from a density function, by Gauss–Legendre in each cell.
    pub fn from_fn(lo: f64, hi: f64, cells: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        Self::check(lo, hi, cells)?;
        let h = (hi - lo) / cells as f64;
        let masses = (0..cells)
            .map(|i| {
                let mid = lo + (i as f64 + 0.5) * h;
                let half = 0.5 * h;
                GL_NODES
                    .iter()
                    .zip(GL_WEIGHTS)
                    .map(|(x, w)| w * (density(mid - half * x) + density(mid + half * x)))
                    .sum::<f64>()
                    * half
            })
            .collect();
        Self::finish(lo, hi, masses)
    }

    /// Cell masses as differences of a distribution function.
    pub fn from_cdf(lo: f64, hi: f64, cells: usize, cdf: impl Fn(f64) -> f64) -> Result<Self> {
        Self::check(lo, hi, cells)?;
        let h = (hi - lo) / cells as f64;
        let edges: Vec<f64> = (0..=cells).map(|i| cdf(lo + i as f64 * h)).collect();
        Self::finish(lo, hi, edges.windows(2).map(|e| e[1] - e[0]).collect())
    }

    fn finish(lo: f64, hi: f64, masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|m| !(m.is_finite() && *m >= -1e-15)) {
            return Err(invalid("density must be finite and nonnegative"));
        }
        Ok(Self {
            lo,
            hi,
            masses: masses.into_iter().map(|m| m.max(0.0)).collect(),
        })
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.masses.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Push-forward under t ↦ λt, λ > 0.
    pub fn rescaled(&self, lambda: f64) -> Self {
        Self {
            lo: self.lo * lambda,
            hi: self.hi * lambda,
            masses: self.masses.clone(),
        }
    }

    pub fn semicircle(radius: f64, cells: usize) -> Result<Self> {
        let r = radius;
        Self::from_cdf(-r, r, cells, |x| {
            let u = (x / r).clamp(-1.0, 1.0);
            0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI
        })
    }

    pub fn arcsine(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::from_cdf(lo, hi, cells, |x| {
            let u = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            2.0 / PI * u.sqrt().asin()
        })
    }

    pub fn uniform(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::finish(lo, hi, vec![1.0 / cells as f64; cells])
    }

    /// ∬ log|s - t| dμ(s) dμ(t) with μ uniform inside each cell.
    pub fn log_energy(&self) -> f64 {
        let n = self.masses.len();
        let h = self.cell_width();
        let mut total = 0.0;
        for d in 0..n {
            let corr: f64 = (0..n - d)
                .map(|i| self.masses[i] * self.masses[i + d])
                .sum();
            let weight = if d == 0 { corr } else { 2.0 * corr };
            total += weight * cell_pair_log(d);
        }
        let mass = self.total_mass();
        total + h.ln() * mass * mass
    }
}

/// ∬_{[0,1]²} log|s - t + d| ds dt.
fn cell_pair_log(d: usize) -> f64 {
    fn f(x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            0.5 * x * x * x.abs().ln() - 0.75 * x * x
        }
    }
    let d = d as f64;
    f(d + 1.0) - 2.0 * f(d) + f(d - 1.0)
}

/// ∬ log|s - t| dμ dμ + 3/4 + ½ log 2π.
pub fn chi_single_selfadjoint_exact(density: &GridDensity) -> Result<f64> {
    let mass = density.total_mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized(mass));
    }
    Ok(density.log_energy() + 0.75 + 0.5 * (2.0 * PI).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_cell_integral() {
        assert!((cell_pair_log(0) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn semicircle_on_minus_two_two() {
        let d = GridDensity::semicircle(2.0, 2000).unwrap();
        let chi = chi_single_selfadjoint_exact(&d).unwrap();
        let expect = 0.5 * (2.0 * PI * std::f64::consts::E).ln();
        assert!((chi - expect).abs() < 1e-4, "{chi} vs {expect}");
    }

    #[test]
    fn semicircle_from_density_function() {
        let d = GridDensity::from_fn(-2.0, 2.0, 2000, |x| {
            (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI)
        })
        .unwrap();
        let chi = chi_single_selfadjoint_exact(&d).unwrap();
        assert!((chi - 0.5 * (2.0 * PI * std::f64::consts::E).ln()).abs() < 1e-3);
    }

    #[test]
    fn arcsine_log_energy() {
        let d = GridDensity::arcsine(-1.0, 1.0, 2000).unwrap();
        assert!((d.log_energy() - 0.5f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn uniform_log_energy() {
        // ∬_{[0,1]²} log|s - t| = -3/2
        let d = GridDensity::uniform(0.0, 1.0, 50).unwrap();
        assert!((d.log_energy() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn scaling_shifts_by_log() {
        let d = GridDensity::semicircle(1.0, 1000).unwrap();
        let a = chi_single_selfadjoint_exact(&d).unwrap();
        let b = chi_single_selfadjoint_exact(&d.rescaled(3.0)).unwrap();
        assert!((b - a - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn narrowing_decreases_entropy() {
        let wide = GridDensity::uniform(-0.1, 0.1, 200).unwrap();
        let narrow = GridDensity::uniform(-0.01, 0.01, 200).unwrap();
        let a = chi_single_selfadjoint_exact(&wide).unwrap();
        let b = chi_single_selfadjoint_exact(&narrow).unwrap();
        assert!(b < a && b < -2.0);
    }

    #[test]
    fn unnormalized_density_is_rejected() {
        let d = GridDensity::from_fn(-1.0, 1.0, 100, |_| 1.0).unwrap();
        assert!(matches!(
            chi_single_selfadjoint_exact(&d),
            Err(Error::NotNormalized(_))
        ));
    }
}
