use std::f64::consts::PI;

fn log_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// log of the Lebesgue volume of {A Hermitian k×k : ‖A‖ ≤ 1} in standard
/// entry coordinates (k real diagonal entries, real and imaginary parts of
/// the k(k-1)/2 upper entries).
///
/// The Weyl integration formula gives C_k ∫_{[-1,1]^k} ∏_{i<j}(λ_i - λ_j)² dλ
/// with C_k = π^{k(k-1)/2} / ∏_{j=1}^{k} j!; the eigenvalue integral is the
/// Selberg integral with unit exponents rescaled from [0,1] to [-1,1].
pub fn log_volume_opball_exact(k: usize) -> f64 {
    assert!(k >= 1, "matrix size must be at least 1");
    let kf = k as f64;
    let angular = 0.5 * kf * (kf - 1.0) * PI.ln() - (1..=k).map(log_factorial).sum::<f64>();
    let selberg: f64 = (0..k)
        .map(|j| 2.0 * log_factorial(j) + log_factorial(j + 1) - log_factorial(k + j))
        .sum();
    angular + kf * kf * 2f64.ln() + selberg
}

/// log volume of the radius-R ball: R scales all k² real coordinates.
pub fn log_volume_opball(k: usize, radius: f64) -> f64 {
    log_volume_opball_exact(k) + (k * k) as f64 * radius.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert!((log_volume_opball_exact(1) - 2f64.ln()).abs() < 1e-15);
        assert!((log_volume_opball_exact(2) - (4.0 * PI / 3.0).ln()).abs() < 1e-12);
        assert!((log_volume_opball_exact(3) - 1.30150).abs() < 1e-4);
        assert!((log_volume_opball_exact(8) + 24.1194).abs() < 1e-3);
    }

    #[test]
    fn radius_scaling() {
        let d = log_volume_opball(3, 2.0) - log_volume_opball_exact(3);
        assert!((d - 9.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn large_k_is_finite() {
        let v = log_volume_opball_exact(64);
        assert!(v.is_finite() && v < 0.0);
    }
}
