//! Dense complex matrix tuples, their norms, and the random ensembles used by
//! the experiments.

mod io;
mod rng;
mod sample;

pub use io::{MatrixTupleHeader, LAYOUT};
pub use rng::{ChunkPlan, RngStream, StreamRng};
pub use sample::{
    haar_unitary, opball_rejection_trial, sample_gue, sample_uniform_opball,
    sample_uniform_opball_rejection, BallSampler, McmcParams, OpBallChain, TupleBallSampler,
    REJECTION_MAX_K, REJECTION_PROPOSAL_BUDGET,
};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, mismatch, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for the Hermitian check on self-adjoint tuples.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// An n-tuple of k×k complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    k: usize,
    mats: Vec<CMatrix>,
    selfadjoint: bool,
}

impl MatrixTuple {
    pub fn new(mats: Vec<CMatrix>, selfadjoint: bool) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| invalid("matrix tuple needs at least one coordinate"))?;
        let k = first.nrows();
        if k == 0 {
            return Err(invalid("matrix size must be positive"));
        }
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != k || m.ncols() != k {
                return Err(mismatch(format!(
                    "coordinate {} is {}x{}, expected {k}x{k}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if selfadjoint && !is_hermitian(m, HERMITIAN_TOL) {
                return Err(invalid(format!("coordinate {} is not Hermitian", i + 1)));
            }
        }
        Ok(Self {
            k,
            mats,
            selfadjoint,
        })
    }

    pub fn zeros(n: usize, k: usize) -> Result<Self> {
        Self::new(vec![CMatrix::zeros(k, k); n], true)
    }

    pub fn identity(n: usize, k: usize) -> Result<Self> {
        Self::new(vec![CMatrix::identity(k, k); n], true)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.mats.len()
    }

    pub fn selfadjoint(&self) -> bool {
        self.selfadjoint
    }

    pub fn coords(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn coord(&self, i: usize) -> &CMatrix {
        &self.mats[i]
    }

    pub fn into_coords(self) -> Vec<CMatrix> {
        self.mats
    }

    pub fn view(&self) -> TupleView<'_> {
        TupleView {
            k: self.k,
            mats: &self.mats,
            selfadjoint: self.selfadjoint,
        }
    }

    /// Concatenates the coordinates of several tuples of equal size.
    pub fn concat(parts: &[MatrixTuple]) -> Result<Self> {
        let selfadjoint = parts.iter().all(|p| p.selfadjoint);
        let mats = parts.iter().flat_map(|p| p.mats.iter().cloned()).collect();
        Self::new(mats, selfadjoint)
    }

    /// ‖ξ‖_∞, the largest operator norm over the coordinates.
    pub fn max_op_norm(&self) -> f64 {
        self.mats.iter().map(op_norm).fold(0.0, f64::max)
    }
}

/// Borrowed coordinates of a tuple; `Product` zones evaluate on sub-slices.
#[derive(Clone, Copy, Debug)]
pub struct TupleView<'a> {
    pub k: usize,
    pub mats: &'a [CMatrix],
    pub selfadjoint: bool,
}

impl<'a> TupleView<'a> {
    pub fn n(&self) -> usize {
        self.mats.len()
    }

    pub fn slice(&self, start: usize, len: usize) -> TupleView<'a> {
        TupleView {
            k: self.k,
            mats: &self.mats[start..start + len],
            selfadjoint: self.selfadjoint,
        }
    }
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    let k = a.nrows();
    if a.ncols() != k {
        return false;
    }
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..k {
        for j in i..k {
            if (a[(i, j)] - a[(j, i)].conj()).norm() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Normalized trace tr_k.
pub fn normalized_trace(a: &CMatrix) -> Complex64 {
    a.trace() / a.nrows() as f64
}

/// Largest singular value. Hermitian input takes the eigenvalue path.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    if is_hermitian(a, 1e-14) {
        hermitian_op_norm(a)
    } else {
        a.clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Operator norm of a matrix assumed Hermitian, max |λ|.
pub fn hermitian_op_norm(a: &CMatrix) -> f64 {
    match a.nrows() {
        0 => 0.0,
        1 => a[(0, 0)].re.abs(),
        2 => {
            let t = 0.5 * (a[(0, 0)].re + a[(1, 1)].re);
            let s = 0.5 * (a[(0, 0)].re - a[(1, 1)].re);
            let r = (s * s + a[(0, 1)].norm_sqr()).sqrt();
            t.abs() + r
        }
        _ => hermitian_eigenvalues(a)
            .iter()
            .map(|l| l.abs())
            .fold(0.0, f64::max),
    }
}

pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    a.clone().symmetric_eigenvalues().iter().copied().collect()
}

/// ‖ξ‖₂ = Σ_i tr_k(ξ_i* ξ_i)^{1/2}.
pub fn tuple_two_norm(xi: &MatrixTuple) -> f64 {
    let k = xi.k() as f64;
    xi.coords()
        .iter()
        .map(|m| (m.iter().map(|z| z.norm_sqr()).sum::<f64>() / k).sqrt())
        .sum()
}

/// Builds U diag(λ) U*, symmetrized so the result is exactly Hermitian.
pub fn conjugate_diagonal(u: &CMatrix, eigs: &[f64]) -> CMatrix {
    let k = eigs.len();
    let mut ud = u.clone();
    for (j, &l) in eigs.iter().enumerate() {
        ud.column_mut(j).scale_mut(l);
    }
    let mut a = &ud * u.adjoint();
    hermitize(&mut a);
    debug_assert_eq!(a.nrows(), k);
    a
}

/// Replaces `a` by (a + a*)/2.
pub fn hermitize(a: &mut CMatrix) {
    let k = a.nrows();
    for i in 0..k {
        a[(i, i)].im = 0.0;
        for j in (i + 1)..k {
            let v = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

pub fn diag(values: &[f64]) -> CMatrix {
    let k = values.len();
    CMatrix::from_fn(k, k, |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn op_norm_of_diagonal_and_identity() {
        assert!((op_norm(&diag(&[1.0, -3.0])) - 3.0).abs() < 1e-14);
        assert!((op_norm(&CMatrix::identity(5, 5)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn op_norm_of_non_normal_matrix() {
        // [[0, 2], [0, 0]] has singular values 2 and 0
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((op_norm(&a) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_norm_examples() {
        let t = MatrixTuple::identity(1, 4).unwrap();
        assert!((tuple_two_norm(&t) - 1.0).abs() < 1e-15);
        let z = MatrixTuple::zeros(2, 3).unwrap();
        assert_eq!(tuple_two_norm(&z), 0.0);
        // diag(3,4)/5: tr_2 = (9 + 16) / 25 / 2 = 1/2
        let t = MatrixTuple::new(vec![diag(&[0.6, 0.8])], true).unwrap();
        let direct: f64 = (0.6f64 * 0.6 + 0.8 * 0.8) / 2.0;
        assert!((tuple_two_norm(&t) - direct.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn selfadjoint_flag_is_checked() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(MatrixTuple::new(vec![a.clone()], true).is_err());
        assert!(MatrixTuple::new(vec![a], false).is_ok());
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let r = MatrixTuple::new(vec![CMatrix::identity(2, 2), CMatrix::identity(3, 3)], true);
        assert!(matches!(r, Err(crate::Error::DimensionMismatch(_))));
    }
}
