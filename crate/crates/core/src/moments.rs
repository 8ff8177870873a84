//! Moment functions, empirical moments of matrix tuples, microstate membership
//! and the freeness defect.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::matrices::{normalized_trace, CMatrix, MatrixTuple, TupleView};
use crate::words::{enumerate_words, enumerate_words_with, word_traces, StarMonomial};

/// Where a moment table came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    #[default]
    Empirical,
    Extracted,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MomentLaw {
    /// n free semicircular variables supported on [-1, 1].
    FreeSemicircleFamily,
    /// Explicit values; missing words fall back to conj f(w*).
    Table(BTreeMap<StarMonomial, Complex64>),
}

/// A moment function f on *-monomials together with the norm bound R of the
/// tuple it describes.
#[derive(Clone, Debug)]
pub struct MomentSpec {
    n: usize,
    bound: f64,
    law: MomentLaw,
    provenance: Provenance,
    targets: Arc<RwLock<HashMap<(usize, bool), Arc<[Complex64]>>>>,
}

impl PartialEq for MomentSpec {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.bound == other.bound
            && self.law == other.law
            && self.provenance == other.provenance
    }
}

impl MomentSpec {
    fn build(n: usize, bound: f64, law: MomentLaw, provenance: Provenance) -> Self {
        Self {
            n,
            bound,
            law,
            provenance,
            targets: Arc::default(),
        }
    }

    /// The semicircle law on [-1, 1] (variance 1/4).
    pub fn semicircle() -> Self {
        Self::free_semicircle_family(1).expect("n = 1 is valid")
    }

    pub fn free_semicircle_family(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("variable count must be at least 1"));
        }
        Ok(Self::build(
            n,
            1.0,
            MomentLaw::FreeSemicircleFamily,
            Provenance::Analytic,
        ))
    }

    pub fn from_table(
        n: usize,
        bound: f64,
        table: BTreeMap<StarMonomial, Complex64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("variable count must be at least 1"));
        }
        if !(bound.is_finite() && bound > 0.0) {
            return Err(invalid(format!("norm bound must be positive, got {bound}")));
        }
        for (w, v) in &table {
            if w.degree() == 0 {
                return Err(invalid("moment table contains the empty word"));
            }
            if w.max_index() > n || w.letters().iter().any(|l| l.index == 0) {
                return Err(mismatch(format!("word {w} uses a variable outside 1..={n}")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(invalid(format!("moment of {w} is not finite")));
            }
        }
        Ok(Self::build(n, bound, MomentLaw::Table(table), provenance))
    }

    /// Empirical moments of a tuple up to `max_degree`, with bound ‖ξ‖_∞.
    pub fn from_tuple(xi: &MatrixTuple, max_degree: usize) -> Result<Self> {
        let em = empirical_moments(xi, max_degree)?;
        let bound = xi.max_op_norm().max(f64::MIN_POSITIVE);
        let table = em.words.into_iter().zip(em.values).collect();
        Self::from_table(xi.n(), bound, table, Provenance::Empirical)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn law(&self) -> &MomentLaw {
        &self.law
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// f(w).
    pub fn moment(&self, w: &StarMonomial) -> Result<Complex64> {
        if w.max_index() > self.n {
            return Err(mismatch(format!(
                "word {w} uses a variable outside 1..={}",
                self.n
            )));
        }
        match &self.law {
            MomentLaw::FreeSemicircleFamily => {
                Ok(Complex64::new(free_semicircular_family_moment(w, self.n)?, 0.0))
            }
            MomentLaw::Table(t) => {
                if let Some(v) = t.get(w) {
                    return Ok(*v);
                }
                if let Some(v) = t.get(&w.adjoint()) {
                    return Ok(v.conj());
                }
                Err(Error::MissingMoment(w.to_string()))
            }
        }
    }

    /// f on every word of degree ≤ `max_degree`, in enumeration order. Cached.
    pub fn targets(&self, max_degree: usize) -> Result<Arc<[Complex64]>> {
        self.cached_targets(max_degree, false)
    }

    /// f on the star-free words of degree ≤ `max_degree`. Cached.
    pub fn starless_targets(&self, max_degree: usize) -> Result<Arc<[Complex64]>> {
        self.cached_targets(max_degree, true)
    }

    fn cached_targets(&self, max_degree: usize, starless: bool) -> Result<Arc<[Complex64]>> {
        let key = (max_degree, starless);
        if let Some(t) = self.targets.read().expect("cache lock").get(&key) {
            return Ok(t.clone());
        }
        let words = enumerate_words_with(self.n, max_degree, starless)?;
        let vals: Arc<[Complex64]> = words
            .iter()
            .map(|w| self.moment(w))
            .collect::<Result<Vec<_>>>()?
            .into();
        self.targets
            .write()
            .expect("cache lock")
            .insert(key, vals.clone());
        Ok(vals)
    }

    /// Largest degree d such that every word of degree ≤ d has a value.
    pub fn available_degree(&self) -> Option<usize> {
        match &self.law {
            MomentLaw::FreeSemicircleFamily => None,
            MomentLaw::Table(t) => {
                let mut d = 0;
                loop {
                    let words = enumerate_words(self.n, d + 1).ok()?;
                    let ok = words.iter().all(|w| t.contains_key(w) || t.contains_key(&w.adjoint()));
                    if !ok {
                        return Some(d);
                    }
                    d += 1;
                    if d > 16 {
                        return Some(d);
                    }
                }
            }
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(MomentSpecFile::from(self)).expect("moment spec serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MomentSpecFile::from(self)).expect("moment spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MomentSpecFile = serde_json::from_str(s)?;
        f.try_into()
    }
}

impl Serialize for MomentSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MomentSpecFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MomentSpecFile::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NamedLaw {
    Semicircle,
    FreeSemicircleFamily,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedFile {
    law: NamedLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    n: usize,
    #[serde(rename = "R")]
    bound: f64,
    moments: BTreeMap<StarMonomial, [f64; 2]>,
    #[serde(default)]
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MomentSpecFile {
    Named(NamedFile),
    Table(TableFile),
}

impl From<&MomentSpec> for MomentSpecFile {
    fn from(s: &MomentSpec) -> Self {
        match &s.law {
            MomentLaw::FreeSemicircleFamily if s.n == 1 => Self::Named(NamedFile {
                law: NamedLaw::Semicircle,
                n: None,
            }),
            MomentLaw::FreeSemicircleFamily => Self::Named(NamedFile {
                law: NamedLaw::FreeSemicircleFamily,
                n: Some(s.n),
            }),
            MomentLaw::Table(t) => Self::Table(TableFile {
                n: s.n,
                bound: s.bound,
                moments: t.iter().map(|(w, v)| (w.clone(), [v.re, v.im])).collect(),
                provenance: s.provenance,
            }),
        }
    }
}

impl TryFrom<MomentSpecFile> for MomentSpec {
    type Error = Error;

    fn try_from(f: MomentSpecFile) -> Result<Self> {
        match f {
            MomentSpecFile::Named(NamedFile {
                law: NamedLaw::Semicircle,
                n,
            }) => {
                if n.is_some_and(|n| n != 1) {
                    return Err(Error::Config("the semicircle law has n = 1".into()));
                }
                Ok(Self::semicircle())
            }
            MomentSpecFile::Named(NamedFile {
                law: NamedLaw::FreeSemicircleFamily,
                n,
            }) => Self::free_semicircle_family(n.unwrap_or(1)),
            MomentSpecFile::Table(TableFile {
                n,
                bound,
                moments,
                provenance,
            }) => Self::from_table(
                n,
                bound,
                moments
                    .into_iter()
                    .map(|(w, [re, im])| (w, Complex64::new(re, im)))
                    .collect(),
                provenance,
            ),
        }
    }
}

/// p-th moment of the semicircle law on [-1, 1]: C_{p/2} / 4^{p/2} for even p.
pub fn semicircle_moment(p: usize) -> f64 {
    if p % 2 == 1 {
        return 0.0;
    }
    let m = p / 2;
    (1..=m).fold(1.0, |a, j| a * (2 * (2 * j - 1)) as f64 / ((j + 1) * 4) as f64)
}

/// Number of non-crossing pairings of positions whose paired entries agree.
pub fn noncrossing_pairings(labels: &[usize]) -> u128 {
    let p = labels.len();
    if p % 2 == 1 {
        return 0;
    }
    if p == 0 {
        return 1;
    }
    // count[i][j]: pairings of the half-open interval i..j
    let mut count = vec![vec![0u128; p + 1]; p + 1];
    for i in 0..=p {
        count[i][i] = 1;
    }
    for len in (2..=p).step_by(2) {
        for i in 0..=(p - len) {
            let j = i + len;
            let mut total = 0u128;
            for q in ((i + 1)..j).step_by(2) {
                if labels[i] == labels[q] {
                    total += count[i + 1][q] * count[q + 1][j];
                }
            }
            count[i][j] = total;
        }
    }
    count[0][p]
}

/// τ(w) for n free semicircular variables on [-1, 1]. Stars are irrelevant.
pub fn free_semicircular_family_moment(w: &StarMonomial, n: usize) -> Result<f64> {
    if w.max_index() > n || w.letters().iter().any(|l| l.index == 0) {
        return Err(mismatch(format!("word {w} uses a variable outside 1..={n}")));
    }
    let labels: Vec<usize> = w.letters().iter().map(|l| l.index).collect();
    let c = noncrossing_pairings(&labels);
    Ok(c as f64 * 0.25f64.powi((w.degree() / 2) as i32))
}

/// Normalized traces of every word of degree ≤ m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub k: usize,
    pub max_degree: usize,
    pub words: Vec<StarMonomial>,
    pub values: Vec<Complex64>,
}

impl EmpiricalMoments {
    pub fn get(&self, w: &StarMonomial) -> Option<Complex64> {
        self.words.iter().position(|x| x == w).map(|i| self.values[i])
    }
}

pub fn empirical_moments(xi: &MatrixTuple, max_degree: usize) -> Result<EmpiricalMoments> {
    let words = enumerate_words(xi.n(), max_degree)?;
    let values = view_traces(&xi.view(), &words)?;
    Ok(EmpiricalMoments {
        k: xi.k(),
        max_degree,
        words,
        values,
    })
}

/// Traces of `words` on a view; self-adjoint views evaluate each distinct
/// destarred word once.
pub fn view_traces(view: &TupleView<'_>, words: &[StarMonomial]) -> Result<Vec<Complex64>> {
    if !view.selfadjoint {
        return word_traces(view, words);
    }
    let mut distinct: Vec<StarMonomial> = words.iter().map(|w| w.destarred()).collect();
    distinct.sort();
    distinct.dedup();
    let vals = word_traces(view, &distinct)?;
    Ok(words
        .iter()
        .map(|w| {
            let i = distinct
                .binary_search(&w.destarred())
                .expect("destarred word is present");
            vals[i]
        })
        .collect())
}

/// max over words of degree ≤ m of |f(w) - tr_k(w(ξ))|.
pub fn microstate_residual(view: &TupleView<'_>, spec: &MomentSpec, m: usize) -> Result<f64> {
    if view.n() != spec.n() {
        return Err(mismatch(format!(
            "tuple has {} coordinates, moment function has {}",
            view.n(),
            spec.n()
        )));
    }
    // Self-adjoint coordinates make w and its destarred form agree.
    let words = enumerate_words_with(spec.n(), m, view.selfadjoint)?;
    let targets = if view.selfadjoint {
        spec.starless_targets(m)?
    } else {
        spec.targets(m)?
    };
    let traces = view_traces(view, &words)?;
    Ok(traces
        .iter()
        .zip(targets.iter())
        .map(|(t, f)| (t - f).norm())
        .fold(0.0, f64::max))
}

/// Whether ξ lies in Γ(f; m, k, γ): every word of degree ≤ m has residual < γ.
pub fn is_microstate(xi: &MatrixTuple, spec: &MomentSpec, m: usize, gamma: f64) -> Result<bool> {
    check_gamma(gamma)?;
    Ok(microstate_residual(&xi.view(), spec, m)? < gamma)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Largest |tr_k(c_1 ⋯ c_p)| over alternating products (2 ≤ p ≤ m) of centered
/// words of degree ≤ m taken from consecutive distinct blocks.
pub fn freeness_defect(blocks: &[MatrixTuple], m: usize) -> Result<f64> {
    if m == 0 {
        return Err(invalid("max_degree must be at least 1"));
    }
    let Some(first) = blocks.first() else {
        return Err(invalid("freeness needs at least one block"));
    };
    let k = first.k();
    if blocks.iter().any(|b| b.k() != k) {
        return Err(mismatch("all blocks must have the same matrix size"));
    }
    if blocks.len() < 2 || m < 2 {
        return Ok(0.0);
    }
    let centered: Vec<Vec<CMatrix>> = blocks
        .iter()
        .map(|b| centered_words(b, m))
        .collect::<Result<_>>()?;
    let mut best = 0.0f64;
    for (b, cs) in centered.iter().enumerate() {
        for c in cs {
            alternating(&centered, b, c, 1, m, &mut best);
        }
    }
    Ok(best)
}

fn centered_words(b: &MatrixTuple, m: usize) -> Result<Vec<CMatrix>> {
    let words = enumerate_words_with(b.n(), m, b.selfadjoint())?;
    let view = b.view();
    words
        .iter()
        .map(|w| {
            let mut a = crate::words::evaluate_view(w, &view)?;
            let t = normalized_trace(&a);
            for i in 0..a.nrows() {
                a[(i, i)] -= t;
            }
            Ok(a)
        })
        .collect()
}

fn alternating(
    centered: &[Vec<CMatrix>],
    last: usize,
    prod: &CMatrix,
    len: usize,
    m: usize,
    best: &mut f64,
) {
    for (b, cs) in centered.iter().enumerate() {
        if b == last {
            continue;
        }
        for c in cs {
            let t = trace_of_product(prod, c);
            *best = best.max(t.norm());
            if len + 1 < m {
                alternating(centered, b, &(prod * c), len + 1, m, best);
            }
        }
    }
}

/// tr_k(a b) without forming the product.
fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let k = a.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s / k as f64
}

pub fn is_free(blocks: &[MatrixTuple], m: usize, gamma: f64) -> Result<bool> {
    check_gamma(gamma)?;
    Ok(freeness_defect(blocks, m)? < gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{diag, sample_gue, RngStream};

    fn w(s: &str) -> StarMonomial {
        s.parse().unwrap()
    }

    #[test]
    fn semicircle_moments_are_scaled_catalan_numbers() {
        let expect = [1.0, 0.0, 0.25, 0.0, 2.0 / 16.0, 0.0, 5.0 / 64.0, 0.0, 14.0 / 256.0];
        for (p, e) in expect.iter().enumerate() {
            assert!((semicircle_moment(p) - e).abs() < 1e-15, "p = {p}");
        }
    }

    #[test]
    fn pairing_counts() {
        assert_eq!(noncrossing_pairings(&[1, 1, 1, 1]), 2);
        assert_eq!(noncrossing_pairings(&[1, 2, 1, 2]), 0);
        assert_eq!(noncrossing_pairings(&[1, 1, 2, 2]), 1);
        assert_eq!(noncrossing_pairings(&[1; 8]), 14);
        assert_eq!(noncrossing_pairings(&[1, 2, 2, 1]), 1);
    }

    #[test]
    fn free_family_moments() {
        let v = |s: &str| free_semicircular_family_moment(&w(s), 2).unwrap();
        assert_eq!(v("x1 x2 x1 x2"), 0.0);
        assert!((v("x1 x1 x2 x2") - 1.0 / 16.0).abs() < 1e-15);
        assert!((v("x1 x1* x1 x1") - 2.0 / 16.0).abs() < 1e-15);
        assert_eq!(v("x1 x2"), 0.0);
        assert!(free_semicircular_family_moment(&w("x3"), 2).is_err());
    }

    #[test]
    fn table_uses_adjoint_symmetry() {
        let mut t = BTreeMap::new();
        t.insert(w("x1 x2*"), Complex64::new(0.5, 0.25));
        let spec = MomentSpec::from_table(2, 1.0, t, Provenance::Empirical).unwrap();
        assert_eq!(spec.moment(&w("x2 x1*")).unwrap(), Complex64::new(0.5, -0.25));
        assert!(matches!(spec.moment(&w("x1")), Err(Error::MissingMoment(_))));
    }

    #[test]
    fn json_round_trip() {
        let mut t = BTreeMap::new();
        t.insert(w("x1 x1"), Complex64::new(0.25, 0.0));
        t.insert(w("x1"), Complex64::new(0.0, 0.0));
        let spec = MomentSpec::from_table(1, 1.0, t, Provenance::Extracted).unwrap();
        let back = MomentSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        let named = MomentSpec::from_json(r#"{"law":"semicircle"}"#).unwrap();
        assert_eq!(named, MomentSpec::semicircle());
        let fam = MomentSpec::from_json(r#"{"law":"free_semicircle_family","n":3}"#).unwrap();
        assert_eq!(fam.n(), 3);
        assert!(MomentSpec::from_json(r#"{"n":1,"R":1,"moments":{"x1":[0,0]},"extra":1}"#).is_err());
        assert!(MomentSpec::from_json(r#"{"n":1,"R":1,"moments":{"x1  x1":[0,0]}}"#).is_err());
    }

    #[test]
    fn empirical_moments_of_a_diagonal_matrix() {
        let xi = MatrixTuple::new(vec![diag(&[1.0, -1.0])], true).unwrap();
        let em = empirical_moments(&xi, 2).unwrap();
        assert_eq!(em.get(&w("x1")).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(em.get(&w("x1* x1")).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(em.words.len(), 6);
    }

    #[test]
    fn microstate_membership_examples() {
        let xi = MatrixTuple::new(vec![diag(&[0.5, -0.5])], true).unwrap();
        let f = MomentSpec::semicircle();
        assert!(is_microstate(&xi, &f, 2, 0.01).unwrap());
        // degree 4: 1/16 against 2/16
        assert!(!is_microstate(&xi, &f, 4, 0.01).unwrap());
        assert!(is_microstate(&xi, &f, 4, 0.07).unwrap());
        assert!(is_microstate(&xi, &f, 2, 0.0).is_err());
        let two = MatrixTuple::zeros(2, 2).unwrap();
        assert!(matches!(
            is_microstate(&two, &f, 2, 0.1),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn boundary_is_strict() {
        let xi = MatrixTuple::new(vec![diag(&[0.5, 0.5])], true).unwrap();
        let f = MomentSpec::semicircle();
        // residual on x1 is exactly 0.5
        assert!(!is_microstate(&xi, &f, 1, 0.5).unwrap());
        assert!(is_microstate(&xi, &f, 1, 0.5 + 1e-12).unwrap());
    }

    #[test]
    fn identical_blocks_are_not_free() {
        let a = MatrixTuple::new(vec![diag(&[1.0, -1.0])], true).unwrap();
        let d = freeness_defect(&[a.clone(), a.clone()], 2).unwrap();
        assert!((d - 1.0).abs() < 1e-14);
        assert!(!is_free(&[a.clone(), a], 2, 0.5).unwrap());
    }

    #[test]
    fn scalar_blocks_are_free() {
        let a = MatrixTuple::identity(1, 3).unwrap();
        let b = MatrixTuple::new(vec![diag(&[1.0, 2.0, 3.0])], true).unwrap();
        assert!(freeness_defect(&[a, b], 4).unwrap() < 1e-14);
    }

    #[test]
    fn independent_gue_blocks_become_free() {
        let mut rng = RngStream::new(3).rng();
        let defect = |k: usize, rng: &mut crate::matrices::StreamRng| {
            let a = MatrixTuple::new(vec![sample_gue(k, 1.0, rng).unwrap()], true).unwrap();
            let b = MatrixTuple::new(vec![sample_gue(k, 1.0, rng).unwrap()], true).unwrap();
            freeness_defect(&[a, b], 2).unwrap()
        };
        let small = defect(4, &mut rng);
        let large = defect(128, &mut rng);
        assert!(large < small);
        assert!(large < 0.1, "{large}");
    }
}
