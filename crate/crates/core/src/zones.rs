//! Zones: (m, k, γ)-indexed families of matrix-tuple sets, given as
//! descriptor trees with a membership predicate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::matrices::{
    hermitian_op_norm, op_norm, BallSampler, ChunkPlan, MatrixTuple, RngStream, TupleBallSampler,
    TupleView,
};
use crate::moments::{check_gamma, microstate_residual, MomentSpec};
use crate::words::{evaluate_view, StarMonomial};

pub const ZONE_SCHEMA_VERSION: u32 = 1;

/// Tolerance on the imaginary part for `Exact` membership in a real segment.
pub const EXACT_IMAG_TOL: f64 = 1e-12;

/// A set E ⊂ ℂ of admissible values for a word trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterSet {
    Points { points: Vec<[f64; 2]> },
    Disc { center: [f64; 2], radius: f64 },
    /// Real interval [lo, hi].
    Segment { lo: f64, hi: f64 },
}

impl CenterSet {
    pub fn point(z: Complex64) -> Self {
        Self::Points {
            points: vec![[z.re, z.im]],
        }
    }

    pub fn disc(center: Complex64, radius: f64) -> Self {
        Self::Disc {
            center: [center.re, center.im],
            radius,
        }
    }

    /// Euclidean distance from z to the set (0 inside).
    pub fn distance(&self, z: Complex64) -> f64 {
        match self {
            Self::Points { points } => points
                .iter()
                .map(|p| (z - Complex64::new(p[0], p[1])).norm())
                .fold(f64::INFINITY, f64::min),
            Self::Disc { center, radius } => {
                ((z - Complex64::new(center[0], center[1])).norm() - radius).max(0.0)
            }
            Self::Segment { lo, hi } => {
                let x = z.re.clamp(*lo, *hi);
                (z - Complex64::new(x, 0.0)).norm()
            }
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            Self::Points { points } => points.iter().any(|p| z == Complex64::new(p[0], p[1])),
            Self::Disc { center, radius } => {
                (z - Complex64::new(center[0], center[1])).norm() <= *radius
            }
            Self::Segment { lo, hi } => {
                z.im.abs() <= EXACT_IMAG_TOL && z.re >= *lo && z.re <= *hi
            }
        }
    }

    /// Largest modulus of a point of the set.
    pub fn max_modulus(&self) -> f64 {
        match self {
            Self::Points { points } => points
                .iter()
                .map(|p| Complex64::new(p[0], p[1]).norm())
                .fold(0.0, f64::max),
            Self::Disc { center, radius } => Complex64::new(center[0], center[1]).norm() + radius,
            Self::Segment { lo, hi } => lo.abs().max(hi.abs()),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Self::Points { points } => {
                if points.is_empty() || !points.iter().all(|p| finite(p)) {
                    return Err(invalid("point set must be nonempty and finite"));
                }
            }
            Self::Disc { center, radius } => {
                if !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid("disc needs a finite center and positive radius"));
                }
            }
            Self::Segment { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(invalid("segment needs finite lo ≤ hi"));
                }
            }
        }
        Ok(())
    }
}

/// How a moment constraint uses γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// dist(tr w(ξ), E) < γ.
    #[default]
    Neighborhood,
    /// tr w(ξ) ∈ E, independent of γ.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductPart {
    pub n: usize,
    pub zone: ZoneDescriptor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZoneDescriptor {
    /// max_i ‖ξ_i‖ ≤ radius.
    Ball { radius: f64 },
    Microstate { spec: MomentSpec },
    MomentConstraint {
        word: StarMonomial,
        set: CenterSet,
        #[serde(default)]
        mode: ConstraintMode,
    },
    Intersect { children: Vec<ZoneDescriptor> },
    Union { children: Vec<ZoneDescriptor> },
    /// Consecutive coordinate blocks, each with its own zone.
    Product { parts: Vec<ProductPart> },
    /// Ball(radius) minus inner(m, γ) at the frozen level (m, gamma).
    ComplementWithinBall {
        inner: Box<ZoneDescriptor>,
        radius: f64,
        m: usize,
        gamma: f64,
    },
}

impl ZoneDescriptor {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Ball { radius } => check_radius(*radius),
            Self::Microstate { spec } => {
                if spec.n() != n {
                    return Err(mismatch(format!(
                        "microstate spec has n = {}, zone has n = {n}",
                        spec.n()
                    )));
                }
                Ok(())
            }
            Self::MomentConstraint { word, set, .. } => {
                if word.degree() == 0 {
                    return Err(invalid("moment constraint on the empty word"));
                }
                if word.max_index() > n || word.letters().iter().any(|l| l.index == 0) {
                    return Err(mismatch(format!("word {word} uses a variable outside 1..={n}")));
                }
                set.validate()
            }
            Self::Intersect { children } | Self::Union { children } => {
                if children.is_empty() {
                    return Err(invalid("combinator needs at least one child"));
                }
                children.iter().try_for_each(|c| c.validate(n))
            }
            Self::Product { parts } => {
                if parts.is_empty() {
                    return Err(invalid("product needs at least one part"));
                }
                let total: usize = parts.iter().map(|p| p.n).sum();
                if total != n || parts.iter().any(|p| p.n == 0) {
                    return Err(mismatch(format!(
                        "product parts cover {total} variables, zone has {n}"
                    )));
                }
                parts.iter().try_for_each(|p| p.zone.validate(p.n))
            }
            Self::ComplementWithinBall {
                inner,
                radius,
                m,
                gamma,
            } => {
                check_radius(*radius)?;
                check_gamma(*gamma)?;
                if *m == 0 {
                    return Err(invalid("frozen degree must be at least 1"));
                }
                inner.validate(n)
            }
        }
    }

    /// Norm bound R with membership ⟹ ‖ξ_i‖ ≤ R, if one is known.
    pub fn bound(&self) -> Option<f64> {
        match self {
            Self::Ball { radius } | Self::ComplementWithinBall { radius, .. } => Some(*radius),
            Self::Microstate { .. } | Self::MomentConstraint { .. } => None,
            Self::Intersect { children } => children
                .iter()
                .filter_map(|c| c.bound())
                .reduce(f64::min),
            Self::Union { children } => children
                .iter()
                .map(|c| c.bound())
                .collect::<Option<Vec<_>>>()
                .and_then(|v| v.into_iter().reduce(f64::max)),
            Self::Product { parts } => parts
                .iter()
                .map(|p| p.zone.bound())
                .collect::<Option<Vec<_>>>()
                .and_then(|v| v.into_iter().reduce(f64::max)),
        }
    }

    /// Whether membership bounds every word trace uniformly in k.
    pub fn certified(&self) -> bool {
        match self {
            Self::Ball { .. } | Self::Microstate { .. } | Self::ComplementWithinBall { .. } => true,
            Self::MomentConstraint { .. } => false,
            Self::Intersect { children } => children.iter().any(|c| c.certified()),
            Self::Union { children } => children.iter().all(|c| c.certified()),
            Self::Product { parts } => parts.iter().all(|p| p.zone.certified()),
        }
    }

    fn contains(&self, m: usize, gamma: f64, view: &TupleView<'_>) -> Result<bool> {
        match self {
            Self::Ball { radius } => Ok(in_ball(view, *radius)),
            Self::Microstate { spec } => Ok(microstate_residual(view, spec, m)? < gamma),
            Self::MomentConstraint { word, set, mode } => {
                let z = word_trace(word, view)?;
                Ok(match mode {
                    ConstraintMode::Neighborhood => set.distance(z) < gamma,
                    ConstraintMode::Exact => set.contains(z),
                })
            }
            Self::Intersect { children } => {
                for c in children {
                    if !c.contains(m, gamma, view)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Self::Union { children } => {
                for c in children {
                    if c.contains(m, gamma, view)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Self::Product { parts } => {
                let mut start = 0;
                for p in parts {
                    if !p.zone.contains(m, gamma, &view.slice(start, p.n))? {
                        return Ok(false);
                    }
                    start += p.n;
                }
                Ok(true)
            }
            Self::ComplementWithinBall {
                inner,
                radius,
                m: m0,
                gamma: g0,
            } => Ok(in_ball(view, *radius) && !inner.contains(*m0, *g0, view)?),
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

fn in_ball(view: &TupleView<'_>, radius: f64) -> bool {
    view.mats.iter().all(|a| {
        let norm = if view.selfadjoint {
            hermitian_op_norm(a)
        } else {
            op_norm(a)
        };
        norm <= radius
    })
}

fn word_trace(w: &StarMonomial, view: &TupleView<'_>) -> Result<Complex64> {
    let a = evaluate_view(w, view)?;
    Ok(a.trace() / view.k as f64)
}

/// A validated descriptor over n variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Zone {
    n: usize,
    descriptor: ZoneDescriptor,
}

impl Zone {
    /// Validates the tree; descriptors without a uniform per-word bound are
    /// rejected with [`Error::Unbounded`].
    pub fn new(n: usize, descriptor: ZoneDescriptor) -> Result<Self> {
        if n == 0 {
            return Err(invalid("variable count must be at least 1"));
        }
        descriptor.validate(n)?;
        if !descriptor.certified() {
            return Err(Error::Unbounded);
        }
        Ok(Self { n, descriptor })
    }

    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        Self::new(n, ZoneDescriptor::Ball { radius })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bound(&self) -> Option<f64> {
        self.descriptor.bound()
    }

    pub fn descriptor(&self) -> &ZoneDescriptor {
        &self.descriptor
    }

    /// Whether ξ ∈ Z(m, k, γ), k being the size of ξ.
    pub fn contains(&self, m: usize, gamma: f64, xi: &MatrixTuple) -> Result<bool> {
        self.contains_view(m, gamma, &xi.view())
    }

    pub fn contains_view(&self, m: usize, gamma: f64, view: &TupleView<'_>) -> Result<bool> {
        if view.n() != self.n {
            return Err(mismatch(format!(
                "tuple has {} coordinates, zone has {}",
                view.n(),
                self.n
            )));
        }
        if m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        check_gamma(gamma)?;
        self.descriptor.contains(m, gamma, view)
    }

    /// Z ∩ M_{w,E}: adds a moment constraint to a certified zone.
    pub fn with_constraint(
        &self,
        word: StarMonomial,
        set: CenterSet,
        mode: ConstraintMode,
    ) -> Result<Self> {
        let c = ZoneDescriptor::MomentConstraint { word, set, mode };
        c.validate(self.n)?;
        Ok(Self {
            n: self.n,
            descriptor: push_child(self.descriptor.clone(), c),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ZoneFile::from(self)).expect("zone serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ZoneFile = serde_json::from_str(s)?;
        f.try_into()
    }
}

fn push_child(d: ZoneDescriptor, c: ZoneDescriptor) -> ZoneDescriptor {
    match d {
        ZoneDescriptor::Intersect { mut children } => {
            children.push(c);
            ZoneDescriptor::Intersect { children }
        }
        other => ZoneDescriptor::Intersect {
            children: vec![other, c],
        },
    }
}

/// Versioned on-disk form of a zone.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneFile {
    pub schema_version: u32,
    pub n: usize,
    pub zone: ZoneDescriptor,
}

impl From<&Zone> for ZoneFile {
    fn from(z: &Zone) -> Self {
        Self {
            schema_version: ZONE_SCHEMA_VERSION,
            n: z.n,
            zone: z.descriptor.clone(),
        }
    }
}

impl TryFrom<ZoneFile> for Zone {
    type Error = Error;

    fn try_from(f: ZoneFile) -> Result<Self> {
        if f.schema_version != ZONE_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported zone schema version {}",
                f.schema_version
            )));
        }
        Zone::new(f.n, f.zone)
    }
}

impl Serialize for Zone {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ZoneFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Zone {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ZoneFile::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

fn same_n(a: &Zone, b: &Zone) -> Result<()> {
    if a.n != b.n {
        return Err(mismatch(format!(
            "zones have {} and {} variables",
            a.n, b.n
        )));
    }
    Ok(())
}

pub fn intersect(a: &Zone, b: &Zone) -> Result<Zone> {
    same_n(a, b)?;
    Zone::new(
        a.n,
        ZoneDescriptor::Intersect {
            children: vec![a.descriptor.clone(), b.descriptor.clone()],
        },
    )
}

pub fn union(a: &Zone, b: &Zone) -> Result<Zone> {
    union_all(&[a.clone(), b.clone()])
}

pub fn union_all(zones: &[Zone]) -> Result<Zone> {
    let first = zones.first().ok_or_else(|| invalid("union of no zones"))?;
    for z in zones {
        same_n(first, z)?;
    }
    Zone::new(
        first.n,
        ZoneDescriptor::Union {
            children: zones.iter().map(|z| z.descriptor.clone()).collect(),
        },
    )
}

/// Z × W on the concatenated variables.
pub fn product(a: &Zone, b: &Zone) -> Result<Zone> {
    product_all(&[a.clone(), b.clone()])
}

pub fn product_all(zones: &[Zone]) -> Result<Zone> {
    if zones.is_empty() {
        return Err(invalid("product of no zones"));
    }
    let parts: Vec<ProductPart> = zones
        .iter()
        .map(|z| ProductPart {
            n: z.n,
            zone: z.descriptor.clone(),
        })
        .collect();
    Zone::new(parts.iter().map(|p| p.n).sum(), ZoneDescriptor::Product { parts })
}

/// Γ(f) or, with a radius, Γ_R(f) = Γ(f) ∩ Ball(R).
pub fn microstate_zone(spec: &MomentSpec, radius: Option<f64>) -> Result<Zone> {
    let micro = ZoneDescriptor::Microstate { spec: spec.clone() };
    let d = match radius {
        Some(r) => ZoneDescriptor::Intersect {
            children: vec![ZoneDescriptor::Ball { radius: r }, micro],
        },
        None => micro,
    };
    Zone::new(spec.n(), d)
}

/// Ball(R) ∖ Z(m0, γ0).
pub fn complement_within_ball(inner: &Zone, radius: f64, m0: usize, gamma0: f64) -> Result<Zone> {
    Zone::new(
        inner.n,
        ZoneDescriptor::ComplementWithinBall {
            inner: Box::new(inner.descriptor.clone()),
            radius,
            m: m0,
            gamma: gamma0,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubzoneProbeLevel {
    pub k: usize,
    pub samples: usize,
    pub in_inner: usize,
    pub counterexamples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubzoneProbe {
    pub m: usize,
    pub gamma: f64,
    pub reference_radius: f64,
    pub levels: Vec<SubzoneProbeLevel>,
    pub counterexamples: usize,
    /// Always "falsification only": an empty result does not certify W ⊂ Z.
    pub note: String,
}

/// Searches for ξ ∈ W(m, k, γ) ∖ Z(m, k, γ) among uniform samples of the
/// ball of radius bound(W), for each k in `k_list`.
#[allow(clippy::too_many_arguments)]
pub fn subzone_probe(
    w: &Zone,
    z: &Zone,
    m: usize,
    gamma: f64,
    k_list: &[usize],
    sampler: &BallSampler,
    samples: usize,
    stream: &RngStream,
) -> Result<SubzoneProbe> {
    same_n(w, z)?;
    let radius = w.bound().ok_or(Error::Unbounded)?;
    let plan = ChunkPlan::default();
    let mut levels = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let parts = plan.run(&stream.substream(k as u64), samples, |_, count, rng| {
            let mut s = TupleBallSampler::new(w.n, k, radius, sampler, rng)?;
            let (mut inside, mut bad) = (0usize, 0usize);
            for _ in 0..count {
                let xi = s.next(rng)?;
                if w.contains(m, gamma, &xi)? {
                    inside += 1;
                    if !z.contains(m, gamma, &xi)? {
                        bad += 1;
                    }
                }
            }
            Ok::<_, Error>((inside, bad))
        });
        let (mut inside, mut bad) = (0, 0);
        for p in parts {
            let (i, b) = p?;
            inside += i;
            bad += b;
        }
        levels.push(SubzoneProbeLevel {
            k,
            samples,
            in_inner: inside,
            counterexamples: bad,
        });
    }
    Ok(SubzoneProbe {
        m,
        gamma,
        reference_radius: radius,
        counterexamples: levels.iter().map(|l| l.counterexamples).sum(),
        levels,
        note: "falsification only".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{diag, sample_gue, sample_uniform_opball, McmcParams};

    fn w(s: &str) -> StarMonomial {
        s.parse().unwrap()
    }

    fn scalar(x: f64) -> MatrixTuple {
        MatrixTuple::new(vec![diag(&[x])], true).unwrap()
    }

    fn constraint(word: &str, set: CenterSet) -> ZoneDescriptor {
        ZoneDescriptor::MomentConstraint {
            word: w(word),
            set,
            mode: ConstraintMode::Neighborhood,
        }
    }

    #[test]
    fn ball_contains_identity() {
        let z = Zone::ball(1, 1.0).unwrap();
        assert!(z.contains(1, 0.1, &MatrixTuple::identity(1, 4).unwrap()).unwrap());
        let two = MatrixTuple::new(vec![diag(&[2.0, 0.0])], true).unwrap();
        assert!(!z.contains(1, 0.1, &two).unwrap());
    }

    #[test]
    fn moment_constraint_example() {
        let z = Zone::ball(1, 2.0)
            .unwrap()
            .with_constraint(w("x1"), CenterSet::point(Complex64::new(0.5, 0.0)), ConstraintMode::Neighborhood)
            .unwrap();
        let id = MatrixTuple::identity(1, 3).unwrap();
        assert!(!z.contains(1, 0.4, &id).unwrap());
        assert!(z.contains(1, 0.6, &id).unwrap());
    }

    #[test]
    fn standalone_constraint_is_unbounded() {
        let d = constraint("x1", CenterSet::point(Complex64::new(0.0, 0.0)));
        assert!(matches!(Zone::new(1, d), Err(Error::Unbounded)));
    }

    #[test]
    fn combinator_identities() {
        let b1 = Zone::ball(1, 1.0).unwrap();
        let b2 = Zone::ball(1, 2.0).unwrap();
        let i = intersect(&b1, &b2).unwrap();
        assert_eq!(i.bound(), Some(1.0));
        let u = union(&b1, &b1).unwrap();
        assert_eq!(union(&b1, &b2).unwrap().bound(), Some(2.0));
        let p = product(&b1, &b1).unwrap();
        assert_eq!(p.n(), 2);
        let b12 = Zone::ball(2, 1.0).unwrap();
        let mut rng = RngStream::new(1).rng();
        for _ in 0..50 {
            let a = sample_gue(3, 0.3, &mut rng).unwrap();
            let b = sample_gue(3, 0.3, &mut rng).unwrap();
            let x = MatrixTuple::new(vec![a.clone()], true).unwrap();
            assert_eq!(i.contains(1, 0.1, &x).unwrap(), b1.contains(1, 0.1, &x).unwrap());
            assert_eq!(u.contains(1, 0.1, &x).unwrap(), b1.contains(1, 0.1, &x).unwrap());
            let xy = MatrixTuple::new(vec![a, b], true).unwrap();
            assert_eq!(p.contains(1, 0.1, &xy).unwrap(), b12.contains(1, 0.1, &xy).unwrap());
        }
        assert!(matches!(
            intersect(&b1, &b12),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn microstate_zone_is_a_conjunction() {
        let f = MomentSpec::semicircle();
        let z = microstate_zone(&f, Some(1.0)).unwrap();
        let ball = Zone::ball(1, 1.0).unwrap();
        let micro = microstate_zone(&f, None).unwrap();
        let mut rng = RngStream::new(2).rng();
        for _ in 0..40 {
            let mut a = sample_gue(16, 0.25, &mut rng).unwrap();
            let s = crate::matrices::op_norm(&a).max(1.0);
            a /= Complex64::new(s, 0.0);
            let x = MatrixTuple::new(vec![a], true).unwrap();
            let both = ball.contains(4, 0.2, &x).unwrap() && micro.contains(4, 0.2, &x).unwrap();
            assert_eq!(z.contains(4, 0.2, &x).unwrap(), both);
        }
    }

    #[test]
    fn complement_matches_de_morgan() {
        let inner = microstate_zone(&MomentSpec::semicircle(), Some(1.0)).unwrap();
        let c = complement_within_ball(&inner, 1.0, 2, 0.1).unwrap();
        let ball = Zone::ball(1, 1.0).unwrap();
        let params = McmcParams::default();
        let mut rng = RngStream::new(4).rng();
        for _ in 0..30 {
            let a = sample_uniform_opball(4, &mut rng, &params).unwrap();
            let x = MatrixTuple::new(vec![a], true).unwrap();
            let expect = ball.contains(1, 0.5, &x).unwrap() && !inner.contains(2, 0.1, &x).unwrap();
            assert_eq!(c.contains(3, 0.05, &x).unwrap(), expect);
        }
    }

    #[test]
    fn exact_mode_ignores_gamma() {
        let z = Zone::ball(1, 1.0)
            .unwrap()
            .with_constraint(w("x1"), CenterSet::Segment { lo: 0.0, hi: 0.5 }, ConstraintMode::Exact)
            .unwrap();
        assert!(z.contains(1, 1e-9, &scalar(0.25)).unwrap());
        assert!(!z.contains(1, 10.0, &scalar(0.75)).unwrap());
    }

    #[test]
    fn center_set_distances() {
        let d = CenterSet::disc(Complex64::new(0.0, 0.0), 1.0);
        assert_eq!(d.distance(Complex64::new(0.5, 0.0)), 0.0);
        assert!((d.distance(Complex64::new(0.0, 3.0)) - 2.0).abs() < 1e-15);
        let s = CenterSet::Segment { lo: -1.0, hi: 0.0 };
        assert!((s.distance(Complex64::new(1.0, 1.0)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn json_schema_round_trip() {
        let f = MomentSpec::semicircle();
        let z = microstate_zone(&f, Some(1.0))
            .unwrap()
            .with_constraint(w("x1 x1"), CenterSet::disc(Complex64::new(0.25, 0.0), 0.1), ConstraintMode::Neighborhood)
            .unwrap();
        let s = z.to_json();
        assert!(s.contains("\"type\": \"intersect\""));
        assert_eq!(Zone::from_json(&s).unwrap(), z);
        let bad = r#"{"schema_version":1,"n":1,"zone":{"type":"ball","radius":1,"extra":0}}"#;
        assert!(Zone::from_json(bad).is_err());
        let old = r#"{"schema_version":9,"n":1,"zone":{"type":"ball","radius":1}}"#;
        assert!(matches!(Zone::from_json(old), Err(Error::Config(_))));
        let unbounded = r#"{"schema_version":1,"n":1,"zone":{"type":"moment_constraint","word":"x1","set":{"kind":"points","points":[[0,0]]}}}"#;
        assert!(matches!(Zone::from_json(unbounded), Err(Error::Unbounded)));
    }

    #[test]
    fn subzone_probe_examples() {
        let half = Zone::ball(1, 0.5).unwrap();
        let one = Zone::ball(1, 1.0).unwrap();
        let s = RngStream::new(9);
        let sampler = BallSampler::default();
        let r = subzone_probe(&half, &one, 1, 0.1, &[2, 3], &sampler, 200, &s).unwrap();
        assert_eq!(r.counterexamples, 0);
        let r = subzone_probe(&one, &half, 1, 0.1, &[2], &sampler, 1000, &s).unwrap();
        assert!(r.counterexamples > 0);
        let r = subzone_probe(&one, &one, 1, 0.1, &[2], &sampler, 200, &s).unwrap();
        assert_eq!(r.counterexamples, 0);
    }
}
