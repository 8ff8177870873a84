//! *-monomials in n indeterminates: enumeration, adjoints, and evaluation on
//! matrix tuples.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, mismatch, Error, Result};
use crate::matrices::{CMatrix, MatrixTuple, TupleView};

/// One letter x_i or x_i*. Ordered by index, unstarred before starred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StarLetter {
    /// 1-based variable index.
    pub index: usize,
    pub starred: bool,
}

impl StarLetter {
    pub fn new(index: usize, starred: bool) -> Self {
        Self { index, starred }
    }

    pub fn adjoint(self) -> Self {
        Self {
            starred: !self.starred,
            ..self
        }
    }
}

/// A word x_{i1}^{j1} ⋯ x_{ip}^{jp}.
///
/// Words compare in graded order: by degree, then lexicographically by letter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StarMonomial {
    letters: Vec<StarLetter>,
}

impl StarMonomial {
    pub fn new(letters: Vec<StarLetter>) -> Self {
        Self { letters }
    }

    /// x_i^p, unstarred.
    pub fn power(index: usize, p: usize) -> Self {
        Self::new(vec![StarLetter::new(index, false); p])
    }

    pub fn letters(&self) -> &[StarLetter] {
        &self.letters
    }

    pub fn degree(&self) -> usize {
        self.letters.len()
    }

    /// Largest variable index used (0 for the empty word).
    pub fn max_index(&self) -> usize {
        self.letters.iter().map(|l| l.index).max().unwrap_or(0)
    }

    /// w* : letters reversed with adjoint flags flipped.
    pub fn adjoint(&self) -> Self {
        Self::new(self.letters.iter().rev().map(|l| l.adjoint()).collect())
    }

    /// The same word with every adjoint flag cleared.
    pub fn destarred(&self) -> Self {
        Self::new(
            self.letters
                .iter()
                .map(|l| StarLetter::new(l.index, false))
                .collect(),
        )
    }

    pub fn is_starless(&self) -> bool {
        self.letters.iter().all(|l| !l.starred)
    }

    /// Same word with indices shifted by `offset`; used when a block's words
    /// are embedded in a larger tuple.
    pub fn shifted(&self, offset: usize) -> Self {
        Self::new(
            self.letters
                .iter()
                .map(|l| StarLetter::new(l.index + offset, l.starred))
                .collect(),
        )
    }

    fn prefix(&self) -> Self {
        Self::new(self.letters[..self.letters.len() - 1].to_vec())
    }
}

impl Ord for StarMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for StarMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for StarMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "x{}", l.index)?;
            if l.starred {
                f.write_str("*")?;
            }
        }
        Ok(())
    }
}

impl FromStr for StarMonomial {
    type Err = Error;

    /// Parses the canonical form, e.g. `"x1 x2* x1"`: single spaces between
    /// letters, 1-based indices without leading zeros, optional `*` suffix.
    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Parse("empty word".into()));
        }
        let letters = s
            .split(' ')
            .map(|tok| {
                let body = tok
                    .strip_prefix('x')
                    .ok_or_else(|| Error::Parse(format!("letter {tok:?} must start with 'x'")))?;
                let (digits, starred) = match body.strip_suffix('*') {
                    Some(d) => (d, true),
                    None => (body, false),
                };
                if digits.is_empty()
                    || !digits.bytes().all(|b| b.is_ascii_digit())
                    || digits.starts_with('0')
                {
                    return Err(Error::Parse(format!("bad variable index in {tok:?}")));
                }
                let index = digits
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad variable index in {tok:?}")))?;
                Ok(StarLetter::new(index, starred))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(letters))
    }
}

impl Serialize for StarMonomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StarMonomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All words of degree 1..=max_degree in n variables, in graded order.
///
/// The list for `max_degree` is a prefix of the list for `max_degree + 1`.
pub fn enumerate_words(n: usize, max_degree: usize) -> Result<Vec<StarMonomial>> {
    enumerate_words_with(n, max_degree, false)
}

/// Like [`enumerate_words`]; with `starless` set only words without adjoint
/// letters are produced (the star-collapsed list for self-adjoint tuples).
pub fn enumerate_words_with(
    n: usize,
    max_degree: usize,
    starless: bool,
) -> Result<Vec<StarMonomial>> {
    if n == 0 {
        return Err(invalid("variable count must be at least 1"));
    }
    if max_degree == 0 {
        return Err(invalid("max_degree must be at least 1"));
    }
    let alphabet: Vec<StarLetter> = (1..=n)
        .flat_map(|i| {
            let plain = std::iter::once(StarLetter::new(i, false));
            let star = (!starless).then_some(StarLetter::new(i, true));
            plain.chain(star)
        })
        .collect();
    let mut out = Vec::new();
    let mut level: Vec<Vec<StarLetter>> = vec![Vec::new()];
    for _ in 0..max_degree {
        let next: Vec<Vec<StarLetter>> = level
            .iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&l| {
                    let mut v = w.clone();
                    v.push(l);
                    v
                })
            })
            .collect();
        out.extend(next.iter().cloned().map(StarMonomial::new));
        level = next;
    }
    Ok(out)
}

fn check_indices(w: &StarMonomial, n: usize) -> Result<()> {
    if w.letters.iter().any(|l| l.index == 0) || w.max_index() > n {
        return Err(mismatch(format!(
            "word {w} uses a variable outside 1..={n}"
        )));
    }
    Ok(())
}

fn letter_matrix<'a>(
    view: &TupleView<'a>,
    l: StarLetter,
    adjoints: &'a [std::sync::OnceLock<CMatrix>],
) -> &'a CMatrix {
    let m = &view.mats[l.index - 1];
    if l.starred && !view.selfadjoint {
        adjoints[l.index - 1].get_or_init(|| m.adjoint())
    } else {
        m
    }
}

/// ξ_{i1}^{j1} ⋯ ξ_{ip}^{jp}. The empty word evaluates to the identity.
pub fn evaluate(w: &StarMonomial, xi: &MatrixTuple) -> Result<CMatrix> {
    evaluate_view(w, &xi.view())
}

pub fn evaluate_view(w: &StarMonomial, view: &TupleView<'_>) -> Result<CMatrix> {
    check_indices(w, view.n())?;
    let adj: Vec<std::sync::OnceLock<CMatrix>> = (0..view.n()).map(|_| Default::default()).collect();
    let mut acc = CMatrix::identity(view.k, view.k);
    for &l in &w.letters {
        acc = &acc * letter_matrix(view, l, &adj);
    }
    Ok(acc)
}

/// tr_k(w(ξ)) with tr_k the normalized trace.
pub fn trace_moment(w: &StarMonomial, xi: &MatrixTuple) -> Result<Complex64> {
    Ok(word_traces(&xi.view(), std::slice::from_ref(w))?[0])
}

/// Normalized traces of many words at once.
///
/// Products of all proper prefixes are cached and the last letter is folded
/// in with an O(k²) contraction, so graded word lists cost one matrix
/// product per word of degree below the maximum.
pub fn word_traces(view: &TupleView<'_>, words: &[StarMonomial]) -> Result<Vec<Complex64>> {
    for w in words {
        check_indices(w, view.n())?;
    }
    let adj: Vec<std::sync::OnceLock<CMatrix>> = (0..view.n()).map(|_| Default::default()).collect();
    let mut cache: HashMap<StarMonomial, CMatrix> = HashMap::new();
    let k = view.k;
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        if w.degree() == 0 {
            out.push(Complex64::new(1.0, 0.0));
            continue;
        }
        let last = letter_matrix(view, *w.letters.last().unwrap(), &adj);
        let value = if w.degree() == 1 {
            last.trace()
        } else {
            let prefix = w.prefix();
            let p = prefix_product(view, &prefix, &mut cache, &adj);
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    s += p[(i, j)] * last[(j, i)];
                }
            }
            s
        };
        out.push(value / k as f64);
    }
    Ok(out)
}

fn prefix_product<'c>(
    view: &TupleView<'_>,
    w: &StarMonomial,
    cache: &'c mut HashMap<StarMonomial, CMatrix>,
    adj: &[std::sync::OnceLock<CMatrix>],
) -> &'c CMatrix {
    if !cache.contains_key(w) {
        let m = if w.degree() == 1 {
            letter_matrix(view, w.letters[0], adj).clone()
        } else {
            let head = w.prefix();
            let p = prefix_product(view, &head, cache, adj);
            p * letter_matrix(view, *w.letters.last().unwrap(), adj)
        };
        cache.insert(w.clone(), m);
    }
    &cache[w]
}
