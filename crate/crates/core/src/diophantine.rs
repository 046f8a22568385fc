//! Diophantine polynomials over a finite search domain.
//!
//! The domain `{0..c-1}^n` is enumerated in graded-lexicographic order
//! (coordinate sum first, then lexicographic), and enumeration index `k`
//! names basis state `|k>`. The observable `D^2` is diagonal in that basis,
//! and `U_D` relabels `|x>` as `|D(x)^2, x>` in a product basis with an
//! energy-tag register. A domain larger than `2^mu` cannot be put in uniform
//! superposition, which is where the decision procedure stops.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fixedpoint::Resolution;
use crate::rng::Stream;
use crate::statevec::{
    uniform_superposition, BasisIndex, BornSampler, DiagonalObservable, Permutation, Precision,
    StateVector, UnitarySpec,
};

pub const DEFAULT_TAG_WIDTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub coefficient: BigInt,
    pub exponents: Vec<u32>,
}

/// A multivariate polynomial with integer coefficients.
///
/// Terms are kept in canonical order (descending total degree, then
/// descending exponent vector), with distinct exponent vectors and no zero
/// coefficients. The zero polynomial is not representable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiophantinePolynomial {
    arity: usize,
    terms: Vec<Term>,
}

fn term_order(a: &[u32], b: &[u32]) -> Ordering {
    let da: u64 = a.iter().map(|&e| e as u64).sum();
    let db: u64 = b.iter().map(|&e| e as u64).sum();
    db.cmp(&da).then_with(|| b.cmp(a))
}

impl DiophantinePolynomial {
    /// Combines like terms and drops zero coefficients. Exponent vectors
    /// shorter than `arity` are padded with zeros.
    pub fn new(arity: usize, terms: Vec<(BigInt, Vec<u32>)>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidPolynomial("arity must be positive".into()));
        }
        let mut combined: BTreeMap<Vec<u32>, BigInt> = BTreeMap::new();
        for (c, mut e) in terms {
            if e.len() > arity {
                if e[arity..].iter().any(|&x| x != 0) {
                    return Err(Error::InvalidPolynomial(format!(
                        "term uses a variable beyond arity {arity}"
                    )));
                }
                e.truncate(arity);
            }
            e.resize(arity, 0);
            *combined.entry(e).or_insert_with(BigInt::zero) += c;
        }
        let mut terms: Vec<Term> = combined
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(exponents, coefficient)| Term {
                coefficient,
                exponents,
            })
            .collect();
        if terms.is_empty() {
            return Err(Error::InvalidPolynomial("the zero polynomial has no terms".into()));
        }
        terms.sort_by(|a, b| term_order(&a.exponents, &b.exponents));
        Ok(Self { arity, terms })
    }

    /// The constant polynomial `c` in one variable.
    pub fn constant(c: i64) -> Result<Self> {
        Self::new(1, vec![(c.into(), vec![0])])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> u64 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().map(|&e| e as u64).sum())
            .max()
            .unwrap_or(0)
    }

    /// The same polynomial viewed in `arity >= self.arity()` variables.
    pub fn with_arity(&self, arity: usize) -> Result<Self> {
        if arity < self.arity {
            return Err(Error::InvalidPolynomial(format!(
                "cannot shrink arity {} to {arity}",
                self.arity
            )));
        }
        Self::new(
            arity,
            self.terms
                .iter()
                .map(|t| (t.coefficient.clone(), t.exponents.clone()))
                .collect(),
        )
    }

    /// `D(x)` exactly. Small values are evaluated with checked 128-bit
    /// arithmetic and fall back to arbitrary precision on overflow.
    pub fn eval(&self, x: &[u64]) -> BigInt {
        assert_eq!(x.len(), self.arity, "point arity does not match polynomial");
        self.eval_small(x).map(BigInt::from).unwrap_or_else(|| self.eval_big(x))
    }

    fn eval_small(&self, x: &[u64]) -> Option<i128> {
        let mut acc: i128 = 0;
        for t in &self.terms {
            let mut v: i128 = t.coefficient.to_i128()?;
            for (&xi, &e) in x.iter().zip(&t.exponents) {
                if e > 0 {
                    v = v.checked_mul((xi as i128).checked_pow(e)?)?;
                }
            }
            acc = acc.checked_add(v)?;
        }
        Some(acc)
    }

    fn eval_big(&self, x: &[u64]) -> BigInt {
        self.terms
            .iter()
            .map(|t| {
                x.iter()
                    .zip(&t.exponents)
                    .fold(t.coefficient.clone(), |acc, (&xi, &e)| acc * num_traits::pow(BigInt::from(xi), e as usize))
            })
            .sum()
    }

    /// `D(x)^2`.
    pub fn eval_sq(&self, x: &[u64]) -> BigUint {
        let v = self.eval(x);
        (&v * &v).magnitude().clone()
    }

    /// Parses `coeff*x0^e0*x1^e1 ± ...`; arity is one more than the highest
    /// variable index that appears (at least one).
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).parse()
    }

    /// `{"arity": n, "terms": [[coeff, [e0, e1, ...]], ...]}`; coefficients
    /// outside the `i64` range are written as decimal strings.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|t| {
                let c = match t.coefficient.to_i64() {
                    Some(v) => json!(v),
                    None => json!(t.coefficient.to_string()),
                };
                json!([c, t.exponents])
            })
            .collect();
        json!({ "arity": self.arity, "terms": terms })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidPolynomial(m.to_string());
        let arity = v
            .get("arity")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing integer field \"arity\""))? as usize;
        let terms = v
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing array field \"terms\""))?;
        let mut parsed = Vec::with_capacity(terms.len());
        for t in terms {
            let pair = t.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad("term must be [coeff, exponents]"))?;
            let coeff: BigInt = match &pair[0] {
                Value::Number(n) => n
                    .as_i64()
                    .map(BigInt::from)
                    .ok_or_else(|| bad("coefficient must be an integer"))?,
                Value::String(s) => s.trim().parse().map_err(|_| bad("bad coefficient string"))?,
                _ => return Err(bad("coefficient must be an integer or string")),
            };
            let exps = pair[1]
                .as_array()
                .ok_or_else(|| bad("exponents must be an array"))?
                .iter()
                .map(|e| e.as_u64().and_then(|e| u32::try_from(e).ok()).ok_or_else(|| bad("bad exponent")))
                .collect::<Result<Vec<u32>>>()?;
            if exps.len() != arity {
                return Err(bad("exponent vector length must equal arity"));
            }
            parsed.push((coeff, exps));
        }
        Self::new(arity, parsed)
    }
}

impl fmt::Display for DiophantinePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coefficient.is_negative();
            let mag = t.coefficient.abs();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let vars: Vec<String> = t
                .exponents
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(v, &e)| if e == 1 { format!("x{v}") } else { format!("x{v}^{e}") })
                .collect();
            if vars.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{mag}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.char_indices().peekable(),
            text,
        }
    }

    fn err(&mut self, msg: &str) -> Error {
        let pos = self.chars.peek().map(|(i, _)| *i).unwrap_or(self.text.len());
        Error::InvalidPolynomial(format!("{msg} at byte {pos} in {:?}", self.text))
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|(_, c)| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if self.chars.peek().is_some_and(|(_, c)| *c == want) {
            self.chars.next();
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Option<String> {
        self.skip_ws();
        let mut s = String::new();
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.chars.next();
            } else {
                break;
            }
        }
        (!s.is_empty()).then_some(s)
    }

    fn parse(mut self) -> Result<DiophantinePolynomial> {
        let mut terms: Vec<(BigInt, BTreeMap<usize, u32>)> = Vec::new();
        let mut negative = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        loop {
            let (mut coeff, vars) = self.term()?;
            if negative {
                coeff = -coeff;
            }
            terms.push((coeff, vars));
            self.skip_ws();
            match self.chars.next() {
                None => break,
                Some((_, '+')) => negative = false,
                Some((_, '-')) => negative = true,
                Some(_) => return Err(self.err("expected '+' or '-'")),
            }
        }
        let arity = terms
            .iter()
            .flat_map(|(_, v)| v.keys().copied())
            .max()
            .map_or(1, |m| m + 1);
        let terms = terms
            .into_iter()
            .map(|(c, vars)| {
                let mut e = vec![0u32; arity];
                for (v, p) in vars {
                    e[v] = p;
                }
                (c, e)
            })
            .collect();
        DiophantinePolynomial::new(arity, terms)
    }

    fn term(&mut self) -> Result<(BigInt, BTreeMap<usize, u32>)> {
        let mut coeff = BigInt::one();
        let mut vars: BTreeMap<usize, u32> = BTreeMap::new();
        loop {
            self.skip_ws();
            match self.chars.peek().map(|(_, c)| *c) {
                Some(c) if c.is_ascii_digit() => {
                    let d = self.digits().expect("peeked a digit");
                    coeff *= d.parse::<BigInt>().expect("digits parse");
                }
                Some('x') => {
                    self.chars.next();
                    let idx = self
                        .digits()
                        .ok_or_else(|| self.err("expected variable index after 'x'"))?;
                    let idx: usize = idx.parse().map_err(|_| self.err("variable index too large"))?;
                    if idx > 1024 {
                        return Err(self.err("variable index too large"));
                    }
                    let mut power = 1u32;
                    if self.eat('^') {
                        let p = self.digits().ok_or_else(|| self.err("expected exponent"))?;
                        power = p.parse().map_err(|_| self.err("exponent too large"))?;
                    }
                    let e = vars.entry(idx).or_insert(0);
                    *e = e.checked_add(power).ok_or_else(|| self.err("exponent overflow"))?;
                }
                _ => return Err(self.err("expected a number or variable")),
            }
            if !self.eat('*') {
                return Ok((coeff, vars));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Search domain
// ---------------------------------------------------------------------------

/// `{0..cutoff-1}^arity`, enumerated in graded-lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchDomain {
    pub arity: usize,
    pub cutoff: u64,
}

impl SearchDomain {
    pub fn new(arity: usize, cutoff: u64) -> Result<Self> {
        if arity == 0 || cutoff == 0 {
            return Err(Error::InvalidArgument("arity and cutoff must be positive".into()));
        }
        Ok(Self { arity, cutoff })
    }

    /// `cutoff^arity`, or `None` if it overflows `u128`.
    pub fn size(&self) -> Option<u128> {
        (0..self.arity).try_fold(1u128, |acc, _| acc.checked_mul(self.cutoff as u128))
    }

    /// Whether `size <= 2^mu`.
    pub fn fits(&self, r: Resolution) -> bool {
        self.size().is_some_and(|n| r.admits(n))
    }

    /// Every point, in graded-lexicographic order.
    pub fn points(&self) -> Vec<Vec<u64>> {
        let max_sum = self.arity as u64 * (self.cutoff - 1);
        let mut out = Vec::new();
        let mut prefix = Vec::with_capacity(self.arity);
        for s in 0..=max_sum {
            self.fill(&mut prefix, s, &mut out);
        }
        out
    }

    fn fill(&self, prefix: &mut Vec<u64>, remaining: u64, out: &mut Vec<Vec<u64>>) {
        let left = self.arity - prefix.len();
        if left == 1 {
            if remaining < self.cutoff {
                prefix.push(remaining);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let rest_max = (left as u64 - 1) * (self.cutoff - 1);
        let lo = remaining.saturating_sub(rest_max);
        let hi = remaining.min(self.cutoff - 1);
        for v in lo..=hi {
            prefix.push(v);
            self.fill(prefix, remaining - v, out);
            prefix.pop();
        }
    }
}

/// Graded-lexicographic comparison of two points.
pub fn graded_lex_cmp(a: &[u64], b: &[u64]) -> Ordering {
    let sa: u128 = a.iter().map(|&v| v as u128).sum();
    let sb: u128 = b.iter().map(|&v| v as u128).sum();
    sa.cmp(&sb).then_with(|| a.cmp(b))
}

// ---------------------------------------------------------------------------
// Observable, evolution and decision
// ---------------------------------------------------------------------------

fn ensure_arity(d: &DiophantinePolynomial, dom: &SearchDomain) -> Result<DiophantinePolynomial> {
    match d.arity().cmp(&dom.arity) {
        Ordering::Equal => Ok(d.clone()),
        Ordering::Less => d.with_arity(dom.arity),
        Ordering::Greater => Err(Error::InvalidArgument(format!(
            "polynomial arity {} exceeds domain arity {}",
            d.arity(),
            dom.arity
        ))),
    }
}

/// The diagonal observable with eigenvalue `D(x)^2` at the enumeration index
/// of each `x`.
pub fn build_observable(d: &DiophantinePolynomial, dom: &SearchDomain) -> Result<DiagonalObservable> {
    let d = ensure_arity(d, dom)?;
    let points = dom.points();
    let values: Vec<BigUint> = points.par_iter().map(|x| d.eval_sq(x)).collect();
    Ok(DiagonalObservable::new(
        values
            .into_iter()
            .enumerate()
            .map(|(k, v)| (k as BasisIndex, BigRational::from_integer(v.into())))
            .collect(),
    ))
}

/// Applies `U_D`: `|x> -> |D(x)^2, x>`, where the extended basis index is
/// `tag * |dom| + index(x)`.
///
/// Domain states are embedded as tag 0. `U_D` is realized as the involution
/// swapping `|0, x>` and `|D(x)^2, x>` for every `x` in the support, which
/// fixes all other labels.
pub fn apply_u_d(
    s: &StateVector,
    d: &DiophantinePolynomial,
    dom: &SearchDomain,
    tag_width: u32,
) -> Result<StateVector> {
    let d = ensure_arity(d, dom)?;
    let n = dom.size().ok_or_else(|| Error::InvalidArgument("domain too large".into()))?;
    if s.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: s.dimension(),
        });
    }
    if tag_width == 0 || tag_width > 127 {
        return Err(Error::InvalidArgument("tag width must be in 1..=127".into()));
    }
    let extended = (1u128 << tag_width)
        .checked_mul(n)
        .ok_or(Error::TagOverflow { width: tag_width })?;
    let points = dom.points();
    let mut swaps = Vec::new();
    for k in s.indices() {
        let idx = usize::try_from(k).map_err(|_| Error::OutsideDomain)?;
        let x = points.get(idx).ok_or(Error::OutsideDomain)?;
        let tag = d.eval_sq(x);
        if tag.bits() > tag_width as u64 {
            return Err(Error::TagOverflow { width: tag_width });
        }
        let tag = tag.to_u128().expect("fits in the tag width");
        swaps.push((k, tag * n + k));
    }
    let u = UnitarySpec::Permutation(Permutation::from_swaps(extended, &swaps)?);
    crate::statevec::apply_unitary(&s.embed(extended)?, &u)
}

/// Splits an extended index into `(tag, domain index)`.
pub fn split_tagged(index: BasisIndex, dom: &SearchDomain) -> (u128, u128) {
    let n = dom.size().expect("domain size fits");
    (index / n, index % n)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    SolutionFound(Vec<u64>),
    NoSolutionWithinHmu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub shots: u64,
    pub seed: u64,
    /// Probability that at least one root would have been observed if the
    /// domain holds at least one: `1 - (1 - 1/|dom|)^shots`.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    /// `min D(x)^2` over the examined points, as a decimal string.
    #[serde(with = "biguint_string")]
    pub ground_energy: BigUint,
    pub domain: SearchDomain,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sampling: Option<SamplingReport>,
}

mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    Deterministic,
    Sampled { shots: u64, seed: u64 },
}

/// Decides whether `D` has a root in `dom`.
///
/// Fails with `ResolutionExceeded` when `|dom| > 2^mu`. `Deterministic`
/// computes the exact ground energy of the observable and the graded-lex
/// first root. `Sampled` measures the observable on a uniform superposition
/// `shots` times and reports a root only if eigenvalue 0 was observed.
pub fn decide_solution(
    d: &DiophantinePolynomial,
    dom: &SearchDomain,
    mode: DecisionMode,
    r: Resolution,
) -> Result<Decision> {
    let d = ensure_arity(d, dom)?;
    let n = dom.size().unwrap_or(u128::MAX);
    if !dom.fits(r) {
        return Err(Error::ResolutionExceeded {
            requested: n,
            mu: r.mu(),
        });
    }
    match mode {
        DecisionMode::Deterministic => {
            let obs = build_observable(&d, dom)?;
            let (best_index, best) = obs
                .eigenvalues()
                .par_iter()
                .map(|(k, v)| (*k, v.clone()))
                .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("domain is non-empty");
            let ground = best.to_integer().to_biguint().expect("energies are non-negative");
            let outcome = if ground.is_zero() {
                Outcome::SolutionFound(dom.points().swap_remove(best_index as usize))
            } else {
                Outcome::NoSolutionWithinHmu
            };
            Ok(Decision {
                outcome,
                ground_energy: ground,
                domain: *dom,
                sampling: None,
            })
        }
        DecisionMode::Sampled { shots, seed } => {
            if shots == 0 {
                return Err(Error::InvalidArgument("shots must be positive".into()));
            }
            let state = uniform_superposition(n, Precision::Grid(r))?;
            let sampler = BornSampler::new(&state);
            let points = dom.points();
            let root = Stream::new(seed);
            let energies: Vec<(BasisIndex, BigUint)> = (0..shots)
                .into_par_iter()
                .map(|shot| {
                    let j = sampler.sample(&mut root.split(shot));
                    (j, d.eval_sq(&points[j as usize]))
                })
                .collect();
            let first_root = energies.iter().find(|(_, e)| e.is_zero());
            let ground = energies
                .iter()
                .map(|(_, e)| e)
                .min()
                .cloned()
                .expect("at least one shot");
            let outcome = match first_root {
                Some((j, _)) => Outcome::SolutionFound(points[*j as usize].clone()),
                None => Outcome::NoSolutionWithinHmu,
            };
            let miss = (1.0 - 1.0 / n as f64).powf(shots as f64);
            Ok(Decision {
                outcome,
                ground_energy: ground,
                domain: *dom,
                sampling: Some(SamplingReport {
                    shots,
                    seed,
                    confidence: 1.0 - miss,
                }),
            })
        }
    }
}

/// Plain exhaustive search over `{0..cutoff-1}^arity` with nested loops,
/// keeping the graded-lex smallest root. Reference semantics for
/// [`decide_solution`].
pub fn classical_oracle(d: &DiophantinePolynomial, cutoff: u64) -> Result<Decision> {
    let dom = SearchDomain::new(d.arity(), cutoff)?;
    let mut x = vec![0u64; d.arity()];
    let mut best: Option<(BigUint, Vec<u64>)> = None;
    loop {
        let e = d.eval_sq(&x);
        let better = match &best {
            None => true,
            Some((be, bx)) => match e.cmp(be) {
                Ordering::Less => true,
                Ordering::Equal => graded_lex_cmp(&x, bx) == Ordering::Less,
                Ordering::Greater => false,
            },
        };
        if better {
            best = Some((e, x.clone()));
        }
        // odometer, last coordinate fastest
        let mut pos = x.len();
        loop {
            if pos == 0 {
                let (ground, point) = best.expect("at least one point");
                let outcome = if ground.is_zero() {
                    Outcome::SolutionFound(point)
                } else {
                    Outcome::NoSolutionWithinHmu
                };
                return Ok(Decision {
                    outcome,
                    ground_energy: ground,
                    domain: dom,
                    sampling: None,
                });
            }
            pos -= 1;
            x[pos] += 1;
            if x[pos] < cutoff {
                break;
            }
            x[pos] = 0;
        }
    }
}

/// A random polynomial with `1..=max_arity` variables, total degree at most
/// `max_degree` and nonzero coefficients in `[-coeff_bound, coeff_bound]`.
/// With `plant_root`, the constant term is adjusted (when it stays within the
/// bound) so that a random point of `{0..cutoff-1}^n` is a root.
pub fn random_polynomial(
    stream: &mut Stream,
    max_arity: usize,
    max_degree: u32,
    coeff_bound: i64,
    cutoff: u64,
    plant_root: bool,
) -> DiophantinePolynomial {
    let arity = 1 + stream.below_u64(max_arity as u64) as usize;
    loop {
        let n_terms = 1 + stream.below_u64(4);
        let mut terms = Vec::new();
        for _ in 0..n_terms {
            let mut exps = vec![0u32; arity];
            let mut budget = stream.below_u64(max_degree as u64 + 1) as u32;
            while budget > 0 {
                exps[stream.below_u64(arity as u64) as usize] += 1;
                budget -= 1;
            }
            let mut c = 0;
            while c == 0 {
                c = stream.range_i64(-coeff_bound, coeff_bound);
            }
            terms.push((BigInt::from(c), exps));
        }
        let Ok(p) = DiophantinePolynomial::new(arity, terms.clone()) else {
            continue;
        };
        if !plant_root {
            return p;
        }
        let point: Vec<u64> = (0..arity).map(|_| stream.below_u64(cutoff)).collect();
        let shift = p.eval(&point);
        let mut planted = terms;
        planted.push((-shift, vec![0; arity]));
        if let Ok(q) = DiophantinePolynomial::new(arity, planted) {
            if q.terms.iter().all(|t| t.coefficient.abs() <= BigInt::from(coeff_bound)) {
                return q;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::ExactComplex;
    use crate::statevec::measure_observable;

    fn poly(s: &str) -> DiophantinePolynomial {
        DiophantinePolynomial::parse(s).unwrap()
    }

    fn res(mu: u32) -> Resolution {
        Resolution::new(mu).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(poly("x0^2 + x1^2 - 25").eval(&[3, 4]), BigInt::from(0));
        assert_eq!(poly("x0^2 + 1").eval(&[0]), BigInt::from(1));
        assert_eq!(poly("2*x0 - 7").eval(&[3]), BigInt::from(-1));
    }

    #[test]
    fn eval_falls_back_to_big_integers() {
        let p = poly("x0^5 - 1");
        let x = 1u64 << 40;
        let expected = num_traits::pow(BigInt::from(x), 5) - 1;
        assert_eq!(p.eval(&[x]), expected);
    }

    #[test]
    fn parse_and_display() {
        let p = poly("x0^2 + x1^2 - 25");
        assert_eq!(p.arity(), 2);
        assert_eq!(p.to_string(), "x0^2 + x1^2 - 25");
        assert_eq!(poly("-3*x1*x0 + 2*x0*x0 - x2").to_string(), "2*x0^2 - 3*x0*x1 - x2");
        assert_eq!(poly("1").arity(), 1);
        assert_eq!(poly("x0 - x0 + 1"), DiophantinePolynomial::constant(1).unwrap());
        for bad in ["", "x0 +", "x", "x0^", "2 ** x0", "x0 x1", "x0 - x0", "y + 1"] {
            assert!(DiophantinePolynomial::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let p = poly("123456789012345678901234567890*x0^3 - 2*x1 + 7");
        let v = p.to_json();
        assert_eq!(DiophantinePolynomial::from_json(&v).unwrap(), p);
        assert!(DiophantinePolynomial::from_json(&json!({"arity": 1, "terms": []})).is_err());
        assert!(DiophantinePolynomial::from_json(&json!({"arity": 2, "terms": [[1, [1]]]})).is_err());
    }

    #[test]
    fn graded_lex_enumeration() {
        let dom = SearchDomain::new(2, 3).unwrap();
        let pts = dom.points();
        assert_eq!(
            pts,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![1, 0],
                vec![0, 2],
                vec![1, 1],
                vec![2, 0],
                vec![1, 2],
                vec![2, 1],
                vec![2, 2]
            ]
        );
        let dom = SearchDomain::new(3, 4).unwrap();
        let pts = dom.points();
        assert_eq!(pts.len(), 64);
        assert!(pts.windows(2).all(|w| graded_lex_cmp(&w[0], &w[1]) == Ordering::Less));
    }

    #[test]
    fn observable_examples() {
        let dom = SearchDomain::new(1, 4).unwrap();
        let obs = build_observable(&poly("x0"), &dom).unwrap();
        let ev: Vec<_> = obs.eigenvalues().values().map(|v| v.to_integer()).collect();
        assert_eq!(ev, [0, 1, 4, 9].map(BigInt::from));
        let obs = build_observable(&poly("x0^2 + 1"), &SearchDomain::new(1, 50).unwrap()).unwrap();
        assert!(obs.eigenvalues().values().all(|v| *v >= BigRational::one()));
    }

    #[test]
    fn u_d_examples() {
        let dom = SearchDomain::new(1, 4).unwrap();
        let s = StateVector::basis(4, 3, Precision::Grid(res(16))).unwrap();
        let out = apply_u_d(&s, &poly("x0 - 3"), &dom, 8).unwrap();
        assert_eq!(out.indices(), vec![3]);
        assert_eq!(split_tagged(3, &dom), (0, 3));

        let s = uniform_superposition(4, Precision::Grid(res(16))).unwrap();
        let out = apply_u_d(&s, &poly("x0"), &dom, 8).unwrap();
        let tagged: Vec<_> = out.indices().iter().map(|&k| split_tagged(k, &dom)).collect();
        assert_eq!(tagged, vec![(0, 0), (1, 1), (4, 2), (9, 3)]);
        for k in out.indices() {
            assert_eq!(out.amplitude(k), ExactComplex::real(BigRational::new(1.into(), 2.into())));
        }
    }

    #[test]
    fn u_d_tag_overflow() {
        let dom = SearchDomain::new(1, 4).unwrap();
        let s = StateVector::basis(4, 3, Precision::Grid(res(16))).unwrap();
        assert_eq!(
            apply_u_d(&s, &poly("x0 + 20"), &dom, 8),
            Err(Error::TagOverflow { width: 8 })
        );
        assert!(apply_u_d(&s, &poly("x0 + 12"), &dom, 8).is_ok());
    }

    #[test]
    fn decision_examples() {
        let p = poly("x0^2 + x1^2 - 25");
        let dom = SearchDomain::new(2, 10).unwrap();
        let d = decide_solution(&p, &dom, DecisionMode::Deterministic, res(8)).unwrap();
        assert_eq!(d.outcome, Outcome::SolutionFound(vec![0, 5]));
        assert!(d.ground_energy.is_zero());

        let p = poly("x0^2 + 1");
        let dom = SearchDomain::new(1, 100).unwrap();
        let d = decide_solution(&p, &dom, DecisionMode::Deterministic, res(8)).unwrap();
        assert_eq!(d.outcome, Outcome::NoSolutionWithinHmu);
        assert_eq!(d.ground_energy, BigUint::from(1u32));
    }

    #[test]
    fn decision_beyond_resolution() {
        let p = poly("x0 - 70000");
        let dom = SearchDomain::new(1, 1 << 16).unwrap();
        let d = decide_solution(&p, &dom, DecisionMode::Deterministic, res(16)).unwrap();
        assert_eq!(d.outcome, Outcome::NoSolutionWithinHmu);
        let bigger = SearchDomain::new(1, 1 << 17).unwrap();
        assert!(matches!(
            decide_solution(&p, &bigger, DecisionMode::Deterministic, res(16)),
            Err(Error::ResolutionExceeded { .. })
        ));
        let oracle = classical_oracle(&p, 1 << 17).unwrap();
        assert_eq!(oracle.outcome, Outcome::SolutionFound(vec![70000]));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(
            classical_oracle(&poly("x0^2 + x1^2 - 25"), 10).unwrap().outcome,
            Outcome::SolutionFound(vec![0, 5])
        );
        for cutoff in [1, 7, 100] {
            assert_eq!(
                classical_oracle(&poly("1"), cutoff).unwrap().outcome,
                Outcome::NoSolutionWithinHmu
            );
        }
        // (x+1)^2 - y^2 expanded
        let p = poly("x0^2 + 2*x0 + 1 - x1^2");
        assert_eq!(classical_oracle(&p, 5).unwrap().outcome, Outcome::SolutionFound(vec![0, 1]));
    }

    #[test]
    fn sampled_mode_finds_roots_and_never_lies() {
        let p = poly("x0^2 + x1^2 - 25");
        let dom = SearchDomain::new(2, 10).unwrap();
        let d = decide_solution(&p, &dom, DecisionMode::Sampled { shots: 400, seed: 5 }, res(8)).unwrap();
        match d.outcome {
            Outcome::SolutionFound(x) => assert!(p.eval(&x).is_zero()),
            Outcome::NoSolutionWithinHmu => panic!("400 shots over 4/100 roots should hit"),
        }
        assert!(d.sampling.unwrap().confidence > 0.98);
        let none = decide_solution(&poly("x0^2 + 1"), &SearchDomain::new(1, 64).unwrap(), DecisionMode::Sampled { shots: 200, seed: 1 }, res(8)).unwrap();
        assert_eq!(none.outcome, Outcome::NoSolutionWithinHmu);
        assert!(!none.ground_energy.is_zero());
    }

    #[test]
    fn measuring_the_observable_reports_zero_only_on_roots() {
        let p = poly("x0^2 + x1^2 - 25");
        let dom = SearchDomain::new(2, 10).unwrap();
        let obs = build_observable(&p, &dom).unwrap();
        let s = uniform_superposition(100, Precision::Grid(res(8))).unwrap();
        let pts = dom.points();
        for seed in 0..500 {
            let (v, post) = measure_observable(&s, &obs, seed).unwrap();
            let x = &pts[post.indices()[0] as usize];
            assert_eq!(v.is_zero(), p.eval(x).is_zero());
        }
    }
}
