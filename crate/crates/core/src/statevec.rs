//! Sparse state vectors on the μ-grid.
//!
//! A [`StateVector`] is either grid-valued (every stored amplitude is a
//! [`FixedComplex`] at one [`Resolution`]) or exact (rational amplitudes, norm
//! exactly one). Evolution always goes through an exact intermediate
//! ([`ExactState`]): the unitary is applied in exact arithmetic, then
//! [`resolution_pass`] zeroes amplitudes below `2^(-mu/2)`, renormalizes the
//! survivors and quantizes them. That commit point is the only place rounding
//! happens.
//!
//! Basis indices are `u128`; qubit site `k` is bit `k` of the index.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{pow2, quantize_normalized, round_div_sqrt, ExactComplex, FixedComplex, Resolution};
use crate::rng::Stream;

pub type BasisIndex = u128;

/// Largest matrix accepted by [`DenseUnitary`].
pub const MAX_DENSE_DIM: usize = 64;

const PARALLEL_CUTOFF: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// Unquantized oracle mode: no truncation, no rounding.
    Exact,
    Grid(Resolution),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Amplitudes {
    Grid(BTreeMap<BasisIndex, FixedComplex>),
    Exact(BTreeMap<BasisIndex, ExactComplex>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVector {
    dimension: u128,
    amplitudes: Amplitudes,
    resolution: Option<Resolution>,
}

/// An exact, not necessarily normalized, intermediate state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactState {
    dimension: u128,
    amplitudes: BTreeMap<BasisIndex, ExactComplex>,
}

impl ExactState {
    /// Builds an intermediate state, dropping exact zeros.
    pub fn new(dimension: u128, amplitudes: BTreeMap<BasisIndex, ExactComplex>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if let Some((&idx, _)) = amplitudes.iter().next_back() {
            if idx >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: idx + 1,
                });
            }
        }
        let amplitudes = amplitudes.into_iter().filter(|(_, a)| !a.is_zero()).collect();
        Ok(Self {
            dimension,
            amplitudes,
        })
    }

    pub fn dimension(&self) -> u128 {
        self.dimension
    }

    pub fn support(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &BTreeMap<BasisIndex, ExactComplex> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: BasisIndex) -> ExactComplex {
        self.amplitudes.get(&index).cloned().unwrap_or_else(ExactComplex::zero)
    }

    pub fn norm_sq(&self) -> BigRational {
        self.amplitudes
            .values()
            .fold(BigRational::zero(), |acc, a| acc + a.magnitude_sq())
    }
}

impl StateVector {
    /// The basis state `|index>`.
    pub fn basis(dimension: u128, index: BasisIndex, precision: Precision) -> Result<Self> {
        if index >= dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                actual: index + 1,
            });
        }
        let amplitudes = match precision {
            Precision::Exact => Amplitudes::Exact(BTreeMap::from([(index, ExactComplex::one())])),
            Precision::Grid(r) => Amplitudes::Grid(BTreeMap::from([(
                index,
                FixedComplex::from_units(r.units_per_one(), 0, r)?,
            )])),
        };
        Ok(Self {
            dimension,
            amplitudes,
            resolution: resolution_of(precision),
        })
    }

    /// An exact-mode state; the norm must be exactly one.
    pub fn exact(dimension: u128, amplitudes: BTreeMap<BasisIndex, ExactComplex>) -> Result<Self> {
        let s = ExactState::new(dimension, amplitudes)?;
        if !s.norm_sq().is_one() {
            return Err(Error::NotRepresentable(format!(
                "exact state has norm^2 {}",
                s.norm_sq()
            )));
        }
        Ok(Self {
            dimension,
            amplitudes: Amplitudes::Exact(s.amplitudes),
            resolution: None,
        })
    }

    /// A grid-valued state from already-quantized amplitudes (zeros dropped).
    pub fn from_grid(
        dimension: u128,
        resolution: Resolution,
        amplitudes: BTreeMap<BasisIndex, FixedComplex>,
    ) -> Result<Self> {
        if let Some((&idx, _)) = amplitudes.iter().next_back() {
            if idx >= dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: idx + 1,
                });
            }
        }
        if amplitudes.values().any(|a| a.resolution() != resolution) {
            return Err(Error::InvalidArgument("mixed resolutions".into()));
        }
        let amplitudes: BTreeMap<_, _> =
            amplitudes.into_iter().filter(|(_, a)| !a.is_zero()).collect();
        if amplitudes.is_empty() {
            return Err(Error::TotalExtinction);
        }
        Ok(Self {
            dimension,
            amplitudes: Amplitudes::Grid(amplitudes),
            resolution: Some(resolution),
        })
    }

    pub fn dimension(&self) -> u128 {
        self.dimension
    }

    pub fn support(&self) -> usize {
        match &self.amplitudes {
            Amplitudes::Grid(m) => m.len(),
            Amplitudes::Exact(m) => m.len(),
        }
    }

    pub fn precision(&self) -> Precision {
        match self.resolution {
            Some(r) => Precision::Grid(r),
            None => Precision::Exact,
        }
    }

    pub fn resolution(&self) -> Option<Resolution> {
        self.resolution
    }

    pub fn indices(&self) -> Vec<BasisIndex> {
        match &self.amplitudes {
            Amplitudes::Grid(m) => m.keys().copied().collect(),
            Amplitudes::Exact(m) => m.keys().copied().collect(),
        }
    }

    /// The stored amplitude at `index` as an exact value.
    pub fn amplitude(&self, index: BasisIndex) -> ExactComplex {
        match &self.amplitudes {
            Amplitudes::Grid(m) => m.get(&index).map(FixedComplex::value),
            Amplitudes::Exact(m) => m.get(&index).cloned(),
        }
        .unwrap_or_else(ExactComplex::zero)
    }

    /// The stored grid amplitudes, or `None` in exact mode.
    pub fn grid_amplitudes(&self) -> Option<&BTreeMap<BasisIndex, FixedComplex>> {
        match &self.amplitudes {
            Amplitudes::Grid(m) => Some(m),
            Amplitudes::Exact(_) => None,
        }
    }

    /// All stored amplitudes as exact values.
    pub fn exact_amplitudes(&self) -> BTreeMap<BasisIndex, ExactComplex> {
        match &self.amplitudes {
            Amplitudes::Grid(m) => m.iter().map(|(k, v)| (*k, v.value())).collect(),
            Amplitudes::Exact(m) => m.clone(),
        }
    }

    pub fn to_exact_state(&self) -> ExactState {
        ExactState {
            dimension: self.dimension,
            amplitudes: self.exact_amplitudes(),
        }
    }

    pub fn norm_sq(&self) -> BigRational {
        match &self.amplitudes {
            Amplitudes::Grid(m) => {
                let r = self.resolution.expect("grid state has a resolution");
                let units: BigUint = m.values().map(FixedComplex::magnitude_sq_units).sum();
                BigRational::from_integer(BigInt::from(units)) * pow2(-(r.mu() as i64))
            }
            Amplitudes::Exact(m) => m
                .values()
                .fold(BigRational::zero(), |acc, a| acc + a.magnitude_sq()),
        }
    }

    /// `4 * support * 2^(-mu/2)`, the allowed `|norm^2 - 1|` after a commit;
    /// zero in exact mode.
    pub fn norm_tolerance(&self) -> BigRational {
        match self.resolution {
            Some(r) => BigRational::from_integer((4 * self.support()).into()) * r.delta(),
            None => BigRational::zero(),
        }
    }

    /// Born probabilities `|a_j|^2 / norm^2` as floats, ascending by index.
    pub fn probabilities(&self) -> Vec<(BasisIndex, f64)> {
        let n = self.norm_sq();
        self.exact_amplitudes()
            .into_iter()
            .map(|(k, a)| (k, (a.magnitude_sq() / &n).to_f64().unwrap_or(f64::NAN)))
            .collect()
    }

    /// Embeds the state into a space twice as large; the new top qubit (or
    /// the new top "digit" for non-power-of-two dimensions) starts in `|0>`.
    pub fn with_fresh_qubit(&self) -> Result<Self> {
        let dimension = self
            .dimension
            .checked_mul(2)
            .ok_or_else(|| Error::InvalidArgument("dimension overflow".into()))?;
        Ok(Self {
            dimension,
            ..self.clone()
        })
    }

    /// Embeds the state into a larger space without moving any index.
    pub fn embed(&self, dimension: u128) -> Result<Self> {
        if dimension < self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: dimension,
            });
        }
        Ok(Self {
            dimension,
            ..self.clone()
        })
    }

    /// `U |s>` in exact arithmetic, before any truncation or rounding.
    pub fn image(&self, u: &UnitarySpec) -> Result<ExactState> {
        u.check_dimension(self.dimension)?;
        let input = self.exact_amplitudes();
        let out = u.apply_sparse(&input);
        ExactState::new(self.dimension, out)
    }

    /// Commits an exact intermediate at this state's precision.
    pub fn commit(&self, image: &ExactState) -> Result<(StateVector, BigRational)> {
        match self.resolution {
            Some(r) => resolution_pass(image, r),
            None => Ok((
                StateVector {
                    dimension: image.dimension,
                    amplitudes: Amplitudes::Exact(image.amplitudes.clone()),
                    resolution: None,
                },
                BigRational::zero(),
            )),
        }
    }
}

fn resolution_of(p: Precision) -> Option<Resolution> {
    match p {
        Precision::Exact => None,
        Precision::Grid(r) => Some(r),
    }
}

/// Uniform superposition over indices `0..n_states`.
///
/// On the grid every amplitude is the quantized value of `1/sqrt(n_states)`;
/// this fails with `ResolutionExceeded` when `n_states > 2^mu`, because the
/// amplitude would fall below the truncation threshold. In exact mode the
/// amplitude must be rational, so `n_states` must be a perfect square.
pub fn uniform_superposition(n_states: u128, precision: Precision) -> Result<StateVector> {
    if n_states == 0 {
        return Err(Error::InvalidArgument("n_states must be positive".into()));
    }
    match precision {
        Precision::Grid(r) => {
            if !r.admits(n_states) {
                return Err(Error::ResolutionExceeded {
                    requested: n_states,
                    mu: r.mu(),
                });
            }
            let n = BigRational::from_integer(BigInt::from(n_states));
            let units = round_div_sqrt(&BigRational::from_integer(r.units_per_one().into()), &n)
                .to_i128()
                .ok_or(Error::RangeExceeded)?;
            let amp = FixedComplex::from_units(units, 0, r)?;
            let amplitudes: BTreeMap<_, _> = (0..n_states).map(|j| (j, amp)).collect();
            Ok(StateVector {
                dimension: n_states,
                amplitudes: Amplitudes::Grid(amplitudes),
                resolution: Some(r),
            })
        }
        Precision::Exact => {
            let root = num_integer::Roots::sqrt(&n_states);
            if root * root != n_states {
                return Err(Error::NotRepresentable(format!(
                    "1/sqrt({n_states}) is irrational"
                )));
            }
            let amp = ExactComplex::real(BigRational::new(BigInt::one(), BigInt::from(root)));
            let amplitudes = (0..n_states).map(|j| (j, amp.clone())).collect();
            StateVector::exact(n_states, amplitudes)
        }
    }
}

/// Zeroes every amplitude whose normalized magnitude is below `2^(-mu/2)`,
/// renormalizes the survivors and commits them to the grid.
///
/// Returns the committed state and the fraction of the total weight that was
/// zeroed. The comparison is against the normalized amplitude
/// `|a_j| / sqrt(norm^2)`, which for a unit-norm input is `|a_j|` itself.
pub fn resolution_pass(state: &ExactState, r: Resolution) -> Result<(StateVector, BigRational)> {
    let norm = state.norm_sq();
    if !norm.is_positive() {
        return Err(Error::TotalExtinction);
    }
    // |a|^2 / norm >= 2^-mu  <=>  |a|^2 * 2^mu >= norm
    let scale = pow2(r.mu() as i64);
    let keep = |a: &ExactComplex| a.magnitude_sq() * &scale >= norm;

    let entries: Vec<(&BasisIndex, &ExactComplex)> = state.amplitudes.iter().collect();
    let survivors: Vec<(BasisIndex, &ExactComplex)> = if entries.len() >= PARALLEL_CUTOFF {
        entries
            .par_iter()
            .filter(|(_, a)| keep(a))
            .map(|(k, a)| (**k, *a))
            .collect()
    } else {
        entries.iter().filter(|(_, a)| keep(a)).map(|(k, a)| (**k, *a)).collect()
    };
    if survivors.is_empty() {
        return Err(Error::TotalExtinction);
    }
    let kept_norm = survivors
        .iter()
        .fold(BigRational::zero(), |acc, (_, a)| acc + a.magnitude_sq());
    let lost = (&norm - &kept_norm) / &norm;

    let quantize = |(k, a): &(BasisIndex, &ExactComplex)| -> Result<(BasisIndex, FixedComplex)> {
        Ok((*k, quantize_normalized(a, &kept_norm, r)?))
    };
    let committed: Vec<(BasisIndex, FixedComplex)> = if survivors.len() >= PARALLEL_CUTOFF {
        survivors.par_iter().map(quantize).collect::<Result<_>>()?
    } else {
        survivors.iter().map(quantize).collect::<Result<_>>()?
    };
    let amplitudes: BTreeMap<_, _> = committed.into_iter().collect();
    Ok((
        StateVector {
            dimension: state.dimension,
            amplitudes: Amplitudes::Grid(amplitudes),
            resolution: Some(r),
        },
        lost,
    ))
}

/// `U |s>`, committed at the state's precision.
pub fn apply_unitary(s: &StateVector, u: &UnitarySpec) -> Result<StateVector> {
    apply_unitary_with_loss(s, u).map(|(s, _)| s)
}

/// Like [`apply_unitary`], also returning the weight zeroed by truncation.
pub fn apply_unitary_with_loss(
    s: &StateVector,
    u: &UnitarySpec,
) -> Result<(StateVector, BigRational)> {
    let image = s.image(u)?;
    s.commit(&image)
}

/// Applies a list of unitaries in order, committing after each.
pub fn apply_circuit(s: &StateVector, circuit: &[UnitarySpec]) -> Result<StateVector> {
    circuit.iter().try_fold(s.clone(), |acc, u| apply_unitary(&acc, u))
}

// ---------------------------------------------------------------------------
// Unitaries
// ---------------------------------------------------------------------------

/// A 2x2 gate on one qubit site, optionally conditioned on control sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleTargetGate {
    matrix: [ExactComplex; 4],
    target: u32,
    controls: Vec<u32>,
}

/// A bijection on basis indices, stored as the set of moved indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    dimension: u128,
    moved: BTreeMap<BasisIndex, BasisIndex>,
}

/// A dense `d x d` unitary acting on the whole space, `d <= 64`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseUnitary {
    dim: usize,
    entries: Vec<ExactComplex>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnitarySpec {
    /// Unit-modulus phases, one per basis index.
    Diagonal(Vec<ExactComplex>),
    SingleTarget(SingleTargetGate),
    Permutation(Permutation),
    Dense(DenseUnitary),
}

/// How strictly `U^dagger U = I` is checked at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitarityCheck {
    Exact,
    /// Every entry of `U^dagger U - I` within `2^(-bits)` per component.
    WithinBits(u32),
}

fn check_gram(entries: &[ExactComplex], dim: usize, check: UnitarityCheck) -> Result<()> {
    let tol = match check {
        UnitarityCheck::Exact => BigRational::zero(),
        UnitarityCheck::WithinBits(b) => pow2(-(b as i64)),
    };
    for a in 0..dim {
        for b in 0..dim {
            let mut acc = ExactComplex::zero();
            for k in 0..dim {
                acc = acc + &entries[k * dim + a].conj() * &entries[k * dim + b];
            }
            if a == b {
                acc = &acc - &ExactComplex::one();
            }
            if acc.re.abs() > tol || acc.im.abs() > tol {
                return Err(Error::NotUnitary(format!(
                    "(U^dagger U - I)[{a}][{b}] = {acc}"
                )));
            }
        }
    }
    Ok(())
}

impl SingleTargetGate {
    /// `matrix` is row-major `[m00, m01, m10, m11]`; must be exactly unitary.
    pub fn new(matrix: [ExactComplex; 4], target: u32, controls: Vec<u32>) -> Result<Self> {
        Self::checked(matrix, target, controls, UnitarityCheck::Exact)
    }

    pub fn checked(
        matrix: [ExactComplex; 4],
        target: u32,
        controls: Vec<u32>,
        check: UnitarityCheck,
    ) -> Result<Self> {
        if controls.contains(&target) {
            return Err(Error::InvalidArgument("target is also a control".into()));
        }
        if target >= 127 || controls.iter().any(|&c| c >= 127) {
            return Err(Error::InvalidArgument("qubit site out of range".into()));
        }
        check_gram(&matrix, 2, check)?;
        Ok(Self {
            matrix,
            target,
            controls,
        })
    }

    pub fn matrix(&self) -> &[ExactComplex; 4] {
        &self.matrix
    }

    pub fn target(&self) -> u32 {
        self.target
    }

    pub fn controls(&self) -> &[u32] {
        &self.controls
    }

    fn highest_site(&self) -> u32 {
        self.controls.iter().copied().chain([self.target]).max().unwrap_or(0)
    }
}

impl Permutation {
    /// From a full table `table[j] = image of j`.
    pub fn from_table(table: &[BasisIndex]) -> Result<Self> {
        let dimension = table.len() as u128;
        let moved = table
            .iter()
            .enumerate()
            .filter(|(j, &t)| *j as u128 != t)
            .map(|(j, &t)| (j as u128, t))
            .collect();
        Self::from_moved(dimension, moved)
    }

    /// From the moved entries only; every other index is fixed.
    pub fn from_moved(dimension: u128, moved: BTreeMap<BasisIndex, BasisIndex>) -> Result<Self> {
        let mut images: Vec<BasisIndex> = moved.values().copied().collect();
        images.sort_unstable();
        let sources: Vec<BasisIndex> = moved.keys().copied().collect();
        if images != sources {
            return Err(Error::InvalidPermutation(
                "moved indices do not map onto themselves".into(),
            ));
        }
        if sources.last().is_some_and(|&m| m >= dimension) {
            return Err(Error::InvalidPermutation("index outside dimension".into()));
        }
        let moved = moved.into_iter().filter(|(k, v)| k != v).collect();
        Ok(Self { dimension, moved })
    }

    /// A product of disjoint transpositions.
    pub fn from_swaps(dimension: u128, swaps: &[(BasisIndex, BasisIndex)]) -> Result<Self> {
        let mut moved = BTreeMap::new();
        for &(a, b) in swaps {
            if a == b {
                continue;
            }
            if moved.insert(a, b).is_some() || moved.insert(b, a).is_some() {
                return Err(Error::InvalidPermutation("swaps are not disjoint".into()));
            }
        }
        Self::from_moved(dimension, moved)
    }

    pub fn identity(dimension: u128) -> Self {
        Self {
            dimension,
            moved: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> u128 {
        self.dimension
    }

    pub fn map(&self, j: BasisIndex) -> BasisIndex {
        self.moved.get(&j).copied().unwrap_or(j)
    }
}

impl DenseUnitary {
    /// Row-major `dim x dim` entries; must be exactly unitary.
    pub fn new(dim: usize, entries: Vec<ExactComplex>) -> Result<Self> {
        Self::checked(dim, entries, UnitarityCheck::Exact)
    }

    pub fn checked(dim: usize, entries: Vec<ExactComplex>, check: UnitarityCheck) -> Result<Self> {
        if dim == 0 || dim > MAX_DENSE_DIM {
            return Err(Error::InvalidArgument(format!(
                "dense dimension {dim} outside 1..={MAX_DENSE_DIM}"
            )));
        }
        if entries.len() != dim * dim {
            return Err(Error::InvalidArgument("entry count is not dim^2".into()));
        }
        check_gram(&entries, dim, check)?;
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> &ExactComplex {
        &self.entries[row * self.dim + col]
    }
}

impl UnitarySpec {
    pub fn diagonal(phases: Vec<ExactComplex>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidArgument("empty diagonal".into()));
        }
        if let Some(p) = phases.iter().find(|p| !p.magnitude_sq().is_one()) {
            return Err(Error::NotUnitary(format!("phase {p} is not unit modulus")));
        }
        Ok(Self::Diagonal(phases))
    }

    pub fn identity(dimension: u128) -> Self {
        Self::Permutation(Permutation::identity(dimension))
    }

    /// Verifies this unitary can act on a space of `dimension`.
    pub fn check_dimension(&self, dimension: u128) -> Result<()> {
        let expected = match self {
            Self::Diagonal(p) => p.len() as u128,
            Self::Permutation(p) => p.dimension,
            Self::Dense(d) => d.dim as u128,
            Self::SingleTarget(g) => {
                let needed = 1u128 << (g.highest_site() + 1);
                if dimension.is_power_of_two() && dimension >= needed {
                    return Ok(());
                }
                return Err(Error::DimensionMismatch {
                    expected: needed.max(dimension.next_power_of_two()),
                    actual: dimension,
                });
            }
        };
        if expected != dimension {
            return Err(Error::DimensionMismatch {
                expected,
                actual: dimension,
            });
        }
        Ok(())
    }

    fn apply_sparse(
        &self,
        input: &BTreeMap<BasisIndex, ExactComplex>,
    ) -> BTreeMap<BasisIndex, ExactComplex> {
        let mut out: BTreeMap<BasisIndex, ExactComplex> = BTreeMap::new();
        match self {
            Self::Diagonal(phases) => {
                for (&j, a) in input {
                    out.insert(j, &phases[j as usize] * a);
                }
            }
            Self::Permutation(p) => {
                for (&j, a) in input {
                    out.insert(p.map(j), a.clone());
                }
            }
            Self::SingleTarget(g) => {
                let bit = 1u128 << g.target;
                for (&j, a) in input {
                    if !g.controls.iter().all(|&c| j & (1u128 << c) != 0) {
                        let e = out.entry(j).or_insert_with(ExactComplex::zero);
                        *e = &*e + a;
                        continue;
                    }
                    let col = usize::from(j & bit != 0);
                    for row in 0..2 {
                        let m = &g.matrix[row * 2 + col];
                        if m.is_zero() {
                            continue;
                        }
                        let target = if row == 0 { j & !bit } else { j | bit };
                        let e = out.entry(target).or_insert_with(ExactComplex::zero);
                        *e = &*e + &(m * a);
                    }
                }
            }
            Self::Dense(d) => {
                for row in 0..d.dim {
                    let mut acc = ExactComplex::zero();
                    for (&j, a) in input {
                        acc = acc + d.entry(row, j as usize) * a;
                    }
                    out.insert(row as u128, acc);
                }
            }
        }
        out.retain(|_, a| !a.is_zero());
        out
    }
}

// ---------------------------------------------------------------------------
// Born sampling and observables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Cumulative {
    Small(Vec<u128>),
    Big(Vec<BigUint>),
}

/// Precomputed exact Born distribution of one state.
///
/// Weights are the exact squared magnitudes scaled to integers (unit counts
/// on the grid, a common denominator in exact mode), so sampling is an exact
/// integer draw and replays bit-identically on any platform.
#[derive(Debug, Clone)]
pub struct BornSampler {
    indices: Vec<BasisIndex>,
    cumulative: Cumulative,
}

impl BornSampler {
    pub fn new(s: &StateVector) -> Self {
        let (indices, weights): (Vec<BasisIndex>, Vec<BigUint>) = match &s.amplitudes {
            Amplitudes::Grid(m) => m.iter().map(|(k, a)| (*k, a.magnitude_sq_units())).unzip(),
            Amplitudes::Exact(m) => exact_weights(m.iter()),
        };
        Self::from_weights(indices, weights)
    }

    pub fn from_exact(s: &ExactState) -> Self {
        let (indices, weights) = exact_weights(s.amplitudes.iter());
        Self::from_weights(indices, weights)
    }

    fn from_weights(indices: Vec<BasisIndex>, weights: Vec<BigUint>) -> Self {
        let mut acc = BigUint::zero();
        let cumulative: Vec<BigUint> = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc.clone()
            })
            .collect();
        let cumulative = if acc.bits() <= 127 {
            Cumulative::Small(cumulative.iter().map(|c| c.to_u128().unwrap()).collect())
        } else {
            Cumulative::Big(cumulative)
        };
        Self {
            indices,
            cumulative,
        }
    }

    pub fn sample(&self, stream: &mut Stream) -> BasisIndex {
        let pos = match &self.cumulative {
            Cumulative::Small(c) => {
                let u = stream.below_u128(*c.last().expect("non-empty state"));
                c.partition_point(|&x| x <= u)
            }
            Cumulative::Big(c) => {
                let u = stream.below_big(c.last().expect("non-empty state"));
                c.partition_point(|x| *x <= u)
            }
        };
        self.indices[pos]
    }

    pub fn outcomes(&self) -> &[BasisIndex] {
        &self.indices
    }
}

fn exact_weights<'a>(
    amps: impl Iterator<Item = (&'a BasisIndex, &'a ExactComplex)>,
) -> (Vec<BasisIndex>, Vec<BigUint>) {
    let (indices, mags): (Vec<BasisIndex>, Vec<BigRational>) =
        amps.map(|(k, a)| (*k, a.magnitude_sq())).unzip();
    let lcm = mags
        .iter()
        .fold(BigInt::one(), |acc, m| acc.lcm(m.denom()));
    let weights = mags
        .iter()
        .map(|m| {
            (m.numer() * (&lcm / m.denom()))
                .to_biguint()
                .expect("squared magnitudes are non-negative")
        })
        .collect();
    (indices, weights)
}

/// Samples a basis index with probability `|a_j|^2 / norm^2`, using the
/// stream `Stream::new(seed)`.
pub fn born_sample(s: &StateVector, seed: u64) -> BasisIndex {
    BornSampler::new(s).sample(&mut Stream::new(seed))
}

/// A diagonal observable given by its eigenvalue at each basis index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalObservable {
    eigenvalues: BTreeMap<BasisIndex, BigRational>,
}

impl DiagonalObservable {
    pub fn new(eigenvalues: BTreeMap<BasisIndex, BigRational>) -> Self {
        Self { eigenvalues }
    }

    /// Eigenvalues `f(j)` on every index `0..dimension`.
    pub fn from_fn(dimension: u128, f: impl Fn(BasisIndex) -> BigRational) -> Self {
        Self::new((0..dimension).map(|j| (j, f(j))).collect())
    }

    pub fn eigenvalue(&self, j: BasisIndex) -> Option<&BigRational> {
        self.eigenvalues.get(&j)
    }

    pub fn eigenvalues(&self) -> &BTreeMap<BasisIndex, BigRational> {
        &self.eigenvalues
    }
}

/// Born-samples an index, returning its eigenvalue and the collapsed state.
pub fn measure_observable(
    s: &StateVector,
    o: &DiagonalObservable,
    seed: u64,
) -> Result<(BigRational, StateVector)> {
    let j = born_sample(s, seed);
    let value = o
        .eigenvalue(j)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("observable undefined at index {j}")))?;
    Ok((value, StateVector::basis(s.dimension, j, s.precision())?))
}

// ---------------------------------------------------------------------------
// State dump
// ---------------------------------------------------------------------------

/// JSON state dump: `{"mu", "dimension", "amplitudes": [[index, re_units, im_units], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDump {
    pub mu: u32,
    pub dimension: u128,
    pub amplitudes: Vec<(BasisIndex, i128, i128)>,
}

impl StateVector {
    pub fn to_dump(&self) -> Result<StateDump> {
        let (Some(r), Amplitudes::Grid(m)) = (self.resolution, &self.amplitudes) else {
            return Err(Error::NotRepresentable(
                "exact-mode states have no grid dump".into(),
            ));
        };
        Ok(StateDump {
            mu: r.mu(),
            dimension: self.dimension,
            amplitudes: m
                .iter()
                .map(|(k, a)| (*k, a.re_units(), a.im_units()))
                .collect(),
        })
    }

    pub fn from_dump(dump: &StateDump) -> Result<Self> {
        let r = Resolution::new(dump.mu)?;
        let mut amplitudes = BTreeMap::new();
        let mut last: Option<BasisIndex> = None;
        for &(k, re, im) in &dump.amplitudes {
            if last.is_some_and(|l| l >= k) {
                return Err(Error::MalformedDump("indices must be strictly ascending".into()));
            }
            last = Some(k);
            if re == 0 && im == 0 {
                return Err(Error::MalformedDump(format!("zero amplitude at {k}")));
            }
            amplitudes.insert(k, FixedComplex::from_units(re, im, r)?);
        }
        Self::from_grid(dump.dimension, r, amplitudes)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.to_dump()?).map_err(|e| Error::MalformedDump(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: StateDump =
            serde_json::from_str(text).map_err(|e| Error::MalformedDump(e.to_string()))?;
        Self::from_dump(&dump)
    }
}

// ---------------------------------------------------------------------------
// Gate library
// ---------------------------------------------------------------------------

/// Frequently used gates and random exact circuits.
pub mod gates {
    use super::*;

    fn c(re: BigRational, im: BigRational) -> ExactComplex {
        ExactComplex::new(re, im)
    }

    pub fn pauli_x(target: u32) -> UnitarySpec {
        let m = [
            ExactComplex::zero(),
            ExactComplex::one(),
            ExactComplex::one(),
            ExactComplex::zero(),
        ];
        UnitarySpec::SingleTarget(SingleTargetGate::new(m, target, vec![]).expect("X is unitary"))
    }

    pub fn cnot(control: u32, target: u32) -> Result<UnitarySpec> {
        let m = [
            ExactComplex::zero(),
            ExactComplex::one(),
            ExactComplex::one(),
            ExactComplex::zero(),
        ];
        Ok(UnitarySpec::SingleTarget(SingleTargetGate::new(m, target, vec![control])?))
    }

    /// `1/sqrt(2)` rounded to `bits` fractional bits.
    pub fn inv_sqrt2(bits: u32) -> BigRational {
        let scaled = round_div_sqrt(&pow2(bits as i64), &BigRational::from_integer(2.into()));
        BigRational::from_integer(scaled) * pow2(-(bits as i64))
    }

    /// Hadamard with `1/sqrt(2)` rounded to `bits` fractional bits; unitary to
    /// within `2^(-(bits - 2))`.
    pub fn hadamard(target: u32, bits: u32) -> UnitarySpec {
        let h = inv_sqrt2(bits);
        let z = BigRational::zero();
        let m = [
            c(h.clone(), z.clone()),
            c(h.clone(), z.clone()),
            c(h.clone(), z.clone()),
            c(-h, z),
        ];
        UnitarySpec::SingleTarget(
            SingleTargetGate::checked(m, target, vec![], UnitarityCheck::WithinBits(bits - 2))
                .expect("rounded Hadamard is unitary within tolerance"),
        )
    }

    /// Real rotation `[[cos, -sin], [sin, cos]]`; `cos^2 + sin^2` must be 1.
    pub fn rotation(
        cos: BigRational,
        sin: BigRational,
        target: u32,
        controls: Vec<u32>,
    ) -> Result<UnitarySpec> {
        let z = BigRational::zero();
        let m = [
            c(cos.clone(), z.clone()),
            c(-&sin, z.clone()),
            c(sin, z.clone()),
            c(cos, z),
        ];
        Ok(UnitarySpec::SingleTarget(SingleTargetGate::new(m, target, controls)?))
    }

    /// The SU(2) matrix `[[a, -conj(b)], [b, conj(a)]]` whose `(a, b)` is the
    /// inverse stereographic image of `t` on the unit 3-sphere; exactly
    /// unitary with rational entries.
    pub fn rational_su2(t: [BigRational; 3]) -> [ExactComplex; 4] {
        let n = &t[0] * &t[0] + &t[1] * &t[1] + &t[2] * &t[2];
        let den = &n + BigRational::one();
        let two = BigRational::from_integer(2.into());
        let a = c((&n - BigRational::one()) / &den, &two * &t[0] / &den);
        let b = c(&two * &t[1] / &den, &two * &t[2] / &den);
        [a.clone(), -&b.conj(), b, a.conj()]
    }

    /// A random exactly-unitary single-qubit gate with small denominators.
    pub fn random_su2(stream: &mut Stream, target: u32) -> UnitarySpec {
        let mut coord = || BigRational::new(stream.range_i64(-6, 6).into(), 2.into());
        let m = rational_su2([coord(), coord(), coord()]);
        UnitarySpec::SingleTarget(SingleTargetGate::new(m, target, vec![]).expect("exact SU(2)"))
    }

    /// `depth` random gates on `n_qubits`: rational SU(2) rotations and CNOTs.
    pub fn random_circuit(n_qubits: u32, depth: usize, stream: &mut Stream) -> Vec<UnitarySpec> {
        (0..depth)
            .map(|_| {
                let target = stream.below_u64(n_qubits as u64) as u32;
                if n_qubits > 1 && stream.below_u64(3) == 0 {
                    let mut control = stream.below_u64(n_qubits as u64 - 1) as u32;
                    if control >= target {
                        control += 1;
                    }
                    cnot(control, target).expect("distinct sites")
                } else {
                    random_su2(stream, target)
                }
            })
            .collect()
    }

    /// The dense matrix of a circuit on `n_qubits`, computed column by column
    /// in exact mode.
    pub fn dense_from_circuit(n_qubits: u32, circuit: &[UnitarySpec]) -> Result<DenseUnitary> {
        let dim = 1usize << n_qubits;
        let mut entries = vec![ExactComplex::zero(); dim * dim];
        for col in 0..dim {
            let s = StateVector::basis(dim as u128, col as u128, Precision::Exact)?;
            let out = apply_circuit(&s, circuit)?;
            for (row, a) in out.exact_amplitudes() {
                entries[row as usize * dim + col] = a;
            }
        }
        DenseUnitary::new(dim, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::quantize;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn grid(mu: u32) -> Precision {
        Precision::Grid(Resolution::new(mu).unwrap())
    }

    #[test]
    fn uniform_superposition_examples() {
        let s = uniform_superposition(4, grid(8)).unwrap();
        assert_eq!(s.support(), 4);
        for j in 0..4 {
            assert_eq!(s.amplitude(j), ExactComplex::real(q(1, 2)));
            assert_eq!(s.grid_amplitudes().unwrap()[&j].re_units(), 8);
        }
        assert_eq!(
            uniform_superposition(512, grid(8)),
            Err(Error::ResolutionExceeded {
                requested: 512,
                mu: 8
            })
        );
        let s = uniform_superposition(256, grid(8)).unwrap();
        assert_eq!(s.support(), 256);
        assert_eq!(s.amplitude(255), ExactComplex::real(q(1, 16)));
    }

    #[test]
    fn exact_uniform_requires_rational_amplitude() {
        let s = uniform_superposition(9, Precision::Exact).unwrap();
        assert!(s.norm_sq().is_one());
        assert!(matches!(
            uniform_superposition(3, Precision::Exact),
            Err(Error::NotRepresentable(_))
        ));
    }

    #[test]
    fn identity_permutation_is_a_no_op() {
        let s = uniform_superposition(4, grid(8)).unwrap();
        assert_eq!(apply_unitary(&s, &UnitarySpec::identity(4)).unwrap(), s);
    }

    #[test]
    fn hadamard_on_zero_at_mu_64() {
        let r = Resolution::new(64).unwrap();
        let s = StateVector::basis(2, 0, Precision::Grid(r)).unwrap();
        let out = apply_unitary(&s, &gates::hadamard(0, 128)).unwrap();
        // quantize(1/sqrt 2) at 32 fractional bits, from an independent route.
        let expected = quantize(&ExactComplex::real(gates::inv_sqrt2(200)), r).unwrap();
        let amps = out.grid_amplitudes().unwrap();
        assert_eq!(amps[&0], expected);
        assert_eq!(amps[&1], expected);
    }

    #[test]
    fn resolution_pass_examples() {
        let r = Resolution::new(8).unwrap();
        // (0.99875, 0.05): 0.05 < 1/16 is zeroed, the survivor renormalizes to 1.
        let a = q(99_875, 100_000);
        let exact = ExactState::new(
            2,
            BTreeMap::from([
                (0, ExactComplex::real(a.clone())),
                (1, ExactComplex::real(q(5, 100))),
            ]),
        )
        .unwrap();
        let (s, lost) = resolution_pass(&exact, r).unwrap();
        assert_eq!(s.support(), 1);
        assert_eq!(s.amplitude(0), ExactComplex::one());
        let norm = &a * &a + q(25, 10_000);
        assert_eq!(lost, q(25, 10_000) / norm);

        // Uniform over 3 with rational stand-in amplitudes (1, 1, 1): none lost.
        let exact = ExactState::new(
            3,
            (0..3).map(|j| (j, ExactComplex::one())).collect(),
        )
        .unwrap();
        let (s, lost) = resolution_pass(&exact, r).unwrap();
        assert_eq!(s.support(), 3);
        assert!(lost.is_zero());
    }

    #[test]
    fn total_extinction_is_reported() {
        let r = Resolution::new(4).unwrap();
        // 32 equal amplitudes: each normalized magnitude is 1/sqrt(32) < 1/4.
        let exact = ExactState::new(32, (0..32).map(|j| (j, ExactComplex::one())).collect()).unwrap();
        assert_eq!(resolution_pass(&exact, r).unwrap_err(), Error::TotalExtinction);
        // 16 equal amplitudes sit exactly on the threshold and survive.
        let exact = ExactState::new(16, (0..16).map(|j| (j, ExactComplex::one())).collect()).unwrap();
        assert_eq!(resolution_pass(&exact, r).unwrap().0.support(), 16);
    }

    #[test]
    fn dimension_mismatch() {
        let s = StateVector::basis(4, 0, grid(8)).unwrap();
        assert!(matches!(
            apply_unitary(&s, &UnitarySpec::identity(8)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            apply_unitary(&s, &gates::pauli_x(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constructors_reject_non_unitaries() {
        let m = [
            ExactComplex::one(),
            ExactComplex::one(),
            ExactComplex::zero(),
            ExactComplex::one(),
        ];
        assert!(matches!(SingleTargetGate::new(m, 0, vec![]), Err(Error::NotUnitary(_))));
        assert!(UnitarySpec::diagonal(vec![ExactComplex::from_ratio(1, 1, 2)]).is_err());
        assert!(UnitarySpec::diagonal(vec![ExactComplex::from_ratio(3, 4, 5)]).is_ok());
        assert!(Permutation::from_table(&[0, 0, 1]).is_err());
        assert!(Permutation::from_table(&[2, 0, 1]).is_ok());
        assert!(Permutation::from_swaps(4, &[(0, 1), (1, 2)]).is_err());
    }

    #[test]
    fn born_sample_single_support_is_deterministic() {
        let s = StateVector::basis(8, 5, grid(8)).unwrap();
        for seed in 0..100 {
            assert_eq!(born_sample(&s, seed), 5);
        }
    }

    #[test]
    fn born_sample_uniform_frequencies() {
        let s = uniform_superposition(4, grid(8)).unwrap();
        let sampler = BornSampler::new(&s);
        let mut counts = [0u32; 4];
        let root = Stream::new(2024);
        for t in 0..100_000u64 {
            counts[sampler.sample(&mut root.split(t)) as usize] += 1;
        }
        for c in counts {
            let f = c as f64 / 100_000.0;
            assert!((f - 0.25).abs() <= 0.01, "{counts:?}");
        }
    }

    #[test]
    fn measure_observable_on_eigenstate() {
        let s = StateVector::basis(8, 3, grid(8)).unwrap();
        let o = DiagonalObservable::from_fn(8, |j| {
            let d = BigRational::from_integer(BigInt::from(j)) - q(3, 1);
            &d * &d
        });
        let (value, post) = measure_observable(&s, &o, 11).unwrap();
        assert!(value.is_zero());
        assert_eq!(post, s);
    }

    #[test]
    fn dump_round_trip() {
        let s = uniform_superposition(3, grid(16)).unwrap();
        let text = s.to_json().unwrap();
        assert!(text.starts_with("{\"mu\":16,\"dimension\":3,\"amplitudes\":[[0,"));
        assert_eq!(StateVector::from_json(&text).unwrap(), s);
        assert!(StateVector::from_json(r#"{"mu":8,"dimension":2,"amplitudes":[[1,1,0],[0,1,0]]}"#).is_err());
        assert!(StateVector::from_json(r#"{"mu":8,"dimension":2,"amplitudes":[[0,0,0]]}"#).is_err());
        assert!(StateVector::from_json(r#"{"mu":8,"dimension":2,"amplitudes":[[2,1,0]]}"#).is_err());
        assert!(StateVector::from_json(r#"{"mu":7,"dimension":2,"amplitudes":[[0,1,0]]}"#).is_err());
    }

    #[test]
    fn controlled_gate_respects_controls() {
        let s = StateVector::basis(4, 0b01, Precision::Exact).unwrap();
        let out = apply_unitary(&s, &gates::cnot(0, 1).unwrap()).unwrap();
        assert_eq!(out.indices(), vec![0b11]);
        let s = StateVector::basis(4, 0b10, Precision::Exact).unwrap();
        let out = apply_unitary(&s, &gates::cnot(0, 1).unwrap()).unwrap();
        assert_eq!(out.indices(), vec![0b10]);
    }
}
