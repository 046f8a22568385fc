//! Instability detection, probabilistic information transitions and the
//! evolve/collapse cycle.
//!
//! A grid state at resolution `mu` is *unstable* once the superposition it
//! would have to carry has more than `2^mu` terms. Stored states can never
//! exceed that support (every stored amplitude is at least `2^(-mu/2)` in
//! normalized magnitude), so the cycle engine checks stability on the exact
//! image of each unitary, before the commit. An unstable image undergoes an
//! information transition: a Born-sampled basis state replaces it. A stable
//! image is committed through the truncating resolution pass.

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{rational_string, ExactComplex, Resolution};
use crate::rng::Stream;
use crate::statevec::{
    gates, resolution_pass, BasisIndex, BornSampler, ExactState, Permutation, Precision,
    StateVector, UnitarySpec,
};

/// Which quantity is compared against `2^mu`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityPolicy {
    /// Number of nonzero amplitudes.
    #[default]
    SupportCount,
    /// Dimension of the state space.
    HilbertDimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub status: Stability,
    /// The measured quantity (support or dimension, per policy).
    pub trigger_support: u128,
    /// `2^mu`; `None` when it does not fit in 128 bits.
    pub bound: Option<u128>,
}

/// Stability of a state with the given support and dimension at `r`.
pub fn check_support(
    support: u128,
    dimension: u128,
    r: Resolution,
    policy: StabilityPolicy,
) -> StabilityVerdict {
    let measured = match policy {
        StabilityPolicy::SupportCount => support,
        StabilityPolicy::HilbertDimension => dimension,
    };
    let status = if r.admits(measured) {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    StabilityVerdict {
        status,
        trigger_support: measured,
        bound: r.coherence_bound(),
    }
}

/// Stability of a stored state. Exact-mode states have no bound and are
/// always stable.
pub fn check_stability(s: &StateVector, policy: StabilityPolicy) -> StabilityVerdict {
    match s.resolution() {
        Some(r) => check_support(s.support() as u128, s.dimension(), r, policy),
        None => StabilityVerdict {
            status: Stability::Stable,
            trigger_support: match policy {
                StabilityPolicy::SupportCount => s.support() as u128,
                StabilityPolicy::HilbertDimension => s.dimension(),
            },
            bound: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub cycle_index: u64,
    pub pre_support: u128,
    pub sampled_index: BasisIndex,
    /// Weight zeroed by truncation earlier in the same cycle.
    #[serde(with = "rational_string")]
    pub lost_weight: BigRational,
    pub seed_used: u64,
}

/// Born-samples a basis state from `s` with `Stream::new(seed)`.
pub fn information_transition(s: &StateVector, seed: u64) -> Result<(StateVector, CollapseEvent)> {
    let j = BornSampler::new(s).sample(&mut Stream::new(seed));
    let post = StateVector::basis(s.dimension(), j, s.precision())?;
    Ok((
        post,
        CollapseEvent {
            cycle_index: 0,
            pre_support: s.support() as u128,
            sampled_index: j,
            lost_weight: BigRational::zero(),
            seed_used: seed,
        },
    ))
}

fn transition_from_image(
    image: &ExactState,
    precision: Precision,
    seed: u64,
) -> Result<(StateVector, BasisIndex)> {
    let j = BornSampler::from_exact(image).sample(&mut Stream::new(seed));
    Ok((StateVector::basis(image.dimension(), j, precision)?, j))
}

/// Per-cycle bookkeeping of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle_index: u64,
    pub support: usize,
    #[serde(with = "rational_string")]
    pub lost_weight: BigRational,
    pub transitions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub events: Vec<CollapseEvent>,
    pub cycles: Vec<CycleRecord>,
    pub final_state: StateVector,
}

impl Trajectory {
    /// Events as JSON lines, one event per line.
    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
            .collect()
    }
}

/// Seed for the transition that may follow unitary `step` of `cycle`.
fn transition_seed(root: &Stream, cycle: u64, step: usize) -> u64 {
    root.split(cycle).split(step as u64).next_u64()
}

/// One cycle: each unitary in `step` is applied exactly; an unstable image
/// collapses, a stable one is committed through the resolution pass.
pub fn run_cycle(
    state: &StateVector,
    step: &[UnitarySpec],
    policy: StabilityPolicy,
    cycle_index: u64,
    root: &Stream,
) -> Result<(StateVector, Vec<CollapseEvent>, CycleRecord)> {
    let mut current = state.clone();
    let mut events = Vec::new();
    let mut lost = BigRational::zero();
    for (i, u) in step.iter().enumerate() {
        let image = current.image(u)?;
        let unstable = current.resolution().map(|r| {
            check_support(image.support() as u128, image.dimension(), r, policy).status
                == Stability::Unstable
        });
        if unstable == Some(true) {
            let seed = transition_seed(root, cycle_index, i);
            let (post, j) = transition_from_image(&image, current.precision(), seed)?;
            events.push(CollapseEvent {
                cycle_index,
                pre_support: image.support() as u128,
                sampled_index: j,
                lost_weight: lost.clone(),
                seed_used: seed,
            });
            current = post;
        } else {
            let (next, step_lost) = current.commit(&image)?;
            // Weight fractions compound: later passes act on what survived.
            lost = &lost + &((BigRational::from_integer(1.into()) - &lost) * step_lost);
            current = next;
        }
    }
    let record = CycleRecord {
        cycle_index,
        support: current.support(),
        lost_weight: lost,
        transitions: events.len(),
    };
    Ok((current, events, record))
}

/// Repeats `step` for `cycles` cycles (numbered from 1), collapsing whenever
/// an image is unstable. Fully determined by `seed`.
pub fn evolve_cycle(
    s: &StateVector,
    step: &[UnitarySpec],
    cycles: u64,
    policy: StabilityPolicy,
    seed: u64,
) -> Result<Trajectory> {
    if cycles == 0 {
        return Err(Error::InvalidArgument("cycles must be at least 1".into()));
    }
    let root = Stream::new(seed);
    let mut state = s.clone();
    let mut events = Vec::new();
    let mut records = Vec::new();
    for c in 1..=cycles {
        let (next, mut ev, record) = run_cycle(&state, step, policy, c, &root)?;
        events.append(&mut ev);
        records.push(record);
        state = next;
    }
    Ok(Trajectory {
        events,
        cycles: records,
        final_state: state,
    })
}

// ---------------------------------------------------------------------------
// Meter model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pointer {
    Plus,
    Minus,
    Zero,
}

/// Spin preparation for [`meter_demo`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinInput {
    /// `(|+>_z + |->_z) / sqrt(2)`.
    #[default]
    PlusX,
    PlusZ,
    MinusZ,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeterOutcome {
    pub spin: Spin,
    pub pointer: Pointer,
    pub event: CollapseEvent,
}

impl MeterOutcome {
    /// Spin and pointer disagree, e.g. `(+, -)`.
    pub fn is_cross_correlated(&self) -> bool {
        !matches!(
            (self.spin, self.pointer),
            (Spin::Up, Pointer::Plus) | (Spin::Down, Pointer::Minus)
        )
    }
}

/// Joint index of spin (`+z` = 0, `-z` = 1) and pointer (`+`, `-`, `0` = 0, 1, 2).
pub fn meter_index(spin: Spin, pointer: Pointer) -> BasisIndex {
    let s = match spin {
        Spin::Up => 0,
        Spin::Down => 1,
    };
    let p = match pointer {
        Pointer::Plus => 0,
        Pointer::Minus => 1,
        Pointer::Zero => 2,
    };
    s * 3 + p
}

fn decode_meter_index(j: BasisIndex) -> (Spin, Pointer) {
    let spin = if j / 3 == 0 { Spin::Up } else { Spin::Down };
    let pointer = match j % 3 {
        0 => Pointer::Plus,
        1 => Pointer::Minus,
        _ => Pointer::Zero,
    };
    (spin, pointer)
}

/// `|±>_z |0>_M -> |±>_z |±>_M`, completed to a bijection on the 6-state
/// space by swapping each target with its source.
pub fn meter_interaction() -> UnitarySpec {
    let swaps = [
        (
            meter_index(Spin::Up, Pointer::Zero),
            meter_index(Spin::Up, Pointer::Plus),
        ),
        (
            meter_index(Spin::Down, Pointer::Zero),
            meter_index(Spin::Down, Pointer::Minus),
        ),
    ];
    UnitarySpec::Permutation(Permutation::from_swaps(6, &swaps).expect("disjoint swaps"))
}

/// Prepares spin ⊗ ready meter, couples them, and runs an information
/// transition on the entangled state.
pub fn meter_demo(input: SpinInput, r: Resolution, seed: u64) -> Result<MeterOutcome> {
    let ready = |spin| meter_index(spin, Pointer::Zero);
    let amplitudes = match input {
        SpinInput::PlusX => vec![
            (ready(Spin::Up), ExactComplex::one()),
            (ready(Spin::Down), ExactComplex::one()),
        ],
        SpinInput::PlusZ => vec![(ready(Spin::Up), ExactComplex::one())],
        SpinInput::MinusZ => vec![(ready(Spin::Down), ExactComplex::one())],
    };
    let (prepared, _) = resolution_pass(&ExactState::new(6, amplitudes.into_iter().collect())?, r)?;
    let coupled = crate::statevec::apply_unitary(&prepared, &meter_interaction())?;
    let (post, event) = information_transition(&coupled, seed)?;
    let (spin, pointer) = decode_meter_index(post.indices()[0]);
    Ok(MeterOutcome {
        spin,
        pointer,
        event,
    })
}

// ---------------------------------------------------------------------------
// Decoherence experiment
// ---------------------------------------------------------------------------

/// Initial state of the system qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemInitial {
    /// `(|0> + |1>) / sqrt(2)`.
    Plus,
    Zero,
    /// Arbitrary amplitudes `(a0, a1)`, normalized on preparation.
    Amplitudes {
        #[serde(with = "rational_string")]
        a0: BigRational,
        #[serde(with = "rational_string")]
        a1: BigRational,
    },
}

/// Controlled rotation of each fresh environment qubit, conditioned on the
/// system qubit: `|1>|0>_E -> |1>(cos|0> + sin|1>)_E`. `(0, 1)` is a full
/// controlled flip and `(1, 0)` no coupling at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    #[serde(with = "rational_string")]
    pub cos: BigRational,
    #[serde(with = "rational_string")]
    pub sin: BigRational,
}

impl Coupling {
    pub fn new(cos: BigRational, sin: BigRational) -> Result<Self> {
        if &cos * &cos + &sin * &sin != BigRational::from_integer(1.into()) {
            return Err(Error::NotUnitary("coupling needs cos^2 + sin^2 = 1".into()));
        }
        Ok(Self { cos, sin })
    }

    pub fn full_flip() -> Self {
        Self::new(BigRational::zero(), BigRational::from_integer(1.into())).expect("valid")
    }

    pub fn none() -> Self {
        Self::new(BigRational::from_integer(1.into()), BigRational::zero()).expect("valid")
    }
}

impl Default for Coupling {
    fn default() -> Self {
        Self::new(
            BigRational::new(3.into(), 5.into()),
            BigRational::new(4.into(), 5.into()),
        )
        .expect("3-4-5")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoherenceConfig {
    pub cycles: u64,
    pub trials: u64,
    pub precision: Precision,
    pub seed: u64,
    pub initial: SystemInitial,
    pub coupling: Coupling,
    pub policy: StabilityPolicy,
    pub bootstrap_resamples: usize,
}

impl Default for DecoherenceConfig {
    fn default() -> Self {
        Self {
            cycles: 20,
            trials: 2000,
            precision: Precision::Grid(Resolution::new(4).expect("valid")),
            seed: 0,
            initial: SystemInitial::Plus,
            coupling: Coupling::default(),
            policy: StabilityPolicy::SupportCount,
            bootstrap_resamples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherencePoint {
    pub cycle: u64,
    pub mean_offdiag: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceReport {
    /// One point per cycle, starting with the prepared state at cycle 0.
    pub points: Vec<DecoherencePoint>,
    /// Mean number of information transitions per trial.
    pub mean_transitions: f64,
}

impl DecoherenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle,mean_offdiag,ci_low,ci_high\n");
        for p in &self.points {
            out += &format!("{},{},{},{}\n", p.cycle, p.mean_offdiag, p.ci_low, p.ci_high);
        }
        out
    }
}

/// `rho_01` of the system qubit (site 0) after tracing out every other site.
pub fn system_offdiag(s: &StateVector) -> ExactComplex {
    let amps = s.exact_amplitudes();
    let norm = s.norm_sq();
    let mut acc = ExactComplex::zero();
    for (j, a) in amps.iter().filter(|(j, _)| *j & 1 == 0) {
        if let Some(b) = amps.get(&(j | 1)) {
            acc = acc + a * &b.conj();
        }
    }
    ExactComplex::new(acc.re / &norm, acc.im / norm)
}

fn prepare_system(initial: &SystemInitial, precision: Precision) -> Result<StateVector> {
    let one = || ExactComplex::one();
    let amps: Vec<(BasisIndex, ExactComplex)> = match initial {
        SystemInitial::Plus => vec![(0, one()), (1, one())],
        SystemInitial::Zero => vec![(0, one())],
        SystemInitial::Amplitudes { a0, a1 } => vec![
            (0, ExactComplex::real(a0.clone())),
            (1, ExactComplex::real(a1.clone())),
        ],
    };
    let exact = ExactState::new(2, amps.into_iter().collect())?;
    match precision {
        Precision::Grid(r) => Ok(resolution_pass(&exact, r)?.0),
        Precision::Exact => StateVector::exact(2, exact.amplitudes().clone()),
    }
}

struct TrialTrace {
    offdiag: Vec<(f64, f64)>,
    transitions: usize,
}

fn run_decoherence_trial(cfg: &DecoherenceConfig, trial: u64) -> Result<TrialTrace> {
    let root = Stream::new(cfg.seed).split(trial);
    let mut state = prepare_system(&cfg.initial, cfg.precision)?;
    let mut offdiag = vec![system_offdiag(&state).to_f64_pair()];
    let mut transitions = 0;
    for c in 1..=cfg.cycles {
        let site = u32::try_from(c).ok().filter(|&s| s < 127).ok_or_else(|| {
            Error::InvalidArgument("too many cycles for a 128-bit basis".into())
        })?;
        state = state.with_fresh_qubit()?;
        let coupling = gates::rotation(cfg.coupling.cos.clone(), cfg.coupling.sin.clone(), site, vec![0])?;
        let (next, events, _) = run_cycle(&state, &[coupling], cfg.policy, c, &root)?;
        transitions += events.len();
        state = next;
        offdiag.push(system_offdiag(&state).to_f64_pair());
    }
    Ok(TrialTrace {
        offdiag,
        transitions,
    })
}

fn mean_abs(values: impl Iterator<Item = (f64, f64)>, n: usize) -> f64 {
    let (re, im) = values.fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    (re / n as f64).hypot(im / n as f64)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Runs `trials` independent trajectories of the system qubit coupled to one
/// fresh environment qubit per cycle and reports the magnitude of the
/// ensemble off-diagonal element `|rho_01|` per cycle, with 95% bootstrap
/// bands over trials.
pub fn decoherence_experiment(cfg: &DecoherenceConfig) -> Result<DecoherenceReport> {
    if cfg.cycles == 0 || cfg.trials == 0 {
        return Err(Error::InvalidArgument("cycles and trials must be positive".into()));
    }
    let traces: Vec<TrialTrace> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_decoherence_trial(cfg, t))
        .collect::<Result<_>>()?;
    let n = traces.len();
    let boot_root = Stream::new(cfg.seed).split(u64::MAX);
    let points = (0..=cfg.cycles as usize)
        .into_par_iter()
        .map(|c| {
            let mean = mean_abs(traces.iter().map(|t| t.offdiag[c]), n);
            let mut stream = boot_root.split(c as u64);
            let mut boots: Vec<f64> = (0..cfg.bootstrap_resamples)
                .map(|_| {
                    let picks = (0..n).map(|_| traces[stream.below_u64(n as u64) as usize].offdiag[c]);
                    mean_abs(picks, n)
                })
                .collect();
            boots.sort_by(f64::total_cmp);
            let (ci_low, ci_high) = if boots.is_empty() {
                (mean, mean)
            } else {
                (percentile(&boots, 0.025), percentile(&boots, 0.975))
            };
            DecoherencePoint {
                cycle: c as u64,
                mean_offdiag: mean,
                ci_low,
                ci_high,
            }
        })
        .collect();
    let mean_transitions =
        traces.iter().map(|t| t.transitions).sum::<usize>() as f64 / n as f64;
    Ok(DecoherenceReport {
        points,
        mean_transitions,
    })
}

/// `|rho_01|` after `cycles` cycles of purely unitary evolution from a
/// normalized real state `(a0, a1)`: `|a0 a1| cos^cycles`.
pub fn unitary_offdiag_reference(a0: &BigRational, a1: &BigRational, cos: &BigRational, cycles: u32) -> BigRational {
    let norm = a0 * a0 + a1 * a1;
    let c = num_traits::pow(cos.clone(), cycles as usize);
    let v = a0 * a1 / norm * c;
    if v < BigRational::zero() {
        -v
    } else {
        v
    }
}
