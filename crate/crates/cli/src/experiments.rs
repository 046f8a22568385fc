use std::collections::BTreeMap;

use cmqm::chaitin::{omega_lower_bound, rotation_experiment, RotationResult};
use cmqm::collapse::{
    decoherence_experiment, evolve_cycle, meter_demo, Coupling, DecoherenceConfig, SpinInput,
    StabilityPolicy,
};
use cmqm::diophantine::{
    classical_oracle, decide_solution, DecisionMode, DiophantinePolynomial, SearchDomain,
};
use cmqm::fixedpoint::{format_rational, parse_rational, ExactComplex, Resolution};
use cmqm::resources::{compare_reference, estimate, parse_decimal, Entropy, ResourceInputs};
use cmqm::rng::Stream;
use cmqm::statevec::{
    gates, uniform_superposition, Permutation, Precision, SingleTargetGate, StateDump,
    StateVector, UnitarySpec,
};
use cmqm::turingfield::{diagonal_demo, field_search, TuringFieldConfig};
use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{CliError, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DioSolve,
    FieldRun,
    DiagDemo,
    ChaitinOmega,
    ChaitinRotate,
    Decohere,
    Meter,
    EstimateResources,
    StateEvolve,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::DioSolve,
        Experiment::FieldRun,
        Experiment::DiagDemo,
        Experiment::ChaitinOmega,
        Experiment::ChaitinRotate,
        Experiment::Decohere,
        Experiment::Meter,
        Experiment::EstimateResources,
        Experiment::StateEvolve,
    ];
}

pub(crate) struct ExperimentOutput {
    pub result: Value,
    pub csv: Option<String>,
    pub jsonl: Option<String>,
}

impl ExperimentOutput {
    fn plain(result: Value) -> Self {
        Self {
            result,
            csv: None,
            jsonl: None,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::ConfigInvalid(e.to_string())
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| {
        CliError::Engine(cmqm::Error::NotRepresentable(format!("value does not fit in JSON: {e}")))
    })
}

fn typed<T: DeserializeOwned>(params: &Value) -> Result<T, CliError> {
    serde_json::from_value(params.clone()).map_err(invalid)
}

fn resolution(mu: u32) -> Result<Resolution, CliError> {
    Ok(Resolution::new(mu)?)
}

// ---------------------------------------------------------------------------
// Parameter documents
// ---------------------------------------------------------------------------

/// A polynomial as text (`"x0^2 + x1^2 - 25"`) or as its JSON term list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolynomialSpec {
    Text(String),
    Terms(Value),
}

impl Default for PolynomialSpec {
    fn default() -> Self {
        PolynomialSpec::Text("x0^2 + x1^2 - 25".into())
    }
}

impl PolynomialSpec {
    fn build(&self, arity: Option<usize>) -> Result<DiophantinePolynomial, CliError> {
        let d = match self {
            PolynomialSpec::Text(t) => DiophantinePolynomial::parse(t),
            PolynomialSpec::Terms(v) => DiophantinePolynomial::from_json(v),
        }
        .map_err(|e| invalid(format!("polynomial: {e}")))?;
        match arity {
            Some(a) => d.with_arity(a).map_err(|e| invalid(format!("arity: {e}"))),
            None => Ok(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeParam {
    #[default]
    Deterministic,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DioSolveParams {
    pub polynomial: PolynomialSpec,
    pub cutoff: u64,
    pub arity: Option<usize>,
    pub mu: u32,
    pub mode: ModeParam,
    pub shots: u64,
    /// Also run plain exhaustive search and report agreement.
    pub oracle: bool,
}

impl Default for DioSolveParams {
    fn default() -> Self {
        Self {
            polynomial: PolynomialSpec::default(),
            cutoff: 10,
            arity: None,
            mu: 16,
            mode: ModeParam::Deterministic,
            shots: 1000,
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldRunParams {
    pub polynomial: PolynomialSpec,
    pub cutoff: u64,
    pub arity: Option<usize>,
    pub machine_count: u64,
    pub message_rate: u64,
    pub steps_per_tick: u64,
    pub tape_bound: u64,
    pub tick_budget: u64,
}

impl Default for FieldRunParams {
    fn default() -> Self {
        let f = TuringFieldConfig::default();
        Self {
            polynomial: PolynomialSpec::default(),
            cutoff: 10,
            arity: None,
            machine_count: f.machine_count,
            message_rate: f.message_rate,
            steps_per_tick: f.steps_per_tick,
            tape_bound: f.tape_bound,
            tick_budget: f.tick_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagDemoParams {
    pub enum_limit: u64,
    pub budget: u64,
    pub tape_bound: usize,
}

impl Default for DiagDemoParams {
    fn default() -> Self {
        Self {
            enum_limit: 50,
            budget: 10_000,
            tape_bound: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaitinOmegaParams {
    pub max_len: u32,
    pub budget: u64,
}

impl Default for ChaitinOmegaParams {
    fn default() -> Self {
        Self {
            max_len: 14,
            budget: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotsParam {
    One(u64),
    Ladder(Vec<u64>),
}

impl ShotsParam {
    fn rungs(&self) -> Vec<u64> {
        match self {
            ShotsParam::One(n) => vec![*n],
            ShotsParam::Ladder(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaitinRotateParams {
    /// `"p/q"` or a decimal such as `"0.785"`.
    pub omega: String,
    pub mu: u32,
    pub shots: ShotsParam,
}

impl Default for ChaitinRotateParams {
    fn default() -> Self {
        Self {
            omega: "1/2".into(),
            mu: 8,
            shots: ShotsParam::Ladder(vec![100, 1_000, 10_000, 100_000]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeterParams {
    pub input: SpinInput,
    pub mu: u32,
    pub trials: u64,
}

impl Default for MeterParams {
    fn default() -> Self {
        Self {
            input: SpinInput::PlusX,
            mu: 16,
            trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EntropyParam {
    SOverKb(f64),
    /// Decimal or `"p/q"`, e.g. `"1e23"`.
    Log2Multiplicity(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceParams {
    pub entropy: EntropyParam,
    pub mu: String,
    pub e_over_hbar: String,
}

impl Default for ResourceParams {
    fn default() -> Self {
        Self {
            entropy: EntropyParam::Log2Multiplicity("1e23".into()),
            mu: "1e23".into(),
            e_over_hbar: "1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSpec {
    X {
        target: u32,
    },
    /// Hadamard with `1/sqrt(2)` rounded to `bits` fractional bits (default
    /// `2 mu + 16`, or 64 in exact mode).
    H {
        target: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bits: Option<u32>,
    },
    Cnot {
        control: u32,
        target: u32,
    },
    Rotation {
        cos: String,
        sin: String,
        target: u32,
        #[serde(default)]
        controls: Vec<u32>,
    },
    /// Exactly unitary SU(2) element from three rational coordinates.
    Su2 {
        t: [String; 3],
        target: u32,
    },
    /// `diag(1, re + i im)`; the phase must have modulus exactly 1.
    Phase {
        target: u32,
        re: String,
        im: String,
    },
    /// `|k> -> |k + 1 mod dim>`.
    CyclicShift,
    Permutation {
        table: Vec<u64>,
    },
}

const MAX_TABLE_DIM: u128 = 1 << 20;

impl GateSpec {
    fn build(&self, dim: u128, precision: Precision) -> Result<UnitarySpec, CliError> {
        let q = |s: &str| parse_rational(s).map_err(|e| invalid(format!("gate: {e}")));
        Ok(match self {
            GateSpec::X { target } => gates::pauli_x(*target),
            GateSpec::H { target, bits } => {
                let bits = bits.unwrap_or(match precision {
                    Precision::Exact => 64,
                    Precision::Grid(r) => 2 * r.mu() + 16,
                });
                if bits < 4 {
                    return Err(invalid("gate h needs bits >= 4"));
                }
                gates::hadamard(*target, bits)
            }
            GateSpec::Cnot { control, target } => gates::cnot(*control, *target)?,
            GateSpec::Rotation {
                cos,
                sin,
                target,
                controls,
            } => gates::rotation(q(cos)?, q(sin)?, *target, controls.clone())?,
            GateSpec::Su2 { t, target } => {
                let m = gates::rational_su2([q(&t[0])?, q(&t[1])?, q(&t[2])?]);
                UnitarySpec::SingleTarget(SingleTargetGate::new(m, *target, vec![])?)
            }
            GateSpec::Phase { target, re, im } => {
                let m = [
                    ExactComplex::one(),
                    ExactComplex::zero(),
                    ExactComplex::zero(),
                    ExactComplex::new(q(re)?, q(im)?),
                ];
                UnitarySpec::SingleTarget(SingleTargetGate::new(m, *target, vec![])?)
            }
            GateSpec::CyclicShift => {
                if dim > MAX_TABLE_DIM {
                    return Err(cmqm::Error::InvalidArgument(format!(
                        "cyclic shift is limited to dimension {MAX_TABLE_DIM}"
                    ))
                    .into());
                }
                let table: Vec<u128> = (0..dim).map(|k| (k + 1) % dim).collect();
                UnitarySpec::Permutation(Permutation::from_table(&table)?)
            }
            GateSpec::Permutation { table } => {
                let table: Vec<u128> = table.iter().map(|&k| k as u128).collect();
                UnitarySpec::Permutation(Permutation::from_table(&table)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Basis(u128),
    /// Uniform superposition over the first `n` basis states.
    Uniform(u128),
    Dump(StateDump),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateEvolveParams {
    pub precision: Precision,
    pub qubits: u32,
    pub initial: InitialState,
    /// Unitaries applied in order each cycle.
    pub step: Vec<GateSpec>,
    pub cycles: u64,
    pub policy: StabilityPolicy,
}

impl Default for StateEvolveParams {
    fn default() -> Self {
        let qubits = 6;
        Self {
            precision: Precision::Grid(Resolution::new(4).expect("valid")),
            qubits,
            initial: InitialState::Basis(0),
            step: (0..qubits).map(|target| GateSpec::H { target, bits: None }).collect(),
            cycles: 8,
            policy: StabilityPolicy::SupportCount,
        }
    }
}

// ---------------------------------------------------------------------------
// Preparation and execution
// ---------------------------------------------------------------------------

pub(crate) enum Prepared {
    DioSolve(DioSolveParams, DiophantinePolynomial),
    FieldRun(FieldRunParams, DiophantinePolynomial),
    DiagDemo(DiagDemoParams),
    ChaitinOmega(ChaitinOmegaParams),
    ChaitinRotate(ChaitinRotateParams, BigRational),
    Decohere(DecoherenceConfig),
    Meter(MeterParams),
    EstimateResources(ResourceParams, ResourceInputs),
    StateEvolve(StateEvolveParams),
}

pub(crate) fn prepare(config: &ExperimentConfig) -> Result<Prepared, CliError> {
    if !config.params.is_object() {
        return Err(invalid("params must be a JSON object"));
    }
    let p = &config.params;
    Ok(match config.experiment {
        Experiment::DioSolve => {
            let params: DioSolveParams = typed(p)?;
            let d = params.polynomial.build(params.arity)?;
            Prepared::DioSolve(params, d)
        }
        Experiment::FieldRun => {
            let params: FieldRunParams = typed(p)?;
            let d = params.polynomial.build(params.arity)?;
            Prepared::FieldRun(params, d)
        }
        Experiment::DiagDemo => Prepared::DiagDemo(typed(p)?),
        Experiment::ChaitinOmega => Prepared::ChaitinOmega(typed(p)?),
        Experiment::ChaitinRotate => {
            let params: ChaitinRotateParams = typed(p)?;
            let omega = parse_decimal(&params.omega).map_err(|e| invalid(format!("omega: {e}")))?;
            if params.shots.rungs().is_empty() {
                return Err(invalid("shots must not be empty"));
            }
            Prepared::ChaitinRotate(params, omega)
        }
        Experiment::Decohere => {
            let mut cfg: DecoherenceConfig = typed(p)?;
            cfg.seed = config.seed;
            Prepared::Decohere(cfg)
        }
        Experiment::Meter => Prepared::Meter(typed(p)?),
        Experiment::EstimateResources => {
            let params: ResourceParams = typed(p)?;
            let num = |field: &str, s: &str| parse_decimal(s).map_err(|e| invalid(format!("{field}: {e}")));
            let entropy = match &params.entropy {
                EntropyParam::SOverKb(s) => Entropy::SOverKb(*s),
                EntropyParam::Log2Multiplicity(s) => Entropy::Log2Multiplicity(num("entropy", s)?),
            };
            let inputs = ResourceInputs {
                entropy,
                mu: num("mu", &params.mu)?,
                e_over_hbar: num("e_over_hbar", &params.e_over_hbar)?,
            };
            Prepared::EstimateResources(params, inputs)
        }
        Experiment::StateEvolve => Prepared::StateEvolve(typed(p)?),
    })
}

impl Prepared {
    /// The parameters with all defaults filled in.
    pub(crate) fn params_echo(&self) -> Result<Value, CliError> {
        match self {
            Prepared::DioSolve(p, _) => to_value(p),
            Prepared::FieldRun(p, _) => to_value(p),
            Prepared::DiagDemo(p) => to_value(p),
            Prepared::ChaitinOmega(p) => to_value(p),
            Prepared::ChaitinRotate(p, _) => to_value(p),
            Prepared::Decohere(c) => to_value(c),
            Prepared::Meter(p) => to_value(p),
            Prepared::EstimateResources(p, _) => to_value(p),
            Prepared::StateEvolve(p) => to_value(p),
        }
    }

    pub(crate) fn execute(&self, seed: u64) -> Result<ExperimentOutput, CliError> {
        match self {
            Prepared::DioSolve(p, d) => dio_solve(p, d, seed),
            Prepared::FieldRun(p, d) => field_run(p, d),
            Prepared::DiagDemo(p) => Ok(ExperimentOutput::plain(to_value(&diagonal_demo(
                p.enum_limit,
                p.budget,
                p.tape_bound,
            )?)?)),
            Prepared::ChaitinOmega(p) => {
                let est = omega_lower_bound(p.max_len, p.budget)?;
                let mut v = est.to_json();
                v["omega"] = json!(format_rational(&est.value()));
                v["omega_f64"] = json!(est.to_f64());
                Ok(ExperimentOutput::plain(v))
            }
            Prepared::ChaitinRotate(p, omega) => chaitin_rotate(p, omega, seed),
            Prepared::Decohere(cfg) => {
                if let Err(e) = Coupling::new(cfg.coupling.cos.clone(), cfg.coupling.sin.clone()) {
                    return Err(e.into());
                }
                let report = decoherence_experiment(cfg)?;
                Ok(ExperimentOutput {
                    csv: Some(report.to_csv()),
                    result: to_value(&report)?,
                    jsonl: None,
                })
            }
            Prepared::Meter(p) => meter(p, seed),
            Prepared::EstimateResources(_, inputs) => {
                let e = estimate(inputs)?;
                let cmp = compare_reference(&e);
                Ok(ExperimentOutput::plain(json!({
                    "estimate": to_value(&e)?,
                    "log2_memory_bits": e.log2_memory_bits.total(),
                    "log2_ops_per_sec": e.log2_ops_per_sec.total(),
                    "comparison": to_value(&cmp)?,
                })))
            }
            Prepared::StateEvolve(p) => state_evolve(p, seed),
        }
    }
}

fn dio_solve(p: &DioSolveParams, d: &DiophantinePolynomial, seed: u64) -> Result<ExperimentOutput, CliError> {
    let r = resolution(p.mu)?;
    let dom = SearchDomain::new(d.arity(), p.cutoff)?;
    let mode = match p.mode {
        ModeParam::Deterministic => DecisionMode::Deterministic,
        ModeParam::Sampled => DecisionMode::Sampled { shots: p.shots, seed },
    };
    let decision = decide_solution(d, &dom, mode, r)?;
    let mut result = json!({
        "polynomial": d.to_string(),
        "decision": to_value(&decision)?,
    });
    if p.oracle {
        let oracle = classical_oracle(d, p.cutoff)?;
        result["oracle_agrees"] = json!(oracle.outcome == decision.outcome);
        result["oracle"] = to_value(&oracle)?;
    }
    Ok(ExperimentOutput::plain(result))
}

fn field_run(p: &FieldRunParams, d: &DiophantinePolynomial) -> Result<ExperimentOutput, CliError> {
    let dom = SearchDomain::new(d.arity(), p.cutoff)?;
    let cfg = TuringFieldConfig {
        machine_count: p.machine_count,
        message_rate: p.message_rate,
        steps_per_tick: p.steps_per_tick,
        tape_bound: p.tape_bound,
        tick_budget: p.tick_budget,
    };
    let outcome = field_search(d, &dom, &cfg)?;
    Ok(ExperimentOutput::plain(json!({
        "polynomial": d.to_string(),
        "domain": to_value(&dom)?,
        "halt_latency": cfg.halt_latency(),
        "result": to_value(&outcome)?,
    })))
}

fn chaitin_rotate(p: &ChaitinRotateParams, omega: &BigRational, seed: u64) -> Result<ExperimentOutput, CliError> {
    let r = resolution(p.mu)?;
    let root = Stream::new(seed);
    let rows: Vec<RotationResult> = p
        .shots
        .rungs()
        .iter()
        .enumerate()
        .map(|(i, &shots)| rotation_experiment(omega, r, shots, root.split(i as u64).next_u64()))
        .collect::<Result<_, _>>()?;
    let mut csv = String::from(RotationResult::CSV_HEADER) + "\n";
    for row in &rows {
        csv += &row.csv_row();
        csv.push('\n');
    }
    let runs: Vec<Value> = rows
        .iter()
        .map(|row| {
            let mut v = to_value(row)?;
            v["error"] = json!(row.error());
            Ok(v)
        })
        .collect::<Result<_, CliError>>()?;
    Ok(ExperimentOutput {
        result: json!({ "runs": runs }),
        csv: Some(csv),
        jsonl: None,
    })
}

fn meter(p: &MeterParams, seed: u64) -> Result<ExperimentOutput, CliError> {
    if p.trials == 0 {
        return Err(cmqm::Error::InvalidArgument("trials must be at least 1".into()).into());
    }
    let r = resolution(p.mu)?;
    let root = Stream::new(seed);
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut cross = 0u64;
    for i in 0..p.trials {
        let out = meter_demo(p.input, r, root.split(i).next_u64())?;
        let key = format!(
            "{}/{}",
            to_value(&out.spin)?.as_str().unwrap_or_default(),
            to_value(&out.pointer)?.as_str().unwrap_or_default()
        );
        *counts.entry(key).or_default() += 1;
        cross += out.is_cross_correlated() as u64;
    }
    Ok(ExperimentOutput::plain(json!({
        "trials": p.trials,
        "counts": counts,
        "cross_correlated": cross,
    })))
}

fn state_evolve(p: &StateEvolveParams, seed: u64) -> Result<ExperimentOutput, CliError> {
    if p.qubits == 0 || p.qubits > 127 {
        return Err(cmqm::Error::InvalidArgument("qubits must be in 1..=127".into()).into());
    }
    let dim = 1u128 << p.qubits;
    let initial = match &p.initial {
        InitialState::Basis(k) => StateVector::basis(dim, *k, p.precision)?,
        InitialState::Uniform(n) => uniform_superposition(*n, p.precision)?.embed(dim)?,
        InitialState::Dump(d) => {
            let s = StateVector::from_dump(d)?;
            if s.dimension() != dim {
                return Err(cmqm::Error::DimensionMismatch {
                    expected: dim,
                    actual: s.dimension(),
                }
                .into());
            }
            if s.precision() != p.precision {
                return Err(cmqm::Error::InvalidArgument("dump resolution differs from precision".into()).into());
            }
            s
        }
    };
    let step: Vec<UnitarySpec> = p
        .step
        .iter()
        .map(|g| g.build(dim, p.precision))
        .collect::<Result<_, _>>()?;
    for u in &step {
        u.check_dimension(dim)?;
    }
    let traj = evolve_cycle(&initial, &step, p.cycles, p.policy, seed)?;
    let final_state = match traj.final_state.to_dump() {
        Ok(d) => to_value(&d)?,
        Err(_) => {
            let amps: Vec<Value> = traj
                .final_state
                .exact_amplitudes()
                .iter()
                .map(|(k, a)| json!([k.to_string(), format_rational(&a.re), format_rational(&a.im)]))
                .collect();
            json!({ "dimension": dim.to_string(), "exact_amplitudes": amps })
        }
    };
    Ok(ExperimentOutput {
        result: json!({
            "cycles": to_value(&traj.cycles)?,
            "events": to_value(&traj.events)?,
            "final_state": final_state,
        }),
        csv: None,
        jsonl: Some(traj.events_jsonl()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(e: Experiment, params: Value) -> ExperimentConfig {
        ExperimentConfig {
            experiment: e,
            seed: 3,
            params,
        }
    }

    #[test]
    fn defaults_echo_round_trip() {
        for e in Experiment::ALL {
            let p = prepare(&config(e, json!({}))).unwrap();
            let echo = p.params_echo().unwrap();
            let again = prepare(&config(e, echo.clone())).unwrap().params_echo().unwrap();
            assert_eq!(echo, again, "{e:?}");
        }
    }

    #[test]
    fn unknown_params_are_rejected() {
        for e in Experiment::ALL {
            let err = prepare(&config(e, json!({"bogus": 1}))).err().unwrap();
            assert_eq!(err.exit_code(), 2, "{e:?}");
        }
    }

    #[test]
    fn polynomial_forms() {
        let text = prepare(&config(Experiment::DioSolve, json!({"polynomial": "x0 - 3"}))).unwrap();
        let terms = prepare(&config(
            Experiment::DioSolve,
            json!({"polynomial": {"arity": 1, "terms": [[1, [1]], [-3, [0]]]}}),
        ))
        .unwrap();
        let (Prepared::DioSolve(_, a), Prepared::DioSolve(_, b)) = (text, terms) else {
            panic!()
        };
        assert_eq!(a, b);
        assert!(prepare(&config(Experiment::DioSolve, json!({"polynomial": "x0 +* 3"}))).is_err());
    }

    #[test]
    fn gate_specs_parse() {
        let step = json!([
            {"gate": "x", "target": 0},
            {"gate": "h", "target": 1, "bits": 40},
            {"gate": "cnot", "control": 0, "target": 1},
            {"gate": "rotation", "cos": "3/5", "sin": "4/5", "target": 0, "controls": [1]},
            {"gate": "su2", "t": ["1/2", "0", "1"], "target": 1},
            {"gate": "phase", "target": 0, "re": "0", "im": "1"},
            {"gate": "cyclic_shift"},
            {"gate": "permutation", "table": [1, 0, 3, 2]}
        ]);
        let params: StateEvolveParams = typed(&json!({"qubits": 2, "step": step, "precision": "exact"})).unwrap();
        for g in &params.step {
            g.build(4, params.precision).unwrap();
        }
    }

    #[test]
    fn dump_initial_state_parses() {
        let params: StateEvolveParams = typed(&json!({
            "qubits": 1,
            "step": [{"gate": "x", "target": 0}],
            "initial": {"dump": {"mu": 4, "dimension": 2, "amplitudes": [[1, 4, 0]]}},
        }))
        .unwrap();
        let out = state_evolve(&params, 0).unwrap();
        assert_eq!(out.result["final_state"]["dimension"], 2);
    }

    #[test]
    fn meter_counts_sum_to_trials() {
        let out = prepare(&config(Experiment::Meter, json!({"trials": 50})))
            .unwrap()
            .execute(1)
            .unwrap();
        let total: u64 = out.result["counts"]
            .as_object()
            .unwrap()
            .values()
            .map(|v| v.as_u64().unwrap())
            .sum();
        assert_eq!(total, 50);
        assert_eq!(out.result["cross_correlated"], 0);
    }
}
