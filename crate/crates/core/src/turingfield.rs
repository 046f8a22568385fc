//! Bounded Turing machines and the finite Turing field.
//!
//! Machines are single-tape, deterministic, over the symbols `0`, `1` and
//! blank. States are numbered from 1; state 1 is the start state. A program
//! with `n` states has `3n` transitions, and each one writes a symbol, moves
//! the head one cell and either enters a state or halts.
//!
//! Inputs are written in binary, most significant bit first, with the head
//! on the leftmost bit (the number 0 is the single cell `0`). The output of
//! a halted run is the leftmost contiguous block of non-blank cells read as
//! a binary number, or 0 if the tape is blank. Every executed transition is
//! one step, including the one that halts.
//!
//! # Enumeration
//!
//! A program serializes to a canonical bit string: for each state in order
//! and each read symbol in the order `0, 1, blank`, the written symbol (2 bits:
//! `00`, `01`, `10`), the move (1 bit, `0` = left) and the next state in
//! `ceil(log2(n + 1))` bits, where 0 means halt. The program index is the
//! rank of that string among all valid canonical strings ordered by length,
//! then lexicographically. Indices fit in `u128` for up to
//! [`MAX_ENUMERATED_STATES`] states.

use std::collections::VecDeque;
use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diophantine::{DiophantinePolynomial, SearchDomain};
use crate::error::{Error, Result};

pub const MAX_ENUMERATED_STATES: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Zero,
    One,
    Blank,
}

impl Symbol {
    pub const ALL: [Symbol; 3] = [Symbol::Zero, Symbol::One, Symbol::Blank];

    pub fn code(self) -> u8 {
        match self {
            Symbol::Zero => 0,
            Symbol::One => 1,
            Symbol::Blank => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    L,
    R,
}

/// `next == None` halts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub write: Symbol,
    pub moves: Move,
    pub next: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MachineProgram {
    states: u32,
    transitions: Vec<Transition>,
}

fn digit_base(states: u32) -> u128 {
    6 * (states as u128 + 1)
}

fn class_size(states: u32) -> u128 {
    digit_base(states).pow(3 * states)
}

fn class_offset(states: u32) -> u128 {
    (1..states).map(class_size).sum()
}

fn next_bits(states: u32) -> u32 {
    32 - states.leading_zeros()
}

impl MachineProgram {
    /// `transitions[3 * (state - 1) + symbol.code()]`.
    pub fn new(states: u32, transitions: Vec<Transition>) -> Result<Self> {
        if states == 0 {
            return Err(Error::InvalidProgram("a machine needs at least one state".into()));
        }
        if transitions.len() != 3 * states as usize {
            return Err(Error::InvalidProgram(format!(
                "expected {} transitions, got {}",
                3 * states,
                transitions.len()
            )));
        }
        if let Some(t) = transitions.iter().find(|t| t.next.is_some_and(|s| s == 0 || s > states)) {
            return Err(Error::InvalidProgram(format!("next state {:?} out of range", t.next)));
        }
        Ok(Self { states, transitions })
    }

    /// One state; every transition rewrites the symbol it read and halts.
    pub fn immediate_halt() -> Self {
        Self::new(
            1,
            Symbol::ALL
                .iter()
                .map(|&s| Transition {
                    write: s,
                    moves: Move::R,
                    next: None,
                })
                .collect(),
        )
        .expect("well-formed")
    }

    /// One state that moves right forever, leaving the tape unchanged.
    pub fn right_runner() -> Self {
        Self::new(
            1,
            Symbol::ALL
                .iter()
                .map(|&s| Transition {
                    write: s,
                    moves: Move::R,
                    next: Some(1),
                })
                .collect(),
        )
        .expect("well-formed")
    }

    /// The two-state, two-symbol busy beaver champion (6 steps, four 1s).
    pub fn busy_beaver_2() -> Self {
        let t = |write, moves, next| Transition { write, moves, next };
        let halt0 = t(Symbol::Zero, Move::R, None);
        Self::new(
            2,
            vec![
                halt0,
                t(Symbol::One, Move::L, Some(2)),
                t(Symbol::One, Move::R, Some(2)),
                halt0,
                t(Symbol::One, Move::R, None),
                t(Symbol::One, Move::L, Some(1)),
            ],
        )
        .expect("well-formed")
    }

    pub fn states(&self) -> u32 {
        self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, state: u32, read: Symbol) -> Transition {
        self.transitions[3 * (state as usize - 1) + read.code() as usize]
    }

    fn digit(&self, t: &Transition) -> u128 {
        let next = t.next.unwrap_or(0) as u128;
        let mv = match t.moves {
            Move::L => 0,
            Move::R => 1,
        };
        (t.write.code() as u128 * 2 + mv) * (self.states as u128 + 1) + next
    }

    /// Enumeration index, or `None` beyond [`MAX_ENUMERATED_STATES`] states.
    pub fn index(&self) -> Option<u128> {
        if self.states > MAX_ENUMERATED_STATES {
            return None;
        }
        let base = digit_base(self.states);
        let rank = self
            .transitions
            .iter()
            .fold(0u128, |acc, t| acc * base + self.digit(t));
        Some(class_offset(self.states) + rank)
    }

    pub fn from_index(index: u128) -> Result<Self> {
        let mut rest = index;
        for states in 1..=MAX_ENUMERATED_STATES {
            let size = class_size(states);
            if rest < size {
                let base = digit_base(states);
                let per_move = states as u128 + 1;
                let mut digits = vec![0u128; 3 * states as usize];
                for d in digits.iter_mut().rev() {
                    *d = rest % base;
                    rest /= base;
                }
                let transitions = digits
                    .into_iter()
                    .map(|d| {
                        let next = (d % per_move) as u32;
                        let wm = d / per_move;
                        Transition {
                            write: Symbol::from_code((wm / 2) as u8).expect("digit below base"),
                            moves: if wm.is_multiple_of(2) { Move::L } else { Move::R },
                            next: (next > 0).then_some(next),
                        }
                    })
                    .collect();
                return Self::new(states, transitions);
            }
            rest -= size;
        }
        Err(Error::InvalidProgramIndex(format!(
            "{index} is beyond the {MAX_ENUMERATED_STATES}-state enumeration"
        )))
    }

    /// The canonical bit string.
    pub fn to_bits(&self) -> Vec<bool> {
        let nb = next_bits(self.states);
        let mut bits = Vec::with_capacity(self.transitions.len() * (3 + nb as usize));
        for t in &self.transitions {
            let w = t.write.code();
            bits.push(w & 2 != 0);
            bits.push(w & 1 != 0);
            bits.push(t.moves == Move::R);
            let next = t.next.unwrap_or(0);
            for k in (0..nb).rev() {
                bits.push(next >> k & 1 == 1);
            }
        }
        bits
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let bad = || Error::InvalidProgram("not a canonical program string".into());
        let states = (1..=1024u32)
            .find(|&n| 3 * n as usize * (3 + next_bits(n) as usize) >= bits.len())
            .ok_or_else(bad)?;
        let nb = next_bits(states) as usize;
        if 3 * states as usize * (3 + nb) != bits.len() {
            return Err(bad());
        }
        let transitions = bits
            .chunks(3 + nb)
            .map(|c| {
                let w = (c[0] as u8) << 1 | c[1] as u8;
                let write = Symbol::from_code(w).ok_or_else(bad)?;
                let next = c[3..].iter().fold(0u32, |acc, &b| acc << 1 | b as u32);
                Ok(Transition {
                    write,
                    moves: if c[2] { Move::R } else { Move::L },
                    next: (next > 0).then_some(next),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(states, transitions)
    }

    /// `{"states": n, "transitions": [[state, symbol, write, move, next], ...]}`
    /// with symbols `0`, `1`, `2` (blank), moves `"L"`/`"R"` and next a state
    /// number or `"H"`.
    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = (1..=self.states)
            .flat_map(|s| Symbol::ALL.map(move |sym| (s, sym)))
            .map(|(s, sym)| {
                let t = self.transition(s, sym);
                let mv = match t.moves {
                    Move::L => "L",
                    Move::R => "R",
                };
                let next = t.next.map_or(json!("H"), |n| json!(n));
                json!([s, sym.code(), t.write.code(), mv, next])
            })
            .collect();
        json!({ "states": self.states, "transitions": rows })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidProgram(m.to_string());
        let states = v
            .get("states")
            .and_then(Value::as_u64)
            .and_then(|s| u32::try_from(s).ok())
            .filter(|&s| s > 0)
            .ok_or_else(|| bad("\"states\" must be a positive integer"))?;
        let rows = v
            .get("transitions")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing \"transitions\" array"))?;
        let mut table: Vec<Option<Transition>> = vec![None; 3 * states as usize];
        for row in rows {
            let r = row
                .as_array()
                .filter(|r| r.len() == 5)
                .ok_or_else(|| bad("transition rows have five entries"))?;
            let state = r[0].as_u64().filter(|&s| s >= 1 && s <= states as u64).ok_or_else(|| bad("bad state"))?;
            let sym = r[1]
                .as_u64()
                .and_then(|c| u8::try_from(c).ok())
                .and_then(Symbol::from_code)
                .ok_or_else(|| bad("bad read symbol"))?;
            let write = r[2]
                .as_u64()
                .and_then(|c| u8::try_from(c).ok())
                .and_then(Symbol::from_code)
                .ok_or_else(|| bad("bad write symbol"))?;
            let moves = match r[3].as_str() {
                Some("L") => Move::L,
                Some("R") => Move::R,
                _ => return Err(bad("move must be \"L\" or \"R\"")),
            };
            let next = match &r[4] {
                Value::String(s) if s == "H" => None,
                n => Some(
                    n.as_u64()
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| bad("next must be a state or \"H\""))?,
                ),
            };
            let slot = &mut table[3 * (state as usize - 1) + sym.code() as usize];
            if slot.is_some() {
                return Err(bad("duplicate transition"));
            }
            *slot = Some(Transition { write, moves, next });
        }
        let transitions = table
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("transition table is not total"))?;
        Self::new(states, transitions)
    }
}

impl fmt::Display for MachineProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = |s: Symbol| match s {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Blank => '_',
        };
        for (k, t) in self.transitions.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            let next = t.next.map_or("H".to_string(), |n| n.to_string());
            write!(
                f,
                "{}{}:{}{:?}{}",
                k / 3 + 1,
                sym(Symbol::ALL[k % 3]),
                sym(t.write),
                t.moves,
                next
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunResult {
    Halted {
        #[serde(with = "biguint_decimal")]
        output: BigUint,
        steps: u64,
    },
    Exhausted {
        budget: u64,
    },
}

mod biguint_decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Tape cells for `input`, most significant bit first.
pub fn encode_input(input: &BigUint) -> Vec<Symbol> {
    if input.is_zero() {
        return vec![Symbol::Zero];
    }
    (0..input.bits())
        .rev()
        .map(|k| if input.bit(k) { Symbol::One } else { Symbol::Zero })
        .collect()
}

fn decode_output(tape: &VecDeque<Symbol>) -> BigUint {
    let mut out = BigUint::zero();
    for s in tape.iter().skip_while(|&&s| s == Symbol::Blank) {
        match s {
            Symbol::Blank => break,
            Symbol::Zero => out <<= 1,
            Symbol::One => out = (out << 1) | BigUint::from(1u32),
        }
    }
    out
}

/// One position of a traced run: the state about to act and the head cell,
/// relative to the initial head position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub state: u32,
    pub head: i64,
    pub read: Symbol,
}

fn execute(
    p: &MachineProgram,
    cells: Vec<Symbol>,
    budget: u64,
    tape_bound: usize,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<RunResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument("step budget must be at least 1".into()));
    }
    let mut tape: VecDeque<Symbol> = if cells.is_empty() {
        VecDeque::from([Symbol::Blank])
    } else {
        cells.into()
    };
    if tape.len() > tape_bound {
        return Err(Error::TapeBoundExceeded(tape_bound));
    }
    let mut head = 0usize;
    let mut origin = 0i64;
    let mut state = 1u32;
    for step in 1..=budget {
        let read = tape[head];
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(TraceStep {
                state,
                head: head as i64 - origin,
                read,
            });
        }
        let t = p.transition(state, read);
        tape[head] = t.write;
        match t.moves {
            Move::L if head == 0 => {
                if t.next.is_some() {
                    tape.push_front(Symbol::Blank);
                    origin += 1;
                }
            }
            Move::L => head -= 1,
            Move::R => {
                head += 1;
                if head == tape.len() && t.next.is_some() {
                    tape.push_back(Symbol::Blank);
                }
            }
        }
        match t.next {
            None => {
                return Ok(RunResult::Halted {
                    output: decode_output(&tape),
                    steps: step,
                })
            }
            Some(s) => state = s,
        }
        if tape.len() > tape_bound {
            return Err(Error::TapeBoundExceeded(tape_bound));
        }
    }
    Ok(RunResult::Exhausted { budget })
}

/// Runs `p` on `input` for at most `budget` steps. Fails with
/// `TapeBoundExceeded` once the visited span of the tape (input included)
/// exceeds `tape_bound` cells.
pub fn run_machine(p: &MachineProgram, input: &BigUint, budget: u64, tape_bound: usize) -> Result<RunResult> {
    execute(p, encode_input(input), budget, tape_bound, None)
}

/// Runs `p` on an all-blank tape.
pub fn run_on_empty(p: &MachineProgram, budget: u64, tape_bound: usize) -> Result<RunResult> {
    execute(p, Vec::new(), budget, tape_bound, None)
}

/// Like [`run_machine`], also returning every configuration visited.
pub fn trace_machine(
    p: &MachineProgram,
    cells: Vec<Symbol>,
    budget: u64,
    tape_bound: usize,
) -> Result<(RunResult, Vec<TraceStep>)> {
    let mut trace = Vec::new();
    let r = execute(p, cells, budget, tape_bound, Some(&mut trace))?;
    Ok((r, trace))
}

/// Budget-bounded halting: `Halts` is certain, `Unknown` is not a proof of
/// divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HaltVerdict {
    #[serde(rename = "1")]
    Halts,
    #[serde(rename = "0_unknown")]
    Unknown,
}

impl fmt::Display for HaltVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HaltVerdict::Halts => "1",
            HaltVerdict::Unknown => "0_unknown",
        })
    }
}

/// Running out of tape counts as `Unknown`.
pub fn bounded_halting(p_index: u128, input: &BigUint, budget: u64, tape_bound: usize) -> Result<HaltVerdict> {
    let p = MachineProgram::from_index(p_index)?;
    Ok(match run_machine(&p, input, budget, tape_bound) {
        Ok(RunResult::Halted { .. }) => HaltVerdict::Halts,
        Ok(RunResult::Exhausted { .. }) | Err(Error::TapeBoundExceeded(_)) => HaltVerdict::Unknown,
        Err(e) => return Err(e),
    })
}

// ---------------------------------------------------------------------------
// Diagonalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramBehavior {
    Halted {
        #[serde(with = "biguint_decimal")]
        output: BigUint,
        steps: u64,
    },
    NotHaltedWithinBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalBehavior {
    /// `h(n, n) = 1`, so `r` loops on `n`.
    Diverges,
    /// `h(n, n)` read as 0, so `r(n) = 0`.
    ReturnsZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowStatus {
    Decided,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalRow {
    pub n: u64,
    pub hb: HaltVerdict,
    pub program: ProgramBehavior,
    pub r: DiagonalBehavior,
    pub status: RowStatus,
    /// For decided rows: program `n` halts on `n` while `r` does not.
    pub differs: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalTable {
    pub budget: u64,
    pub rows: Vec<DiagonalRow>,
    pub decided: usize,
    pub contradictions: usize,
}

/// Program `n` on input `n` for `n < enum_limit`, against the diagonal
/// function `r(n) = 0 if h(n, n) = 0, loop otherwise`.
pub fn diagonal_demo(enum_limit: u64, budget: u64, tape_bound: usize) -> Result<DiagonalTable> {
    if enum_limit == 0 {
        return Err(Error::InvalidArgument("enum_limit must be at least 1".into()));
    }
    let rows: Vec<DiagonalRow> = (0..enum_limit)
        .into_par_iter()
        .map(|n| {
            let p = MachineProgram::from_index(n as u128)?;
            let program = match run_machine(&p, &BigUint::from(n), budget, tape_bound) {
                Ok(RunResult::Halted { output, steps }) => ProgramBehavior::Halted { output, steps },
                Ok(RunResult::Exhausted { .. }) | Err(Error::TapeBoundExceeded(_)) => {
                    ProgramBehavior::NotHaltedWithinBudget
                }
                Err(e) => return Err(e),
            };
            let hb = bounded_halting(n as u128, &BigUint::from(n), budget, tape_bound)?;
            let (r, status) = match hb {
                HaltVerdict::Halts => (DiagonalBehavior::Diverges, RowStatus::Decided),
                HaltVerdict::Unknown => (DiagonalBehavior::ReturnsZero, RowStatus::Undecided),
            };
            let differs = matches!(
                (&program, r),
                (ProgramBehavior::Halted { .. }, DiagonalBehavior::Diverges)
            );
            Ok(DiagonalRow {
                n,
                hb,
                program,
                r,
                status,
                differs,
            })
        })
        .collect::<Result<_>>()?;
    let decided = rows.iter().filter(|r| r.status == RowStatus::Decided).count();
    let contradictions = rows
        .iter()
        .filter(|r| r.status == RowStatus::Decided && !r.differs)
        .count();
    Ok(DiagonalTable {
        budget,
        rows,
        decided,
        contradictions,
    })
}

// ---------------------------------------------------------------------------
// Turing field
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuringFieldConfig {
    pub machine_count: u64,
    pub message_rate: u64,
    pub steps_per_tick: u64,
    /// Cells available to a worker; a candidate whose binary encoding
    /// (all coordinates) is longer cannot be loaded.
    pub tape_bound: u64,
    pub tick_budget: u64,
}

impl Default for TuringFieldConfig {
    fn default() -> Self {
        Self {
            machine_count: 4,
            message_rate: 1,
            steps_per_tick: 1,
            tape_bound: 1 << 16,
            tick_budget: 1 << 20,
        }
    }
}

impl TuringFieldConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("machine_count", self.machine_count),
            ("message_rate", self.message_rate),
            ("steps_per_tick", self.steps_per_tick),
            ("tape_bound", self.tape_bound),
            ("tick_budget", self.tick_budget),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::InvalidArgument(format!("{name} must be at least 1"))),
            None => Ok(()),
        }
    }

    /// Ticks for a halt message to reach all other machines.
    pub fn halt_latency(&self) -> u64 {
        (self.machine_count - 1).div_ceil(self.message_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionReason {
    TickBudget,
    TapeBound,
    DomainExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FieldResult {
    FirstSolution {
        x: Vec<u64>,
        discovery_tick: u64,
        global_halt_tick: u64,
        candidates_evaluated: u64,
    },
    Exhausted {
        reason: ExhaustionReason,
        ticks: u64,
        candidates_evaluated: u64,
    },
}

fn encoded_len(x: &[u64]) -> u64 {
    x.iter().map(|&v| (64 - v.leading_zeros()).max(1) as u64).sum()
}

/// Searches `dom` for a root of `D` with a field of `machine_count`
/// workers.
///
/// Candidates are dealt round-robin in graded-lex order, so worker `w` holds
/// candidates `w, w + M, w + 2M, ...` and evaluates `steps_per_tick` of them
/// per tick. All tick-`t` evaluations finish before tick `t + 1` begins. A
/// discovery broadcasts halt messages around a ring at `message_rate` per
/// tick. Same-tick discoveries resolve to the graded-lex smallest root.
pub fn field_search(d: &DiophantinePolynomial, dom: &SearchDomain, cfg: &TuringFieldConfig) -> Result<FieldResult> {
    field_search_with(d, dom, cfg, true)
}

/// [`field_search`] with worker evaluation on the calling thread only.
pub fn field_search_sequential(
    d: &DiophantinePolynomial,
    dom: &SearchDomain,
    cfg: &TuringFieldConfig,
) -> Result<FieldResult> {
    field_search_with(d, dom, cfg, false)
}

enum TickOutcome {
    Root(usize),
    TapeBound(usize),
}

fn field_search_with(
    d: &DiophantinePolynomial,
    dom: &SearchDomain,
    cfg: &TuringFieldConfig,
    parallel: bool,
) -> Result<FieldResult> {
    cfg.validate()?;
    let d = if d.arity() < dom.arity {
        d.with_arity(dom.arity)?
    } else if d.arity() > dom.arity {
        return Err(Error::InvalidArgument("polynomial arity exceeds domain arity".into()));
    } else {
        d.clone()
    };
    let points = dom.points();
    let m = cfg.machine_count as usize;
    let spt = cfg.steps_per_tick as usize;
    let per_worker = points.len().div_ceil(m);

    // Worker w's local slot j holds global candidate j * m + w.
    let work = |w: usize, tick: usize| -> Option<TickOutcome> {
        let lo = (tick - 1) * spt;
        let hi = (lo + spt).min(per_worker);
        (lo..hi)
            .map(|j| j * m + w)
            .take_while(|&i| i < points.len())
            .find_map(|i| {
                if encoded_len(&points[i]) > cfg.tape_bound {
                    Some(TickOutcome::TapeBound(i))
                } else if d.eval(&points[i]).is_zero() {
                    Some(TickOutcome::Root(i))
                } else {
                    None
                }
            })
    };

    let max_ticks = per_worker.div_ceil(spt) as u64;
    for tick in 1..=cfg.tick_budget.min(max_ticks) {
        let t = tick as usize;
        let outcomes: Vec<Option<TickOutcome>> = if parallel {
            (0..m).into_par_iter().map(|w| work(w, t)).collect()
        } else {
            (0..m).map(|w| work(w, t)).collect()
        };
        let evaluated = ((t * spt).min(per_worker) * m).min(points.len()) as u64;
        let root = outcomes
            .iter()
            .filter_map(|o| match o {
                Some(TickOutcome::Root(i)) => Some(*i),
                _ => None,
            })
            .min();
        let starved = outcomes
            .iter()
            .filter_map(|o| match o {
                Some(TickOutcome::TapeBound(i)) => Some(*i),
                _ => None,
            })
            .min();
        match (root, starved) {
            (Some(i), s) if s.is_none_or(|s| i < s) => {
                // ring broadcast: V deliveries per tick after discovery
                let mut informed = 1u64;
                let mut halt_tick = tick;
                while informed < cfg.machine_count {
                    halt_tick += 1;
                    informed = (informed + cfg.message_rate).min(cfg.machine_count);
                }
                return Ok(FieldResult::FirstSolution {
                    x: points[i].clone(),
                    discovery_tick: tick,
                    global_halt_tick: halt_tick,
                    candidates_evaluated: evaluated,
                });
            }
            (_, Some(_)) => {
                return Ok(FieldResult::Exhausted {
                    reason: ExhaustionReason::TapeBound,
                    ticks: tick,
                    candidates_evaluated: evaluated,
                })
            }
            _ => {}
        }
    }
    let (reason, ticks) = if cfg.tick_budget < max_ticks {
        (ExhaustionReason::TickBudget, cfg.tick_budget)
    } else {
        (ExhaustionReason::DomainExhausted, max_ticks)
    };
    let evaluated = ((ticks as usize * spt).min(per_worker) * m).min(points.len()) as u64;
    Ok(FieldResult::Exhausted {
        reason,
        ticks,
        candidates_evaluated: evaluated,
    })
}

// ---------------------------------------------------------------------------
// Sums of squares
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SquaresResult {
    /// `value` is the smallest natural number that is not a sum of `x`
    /// squares.
    Halted { value: u64, candidates: u64 },
    Exhausted { candidates: u64 },
}

struct SquareTables {
    limit: u64,
    two: Vec<bool>,
}

impl SquareTables {
    fn new(limit: u64) -> Self {
        let mut two = vec![false; limit as usize + 1];
        let mut a = 0u64;
        while a * a <= limit {
            let mut b = a;
            while a * a + b * b <= limit {
                two[(a * a + b * b) as usize] = true;
                b += 1;
            }
            a += 1;
        }
        Self { limit, two }
    }

    fn is_sum(&self, n: u64, k: u64) -> bool {
        debug_assert!(n <= self.limit);
        match k {
            0 => n == 0,
            1 => {
                let r = n.isqrt();
                r * r == n
            }
            2 => self.two[n as usize],
            _ => {
                let mut a = 0u64;
                while a * a <= n {
                    if self.is_sum(n - a * a, k - 1) {
                        return true;
                    }
                    a += 1;
                }
                false
            }
        }
    }

    /// Smallest `k <= cap` with `n` a sum of `k` squares.
    fn fewest(&self, n: u64, cap: u64) -> Option<u64> {
        (0..=cap).find(|&k| self.is_sum(n, k))
    }
}

/// Searches `0, 1, 2, ...` for the smallest number that is not a sum of `x`
/// squares of natural numbers, checking at most `budget` candidates.
pub fn four_squares_demo(x: u64, budget: u64) -> Result<SquaresResult> {
    if x == 0 || budget == 0 {
        return Err(Error::InvalidArgument("x and budget must be at least 1".into()));
    }
    let tables = SquareTables::new(budget - 1);
    for n in 0..budget {
        if tables.fewest(n, x).is_none() {
            return Ok(SquaresResult::Halted {
                value: n,
                candidates: n + 1,
            });
        }
    }
    Ok(SquaresResult::Exhausted { candidates: budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::classical_oracle;
    use crate::diophantine::Outcome;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn immediate_halt_returns_its_input() {
        let p = MachineProgram::immediate_halt();
        for n in [0u64, 1, 5, 1234567] {
            assert_eq!(
                run_machine(&p, &big(n), 1, 64).unwrap(),
                RunResult::Halted { output: big(n), steps: 1 }
            );
        }
    }

    #[test]
    fn right_runner_never_halts() {
        let p = MachineProgram::right_runner();
        for budget in [1u64, 10, 1000, 100_000] {
            assert_eq!(
                run_machine(&p, &big(9), budget, budget as usize + 8).unwrap(),
                RunResult::Exhausted { budget }
            );
        }
        assert_eq!(
            run_machine(&p, &big(9), 1000, 100),
            Err(Error::TapeBoundExceeded(100))
        );
        assert_eq!(bounded_halting(p.index().unwrap(), &big(3), 1_000_000, 2_000_000).unwrap(), HaltVerdict::Unknown);
    }

    #[test]
    fn busy_beaver_hand_trace() {
        let p = MachineProgram::busy_beaver_2();
        let (r, trace) = trace_machine(&p, vec![], 100, 100).unwrap();
        assert_eq!(r, RunResult::Halted { output: big(0b1111), steps: 6 });
        // (state, head) worked out on paper: A=1, B=2
        let expected = [(1, 0), (2, 1), (1, 0), (2, -1), (1, -2), (2, -1)];
        let got: Vec<_> = trace.iter().map(|t| (t.state, t.head)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn enumeration_round_trip_and_order() {
        for i in 0..10_000u128 {
            let p = MachineProgram::from_index(i).unwrap();
            assert_eq!(p.index(), Some(i));
            assert_eq!(MachineProgram::from_bits(&p.to_bits()).unwrap(), p);
        }
        // rank = length-then-lex order of canonical strings
        let key = |i: u128| {
            let b = MachineProgram::from_index(i).unwrap().to_bits();
            (b.len(), b)
        };
        for i in 0..3000u128 {
            assert!(key(i) < key(i + 1), "order breaks at {i}");
        }
        let last = class_offset(MAX_ENUMERATED_STATES) + class_size(MAX_ENUMERATED_STATES) - 1;
        assert_eq!(MachineProgram::from_index(last).unwrap().index(), Some(last));
        assert!(matches!(MachineProgram::from_index(last + 1), Err(Error::InvalidProgramIndex(_))));
        assert!(MachineProgram::from_bits(&[true; 12]).is_err());
    }

    #[test]
    fn json_round_trip() {
        for p in [MachineProgram::busy_beaver_2(), MachineProgram::from_index(987654321).unwrap()] {
            assert_eq!(MachineProgram::from_json(&p.to_json()).unwrap(), p);
        }
        let mut v = MachineProgram::busy_beaver_2().to_json();
        v["transitions"].as_array_mut().unwrap().pop();
        assert!(MachineProgram::from_json(&v).is_err());
    }

    #[test]
    fn bounded_halting_is_monotone() {
        let mut s = crate::rng::Stream::new(77);
        for _ in 0..200 {
            let idx = s.below_u128(class_offset(3) + class_size(3));
            let input = big(s.below_u64(64));
            let lo = bounded_halting(idx, &input, 100, 20_000).unwrap();
            let hi = bounded_halting(idx, &input, 10_000, 20_000).unwrap();
            assert!(!(lo == HaltVerdict::Halts && hi == HaltVerdict::Unknown), "program {idx}");
        }
    }

    #[test]
    fn diagonal_table_has_no_contradictions() {
        let t = diagonal_demo(50, 10_000, 20_000).unwrap();
        assert_eq!(t.rows.len(), 50);
        assert!(t.decided > 0 && t.decided < 50);
        assert_eq!(t.contradictions, 0);
        let row0 = &t.rows[0];
        assert_eq!(row0.status, RowStatus::Decided);
        assert_eq!(row0.r, DiagonalBehavior::Diverges);
        for r in &t.rows {
            if r.status == RowStatus::Undecided {
                assert_eq!(r.r, DiagonalBehavior::ReturnsZero);
            }
        }
    }

    #[test]
    fn field_finds_the_oracle_root() {
        let d = DiophantinePolynomial::parse("x0^2 + x1^2 - 25").unwrap();
        let dom = SearchDomain::new(2, 10).unwrap();
        let cfg = TuringFieldConfig {
            machine_count: 4,
            message_rate: 1,
            ..Default::default()
        };
        match field_search(&d, &dom, &cfg).unwrap() {
            FieldResult::FirstSolution { x, discovery_tick, global_halt_tick, .. } => {
                assert_eq!(x, vec![0, 5]);
                assert_eq!(global_halt_tick, discovery_tick + 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn field_without_roots_is_exhausted() {
        let d = DiophantinePolynomial::parse("x0^2 + 1").unwrap();
        let dom = SearchDomain::new(1, 100).unwrap();
        for m in [1, 3, 7] {
            let cfg = TuringFieldConfig {
                machine_count: m,
                ..Default::default()
            };
            assert!(matches!(
                field_search(&d, &dom, &cfg).unwrap(),
                FieldResult::Exhausted { reason: ExhaustionReason::DomainExhausted, .. }
            ));
        }
    }

    #[test]
    fn single_machine_is_a_sequential_scan() {
        let d = DiophantinePolynomial::parse("x0*x1 - 12").unwrap();
        let dom = SearchDomain::new(2, 20).unwrap();
        let cfg = TuringFieldConfig {
            machine_count: 1,
            ..Default::default()
        };
        let FieldResult::FirstSolution { x, discovery_tick, global_halt_tick, .. } = field_search(&d, &dom, &cfg).unwrap() else {
            panic!()
        };
        let Outcome::SolutionFound(y) = classical_oracle(&d, 20).unwrap().outcome else { panic!() };
        assert_eq!(x, y);
        let position = dom.points().iter().position(|p| *p == x).unwrap() as u64;
        assert_eq!(discovery_tick, position + 1);
        assert_eq!(global_halt_tick, discovery_tick);
    }

    #[test]
    fn field_is_deterministic_across_parallelism() {
        let d = DiophantinePolynomial::parse("x0^2 - 2*x1 - 7").unwrap();
        let dom = SearchDomain::new(2, 30).unwrap();
        for (m, v, spt) in [(1, 1, 1), (5, 2, 3), (16, 3, 1), (64, 64, 2)] {
            let cfg = TuringFieldConfig {
                machine_count: m,
                message_rate: v,
                steps_per_tick: spt,
                ..Default::default()
            };
            let a = field_search(&d, &dom, &cfg).unwrap();
            assert_eq!(a, field_search(&d, &dom, &cfg).unwrap());
            assert_eq!(a, field_search_sequential(&d, &dom, &cfg).unwrap());
        }
    }

    #[test]
    fn field_limits() {
        let d = DiophantinePolynomial::parse("x0 - 90").unwrap();
        let dom = SearchDomain::new(1, 100).unwrap();
        let cfg = TuringFieldConfig {
            machine_count: 2,
            tick_budget: 10,
            ..Default::default()
        };
        assert!(matches!(
            field_search(&d, &dom, &cfg).unwrap(),
            FieldResult::Exhausted { reason: ExhaustionReason::TickBudget, ticks: 10, candidates_evaluated: 20 }
        ));
        let cfg = TuringFieldConfig {
            machine_count: 2,
            tape_bound: 5,
            ..Default::default()
        };
        assert!(matches!(
            field_search(&d, &dom, &cfg).unwrap(),
            FieldResult::Exhausted { reason: ExhaustionReason::TapeBound, .. }
        ));
        assert!(TuringFieldConfig { message_rate: 0, ..Default::default() }.validate().is_err());
    }

    fn smallest_non_sum(x: usize) -> u64 {
        let mut sums = std::collections::BTreeSet::from([0u64]);
        for _ in 0..x {
            sums = sums
                .iter()
                .flat_map(|&s| (0..12u64).map(move |a| s + a * a))
                .filter(|&v| v <= 100)
                .collect();
        }
        (0..).find(|n| !sums.contains(n)).unwrap()
    }

    #[test]
    fn sums_of_squares() {
        for x in 1..=3u64 {
            assert_eq!(
                four_squares_demo(x, 1000).unwrap(),
                SquaresResult::Halted {
                    value: smallest_non_sum(x as usize),
                    candidates: smallest_non_sum(x as usize) + 1
                }
            );
        }
        assert!(matches!(four_squares_demo(1, 10).unwrap(), SquaresResult::Halted { value: 2, .. }));
        assert!(matches!(four_squares_demo(2, 10).unwrap(), SquaresResult::Halted { value: 3, .. }));
        assert_eq!(four_squares_demo(4, 100_000).unwrap(), SquaresResult::Exhausted { candidates: 100_000 });
    }
}
