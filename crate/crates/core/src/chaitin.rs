//! Lower bounds on a halting probability and the rotation experiment.
//!
//! Programs are self-delimiting codewords `1^l 0 b`, where the body `b` has
//! `l >= 1` bits and is read as a binary program index (see
//! [`crate::turingfield`]). A codeword therefore has length `2l + 1`, and no
//! codeword is a prefix of another. Bodies that do not name a program in the
//! enumeration stand for a machine that halts at once. Every program runs on
//! the blank tape.
//!
//! `Omega_{L,t}` sums `2^-|p|` over codewords of length at most `L` whose
//! program halts within `t` steps. It is a dyadic rational and only ever
//! grows with `L` and `t`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fixedpoint::{pow2, round_half_even, ExactComplex, Resolution};
use crate::rng::Stream;
use crate::statevec::{
    apply_unitary, BornSampler, Precision, SingleTargetGate, StateVector, UnitarityCheck, UnitarySpec,
};
use crate::turingfield::{run_on_empty, MachineProgram, RunResult};

pub const MAX_CODE_LENGTH: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    /// `'0'`/`'1'` characters.
    pub bits: String,
    pub body_len: u32,
    pub body: u64,
}

impl Codeword {
    pub fn length(&self) -> u32 {
        2 * self.body_len + 1
    }

    pub fn program(&self) -> MachineProgram {
        MachineProgram::from_index(self.body as u128).unwrap_or_else(|_| MachineProgram::immediate_halt())
    }

    /// Parses a complete codeword; `None` if `bits` is not exactly one.
    pub fn parse(bits: &str) -> Option<Self> {
        let l = bits.chars().take_while(|&c| c == '1').count();
        let rest = bits.get(l..)?;
        let body = rest.strip_prefix('0')?;
        if l == 0 || body.len() != l || !body.chars().all(|c| c == '0' || c == '1') {
            return None;
        }
        Some(Self {
            bits: bits.to_string(),
            body_len: l as u32,
            body: u64::from_str_radix(body, 2).ok()?,
        })
    }
}

/// All codewords of length at most `max_len`, by length and then
/// lexicographically.
pub fn enumerate_prefix_free(max_len: u32) -> Result<Vec<Codeword>> {
    if !(1..=MAX_CODE_LENGTH).contains(&max_len) {
        return Err(Error::InvalidArgument(format!(
            "code length bound must be in 1..={MAX_CODE_LENGTH}"
        )));
    }
    let mut out = Vec::new();
    for l in 1..=(max_len - 1) / 2 {
        for body in 0..1u64 << l {
            let bits = format!("{}0{:0width$b}", "1".repeat(l as usize), body, width = l as usize);
            out.push(Codeword {
                bits,
                body_len: l,
                body,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaltingProgram {
    pub code: String,
    pub length: u32,
    pub index: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaEstimate {
    pub size_bound: u32,
    pub step_budget: u64,
    /// `value = numerator / 2^size_bound`.
    numerator: u64,
    pub programs: Vec<HaltingProgram>,
}

impl OmegaEstimate {
    pub fn value(&self) -> BigRational {
        BigRational::new(self.numerator.into(), BigInt::one() << self.size_bound)
    }

    /// `(num, k)` with `value = num / 2^k` in lowest terms (`(0, 0)` for zero).
    pub fn dyadic(&self) -> (u64, u32) {
        if self.numerator == 0 {
            return (0, 0);
        }
        let tz = self.numerator.trailing_zeros().min(self.size_bound);
        (self.numerator >> tz, self.size_bound - tz)
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / (1u64 << self.size_bound) as f64
    }

    /// `{"L", "t", "omega_num", "omega_den_pow2", "programs"}`.
    pub fn to_json(&self) -> Value {
        let (num, k) = self.dyadic();
        json!({
            "L": self.size_bound,
            "t": self.step_budget,
            "omega_num": num,
            "omega_den_pow2": k,
            "programs": self.programs,
        })
    }
}

/// `Omega_{L,t}`, with every program run in parallel and summed in codeword
/// order.
pub fn omega_lower_bound(max_len: u32, budget: u64) -> Result<OmegaEstimate> {
    if budget == 0 {
        return Err(Error::InvalidArgument("step budget must be at least 1".into()));
    }
    let codes = enumerate_prefix_free(max_len)?;
    let tape = usize::try_from(budget).unwrap_or(usize::MAX).saturating_add(1);
    let halting: Vec<Option<HaltingProgram>> = codes
        .par_iter()
        .map(|c| {
            match run_on_empty(&c.program(), budget, tape) {
                Ok(RunResult::Halted { steps, .. }) => Ok(Some(HaltingProgram {
                    code: c.bits.clone(),
                    length: c.length(),
                    index: c.body,
                    steps,
                })),
                Ok(RunResult::Exhausted { .. }) | Err(Error::TapeBoundExceeded(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let programs: Vec<HaltingProgram> = halting.into_iter().flatten().collect();
    let numerator = programs.iter().map(|p| 1u64 << (max_len - p.length)).sum();
    Ok(OmegaEstimate {
        size_bound: max_len,
        step_budget: budget,
        numerator,
        programs,
    })
}

// ---------------------------------------------------------------------------
// Rotation experiment
// ---------------------------------------------------------------------------

/// `(cos x, sin x)` for `|x| <= 1`, each within `2^-bits`, as dyadic
/// rationals with `bits` fractional bits.
pub fn cos_sin(x: &BigRational, bits: u32) -> Result<(BigRational, BigRational)> {
    if x.abs() > BigRational::one() {
        return Err(Error::InvalidArgument("angle must lie in [-1, 1]".into()));
    }
    let guard = bits as i64 + 8;
    let eps = pow2(-guard);
    let x2 = x * x;
    let mut cos = BigRational::zero();
    let mut sin = BigRational::zero();
    // term_k = (-1)^k x^(2k) / (2k)!  and  x^(2k+1) / (2k+1)!
    let mut tc = BigRational::one();
    let mut ts = x.clone();
    let mut k = 0i64;
    while tc.abs() > eps || ts.abs() > eps {
        cos += &tc;
        sin += &ts;
        tc = -(&tc * &x2) / BigRational::from_integer(((2 * k + 1) * (2 * k + 2)).into());
        ts = -(&ts * &x2) / BigRational::from_integer(((2 * k + 2) * (2 * k + 3)).into());
        k += 1;
        // round the terms to the guard grid so their sizes stay bounded
        if k % 8 == 0 {
            tc = BigRational::from_integer(round_half_even(&(&tc / &eps))) * &eps;
            ts = BigRational::from_integer(round_half_even(&(&ts / &eps))) * &eps;
        }
    }
    let unit = pow2(-(bits as i64));
    let snap = |v: &BigRational| BigRational::from_integer(round_half_even(&(v / &unit))) * &unit;
    Ok((snap(&cos), snap(&sin)))
}

/// Bits used for the entries of `U_C` at resolution `r`.
pub fn working_bits(r: Resolution) -> u32 {
    2 * r.mu() + 16
}

/// `exp(-i omega sigma_x) = [[c, -i s], [-i s, c]]` with `c`, `s` evaluated
/// to `bits` fractional bits.
pub fn build_u_c(omega: &BigRational, bits: u32) -> Result<UnitarySpec> {
    if omega.is_negative() || *omega >= BigRational::one() {
        return Err(Error::InvalidArgument("omega must lie in [0, 1)".into()));
    }
    let (c, s) = cos_sin(omega, bits)?;
    let z = BigRational::zero();
    let m = [
        ExactComplex::new(c.clone(), z.clone()),
        ExactComplex::new(z.clone(), -&s),
        ExactComplex::new(z.clone(), -&s),
        ExactComplex::new(c, z),
    ];
    let check = UnitarityCheck::WithinBits(bits.saturating_sub(2));
    Ok(UnitarySpec::SingleTarget(SingleTargetGate::checked(m, 0, vec![], check)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationResult {
    #[serde(with = "crate::fixedpoint::rational_string")]
    pub omega_input: BigRational,
    pub mu: u32,
    pub shots: u64,
    pub seed: u64,
    pub up_count: u64,
    pub estimate: f64,
    /// `1 / (2 sqrt(shots))`: the binomial error of the up fraction carried
    /// through `arccos(sqrt(.))`.
    pub standard_error: f64,
    /// Probability of up realized on the grid.
    pub realized_probability: f64,
    /// `|arccos(sqrt(q)) - omega|` for the realized probability `q`.
    pub quantization_floor: f64,
}

impl RotationResult {
    pub const CSV_HEADER: &'static str = "omega,mu,shots,estimate,stderr,floor";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.omega_input.to_f64().unwrap_or(f64::NAN),
            self.mu,
            self.shots,
            self.estimate,
            self.standard_error,
            self.quantization_floor
        )
    }

    pub fn error(&self) -> f64 {
        (self.estimate - self.omega_input.to_f64().unwrap_or(f64::NAN)).abs()
    }
}

const SHOTS_PER_STREAM: u64 = 1 << 16;

/// Prepares up, applies `U_C` on the `mu` grid and measures `sigma_z`
/// `shots` times.
pub fn rotation_experiment(omega: &BigRational, r: Resolution, shots: u64, seed: u64) -> Result<RotationResult> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let u = build_u_c(omega, working_bits(r))?;
    let state = apply_unitary(&StateVector::basis(2, 0, Precision::Grid(r))?, &u)?;
    let weights = state.grid_amplitudes().expect("grid state");
    let weight = |k: u128| weights.get(&k).map_or(BigUint::zero(), |a| a.magnitude_sq_units());
    let (w_up, w_down) = (weight(0), weight(1));
    let q = BigRational::new(
        BigInt::from(w_up.clone()),
        BigInt::from(&w_up + &w_down),
    )
    .to_f64()
    .expect("finite");

    let sampler = BornSampler::new(&state);
    let root = Stream::new(seed);
    let blocks = shots.div_ceil(SHOTS_PER_STREAM);
    let up_count: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut s = root.split(b);
            let n = SHOTS_PER_STREAM.min(shots - b * SHOTS_PER_STREAM);
            (0..n).filter(|_| sampler.sample(&mut s) == 0).count() as u64
        })
        .sum();

    let f = up_count as f64 / shots as f64;
    let omega_f = omega.to_f64().expect("finite");
    Ok(RotationResult {
        omega_input: omega.clone(),
        mu: r.mu(),
        shots,
        seed,
        up_count,
        estimate: f.sqrt().acos(),
        standard_error: 0.5 / (shots as f64).sqrt(),
        realized_probability: q,
        quantization_floor: (q.sqrt().acos() - omega_f).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn res(mu: u32) -> Resolution {
        Resolution::new(mu).unwrap()
    }

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    #[test]
    fn codewords_are_prefix_free() {
        assert!(enumerate_prefix_free(2).unwrap().is_empty());
        assert!(enumerate_prefix_free(0).is_err());
        assert!(enumerate_prefix_free(25).is_err());
        for max_len in [3, 7, 12] {
            let codes = enumerate_prefix_free(max_len).unwrap();
            for a in &codes {
                assert_eq!(Codeword::parse(&a.bits).as_ref(), Some(a));
                for b in &codes {
                    assert!(a == b || !b.bits.starts_with(&a.bits));
                }
            }
        }
    }

    #[test]
    fn codeword_count_matches_brute_force() {
        let mut brute = 0;
        for len in 1..=12u32 {
            for v in 0..1u32 << len {
                let s = format!("{v:0width$b}", width = len as usize);
                if Codeword::parse(&s).is_some() {
                    brute += 1;
                }
            }
        }
        assert_eq!(enumerate_prefix_free(12).unwrap().len(), brute);
        assert_eq!(brute, 62);
    }

    #[test]
    fn omega_small_cases() {
        assert!(omega_lower_bound(2, 100).unwrap().value().is_zero());
        let w = omega_lower_bound(3, 100).unwrap();
        assert_eq!(w.value(), BigRational::new(1.into(), 8.into()));
        assert_eq!(w.dyadic(), (1, 3));
        assert_eq!(w.programs.len(), 1);
        assert_eq!(w.to_json()["omega_den_pow2"], 3);
    }

    #[test]
    fn omega_is_monotone_and_below_one() {
        let mut grid = BTreeMap::new();
        for l in [3, 7, 10, 14] {
            for t in [1, 10, 100, 10_000] {
                let w = omega_lower_bound(l, t).unwrap();
                assert!(w.value() < BigRational::one());
                let (_, k) = w.dyadic();
                assert!(k <= l);
                grid.insert((l, t), w.value());
            }
        }
        for (&(l, t), v) in &grid {
            for (&(l2, t2), v2) in &grid {
                if l <= l2 && t <= t2 {
                    assert!(v <= v2, "({l},{t}) > ({l2},{t2})");
                }
            }
        }
        assert_eq!(omega_lower_bound(14, 10_000).unwrap(), omega_lower_bound(14, 10_000).unwrap());
    }

    #[test]
    fn trig_matches_f64() {
        for x in [0.0, 0.125, 0.5, 0.75, 0.999] {
            let q = crate::fixedpoint::rational_from_f64(x).unwrap();
            let (c, s) = cos_sin(&q, 80).unwrap();
            assert!((c.to_f64().unwrap() - x.cos()).abs() < 1e-15);
            assert!((s.to_f64().unwrap() - x.sin()).abs() < 1e-15);
            let unit = &c * &c + &s * &s - BigRational::one();
            assert!(unit.abs() < pow2(-76));
        }
    }

    #[test]
    fn u_c_properties() {
        let UnitarySpec::SingleTarget(g) = build_u_c(&BigRational::zero(), 64).unwrap() else {
            panic!()
        };
        assert_eq!(g.matrix()[0], ExactComplex::one());
        assert!(g.matrix()[1].is_zero());

        let UnitarySpec::SingleTarget(g) = build_u_c(&half(), working_bits(res(64))).unwrap() else {
            panic!()
        };
        let p_up = g.matrix()[0].magnitude_sq().to_f64().unwrap();
        assert!((p_up - 0.5f64.cos().powi(2)).abs() < 1e-15);
        let m = g.matrix();
        let tol = res(64).delta();
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let mut acc = &m[a].conj() * &m[b] + &m[2 + a].conj() * &m[2 + b];
            if a == b {
                acc = &acc - &ExactComplex::one();
            }
            assert!(acc.re.abs() <= tol && acc.im.abs() <= tol);
        }
        assert!(build_u_c(&BigRational::one(), 64).is_err());
    }

    #[test]
    fn zero_rotation_always_reads_up() {
        let r = rotation_experiment(&BigRational::zero(), res(16), 10_000, 3).unwrap();
        assert_eq!(r.up_count, 10_000);
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.quantization_floor, 0.0);
    }

    #[test]
    fn coarse_grid_floor_is_visible() {
        let r = rotation_experiment(&half(), res(8), 1 << 20, 11).unwrap();
        assert!(r.quantization_floor > 10.0 * r.standard_error);
        assert!(r.error() >= r.quantization_floor - 4.0 * r.standard_error);
        let target = r.realized_probability.sqrt().acos();
        assert!((r.estimate - target).abs() <= 4.0 * r.standard_error);
    }

    #[test]
    fn shots_ladder_converges_to_the_grid_target() {
        let omega = BigRational::new(3.into(), 8.into());
        for mu in [4, 6, 8] {
            for k in 0..6 {
                let shots = 4_000u64 << k;
                let r = rotation_experiment(&omega, res(mu), shots, 100 + k).unwrap();
                let target = r.realized_probability.sqrt().acos();
                assert!((r.estimate - target).abs() <= 4.5 * r.standard_error, "mu {mu} shots {shots}");
                assert!(r.error() >= r.quantization_floor - 4.5 * r.standard_error);
            }
        }
    }
}
