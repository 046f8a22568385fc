use std::collections::BTreeMap;

use cmqm::fixedpoint::{quantize, ExactComplex, FixedComplex, Resolution};
use cmqm::rng::Stream;
use cmqm::statevec::{
    apply_circuit, gates, resolution_pass, ExactState, Precision, StateVector, UnitarySpec,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn res(mu: u32) -> Resolution {
    Resolution::new(mu).unwrap()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn mu_strategy() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![2u32, 4, 6, 8, 16, 32, 64, 128])
}

fn component() -> impl Strategy<Value = BigRational> {
    (-4_000_000i64..=4_000_000, 1i64..=1_000_000).prop_map(|(n, d)| rat(n, d))
}

fn small_complex() -> impl Strategy<Value = ExactComplex> {
    (-1000i64..=1000, -1000i64..=1000, 501i64..=1000).prop_map(|(a, b, d)| ExactComplex::from_ratio(a, b, d))
}

/// Plain complex arithmetic on pairs, independent of the library.
#[derive(Clone, Debug, PartialEq)]
struct C(BigRational, BigRational);

impl C {
    fn zero() -> Self {
        C(BigRational::zero(), BigRational::zero())
    }
    fn mul(&self, o: &C) -> C {
        C(&self.0 * &o.0 - &self.1 * &o.1, &self.0 * &o.1 + &self.1 * &o.0)
    }
    fn add(&self, o: &C) -> C {
        C(&self.0 + &o.0, &self.1 + &o.1)
    }
    fn abs2(&self) -> BigRational {
        &self.0 * &self.0 + &self.1 * &self.1
    }
}

/// The full `2^n x 2^n` matrix of a controlled single-target gate, built
/// from its definition.
fn dense(n: u32, g: &UnitarySpec) -> Vec<Vec<C>> {
    let UnitarySpec::SingleTarget(g) = g else {
        panic!("random circuits use single-target gates only")
    };
    let dim = 1usize << n;
    let m: Vec<C> = g.matrix().iter().map(|z| C(z.re.clone(), z.im.clone())).collect();
    let t = g.target();
    let mut out = vec![vec![C::zero(); dim]; dim];
    for col in 0..dim {
        let active = g.controls().iter().all(|&c| col >> c & 1 == 1);
        if !active {
            out[col][col] = C(BigRational::one(), BigRational::zero());
            continue;
        }
        let bit = col >> t & 1;
        for out_bit in 0..2 {
            let row = (col & !(1 << t)) | (out_bit << t);
            out[row][col] = m[out_bit * 2 + bit].clone();
        }
    }
    out
}

fn matvec(m: &[Vec<C>], v: &[C]) -> Vec<C> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(C::zero(), |acc, (a, b)| acc.add(&a.mul(b))))
        .collect()
}

fn random_exact_state(stream: &mut Stream, dim: u128, support: usize) -> ExactState {
    let mut amps = BTreeMap::new();
    while amps.len() < support {
        let k = stream.below_u128(dim);
        let a = ExactComplex::from_ratio(stream.range_i64(-50, 50), stream.range_i64(-50, 50), 37);
        if !a.is_zero() {
            amps.insert(k, a);
        }
    }
    ExactState::new(dim, amps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantization_error_is_at_most_half_a_step(c in small_complex(), mu in mu_strategy()) {
        let r = res(mu);
        let f = quantize(&c, r).unwrap();
        let v = f.value();
        let half = r.delta() / BigRational::from_integer(2.into());
        prop_assert!((&v.re - &c.re).abs() <= half);
        prop_assert!((&v.im - &c.im).abs() <= half);
        // idempotent, and grid points are fixed
        prop_assert_eq!(quantize(&v, r).unwrap(), f);
    }

    #[test]
    fn grid_points_are_fixed(re in -1000i128..=1000, im in -1000i128..=1000, mu in prop::sample::select(vec![32u32, 64, 128])) {
        let r = res(mu);
        let f = FixedComplex::from_units(re, im, r).unwrap();
        prop_assert_eq!(quantize(&f.value(), r).unwrap(), f);
    }

    #[test]
    fn headroom_is_enforced(x in component()) {
        let c = ExactComplex::real(x.clone());
        let r = res(16);
        prop_assert_eq!(quantize(&c, r).is_ok(), x.abs() <= BigRational::from_integer(2.into()));
    }

    #[test]
    fn committed_norm_is_within_bound(seed in any::<u64>(), mu in prop::sample::select(vec![4u32, 8, 16, 32, 64]), support in 1usize..40) {
        let mut s = Stream::new(seed);
        let state = random_exact_state(&mut s, 64, support);
        match resolution_pass(&state, res(mu)) {
            Ok((out, _)) => {
                let err = (out.norm_sq() - BigRational::one()).abs();
                prop_assert!(err <= out.norm_tolerance(), "norm error {} > {}", err, out.norm_tolerance());
                prop_assert!(out.support() as u128 <= 1u128 << mu);
            }
            Err(e) => prop_assert_eq!(e, cmqm::Error::TotalExtinction),
        }
    }

    #[test]
    fn lost_weight_shrinks_as_mu_grows(seed in any::<u64>(), support in 1usize..60) {
        let mut s = Stream::new(seed);
        let state = random_exact_state(&mut s, 256, support);
        let mut last: Option<BigRational> = None;
        for mu in [4u32, 6, 8, 10, 12, 16, 32] {
            let lost = match resolution_pass(&state, res(mu)) {
                Ok((_, lost)) => lost,
                Err(_) => BigRational::one(),
            };
            prop_assert!(lost >= BigRational::zero() && lost <= BigRational::one());
            if let Some(prev) = &last {
                prop_assert!(lost <= *prev);
            }
            last = Some(lost);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_mode_matches_dense_matrix_product(seed in any::<u64>(), n in 1u32..=3, depth in 1usize..8) {
        let mut stream = Stream::new(seed);
        let circuit = gates::random_circuit(n, depth, &mut stream);
        let dim = 1usize << n;
        let start = stream.below_u64(dim as u64) as usize;
        let s = StateVector::basis(dim as u128, start as u128, Precision::Exact).unwrap();
        let got = apply_circuit(&s, &circuit).unwrap();
        prop_assert!(got.norm_sq().is_one());

        let mut v = vec![C::zero(); dim];
        v[start] = C(BigRational::one(), BigRational::zero());
        for g in &circuit {
            v = matvec(&dense(n, g), &v);
        }
        for (k, want) in v.iter().enumerate() {
            let a = got.amplitude(k as u128);
            prop_assert_eq!(&C(a.re.clone(), a.im.clone()), want);
        }
    }

    #[test]
    fn truncation_keeps_exactly_the_large_amplitudes(seed in any::<u64>(), n in 1u32..=3, depth in 1usize..10) {
        let mut stream = Stream::new(seed);
        let circuit = gates::random_circuit(n, depth, &mut stream);
        let dim = 1u128 << n;
        let exact = apply_circuit(&StateVector::basis(dim, 0, Precision::Exact).unwrap(), &circuit).unwrap();
        let r = res(6);
        let (out, _) = resolution_pass(&exact.to_exact_state(), r).unwrap();
        let mut v = vec![C::zero(); dim as usize];
        v[0] = C(BigRational::one(), BigRational::zero());
        for g in &circuit {
            v = matvec(&dense(n, g), &v);
        }
        let threshold = rat(1, 64);
        let expected: Vec<u128> = (0..dim).filter(|&k| v[k as usize].abs2() >= threshold).collect();
        prop_assert_eq!(out.indices(), expected);
        let bound = BigRational::from_integer(BigInt::from(4 * out.support())) * rat(1, 8);
        prop_assert!((out.norm_sq() - BigRational::one()).abs() <= bound);
    }
}
