//! Standalone algebraic property suites. The acceptance gate runs the same
//! checks; these are kept separate so they can be run (and shrunk, for the
//! randomized ones) on their own.

mod support;

use num_bigint::BigUint;
use proptest::prelude::*;

use padic_heights::curve::{CurveQ, RationalPoint};
use padic_heights::divpoly::DivPolyContext;
use padic_heights::height::{padic_height, HeightJob};
use padic_heights::kedlaya::compute_e2;
use padic_heights::padic::{iwasawa_log, Modulus, PadicNumber, ZModPN};
use padic_heights::series::PadicSeries;
use padic_heights::sigma::compute_sigma;

use support::Lcg;

#[test]
fn frobenius_identities_on_fixtures() {
    for fx in support::fixtures() {
        let e = CurveQ::from_i64(fx.coeffs).unwrap();
        let p = fx.p.unwrap_or_else(|| support::first_good_ordinary(&e, 5));
        support::assert_frobenius_identities(&e, p, 3);
    }
}

#[test]
fn height_is_quadratic_on_fixture_generators() {
    for fx in support::fixtures() {
        let Some((ref pt, n2)) = fx.generator else { continue };
        let e = CurveQ::from_i64(fx.coeffs).unwrap();
        let p = fx.p.unwrap_or_else(|| support::first_good_ordinary(&e, 5));
        let job = |point| HeightJob {
            curve: e.clone(),
            point,
            p,
            precision: 4,
            tamagawa_lcm: n2,
            mst_normalization: false,
        };
        let h1 = padic_height(&job(pt.clone())).unwrap();
        for k in [2u64, 3] {
            let hk = padic_height(&job(e.scalar_mul(k, pt))).unwrap();
            let mw = Modulus::new(BigUint::from(p), 6);
            let scaled = ZModPN::new(&mw, h1.value.unit().clone())
                .mul(&ZModPN::from_u64(&mw, k * k));
            let want = PadicNumber::from_residue_shifted(&scaled, h1.value.valuation());
            assert!(hk.value.agrees_with(&want), "{} k={k}", fx.label);
        }
    }
}

#[test]
fn second_sigma_coefficient_is_half_a1() {
    let mut rng = Lcg(11);
    let mut done = 0;
    let mut attempts = 0;
    while done < 20 {
        attempts += 1;
        assert!(attempts < 1000, "curve sampling stalled");
        let Some((e, _)) = support::random_curve_with_point(&mut rng) else {
            continue;
        };
        if !e.is_good_ordinary(5).unwrap_or(false) {
            continue;
        }
        let pb = BigUint::from(5u32);
        let e2 = compute_e2(&e, &pb, 3, false).unwrap();
        let sigma = compute_sigma(&e, &pb, 6, Some(&e2)).unwrap();
        let m4 = Modulus::new(pb.clone(), 4);
        let half_a1 = ZModPN::from_bigint(&m4, &e.a1)
            .mul(&ZModPN::from_u64(&m4, 2).inv().unwrap());
        assert_eq!(sigma.coeff(2), (half_a1.value().clone(), 4));
        done += 1;
    }
}

#[test]
fn recursion_counter_is_logarithmic() {
    for m in [101u64, 499, 65537, 1_000_003] {
        let e = CurveQ::from_i64([0, 1, 1, -7, 5]).unwrap();
        let q = RationalPoint::affine(5, -3, 2);
        let mut ctx = DivPolyContext::new(&e, &q, &BigUint::from(99u32)).unwrap();
        for j in m - 2..=m + 2 {
            ctx.g_value(j);
        }
        let bound = (8.0 * (m as f64).log2()).ceil() as u64;
        assert!(ctx.recursion_evals() <= bound, "m={m}: {}", ctx.recursion_evals());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn iwasawa_log_is_additive(u in 1u64.., v in 1u64..) {
        let m = Modulus::new(BigUint::from(5u32), 10);
        let zu = ZModPN::from_u64(&m, u);
        let zv = ZModPN::from_u64(&m, v);
        prop_assume!(zu.is_unit() && zv.is_unit());
        prop_assert_eq!(
            iwasawa_log(&zu.mul(&zv)).unwrap(),
            iwasawa_log(&zu).unwrap().add(&iwasawa_log(&zv).unwrap())
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_multiplication_matches_schoolbook(
        la in 1usize..48,
        lb in 1usize..48,
        exp in 1u32..30,
        seed in 0u64..,
    ) {
        let mut rng = Lcg(seed);
        let m = Modulus::new(BigUint::from(5u32), exp);
        let mut draw = |len: usize| -> Vec<ZModPN> {
            (0..len)
                .map(|_| ZModPN::new(&m, BigUint::from(rng.next_u64())))
                .collect()
        };
        let a = draw(la);
        let b = draw(lb);
        let got = PadicSeries::new(&m, 0, a.clone())
            .mul(&PadicSeries::new(&m, 0, b.clone()), la + lb - 1)
            .unwrap();
        let av: Vec<BigUint> = a.iter().map(|z| z.value().clone()).collect();
        let bv: Vec<BigUint> = b.iter().map(|z| z.value().clone()).collect();
        let want = support::schoolbook_mul(&av, &bv, m.power());
        for (g, w) in got.coeffs().iter().zip(&want) {
            prop_assert_eq!(g.value(), w);
        }
    }
}
