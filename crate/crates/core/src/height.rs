//! The cyclotomic p-adic height of a rational point, for good ordinary
//! reduction at p >= 5.
//!
//! h_p(P) = (2/n^2) log_p(sigma_p(mQ)/d(mQ)) where n1 = #E(F_p), n2 is the
//! (caller-supplied) LCM of the Tamagawa numbers, n = lcm(n1, n2), Q = n2 P
//! and m = n/n2. The coordinates of mQ are never formed: their residues mod
//! p^M' come from the division polynomial recursion, and the sigma quotient
//! is expanded as a unit times 1 + sum c_{k+1} t^k.
//!
//! Normalization: 2p times the height of Mazur, Stein and Tate; pass
//! `mst_normalization` to divide back.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;

use crate::curve::{CurveQ, RationalPoint};
use crate::divpoly::DivPolyContext;
use crate::error::{Error, Result};
use crate::kedlaya::compute_e2;
use crate::padic::{iwasawa_log, val_u64, Modulus, PadicNumber, ZModPN};
use crate::sigma::{compute_sigma, SigmaSeries};

/// One height computation: curve, point, prime, target precision M (digits
/// of p), Tamagawa LCM, and the normalization switch.
#[derive(Clone, Debug)]
pub struct HeightJob {
    pub curve: CurveQ,
    pub point: RationalPoint,
    pub p: u64,
    pub precision: u32,
    pub tamagawa_lcm: u64,
    pub mst_normalization: bool,
}

/// The intermediate integers the pipeline settles on; returned for
/// diagnostics and for the CLI to display.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightDiagnostics {
    pub n1: u64,
    pub n2: u64,
    pub n: u64,
    pub m: u64,
    pub m_prime: u32,
    /// modulus exponent of the E2 value used; None on the trivial path
    pub e2_precision: Option<u32>,
    /// true when p divides the supplied Tamagawa LCM (M' then grows by
    /// more than the usual 2 v_p(n1))
    pub p_divides_n2: bool,
}

#[derive(Clone, Debug)]
pub struct HeightResult {
    /// h_p(P), stated mod p^precision; the valuation can be negative
    /// (anomalous primes)
    pub value: PadicNumber,
    pub precision: u32,
    pub diagnostics: HeightDiagnostics,
}

/// Working moduli implied by the target precision: sigma ideal index
/// N_sigma = M'+1, the E2 modulus exponent (None when the trivial sigma
/// t + (a1/2) t^2 suffices), and R = p^M' for the point multiple.
pub fn precision_ledger(p: u64, m_prime: u32) -> (u32, Option<u32>, BigUint) {
    let n_sigma = m_prime + 1;
    let n_e2 = if n_sigma >= 4 { Some(m_prime - 2) } else { None };
    (n_sigma, n_e2, BigUint::from(p).pow(m_prime))
}

/// The unit sigma_p(mQ)/d(mQ) = (-alpha/beta)(1 + sum_{k>=1} c_{k+1} t^k)
/// mod p^M', from the triple for mQ. The shared sign ambiguity of the
/// triple flips the result's sign only, which the Iwasawa log ignores.
pub fn evaluate_sigma_ratio(
    sigma: &SigmaSeries,
    triple: (&BigUint, &BigUint, &BigUint),
    modulus: &std::sync::Arc<Modulus>,
) -> Result<ZModPN> {
    let (alpha, beta, d) = triple;
    let a = ZModPN::new(modulus, alpha.clone());
    let b = ZModPN::new(modulus, beta.clone());
    let dm = ZModPN::new(modulus, d.clone());
    if dm.is_unit() {
        return Err(Error::A1Violated);
    }
    let head = a.neg().div(&b)?;
    // t(mQ) = -d alpha / beta, divisible by p
    let t = head.mul(&dm);
    let mp = modulus.exponent();
    let mut sum = ZModPN::one(modulus);
    let mut tpow = ZModPN::one(modulus);
    // c_{k+1} is known mod p^{M'-k} and v(t^k) >= k, so each term is good
    // mod p^M'; terms with k >= M' vanish
    let kmax = (sigma.ideal_index() - 2).min(mp.saturating_sub(1));
    for k in 1..=kmax {
        tpow = tpow.mul(&t);
        let (c, _) = sigma.coeff(k + 1);
        sum = sum.add(&ZModPN::new(modulus, c).mul(&tpow));
    }
    Ok(head.mul(&sum))
}

fn torsion_order(e: &CurveQ, pt: &RationalPoint) -> Option<u64> {
    // rational torsion has order at most 12
    let mut acc = pt.clone();
    for k in 1..=12u64 {
        if acc.is_infinity() {
            return Some(k);
        }
        acc = e.point_add(&acc, pt);
    }
    None
}

pub fn padic_height(job: &HeightJob) -> Result<HeightResult> {
    let e = &job.curve;
    let p = job.p;
    if job.precision < 2 {
        return Err(Error::PreconditionViolated("target precision M must be >= 2".into()));
    }
    if job.tamagawa_lcm == 0 {
        return Err(Error::PreconditionViolated("Tamagawa LCM must be >= 1".into()));
    }
    if job.point.is_infinity() {
        return Err(Error::PreconditionViolated("the zero point has no height".into()));
    }
    if !e.is_good_ordinary(p)? {
        return Err(Error::NotGoodOrdinary(p.to_string()));
    }
    if torsion_order(e, &job.point).is_some() {
        return Err(Error::TorsionPoint);
    }

    let (n1, _a_p) = e.count_points(p)?;
    let n2 = job.tamagawa_lcm;
    let n = n1.lcm(&n2);
    let m = n / n2;
    let v = val_u64(n, p);
    let m_prime = job.precision + 2 * v;
    let (n_sigma, n_e2, r) = precision_ledger(p, m_prime);

    let q = e.scalar_mul(n2, &job.point);
    let (_, a2_ok) = e.check_a1_a2(&q, p)?;
    if !a2_ok {
        return Err(Error::A2Violated(format!(
            "n2 = {n2} does not clear the bad reduction"
        )));
    }

    let pb = BigUint::from(p);
    let e2 = match n_e2 {
        Some(ne) => Some(compute_e2(e, &pb, ne, true)?),
        None => None,
    };
    let sigma = compute_sigma(e, &pb, n_sigma, e2.as_ref())?;

    let (am, bm, dm) = match &q {
        RationalPoint::Affine { alpha, beta, d } if m == 1 => {
            let rd = |x: &BigInt| {
                let ri = BigInt::from(r.clone());
                (((x % &ri) + &ri) % &ri).to_biguint().unwrap()
            };
            (rd(alpha), rd(beta), rd(d))
        }
        _ => {
            let mut ctx = DivPolyContext::new(e, &q, &r)?;
            ctx.multiple_coords(m)?
        }
    };

    let mw = Modulus::new(pb.clone(), m_prime);
    let u = evaluate_sigma_ratio(&sigma, (&am, &bm, &dm), &mw)?;
    let lg = iwasawa_log(&u)?;

    // h = 2 log / n^2: invert the unit part of n^2, carry p^{-2v} as a shift
    let n_unit = n / p.checked_pow(v).expect("v_p(n) small");
    let unit_sq = ZModPN::from_u64(&mw, n_unit).pow(2);
    let mut z = lg.mul(&unit_sq.inv()?).mul(&ZModPN::from_u64(&mw, 2));
    let mut shift = -2 * v as i64;
    if job.mst_normalization {
        z = z.mul(&ZModPN::from_u64(&mw, 2).inv()?);
        shift -= 1;
    }
    let full = PadicNumber::from_residue_shifted(&z, shift);

    // state the answer mod p^M
    let target = job.precision as i64;
    let value = if full.abs_precision() > target && !full.is_zero() {
        full.truncate_digits((target - full.valuation()).max(0) as u32)
    } else {
        full
    };

    Ok(HeightResult {
        value,
        precision: job.precision,
        diagnostics: HeightDiagnostics {
            n1,
            n2,
            n,
            m,
            m_prime,
            e2_precision: n_e2,
            p_divides_n2: n2 % p == 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(a: [i64; 5], pt: RationalPoint, p: u64, prec: u32, n2: u64) -> HeightJob {
        HeightJob {
            curve: CurveQ::from_i64(a).unwrap(),
            point: pt,
            p,
            precision: prec,
            tamagawa_lcm: n2,
            mst_normalization: false,
        }
    }

    #[test]
    fn height_37a_at_5() {
        let j = job([0, 0, 1, -1, 0], RationalPoint::affine(0, 0, 1), 5, 5, 1);
        let r = padic_height(&j).unwrap();
        assert_eq!(r.value.valuation(), 1);
        assert_eq!(r.value.digit_expansion(), vec![4, 3, 3, 4]);
        assert_eq!(r.value.abs_precision(), 5);
    }

    #[test]
    fn height_214a1_at_43_anomalous() {
        let j = job([1, 0, 0, -12, 16], RationalPoint::affine(0, -4, 1), 43, 6, 7);
        let r = padic_height(&j).unwrap();
        assert_eq!(r.diagnostics.n1, 43);
        assert_eq!(r.diagnostics.n, 301);
        assert_eq!(r.diagnostics.m, 43);
        assert_eq!(r.diagnostics.m_prime, 8);
        assert_eq!(r.value.valuation(), -1);
        assert_eq!(*r.value.unit(), BigUint::from(96127622779u64));
        assert_eq!(r.value.abs_precision(), 6);
    }

    #[test]
    fn height_92b1_at_5() {
        let j = job([0, 0, 0, -1, 1], RationalPoint::affine(1, 1, 1), 5, 5, 3);
        let r = padic_height(&j).unwrap();
        assert_eq!(r.value.valuation(), 1);
        assert_eq!(r.value.digit_expansion(), vec![3, 3, 2, 1]);
    }

    #[test]
    fn quadraticity() {
        let e = CurveQ::from_i64([0, 0, 1, -1, 0]).unwrap();
        let p0 = RationalPoint::affine(0, 0, 1);
        for k in [2u64, 3] {
            let pk = e.scalar_mul(k, &p0);
            let h1 = padic_height(&job([0, 0, 1, -1, 0], p0.clone(), 5, 6, 1)).unwrap();
            let hk = padic_height(&job([0, 0, 1, -1, 0], pk, 5, 6, 1)).unwrap();
            // h(kP) = k^2 h(P)
            let scaled = {
                let mw = Modulus::new(BigUint::from(5u32), 6 + 2);
                let z = ZModPN::new(&mw, h1.value.unit().clone())
                    .mul(&ZModPN::from_u64(&mw, k * k));
                PadicNumber::from_residue_shifted(&z, h1.value.valuation())
            };
            assert!(hk.value.agrees_with(&scaled), "k = {k}");
        }
    }

    #[test]
    fn sign_flip_leaves_height_unchanged() {
        let e = CurveQ::from_i64([1, 0, 0, -12, 16]).unwrap();
        let q = e.scalar_mul(7, &RationalPoint::affine(0, -4, 1));
        let r = BigUint::from(43u64).pow(8);
        let mut ctx = DivPolyContext::new(&e, &q, &r).unwrap();
        let (am, bm, dm) = ctx.multiple_coords(43).unwrap();
        let pb = BigUint::from(43u64);
        let e2 = compute_e2(&e, &pb, 6, true).unwrap();
        let sigma = compute_sigma(&e, &pb, 9, Some(&e2)).unwrap();
        let mw = Modulus::new(pb, 8);
        let u1 = evaluate_sigma_ratio(&sigma, (&am, &bm, &dm), &mw).unwrap();
        let bflip = (&r - &bm) % &r;
        let dflip = (&r - &dm) % &r;
        let u2 = evaluate_sigma_ratio(&sigma, (&am, &bflip, &dflip), &mw).unwrap();
        assert_eq!(u2, u1.neg());
        assert_eq!(iwasawa_log(&u1).unwrap(), iwasawa_log(&u2).unwrap());
    }

    #[test]
    fn sigma_ratio_214a1_matches_published_unit() {
        let e = CurveQ::from_i64([1, 0, 0, -12, 16]).unwrap();
        let q = e.scalar_mul(7, &RationalPoint::affine(0, -4, 1));
        let r = BigUint::from(43u64).pow(8);
        let mut ctx = DivPolyContext::new(&e, &q, &r).unwrap();
        let (am, bm, dm) = ctx.multiple_coords(43).unwrap();
        assert_eq!(am, BigUint::from(9491762277279u64));
        let pb = BigUint::from(43u64);
        let e2 = compute_e2(&e, &pb, 6, true).unwrap();
        assert_eq!(e2.value(), &BigUint::from(5899790810u64));
        let sigma = compute_sigma(&e, &pb, 9, Some(&e2)).unwrap();
        let mw = Modulus::new(pb, 8);
        let u = evaluate_sigma_ratio(&sigma, (&am, &bm, &dm), &mw).unwrap();
        let want = BigUint::from(1430987165464u64);
        assert!(u.value() == &want || u.neg().value() == &want);
        let lg = iwasawa_log(&u).unwrap();
        assert_eq!(lg.value(), &(BigUint::from(43u64) * 44668563676u64 % mw.power()));
    }

    #[test]
    fn ledger_values() {
        let (ns, ne, r) = precision_ledger(43, 8);
        assert_eq!(ns, 9);
        assert_eq!(ne, Some(6));
        assert_eq!(r, BigUint::from(43u64).pow(8));
        let (ns, ne, _) = precision_ledger(7, 2);
        assert_eq!(ns, 3);
        assert_eq!(ne, None);
    }

    #[test]
    fn higher_precision_refines() {
        let mk = |prec| job([0, 0, 1, -1, 0], RationalPoint::affine(0, 0, 1), 7, prec, 1);
        let h5 = padic_height(&mk(5)).unwrap();
        let h7 = padic_height(&mk(7)).unwrap();
        assert!(h7.value.agrees_with(&h5.value));
        assert_eq!(
            h7.value.digit_expansion()[..h5.value.num_digits() as usize],
            h5.value.digit_expansion()[..]
        );
    }

    #[test]
    fn torsion_point_rejected() {
        // (0, 2) on y^2 = x^3 + 4 has order 3
        let j = job([0, 0, 0, 0, 4], RationalPoint::affine(0, 2, 1), 7, 3, 1);
        assert!(matches!(padic_height(&j), Err(Error::TorsionPoint)));
    }

    #[test]
    fn wrong_tamagawa_lcm_detected() {
        // P = (0, -4) on the anomalous curve lands on the singular point
        // mod 2, so n2 = 1 fails the nonsingular-reduction check
        let j = job([1, 0, 0, -12, 16], RationalPoint::affine(0, -4, 1), 43, 4, 1);
        assert!(matches!(padic_height(&j), Err(Error::A2Violated(_))));
    }

    #[test]
    fn bad_reduction_prime_rejected() {
        let j = job([0, 0, 1, -1, 0], RationalPoint::affine(0, 0, 1), 37, 4, 1);
        assert!(matches!(padic_height(&j), Err(Error::BadReduction(_) | Error::NotGoodOrdinary(_))));
    }

    #[test]
    fn mst_normalization_divides_by_2p() {
        let base = job([0, 0, 1, -1, 0], RationalPoint::affine(0, 0, 1), 5, 5, 1);
        let mut mst = base.clone();
        mst.mst_normalization = true;
        let h = padic_height(&base).unwrap();
        let hm = padic_height(&mst).unwrap();
        assert_eq!(hm.value.valuation(), h.value.valuation() - 1);
        let mw = Modulus::new(BigUint::from(5u32), h.value.num_digits());
        let doubled = ZModPN::new(&mw, hm.value.unit().clone()).mul(&ZModPN::from_u64(&mw, 2));
        assert_eq!(doubled.value(), &(h.value.unit() % mw.power()));
    }
}
