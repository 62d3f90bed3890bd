//! Formal-group expansions at the origin of E: w(t), x(t), y(t) and the
//! invariant differential ω(t), all to O(t^{N+1}) over Z/p^{N-3}Z. w is
//! found by Newton iteration on its defining equation; the rest follow by
//! series division. No divisions by p occur here, so the modulus is flat.

use std::sync::Arc;

use num_bigint::BigUint;

use crate::curve::CurveQ;
use crate::error::Result;
use crate::padic::{Modulus, ZModPN};
use crate::series::PadicSeries;

/// Unit-series forms of the formal-group data: w_unit = t^{-3}w(t),
/// x_unit = t^2 x(t), y_unit = t^3 y(t), each with N+1 stored terms, and
/// omega = ω(t) with N+1 terms, all over Z/p^{N-3}Z.
#[derive(Clone, Debug)]
pub struct FormalGroupData {
    pub n: u32,
    pub w_unit: PadicSeries,
    pub x_unit: PadicSeries,
    pub y_unit: PadicSeries,
    pub omega: PadicSeries,
}

impl FormalGroupData {
    pub fn modulus(&self) -> &Arc<Modulus> {
        self.omega.modulus()
    }
}

struct Coeffs {
    a1: ZModPN,
    a2: ZModPN,
    a3: ZModPN,
    a4: ZModPN,
    a6: ZModPN,
}

fn curve_coeffs(e: &CurveQ, m: &Arc<Modulus>) -> Coeffs {
    Coeffs {
        a1: ZModPN::from_bigint(m, &e.a1),
        a2: ZModPN::from_bigint(m, &e.a2),
        a3: ZModPN::from_bigint(m, &e.a3),
        a4: ZModPN::from_bigint(m, &e.a4),
        a6: ZModPN::from_bigint(m, &e.a6),
    }
}

/// One Newton step for w at stored truncation `trunc`:
/// w <- (t^3 - a3 w^2 - a4 t w^2 - 2 a6 w^3) /
///      (1 - a1 t - a2 t^2 - 2 a3 w - 2 a4 t w - 3 a6 w^2)
fn newton_step(a: &Coeffs, w: &PadicSeries, trunc: usize) -> Result<PadicSeries> {
    let m = w.modulus();
    let t = PadicSeries::from_u64s(m, 0, &[0, 1]);
    let w2 = w.mul(w, trunc)?;
    let w3 = w2.mul(w, trunc)?;
    let tw = t.mul(w, trunc)?;
    let tw2 = t.mul(&w2, trunc)?;
    let two = ZModPN::from_u64(m, 2);
    let three = ZModPN::from_u64(m, 3);

    let num = PadicSeries::from_u64s(m, 0, &[0, 0, 0, 1])
        .sub(&w2.scale(&a.a3))?
        .sub(&tw2.scale(&a.a4))?
        .sub(&w3.scale(&a.a6.mul(&two)))?;
    let den = PadicSeries::new(m, 0, vec![ZModPN::one(m), a.a1.neg(), a.a2.neg()])
        .sub(&w.scale(&a.a3.mul(&two)))?
        .sub(&tw.scale(&a.a4.mul(&two)))?
        .sub(&w2.scale(&a.a6.mul(&three)))?;
    num.mul(&den.inv(trunc)?, trunc)
}

/// t^{-3}w(t) to O(t^{N+1}) over Z/p^{N-3}Z, by Newton iteration from
/// w = t^3, doubling the truncation each step (capped at N+4 stored terms
/// of w so that the unit series has exactly N+1 terms).
pub fn compute_w(e: &CurveQ, p: &BigUint, n: u32) -> Result<PadicSeries> {
    assert!(n >= 4, "need N >= 4");
    let m = Modulus::new(p.clone(), n - 3);
    let a = curve_coeffs(e, &m);
    let cap = (n + 4) as usize;
    let mut w = PadicSeries::from_u64s(&m, 0, &[0, 0, 0, 1]);
    let mut trunc = 4usize;
    while trunc < cap {
        trunc = (2 * trunc).min(cap);
        w = newton_step(&a, &w, trunc)?;
    }
    // drop the three leading zeros: stored form is the unit t^{-3}w
    let unit: Vec<ZModPN> = w.coeffs()[3..].to_vec();
    debug_assert_eq!(unit.len(), (n + 1) as usize);
    Ok(PadicSeries::new(&m, 0, unit))
}

/// x(t) = t/w, y(t) = -1/w, ω(t) = x'(t)/(2y + a1 x + a3), all derived from
/// the computed w.
pub fn compute_xy_omega(e: &CurveQ, w_unit: &PadicSeries) -> Result<FormalGroupData> {
    let m = w_unit.modulus().clone();
    let n = w_unit.len() as u32 - 1;
    let trunc = w_unit.len();
    let a = curve_coeffs(e, &m);

    let u_inv = w_unit.inv(trunc)?; // t^3 / w
    let x_unit = u_inv.clone(); // t^2 x = t^3/w
    let y_unit = u_inv.scale(&ZModPN::from_i64(&m, -1)); // t^3 y = -t^3/w

    let x = x_unit.shift(-2);
    let y = y_unit.shift(-3);
    let xp = x.derivative();
    // denominator 2y + a1 x + a3 has leading term -2 t^{-3}
    let den = y
        .scale(&ZModPN::from_u64(&m, 2))
        .add(&x.scale(&a.a1))?
        .add(&PadicSeries::new(&m, 0, vec![a.a3.clone()]))?;
    // clear the poles before inverting so every offset stays in range
    let num0 = xp.shift(3).truncate(trunc);
    let den0 = den.shift(3).truncate(trunc);
    let omega = num0.mul(&den0.inv(trunc)?, trunc)?;
    debug_assert_eq!(omega.offset(), 0);

    Ok(FormalGroupData { n, w_unit: w_unit.clone(), x_unit, y_unit, omega })
}

pub fn formal_group(e: &CurveQ, p: &BigUint, n: u32) -> Result<FormalGroupData> {
    let w = compute_w(e, p, n)?;
    compute_xy_omega(e, &w)
}
