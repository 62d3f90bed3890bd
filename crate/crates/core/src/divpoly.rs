//! Division polynomial values at a fixed rational point modulo an odd
//! integer R, in denominator-free normalized form.
//!
//! Writing Q = (alpha/d^2, beta/d^3) in lowest terms, the normalized values
//! psi~_m = psi_m(Q) d^(m^2-1), theta~_m = theta_m(Q) d^(2m^2) and
//! omega~_m = omega_m(Q) d^(3m^2) are integers, and x(mQ) = theta~/(psi~^2 d^2),
//! y(mQ) = omega~/(psi~^3 d^3) as reduced fractions (for points that reduce to
//! nonsingular points at all bad primes). So alpha(mQ), beta(mQ), d(mQ) come
//! out of a division-free recursion mod R, never touching the coordinates of
//! mQ themselves. Cost is O(log m) recursion steps: the dependency set of an
//! index window halves in position at each level.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::curve::{CurveQ, RationalPoint};
use crate::error::{Error, Result};

/// Per-point evaluation context: normalized curve constants mod R and the
/// memo table for the g-recursion.
pub struct DivPolyContext {
    r: BigUint,
    alpha: BigUint,
    #[allow(dead_code)] // read by the verification tests
    beta: BigUint,
    d: BigUint,
    na1: BigUint,
    na3: BigUint,
    #[allow(dead_code)] // read by the verification tests
    nb2: BigUint,
    #[allow(dead_code)] // read by the verification tests
    nb4: BigUint,
    #[allow(dead_code)] // read by the verification tests
    nb6: BigUint,
    #[allow(dead_code)] // read by the verification tests
    nb8: BigUint,
    #[allow(dead_code)] // read by the verification tests
    cb4: BigUint,
    #[allow(dead_code)] // read by the verification tests
    cb6: BigUint,
    #[allow(dead_code)] // read by the verification tests
    cb8: BigUint,
    /// B6~^2, the only power of B6~ the recursion uses
    cb6sq: BigUint,
    /// T~ = 2 beta + a1~ alpha + a3~
    t: BigUint,
    inv2: BigUint,
    memo: HashMap<u64, BigUint>,
    evals: u64,
    curve: CurveQ,
    point: RationalPoint,
}

fn red(v: &BigInt, r: &BigUint) -> BigUint {
    let ri = BigInt::from(r.clone());
    let m = ((v % &ri) + &ri) % ri;
    m.to_biguint().unwrap()
}

impl DivPolyContext {
    pub fn new(curve: &CurveQ, q: &RationalPoint, r: &BigUint) -> Result<DivPolyContext> {
        if r.bit(0) == false || *r < BigUint::from(3u32) {
            return Err(Error::EvenModulus);
        }
        let (alpha, beta, d) = match q {
            RationalPoint::Infinity => {
                return Err(Error::PreconditionViolated(
                    "division polynomial context needs an affine point".into(),
                ))
            }
            RationalPoint::Affine { alpha, beta, d } => (alpha, beta, d),
        };
        // normalized coefficients a_k~ = d^k a_k; exact in Z, reduced at the end
        let na = |k: u32, a: &BigInt| -> BigInt { d.pow(k) * a };
        let na1 = na(1, &curve.a1);
        let na2 = na(2, &curve.a2);
        let na3 = na(3, &curve.a3);
        let na4 = na(4, &curve.a4);
        let na6 = na(6, &curve.a6);
        let nb2 = &na1 * &na1 + 4 * &na2;
        let nb4 = &na1 * &na3 + 2 * &na4;
        let nb6 = &na3 * &na3 + 4 * &na6;
        let nb8 = &na1 * &na1 * &na6 + 4 * &na2 * &na6 - &na1 * &na3 * &na4
            + &na2 * &na3 * &na3
            - &na4 * &na4;
        let cb4 = 6 * alpha * alpha + &nb2 * alpha + &nb4;
        let cb6 = 4 * alpha * alpha * alpha + &nb2 * alpha * alpha + 2 * &nb4 * alpha + &nb6;
        let cb8 = 3 * alpha.pow(4) + &nb2 * alpha.pow(3) + 3 * &nb4 * alpha * alpha
            + 3 * &nb6 * alpha
            + &nb8;
        let t = 2 * beta + &na1 * alpha + &na3;

        let cb4r = red(&cb4, r);
        let cb6r = red(&cb6, r);
        let cb8r = red(&cb8, r);
        let cb6sq = (&cb6r * &cb6r) % r;
        let g4 = {
            let prod = (&cb4r * &cb8r) % r;
            (&cb6sq + r - prod) % r
        };
        let mut memo = HashMap::new();
        memo.insert(0, BigUint::zero());
        memo.insert(1, BigUint::one());
        memo.insert(2, r - 1u32);
        memo.insert(3, cb8r.clone());
        memo.insert(4, g4);
        Ok(DivPolyContext {
            r: r.clone(),
            alpha: red(alpha, r),
            beta: red(beta, r),
            d: red(d, r),
            na1: red(&na1, r),
            na3: red(&na3, r),
            nb2: red(&nb2, r),
            nb4: red(&nb4, r),
            nb6: red(&nb6, r),
            nb8: red(&nb8, r),
            cb4: cb4r,
            cb6: cb6r,
            cb8: cb8r,
            cb6sq,
            t: red(&t, r),
            inv2: (r + 1u32) >> 1,
            memo,
            evals: 0,
            curve: curve.clone(),
            point: q.clone(),
        })
    }

    /// g~_j mod R via the doubling recursion, memoized.
    pub fn g_value(&mut self, j: u64) -> BigUint {
        if let Some(v) = self.memo.get(&j) {
            return v.clone();
        }
        self.evals += 1;
        let r = self.r.clone();
        let n = j / 2;
        let v = if j & 1 == 1 {
            // g~_{2n+1} = B6~^2 g_{n+2} g_n^3 - g_{n-1} g_{n+1}^3 (n even),
            //            g_{n+2} g_n^3 - B6~^2 g_{n-1} g_{n+1}^3 (n odd)
            let gn = self.g_value(n);
            let gn1 = self.g_value(n + 1);
            let gn2 = self.g_value(n + 2);
            let gm1 = self.g_value(n - 1);
            let hi = (&gn2 * &gn % &r) * (&gn * &gn % &r) % &r;
            let lo = (&gm1 * &gn1 % &r) * (&gn1 * &gn1 % &r) % &r;
            if n & 1 == 0 {
                (&self.cb6sq * hi % &r + &r - lo) % &r
            } else {
                (hi + &r - &self.cb6sq * lo % &r) % &r
            }
        } else {
            // g~_{2n} = g_n (g_{n-2} g_{n+1}^2 - g_{n+2} g_{n-1}^2)
            let gn = self.g_value(n);
            let gn1 = self.g_value(n + 1);
            let gn2 = self.g_value(n + 2);
            let gm1 = self.g_value(n - 1);
            let gm2 = self.g_value(n - 2);
            let hi = gm2 * (&gn1 * &gn1 % &r) % &r;
            let lo = gn2 * (&gm1 * &gm1 % &r) % &r;
            gn * ((hi + &r - lo) % &r) % &r
        };
        self.memo.insert(j, v.clone());
        v
    }

    /// How many times the recursion formula has been evaluated (base cases
    /// and memo hits excluded).
    pub fn recursion_evals(&self) -> u64 {
        self.evals
    }

    /// psi~_k = T~^{k even ? 1 : 0} g~_k (the exponent is the parity of k+1).
    fn psi(&mut self, k: u64) -> BigUint {
        let g = self.g_value(k);
        if k & 1 == 0 {
            (g * &self.t) % &self.r
        } else {
            g
        }
    }

    /// (alpha(mQ), beta(mQ), d(mQ)) mod R, the last two up to one shared sign.
    ///
    /// A zero d-component with nonzero exact value just means mQ is p-adically
    /// close to the identity; only genuine torsion collapse (mQ = infinity
    /// exactly) is an error.
    pub fn multiple_coords(&mut self, m: u64) -> Result<(BigUint, BigUint, BigUint)> {
        if m < 2 {
            return Err(Error::PreconditionViolated("multiple m must be >= 2".into()));
        }
        let r = self.r.clone();
        let psi_m = self.psi(m);
        if psi_m.is_zero() {
            // mQ = infinity exactly forces Q torsion, so the order is tiny
            for k in 1..=12u64 {
                if m % k == 0 && self.curve.scalar_mul(k, &self.point).is_infinity() {
                    return Err(Error::TorsionCollapse);
                }
            }
        }
        let psi_lo = self.psi(m - 1);
        let psi_hi = self.psi(m + 1);
        let psi_sq = (&psi_m * &psi_m) % &r;
        let theta = (&self.alpha * &psi_sq % &r + &r - psi_hi * psi_lo % &r) % &r;

        let g_lo2 = self.g_value(m - 2);
        let g_lo1 = self.g_value(m - 1);
        let g_hi1 = self.g_value(m + 1);
        let g_hi2 = self.g_value(m + 2);
        let mut bracket = (g_lo2 * (&g_hi1 * &g_hi1 % &r) % &r + &r
            - g_hi2 * (&g_lo1 * &g_lo1 % &r) % &r)
            % &r;
        if m & 1 == 1 {
            bracket = (bracket * &self.t) % &r;
        }
        let tail = &psi_m * ((&self.na1 * &theta % &r + &self.na3 * &psi_sq % &r) % &r) % &r;
        let omega = (&r - (bracket + tail) % &r) % &r * &self.inv2 % &r;

        let d_m = (psi_m * &self.d) % &r;
        Ok((theta, omega, d_m))
    }
}
