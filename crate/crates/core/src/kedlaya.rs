//! Frobenius matrix on the odd de Rham cohomology of y^2 = x^3 + Ax + B
//! mod p^N (Kedlaya's algorithm specialized to genus 1), and E2 = -12 B/D
//! from the top row of F^N.
//!
//! Internals: the Frobenius image of x^i dx/y is expanded as
//! p x^{p(i+1)-1} z^{(p-1)/2} (1 + pE1 z^p)^{-1/2} dx/y with z = Q(x)^{-1}
//! and pE1 = Q(x^p) - Q(x)^p. All polynomials are carried in base Q
//! (divide-and-conquer radix conversion with precomputed powers of Q), so
//! every intermediate is a Laurent "series" in z with x-degree <= 2.
//! Cohomological reduction then walks the pole order down to zero and the
//! x-degree down to one. Divisions by integers divisible by p shed digits;
//! an adaptive working-precision guard plus det/trace validation keeps the
//! final matrix honest mod p^N.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::curve::CurveQ;
use crate::error::{Error, Result};
use crate::padic::{Modulus, ZModPN};
use crate::series::mul_slices;

/// Matrix of absolute p-power Frobenius on {dx/y, x dx/y}, mod p^N.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrobeniusMatrix {
    pub n: u32,
    pub a: ZModPN,
    pub b: ZModPN,
    pub c: ZModPN,
    pub d: ZModPN,
}

impl FrobeniusMatrix {
    pub fn det(&self) -> ZModPN {
        self.a.mul(&self.d).sub(&self.b.mul(&self.c))
    }

    pub fn trace(&self) -> ZModPN {
        self.a.add(&self.d)
    }

    fn mul(&self, o: &FrobeniusMatrix) -> FrobeniusMatrix {
        FrobeniusMatrix {
            n: self.n,
            a: self.a.mul(&o.a).add(&self.b.mul(&o.c)),
            b: self.a.mul(&o.b).add(&self.b.mul(&o.d)),
            c: self.c.mul(&o.a).add(&self.d.mul(&o.c)),
            d: self.c.mul(&o.b).add(&self.d.mul(&o.d)),
        }
    }

    /// F^k by repeated squaring.
    pub fn pow(&self, k: u32) -> FrobeniusMatrix {
        let m = self.a.modulus();
        let mut acc = FrobeniusMatrix {
            n: self.n,
            a: ZModPN::one(m),
            b: ZModPN::zero(m),
            c: ZModPN::zero(m),
            d: ZModPN::one(m),
        };
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

// ---- dense polynomial helpers over Z/pn, little-endian coefficients ----

type Poly = Vec<BigUint>;

fn ptrim(f: &mut Poly) {
    while f.len() > 1 && f.last().map_or(false, |c| c.is_zero()) {
        f.pop();
    }
}

fn pdeg(f: &Poly) -> usize {
    let mut d = f.len();
    while d > 1 && f[d - 1].is_zero() {
        d -= 1;
    }
    d - 1
}

fn pis_zero(f: &Poly) -> bool {
    f.iter().all(|c| c.is_zero())
}

fn padd(a: &Poly, b: &Poly, pn: &BigUint) -> Poly {
    let mut out = vec![BigUint::zero(); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] += c;
        out[i] %= pn;
    }
    for c in &mut out {
        if &*c >= pn {
            *c %= pn;
        }
    }
    out
}

fn psub(a: &Poly, b: &Poly, pn: &BigUint) -> Poly {
    let mut out = vec![BigUint::zero(); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] = c.clone();
    }
    for (i, c) in b.iter().enumerate() {
        if &out[i] >= c {
            out[i] -= c;
        } else {
            out[i] += pn;
            out[i] -= c;
        }
    }
    out
}

fn pmul(a: &Poly, b: &Poly, pn: &BigUint) -> Poly {
    if pis_zero(a) || pis_zero(b) {
        return vec![BigUint::zero()];
    }
    mul_slices(a, b, pn)
}

fn pmul_trunc(a: &Poly, b: &Poly, k: usize, pn: &BigUint) -> Poly {
    let la = a.len().min(k);
    let lb = b.len().min(k);
    let mut out = pmul(&a[..la].to_vec(), &b[..lb].to_vec(), pn);
    out.truncate(k);
    out
}

/// Inverse of f as a power series mod x^k; f[0] must be a unit mod pn.
fn pinv_series(f: &Poly, k: usize, pn: &BigUint, p: &BigUint) -> Poly {
    let inv0 = mod_inv(&f[0], pn, p);
    let mut g = vec![inv0];
    let mut known = 1usize;
    while known < k {
        known = (known * 2).min(k);
        let fg = pmul_trunc(f, &g, known, pn);
        // g <- g(2 - fg)
        let mut corr = vec![BigUint::zero(); known];
        for (i, c) in fg.iter().enumerate() {
            corr[i] = if i == 0 {
                let two = BigUint::from(2u32) % pn;
                sub_mod(&two, c, pn)
            } else {
                sub_mod(&BigUint::zero(), c, pn)
            };
        }
        g = pmul_trunc(&g, &corr, known, pn);
    }
    g.truncate(k);
    g
}

fn sub_mod(a: &BigUint, b: &BigUint, pn: &BigUint) -> BigUint {
    if a >= b {
        (a - b) % pn
    } else {
        (a + pn - b) % pn
    }
}

fn mod_inv(a: &BigUint, pn: &BigUint, p: &BigUint) -> BigUint {
    assert!(!(a % p).is_zero(), "inverse of a non-unit");
    let e = BigInt::from(a.clone()).extended_gcd(&BigInt::from(pn.clone()));
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(&BigInt::from(pn.clone()))
        .to_biguint()
        .expect("nonnegative")
}

/// Division with remainder by a monic divisor; `dinv` is an optional
/// precomputed series inverse of the reversed divisor.
fn pdivrem_monic(
    f: &Poly,
    d: &Poly,
    pn: &BigUint,
    p: &BigUint,
    dinv: Option<&Poly>,
) -> (Poly, Poly) {
    let degf = pdeg(f);
    let degd = pdeg(d);
    if degf < degd {
        return (vec![BigUint::zero()], f.clone());
    }
    let qlen = degf - degd + 1;
    let frev: Poly = f[..=degf].iter().rev().cloned().collect();
    let drev: Poly = d[..=degd].iter().rev().cloned().collect();
    let inv = match dinv {
        Some(v) if v.len() >= qlen => v[..qlen].to_vec(),
        _ => pinv_series(&drev, qlen, pn, p),
    };
    let mut qrev = pmul_trunc(&frev, &inv, qlen, pn);
    qrev.resize(qlen, BigUint::zero());
    let q: Poly = qrev.into_iter().rev().collect();
    let qd = pmul(&q, d, pn);
    let mut r = psub(f, &qd, pn);
    r.truncate(degd.max(1));
    if r.is_empty() {
        r.push(BigUint::zero());
    }
    ptrim(&mut r);
    (q, r)
}

fn pderiv(f: &Poly, pn: &BigUint) -> Poly {
    if f.len() <= 1 {
        return vec![BigUint::zero()];
    }
    let mut out = Vec::with_capacity(f.len() - 1);
    for (i, c) in f.iter().enumerate().skip(1) {
        out.push((c * BigUint::from(i as u64)) % pn);
    }
    out
}

// ---- base-Q radix conversion ----

struct Radix {
    pn: BigUint,
    /// qpows[i] = Q^{2^i}
    qpows: Vec<Poly>,
}

type Digit = [BigUint; 3];

impl Radix {
    /// Prepare to recombine up to 2^levels base-Q digits.
    fn new(q: &Poly, levels: u32, pn: &BigUint) -> Radix {
        let mut qpows = vec![q.clone()];
        for i in 1..levels as usize {
            let prev = &qpows[i - 1];
            qpows.push(pmul(prev, prev, pn));
        }
        Radix { pn: pn.clone(), qpows }
    }

    /// sum_l digits[l] * Q^l, by pairwise combination.
    fn recompose(&self, digits: &[Digit]) -> Poly {
        let mut layer: Vec<Poly> = digits
            .iter()
            .map(|d| {
                let mut v: Poly = d.to_vec();
                ptrim(&mut v);
                v
            })
            .collect();
        if layer.is_empty() {
            return vec![BigUint::zero()];
        }
        let mut level = 0usize;
        while layer.len() > 1 {
            let mut next = Vec::with_capacity((layer.len() + 1) / 2);
            let mut it = layer.chunks(2);
            for ch in &mut it {
                if ch.len() == 1 {
                    next.push(ch[0].clone());
                } else {
                    let hi = pmul(&ch[1], &self.qpows[level], &self.pn);
                    next.push(padd(&ch[0], &hi, &self.pn));
                }
            }
            layer = next;
            level += 1;
        }
        layer.pop().unwrap()
    }
}

// ---- bivariate (x, z) arithmetic, x-degree <= 2 per z-position ----

/// sum over i of cols[i](x) * z^{minz + i}, with deg_x <= 2.
#[derive(Clone, Debug)]
struct Biv {
    minz: i64,
    cols: Vec<Digit>,
}

impl Biv {
    fn reduce_mod(&self, pn: &BigUint) -> Biv {
        Biv {
            minz: self.minz,
            cols: self
                .cols
                .iter()
                .map(|d| [&d[0] % pn, &d[1] % pn, &d[2] % pn])
                .collect(),
        }
    }
}

/// Multiply two (x, z) expansions over Z/pn; x^3 and x^4 products are
/// rewritten via x^3 = Q - Ax - B into the next-lower z position, keeping
/// deg_x <= 2. The flattened stride-5 layout keeps cross terms separate.
fn biv_mul(a: &Biv, b: &Biv, pn: &BigUint, qa: &BigUint, qb: &BigUint) -> Biv {
    let fa = flatten5(&a.cols);
    let fb = flatten5(&b.cols);
    let prod = mul_slices(&fa, &fb, pn);
    let ncols = a.cols.len() + b.cols.len() - 1;
    biv_from_product(prod, ncols, a.minz + b.minz, pn, qa, qb)
}

/// Fold a raw stride-5 convolution back into digit columns; x^3 and x^4
/// products are rewritten via x^3 = Q - Ax - B into the next-lower z
/// position, keeping deg_x <= 2.
fn biv_from_product(
    prod: Vec<BigUint>,
    ncols: usize,
    minz_sum: i64,
    pn: &BigUint,
    qa: &BigUint,
    qb: &BigUint,
) -> Biv {
    // one extra low position absorbs the Q carries from x^3, x^4
    let mut cols: Vec<Digit> = vec![
        [BigUint::zero(), BigUint::zero(), BigUint::zero()];
        ncols + 1
    ];
    for m in 0..ncols {
        let slot = |u: usize| -> BigUint {
            prod.get(5 * m + u).cloned().unwrap_or_else(BigUint::zero)
        };
        let (c0, c1, c2, c3, c4) = (slot(0), slot(1), slot(2), slot(3), slot(4));
        // x^3 z^e = z^{e-1} - (Ax + B) z^e; x^4 z^e = x z^{e-1} - (Ax^2 + Bx) z^e
        let s0 = sub_mod(&c0, &((&c3 * qb) % pn), pn);
        let s1 = sub_mod(
            &c1,
            &(((&c3 * qa) % pn + (&c4 * qb) % pn) % pn),
            pn,
        );
        let s2 = sub_mod(&c2, &((&c4 * qa) % pn), pn);
        cols[m + 1][0] = (&cols[m + 1][0] + s0) % pn;
        cols[m + 1][1] = (&cols[m + 1][1] + s1) % pn;
        cols[m + 1][2] = (&cols[m + 1][2] + s2) % pn;
        cols[m][0] = (&cols[m][0] + c3) % pn;
        cols[m][1] = (&cols[m][1] + c4) % pn;
    }
    Biv { minz: minz_sum - 1, cols }
}

fn flatten5(cols: &[Digit]) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); cols.len() * 5];
    for (i, d) in cols.iter().enumerate() {
        out[5 * i] = d[0].clone();
        out[5 * i + 1] = d[1].clone();
        out[5 * i + 2] = d[2].clone();
    }
    out
}

fn biv_scale_add(acc: &mut Biv, term: &Biv, factor: &BigUint, pn: &BigUint) {
    // align acc so it covers term's window
    if term.minz < acc.minz {
        let pad = (acc.minz - term.minz) as usize;
        let mut cols = vec![[BigUint::zero(), BigUint::zero(), BigUint::zero()]; pad];
        cols.extend(std::mem::take(&mut acc.cols));
        acc.cols = cols;
        acc.minz = term.minz;
    }
    let need = (term.minz - acc.minz) as usize + term.cols.len();
    if acc.cols.len() < need {
        acc.cols.resize(need, [BigUint::zero(), BigUint::zero(), BigUint::zero()]);
    }
    let off = (term.minz - acc.minz) as usize;
    for (i, d) in term.cols.iter().enumerate() {
        for u in 0..3 {
            acc.cols[off + i][u] =
                (&acc.cols[off + i][u] + (&d[u] * factor) % pn) % pn;
        }
    }
}

fn biv_trim(b: &mut Biv) {
    while b.cols.len() > 1
        && b.cols.last().map_or(false, |d| d.iter().all(|c| c.is_zero()))
    {
        b.cols.pop();
    }
    let lead = b
        .cols
        .iter()
        .take_while(|d| d.iter().all(|c| c.is_zero()))
        .count()
        .min(b.cols.len() - 1);
    if lead > 0 {
        b.cols.drain(..lead);
        b.minz += lead as i64;
    }
}

/// Multiply a base-Q digit expansion by x; the x^3 overflow is rewritten
/// via x^3 = Q - Ax - B, carrying one digit upward.
fn xshift(a: &Biv, pn: &BigUint, qa: &BigUint, qb: &BigUint) -> Biv {
    let n = a.cols.len();
    let mut cols: Vec<Digit> =
        vec![[BigUint::zero(), BigUint::zero(), BigUint::zero()]; n + 1];
    for (i, d) in a.cols.iter().enumerate() {
        // x (c0 + c1 x + c2 x^2) = c2 Q + (c0 - A c2) x - B c2 + c1 x^2
        cols[i + 1][0] = sub_mod(&cols[i + 1][0], &((&d[2] * qb) % pn), pn);
        cols[i + 1][1] =
            (&cols[i + 1][1] + sub_mod(&d[0], &((&d[2] * qa) % pn), pn)) % pn;
        cols[i + 1][2] = (&cols[i + 1][2] + &d[1]) % pn;
        cols[i][0] = (&cols[i][0] + &d[2]) % pn;
    }
    let mut out = Biv { minz: a.minz - 1, cols };
    biv_trim(&mut out);
    out
}

/// Base-Q digit expansion of x^m (digit l of the result sits at z^{-l}),
/// by binary powering.
fn rep_x_power(m: u64, pn: &BigUint, qa: &BigUint, qb: &BigUint) -> Biv {
    let mut acc = Biv {
        minz: 0,
        cols: vec![[BigUint::one(), BigUint::zero(), BigUint::zero()]],
    };
    for bit in (0..64 - m.leading_zeros()).rev() {
        let mut sq = biv_mul(&acc, &acc, pn, qa, qb);
        biv_trim(&mut sq);
        acc = sq;
        if (m >> bit) & 1 == 1 {
            acc = xshift(&acc, pn, qa, qb);
        }
    }
    acc
}

/// Solve s(x) Q(x) + t(x) Q'(x) = 1 with deg s <= 1, deg t <= 2, over
/// Z/pn (possible since the reduction is nonsingular, so res(Q, Q') is a
/// unit). Returns (s, t).
fn bezout_q_qprime(
    qa: &BigUint,
    qb: &BigUint,
    pn: &BigUint,
    p: &BigUint,
) -> Result<(Poly, Poly)> {
    let z = BigUint::zero;
    let one = BigUint::one();
    let three = BigUint::from(3u32) % pn;
    // unknowns [s0, s1, t0, t1, t2]; rows are x^0..x^4 coefficients
    let mut m: Vec<[BigUint; 6]> = vec![
        [qb.clone(), z(), qa.clone(), z(), z(), one.clone() % pn],
        [qa.clone(), qb.clone(), z(), qa.clone(), z(), z()],
        [z(), qa.clone(), three.clone(), z(), qa.clone(), z()],
        [one.clone() % pn, z(), z(), three.clone(), z(), z()],
        [z(), one % pn, z(), z(), three, z()],
    ];
    for col in 0..5 {
        let pivot = (col..5)
            .find(|&r| !(&m[r][col] % p).is_zero())
            .ok_or_else(|| Error::Internal("singular Bezout system".into()))?;
        m.swap(col, pivot);
        let inv = mod_inv(&m[col][col], pn, p);
        for j in col..6 {
            m[col][j] = (&m[col][j] * &inv) % pn;
        }
        for r in 0..5 {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for j in col..6 {
                let sub = (&f * &m[col][j]) % pn;
                m[r][j] = sub_mod(&m[r][j], &sub, pn);
            }
        }
    }
    let s = vec![m[0][5].clone(), m[1][5].clone()];
    let t = vec![m[2][5].clone(), m[3][5].clone(), m[4][5].clone()];
    Ok((s, t))
}

/// Shared machinery for one (curve, p, precision) Frobenius computation.
struct FrobWork {
    p: BigUint,
    p_u: u64,
    pn: BigUint,
    wtot: u32,
    qa: BigUint,
    qb: BigUint,
    q: Poly,
    qprime: Poly,
    t: Poly,
    /// series inverse of the reversed Q, for divisions in the pole loop
    qrev_inv: Poly,
    radix: Radix,
    /// (1 + pE1 z^p)^{-1/2} as an (x, z) expansion
    u_series: Biv,
    /// base-Q expansion of x^{p-1} (first-column numerator)
    num_first: Biv,
    /// base-Q expansion of x^{2p-1} (second-column numerator)
    num_second: Biv,
    /// forward transforms of the flattened u_series, shared by the images
    u_prep: Option<crate::ntt::PreparedRhs>,
}

impl FrobWork {
    fn new(a: &BigUint, b: &BigUint, p: &BigUint, wtot: u32) -> Result<FrobWork> {
        let p_u = p
            .to_u64()
            .ok_or_else(|| Error::PreconditionViolated("p too large".into()))?;
        let pn = p.pow(wtot);
        let qa = a % &pn;
        let qb = b % &pn;
        // nonsingular reduction: 4A^3 + 27B^2 a unit mod p
        let disc = (BigUint::from(4u32) * &qa * &qa * &qa
            + BigUint::from(27u32) * &qb * &qb)
            % p;
        if disc.is_zero() {
            return Err(Error::SingularReduction);
        }
        let q: Poly = vec![qb.clone(), qa.clone(), BigUint::zero(), BigUint::one()];
        let qprime: Poly = vec![qa.clone(), BigUint::zero(), BigUint::from(3u32) % &pn];

        // base-Q expansions of x^{p-1}, x^p, x^{2p-1}, x^{3p} by binary
        // powering, one extra digit of precision so E1 comes out exact
        let pn1 = &pn * p;
        let qa1 = a % &pn1;
        let qb1 = b % &pn1;
        let rep_xpm1 = rep_x_power(p_u - 1, &pn1, &qa1, &qb1);
        let rep_xp = xshift(&rep_xpm1, &pn1, &qa1, &qb1);
        let mut rep_x2pm1 = biv_mul(&rep_xpm1, &rep_xp, &pn1, &qa1, &qb1);
        biv_trim(&mut rep_x2pm1);
        let mut rep_x3pm1 = biv_mul(&rep_xp, &rep_x2pm1, &pn1, &qa1, &qb1);
        biv_trim(&mut rep_x3pm1);
        let rep_x3p = xshift(&rep_x3pm1, &pn1, &qa1, &qb1);
        drop(rep_x3pm1);

        // E = Q(x^p) - Q^p = x^{3p} + A x^p + B - Q^p; E1 = E/p
        let mut e_rep = rep_x3p;
        biv_scale_add(&mut e_rep, &rep_xp, &qa1, &pn1);
        {
            let i0 = (0 - e_rep.minz) as usize; // digit 0 (z^0)
            e_rep.cols[i0][0] = (&e_rep.cols[i0][0] + &qb1) % &pn1;
            let ip = (-(p_u as i64) - e_rep.minz) as usize; // digit p
            e_rep.cols[ip][0] = sub_mod(&e_rep.cols[ip][0], &BigUint::one(), &pn1);
        }
        let mut v1_cols: Vec<Digit> = Vec::with_capacity(e_rep.cols.len());
        for d in &e_rep.cols {
            let mut nd = [BigUint::zero(), BigUint::zero(), BigUint::zero()];
            for u in 0..3 {
                if !(&d[u] % p).is_zero() {
                    return Err(Error::Internal("E is not divisible by p".into()));
                }
                nd[u] = (&d[u] / p) % &pn;
            }
            v1_cols.push(nd);
        }
        // digit l of E1 contributes at z^{p-l}: shift the window by p
        let mut v1 = Biv { minz: e_rep.minz + p_u as i64, cols: v1_cols };
        biv_trim(&mut v1);
        drop(e_rep);
        let num_first = rep_xpm1.reduce_mod(&pn);
        let num_second = rep_x2pm1.reduce_mod(&pn);
        drop(rep_xpm1);
        drop(rep_x2pm1);

        // recompose only ever sees the short polynomial tail
        let max_digits = p_u as usize / 6 + wtot as usize + 4;
        let mut levels = 1u32;
        while (1usize << levels) < max_digits {
            levels += 1;
        }
        let radix = Radix::new(&q, levels + 1, &pn);
        let (_s, t) = bezout_q_qprime(&qa, &qb, &pn, p)?;
        let qrev_inv = pinv_series(
            &vec![BigUint::one(), BigUint::zero(), qa.clone(), qb.clone()],
            4,
            &pn,
            p,
        );

        // U = sum_k binom(-1/2, k) p^k V1^k, term k needed only mod p^{n-k}
        let mut u_series = Biv {
            minz: 0,
            cols: vec![[BigUint::one(), BigUint::zero(), BigUint::zero()]],
        };
        let inv4 = mod_inv(&(BigUint::from(4u32) % &pn), &pn, p);
        let mut central = BigUint::one(); // C(2k, k), exact
        let mut inv4k = BigUint::one();
        let mut vpow = v1.clone();
        for k in 1..wtot as u64 {
            let pnk = p.pow(wtot - k as u32);
            if k > 1 {
                vpow = biv_mul(
                    &vpow.reduce_mod(&pnk),
                    &v1.reduce_mod(&pnk),
                    &pnk,
                    &(&qa % &pnk),
                    &(&qb % &pnk),
                );
            }
            central = central * BigUint::from(2 * (2 * k - 1)) / BigUint::from(k);
            inv4k = (&inv4k * &inv4) % &pn;
            let mut ck = ((&central % &pn) * &inv4k) % &pn;
            if k % 2 == 1 {
                ck = sub_mod(&BigUint::zero(), &ck, &pn);
            }
            let factor = (ck * p.pow(k as u32)) % &pn;
            biv_scale_add(&mut u_series, &vpow, &factor, &pn);
        }
        biv_trim(&mut u_series);
        let max_num_cols = num_first.cols.len().max(num_second.cols.len());
        let out_len_max = 5 * (u_series.cols.len() + max_num_cols);
        let u_prep = if out_len_max >= crate::series::NTT_CUTOFF
            && crate::ntt::feasible(out_len_max, &pn)
        {
            Some(crate::ntt::prepare_rhs(
                &flatten5(&u_series.cols),
                out_len_max,
                &pn,
            ))
        } else {
            None
        };

        Ok(FrobWork {
            p: p.clone(),
            p_u,
            pn,
            wtot,
            qa,
            qb,
            q,
            qprime,
            t,
            qrev_inv,
            radix,
            u_series,
            num_first,
            num_second,
            u_prep,
        })
    }

    /// Reduce p * numerator(x) * z^{(p-1)/2} * U to c0 dx/y + c1 x dx/y.
    /// Divisions by multiples of p during reduction are handled by scaling
    /// the whole working state and stripping the accumulated power of p from
    /// the final (integral) answer. Returns (c0, c1, valid) where the
    /// entries are correct mod p^valid.
    fn reduce_image(&self, numerator: &Biv) -> Result<(BigUint, BigUint, u32)> {
        let pn = &self.pn;
        let mut r = match &self.u_prep {
            Some(prep) => {
                let fa = flatten5(&numerator.cols);
                let prod = crate::ntt::mul_prepared(&fa, prep, pn);
                let ncols = numerator.cols.len() + self.u_series.cols.len() - 1;
                biv_from_product(
                    prod,
                    ncols,
                    numerator.minz + self.u_series.minz,
                    pn,
                    &self.qa,
                    &self.qb,
                )
            }
            None => biv_mul(numerator, &self.u_series, pn, &self.qa, &self.qb),
        };
        r.minz += (self.p_u as i64 - 1) / 2;
        if r.minz > 0 {
            let pad = r.minz as usize;
            let mut cols =
                vec![[BigUint::zero(), BigUint::zero(), BigUint::zero()]; pad];
            cols.extend(r.cols);
            r.cols = cols;
            r.minz = 0;
        }
        let mut denom = 0u32; // current state is p^denom times the true value

        // pole reduction: from the top z power down to z^1
        let mut idx = r.cols.len();
        while idx > 0 {
            idx -= 1;
            let m = r.minz + idx as i64;
            if m <= 0 {
                break;
            }
            let am: Poly = r.cols[idx].to_vec();
            if pis_zero(&am) {
                continue;
            }
            let at = pmul(&am, &self.t, pn);
            let (_, a_red) = pdivrem_monic(&at, &self.q, pn, &self.p, Some(&self.qrev_inv));
            let aqp = pmul(&a_red, &self.qprime, pn);
            let num = psub(&am, &aqp, pn);
            let (mut b_q, rem) = pdivrem_monic(&num, &self.q, pn, &self.p, Some(&self.qrev_inv));
            if !pis_zero(&rem) {
                return Err(Error::Internal("inexact pole reduction split".into()));
            }
            let mut shift = pderiv(&a_red, pn);
            for c in &mut shift {
                *c = (&*c * 2u32) % pn;
            }
            let (v, odd) = self.split_p((2 * m - 1) as u64);
            if v > 0 {
                let deficit = shift
                    .iter()
                    .filter(|c| !c.is_zero())
                    .map(|c| v - self.vp_capped(c, v))
                    .max()
                    .unwrap_or(0);
                if deficit > 0 {
                    let f = self.p.pow(deficit);
                    for col in r.cols[..idx].iter_mut() {
                        for c in col.iter_mut() {
                            *c = (&*c * &f) % pn;
                        }
                    }
                    for c in &mut b_q {
                        *c = (&*c * &f) % pn;
                    }
                    for c in &mut shift {
                        *c = (&*c * &f) % pn;
                    }
                    denom += deficit;
                }
                let pv = self.p.pow(v);
                for c in &mut shift {
                    *c /= &pv;
                }
            }
            let inv_odd = mod_inv(&(BigUint::from(odd) % pn), pn, &self.p);
            for c in &mut shift {
                *c = (&*c * &inv_odd) % pn;
            }
            let contr = padd(&b_q, &shift, pn);
            for (u, c) in contr.iter().enumerate().take(3) {
                r.cols[idx - 1][u] = (&r.cols[idx - 1][u] + c) % pn;
            }
            if contr.len() > 3 && contr[3..].iter().any(|c| !c.is_zero()) {
                return Err(Error::Internal("pole reduction degree overflow".into()));
            }
        }

        // polynomial part: positions z^0, z^{-1}, ... are digits 0, 1, ...
        let zero_idx = (-r.minz) as usize;
        let digits: Vec<Digit> = (0..=zero_idx)
            .map(|l| r.cols[zero_idx - l].clone())
            .collect();
        drop(r);
        let mut poly = self.radix.recompose(&digits);
        ptrim(&mut poly);

        // x-degree reduction down to degree <= 1
        let mut deg = pdeg(&poly);
        while deg >= 2 {
            let s = deg - 2;
            if !poly[deg].is_zero() {
                let (v, odd) = self.split_p((2 * s + 3) as u64);
                if v > 0 {
                    let deficit = v - self.vp_capped(&poly[deg], v);
                    if deficit > 0 {
                        let f = self.p.pow(deficit);
                        for c in &mut poly {
                            *c = (&*c * &f) % pn;
                        }
                        denom += deficit;
                    }
                    poly[deg] /= self.p.pow(v);
                }
                let mu = (&poly[deg] * mod_inv(&(BigUint::from(odd) % pn), pn, &self.p)) % pn;
                poly[deg] = BigUint::zero();
                let t1 = (&mu * &self.qa % pn) * BigUint::from(2 * s as u64 + 1) % pn;
                poly[s] = sub_mod(&poly[s], &t1, pn);
                if s >= 1 {
                    let t2 = (&mu * &self.qb % pn) * BigUint::from(2 * s as u64) % pn;
                    poly[s - 1] = sub_mod(&poly[s - 1], &t2, pn);
                }
            }
            deg -= 1;
        }
        poly.resize(2, BigUint::zero());

        // true image entries are p * poly / p^denom
        if denom == 0 {
            for c in &mut poly {
                *c = (&*c * &self.p) % pn;
            }
        } else if denom > 1 {
            let strip = self.p.pow(denom - 1);
            for c in &mut poly {
                if !(&*c % &strip).is_zero() {
                    return Err(Error::Internal(
                        "working-precision guard exhausted in reduction".into(),
                    ));
                }
                *c /= &strip;
            }
        }
        let valid = self
            .wtot
            .checked_sub(denom.saturating_sub(1))
            .ok_or_else(|| {
                Error::Internal("working-precision guard exhausted in reduction".into())
            })?;
        let (c0, c1) = (poly.swap_remove(0), poly.pop().unwrap());
        Ok((c0, c1, valid))
    }

    fn split_p(&self, d: u64) -> (u32, u64) {
        let mut v = 0u32;
        let mut odd = d;
        while odd % self.p_u == 0 {
            odd /= self.p_u;
            v += 1;
        }
        (v, odd)
    }

    fn vp_capped(&self, c: &BigUint, cap: u32) -> u32 {
        let mut v = 0u32;
        let mut c = c.clone();
        while v < cap && (&c % &self.p).is_zero() {
            c /= &self.p;
            v += 1;
        }
        v
    }
}

/// Working precision for an honest mod-p^N answer, guard included.
pub fn working_precision(p: &BigUint, n: u32) -> u32 {
    let pf = p.to_f64().unwrap_or(1e9);
    let zmax = (n as f64 + 6.0) * pf;
    let logp = |x: f64| (x.ln() / pf.ln()).ceil().max(1.0) as u32;
    n + logp(2.0 * zmax + 3.0) + 2
}

/// Full two-column Frobenius matrix mod p^n. The inputs must carry enough
/// extra digits (`working_precision(p, n)`) for the reduction losses; the
/// determinant is checked against p mod p^n.
pub fn kedlaya_frobenius_matrix(a: &ZModPN, b: &ZModPN, n: u32) -> Result<FrobeniusMatrix> {
    let m_in = a.modulus();
    let p = m_in.prime().clone();
    let wtot = m_in.exponent();
    if wtot < n {
        return Err(Error::PreconditionViolated(
            "inputs carry fewer digits than the requested output".into(),
        ));
    }
    let work = FrobWork::new(a.value(), b.value(), &p, wtot)?;
    let (f11, f21, v1) = work.reduce_image(&work.num_first)?;
    let (f12, f22, v2) = work.reduce_image(&work.num_second)?;
    if v1 < n || v2 < n {
        return Err(Error::Internal(
            "working-precision guard exhausted in reduction".into(),
        ));
    }
    let m_out = Modulus::new(p.clone(), n);
    let f = FrobeniusMatrix {
        n,
        a: ZModPN::new(&m_out, f11),
        b: ZModPN::new(&m_out, f12),
        c: ZModPN::new(&m_out, f21),
        d: ZModPN::new(&m_out, f22),
    };
    if f.det() != ZModPN::from_bigint(&m_out, &BigInt::from(p.clone())) {
        return Err(Error::Internal(
            "Frobenius determinant check failed; increase working precision".into(),
        ));
    }
    Ok(f)
}

/// E2(E, omega) = -12 B/D where F^n = [[A, B], [C, D]].
pub fn e2_from_matrix(f: &FrobeniusMatrix, n: u32) -> Result<ZModPN> {
    let m = Modulus::new(f.a.modulus().prime().clone(), n);
    let g = FrobeniusMatrix {
        n,
        a: f.a.retarget(&m),
        b: f.b.retarget(&m),
        c: f.c.retarget(&m),
        d: f.d.retarget(&m),
    };
    let fn_ = g.pow(n);
    let d_inv = fn_.d.inv().map_err(|_| {
        Error::Internal("bottom-right entry of F^N is not a unit".into())
    })?;
    Ok(fn_.b.mul(&d_inv).mul(&ZModPN::from_i64(&m, -12)))
}

/// Fill in the first column of F from its second column plus trace and
/// determinant. Returns the matrix and the per-entry valid precision
/// [A, B, C, D]; C loses v_p(B) digits.
pub fn complete_matrix_from_column(
    second_col: (&ZModPN, &ZModPN),
    trace: &ZModPN,
    det: &ZModPN,
) -> Result<(FrobeniusMatrix, [u32; 4])> {
    let (b, d) = second_col;
    let m = b.modulus().clone();
    let n = m.exponent();
    let v = b.valuation();
    if v >= n {
        return Err(Error::DegenerateColumn);
    }
    let a = trace.sub(d);
    // C = (AD - det)/B
    let num = a.mul(d).sub(det);
    let num_shift = num
        .shift_down(v)
        .map_err(|_| Error::Internal("AD - det has smaller valuation than B".into()))?;
    let b_unit = b.shift_down(v).expect("v = v_p(B)");
    let c = num_shift.mul(&b_unit.inv()?);
    let f = FrobeniusMatrix { n, a, b: b.clone(), c, d: d.clone() };
    Ok((f, [n, n, n - v, n]))
}

/// One-column Frobenius computation per the trace/determinant shortcut:
/// probe the top-right entry mod p; if it is a unit compute the second
/// column at full precision and complete, otherwise run on the basis
/// {dx/y, (1+x)dx/y} (unit top-right guaranteed) and conjugate back.
pub fn kedlaya_with_column_trick(
    a: &ZModPN,
    b: &ZModPN,
    n: u32,
    a_p: i64,
) -> Result<FrobeniusMatrix> {
    let m_in = a.modulus();
    let p = m_in.prime().clone();
    let wtot = m_in.exponent();
    if wtot < n {
        return Err(Error::PreconditionViolated(
            "inputs carry fewer digits than the requested output".into(),
        ));
    }
    let m_out = Modulus::new(p.clone(), n);
    let trace = ZModPN::from_i64(&m_out, a_p);
    let det = ZModPN::from_bigint(&m_out, &BigInt::from(p.clone()));

    // cheap probe of the top-right entry mod p
    let probe_prec = working_precision(&p, 1).min(wtot);
    let probe = FrobWork::new(a.value(), b.value(), &p, probe_prec)?;
    let (top, _, probe_valid) = probe.reduce_image(&probe.num_second)?;
    if probe_valid < 1 {
        return Err(Error::Internal("probe lost all precision".into()));
    }
    let top_unit = !((top % &p).is_zero());

    let work = FrobWork::new(a.value(), b.value(), &p, wtot)?;
    let f = if top_unit {
        let (f12, f22, valid) = work.reduce_image(&work.num_second)?;
        if valid < n {
            return Err(Error::Internal(
                "working-precision guard exhausted in reduction".into(),
            ));
        }
        let b2 = ZModPN::new(&m_out, f12);
        let d2 = ZModPN::new(&m_out, f22);
        let (f, _report) = complete_matrix_from_column((&b2, &d2), &trace, &det)?;
        f
    } else {
        // image of (1 + x) dx/y in the old coordinates
        let mut num = work.num_second.clone();
        biv_scale_add(&mut num, &work.num_first, &BigUint::one(), &work.pn);
        let (u, v, valid) = work.reduce_image(&num)?;
        if valid < n {
            return Err(Error::Internal(
                "working-precision guard exhausted in reduction".into(),
            ));
        }
        let g12 = ZModPN::new(&m_out, u).sub(&ZModPN::new(&m_out, v.clone()));
        let g22 = ZModPN::new(&m_out, v.clone());
        let (g, _report) = complete_matrix_from_column((&g12, &g22), &trace, &det)?;
        // F = C G C^{-1} for the change of basis C = [[1, 1], [0, 1]]
        FrobeniusMatrix {
            n,
            a: g.a.add(&g.c),
            b: g.b.add(&g.d).sub(&g.a).sub(&g.c),
            c: g.c.clone(),
            d: g.d.sub(&g.c),
        }
    };
    if f.trace() != trace {
        return Err(Error::Internal("trace check failed after completion".into()));
    }
    Ok(f)
}

/// Frobenius matrix mod p^n for the curve's discriminant-preserving short
/// model, with the working-precision retry envelope and the a_p trace check
/// (skipped above the point-counting budget).
pub fn compute_frobenius(
    e: &CurveQ,
    p: &BigUint,
    n: u32,
    use_column_trick: bool,
) -> Result<FrobeniusMatrix> {
    let p_u = p.to_u64().unwrap_or(u64::MAX);
    let a_p = if p_u <= 1_000_000 {
        if !e.is_good_ordinary(p_u)? {
            return Err(Error::NotGoodOrdinary(p.to_string()));
        }
        Some(e.count_points(p_u)?.1)
    } else {
        None // counting budget exceeded: trace check skipped
    };
    if use_column_trick && a_p.is_none() {
        return Err(Error::EnumerationBudget(p.to_string()));
    }
    let (sa, sb) = e.short_weierstrass_model();

    let mut last_err = Error::Internal("unreachable".into());
    for extra in [0u32, 2, 4] {
        let wtot = working_precision(p, n) + extra;
        let mw = Modulus::new(p.clone(), wtot);
        let a = rat_to_zmod(&sa, &mw)?;
        let b = rat_to_zmod(&sb, &mw)?;
        let attempt = if use_column_trick {
            kedlaya_with_column_trick(&a, &b, n, a_p.expect("checked above"))
        } else {
            kedlaya_frobenius_matrix(&a, &b, n).and_then(|f| {
                if let Some(ap) = a_p {
                    let m_out = f.a.modulus();
                    if f.trace() != ZModPN::from_i64(m_out, ap) {
                        return Err(Error::Internal("trace check failed".into()));
                    }
                }
                Ok(f)
            })
        };
        match attempt {
            Ok(f) => return Ok(f),
            Err(err @ Error::Internal(_)) => last_err = err,
            Err(err) => return Err(err),
        }
    }
    Err(last_err)
}

/// E2(E, omega) for the invariant differential of the given model: the
/// discriminant-preserving short model has the same omega, so no weight-two
/// adjustment is needed.
pub fn compute_e2(
    e: &CurveQ,
    p: &BigUint,
    n: u32,
    use_column_trick: bool,
) -> Result<ZModPN> {
    let f = compute_frobenius(e, p, n, use_column_trick)?;
    e2_from_matrix(&f, n)
}

fn rat_to_zmod(r: &num_rational::BigRational, m: &Arc<Modulus>) -> Result<ZModPN> {
    let num = ZModPN::from_bigint(m, r.numer());
    let den = ZModPN::from_bigint(m, r.denom());
    Ok(num.mul(&den.inv()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn short_inputs(a_num: i64, a_den: i64, b_num: i64, b_den: i64, p: u64, wtot: u32) -> (ZModPN, ZModPN) {
        let m = Modulus::new(BigUint::from(p), wtot);
        let ra = BigRational::new(BigInt::from(a_num), BigInt::from(a_den));
        let rb = BigRational::new(BigInt::from(b_num), BigInt::from(b_den));
        (rat_to_zmod(&ra, &m).unwrap(), rat_to_zmod(&rb, &m).unwrap())
    }

    fn assert_entries(f: &FrobeniusMatrix, want: [u64; 4]) {
        let m = f.a.modulus();
        assert_eq!(f.a, ZModPN::from_u64(m, want[0]));
        assert_eq!(f.b, ZModPN::from_u64(m, want[1]));
        assert_eq!(f.c, ZModPN::from_u64(m, want[2]));
        assert_eq!(f.d, ZModPN::from_u64(m, want[3]));
    }

    #[test]
    fn frobenius_matrix_badly_conditioned_curve() {
        // y^2 = x^3 + 7x + 8 at p = 11: top-right entry has valuation 1
        let w = working_precision(&BigUint::from(11u32), 3);
        let (a, b) = short_inputs(7, 1, 8, 1, 11, w);
        let f = kedlaya_frobenius_matrix(&a, &b, 3).unwrap();
        assert_entries(&f, [11 * 104, 11 * 16, 121 * 7, 185]);
    }

    #[test]
    fn column_trick_uses_alternate_basis() {
        let w = working_precision(&BigUint::from(11u32), 3);
        let (a, b) = short_inputs(7, 1, 8, 1, 11, w);
        let full = kedlaya_frobenius_matrix(&a, &b, 3).unwrap();
        let trick = kedlaya_with_column_trick(&a, &b, 3, -2).unwrap();
        assert_eq!(full, trick);
    }

    #[test]
    fn completion_precision_report() {
        let m = Modulus::new(BigUint::from(11u32), 3);
        let b = ZModPN::from_u64(&m, 11 * 16);
        let d = ZModPN::from_u64(&m, 185);
        let trace = ZModPN::from_i64(&m, -2);
        let det = ZModPN::from_u64(&m, 11);
        let (f, report) = complete_matrix_from_column((&b, &d), &trace, &det).unwrap();
        assert_eq!(report, [3, 3, 2, 3]);
        assert_eq!(f.a, ZModPN::from_u64(&m, 11 * 104));
        // C is only valid mod 11^2
        assert_eq!(f.c.value() % BigUint::from(121u32), BigUint::from(121u32 * 7) % 121u32);
    }

    #[test]
    fn completion_rejects_zero_column_top() {
        let m = Modulus::new(BigUint::from(11u32), 3);
        let b = ZModPN::zero(&m);
        let d = ZModPN::from_u64(&m, 185);
        let trace = ZModPN::from_i64(&m, -2);
        let det = ZModPN::from_u64(&m, 11);
        assert!(matches!(
            complete_matrix_from_column((&b, &d), &trace, &det),
            Err(Error::DegenerateColumn)
        ));
    }

    #[test]
    fn frobenius_matrix_214a1_short_model() {
        let w = working_precision(&BigUint::from(43u32), 6);
        let (a, b) = short_inputs(-577, 48, 14689, 864, 43, w);
        let f = kedlaya_frobenius_matrix(&a, &b, 6).unwrap();
        assert_entries(&f, [4996923274, 3651910366, 1002107518, 1324439776]);
        let f6 = f.pow(6);
        assert_entries(&f6, [3987851820, 4837860471, 1528699020, 2333368599]);
        let e2 = e2_from_matrix(&f, 6).unwrap();
        assert_eq!(e2, ZModPN::from_u64(f.a.modulus(), 5899790810));
        // unit top-right entry: no basis change needed
        let trick = kedlaya_with_column_trick(&a, &b, 6, 1).unwrap();
        assert_eq!(f, trick);
    }

    #[test]
    fn e2_26a2() {
        let e = CurveQ::from_i64([1, 0, 1, -460, -3830]).unwrap();
        let p = BigUint::from(5u32);
        let m = Modulus::new(p.clone(), 6);
        let want = ZModPN::from_u64(&m, 4303);
        assert_eq!(compute_e2(&e, &p, 6, false).unwrap(), want);
        assert_eq!(compute_e2(&e, &p, 6, true).unwrap(), want);
    }

    #[test]
    fn e2_214a1_from_curve() {
        let e = CurveQ::from_i64([1, 0, 0, -12, 16]).unwrap();
        let p = BigUint::from(43u32);
        let m = Modulus::new(p.clone(), 6);
        assert_eq!(
            compute_e2(&e, &p, 6, false).unwrap(),
            ZModPN::from_u64(&m, 5899790810)
        );
    }

    #[test]
    fn e2_92b1_low_digits() {
        let e = CurveQ::from_i64([0, 0, 0, -1, 1]).unwrap();
        let p = BigUint::from(5u32);
        let e2 = compute_e2(&e, &p, 8, false).unwrap();
        let digits = e2.digits();
        assert_eq!(digits, vec![3, 2, 0, 2, 0, 3, 0, 2]);
    }

    #[test]
    fn e2_precision_coherent() {
        let e = CurveQ::from_i64([1, 0, 1, -460, -3830]).unwrap();
        let p = BigUint::from(5u32);
        let lo = compute_e2(&e, &p, 4, false).unwrap();
        let hi = compute_e2(&e, &p, 6, false).unwrap();
        let m4 = Modulus::new(p.clone(), 4);
        assert_eq!(lo, hi.retarget(&m4));
    }

    #[test]
    fn characteristic_polynomial_small_curves() {
        for &(ea, eb, p) in &[(2i64, 3i64, 5u64), (1, 1, 7), (-2, 5, 13), (3, -4, 11)] {
            let e = CurveQ::from_i64([0, 0, 0, ea, eb]).unwrap();
            if !e.is_good_ordinary(p).unwrap() {
                continue;
            }
            let (_, ap) = e.count_points(p).unwrap();
            let n = 4u32;
            let w = working_precision(&BigUint::from(p), n);
            let (a, b) = short_inputs(ea, 1, eb, 1, p, w);
            let f = kedlaya_frobenius_matrix(&a, &b, n).unwrap();
            let m = f.a.modulus().clone();
            assert_eq!(f.det(), ZModPN::from_u64(&m, p));
            assert_eq!(f.trace(), ZModPN::from_i64(&m, ap));
            // F^2 - a_p F + p = 0
            let f2 = f.pow(2);
            let apz = ZModPN::from_i64(&m, ap);
            let pz = ZModPN::from_u64(&m, p);
            assert!(f2.a.sub(&apz.mul(&f.a)).add(&pz).is_zero());
            assert!(f2.b.sub(&apz.mul(&f.b)).is_zero());
            assert!(f2.c.sub(&apz.mul(&f.c)).is_zero());
            assert!(f2.d.sub(&apz.mul(&f.d)).add(&pz).is_zero());
        }
    }

    #[test]
    fn e2_zero_for_zero_top_right() {
        let m = Modulus::new(BigUint::from(7u32), 3);
        let f = FrobeniusMatrix {
            n: 3,
            a: ZModPN::from_u64(&m, 1),
            b: ZModPN::zero(&m),
            c: ZModPN::from_u64(&m, 2),
            d: ZModPN::from_u64(&m, 6),
        };
        assert!(e2_from_matrix(&f, 3).unwrap().is_zero());
    }

    #[test]
    fn singular_reduction_rejected() {
        // x^3 - 3x + 2 = (x - 1)^2 (x + 2) has a double root mod every p
        let w = working_precision(&BigUint::from(7u32), 2);
        let (a, b) = short_inputs(-3, 1, 2, 1, 7, w);
        assert!(matches!(
            kedlaya_frobenius_matrix(&a, &b, 2),
            Err(Error::SingularReduction)
        ));
    }
}
