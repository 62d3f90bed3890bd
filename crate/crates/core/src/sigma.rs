//! The p-adic sigma function mod the ideal I_N = (p^N, p^{N-1}t, ..., t^N).
//!
//! From E2 mod p^{N-3} one forms c, the auxiliary series
//! h(t) = -1/t - ω(t)(∫(x(t)+c)ω(t)dt + a1/2), and solves θ'/θ = h by a
//! division-free doubling iteration. σ = t·θ, with the coefficient of t^k
//! retained mod p^{N-k}.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::curve::CurveQ;
use crate::error::{Error, Result};
use crate::formal_group::{formal_group, FormalGroupData};
use crate::padic::{Modulus, ZModPN};
use crate::series::{IdealSeries, PadicSeries};

/// σ_p(t) = t + c_2 t^2 + ... with c_k known mod p^{N-k}; c_2 = a1/2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaSeries {
    pub series: IdealSeries,
}

impl SigmaSeries {
    pub fn ideal_index(&self) -> u32 {
        self.series.ideal_index()
    }

    /// (c_k mod p^{N-k}, N-k) for 1 <= k < N.
    pub fn coeff(&self, k: u32) -> (BigUint, u32) {
        self.series.coeff(k)
    }
}

/// h(t) with the constant term carried separately mod p^{N-2}; the stored
/// regular part lives at the flat modulus p^{N-3} and `profile[j]` is the
/// exponent to which the t^j coefficient is actually correct.
#[derive(Clone, Debug)]
pub struct HSeries {
    pub constant: ZModPN,
    pub regular: PadicSeries,
    pub profile: Vec<u32>,
}

/// c = (a1^2 + 4 a2 - E2) / 12 at the precision of the supplied E2.
pub fn compute_c(e: &CurveQ, e2: &ZModPN) -> ZModPN {
    let m = e2.modulus();
    let num = ZModPN::from_bigint(m, &(&e.a1 * &e.a1 + 4 * &e.a2)).sub(e2);
    num.mul(&ZModPN::from_u64(m, 12).inv().expect("12 is a unit for p >= 5"))
}

/// Build h(t) from the formal-group data: integrate (x+c)ω, add a1/2, and
/// cancel the -1/t pole against ω's leading term (asserted, not assumed).
pub fn compute_h_hat(e: &CurveQ, fg: &FormalGroupData, c: &ZModPN) -> Result<HSeries> {
    let m = fg.modulus().clone();
    let n = fg.n;
    let trunc = (n + 1) as usize;
    let c = c.retarget(&m);

    let x = fg.x_unit.shift(-2);
    let integrand = x.add_scalar(&c).mul(&fg.omega, trunc)?;
    let (integral, _losses) = integrand.integrate()?;
    let half_a1 = ZModPN::from_bigint(&m, &e.a1)
        .mul(&ZModPN::from_u64(&m, 2).inv()?);
    let j_series = integral.add_scalar(&half_a1);

    let omega0 = fg.omega.coeff_at(0);
    if omega0 != ZModPN::one(&m) {
        return Err(Error::Internal("omega(0) != 1".into()));
    }
    let prod = fg.omega.mul(&j_series, trunc)?;
    let pole = prod.coeff_at(-1);
    if pole != ZModPN::from_i64(&m, -1) {
        return Err(Error::Internal(
            "t^{-1} coefficient of omega * integral did not cancel".into(),
        ));
    }
    // h = -1/t - ω·J: the poles cancel and the regular part is -ω·J
    let mut reg = Vec::with_capacity(n as usize);
    for j in 0..n as i64 {
        reg.push(prod.coeff_at(j).neg());
    }
    let regular = PadicSeries::new(&m, 0, reg);

    // the constant term is a1/2 exactly, lifted one digit higher
    let m_hi = Modulus::new(m.prime().clone(), m.exponent() + 1);
    let constant = ZModPN::from_bigint(&m_hi, &e.a1)
        .mul(&ZModPN::from_u64(&m_hi, 2).inv()?);

    let p_small = m.prime().to_u64();
    let mut profile = vec![m.exponent()];
    for j in 1..n as u64 {
        let log = match p_small {
            Some(p) => {
                let mut l = 0u32;
                let mut q = p;
                while q <= j {
                    l += 1;
                    q = q.saturating_mul(p);
                }
                l
            }
            None => 0,
        };
        profile.push(m.exponent().saturating_sub(log));
    }
    Ok(HSeries { constant, regular, profile })
}

/// Solve F'/F = f with F(0) = 1 over Z/p^k Z, mod (t^n, J) where
/// J = (p^{k-1}t^p, p^{k-2}t^{p^2}, ...). Doubling iteration
/// F <- F(1 - ∫(F'/F - f)); returns every iterate, final one last.
pub fn brent_iterates(f: &PadicSeries, n: usize) -> Result<Vec<PadicSeries>> {
    let m = f.modulus().clone();
    let k = m.exponent();
    let nb = BigUint::from(n as u64);
    // n < p^{k/2} <=> n^2 < p^k
    if &nb * &nb >= *m.power() {
        return Err(Error::PreconditionViolated(format!(
            "brent solver needs n < p^{{k/2}}: n = {}, k = {}",
            n, k
        )));
    }
    let mut iterates = Vec::new();
    let mut big_f = PadicSeries::one(&m);
    iterates.push(big_f.clone());
    let mut t = 1usize;
    while t < n {
        t = (2 * t).min(n);
        let deriv = big_f.derivative();
        let integrand = deriv
            .mul(&big_f.inv(t)?, t)?
            .sub(&f.truncate(t))?
            .truncate(t);
        let (g, _) = integrand.integrate()?;
        let one_minus_g = PadicSeries::one(&m).sub(&g.truncate(t))?;
        big_f = big_f.mul(&one_minus_g, t)?;
        iterates.push(big_f.clone());
    }
    Ok(iterates)
}

pub fn brent_solve(f: &PadicSeries, n: usize) -> Result<PadicSeries> {
    Ok(brent_iterates(f, n)?.pop().expect("at least one iterate"))
}

/// σ_p(t) mod I_N. For N <= 3 the answer t + (a1/2)t^2 + O(I_N) needs no
/// E2; otherwise e2 must be supplied mod p^{N-3} (or finer).
pub fn compute_sigma(
    e: &CurveQ,
    p: &BigUint,
    n: u32,
    e2: Option<&ZModPN>,
) -> Result<SigmaSeries> {
    if n <= 3 {
        return trivial_sigma(e, p, n);
    }
    let e2 = e2.ok_or_else(|| {
        Error::PreconditionViolated("E2 required for N >= 4".into())
    })?;
    let fg = formal_group(e, p, n)?;
    let m = fg.modulus().clone();
    let c = compute_c(e, &e2.retarget(&m));
    let h = compute_h_hat(e, &fg, &c)?;

    // solver runs at k = N-2 on the lifted h
    let mk = self::lift_modulus(&m);
    let mut f_coeffs = vec![h.constant.clone()];
    for c in &h.regular.coeffs()[1..] {
        f_coeffs.push(c.retarget(&mk));
    }
    let f = PadicSeries::new(&mk, 0, f_coeffs);
    let theta = brent_solve(&f, (n - 1) as usize)?;

    assemble_sigma(e, p, n, &theta)
}

fn lift_modulus(m: &std::sync::Arc<Modulus>) -> std::sync::Arc<Modulus> {
    Modulus::new(m.prime().clone(), m.exponent() + 1)
}

fn trivial_sigma(e: &CurveQ, p: &BigUint, n: u32) -> Result<SigmaSeries> {
    assert!(n >= 1);
    let mut coeffs = Vec::new();
    if n >= 2 {
        coeffs.push(BigUint::from(1u32)); // c_1 = 1
    }
    if n >= 3 {
        let m = Modulus::new(p.clone(), n - 2);
        let half_a1 = ZModPN::from_bigint(&m, &e.a1)
            .mul(&ZModPN::from_u64(&m, 2).inv()?);
        coeffs.push(half_a1.value().clone());
    }
    Ok(SigmaSeries { series: IdealSeries::new(p.clone(), n, coeffs) })
}

/// Pack θ's coefficients into I_N slots: c_k = θ[k-1] mod p^{N-k}, with
/// c_2 forced to a1/2 at full slot precision.
fn assemble_sigma(e: &CurveQ, p: &BigUint, n: u32, theta: &PadicSeries) -> Result<SigmaSeries> {
    let mut coeffs = Vec::with_capacity((n - 1) as usize);
    coeffs.push(BigUint::from(1u32)); // c_1
    for k in 2..n {
        if k == 2 {
            let m2 = Modulus::new(p.clone(), n - 2);
            let half_a1 = ZModPN::from_bigint(&m2, &e.a1)
                .mul(&ZModPN::from_u64(&m2, 2).inv()?);
            coeffs.push(half_a1.value().clone());
        } else {
            let c = theta.coeff_at((k - 1) as i64);
            coeffs.push(c.value() % p.pow(n - k));
        }
    }
    Ok(SigmaSeries { series: IdealSeries::new(p.clone(), n, coeffs) })
}
