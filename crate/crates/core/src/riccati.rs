//! Riccati-Bessel functions of real and modified argument.
//!
//! Conventions:
//!
//! ```text
//! ĵ_l(z) = sqrt(pi z / 2) J_{l+1/2}(z)     ĵ_0 = sin z
//! ŷ_l(z) = sqrt(pi z / 2) N_{l+1/2}(z)     ŷ_0 = -cos z
//! s_l(x) = sqrt(pi x / 2) I_{l+1/2}(x)     s_0 = sinh x
//! e_l(x) = sqrt(2 x / pi) K_{l+1/2}(x)     e_0 = exp(-x)
//! ```
//!
//! so that `ĵ ŷ' - ĵ' ŷ = 1` and `s e' - s' e = -1`.
//!
//! The regular functions are computed by Miller-type downward recurrence seeded with a
//! continued fraction for the top ratio and normalised against a closed-form anchor;
//! the irregular ones by upward recurrence. Internally every value carries its own
//! binary exponent, so orders deep in the evanescent region (`ĵ_l ~ z^{l+1}/(2l+1)!!`)
//! neither underflow nor overflow before they are combined into the O(1) products
//! the Jost functions need.

use serde::Serialize;

use crate::error::{check_positive, Error, Result};

/// Value and first derivative of one Riccati-Bessel function at one order and argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiccatiEval {
    pub order: u32,
    pub argument: f64,
    pub value: f64,
    pub derivative: f64,
}

impl RiccatiEval {
    /// `w''` from the defining equation `w'' = (l(l+1)/z^2 - 1) w` of the real-argument
    /// functions.
    pub fn second_derivative(&self) -> f64 {
        ode_factor(self.order, self.argument) * self.value
    }
}

#[inline]
pub(crate) fn ode_factor(order: u32, z: f64) -> f64 {
    let l = f64::from(order);
    l * (l + 1.0) / (z * z) - 1.0
}

/// Orders above this are rejected; the recurrences are validated up to here.
pub const MAX_ORDER: u32 = 2000;

const RESCALE_EXP: i32 = 600;

fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Splits `x` into a mantissa in `[0.5, 1)` and a binary exponent.
fn frexp(x: f64) -> (f64, i32) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        let (m, e) = frexp(x * pow2(64));
        return (m, e - 64);
    }
    let mantissa = f64::from_bits((bits & !(0x7ff_u64 << 52)) | (1022_u64 << 52));
    (mantissa, raw - 1022)
}

/// `x * 2^e` without intermediate overflow of the power.
pub(crate) fn ldexp(mut x: f64, mut e: i32) -> f64 {
    while e > 1000 {
        x *= pow2(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= pow2(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * pow2(e)
}

/// `x * 2^e2 * exp(t)` without intermediate over/underflow.
fn scale_exp(x: f64, e2: i32, t: f64) -> f64 {
    let k = (t / std::f64::consts::LN_2).round();
    let rest = t - k * std::f64::consts::LN_2;
    ldexp(x * rest.exp(), e2.saturating_add(k as i32))
}

/// A value/derivative pair sharing one binary exponent: `(value, derivative) * 2^exp`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    value: f64,
    derivative: f64,
    exp: i32,
}

impl Scaled {
    fn value(&self) -> f64 {
        ldexp(self.value, self.exp)
    }

    fn derivative(&self) -> f64 {
        ldexp(self.derivative, self.exp)
    }
}

/// Raw recurrence output: mantissas with per-entry exponents.
struct Sequence {
    mant: Vec<f64>,
    exp: Vec<i32>,
}

impl Sequence {
    fn zeros(n: usize) -> Self {
        Self {
            mant: vec![0.0; n],
            exp: vec![0; n],
        }
    }

    /// Renormalise every mantissa into `[0.5, 1)`.
    fn normalize(&mut self) {
        for (m, e) in self.mant.iter_mut().zip(self.exp.iter_mut()) {
            let (nm, ne) = frexp(*m);
            *m = nm;
            *e += ne;
        }
    }

    /// Entry `k` expressed in units of `2^exp`.
    fn in_units(&self, k: usize, exp: i32) -> f64 {
        ldexp(self.mant[k], self.exp[k] - exp)
    }
}

/// Top ratio `f_{n}/f_{n-1}` of the minimal solution of
/// `f_{k-1} = b_k f_k + sign * f_{k+1}` with `b_k = (2k+1)/x`, by modified Lentz.
///
/// `sign = -1` gives the ratio for ĵ, `sign = +1` the ratio for s.
fn top_ratio(n: usize, x: f64, sign: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let b = |k: usize| (2 * k + 1) as f64 / x;
    // ratio = 1 / (b_n + sign / (b_{n+1} + sign / ...))
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for i in 0..1_000_000 {
        let a = if i == 0 { 1.0 } else { sign };
        let bk = b(n + i);
        d = bk + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = bk + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    f
}

/// ĵ_0..=ĵ_n at `z` (mantissa/exponent form, not yet normalised).
fn regular_real(n: usize, z: f64) -> Sequence {
    let (s, c) = z.sin_cos();
    let mut seq = Sequence::zeros(n + 1);
    if n as f64 <= z {
        // Oscillatory over the whole range: upward recurrence is stable.
        seq.mant[0] = s;
        if n >= 1 {
            seq.mant[1] = s / z - c;
        }
        for k in 1..n {
            seq.mant[k + 1] = (2 * k + 1) as f64 / z * seq.mant[k] - seq.mant[k - 1];
        }
        return seq;
    }

    let limit = pow2(RESCALE_EXP);
    let mut above = top_ratio(n + 1, z, -1.0);
    let mut current = 1.0;
    let mut run = 0;
    seq.mant[n] = 1.0;
    for k in (1..=n).rev() {
        let below = (2 * k + 1) as f64 / z * current - above;
        above = current;
        current = below;
        if current.abs() > limit {
            current *= pow2(-RESCALE_EXP);
            above *= pow2(-RESCALE_EXP);
            run += RESCALE_EXP;
        }
        seq.mant[k - 1] = current;
        seq.exp[k - 1] = run;
    }

    let (anchor_order, anchor) = if z < 1.0 || s.abs() >= 0.5 {
        (0, s)
    } else {
        (1, s / z - c)
    };
    let factor = anchor / seq.mant[anchor_order];
    let base = seq.exp[anchor_order];
    for (m, e) in seq.mant.iter_mut().zip(seq.exp.iter_mut()) {
        *m *= factor;
        *e -= base;
    }
    seq
}

/// ŷ_0..=ŷ_n at `z` by upward recurrence.
fn irregular_real(n: usize, z: f64) -> Sequence {
    let (s, c) = z.sin_cos();
    let mut seq = Sequence::zeros(n + 1);
    seq.mant[0] = -c;
    if n == 0 {
        return seq;
    }
    let limit = pow2(RESCALE_EXP);
    let mut below = -c;
    let mut current = -c / z - s;
    let mut run = 0;
    seq.mant[1] = current;
    for k in 1..n {
        let above = (2 * k + 1) as f64 / z * current - below;
        below = current;
        current = above;
        if current.abs() > limit {
            current *= pow2(-RESCALE_EXP);
            below *= pow2(-RESCALE_EXP);
            run += RESCALE_EXP;
        }
        seq.mant[k + 1] = current;
        seq.exp[k + 1] = run;
    }
    seq
}

/// s̃_l = s_l e^{-x} for l = 0..=n.
fn regular_modified(n: usize, x: f64) -> Sequence {
    let em2 = (-2.0 * x).exp();
    let s0 = -(-2.0 * x).exp_m1() / 2.0;
    let sm1 = (1.0 + em2) / 2.0;
    let mut seq = Sequence::zeros(n + 1);
    if (n * n) as f64 <= x {
        // Growth of the dominant solution over this range is at most ~e^{n^2/x}.
        seq.mant[0] = s0;
        let mut below = sm1;
        let mut current = s0;
        for k in 0..n {
            let above = below - (2 * k + 1) as f64 / x * current;
            below = current;
            current = above;
            seq.mant[k + 1] = current;
        }
        return seq;
    }

    let limit = pow2(RESCALE_EXP);
    let mut above = top_ratio(n + 1, x, 1.0);
    let mut current = 1.0;
    let mut run = 0;
    seq.mant[n] = 1.0;
    for k in (1..=n).rev() {
        let below = (2 * k + 1) as f64 / x * current + above;
        above = current;
        current = below;
        if current.abs() > limit {
            current *= pow2(-RESCALE_EXP);
            above *= pow2(-RESCALE_EXP);
            run += RESCALE_EXP;
        }
        seq.mant[k - 1] = current;
        seq.exp[k - 1] = run;
    }
    let factor = s0 / seq.mant[0];
    let base = seq.exp[0];
    for (m, e) in seq.mant.iter_mut().zip(seq.exp.iter_mut()) {
        *m *= factor;
        *e -= base;
    }
    seq
}

/// ẽ_l = e_l e^{x} for l = 0..=n.
fn irregular_modified(n: usize, x: f64) -> Sequence {
    let mut seq = Sequence::zeros(n + 1);
    seq.mant[0] = 1.0;
    let limit = pow2(RESCALE_EXP);
    let mut below = 1.0;
    let mut current = 1.0;
    let mut run = 0;
    for k in 0..n {
        let above = below + (2 * k + 1) as f64 / x * current;
        below = current;
        current = above;
        if current.abs() > limit {
            current *= pow2(-RESCALE_EXP);
            below *= pow2(-RESCALE_EXP);
            run += RESCALE_EXP;
        }
        seq.mant[k + 1] = current;
        seq.exp[k + 1] = run;
    }
    seq
}

/// Attach derivatives given the order-0 derivative.
///
/// Real functions: `w'_k = w_{k-1} - (k/z) w_k`.
/// Modified regular: `s'_k = s_{k-1} - (k/x) s_k`; modified irregular:
/// `e'_k = -e_{k-1} - (k/x) e_k`.
fn with_derivatives(mut seq: Sequence, z: f64, d0: f64, lower_sign: f64) -> Vec<Scaled> {
    seq.normalize();
    let n = seq.mant.len();
    let mut out = Vec::with_capacity(n);
    out.push(Scaled {
        value: seq.mant[0],
        derivative: ldexp(d0, -seq.exp[0]),
        exp: seq.exp[0],
    });
    for k in 1..n {
        let exp = seq.exp[k];
        let lower = seq.in_units(k - 1, exp);
        out.push(Scaled {
            value: seq.mant[k],
            derivative: lower_sign * lower - k as f64 / z * seq.mant[k],
            exp,
        });
    }
    out
}

fn check_order(order: u32) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::domain(format!(
            "order {order} exceeds supported maximum {MAX_ORDER}"
        )))
    } else {
        Ok(())
    }
}

/// Products of ĵ, ŷ and their derivatives at one order, each formed from scaled factors.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WaveProducts {
    pub jj: f64,
    pub jjp: f64,
    pub jpjp: f64,
    pub jy: f64,
    pub jyp: f64,
    pub jpy: f64,
    pub jpyp: f64,
}

/// ĵ_l and ŷ_l with derivatives for every `l in 0..=max_order` at one argument.
#[derive(Debug, Clone)]
pub struct RiccatiTable {
    argument: f64,
    j: Vec<Scaled>,
    y: Vec<Scaled>,
}

impl RiccatiTable {
    pub fn new(max_order: u32, z: f64) -> Result<Self> {
        check_positive("Riccati-Bessel argument", z)?;
        check_order(max_order)?;
        let n = max_order as usize;
        let (s, c) = z.sin_cos();
        let j = with_derivatives(regular_real(n, z), z, c, 1.0);
        let y = with_derivatives(irregular_real(n, z), z, s, 1.0);
        Ok(Self { argument: z, j, y })
    }

    pub fn argument(&self) -> f64 {
        self.argument
    }

    pub fn max_order(&self) -> u32 {
        (self.j.len() - 1) as u32
    }

    /// ĵ_l; values below the f64 range come back as zero.
    pub fn j(&self, order: u32) -> RiccatiEval {
        let s = &self.j[order as usize];
        RiccatiEval {
            order,
            argument: self.argument,
            value: s.value(),
            derivative: s.derivative(),
        }
    }

    /// ŷ_l; values above the f64 range come back as infinities.
    pub fn y(&self, order: u32) -> RiccatiEval {
        let s = &self.y[order as usize];
        RiccatiEval {
            order,
            argument: self.argument,
            value: s.value(),
            derivative: s.derivative(),
        }
    }

    /// `ĵ ŷ' - ĵ' ŷ` formed from the scaled factors (exactly 1 in exact arithmetic).
    pub fn wronskian(&self, order: u32) -> f64 {
        let p = self.products(order);
        p.jyp - p.jpy
    }

    pub(crate) fn products(&self, order: u32) -> WaveProducts {
        let j = &self.j[order as usize];
        let y = &self.y[order as usize];
        let jj = 2 * j.exp;
        let jy = j.exp + y.exp;
        WaveProducts {
            jj: ldexp(j.value * j.value, jj),
            jjp: ldexp(j.value * j.derivative, jj),
            jpjp: ldexp(j.derivative * j.derivative, jj),
            jy: ldexp(j.value * y.value, jy),
            jyp: ldexp(j.value * y.derivative, jy),
            jpy: ldexp(j.derivative * y.value, jy),
            jpyp: ldexp(j.derivative * y.derivative, jy),
        }
    }
}

/// Modified Riccati-Bessel functions `s_l`, `e_l` for every `l in 0..=max_order`,
/// stored with the exponential factors `e^{∓x}` removed.
#[derive(Debug, Clone)]
pub struct ModifiedRiccatiTable {
    argument: f64,
    s: Vec<Scaled>,
    e: Vec<Scaled>,
}

/// `ln(f64::MAX)`: above this `sinh x`, and with it `s_l(x)` for small `l`, overflows.
pub const MODIFIED_OVERFLOW_THRESHOLD: f64 = 709.782_712_893_384;

impl ModifiedRiccatiTable {
    pub fn new(max_order: u32, x: f64) -> Result<Self> {
        check_positive("modified Riccati-Bessel argument", x)?;
        check_order(max_order)?;
        let n = max_order as usize;
        let s1 = (1.0 + (-2.0 * x).exp()) / 2.0;
        let s = with_derivatives(regular_modified(n, x), x, s1, 1.0);
        let e = with_derivatives(irregular_modified(n, x), x, -1.0, -1.0);
        Ok(Self { argument: x, s, e })
    }

    pub fn argument(&self) -> f64 {
        self.argument
    }

    /// `s_l(x)` unscaled; a range error if it does not fit in f64.
    pub fn s(&self, order: u32) -> Result<RiccatiEval> {
        let sc = &self.s[order as usize];
        let x = self.argument;
        let value = scale_exp(sc.value, sc.exp, x);
        let derivative = scale_exp(sc.derivative, sc.exp, x);
        if !value.is_finite() || !derivative.is_finite() {
            return Err(Error::Range {
                quantity: "modified Riccati-Bessel s_l",
                argument: x,
                threshold: MODIFIED_OVERFLOW_THRESHOLD,
            });
        }
        Ok(RiccatiEval {
            order,
            argument: x,
            value,
            derivative,
        })
    }

    /// `e_l(x)` unscaled; underflows gracefully to zero.
    pub fn e(&self, order: u32) -> RiccatiEval {
        let sc = &self.e[order as usize];
        let x = self.argument;
        RiccatiEval {
            order,
            argument: x,
            value: scale_exp(sc.value, sc.exp, -x),
            derivative: scale_exp(sc.derivative, sc.exp, -x),
        }
    }

    /// `s_l e_l` and `s'_l e'_l`; both O(1) whatever the size of the factors.
    pub fn products(&self, order: u32) -> (f64, f64) {
        let s = &self.s[order as usize];
        let e = &self.e[order as usize];
        let exp = s.exp + e.exp;
        (
            ldexp(s.value * e.value, exp),
            ldexp(s.derivative * e.derivative, exp),
        )
    }

    /// `s e' - s' e` (exactly -1 in exact arithmetic).
    pub fn wronskian(&self, order: u32) -> f64 {
        let s = &self.s[order as usize];
        let e = &self.e[order as usize];
        ldexp(
            s.value * e.derivative - s.derivative * e.value,
            s.exp + e.exp,
        )
    }
}

/// ĵ_l(z) and ĵ'_l(z).
pub fn riccati_j(order: u32, z: f64) -> Result<RiccatiEval> {
    Ok(RiccatiTable::new(order, z)?.j(order))
}

/// ŷ_l(z) and ŷ'_l(z), with ŷ_0 = -cos z.
pub fn riccati_y(order: u32, z: f64) -> Result<RiccatiEval> {
    Ok(RiccatiTable::new(order, z)?.y(order))
}

/// `(s_l(x), e_l(x))` with derivatives.
pub fn riccati_modified(order: u32, x: f64) -> Result<(RiccatiEval, RiccatiEval)> {
    let table = ModifiedRiccatiTable::new(order, x)?;
    Ok((table.s(order)?, table.e(order)))
}

/// `w''` of a real-argument Riccati-Bessel function from its value.
pub fn riccati_second_derivative(order: u32, z: f64, eval: &RiccatiEval) -> Result<f64> {
    check_positive("Riccati-Bessel argument", z)?;
    if eval.order != order || eval.argument != z {
        return Err(Error::domain(format!(
            "evaluation at (l={}, z={}) does not match requested (l={order}, z={z})",
            eval.order, eval.argument
        )));
    }
    Ok(eval.second_derivative())
}
