//! Partial-wave phase shifts of the plasma shell and their frequency derivatives, plus the
//! TM resonance finder. Jost functions at imaginary frequency live here too.
//!
//! With `c = Ω/ω` and all Riccati-Bessel functions taken at `z = ωR`, the real-axis Jost
//! functions are `f = D + iM` with
//!
//! ```text
//! TE:  M = c ĵ²      D = 1 - c ĵ ŷ
//! TM:  M = c ĵ'²     D = 1 - c ĵ' ŷ'
//! ```
//!
//! and `δ = -arg f`. Since `M ≥ 0` the phase `-atan2(M, D)` stays in `[-π, 0]` and is
//! continuous in ω whenever `M > 0`, so no branch tracking across evaluations is needed.
//! It tends to `-π` for TM as `ω → 0` and to `0` for both polarizations as `ω → ∞`.

use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::riccati::{ode_factor, ModifiedRiccatiTable, RiccatiTable, WaveProducts};
use crate::roots::{bisect, brent};
use crate::sum::NeumaierSum;

/// Plasma frequency Ω (inverse length) and radius R of the shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellParams {
    pub omega_p: f64,
    pub radius: f64,
}

impl ShellParams {
    pub fn new(omega_p: f64, radius: f64) -> Result<Self> {
        check_positive("plasma frequency", omega_p)?;
        check_positive("radius", radius)?;
        Ok(Self { omega_p, radius })
    }

    /// Dimensionless coupling ΩR.
    pub fn coupling(&self) -> f64 {
        self.omega_p * self.radius
    }

    /// `√(Ω(l+½)/(2R))`, where the TM resonances accumulate for large l.
    pub fn plasmon_asymptote(&self, ell: u32) -> f64 {
        (self.omega_p * (f64::from(ell) + 0.5) / (2.0 * self.radius)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Polarization {
    #[serde(rename = "TE")]
    Te,
    #[serde(rename = "TM")]
    Tm,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::Te, Polarization::Tm];

    pub(crate) fn index(self) -> usize {
        match self {
            Polarization::Te => 0,
            Polarization::Tm => 1,
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::Te => "TE",
            Polarization::Tm => "TM",
        })
    }
}

/// One TM resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub ell: u32,
    /// Root of the real part of the TM Jost function.
    pub omega_c: f64,
    /// `δ'_l(ω_c)`.
    pub height: f64,
    /// `ω_c - ω_h` with `δ'_l(ω_h) = height/2` on the low side.
    pub half_width: f64,
    /// Interval around `ω_c` outside which the peak has decayed below `10⁻³·height`.
    pub window: (f64, f64),
    /// Location of the maximum of `δ'_l`; equal to `omega_c` when the two cannot be
    /// told apart in double precision.
    pub argmax: f64,
}

/// Imaginary part, real part and their ω-derivatives of one Jost function.
#[derive(Debug, Clone, Copy)]
struct Jost {
    m: f64,
    d: f64,
    dm: f64,
    dd: f64,
}

impl Jost {
    fn phase(&self) -> f64 {
        -self.m.atan2(self.d)
    }

    fn phase_derivative(&self) -> f64 {
        let s = self.m.abs().max(self.d.abs());
        if s == 0.0 {
            return 0.0;
        }
        let (m, d) = (self.m / s, self.d / s);
        (m * self.dd - self.dm * d) / (s * (m * m + d * d))
    }
}

fn jost(pol: Polarization, w: &WaveProducts, ell: u32, omega: f64, p: &ShellParams) -> Jost {
    let r = p.radius;
    let c = p.omega_p / omega;
    let dc = -c / omega;
    match pol {
        Polarization::Te => Jost {
            m: c * w.jj,
            d: 1.0 - c * w.jy,
            dm: dc * w.jj + 2.0 * c * r * w.jjp,
            dd: -dc * w.jy - c * r * (w.jpy + w.jyp),
        },
        Polarization::Tm => {
            let q = ode_factor(ell, omega * r);
            Jost {
                m: c * w.jpjp,
                d: 1.0 - c * w.jpyp,
                dm: dc * w.jpjp + 2.0 * c * r * q * w.jjp,
                dd: -dc * w.jpyp - c * r * q * (w.jyp + w.jpy),
            }
        }
    }
}

fn check_wave(ell: u32, omega: f64) -> Result<()> {
    check_positive("frequency", omega)?;
    if ell == 0 {
        return Err(Error::domain("angular momentum must be at least 1"));
    }
    Ok(())
}

fn single_jost(pol: Polarization, ell: u32, omega: f64, p: &ShellParams) -> Result<Jost> {
    check_wave(ell, omega)?;
    let table = RiccatiTable::new(ell, omega * p.radius)?;
    Ok(jost(pol, &table.products(ell), ell, omega, p))
}

/// `δ_l(ω)` in radians, on the continuous branch in `[-π, 0]`.
pub fn phase_shift(pol: Polarization, ell: u32, omega: f64, p: &ShellParams) -> Result<f64> {
    Ok(single_jost(pol, ell, omega, p)?.phase())
}

/// `dδ_l/dω`, analytic; finite at resonances.
pub fn phase_shift_derivative(
    pol: Polarization,
    ell: u32,
    omega: f64,
    p: &ShellParams,
) -> Result<f64> {
    Ok(single_jost(pol, ell, omega, p)?.phase_derivative())
}

/// Unweighted `[δ'^TE_l, δ'^TM_l]` for `l = 1..=max_order`.
pub fn phase_derivative_terms(
    omega: f64,
    p: &ShellParams,
    max_order: u32,
) -> Result<Vec<[f64; 2]>> {
    check_wave(max_order.max(1), omega)?;
    let table = RiccatiTable::new(max_order, omega * p.radius)?;
    Ok((1..=max_order)
        .map(|ell| {
            let w = table.products(ell);
            [
                jost(Polarization::Te, &w, ell, omega, p).phase_derivative(),
                jost(Polarization::Tm, &w, ell, omega, p).phase_derivative(),
            ]
        })
        .collect())
}

/// Largest order the partial-wave sum may reach.
pub const MAX_PARTIAL_WAVES: u32 = 200;

/// Which TM orders a partial-wave sum leaves out, and how far it must go at least.
#[derive(Debug, Clone, Default)]
pub(crate) struct WaveMask {
    pub excluded_tm: Vec<u32>,
    pub min_order: u32,
}

fn table_order(z: f64) -> u32 {
    let l = (z + 10.0 + 4.0 * z.cbrt()).ceil();
    (l as u32).min(MAX_PARTIAL_WAVES)
}

/// `Σ_l (2l+1) δ'_l` for both polarizations, truncated once the geometric tail estimate
/// of both falls below `tol` relative on two consecutive orders past the turning point.
pub(crate) fn partial_wave_sum(
    omega: f64,
    p: &ShellParams,
    tol: f64,
    mask: &WaveMask,
) -> Result<[f64; 2]> {
    let z = omega * p.radius;
    let mut top = table_order(z)
        .max(mask.min_order + 3)
        .min(MAX_PARTIAL_WAVES);
    let mut table = RiccatiTable::new(top, z)?;
    let mut sums = [NeumaierSum::new(), NeumaierSum::new()];
    let mut prev = [0.0_f64; 2];
    let mut quiet = 0;
    let mut ell = 1;
    loop {
        if ell > top {
            if top == MAX_PARTIAL_WAVES {
                return Err(Error::Convergence {
                    omega,
                    max_order: MAX_PARTIAL_WAVES,
                    partial: sums[0].value() + sums[1].value(),
                });
            }
            top = (2 * top).min(MAX_PARTIAL_WAVES);
            table = RiccatiTable::new(top, z)?;
        }
        let w = table.products(ell);
        let weight = f64::from(2 * ell + 1);
        let mut term = [0.0; 2];
        for pol in Polarization::BOTH {
            if pol == Polarization::Tm && mask.excluded_tm.contains(&ell) {
                continue;
            }
            term[pol.index()] = weight * jost(pol, &w, ell, omega, p).phase_derivative();
            sums[pol.index()] += term[pol.index()];
        }

        if f64::from(ell) > z + 2.0 && ell > mask.min_order {
            let settled = (0..2).all(|i| {
                let t = term[i].abs();
                if t == 0.0 {
                    return true;
                }
                let r = t / prev[i].abs();
                r < 1.0 && t * r / (1.0 - r) <= tol * sums[i].value().abs() + 1e-300
            });
            quiet = if settled { quiet + 1 } else { 0 };
            if quiet >= 2 {
                return Ok([sums[0].value(), sums[1].value()]);
            }
        }
        prev = term;
        ell += 1;
    }
}

/// `Σ_l (2l+1) δ'_l(ω)` for one polarization.
pub fn summed_phase_derivative(
    pol: Polarization,
    omega: f64,
    p: &ShellParams,
    tol: f64,
) -> Result<f64> {
    check_positive("frequency", omega)?;
    check_tolerance(tol)?;
    Ok(partial_wave_sum(omega, p, tol, &WaveMask::default())?[pol.index()])
}

pub(crate) fn check_tolerance(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 && tol <= 1e-2 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "tolerance must lie in (0, 1e-2], got {tol}"
        )))
    }
}

/// Jost function `f_l(iξ)` at imaginary frequency; at least 1 for every positive Ω.
pub fn jost_imaginary(pol: Polarization, ell: u32, xi: f64, p: &ShellParams) -> Result<f64> {
    check_wave(ell, xi)?;
    let table = ModifiedRiccatiTable::new(ell, xi * p.radius)?;
    let (se, spep) = table.products(ell);
    let c = p.omega_p / xi;
    Ok(match pol {
        Polarization::Te => 1.0 + c * se,
        Polarization::Tm => 1.0 - c * spep,
    })
}

const BRACKET_FRACTIONS: [f64; 4] = [0.0625, 0.125, 0.25, 0.5];
const SCAN_STEPS: usize = 64;

fn tm_real_part(ell: u32, omega: f64, p: &ShellParams) -> Result<f64> {
    Ok(single_jost(Polarization::Tm, ell, omega, p)?.d)
}

/// First upward sign change of `D` on `[lo, hi]`.
fn scan_bracket(ell: u32, lo: f64, hi: f64, p: &ShellParams) -> Result<Option<(f64, f64)>> {
    let step = (hi - lo) / SCAN_STEPS as f64;
    let mut a = lo;
    let mut fa = tm_real_part(ell, a, p)?;
    for i in 1..=SCAN_STEPS {
        let b = if i == SCAN_STEPS {
            hi
        } else {
            lo + step * i as f64
        };
        let fb = tm_real_part(ell, b, p)?;
        if fa <= 0.0 && fb > 0.0 {
            return Ok(Some((a, b)));
        }
        a = b;
        fa = fb;
    }
    Ok(None)
}

/// Locates the TM resonance of order `ell` and characterises its shape.
///
/// Without a hint the search starts from the plasmon asymptote with brackets of
/// ±6.25%, …, ±50%, each scanned in 64 steps for an upward zero of the real part of the
/// Jost function.
pub fn find_resonance(
    ell: u32,
    p: &ShellParams,
    bracket_hint: Option<(f64, f64)>,
) -> Result<Resonance> {
    check_wave(ell, 1.0)?;
    let center = p.plasmon_asymptote(ell);
    let brackets: Vec<(f64, f64)> = match bracket_hint {
        Some((lo, hi)) => {
            check_positive("bracket lower bound", lo)?;
            if hi <= lo || !hi.is_finite() {
                return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
            }
            vec![(lo, hi)]
        }
        None => BRACKET_FRACTIONS
            .iter()
            .map(|f| (center * (1.0 - f), center * (1.0 + f)))
            .collect(),
    };
    let mut found = None;
    for &(lo, hi) in &brackets {
        if let Some(b) = scan_bracket(ell, lo, hi, p)? {
            found = Some(b);
            break;
        }
    }
    let (lo, hi) = found.ok_or(Error::ResonanceNotFound {
        ell,
        lower: brackets[brackets.len() - 1].0,
        upper: brackets[brackets.len() - 1].1,
    })?;
    let omega_c = brent(
        |w| tm_real_part(ell, w, p),
        lo,
        hi,
        4.0 * f64::EPSILON * hi,
        200,
    )?;
    characterise(ell, omega_c, p)
}

/// Below this relative width the peak is taken to be an exact Lorentzian.
const LORENTZIAN_WIDTH: f64 = 1e-9;

fn characterise(ell: u32, omega_c: f64, p: &ShellParams) -> Result<Resonance> {
    let at = single_jost(Polarization::Tm, ell, omega_c, p)?;
    // At the exact root δ' = D'/M; evaluating the general formula at the rounded root
    // would let the residual D swamp a tiny M.
    let height = at.dd / at.m;
    let gamma = (at.m / at.dd).abs();
    let derivative = |w: f64| phase_shift_derivative(Polarization::Tm, ell, w, p);

    let (half_width, argmax) = if gamma > LORENTZIAN_WIDTH * omega_c {
        let mut span = gamma;
        let mut lower = omega_c - span;
        while lower > 0.0 && derivative(lower)? > 0.5 * height {
            span *= 2.0;
            lower = omega_c - span;
        }
        let lower = lower.max(0.5 * omega_c * f64::EPSILON);
        let omega_h = bisect(|w| Ok(derivative(w)? - 0.5 * height), lower, omega_c, 200)?;
        let lo = (omega_c - 4.0 * gamma).max(0.1 * omega_c);
        let argmax = golden_max(&derivative, lo, omega_c + 4.0 * gamma)?;
        (omega_c - omega_h, argmax)
    } else {
        (gamma, omega_c)
    };

    let reach = (500.0 * half_width).min(0.5 * omega_c);
    Ok(Resonance {
        ell,
        omega_c,
        height,
        half_width,
        window: (omega_c - reach, omega_c + reach),
        argmax,
    })
}

fn golden_max(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > 8.0 * f64::EPSILON * b.abs() {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn shell(omega: f64) -> ShellParams {
        ShellParams::new(omega, 1.0).unwrap()
    }

    #[test]
    fn params_validated() {
        assert!(ShellParams::new(0.0, 1.0).is_err());
        assert!(ShellParams::new(1.0, -1.0).is_err());
        assert!(ShellParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn weak_coupling_phase_vanishes() {
        let d = phase_shift(Polarization::Te, 1, 1.0, &shell(1e-12)).unwrap();
        assert!(d.abs() < 1e-10);
    }

    #[test]
    fn tm_low_frequency_limit() {
        let d = phase_shift(Polarization::Tm, 1, 1e-3, &shell(0.05)).unwrap();
        let expected = -PI + 2.0 / 3.0 * 1e-9;
        assert!((d - expected).abs() < 1e-11, "{d} vs {expected}");
    }

    #[test]
    fn te_low_frequency_limit() {
        let d = phase_shift(Polarization::Te, 1, 1e-3, &shell(5.0)).unwrap();
        let expected = -5.0 / 24.0 * 1e-9;
        assert!((d / expected - 1.0).abs() < 1e-3, "{d} vs {expected}");
    }

    #[test]
    fn rejects_nonpositive_frequency() {
        assert!(phase_shift(Polarization::Te, 1, 0.0, &shell(1.0)).is_err());
        assert!(phase_shift_derivative(Polarization::Tm, 1, -1.0, &shell(1.0)).is_err());
        assert!(phase_shift(Polarization::Te, 0, 1.0, &shell(1.0)).is_err());
    }

    fn five_point(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = shell(0.7);
        for pol in Polarization::BOTH {
            for &(ell, w) in &[(1, 0.3), (2, 2.0), (4, 5.5), (7, 4.0)] {
                let fd = five_point(|x| phase_shift(pol, ell, x, &p).unwrap(), w, 1e-3 * w);
                let an = phase_shift_derivative(pol, ell, w, &p).unwrap();
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs(),
                    "{pol} {ell} {w}: {fd} {an}"
                );
            }
        }
    }

    #[test]
    fn table_row_one() {
        let r = find_resonance(1, &shell(0.05), None).unwrap();
        assert!((r.omega_c / 0.180_526_91 - 1.0).abs() < 1e-7);
        assert!((r.height / 2860.2426 - 1.0).abs() < 1e-3);
        assert!((r.half_width / 3.51292e-4 - 1.0).abs() < 1e-2);
        assert!(r.window.0 < r.omega_c && r.omega_c < r.window.1);
    }

    #[test]
    fn table_row_four_is_lorentzian() {
        let r = find_resonance(4, &shell(0.05), None).unwrap();
        assert!((r.height / 9.65673e9 - 1.0).abs() < 1e-3);
        assert!((r.half_width / 1.03555e-10 - 1.0).abs() < 1e-3);
        assert_eq!(r.argmax, r.omega_c);
    }

    #[test]
    fn missing_resonance_reported() {
        let err = find_resonance(1, &shell(0.05), Some((1.0, 2.0))).unwrap_err();
        assert!(matches!(err, Error::ResonanceNotFound { ell: 1, .. }));
        let r = find_resonance(3, &shell(1e-12), None).unwrap();
        assert!(r.height.is_finite() && r.half_width > 0.0);
    }

    #[test]
    fn te_jost_closed_form() {
        let f = jost_imaginary(Polarization::Te, 1, 1.0, &shell(1.0)).unwrap();
        assert!((f - (1.0 + 2.0 * (-2.0_f64).exp())).abs() < 1e-14);
        let f = jost_imaginary(Polarization::Tm, 3, 2.0, &shell(1e-300)).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn single_wave_dominates_at_low_frequency() {
        let p = shell(0.05);
        let total = summed_phase_derivative(Polarization::Te, 0.05, &p, 1e-10).unwrap();
        let first = 3.0 * phase_shift_derivative(Polarization::Te, 1, 0.05, &p).unwrap();
        assert!(first / total > 0.99);
    }

    #[test]
    fn tolerance_range_enforced() {
        let p = shell(1.0);
        assert!(summed_phase_derivative(Polarization::Te, 1.0, &p, 0.1).is_err());
        assert!(summed_phase_derivative(Polarization::Te, 1.0, &p, 0.0).is_err());
    }
}
