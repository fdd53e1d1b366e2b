//! Frequency-axis integration.
//!
//! A globally adaptive Gauss-Kronrod (10/21 point) engine with a shared error budget over
//! all subintervals, plus the peak protocol used for the TM resonances: a peak too narrow
//! to resolve is cut out of the pointwise integration over a window of ±500 half-widths
//! and replaced by `weight(ω_c) × (phase jump across the window)`, which is exact up to
//! the variation of the weight over the window.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::scattering::{
    check_tolerance, find_resonance, partial_wave_sum, phase_shift, phase_shift_derivative,
    Polarization, Resonance, ShellParams, WaveMask, MAX_PARTIAL_WAVES,
};
use crate::sum::NeumaierSum;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], …, XGK[9]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

pub const MAX_DEPTH: u32 = 60;
pub const MAX_EVALUATIONS: usize = 5_000_000;

/// One integral, with its audit trail.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub peak_contributions: Vec<PeakContribution>,
    /// TE and TM shares of `value` for spectral integrals.
    pub polarization_parts: Option<[f64; 2]>,
    /// Where the integration actually stopped.
    pub upper_limit: f64,
}

/// How one TM resonance entered a spectral integral.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeakTreatment {
    /// Cut out and replaced by the phase jump across the window.
    Excised(PeakWindow),
    /// Narrow but resolvable; integrated pointwise with extra breakpoints.
    Resolved(Resonance),
    /// No resonance was located; the order is integrated like any other.
    Missing { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakContribution {
    pub ell: u32,
    /// `(1/π)∫ weight (2l+1) δ'_l` over the window of this order alone.
    pub contribution: f64,
    pub error_bound: f64,
    pub treatment: PeakTreatment,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PeakWindow {
    pub resonance: Resonance,
    /// `δ_l(b) - δ_l(a)` across the window.
    pub phase_jump: f64,
    pub weight_at_center: f64,
}

/// A weight multiplying the spectral density, with the derivative used for error bounds.
pub trait SpectralWeight {
    fn value(&self, omega: f64) -> f64;
    fn derivative(&self, omega: f64) -> f64;
}

/// Stopping rule: `error ≤ max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, abs: 0.0 }
    }
}

/// A narrow feature of a generic integrand, for [`integrate_with_peaks`].
#[derive(Debug, Clone, Copy)]
pub struct PeakSpec {
    pub id: u32,
    pub center: f64,
    pub half_width: f64,
    /// Excised region when `excise`, otherwise only a refinement hint.
    pub window: (f64, f64),
    pub excise: bool,
    /// Integral of the masked part of the density across `window`.
    pub jump: f64,
    /// Which density component the peak belongs to.
    pub component: usize,
    /// Geometric breakpoints are placed out to this distance from the center.
    pub extent: f64,
    /// Bound on `|∫ (x - center) · masked density|` over the window. When known the
    /// excision error is second order in the window width.
    pub moment: Option<f64>,
}

/// Error of replacing `∫_window weight · density` by `weight(center) · jump`.
fn excision_bound(weight: &dyn SpectralWeight, peak: &PeakSpec) -> f64 {
    let (a, b, c) = (peak.window.0, peak.window.1, peak.center);
    let slope = weight.derivative(c).abs();
    let jump = peak.jump.abs();
    let Some(moment) = peak.moment else {
        return slope * (b - a) * jump;
    };
    // The true centre lies somewhere inside the representable neighbourhood of `c`.
    let offset = 2.0 * f64::EPSILON * c.abs();
    let curvature = [a, b]
        .into_iter()
        .map(|x| (weight.derivative(x) - weight.derivative(c)).abs() / (x - c).abs())
        .fold(0.0, f64::max);
    let reach = (b - c).max(c - a);
    slope * (moment + offset * jump) + curvature * reach * reach * jump
}

#[derive(Debug, Clone)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
    floor: f64,
    depth: u32,
    mask: Vec<u32>,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<const N: usize> Eq for Segment<N> {}

impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Error estimates never drop below this multiple of `∫|f|`.
const ROUNDING_FLOOR: f64 = 50.0 * f64::EPSILON;

/// Kronrod value on `[a, b]` with its error estimate. The last field is the rounding floor.
///
/// The floor covers rounding in the sum and in the abscissae themselves; the latter
/// matters for features only a few thousand ulps wide.
fn kronrod<const N: usize, F>(
    f: &mut F,
    a: f64,
    b: f64,
    mask: &[u32],
) -> Result<([f64; N], f64, f64)>
where
    F: FnMut(f64, &[u32]) -> Result<[f64; N]>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes = [[0.0; N]; 21];
    let mut eval = |x: f64| -> Result<[f64; N]> {
        let v = f(x, mask)?;
        if v.iter().any(|y| !y.is_finite()) {
            return Err(Error::domain(format!("integrand not finite at {x}")));
        }
        Ok(v)
    };
    nodes[10] = eval(center)?;
    for j in 0..10 {
        let dx = half * XGK[j];
        nodes[j] = eval(center - dx)?;
        nodes[20 - j] = eval(center + dx)?;
    }

    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let mut magnitude = 0.0;
    let mut variation = 0.0;
    for i in 0..N {
        k[i] = WGK[10] * nodes[10][i];
        magnitude += WGK[10] * nodes[10][i].abs();
        for j in 0..10 {
            let pair = nodes[j][i] + nodes[20 - j][i];
            k[i] += WGK[j] * pair;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * pair;
            }
            magnitude += WGK[j] * (nodes[j][i].abs() + nodes[20 - j][i].abs());
        }
        variation += nodes
            .windows(2)
            .map(|w| (w[1][i] - w[0][i]).abs())
            .sum::<f64>();
    }
    let mut error = 0.0;
    for i in 0..N {
        k[i] *= half;
        g[i] *= half;
        error += (k[i] - g[i]).abs();
    }
    // A node `center ± half·x` is rounded three times, half an ulp each.
    let floor =
        ROUNDING_FLOOR * half * magnitude + 1.5 * f64::EPSILON * a.abs().max(b.abs()) * variation;
    Ok((k, error.max(floor), floor))
}

struct Outcome<const N: usize> {
    value: [f64; N],
    error: f64,
    evaluations: usize,
    converged: bool,
}

/// Globally adaptive integration of a vector-valued integrand over consecutive
/// subintervals `breaks[i]..breaks[i+1]`, each with its own mask.
fn adaptive<const N: usize, F>(
    mut f: F,
    pieces: &[(f64, f64, Vec<u32>)],
    tol: Tolerance,
) -> Result<Outcome<N>>
where
    F: FnMut(f64, &[u32]) -> Result<[f64; N]>,
{
    let mut heap = BinaryHeap::new();
    let mut finished: Vec<Segment<N>> = Vec::new();
    let mut evaluations = 0;
    for (a, b, mask) in pieces {
        let (value, error, floor) = kronrod(&mut f, *a, *b, mask)?;
        evaluations += 21;
        heap.push(Segment {
            a: *a,
            b: *b,
            value,
            error,
            floor,
            depth: 0,
            mask: mask.clone(),
        });
    }

    let totals = |heap: &BinaryHeap<Segment<N>>, finished: &[Segment<N>]| {
        let mut value = [NeumaierSum::new(); N];
        let mut error = NeumaierSum::new();
        let mut ordered: Vec<&Segment<N>> = heap.iter().chain(finished.iter()).collect();
        ordered.sort_by(|x, y| x.a.total_cmp(&y.a));
        for s in ordered {
            for (sum, v) in value.iter_mut().zip(s.value) {
                *sum += v;
            }
            error += s.error;
        }
        (value.map(|v| v.value()), error.value())
    };

    let (mut value, mut error) = totals(&heap, &finished);
    let mut since_refresh = 0;
    loop {
        let target = tol.abs.max(tol.rel * value.iter().sum::<f64>().abs());
        if error <= target {
            let (value, error) = totals(&heap, &finished);
            let target = tol.abs.max(tol.rel * value.iter().sum::<f64>().abs());
            if error <= target {
                return Ok(Outcome {
                    value,
                    error,
                    evaluations,
                    converged: true,
                });
            }
        }
        let Some(worst) = heap.pop() else { break };
        if evaluations + 42 > MAX_EVALUATIONS {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let exhausted = worst.error <= worst.floor;
        if exhausted || worst.depth >= MAX_DEPTH || mid <= worst.a || mid >= worst.b {
            finished.push(worst);
            continue;
        }
        let (lv, le, lf) = kronrod(&mut f, worst.a, mid, &worst.mask)?;
        let (rv, re, rf) = kronrod(&mut f, mid, worst.b, &worst.mask)?;
        evaluations += 42;
        for i in 0..N {
            value[i] += lv[i] + rv[i] - worst.value[i];
        }
        error += le + re - worst.error;
        for (a, b, v, e, fl) in [(worst.a, mid, lv, le, lf), (mid, worst.b, rv, re, rf)] {
            heap.push(Segment {
                a,
                b,
                value: v,
                error: e,
                floor: fl,
                depth: worst.depth + 1,
                mask: worst.mask.clone(),
            });
        }
        since_refresh += 1;
        if since_refresh == 256 {
            (value, error) = totals(&heap, &finished);
            since_refresh = 0;
        }
    }
    let (value, error) = totals(&heap, &finished);
    let target = tol.abs.max(tol.rel * value.iter().sum::<f64>().abs());
    Ok(Outcome {
        value,
        error,
        evaluations,
        converged: error <= target,
    })
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::domain(format!("invalid interval [{a}, {b}]")))
    }
}

fn finish(result: QuadratureResult, converged: bool) -> Result<QuadratureResult> {
    if converged {
        Ok(result)
    } else {
        Err(Error::Quadrature(Box::new(result)))
    }
}

/// `∫_a^b f` to relative tolerance `tol`; `f` must be finite on `[a, b]`.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> f64,
{
    integrate_adaptive_with_breakpoints(f, &[a, b], Tolerance::relative(tol))
}

/// As [`integrate_adaptive`] over `breaks[0]..breaks[last]`, never placing a subinterval
/// across an interior breakpoint.
pub fn integrate_adaptive_with_breakpoints<F>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadratureResult>
where
    F: FnMut(f64) -> f64,
{
    if breaks.len() < 2 {
        return Err(Error::domain("need at least two breakpoints"));
    }
    for w in breaks.windows(2) {
        check_interval(w[0], w[1])?;
    }
    check_positive("tolerance", tol.rel.max(tol.abs))?;
    let pieces: Vec<_> = breaks
        .windows(2)
        .map(|w| (w[0], w[1], Vec::new()))
        .collect();
    let out = adaptive(|x, _| Ok([f(x)]), &pieces, tol)?;
    finish(
        QuadratureResult {
            value: out.value[0],
            abs_error_estimate: out.error,
            evaluations: out.evaluations,
            peak_contributions: Vec::new(),
            polarization_parts: None,
            upper_limit: breaks[breaks.len() - 1],
        },
        out.converged,
    )
}

/// Sorted, deduplicated breakpoints in `[a, b]`.
fn collect_breaks(a: f64, b: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut breaks: Vec<f64> = std::iter::once(a)
        .chain(std::iter::once(b))
        .chain(extra.into_iter().filter(|x| *x > a && *x < b))
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

fn peak_breaks(peak: &PeakSpec) -> Vec<f64> {
    let mut out = vec![peak.center];
    let mut r = if peak.excise {
        out.extend([peak.window.0, peak.window.1]);
        (peak.window.1 - peak.center).min(peak.center - peak.window.0)
    } else {
        peak.half_width
    };
    if r > 0.0 {
        while r < peak.extent {
            out.extend([peak.center - r, peak.center + r]);
            r *= 4.0;
        }
    }
    out
}

/// `∫_a^b weight(x) · Σ_i density_i(x)` where the density carries narrow peaks.
///
/// For an excised peak the density callback is asked, through its mask argument, to
/// leave the peak out inside the window; the window then contributes
/// `weight(center) · jump` with error bound `|weight'(center)| · (b - a) · |jump|`, or a
/// second-order bound when the peak's first moment is supplied.
pub fn integrate_with_peaks<const N: usize, F>(
    density: F,
    weight: &dyn SpectralWeight,
    a: f64,
    b: f64,
    peaks: &[PeakSpec],
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<QuadratureResult>
where
    F: FnMut(f64, &[u32]) -> Result<[f64; N]>,
{
    check_interval(a, b)?;
    let mut density = density;
    let breaks = collect_breaks(
        a,
        b,
        breakpoints
            .iter()
            .copied()
            .chain(peaks.iter().flat_map(peak_breaks)),
    );
    let pieces: Vec<_> = breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let mask: Vec<u32> = peaks
                .iter()
                .filter(|p| p.excise && p.window.0 <= mid && mid <= p.window.1)
                .map(|p| p.id)
                .collect();
            (w[0], w[1], mask)
        })
        .collect();

    let out = adaptive(
        |x, mask| {
            let w = weight.value(x);
            if w == 0.0 {
                return Ok([0.0; N]);
            }
            Ok(density(x, mask)?.map(|d| w * d))
        },
        &pieces,
        tol,
    )?;

    let mut parts = out.value.map(NeumaierSum::from_value);
    let mut error = out.error;
    for p in peaks.iter().filter(|p| p.excise) {
        if p.window.1 <= a || p.window.0 >= b {
            continue;
        }
        parts[p.component] += weight.value(p.center) * p.jump;
        error += excision_bound(weight, p);
    }
    let parts = parts.map(|s| s.value());
    let value = parts.iter().copied().collect::<NeumaierSum>().value();
    let parts2 = if N == 2 {
        Some([parts[0], parts[1]])
    } else {
        None
    };
    finish(
        QuadratureResult {
            value,
            abs_error_estimate: error,
            evaluations: out.evaluations,
            peak_contributions: Vec::new(),
            polarization_parts: parts2,
            upper_limit: b,
        },
        out.converged,
    )
}

/// A resonance is cut out of the pointwise integration when narrower than this fraction
/// of the temperature…
const EXCISE_THERMAL: f64 = 1e-6;
/// …or of its own frequency.
const EXCISE_RELATIVE: f64 = 1e-9;
/// Window half-width in units of the resonance half-width.
const WINDOW_WIDTHS: f64 = 500.0;
/// Smallest window half-width in ulps of the centre. The partial-wave sum and the single
/// order evaluation round the Jost function differently, which moves a sub-ulp root by
/// several ulps.
const ROUNDING_REACH: f64 = 1e5;
/// Just outside a window each node misplaces the Lorentzian tail by about `γ·ulp/reach²`
/// of the jump. The window is widened until that falls below the inverse of this.
const TAIL_ROUNDING: f64 = 1e12;
/// Peaks narrower than this many ulps are not sampled for their first moment.
const SAMPLED_MOMENT: f64 = 1e2;
/// Uncertainty of a located centre, in ulps.
const CENTRE_ULPS: f64 = 1e3;

/// Half-width of the window that replaces a resonance of half-width `gamma` at `center`.
pub fn excision_reach(center: f64, gamma: f64) -> f64 {
    let ulp = f64::EPSILON * center.abs();
    (WINDOW_WIDTHS * gamma)
        .max(ROUNDING_REACH * ulp)
        .max((TAIL_ROUNDING * gamma * ulp).sqrt())
}

/// Upper end of the frequency integral.
pub fn spectral_cutoff(p: &ShellParams, temperature: f64, tol: f64) -> f64 {
    temperature * (1.0 / tol).ln() + 25.0 * temperature + 10.0 * p.omega_p.max(1.0 / p.radius)
}

/// `∫ |weight| · 6R³ω²/π`, the magnitude of the low-frequency integrand; sets the
/// absolute accuracy floor.
fn weight_scale(weight: &dyn SpectralWeight, p: &ShellParams, t: f64, top: f64) -> f64 {
    let r3 = p.radius.powi(3);
    let breaks: Vec<f64> = std::iter::once(0.0)
        .chain((-8..).map(|k| t * 2f64.powi(k)).take_while(|w| *w < top))
        .chain(std::iter::once(top))
        .collect();
    integrate_adaptive_with_breakpoints(
        |w| weight.value(w).abs() * 6.0 * r3 * w * w / std::f64::consts::PI,
        &breaks,
        Tolerance::relative(1e-6),
    )
    .map(|r| r.value)
    .unwrap_or_else(|e| match e {
        Error::Quadrature(r) => r.value,
        _ => 0.0,
    })
}

struct Located {
    ell: u32,
    resonance: Option<Resonance>,
    bounds: (f64, f64),
}

/// `|∫ (ω - ω_c) δ'^TM_l dω|` over an excision window, plus its quadrature error.
fn window_moment(
    ell: u32,
    center: f64,
    gamma: f64,
    window: (f64, f64),
    p: &ShellParams,
) -> Result<f64> {
    let reach = (window.1 - center).min(center - window.0);
    let shape = PeakSpec {
        id: ell,
        center,
        half_width: gamma,
        window,
        excise: false,
        jump: 0.0,
        component: 0,
        extent: reach,
        moment: None,
    };
    let breaks = collect_breaks(window.0, window.1, peak_breaks(&shape));
    let mut failure = None;
    let q = integrate_adaptive_with_breakpoints(
        |w| {
            let d = phase_shift_derivative(Polarization::Tm, ell, w, p).unwrap_or_else(|e| {
                failure = Some(e);
                0.0
            });
            (w - center) * d
        },
        &breaks,
        Tolerance {
            rel: 1e-6,
            abs: 1e-9 * reach,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let q = match q {
        Ok(q) => q,
        Err(Error::Quadrature(q)) => *q,
        Err(e) => return Err(e),
    };
    Ok(q.value.abs() + q.abs_error_estimate)
}

/// Orders kept free for the convergence test of the partial-wave sum.
const ORDER_HEADROOM: u32 = 10;

/// First resonance left out by [`enumerate_resonances`].
struct Cut {
    ell: u32,
    omega: f64,
    half_width: Option<f64>,
}

fn enumerate_resonances(
    p: &ShellParams,
    weight: &dyn SpectralWeight,
    t: f64,
    top: f64,
    floor: f64,
) -> Result<(Vec<Located>, Option<Cut>)> {
    let mut out = Vec::new();
    for ell in 1..=MAX_PARTIAL_WAVES - ORDER_HEADROOM {
        let (omega, located) = match find_resonance(ell, p, None) {
            Ok(r) => (
                r.omega_c,
                Located {
                    ell,
                    resonance: Some(r),
                    bounds: r.window,
                },
            ),
            Err(Error::ResonanceNotFound { lower, upper, .. }) => (
                lower,
                Located {
                    ell,
                    resonance: None,
                    bounds: (lower, upper),
                },
            ),
            Err(e) => return Err(e),
        };
        if omega > top {
            return Ok((out, None));
        }
        let negligible =
            omega > 2.0 * t && f64::from(2 * ell + 1) * weight.value(omega).abs() < floor;
        let last = ell == MAX_PARTIAL_WAVES - ORDER_HEADROOM;
        if negligible || last {
            let half_width = located.resonance.map(|r| r.half_width);
            return Ok((
                out,
                Some(Cut {
                    ell,
                    omega,
                    half_width,
                }),
            ));
        }
        out.push(located);
    }
    Ok((out, None))
}

/// Pulls the upper limit below the first resonance that was not enumerated, so no
/// unexcised narrow peak lies inside the range. Returns the new limit and a bound on
/// what lies above it: the smooth tail, taken as one thermal width at the limit with the
/// cut resonance masked, plus one full phase jump for every remaining resonance.
fn truncate_at(
    cut: &Cut,
    previous: f64,
    weight: &dyn SpectralWeight,
    p: &ShellParams,
    t: f64,
    top: f64,
    density: impl Fn(f64, &[u32]) -> Result<f64>,
) -> Result<(f64, f64)> {
    let gap = 0.5 * (cut.omega - previous);
    let margin = cut
        .half_width
        .map_or(gap, |g| (WINDOW_WIDTHS * 2.0 * g).min(gap))
        .min(t);
    let upper = (cut.omega - margin).min(top);
    let mut bound = 2.0 * t * weight.value(upper).abs() * density(upper, &[cut.ell])?.abs();
    let mut peaks = NeumaierSum::new();
    let mut first = None;
    for ell in cut.ell.. {
        let w = if ell == cut.ell {
            cut.omega
        } else {
            p.plasmon_asymptote(ell).max(upper)
        };
        if w > top {
            break;
        }
        let term = f64::from(2 * ell + 1) * weight.value(w).abs();
        peaks += term;
        let first = *first.get_or_insert(term);
        if ell > cut.ell + 10 && term < 1e-6 * first.max(peaks.value()) {
            break;
        }
    }
    bound += peaks.value();
    Ok((upper, bound))
}

/// `∫_0^{ω_max} (dω/π) weight(ω) δ'(ω)` with `δ' = Σ_l (2l+1)(δ'^TE_l + δ'^TM_l)`.
///
/// Every TM resonance that matters at this temperature is located first. Those too narrow
/// to resolve are excised (see the module docs); the rest get geometric breakpoints around
/// their centre. Both are listed in `peak_contributions`, together with orders whose
/// resonance could not be found.
pub fn integrate_spectral(
    weight: &dyn SpectralWeight,
    p: &ShellParams,
    temperature: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    check_positive("temperature", temperature)?;
    check_tolerance(tol)?;
    let t = temperature;
    let top = spectral_cutoff(p, t, tol);
    let scale = weight_scale(weight, p, t, top);
    let floor = tol * 1e-2 * scale;
    let (located, cut) = enumerate_resonances(p, weight, t, top, floor)?;

    let pi = std::f64::consts::PI;
    let mut peaks = Vec::new();
    let mut audit = Vec::new();
    for loc in &located {
        let Some(r) = loc.resonance else {
            audit.push(PeakContribution {
                ell: loc.ell,
                contribution: 0.0,
                error_bound: 0.0,
                treatment: PeakTreatment::Missing {
                    lower: loc.bounds.0,
                    upper: loc.bounds.1,
                },
            });
            continue;
        };
        let gamma = r.half_width;
        let multiplicity = f64::from(2 * r.ell + 1);
        let extent = t.min(0.5 * r.omega_c);
        if gamma < EXCISE_THERMAL * t || gamma < EXCISE_RELATIVE * r.omega_c {
            let reach = excision_reach(r.omega_c, gamma);
            let window = (r.omega_c - reach, r.omega_c + reach);
            let jump = phase_shift(Polarization::Tm, r.ell, window.1, p)?
                - phase_shift(Polarization::Tm, r.ell, window.0, p)?;
            let w_c = weight.value(r.omega_c);
            let resonance = Resonance { window, ..r };
            // A peak only a few ulps wide cannot be sampled. Its moment is then set by where
            // the centre really lies, plus the second-order asymmetry of the tails.
            let ulp = f64::EPSILON * r.omega_c;
            let moment = if gamma > SAMPLED_MOMENT * ulp {
                window_moment(r.ell, r.omega_c, gamma, window, p)?
            } else {
                jump.abs() * (CENTRE_ULPS * ulp + reach * reach / r.omega_c)
            };
            let moment = Some(multiplicity * moment / pi);
            let shape = PeakSpec {
                id: r.ell,
                center: r.omega_c,
                half_width: gamma,
                window,
                excise: true,
                jump: multiplicity * jump / pi,
                component: Polarization::Tm.index(),
                extent,
                moment,
            };
            peaks.push(shape);
            audit.push(PeakContribution {
                ell: r.ell,
                contribution: w_c * shape.jump,
                error_bound: excision_bound(weight, &shape),
                treatment: PeakTreatment::Excised(PeakWindow {
                    resonance,
                    phase_jump: jump,
                    weight_at_center: w_c,
                }),
            });
        } else {
            peaks.push(PeakSpec {
                id: r.ell,
                center: r.omega_c,
                half_width: gamma,
                window: r.window,
                excise: false,
                jump: 0.0,
                component: Polarization::Tm.index(),
                extent,
                moment: None,
            });
            let (a, b) = r.window;
            let breaks = collect_breaks(
                a,
                b,
                peak_breaks(&PeakSpec {
                    excise: false,
                    extent: 0.5 * (b - a),
                    ..peaks[peaks.len() - 1]
                }),
            );
            let mut failure = None;
            let single = integrate_adaptive_with_breakpoints(
                |w| {
                    let d =
                        phase_shift_derivative(Polarization::Tm, r.ell, w, p).unwrap_or_else(|e| {
                            failure = Some(e);
                            0.0
                        });
                    weight.value(w) * multiplicity * d / pi
                },
                &breaks,
                Tolerance {
                    rel: tol,
                    abs: floor,
                },
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let single = match single {
                Ok(q) => q,
                Err(Error::Quadrature(q)) => *q,
                Err(e) => return Err(e),
            };
            audit.push(PeakContribution {
                ell: r.ell,
                contribution: single.value,
                error_bound: single.abs_error_estimate,
                treatment: PeakTreatment::Resolved(r),
            });
        }
    }

    let min_order = located.iter().map(|l| l.ell).max().unwrap_or(0);
    let sum_tol = (tol * 1e-2).max(1e-15);
    let density = |w: f64, mask: &[u32]| -> Result<[f64; 2]> {
        let m = WaveMask {
            excluded_tm: mask.to_vec(),
            min_order,
        };
        Ok(partial_wave_sum(w, p, sum_tol, &m)?.map(|d| d / pi))
    };
    let (top, tail) = match &cut {
        Some(c) => {
            let previous = located
                .last()
                .map_or(0.0, |l| l.resonance.map_or(l.bounds.0, |r| r.omega_c));
            truncate_at(c, previous, weight, p, t, top, |w, mask| {
                density(w, mask).map(|d| d[0].abs() + d[1].abs())
            })?
        }
        None => (top, 0.0),
    };
    let octaves = (-8..).map(|k| t * 2f64.powi(k)).take_while(|w| *w < top);
    let peaks: Vec<PeakSpec> = peaks.into_iter().filter(|s| s.window.1 < top).collect();
    let target = Tolerance {
        rel: tol,
        abs: floor,
    };
    let result = integrate_with_peaks(
        density,
        weight,
        0.0,
        top,
        &peaks,
        &octaves.collect::<Vec<_>>(),
        target,
    );
    let attach = |mut q: QuadratureResult| {
        q.peak_contributions = audit.clone();
        q.abs_error_estimate += tail;
        q
    };
    match result {
        Ok(q) => {
            let q = attach(q);
            if tail > (tol * q.value.abs()).max(floor) {
                Err(Error::Quadrature(Box::new(q)))
            } else {
                Ok(q)
            }
        }
        Err(Error::Quadrature(q)) => Err(Error::Quadrature(Box::new(attach(*q)))),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear;

    impl SpectralWeight for Linear {
        fn value(&self, x: f64) -> f64 {
            1.0 + 2.0 * x
        }
        fn derivative(&self, _: f64) -> f64 {
            2.0
        }
    }

    #[test]
    fn polynomial() {
        let r = integrate_adaptive(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.abs_error_estimate >= (r.value - 1.0 / 3.0).abs());
    }

    #[test]
    fn truncated_exponential_moment() {
        let r = integrate_adaptive(|x| x * (-x).exp(), 0.0, 40.0, 1e-12).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn narrow_arctan_derivative() {
        let (c, w) = (0.3, 1e-6);
        let f = |x: f64| (1.0 / w) / (1.0 + ((x - c) / w).powi(2));
        let r = integrate_adaptive(f, c - 10.0 * w, c + 10.0 * w, 1e-10).unwrap();
        let exact = 2.0 * 10.0_f64.atan();
        assert!((r.value - exact).abs() < 1e-10, "{} vs {exact}", r.value);
        assert!(r.abs_error_estimate >= (r.value - exact).abs());
    }

    #[test]
    fn reports_partial_result_on_failure() {
        match integrate_adaptive(|x| 1.0 / x.sqrt().max(1e-300), 0.0, 1.0, 1e-15) {
            Err(Error::Quadrature(q)) => assert!((q.value - 2.0).abs() < 1e-3),
            Ok(q) => assert!((q.value - 2.0).abs() < 1e-12),
            Err(e) => panic!("{e}"),
        }
        assert!(integrate_adaptive(|x| x, 1.0, 0.0, 1e-8).is_err());
        assert!(integrate_adaptive(|_| f64::NAN, 0.0, 1.0, 1e-8).is_err());
    }

    /// Lorentzian of half-width `gamma` at `c` integrated against `1 + 2x` on `[a, b]`.
    fn lorentzian_exact(a: f64, b: f64, c: f64, gamma: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let f = |x: f64| {
            let u = x - c;
            (1.0 + 2.0 * c) / pi * (u / gamma).atan() + gamma / pi * (u * u + gamma * gamma).ln()
        };
        f(b) - f(a)
    }

    #[test]
    fn excised_lorentzian_matches_closed_form() {
        let pi = std::f64::consts::PI;
        let (c, gamma) = (0.4, 1e-12);
        let lorentz = move |x: f64| gamma / pi / ((x - c).powi(2) + gamma * gamma);
        let reach = 500.0 * gamma;
        let peak = PeakSpec {
            id: 1,
            center: c,
            half_width: gamma,
            window: (c - reach, c + reach),
            excise: true,
            jump: 2.0 * (reach / gamma).atan() / pi,
            component: 0,
            extent: 0.2,
            moment: None,
        };
        let r = integrate_with_peaks(
            |x, mask: &[u32]| {
                let peak = if mask.contains(&1) { 0.0 } else { lorentz(x) };
                Ok([peak, x.cos()])
            },
            &Linear,
            0.0,
            1.0,
            &[peak],
            &[],
            Tolerance::relative(1e-9),
        )
        .unwrap();
        // ∫ (1+2x) cos x on [0, 1]
        let smooth = 3.0 * 1.0_f64.sin() + 2.0 * 1.0_f64.cos() - 2.0;
        let exact = lorentzian_exact(0.0, 1.0, c, gamma) + smooth;
        assert!((r.value - exact).abs() < 1e-10, "{} vs {exact}", r.value);
        let parts = r.polarization_parts.unwrap();
        assert!((parts[1] - smooth).abs() < 1e-12);
    }
}
