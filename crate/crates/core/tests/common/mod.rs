//! Brute-force reference integrals on a uniform grid, sharing nothing with the adaptive
//! engine except the per-order phase shifts themselves.
#![allow(dead_code)]

use plasmashell::scattering::phase_derivative_terms;
use plasmashell::{find_resonance, phase_shift, Polarization, ShellParams, SpectralWeight};
use std::f64::consts::PI;

pub const NODES: usize = 1_000_000;
/// Lower end of the grid; below it the integrand vanishes like ω².
const LOWEST: f64 = 1e-6;
/// Upper end in units of T. The weights have fallen below 1e-17 there.
const THERMAL_REACH: f64 = 50.0;
/// Resonances narrower than this many grid steps are cut out.
const RESOLVED_STEPS: f64 = 4.0;
/// Half-width of a cut-out window in grid steps.
const WINDOW_STEPS: usize = 50;
const SIMPSON_PANELS: usize = 4000;

#[derive(Debug)]
pub struct Oracle {
    pub value: f64,
    /// Orders whose resonance was replaced by a window integral.
    pub excised: Vec<u32>,
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

/// `∫ (dω/π) weight · Σ_l (2l+1)(δ'^TE_l + δ'^TM_l)` by the trapezoid rule on
/// [`NODES`] uniform points, with each unresolvable TM peak handled by parts over a
/// window of ±[`WINDOW_STEPS`] nodes.
pub fn spectral(weight: &dyn SpectralWeight, p: &ShellParams, t: f64) -> Oracle {
    let hi = THERMAL_REACH * t;
    let h = (hi - LOWEST) / (NODES - 1) as f64;
    let node = |i: usize| LOWEST + i as f64 * h;
    let max_order = (2.0 * hi * p.radius + 30.0).ceil() as u32;

    // (ell, first node, last node)
    let mut windows = Vec::new();
    for ell in 1..=max_order {
        let Ok(r) = find_resonance(ell, p, None) else {
            continue;
        };
        if r.omega_c >= hi {
            break;
        }
        if r.half_width < RESOLVED_STEPS * h {
            let centre = ((r.omega_c - LOWEST) / h) as usize;
            if centre > WINDOW_STEPS && centre + WINDOW_STEPS + 1 < NODES {
                windows.push((
                    ell,
                    r.omega_c,
                    centre - WINDOW_STEPS,
                    centre + WINDOW_STEPS + 1,
                ));
            }
        }
    }

    let mut total = 0.0;
    let mut inside = vec![0.0; windows.len()];
    for i in 0..NODES {
        let w = node(i);
        let terms = phase_derivative_terms(w, p, max_order).expect("phase terms");
        let density: f64 = terms
            .iter()
            .enumerate()
            .map(|(k, d)| (2 * k + 3) as f64 * (d[0] + d[1]))
            .sum();
        let end = if i == 0 || i == NODES - 1 { 0.5 } else { 1.0 };
        let wv = weight.value(w);
        total += end * wv * density;
        for (slot, &(ell, _, a, b)) in windows.iter().enumerate() {
            if (a..=b).contains(&i) {
                let end = if i == a || i == b { 0.5 } else { 1.0 };
                inside[slot] += end * wv * f64::from(2 * ell + 1) * terms[ell as usize - 1][1];
            }
        }
    }
    total *= h;

    let phase = |ell: u32, w: f64| phase_shift(Polarization::Tm, ell, w, p).expect("phase");
    for (slot, &(ell, c, a, b)) in windows.iter().enumerate() {
        let (a, b) = (node(a), node(b));
        let boundary = weight.value(b) * phase(ell, b) - weight.value(a) * phase(ell, a);
        let slope = |w: f64| weight.derivative(w) * phase(ell, w);
        let bulk = simpson(slope, a, c, SIMPSON_PANELS) + simpson(slope, c, b, SIMPSON_PANELS);
        total += f64::from(2 * ell + 1) * (boundary - bulk) - h * inside[slot];
    }
    Oracle {
        value: total / PI,
        excised: windows.iter().map(|w| w.0).collect(),
    }
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
