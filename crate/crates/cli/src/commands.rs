use rayon::prelude::*;
use serde_json::{json, Value};

use plasmashell::scattering::phase_derivative_terms;
use plasmashell::{
    entropy_subtracted, find_resonance, g_function, summed_phase_derivative, EntropyBreakdown,
    Error, Polarization, Resonance, ShellParams,
};

use crate::config::RunConfig;
use crate::report::{Cell, Report};
use crate::Failure;

fn shell(config: &RunConfig) -> Result<ShellParams, Failure> {
    Ok(ShellParams::new(config.omega_p, config.radius)?)
}

/// Reference resonance features at Ω = 0.05, R = 1, T = 0.0105:
/// (ω_c, height, |ω_c - ω_h|, g·height, |ω_c - ω_h|·g·height) for l = 1..7.
const REFERENCE: [[f64; 5]; 7] = [
    [0.18052691, 2860.2426, 0.00035129, 0.00177610, 6.23928e-7],
    [0.24406326, 287976.0, 3.47228e-6, 0.00056127, 1.94888e-9],
    [0.29214134, 4.51670e7, 2.21400e-8, 0.00107446, 2.37887e-11],
    [0.33281602, 9.65673e9, 1.03555e-10, 0.00541509, 5.60758e-13],
    [0.36882255, 2.62036e12, 3.81627e-13, 0.05262237, 2.00821e-14],
    [0.40151099, 8.62814e14, 1.15900e-15, 0.83673547, 9.69775e-16],
    [0.43167475, 3.34282e17, 2.99149e-18, 19.672272, 5.88493e-17],
];

fn at_reference(config: &RunConfig) -> bool {
    config.omega_p == 0.05 && config.radius == 1.0 && config.temperature == 0.0105
}

/// The resonance of order `ell`, or `None` when there is none to find.
fn resonance(ell: u32, p: &ShellParams) -> Result<Option<Resonance>, Failure> {
    match find_resonance(ell, p, None) {
        Ok(r) => Ok(Some(r)),
        Err(Error::ResonanceNotFound { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn table1(config: &RunConfig) -> Result<Report, Failure> {
    let p = shell(config)?;
    let t = config.temperature;
    let compare = at_reference(config);
    let mut columns = vec![
        "ell",
        "status",
        "omega_c",
        "height",
        "half_width",
        "g_height",
        "product",
    ];
    if compare {
        columns.extend([
            "omega_c_ref",
            "height_ref",
            "half_width_ref",
            "g_height_ref",
            "product_ref",
            "omega_c_dev",
            "height_dev",
            "half_width_dev",
            "g_height_dev",
            "product_dev",
        ]);
    }
    let mut report = Report::new("table1", columns);
    let mut missing = Vec::new();
    for ell in 1..=config.ell_max.unwrap_or(7) {
        let mut row: Vec<Cell> = vec![ell.into()];
        let values = match resonance(ell, &p)? {
            Some(r) => {
                let g = g_function(r.omega_c / t)?;
                let gh = g * r.height;
                row.push("ok".into());
                Some([r.omega_c, r.height, r.half_width, gh, r.half_width * gh])
            }
            None => {
                missing.push(ell);
                row.push("not_found".into());
                None
            }
        };
        row.extend((0..5).map(|k| Cell::from(values.map(|v| v[k]))));
        if compare {
            let reference = REFERENCE.get(ell as usize - 1);
            row.extend((0..5).map(|k| Cell::from(reference.map(|r| r[k]))));
            row.extend((0..5).map(|k| {
                let dev = values
                    .zip(reference)
                    .map(|(v, r)| ((v[k] - r[k]) / r[k]).abs());
                Cell::from(dev)
            }));
        }
        report.push(row);
    }
    if compare {
        report.notes.push(
            "*_ref are reference values for these parameters; *_dev are relative deviations".into(),
        );
    }
    report.summarize("not_found", json!(missing));
    Ok(report)
}

pub fn resonances(config: &RunConfig) -> Result<Report, Failure> {
    let p = shell(config)?;
    let mut report = Report::new(
        "resonances",
        vec![
            "ell",
            "status",
            "omega_c",
            "height",
            "half_width",
            "window_lo",
            "window_hi",
            "argmax",
            "asymptote",
        ],
    );
    let mut missing = Vec::new();
    for ell in 1..=config.ell_max.unwrap_or(10) {
        let r = resonance(ell, &p)?;
        if r.is_none() {
            missing.push(ell);
        }
        report.push(vec![
            ell.into(),
            if r.is_some() { "ok" } else { "not_found" }.into(),
            r.map(|r| r.omega_c).into(),
            r.map(|r| r.height).into(),
            r.map(|r| r.half_width).into(),
            r.map(|r| r.window.0).into(),
            r.map(|r| r.window.1).into(),
            r.map(|r| r.argmax).into(),
            p.plasmon_asymptote(ell).into(),
        ]);
    }
    report.summarize("not_found", json!(missing));
    Ok(report)
}

fn breakdown_json(b: &EntropyBreakdown) -> Value {
    json!({ "te": b.parts.te, "tm": b.parts.tm, "peaks": b.parts.peaks })
}

pub fn entropy(config: &RunConfig) -> Result<Report, Failure> {
    let p = shell(config)?;
    let b = entropy_subtracted(config.temperature, &p, config.tol)?;
    let mut report = Report::new(
        "entropy",
        vec![
            "temperature",
            "s_raw",
            "s_high",
            "s_subtr",
            "error_estimate",
            "s_te",
            "s_tm",
            "evaluations",
        ],
    );
    report.push(vec![
        b.temperature.into(),
        b.s_raw.into(),
        b.s_high.into(),
        b.s_subtr.into(),
        b.error_estimate.into(),
        b.parts.te.into(),
        b.parts.tm.into(),
        b.evaluations.into(),
    ]);
    for w in &b.warnings {
        eprintln!("warning: {w}");
    }
    report
        .notes
        .extend(b.warnings.iter().map(|w| format!("warning: {w}")));
    if config.format == crate::config::Format::Json {
        report.summarize("parts", breakdown_json(&b));
    }
    Ok(report)
}

/// Where a tabulated S_subtr(T) changes sign, and how deep it goes.
pub fn scan_summary(points: &[(f64, f64)]) -> Value {
    let mut changes = Vec::new();
    for w in points.windows(2) {
        let ((t0, s0), (t1, s1)) = (w[0], w[1]);
        if (s0 < 0.0) != (s1 < 0.0) {
            changes.push(json!({
                "t_lo": t0,
                "t_hi": t1,
                "direction": if s1 < 0.0 { "to_negative" } else { "to_positive" },
            }));
        }
    }
    let min = points.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1));
    let negative: Vec<f64> = points
        .iter()
        .filter(|(_, s)| *s < 0.0)
        .map(|(t, _)| *t)
        .collect();
    let region = match (negative.first(), negative.last()) {
        (Some(lo), Some(hi)) => json!({ "t_min": lo, "t_max": hi, "points": negative.len() }),
        _ => Value::Null,
    };
    json!({
        "sign_changes": changes,
        "minimum": min.map(|(t, s)| json!({ "temperature": t, "s_subtr": s })),
        "negative_region": region,
    })
}

pub fn scan(config: &RunConfig) -> Result<Report, Failure> {
    let p = shell(config)?;
    let temps = config.t_grid.points();
    let results: Vec<EntropyBreakdown> = temps
        .par_iter()
        .map(|&t| entropy_subtracted(t, &p, config.tol))
        .collect::<Result<_, _>>()?;
    let mut report = Report::new(
        "scan",
        vec![
            "temperature",
            "s_raw",
            "s_high",
            "s_subtr",
            "error_estimate",
        ],
    );
    let mut warned = 0;
    for b in &results {
        warned += usize::from(!b.warnings.is_empty());
        report.push(vec![
            b.temperature.into(),
            b.s_raw.into(),
            b.s_high.into(),
            b.s_subtr.into(),
            b.error_estimate.into(),
        ]);
    }
    if warned > 0 {
        let note = format!("{warned} temperatures lie outside the small-T, small-coupling regime");
        eprintln!("warning: {note}");
        report.notes.push(note);
    }
    let points: Vec<(f64, f64)> = results.iter().map(|b| (b.temperature, b.s_subtr)).collect();
    if let Value::Object(m) = scan_summary(&points) {
        for (k, v) in m {
            report.summarize(&k, v);
        }
    }
    Ok(report)
}

pub fn phase(config: &RunConfig) -> Result<Report, Failure> {
    let p = shell(config)?;
    let grid = config.w_grid.points();
    let rows: Vec<[f64; 3]> = grid
        .par_iter()
        .map(|&w| -> Result<[f64; 3], Error> {
            match config.ell_max {
                Some(l) => {
                    let terms = phase_derivative_terms(w, &p, l)?;
                    let sum = |k: usize| {
                        terms
                            .iter()
                            .enumerate()
                            .map(|(i, d)| (2 * i + 3) as f64 * d[k])
                            .sum::<f64>()
                    };
                    Ok([w, sum(0), sum(1)])
                }
                None => Ok([
                    w,
                    summed_phase_derivative(Polarization::Te, w, &p, config.tol)?,
                    summed_phase_derivative(Polarization::Tm, w, &p, config.tol)?,
                ]),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut report = Report::new("phase", vec!["omega", "dphase_te", "dphase_tm"]);
    for r in rows {
        report.push(r.iter().map(|&x| x.into()).collect());
    }
    report
        .notes
        .push("dphase_* are sums over l of (2l+1) d(delta_l)/d(omega)".into());

    let mut listed = Vec::new();
    for ell in 1..=config
        .ell_max
        .unwrap_or(plasmashell::scattering::MAX_PARTIAL_WAVES)
    {
        if p.plasmon_asymptote(ell) > 2.0 * config.w_grid.max {
            break;
        }
        let Some(r) = resonance(ell, &p)? else {
            continue;
        };
        if (config.w_grid.min..=config.w_grid.max).contains(&r.omega_c) {
            listed.push(json!({
                "ell": ell,
                "omega_c": r.omega_c,
                "height": r.height,
                "half_width": r.half_width,
            }));
        }
    }
    report.summarize("tm_resonances", Value::Array(listed));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_a_dip() {
        let s = scan_summary(&[(1.0, 0.5), (2.0, -0.1), (3.0, -0.3), (4.0, 0.2)]);
        assert_eq!(s["sign_changes"].as_array().unwrap().len(), 2);
        assert_eq!(s["minimum"]["temperature"], json!(3.0));
        assert_eq!(s["negative_region"]["t_min"], json!(2.0));
        assert_eq!(s["negative_region"]["t_max"], json!(3.0));
    }

    #[test]
    fn summary_without_a_dip() {
        let s = scan_summary(&[(1.0, 0.5), (2.0, 0.1)]);
        assert!(s["negative_region"].is_null());
        assert!(s["sign_changes"].as_array().unwrap().is_empty());
    }
}
