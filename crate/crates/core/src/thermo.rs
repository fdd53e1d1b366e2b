//! Thermodynamics of the shell. The spectral integrals give the free energy and entropy;
//! the heat-kernel coefficients fix what is subtracted from them, and the asymptotic laws
//! serve as checks at both ends of the temperature range.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{check_positive, Error, Result};
use crate::quadrature::{
    integrate_spectral, PeakContribution, PeakTreatment, QuadratureResult, SpectralWeight,
};
use crate::scattering::ShellParams;

/// Apéry's constant ζ(3).
#[allow(clippy::excessive_precision)]
pub const ZETA_3: f64 = 1.202_056_903_159_594_285_40;

/// `√(10/3)`: the coupling ΩR at which the leading high-temperature term changes sign.
pub fn critical_coupling() -> f64 {
    (10.0_f64 / 3.0).sqrt()
}

/// `-ln(1 - e^{-x})` for `x > 0`.
fn neg_log_one_minus_exp(x: f64) -> f64 {
    if x < std::f64::consts::LN_2 {
        -(-(-x).exp_m1()).ln()
    } else {
        -(-(-x).exp()).ln_1p()
    }
}

fn g_unchecked(x: f64) -> f64 {
    x / x.exp_m1() + neg_log_one_minus_exp(x)
}

/// `g'(x) = -x e^x / (e^x - 1)²`.
fn g_derivative_unchecked(x: f64) -> f64 {
    let d = -(-x).exp_m1();
    -x * (-x).exp() / (d * d)
}

/// Entropy of one oscillator of frequency `x·T`: `g(x) = x/(e^x - 1) - ln(1 - e^{-x})`.
pub fn g_function(x: f64) -> Result<f64> {
    check_positive("g-function argument", x)?;
    Ok(g_unchecked(x))
}

/// `g'(x)`.
pub fn g_derivative(x: f64) -> Result<f64> {
    check_positive("g-function argument", x)?;
    Ok(g_derivative_unchecked(x))
}

/// `g(ω/T)`, the entropy weight.
#[derive(Debug, Clone, Copy)]
pub struct EntropyWeight {
    pub temperature: f64,
}

impl SpectralWeight for EntropyWeight {
    fn value(&self, omega: f64) -> f64 {
        g_unchecked(omega / self.temperature)
    }

    fn derivative(&self, omega: f64) -> f64 {
        g_derivative_unchecked(omega / self.temperature) / self.temperature
    }
}

/// `T ln(1 - e^{-ω/T})`, the free-energy weight.
#[derive(Debug, Clone, Copy)]
pub struct FreeEnergyWeight {
    pub temperature: f64,
}

impl SpectralWeight for FreeEnergyWeight {
    fn value(&self, omega: f64) -> f64 {
        -self.temperature * neg_log_one_minus_exp(omega / self.temperature)
    }

    fn derivative(&self, omega: f64) -> f64 {
        1.0 / (omega / self.temperature).exp_m1()
    }
}

/// Heat-kernel coefficients of the shell, per polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatKernelCoefficients {
    pub a_half_te: f64,
    pub a_one_te: f64,
    pub a_threehalf_te: f64,
    pub a_half_tm: f64,
    pub a_one_tm: f64,
    pub a_threehalf_tm: f64,
}

impl HeatKernelCoefficients {
    pub fn a_half(&self) -> f64 {
        self.a_half_te + self.a_half_tm
    }

    pub fn a_one(&self) -> f64 {
        self.a_one_te + self.a_one_tm
    }

    pub fn a_threehalf(&self) -> f64 {
        self.a_threehalf_te + self.a_threehalf_tm
    }
}

pub fn heat_kernel_coefficients(p: &ShellParams) -> HeatKernelCoefficients {
    let (o, r) = (p.omega_p, p.radius);
    let pi32 = PI.powf(1.5);
    HeatKernelCoefficients {
        a_half_te: 0.0,
        a_one_te: -4.0 * PI * o * r * r,
        a_threehalf_te: pi32 * o * o * r * r,
        a_half_tm: 8.0 * pi32 * r * r,
        a_one_tm: -4.0 * PI / 3.0 * o * r * r,
        a_threehalf_tm: -10.0 / 3.0 * pi32,
    }
}

/// Free energy and entropy carried by the `a_{1/2}` and `a_1` heat-kernel terms,
/// `(F_high, S_high)`:
///
/// ```text
/// F_high = -ζ(3)/(4π^{3/2}) a_{1/2} T³ - (a_1/24) T²   = -2ζ(3)R²T³ + (2π/9)ΩR²T²
/// S_high = -dF_high/dT                              = 6ζ(3)R²T² - (4π/9)ΩR²T
/// ```
pub fn subtraction_terms(temperature: f64, p: &ShellParams) -> Result<(f64, f64)> {
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::domain(format!(
            "temperature must be non-negative and finite, got {temperature}"
        )));
    }
    let t = temperature;
    let hk = heat_kernel_coefficients(p);
    let c3 = -ZETA_3 / (4.0 * PI.powf(1.5)) * hk.a_half();
    let c2 = -hk.a_one() / 24.0;
    let f_high = c3 * t.powi(3) + c2 * t * t;
    let s_high = -(3.0 * c3 * t * t + 2.0 * c2 * t);
    Ok((f_high, s_high))
}

/// Leading behaviour of the subtracted quantities as `T → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HighTemperatureAsymptotics {
    /// `(Ω²R² - 10/3)/8`.
    pub coefficient: f64,
    /// `-coefficient · T ln T`.
    pub free_energy: f64,
    /// `coefficient · ln T`.
    pub entropy: f64,
    /// Whether the subtracted entropy ends up negative.
    pub negative_entropy: bool,
}

pub fn high_t_asymptotics(temperature: f64, p: &ShellParams) -> Result<HighTemperatureAsymptotics> {
    check_positive("temperature", temperature)?;
    let x = p.coupling();
    let c = critical_coupling();
    // factored so that the coefficient vanishes exactly at the critical coupling
    let coefficient = (x - c) * (x + c) / 8.0;
    let ln_t = temperature.ln();
    Ok(HighTemperatureAsymptotics {
        coefficient,
        free_energy: -coefficient * temperature * ln_t,
        entropy: coefficient * ln_t,
        negative_entropy: coefficient * ln_t < 0.0,
    })
}

/// `(6 + ΩR)/(3 + ΩR)`, the coupling dependence of the leading low-temperature terms.
/// Defined down to `ΩR = 0`.
pub fn low_temperature_factor(coupling: f64) -> f64 {
    (6.0 + coupling) / (3.0 + coupling)
}

/// `ΔF → -(π³/15) (6+ΩR)/(3+ΩR) R³ T⁴`.
pub fn low_temperature_free_energy(temperature: f64, p: &ShellParams) -> f64 {
    -PI.powi(3) / 15.0
        * low_temperature_factor(p.coupling())
        * p.radius.powi(3)
        * temperature.powi(4)
}

/// `S → (4π³/15) (6+ΩR)/(3+ΩR) R³ T³`.
pub fn low_temperature_entropy(temperature: f64, p: &ShellParams) -> f64 {
    4.0 * PI.powi(3) / 15.0
        * low_temperature_factor(p.coupling())
        * p.radius.powi(3)
        * temperature.powi(3)
}

/// `S_subtr ≈ (4πΩR²/9) T - 6ζ(3) R² T² + (4π³/15) (6+ΩR)/(3+ΩR) R³ T³`.
pub fn low_temperature_subtracted_entropy(temperature: f64, p: &ShellParams) -> f64 {
    let (t, r) = (temperature, p.radius);
    4.0 * PI * p.omega_p * r * r / 9.0 * t - 6.0 * ZETA_3 * r * r * t * t
        + low_temperature_entropy(t, p)
}

/// `T ∫ (dω/π) ln(1 - e^{-ω/T}) δ'(ω)`.
pub fn free_energy_thermal(
    temperature: f64,
    p: &ShellParams,
    tol: f64,
) -> Result<QuadratureResult> {
    check_positive("temperature", temperature)?;
    integrate_spectral(&FreeEnergyWeight { temperature }, p, temperature, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyParts {
    pub te: f64,
    pub tm: f64,
    pub peaks: Vec<PeakContribution>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyBreakdown {
    pub temperature: f64,
    /// `∫ (dω/π) g(ω/T) δ'(ω)`.
    pub s_raw: f64,
    pub s_high: f64,
    /// `s_raw - s_high`.
    pub s_subtr: f64,
    pub parts: EntropyParts,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub warnings: Vec<String>,
}

/// Above `VALIDITY_FRACTION · max(Ω, 1/R)` the entropy is flagged as outside the regime
/// where the numerics are trustworthy.
pub const VALIDITY_FRACTION: f64 = 0.5;

/// Raw entropy together with the subtraction terms and the subtracted entropy.
pub fn entropy_raw(temperature: f64, p: &ShellParams, tol: f64) -> Result<EntropyBreakdown> {
    check_positive("temperature", temperature)?;
    let q = integrate_spectral(&EntropyWeight { temperature }, p, temperature, tol)?;
    let (_, s_high) = subtraction_terms(temperature, p)?;
    let [te, tm] = q.polarization_parts.unwrap_or([f64::NAN; 2]);

    let mut warnings = Vec::new();
    let limit = VALIDITY_FRACTION * p.omega_p.max(1.0 / p.radius);
    if temperature > limit {
        warnings.push(format!(
            "temperature {temperature} above {limit}: outside the small-T, small-coupling regime"
        ));
    }
    for peak in &q.peak_contributions {
        if let PeakTreatment::Missing { lower, upper } = peak.treatment {
            warnings.push(format!(
                "no TM resonance found for l = {} in [{lower}, {upper}]",
                peak.ell
            ));
        }
    }

    Ok(EntropyBreakdown {
        temperature,
        s_raw: q.value,
        s_high,
        s_subtr: q.value - s_high,
        parts: EntropyParts {
            te,
            tm,
            peaks: q.peak_contributions,
        },
        error_estimate: q.abs_error_estimate,
        evaluations: q.evaluations,
        warnings,
    })
}

/// Subtracted entropy `S_raw - S_high`; the same breakdown as [`entropy_raw`].
pub fn entropy_subtracted(temperature: f64, p: &ShellParams, tol: f64) -> Result<EntropyBreakdown> {
    entropy_raw(temperature, p, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shell(omega: f64) -> ShellParams {
        ShellParams::new(omega, 1.0).unwrap()
    }

    #[test]
    fn g_values() {
        assert!((g_function(1.0).unwrap() - 1.040_651_852_256_41).abs() < 1e-14);
        let big = g_function(1e3).unwrap();
        assert!((0.0..1e-300).contains(&big));
        let (a, b, c) = (
            g_function(0.1).unwrap(),
            g_function(1.0).unwrap(),
            g_function(10.0).unwrap(),
        );
        assert!(a > b && b > c);
        assert!(g_function(0.0).is_err());
        assert!(g_function(-1.0).is_err());
    }

    #[test]
    fn g_derivative_matches_difference() {
        for &x in &[1e-3, 0.3, 2.0, 40.0] {
            let h = 1e-5 * x;
            let fd = (g_unchecked(x + h) - g_unchecked(x - h)) / (2.0 * h);
            assert!((fd / g_derivative(x).unwrap() - 1.0).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn free_energy_weight_derivative() {
        let w = FreeEnergyWeight { temperature: 0.3 };
        let (x, h) = (0.2, 1e-6);
        let fd = (w.value(x + h) - w.value(x - h)) / (2.0 * h);
        assert!((fd / w.derivative(x) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn subtraction_numbers() {
        let (_, s) = subtraction_terms(1.0, &shell(1e-300)).unwrap();
        assert!((s - 7.212_341_418_957_57).abs() < 1e-12);
        let (_, s) = subtraction_terms(0.0105, &shell(0.05)).unwrap();
        let expected = 6.0 * ZETA_3 * 0.0105_f64.powi(2) - 4.0 * PI / 9.0 * 0.05 * 0.0105;
        assert!((s - expected).abs() < 1e-15);
        assert_eq!(subtraction_terms(0.0, &shell(1.0)).unwrap(), (0.0, 0.0));
        assert!(subtraction_terms(-1.0, &shell(1.0)).is_err());
    }

    #[test]
    fn subtraction_is_thermodynamic() {
        let p = shell(0.3);
        let (t, h) = (0.2, 1e-6);
        let fd = -(subtraction_terms(t + h, &p).unwrap().0
            - subtraction_terms(t - h, &p).unwrap().0)
            / (2.0 * h);
        assert!((fd - subtraction_terms(t, &p).unwrap().1).abs() < 1e-9);
    }

    #[test]
    fn heat_kernel_literals() {
        let hk = heat_kernel_coefficients(&shell(1.0));
        assert!((hk.a_one_te + 4.0 * PI).abs() < 1e-14);
        assert!((hk.a_one_tm + 4.0 * PI / 3.0).abs() < 1e-14);
        assert_eq!(hk.a_half_te, 0.0);
        let other = heat_kernel_coefficients(&shell(7.0));
        assert_eq!(hk.a_threehalf_tm, other.a_threehalf_tm);
        assert!((hk.a_threehalf_tm + 10.0 / 3.0 * PI.powf(1.5)).abs() < 1e-14);
    }

    #[test]
    fn high_temperature_sign() {
        let e = std::f64::consts::E;
        let a = high_t_asymptotics(e, &shell(1.0)).unwrap();
        assert!((a.entropy + 0.291_666_666_666_666_7).abs() < 1e-15);
        assert!(a.negative_entropy);
        let b = high_t_asymptotics(e, &shell(2.0)).unwrap();
        assert!((b.entropy - 0.083_333_333_333_333_3).abs() < 1e-15);
        let c = high_t_asymptotics(5.0, &shell(critical_coupling())).unwrap();
        assert_eq!(c.coefficient, 0.0);
    }

    #[test]
    fn low_temperature_expansion_pieces() {
        let p = shell(0.05);
        let t = 1e-4;
        let s = low_temperature_subtracted_entropy(t, &p);
        assert!((s / (4.0 * PI * 0.05 / 9.0 * t) - 1.0).abs() < 0.02);
        assert_eq!(low_temperature_factor(0.0), 2.0);
    }
}
