//! Thermal free energy and entropy of the electromagnetic field coupled to a spherical
//! plasma shell, computed from the partial-wave scattering phase shifts.
//!
//! Layers, bottom up: [`riccati`] for the Riccati-Bessel functions, [`scattering`] for
//! phase shifts and resonances, [`quadrature`] for frequency integrals that cut out
//! unresolvable peaks, and [`thermo`] on top.

pub mod error;
pub mod quadrature;
pub mod riccati;
mod roots;
pub mod scattering;
pub mod sum;
pub mod thermo;

pub use error::{Error, Result};
pub use quadrature::{
    integrate_adaptive, integrate_spectral, PeakContribution, PeakTreatment, PeakWindow,
    QuadratureResult, SpectralWeight, Tolerance,
};
pub use riccati::{riccati_j, riccati_modified, riccati_second_derivative, riccati_y, RiccatiEval};
pub use scattering::{
    find_resonance, jost_imaginary, phase_shift, phase_shift_derivative, summed_phase_derivative,
    Polarization, Resonance, ShellParams,
};
pub use thermo::{
    entropy_raw, entropy_subtracted, free_energy_thermal, g_function, heat_kernel_coefficients,
    high_t_asymptotics, subtraction_terms, EntropyBreakdown, HeatKernelCoefficients,
    HighTemperatureAsymptotics, ZETA_3,
};

/// Library version, echoed in machine-readable output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
