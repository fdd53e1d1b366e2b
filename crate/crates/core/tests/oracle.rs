mod common;

use common::{relative, spectral};
use plasmashell::thermo::{EntropyWeight, FreeEnergyWeight};
use plasmashell::{entropy_raw, entropy_subtracted, free_energy_thermal, ShellParams};

fn shell(omega: f64) -> ShellParams {
    ShellParams::new(omega, 1.0).unwrap()
}

#[test]
fn broad_resonances_match_dense_grid() {
    let (p, t) = (shell(5.0), 0.1);
    let reference = spectral(&EntropyWeight { temperature: t }, &p, t);
    let s = entropy_raw(t, &p, 1e-8).unwrap();
    assert!(
        relative(s.s_raw, reference.value) < 1e-4,
        "{} vs {:?}",
        s.s_raw,
        reference
    );
}

#[test]
fn narrow_resonances_match_dense_grid() {
    let (p, t) = (shell(0.05), 0.0105);
    let reference = spectral(&EntropyWeight { temperature: t }, &p, t);
    let s = entropy_raw(t, &p, 1e-8).unwrap();
    assert!(reference.excised.contains(&3));
    assert!(
        relative(s.s_raw, reference.value) < 1e-3,
        "{} vs {:?}",
        s.s_raw,
        reference
    );
}

#[test]
fn thermal_free_energy_is_negative() {
    let (p, t) = (shell(0.05), 0.01);
    let reference = spectral(&FreeEnergyWeight { temperature: t }, &p, t);
    let f = free_energy_thermal(t, &p, 1e-8).unwrap();
    assert!(reference.value < 0.0 && f.value < 0.0);
    assert!(
        relative(f.value, reference.value) < 1e-3,
        "{} vs {:?}",
        f.value,
        reference
    );
}

#[test]
fn weak_coupling_goes_negative() {
    let (p, t) = (shell(0.001), 2e-4);
    let reference = spectral(&EntropyWeight { temperature: t }, &p, t);
    let s = entropy_subtracted(t, &p, 1e-8).unwrap();
    assert!(s.s_subtr < 0.0);
    assert!(reference.value - s.s_high < 0.0);
    assert!(
        relative(s.s_raw, reference.value) < 1e-3,
        "{} vs {:?}",
        s.s_raw,
        reference
    );
}
