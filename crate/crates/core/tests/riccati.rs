use plasmashell::{riccati_j, riccati_modified, riccati_y};
use proptest::prelude::*;

const GRID: [f64; 6] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
/// Values below this are too close to underflow for relative identities.
const TINY: f64 = 1e-280;

fn scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

#[test]
fn wronskians_on_grid() {
    for z in GRID {
        for ell in 0..=60 {
            let (j, y) = (riccati_j(ell, z).unwrap(), riccati_y(ell, z).unwrap());
            let w = j.value * y.derivative - j.derivative * y.value;
            assert!((w - 1.0).abs() < 1e-12, "l={ell} z={z}: {w}");
            let (s, e) = riccati_modified(ell, z).unwrap();
            let w = s.value * e.derivative - s.derivative * e.value;
            assert!((w + 1.0).abs() < 1e-12, "l={ell} x={z}: {w}");
        }
    }
}

#[test]
fn recurrence_and_derivative_identities_on_grid() {
    for z in GRID {
        for ell in 1..=60 {
            let lo = riccati_j(ell - 1, z).unwrap();
            let mid = riccati_j(ell, z).unwrap();
            let hi = riccati_j(ell + 1, z).unwrap();
            let f = f64::from(ell);
            let rhs = (2.0 * f + 1.0) / z * mid.value;
            if scale(&[lo.value, hi.value, mid.value]) > TINY
                && lo.value.abs().min(hi.value.abs()) > TINY
            {
                let s = scale(&[lo.value, hi.value, rhs]);
                assert!(
                    (lo.value + hi.value - rhs).abs() <= 1e-10 * s,
                    "recurrence l={ell} z={z}"
                );
                let d = lo.value - f / z * mid.value;
                let s = scale(&[lo.value, f / z * mid.value, mid.derivative]);
                assert!(
                    (mid.derivative - d).abs() <= 1e-10 * s,
                    "derivative l={ell} z={z}"
                );
            }
        }
    }
}

#[test]
fn small_argument_power_law() {
    // ĵ_l(z) ≈ z^(l+1) / (2l+1)!!
    let z: f64 = 1e-4;
    for ell in 0..=20u32 {
        let double_factorial: f64 = (1..=2 * ell + 1).step_by(2).map(f64::from).product();
        let expected = z.powi(ell as i32 + 1) / double_factorial;
        let j = riccati_j(ell, z).unwrap().value;
        assert!(
            j > 0.0 && ((j - expected) / expected).abs() < 1e-7,
            "l={ell}"
        );
    }
}

fn central(f: impl Fn(f64) -> f64, z: f64) -> f64 {
    let h = 1e-5;
    (f(z + h) - f(z - h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn wronskian_holds_anywhere(ell in 0u32..=100, lz in -3.0f64..3.0) {
        let z = 10f64.powf(lz);
        let (j, y) = (riccati_j(ell, z).unwrap(), riccati_y(ell, z).unwrap());
        // Both factors must be representable for the plain product to mean anything.
        prop_assume!(j.value.abs() > TINY && y.derivative.abs() < 1.0 / TINY);
        let w = j.value * y.derivative - j.derivative * y.value;
        prop_assert!((w - 1.0).abs() < 1e-12, "{}", w);
    }

    #[test]
    fn modified_wronskian_holds_anywhere(ell in 0u32..=60, lx in -3.0f64..2.8) {
        let x = 10f64.powf(lx);
        let (s, e) = riccati_modified(ell, x).unwrap();
        let w = s.value * e.derivative - s.derivative * e.value;
        prop_assert!((w + 1.0).abs() < 1e-12, "{}", w);
    }

    #[test]
    fn derivatives_match_differences(ell in 0u32..=10, z in 0.5f64..20.0) {
        let checks = [
            (central(|z| riccati_j(ell, z).unwrap().value, z), riccati_j(ell, z).unwrap().derivative),
            (central(|z| riccati_y(ell, z).unwrap().value, z), riccati_y(ell, z).unwrap().derivative),
            (central(|z| riccati_modified(ell, z).unwrap().0.value, z), riccati_modified(ell, z).unwrap().0.derivative),
            (central(|z| riccati_modified(ell, z).unwrap().1.value, z), riccati_modified(ell, z).unwrap().1.derivative),
        ];
        for (fd, exact) in checks {
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{} vs {}", fd, exact);
        }
    }

    #[test]
    fn second_derivative_matches_difference(ell in 0u32..=10, z in 0.5f64..20.0) {
        let j = riccati_j(ell, z).unwrap();
        let fd = central(|z| riccati_j(ell, z).unwrap().derivative, z);
        let exact = plasmashell::riccati_second_derivative(ell, z, &j).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
    }
}
