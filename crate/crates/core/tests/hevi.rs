use imkg::hevi::{gelfand_radius, hstability_matrix, scan_grid, spectral_radius, CMatrix3};
use imkg::registry::lookup;
use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schur_radius(m: &CMatrix3) -> f64 {
    m.schur()
        .eigenvalues()
        .expect("complex Schur form is triangular")
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[test]
fn spectral_radius_matches_schur_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let m = Matrix3::from_fn(|_, _| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
        let want = schur_radius(&m);
        assert!((spectral_radius(&m) - want).abs() < 1e-10 * want.max(1.0), "{m}");
    }
}

#[test]
fn spectral_radius_matches_schur_on_hevi_amplification() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for name in ["232a", "232b", "343a", "254c"] {
        let t = lookup(name).unwrap().tableau();
        for _ in 0..200 {
            let (x, z) = (rng.gen_range(0.0..4.0), rng.gen_range(0.0..60.0));
            let m = hstability_matrix(&t, x, z).unwrap();
            let want = schur_radius(&m);
            assert!((spectral_radius(&m) - want).abs() < 1e-9 * want.max(1.0), "{name} ({x}, {z})");
        }
    }
}

#[test]
fn defective_matrices_agree_with_gelfand() {
    let j = Complex64::new(0.9, 0.1);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let m = CMatrix3::new(j, one, zero, zero, j, one, zero, zero, j);
    assert!((spectral_radius(&m) - j.norm()).abs() < 1e-8);
    assert!((gelfand_radius(&m) - j.norm()).abs() < 1e-3);
}

#[test]
fn amplification_is_identity_at_origin_and_unitary_without_gravity_waves() {
    let t = lookup("343a").unwrap().tableau();
    let m = hstability_matrix(&t, 0.0, 0.0).unwrap();
    assert!((m - CMatrix3::identity()).norm() < 1e-15);
    let m = hstability_matrix(&t, 0.0, 7.5).unwrap();
    assert!(spectral_radius(&m) <= 1.0 + 1e-12);
}

#[test]
fn scan_grid_is_ordered_and_reproducible() {
    let t = lookup("232b").unwrap().tableau();
    let a = scan_grid(&t, 2.5, 50.0, 26, 51, &[]).unwrap();
    let b = scan_grid(&t, 2.5, 50.0, 26, 51, &[]).unwrap();
    assert_eq!(a.len(), 26 * 51);
    let pts: Vec<_> = a.points().collect();
    assert_eq!(pts, b.points().collect::<Vec<_>>());
    assert_eq!(pts[0], (0.0, 0.0, pts[0].2));
    assert_eq!((pts[1].0, pts[1].1), (0.0, 1.0));
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 26 * 51);
}
