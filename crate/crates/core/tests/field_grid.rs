use std::f64::consts::PI;

use morrey_core::grid::{DyadicCube, GridField, Space};
use morrey_core::spaces::{default_window, hat_morrey_norm, MorreySpec};
use morrey_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_field(rng: &mut ChaCha8Rng, dim: usize, n: usize, extent: f64) -> GridField {
    let len = n.pow(dim as u32);
    let v = (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    GridField::new(dim, n, extent, Space::Physical, v).unwrap()
}

fn rel_diff(a: &GridField, b: &GridField) -> f64 {
    let d = a.sub(b).unwrap().l2_norm();
    d / a.l2_norm().max(1e-300)
}

#[test]
fn constant_field_lands_on_dc() {
    let f = GridField::from_fn_physical(1, 8, 4.0, |_| c(1.0)).unwrap();
    let g = f.to_fourier();
    for (i, z) in g.values().iter().enumerate() {
        if i == 0 {
            assert!((z.re - 8.0).abs() < 1e-12, "DC = {z}");
        } else {
            assert!(z.norm() < 1e-12, "bin {i} = {z}");
        }
    }
}

#[test]
fn zero_round_trip() {
    let f = GridField::zeros(2, 16, 3.0, Space::Physical).unwrap();
    assert_eq!(f.to_fourier().sup_norm(), 0.0);
    assert_eq!(f.to_fourier().to_physical(), f);
}

#[test]
fn gaussian_transform_matches_closed_form() {
    let f = GridField::from_fn_physical(1, 512, 20.0, |x| c((-x[0] * x[0] / 2.0).exp())).unwrap();
    let g = f.to_fourier();
    let mut worst = 0.0f64;
    for (i, z) in g.values().iter().enumerate() {
        let xi = g.point(i)[0];
        let exact = (2.0 * PI).sqrt() * (-xi * xi / 2.0).exp();
        worst = worst.max((z - c(exact)).norm());
    }
    assert!(worst < 1e-8, "max error {worst}");
}

#[test]
fn parseval_and_round_trip_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (dim, n) in [(1, 64), (2, 16), (3, 8)] {
        let f = random_field(&mut rng, dim, n, 2.5);
        let g = f.to_fourier();
        assert!((f.l2_norm() - g.l2_norm()).abs() < 1e-12 * f.l2_norm());
        assert!(rel_diff(&f, &g.to_physical()) < 1e-12);
    }
}

#[test]
fn non_power_of_two_is_rejected() {
    assert!(GridField::zeros(1, 12, 1.0, Space::Physical).is_err());
    assert!(GridField::new(1, 8, 1.0, Space::Physical, vec![c(0.0); 7]).is_err());
}

#[test]
fn full_band_restriction_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_field(&mut rng, 1, 32, 8.0 * PI).to_fourier();
    // the band is [-2, 2); cube(-2, -1) = [-4, 0) and cube(-2, 0) = [0, 4)
    let lo = f.restrict_to_cube(&DyadicCube::new(-2, vec![-1])).unwrap();
    let hi = f.restrict_to_cube(&DyadicCube::new(-2, vec![0])).unwrap();
    assert_eq!(lo.add(&hi).unwrap(), f);
}

#[test]
fn indicator_quadrant_restriction() {
    // Δξ = 1/16
    let f = GridField::from_fn_fourier(2, 64, 16.0 * PI, |xi| {
        c(if xi.iter().all(|&v| (0.0..1.0).contains(&v)) { 1.0 } else { 0.0 })
    })
    .unwrap();
    let g = f.restrict_to_cube(&DyadicCube::new(1, vec![0, 0])).unwrap();
    for (i, z) in g.values().iter().enumerate() {
        let xi = g.point(i);
        let inside = xi.iter().all(|&v| (0.0..0.5).contains(&v));
        assert_eq!(z.re, if inside { 1.0 } else { 0.0 });
    }
}

#[test]
fn far_cube_gives_zero_field() {
    let f = GridField::from_fn_fourier(1, 16, PI, |_| c(1.0)).unwrap();
    let g = f.restrict_to_cube(&DyadicCube::new(0, vec![1000])).unwrap();
    assert_eq!(g.sup_norm(), 0.0);
}

#[test]
fn children_partition_parent_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_field(&mut rng, 2, 32, 4.0 * PI).to_fourier();
    for j in [-1, 0, 1, 2] {
        for k in [vec![0, 0], vec![-1, 2], vec![1, -1]] {
            let parent = DyadicCube::new(j, k);
            let whole = f.restrict_to_cube(&parent).unwrap();
            let mut sum = GridField::zeros(2, 32, 4.0 * PI, Space::Fourier).unwrap();
            let mut mass = 0.0;
            for ch in parent.children() {
                let part = f.restrict_to_cube(&ch).unwrap();
                mass += part.l2_norm().powi(2);
                sum = sum.add(&part).unwrap();
            }
            assert_eq!(sum, whole);
            let pm = whole.l2_norm().powi(2);
            assert!((pm - mass).abs() <= 1e-12 * pm.max(1e-300));
        }
    }
}

#[test]
fn gfld_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_field(&mut rng, 2, 8, 1.5).to_fourier();
    let mut buf = Vec::new();
    f.write_gfld(&mut buf).unwrap();
    let header_end = buf.iter().position(|&b| b == b'\n').unwrap();
    let header = std::str::from_utf8(&buf[..header_end]).unwrap();
    assert!(header.contains("\"space\":\"fourier\""));
    assert_eq!(buf.len() - header_end - 1, 64 * 16);
    let g = GridField::read_gfld(&buf[..]).unwrap();
    assert_eq!(f, g);
}

#[test]
fn regrid_pads_exactly() {
    let f = GridField::from_fn_physical(1, 256, 4.0 * PI, |x| c((-x[0] * x[0]).exp())).unwrap();
    let (big, lost) = f.regrid(8.0 * PI, 1024).unwrap();
    assert_eq!(lost, 0.0);
    let (back, lost2) = big.regrid(4.0 * PI, 256).unwrap();
    assert!(lost2 < 1e-12);
    assert!(rel_diff(&f, &back) < 1e-12);
}

fn unit_indicator() -> GridField {
    // L = 16π gives Δξ = 1/16 and a band of [-16, 16)
    GridField::from_fn_fourier(1, 512, 16.0 * PI, |xi| c(if (0.0..1.0).contains(&xi[0]) { 1.0 } else { 0.0 }))
        .unwrap()
}

#[test]
fn default_window_meets_tolerance() {
    let f = unit_indicator();
    let spec = MorreySpec::hat(1.5, 2.0, 4.0).unwrap();
    let (w, tail) = default_window(&f, &spec, 1e-10).unwrap();
    assert!(tail <= 1e-10);
    let exact = hat_morrey_norm(&f, &spec).unwrap().norm;
    let windowed = hat_morrey_norm(&f, &spec.with_window(w)).unwrap();
    assert!((exact - windowed.norm) <= tail + 1e-15);
    assert!((windowed.tail_bound - tail).abs() < 1e-12);
    // a window twice as wide changes the value by less than the bound
    let half = (w.j_max - w.j_min + 1) / 2 + 1;
    let wide = morrey_core::grid::FrequencyWindow::new(w.j_min - half, w.j_max + half, f.nyquist());
    let wider = hat_morrey_norm(&f, &spec.with_window(wide)).unwrap().norm;
    assert!(wider - windowed.norm <= tail + 1e-15);
}

#[test]
fn default_window_of_zero_is_degenerate() {
    let f = GridField::zeros(1, 64, 4.0 * PI, Space::Fourier).unwrap();
    let spec = MorreySpec::hat(1.5, 2.0, 4.0).unwrap();
    let (w, tail) = default_window(&f, &spec, 1e-6).unwrap();
    assert_eq!(w.j_min, w.j_max);
    assert_eq!(tail, 0.0);
}

#[test]
fn default_window_rejects_divergent_r() {
    let f = unit_indicator();
    let spec = MorreySpec { r: 3.0, ..MorreySpec::hat(1.5, 2.0, 4.0).unwrap() };
    assert!(default_window(&f, &spec, 1e-6).is_err());
}

#[test]
fn halving_tolerance_never_shrinks_window() {
    let f = unit_indicator();
    let spec = MorreySpec::hat(1.5, 2.0, 4.0).unwrap();
    let mut prev = default_window(&f, &spec, 1e-2).unwrap().0;
    let mut tol = 1e-2;
    for _ in 0..30 {
        tol /= 2.0;
        let w = default_window(&f, &spec, tol).unwrap().0;
        assert!(w.j_min <= prev.j_min && w.j_max >= prev.j_max);
        prev = w;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_is_identity(seed in any::<u64>(), dim in 1usize..=2, logn in 2u32..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_field(&mut rng, dim, 1 << logn, 1.0 + (seed % 7) as f64);
        prop_assert!(rel_diff(&f, &f.to_fourier().to_physical()) < 1e-12);
    }

    #[test]
    fn siblings_are_disjoint(j in -3i32..5, k in -20i64..20, x in -50.0f64..50.0) {
        let parent = DyadicCube::new(j, vec![k]);
        let hits = parent.children().iter().filter(|ch| ch.contains(&[x])).count();
        prop_assert_eq!(hits, usize::from(parent.contains(&[x])));
        prop_assert_eq!(parent.children()[0].parent(), parent);
    }
}
