use std::f64::consts::PI;

use morrey_core::grid::{DyadicCube, FrequencyWindow, GridField, Space};
use morrey_core::spaces::{
    almost_periodicity_residual, compactness_modulus, conjugate, duality_pairing_check, dyadic_average_projection,
    hat_lebesgue_norm, hat_morrey_norm, hat_norm, morrey_norm, size_function, Block, MorreySpec, SizeFunctionConfig,
};
use morrey_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn spec_15() -> MorreySpec {
    // d = 1, α = 1.5: p = dα = 1.5, p' = 3, r = 4
    MorreySpec::hat(1.5, 2.0, 4.0).unwrap()
}

/// Brute-force sum over every cube of every scale in `[j_lo, j_hi]`, visiting
/// samples directly (no pyramid).
fn brute_force_hat(f: &GridField, p_out: f64, q_in: f64, r: f64, j_lo: i32, j_hi: i32) -> f64 {
    let g = f.to_fourier();
    let dxi = g.dxi();
    let mut total = 0.0;
    for j in j_lo..=j_hi {
        let side = (2f64).powi(-j);
        let mut masses = std::collections::BTreeMap::<i64, f64>::new();
        for (i, z) in g.values().iter().enumerate() {
            let xi = g.point(i)[0];
            let k = (xi / side).floor() as i64;
            *masses.entry(k).or_default() += z.norm().powf(q_in) * dxi;
        }
        for m in masses.values() {
            total += (side.powf(1.0 / p_out - 1.0 / q_in) * m.powf(1.0 / q_in)).powf(r);
        }
    }
    total
}

#[test]
fn zero_norms() {
    let f = GridField::zeros(1, 64, 4.0 * PI, Space::Physical).unwrap();
    assert_eq!(hat_morrey_norm(&f, &spec_15()).unwrap().norm, 0.0);
    let g = GridField::zeros(1, 64, 16.0, Space::Physical).unwrap();
    assert_eq!(morrey_norm(&g, &MorreySpec::morrey(3.0, 2.0, 5.0).unwrap()).unwrap().norm, 0.0);
    assert_eq!(hat_lebesgue_norm(&f, 1.5).unwrap(), 0.0);
}

#[test]
fn indicator_spectrum_closed_form() {
    let f = GridField::from_fn_fourier(1, 1024, 32.0 * PI, |xi| c(if (0.0..1.0).contains(&xi[0]) { 1.0 } else { 0.0 }))
        .unwrap();
    let rep = hat_morrey_norm(&f, &spec_15()).unwrap();
    let a: f64 = 2.0 / 3.0;
    let b: f64 = 1.0 / 3.0;
    let closed = ((2f64).powf(-a) / (1.0 - (2f64).powf(-a)) + 1.0 / (1.0 - (2f64).powf(-b))).powf(0.25);
    assert!((rep.norm - closed).abs() < 1e-10, "{} vs {closed}", rep.norm);
    assert_eq!(rep.tail_bound, 0.0);

    // independent scale-by-scale summation over j ∈ [-40, 40]
    let mut direct = 0.0;
    for j in -40..=40i32 {
        let side = (2f64).powi(-j);
        direct += if j <= 0 { side.powf(4.0 * (1.0 / 3.0 - 0.5)) } else { (2f64).powi(j) * side.powf(4.0 / 3.0) };
    }
    let windowed = hat_morrey_norm(&f, &spec_15().with_window(FrequencyWindow::new(-40, 40, f.nyquist()))).unwrap();
    assert!((windowed.norm - direct.powf(0.25)).abs() < 1e-10);
    assert!((windowed.norm - closed).abs() <= windowed.tail_bound + 1e-12);
    assert!(windowed.tail_bound < 1e-3);
}

#[test]
fn physical_indicator_closed_form() {
    // Δx = 1/16
    let f = GridField::from_fn_physical(1, 512, 16.0, |x| c(if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 })).unwrap();
    let (p, q, r) = (3.0, 2.0, 5.0);
    let rep = morrey_norm(&f, &MorreySpec::morrey(p, q, r).unwrap()).unwrap();
    let rho_c = (2f64).powf(-r * (1.0 / q - 1.0 / p));
    let rho_f = (2f64).powf(1.0 - r / p);
    let closed = (1.0 / (1.0 - rho_c) + rho_f / (1.0 - rho_f)).powf(1.0 / r);
    assert!((rep.norm - closed).abs() < 1e-10, "{} vs {closed}", rep.norm);
}

#[test]
fn pyramid_agrees_with_brute_force_on_random_spectra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let v = (0..256).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let f = GridField::new(1, 256, 8.0 * PI, Space::Fourier, v).unwrap();
        // cell scale 3, half box scale -3
        let w = FrequencyWindow::new(-3, 3, f.nyquist());
        let ours = hat_morrey_norm(&f, &spec_15().with_window(w)).unwrap().norm;
        let brute = brute_force_hat(&f, 3.0, 2.0, 4.0, -3, 3).powf(0.25);
        assert!((ours - brute).abs() < 1e-12 * brute, "{ours} vs {brute}");
    }
}

#[test]
fn misaligned_grid_is_an_error() {
    let f = GridField::from_fn_physical(1, 64, 10.0, |x| c((-x[0] * x[0]).exp())).unwrap();
    assert!(hat_morrey_norm(&f, &spec_15()).is_err());
    assert!(morrey_norm(&f, &MorreySpec::morrey(3.0, 2.0, 5.0).unwrap()).is_err());
}

#[test]
fn mode_mismatch_is_an_error() {
    let f = GridField::from_fn_physical(1, 64, 4.0 * PI, |x| c((-x[0] * x[0]).exp())).unwrap();
    assert!(morrey_norm(&f, &spec_15()).is_err());
    assert!(hat_morrey_norm(&f, &MorreySpec::morrey(3.0, 2.0, 5.0).unwrap()).is_err());
    assert!(MorreySpec::hat(1.5, 2.0, 2.5).is_err());
    assert!(MorreySpec::morrey(2.0, 3.0, 5.0).is_err());
}

#[test]
fn report_serializes_infinite_exponents() {
    let spec = MorreySpec::hat(1.5, 2.0, f64::INFINITY).unwrap();
    let f = GridField::from_fn_physical(1, 64, 4.0 * PI, |x| c((-x[0] * x[0]).exp())).unwrap();
    let rep = hat_morrey_norm(&f, &spec).unwrap();
    let js = serde_json::to_string(&rep).unwrap();
    assert!(js.contains("\"r\":\"inf\""));
    let back: morrey_core::spaces::NormReport = serde_json::from_str(&js).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn hat_lebesgue_gaussian() {
    let f = GridField::from_fn_physical(1, 512, 20.0, |x| c((-x[0] * x[0] / 2.0).exp())).unwrap();
    // p' = 3 ⇔ p = 3/2
    let exact = ((2.0 * PI).powf(1.5) * (2.0 * PI / 3.0).sqrt()).powf(1.0 / 3.0);
    assert!((hat_lebesgue_norm(&f, 1.5).unwrap() - exact).abs() < 1e-10);
    // p = 2 gives the L² norm of F f, i.e. (2π)^{d/2} ‖f‖₂ in this convention
    let l2 = hat_lebesgue_norm(&f, 2.0).unwrap();
    assert!((l2 - (2.0 * PI).sqrt() * f.l2_norm()).abs() < 1e-10);
}

fn gaussian_packet(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> GridField {
    let x0 = rng.gen_range(-2.0..2.0);
    let w = rng.gen_range(0.7..1.5);
    let k = rng.gen_range(-1.5..1.5);
    let amp = rng.gen_range(0.5..2.0);
    GridField::from_fn_physical(1, n, extent, |x| {
        let y = x[0] - x0;
        Complex64::from_polar(amp * (-y * y / (2.0 * w * w)).exp(), k * x[0])
    })
    .unwrap()
}

#[test]
fn embedding_ordering_and_homogeneity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s2 = spec_15();
    let sq = MorreySpec::hat(1.5, 2.125, 4.0).unwrap();
    for _ in 0..10 {
        let f = gaussian_packet(&mut rng, 256, 8.0 * PI);
        let a = hat_norm(&f, &sq).unwrap();
        let b = hat_norm(&f, &s2).unwrap();
        assert!(a <= b * (1.0 + 1e-12));
        let scaled = hat_norm(&f.scaled(c(2.5)), &s2).unwrap();
        assert!((scaled - 2.5 * b).abs() < 1e-12 * scaled);
    }
}

#[test]
fn size_function_basics() {
    let cfg = SizeFunctionConfig::default();
    let z = GridField::zeros(1, 128, 4.0 * PI, Space::Physical).unwrap();
    assert_eq!(size_function(&z, &spec_15(), &cfg).unwrap().value, 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let f = gaussian_packet(&mut rng, 256, 8.0 * PI);
    let base = size_function(&f, &spec_15(), &cfg).unwrap();
    assert!(base.value <= hat_norm(&f, &spec_15()).unwrap() * (1.0 + 1e-12));
    assert!(base.value > 0.0);

    let b = 3.7;
    let boosted = f.modulate(&[b]);
    let wide = SizeFunctionConfig { xi_search_radius: 8.0, coarse_grid_points: 129, ..cfg.clone() };
    let moved = size_function(&boosted, &spec_15(), &wide).unwrap();
    assert!((moved.value - base.value).abs() <= 1e-6 * base.value, "{} vs {}", moved.value, base.value);

    let scaled = size_function(&f.scaled(c(2.5)), &spec_15(), &cfg).unwrap();
    assert!((scaled.value - 2.5 * base.value).abs() < 1e-10 * scaled.value);
}

#[test]
fn size_function_straddling_indicator_matches_exhaustive_search() {
    // Δξ = 2^{-10}, band [-2, 2)
    let f = GridField::from_fn_fourier(1, 4096, 1024.0 * PI, |xi| c(if (0.5..1.5).contains(&xi[0]) { 1.0 } else { 0.0 }))
        .unwrap();
    let spec = spec_15();
    let at_zero = hat_norm(&f, &spec).unwrap();

    // exhaustive oracle: exact lattice shifts of the stored spectrum
    let mut best = f64::INFINITY;
    for m in -1536i64..=1536 {
        let shifted = GridField::from_fn_fourier(1, 4096, 1024.0 * PI, |xi| {
            let t = xi[0] + m as f64 / 1024.0;
            c(if (0.5..1.5).contains(&t) { 1.0 } else { 0.0 })
        })
        .unwrap();
        best = best.min(hat_norm(&shifted, &spec).unwrap());
    }

    let cfg = SizeFunctionConfig { xi_search_radius: 1.5, coarse_grid_points: 65, refine_iters: 20, refine_tol: 1e-9 };
    let res = size_function(&f, &spec, &cfg).unwrap();
    assert!(res.lattice_only);
    assert!((res.value - best).abs() <= 1e-12 * best, "{} vs {best}", res.value);
    assert!(res.value < at_zero);
}

#[test]
fn pairing_check_trivial_and_saturated() {
    let spec = MorreySpec::morrey(3.0, 2.0, 5.0).unwrap();
    let f = GridField::from_fn_physical(1, 256, 8.0, |x| c((-x[0] * x[0]).exp())).unwrap();
    let empty = duality_pairing_check(&f, &[], &spec).unwrap();
    assert_eq!(empty.lhs, 0.0);
    assert!(empty.pass);

    let cube = DyadicCube::new(0, vec![0]);
    let a = GridField::from_fn_physical(1, 256, 8.0, |x| c(if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 })).unwrap();
    let f = a.clone();
    let chk = duality_pairing_check(&f, &[Block { lambda: c(1.0), cube: cube.clone(), a: a.clone() }], &spec).unwrap();
    // ∫|A|² = 1 and |τ|^{1/q'-1/p'} = 1; Hölder is an equality on τ
    assert!((chk.lhs - 1.0).abs() < 1e-12);
    assert!(chk.pass);
    assert!(chk.lhs / chk.rhs > 0.5);

    let dup = vec![
        Block { lambda: c(1.0), cube: cube.clone(), a: a.clone() },
        Block { lambda: c(1.0), cube, a: a.clone() },
    ];
    assert!(duality_pairing_check(&f, &dup, &spec).is_err());
    let wrong = Block { lambda: c(1.0), cube: DyadicCube::new(0, vec![3]), a };
    assert!(duality_pairing_check(&f, &[wrong], &spec).is_err());
}

#[test]
fn pairing_check_random_blocks() {
    let spec = MorreySpec::morrey(3.0, 2.0, 5.0).unwrap();
    let (n, l) = (256usize, 8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let fv = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let f = GridField::new(1, n, l, Space::Physical, fv).unwrap();
        let mut blocks = Vec::new();
        let mut used = std::collections::BTreeSet::new();
        for _ in 0..rng.gen_range(1..6) {
            let j = rng.gen_range(-2..=4);
            let side = (2f64).powi(-j);
            let kmax = (l / side) as i64;
            let k = rng.gen_range(-kmax..kmax);
            let cube = DyadicCube::new(j, vec![k]);
            if !used.insert(cube.clone()) {
                continue;
            }
            let vals: Vec<Complex64> = (0..n)
                .map(|i| {
                    let x = -l + i as f64 * 2.0 * l / n as f64;
                    if cube.contains(&[x]) {
                        Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
                    } else {
                        c(0.0)
                    }
                })
                .collect();
            let a = GridField::new(1, n, l, Space::Physical, vals).unwrap();
            blocks.push(Block { lambda: Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)), cube, a });
        }
        let chk = duality_pairing_check(&f, &blocks, &spec).unwrap();
        assert!(chk.pass, "{chk:?}");
    }
}

#[test]
fn projection_properties() {
    let f = GridField::from_fn_physical(1, 512, 16.0, |x| c((-x[0] * x[0]).exp())).unwrap();
    let p = dyadic_average_projection(&f, -1, 2).unwrap();
    let pp = dyadic_average_projection(&p, -1, 2).unwrap();
    assert!(p.sub(&pp).unwrap().sup_norm() < 1e-15);

    let spec = MorreySpec::morrey(3.0, 2.0, 5.0).unwrap();
    let mut inside = f.clone();
    for i in 0..inside.len() {
        let x = inside.point(i)[0];
        if !(-2.0..2.0).contains(&x) {
            inside.values_mut()[i] = c(0.0);
        }
    }
    let mut prev = f64::INFINITY;
    for j1 in 2..=4 {
        let err = morrey_norm(&inside.sub(&dyadic_average_projection(&f, -1, j1).unwrap()).unwrap(), &spec).unwrap().norm;
        assert!(err < prev, "j1 = {j1}: {err} ≥ {prev}");
        prev = err;
    }
    // j1 = 5 is finer than nothing here: Δx = 1/16 allows up to j1 = 4
    assert!(dyadic_average_projection(&f, -1, 5).is_err());
    assert!(dyadic_average_projection(&f, 2, 1).is_err());
}

#[test]
fn projection_fixes_piecewise_constants() {
    let f = GridField::from_fn_physical(1, 256, 8.0, |x| {
        let k = (x[0] * 2.0).floor();
        c(if (-1.0..1.0).contains(&x[0]) { k + 3.0 } else { 0.0 })
    })
    .unwrap();
    let p = dyadic_average_projection(&f, 0, 1).unwrap();
    assert!(p.sub(&f).unwrap().sup_norm() < 1e-15);
}

#[test]
fn compactness_modulus_behaviour() {
    let spec = MorreySpec::morrey(3.0, 2.0, 5.0).unwrap();
    let z = GridField::zeros(1, 512, 16.0, Space::Physical).unwrap();
    assert_eq!(compactness_modulus(&z, &spec, 2.0).unwrap(), (0.0, 0.0));
    let f = GridField::from_fn_physical(1, 512, 16.0, |x| c((-x[0] * x[0] / 2.0).exp())).unwrap();
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for cc in [2.0, 4.0, 8.0] {
        let (t, s) = compactness_modulus(&f, &spec, cc).unwrap();
        assert!(t <= prev.0 && s < prev.1, "C = {cc}: ({t}, {s})");
        prev = (t, s);
    }
    assert!(prev.0 < 1e-10);
}

#[test]
fn almost_periodicity_residual_trivia() {
    let spec = spec_15();
    let z = GridField::zeros(1, 256, 8.0 * PI, Space::Physical).unwrap();
    assert_eq!(almost_periodicity_residual(&z, 1.0, &[0.0], &[0.0], 8.0, &spec).unwrap(), 0.0);
    // spectrum inside |ξ| < 8: only the modulation term survives
    let f = GridField::from_fn_fourier(1, 256, 8.0 * PI, |xi| c((1.0 - xi[0] * xi[0] / 4.0).max(0.0))).unwrap();
    let far = f.fourier_multiply(|xi| c(if xi[0].abs() >= 8.0 { 1.0 } else { 0.0 }));
    assert_eq!(far.sup_norm(), 0.0);
    let res = almost_periodicity_residual(&f, 1.0, &[0.0], &[0.0], 8.0, &spec).unwrap();
    assert!(res > 0.0);
}

#[test]
fn conjugates() {
    assert_eq!(conjugate(2.0), 2.0);
    assert_eq!(conjugate(1.0), f64::INFINITY);
    assert_eq!(conjugate(f64::INFINITY), 1.0);
    assert!((conjugate(1.5) - 3.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decoupling_for_disjoint_spectra(seed in any::<u64>(), cut in -20i64..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = spec_15();
        let v: Vec<Complex64> = (0..128).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let full = GridField::new(1, 128, 4.0 * PI, Space::Fourier, v).unwrap();
        let split = cut as f64 / 4.0;
        let f = full.fourier_multiply(|xi| c(if xi[0] < split { 1.0 } else { 0.0 }));
        let g = full.sub(&f).unwrap();
        let nf = hat_norm(&f, &spec).unwrap();
        let ng = hat_norm(&g, &spec).unwrap();
        let nfg = hat_norm(&full, &spec).unwrap();
        prop_assert!(nfg.powf(4.0) >= nf.powf(4.0) + ng.powf(4.0) - 1e-9);
    }

    #[test]
    fn norms_are_monotone_in_modulus(seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<Complex64> = (0..64).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let f = GridField::new(1, 64, 4.0, Space::Physical, v).unwrap();
        let spec = MorreySpec::morrey(3.0, 2.0, 5.0).unwrap();
        let small = f.with_values(f.values().iter().enumerate().map(|(i, z)| if i % 3 == 0 { z * t } else { *z }).collect());
        prop_assert!(morrey_norm(&small, &spec).unwrap().norm <= morrey_norm(&f, &spec).unwrap().norm * (1.0 + 1e-12));
    }
}
