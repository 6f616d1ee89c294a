use std::f64::consts::PI;

use morrey_core::evolution::{
    classify, duhamel_residual, energy, evolve, free_propagate, mass, scattering_norm, strichartz_ratio, SolverConfig,
    Status, Trajectory,
};
use morrey_core::grid::GridField;
use morrey_core::group::{apply, apply_shift, Deformation};
use morrey_core::spaces::size::{size_function, SizeFunctionConfig};
use morrey_core::spaces::MorreySpec;
use morrey_core::stationary::{ground_state, GridParams};
use morrey_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHA: f64 = 1.5;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn gaussian(n: usize, extent: f64, amp: f64) -> GridField {
    GridField::from_fn_physical(1, n, extent, |x| c(amp * (-x[0] * x[0] / 2.0).exp())).unwrap()
}

fn soliton(n: usize, extent: f64) -> GridField {
    ground_state(1, ALPHA, GridParams { n, extent }).unwrap().field
}

fn soliton_cfg(dt: f64) -> SolverConfig {
    SolverConfig { dt, t_end: 1.0, snapshot_stride: ((1e-2 / dt).round() as usize).max(1), ..Default::default() }
}

fn max_diff(a: &GridField, b: &GridField) -> f64 {
    a.to_physical().sub(&b.to_physical()).unwrap().sup_norm()
}

#[test]
fn free_gaussian_closed_form() {
    let f = gaussian(1024, 30.0, 1.0);
    let s = 0.3;
    let u = free_propagate(&f, s).to_physical();
    let z = Complex64::new(1.0, 2.0 * s);
    let mut worst = 0.0f64;
    for (k, v) in u.values().iter().enumerate() {
        let x = u.point(k)[0];
        let want = z.powf(-0.5) * (-(x * x) / (2.0 * z)).exp();
        worst = worst.max((v - want).norm());
    }
    assert!(worst <= 1e-8, "{worst}");
    assert!((u.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
}

#[test]
fn free_flow_is_additive() {
    let f = gaussian(512, 8.0 * PI, 1.0).modulate(&[0.5]);
    assert_eq!(free_propagate(&f, 0.0), f);
    let split = free_propagate(&free_propagate(&f, 0.2), 0.35);
    let once = free_propagate(&f, 0.55);
    assert!(max_diff(&split, &once) <= 1e-13);
    let fh = f.to_fourier();
    assert_eq!(free_propagate(&fh, 0.1).space(), fh.space());
}

#[test]
fn zero_solution_stays_zero() {
    let z = GridField::zeros(1, 256, 8.0 * PI, morrey_core::grid::Space::Physical).unwrap();
    let cfg = SolverConfig { t_end: 0.5, dt: 1e-2, snapshot_stride: 5, ..Default::default() };
    let traj = evolve(&z, &cfg).unwrap();
    assert!(traj.fields.iter().all(|f| f.sup_norm() == 0.0));
    assert!(traj.s_cumulative.iter().all(|&s| s == 0.0));
    assert_eq!(scattering_norm(&traj, 0.0, 0.5).unwrap(), 0.0);
    assert_eq!(duhamel_residual(&traj, 0.0, 0.5).unwrap(), 0.0);
}

#[test]
fn soliton_orbit() {
    let q = soliton(1024, 8.0 * PI);
    let cfg = soliton_cfg(1e-4);
    let traj = evolve(&q, &cfg).unwrap();
    assert_eq!(traj.times.last().copied(), Some(1.0));
    let mut worst = 0.0f64;
    for (t, u) in traj.times.iter().zip(&traj.fields) {
        worst = worst.max(max_diff(u, &q.scaled(Complex64::from_polar(1.0, *t))));
    }
    assert!(worst <= 1e-4, "orbit error {worst}");
    let m0 = traj.mass[0];
    let drift = traj.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-10 * m0, "mass drift {drift}");
    assert_eq!(traj.status, Status::SolitonLike);

    let spec = MorreySpec::hat(ALPHA, 2.0, 3.3).unwrap();
    let scfg = SizeFunctionConfig::default();
    let l0 = size_function(&q, &spec, &scfg).unwrap().value;
    for u in traj.fields.iter().step_by(10) {
        let l = size_function(u, &spec, &scfg).unwrap().value;
        assert!((l / l0 - 1.0).abs() <= 1e-3, "{l} vs {l0}");
    }

    // same run, through the Duhamel formula
    let res = duhamel_residual(&traj, 0.0, 1.0).unwrap();
    assert!(res <= 1e-3, "{res}");
}

#[test]
fn duhamel_residual_converges_at_second_order() {
    let q = soliton(512, 8.0 * PI);
    let run = |dt: f64| {
        let cfg = SolverConfig { dt, t_end: 0.5, snapshot_stride: 10, ..Default::default() };
        duhamel_residual(&evolve(&q, &cfg).unwrap(), 0.0, 0.5).unwrap()
    };
    let (coarse, fine) = (run(1e-3), run(5e-4));
    assert!(coarse / fine >= 3.0, "{coarse} / {fine}");
}

#[test]
fn duhamel_residual_of_linear_flow() {
    let f = gaussian(512, 16.0 * PI, 1.0).modulate(&[0.25]);
    let cfg = SolverConfig { dt: 1e-2, t_end: 1.0, linear: true, ..Default::default() };
    let traj = evolve(&f, &cfg).unwrap();
    let res = duhamel_residual(&traj, 0.0, 1.0).unwrap();
    assert!(res <= 1e-10, "{res}");
    assert!(duhamel_residual(&traj, 0.0, 0.05).is_err());
    assert!(duhamel_residual(&traj, 0.005, 1.0).is_err());
}

#[test]
fn small_data_follows_free_flow() {
    let f = gaussian(1024, 32.0 * PI, 1e-3);
    let cfg = SolverConfig { dt: 1e-2, t_end: 5.0, snapshot_stride: 50, ..Default::default() };
    let traj = evolve(&f, &cfg).unwrap();
    for (t, u) in traj.times.iter().zip(&traj.fields) {
        let free = free_propagate(&f, *t);
        let err = u.sub(&free).unwrap().l2_norm();
        assert!(err <= 0.01 * f.l2_norm(), "t = {t}: {err}");
    }
}

#[test]
fn tiny_gaussian_is_scattered_like() {
    let f = gaussian(4096, 256.0, 0.01);
    let cfg = SolverConfig { dt: 1e-2, t_end: 10.0, snapshot_stride: 20, ..Default::default() };
    let traj = evolve(&f, &cfg).unwrap();
    assert_eq!(traj.status, Status::ScatteredLike);
    assert_eq!(classify(&traj, &cfg).unwrap(), Status::ScatteredLike);
}

#[test]
fn soliton_times_three_does_not_scatter() {
    let q = soliton(2048, 16.0 * PI);
    let u0 = q.scaled(c(3.0));
    assert!(energy(&u0, ALPHA) < 0.0);
    let cfg = SolverConfig { dt: 1e-4, t_end: 1.0, snapshot_stride: 100, ..Default::default() };
    let traj = evolve(&u0, &cfg).unwrap();
    assert_ne!(traj.status, Status::ScatteredLike);
}

#[test]
fn amplitude_cap_stops_early() {
    let q = soliton(512, 8.0 * PI);
    let cfg = SolverConfig { dt: 1e-3, t_end: 1.0, blowup_amp_cap: 1.0, ..Default::default() };
    let traj = evolve(&q, &cfg).unwrap();
    assert_eq!(traj.status, Status::BlowupLike);
    assert_eq!(traj.len(), 1);
    let wide = GridField::from_fn_physical(1, 256, 8.0, |_| c(1.0)).unwrap();
    assert!(evolve(&wide, &SolverConfig::default()).is_err());
    let bad = SolverConfig { splitting_order: 4, ..Default::default() };
    assert!(evolve(&q, &bad).is_err());
}

#[test]
fn energy_drift_is_second_order() {
    let f = gaussian(512, 8.0 * PI, 1.2).modulate(&[0.5]);
    let drift = |dt: f64| {
        let cfg = SolverConfig { dt, t_end: 1.0, snapshot_stride: 1, ..Default::default() };
        let traj = evolve(&f, &cfg).unwrap();
        let e0 = traj.energy[0];
        traj.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (drift(1e-2), drift(5e-3));
    assert!(coarse / fine >= 3.5, "{coarse} / {fine}");
    assert!((mass(&f) - f.l2_norm().powi(2)).abs() < 1e-15);
}

#[test]
fn galilean_covariance() {
    let f = gaussian(1024, 16.0 * PI, 1.0);
    let b = 16.0 * f.dxi();
    let cfg = SolverConfig { dt: 1e-3, t_end: 0.5, snapshot_stride: 50, ..Default::default() };
    let plain = evolve(&f, &cfg).unwrap();
    let boosted = evolve(&f.modulate(&[b]), &cfg).unwrap();
    for ((t, u), v) in plain.times.iter().zip(&plain.fields).zip(&boosted.fields) {
        // P(b) moves mass with velocity -2b
        let moved = apply_shift(u, &[-2.0 * b * t]).to_physical();
        let worst = moved
            .values()
            .iter()
            .zip(v.values())
            .map(|(x, y)| (x.norm() - y.norm()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "t = {t}: {worst}");
    }
}

#[test]
fn splitting_is_time_reversible() {
    let f = gaussian(512, 8.0 * PI, 1.1).modulate(&[0.75]);
    let cfg = SolverConfig { dt: 1e-3, t_end: 0.5, snapshot_stride: 100, ..Default::default() };
    let fwd = evolve(&f, &cfg).unwrap();
    let end = fwd.fields.last().unwrap();
    let back = evolve(&end.with_values(end.values().iter().map(|z| z.conj()).collect()), &cfg).unwrap();
    let end = back.fields.last().unwrap();
    let returned = end.with_values(end.values().iter().map(|z| z.conj()).collect());
    let err = max_diff(&returned, &f);
    assert!(err <= 1e-8, "{err}");
}

fn gaussian_integrand(t: f64, p: f64) -> f64 {
    (2.0 * PI / p).sqrt() * (1.0 + 4.0 * t * t).powf((2.0 - p) / 4.0)
}

#[test]
fn scattering_norm_of_free_gaussian() {
    let f = gaussian(4096, 800.0, 1.0);
    let cfg = SolverConfig { dt: 1e-2, t_end: 50.0, snapshot_stride: 100, linear: true, ..Default::default() };
    let traj = evolve(&f, &cfg).unwrap();
    let p = 3.0 * ALPHA;
    // composite Simpson on a fine grid
    let m = 2_000_000;
    let h = 50.0 / m as f64;
    let mut acc = gaussian_integrand(0.0, p) + gaussian_integrand(50.0, p);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * gaussian_integrand(k as f64 * h, p);
    }
    let oracle = (acc * h / 3.0).powf(1.0 / p);
    let s = scattering_norm(&traj, 0.0, 50.0).unwrap();
    assert!((s - oracle).abs() <= 1e-4 * oracle, "{s} vs {oracle}");
    assert!(traj.s_cumulative.windows(2).all(|w| w[1] >= w[0]));
    // additivity at the power level
    let split = scattering_norm(&traj, 0.0, 20.0).unwrap().powf(p) + scattering_norm(&traj, 20.0, 50.0).unwrap().powf(p);
    assert!((split - s.powf(p)).abs() <= 1e-12 * s.powf(p));
    assert!(scattering_norm(&traj, 0.0, 60.0).is_err());
    assert!(scattering_norm(&traj, 5.0, 1.0).is_err());
}

#[test]
fn strichartz_ratio_of_zero_is_flagged() {
    let z = GridField::zeros(1, 256, 8.0 * PI, morrey_core::grid::Space::Physical).unwrap();
    let r = strichartz_ratio(&z, &MorreySpec::hat(ALPHA, 2.0, 3.3).unwrap(), 1.0).unwrap();
    assert_eq!(r.ratio, 0.0);
    assert!(r.degenerate && r.flagged);
}

#[test]
fn strichartz_ratio_is_deformation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = gaussian(4096, 64.0 * PI, 1.0);
    let spec = MorreySpec::hat(ALPHA, 2.0, 3.3).unwrap();
    let base = strichartz_ratio(&f, &spec, 8.0).unwrap();
    assert!(!base.wrapped && base.ratio.is_finite() && base.ratio > 0.0);
    for _ in 0..6 {
        let g = Deformation {
            theta: rng.gen_range(-PI..PI),
            m: rng.gen_range(-1..=1),
            b: vec![rng.gen_range(-0.5..0.5)],
            s: 0.0,
            a: vec![rng.gen_range(-4.0..4.0)],
        };
        let r = strichartz_ratio(&apply(&g, &f, ALPHA).unwrap(), &spec, 8.0).unwrap();
        assert!((r.ratio / base.ratio - 1.0).abs() <= 0.02, "{} vs {} under {g:?}", r.ratio, base.ratio);
    }
}

#[test]
fn strichartz_aggregate_is_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = MorreySpec::hat(ALPHA, 2.0, 3.3).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        // random coefficients on |ξ| ≤ 2, smooth envelope
        let coeffs: Vec<Complex64> = (0..9).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let f = GridField::from_fn_fourier(1, 256, 16.0 * PI, |xi| {
            let x = xi[0];
            if x.abs() >= 2.0 {
                return c(0.0);
            }
            let k = ((x + 2.0) * 2.0).floor() as usize;
            coeffs[k.min(8)] * (1.0 - (x / 2.0).powi(2)).powi(2)
        })
        .unwrap();
        let r = strichartz_ratio(&f, &spec, 1.0).unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        worst = worst.max(r.ratio);
    }
    assert!(worst.is_finite() && worst > 0.0);
}

#[test]
fn archive_round_trip() {
    let q = soliton(256, 8.0 * PI);
    let cfg = SolverConfig { dt: 1e-2, t_end: 0.2, snapshot_stride: 5, ..Default::default() };
    let traj = evolve(&q, &cfg).unwrap();
    let dir = std::env::temp_dir().join(format!("traj-{}", std::process::id()));
    traj.save(&dir).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["S_cumulative"].is_array());
    assert_eq!(manifest["status"], serde_json::json!(serde_json::to_value(traj.status).unwrap()));
    let back = Trajectory::load(&dir).unwrap();
    assert_eq!(back.times, traj.times);
    assert_eq!(back.fields, traj.fields);
    assert_eq!(back.status, traj.status);
    assert_eq!(back.cfg, traj.cfg);
    std::fs::remove_dir_all(&dir).unwrap();
}
