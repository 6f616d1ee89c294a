//! One function per experiment kind. Each returns checks with their
//! tolerances plus plot-ready tables.

use std::f64::consts::PI;

use morrey_core::evolution::{classify, duhamel_residual, energy, evolve, strichartz_ratio, SolverConfig, Status};
use morrey_core::group::orthogonality_divergence;
use morrey_core::profile::synthetic::{planted_profile, two_profile_oracle};
use morrey_core::profile::{greedy_spec, profile_decompose, track_almost_periodicity, PeriodicityConfig, PeriodicityRow, ProfileConfig};
use morrey_core::spaces::{conjugate, default_window, hat_morrey_norm, hat_norm, size_function, MorreySpec, SizeFunctionConfig};
use morrey_core::stationary::{closed_form_1d, critical_thresholds, ground_state, pohozaev_check, GridParams, GroundStateResult, Method};
use morrey_core::{Complex64, GridField, Space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Exponents, Grid, Kind, Solver};
use crate::report::{Check, Outcome, Table};
use crate::CliError;

pub fn state_spec(e: &Exponents) -> Result<MorreySpec, CliError> {
    Ok(MorreySpec::hat(e.d as f64 * e.alpha, 2.0, e.r)?)
}

fn params(g: &Grid) -> GridParams {
    GridParams { n: g.n, extent: g.extent() }
}

fn solver(alpha: f64, s: &Solver) -> SolverConfig {
    SolverConfig { alpha, dt: s.dt, t_end: s.t_end, snapshot_stride: s.snapshot_stride, ..Default::default() }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<(Exponents, Outcome), CliError> {
    let e = cfg.validate()?;
    let out = match cfg.kind {
        Kind::NormSuite => norm_suite(cfg, &e)?,
        Kind::SolitonOrbit => soliton_orbit(cfg, &e)?,
        Kind::ThresholdScan => threshold_outcome(cfg, &e)?,
        Kind::CriticalNumbers => critical_numbers(cfg)?,
        Kind::ProfileSynthetic => profile_synthetic(cfg, &e)?,
        Kind::AlmostPeriodicity => almost_periodicity(cfg, &e)?,
        Kind::StrichartzSweep => strichartz_sweep(cfg, &e)?,
    };
    Ok((e, out))
}

/// `‖1_{[0,1)^d}‖_{M̂^p_{2,r}}` summed in closed form: one cube per coarse
/// scale, `2^{jd}` equal cubes per fine scale.
pub fn indicator_closed_form(d: usize, p: f64, r: f64) -> f64 {
    let pc = conjugate(p);
    let a = d as f64 * r * (0.5 - 1.0 / pc);
    let b = d as f64 * (r / pc - 1.0);
    let (qa, qb) = ((2f64).powf(-a), (2f64).powf(-b));
    (1.0 / (1.0 - qa) + qb / (1.0 - qb)).powf(1.0 / r)
}

fn norm_suite(cfg: &ExperimentConfig, e: &Exponents) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let d = e.d;
    let p = d as f64 * e.alpha;
    let g = &cfg.norms.indicator_grid;
    let spec = MorreySpec::hat(p, 2.0, cfg.norms.indicator_r)?;
    let f = GridField::from_fn_fourier(d, g.n, g.extent(), |xi| {
        Complex64::new(if xi.iter().all(|&x| (0.0..1.0).contains(&x)) { 1.0 } else { 0.0 }, 0.0)
    })?;
    let closed = indicator_closed_form(d, p, cfg.norms.indicator_r);
    let full = hat_morrey_norm(&f, &spec)?;
    let (w, _) = default_window(&f, &spec, 1e-12)?;
    let win = hat_morrey_norm(&f, &spec.with_window(w))?;
    out.checks.push(Check::info("indicator_closed_form", closed));
    out.checks.push(Check::at_most("indicator_full_sum_error", (full.norm - closed).abs(), 1e-10));
    out.checks.push(Check::at_most("indicator_window_error", (win.norm - closed).abs(), 1e-10));
    out.checks.push(Check::at_most("indicator_window_tail_bound", win.tail_bound, 1e-12));
    out.checks.push(Check::info("indicator_window_j_min", w.j_min as f64));
    out.checks.push(Check::info("indicator_window_j_max", w.j_max as f64));

    let spec = MorreySpec::hat(p, 2.0, e.r)?;
    let pg = cfg.norms.pair_grid.clone();
    let rows = (0..cfg.norms.pairs)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>, CliError> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64));
            let len = pg.n.pow(d as u32);
            let vals: Vec<Complex64> =
                (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let full = GridField::new(d, pg.n, pg.extent(), Space::Fourier, vals)?;
            // even pairs: random per-sample owners; odd pairs: a half-space cut
            let owner: Vec<u8> = if i % 2 == 0 {
                (0..len).map(|_| rng.gen_range(0..3u8)).collect()
            } else {
                let cut = rng.gen_range(-0.5..0.5) * full.nyquist();
                (0..len).map(|k| if full.point(k)[0] < cut { 0 } else { 1 }).collect()
            };
            let pick = |who: u8| {
                full.with_values(
                    full.values().iter().zip(&owner).map(|(z, &o)| if o == who { *z } else { Complex64::new(0.0, 0.0) }).collect(),
                )
            };
            let (a, b) = (pick(0), pick(1));
            let na = hat_norm(&a, &spec)?;
            let nb = hat_norm(&b, &spec)?;
            let nab = hat_norm(&a.add(&b)?, &spec)?;
            let gap = na.powf(e.r) + nb.powf(e.r) - nab.powf(e.r);
            Ok(vec![i as f64, na, nb, nab, gap])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["pair", "norm_f", "norm_g", "norm_sum", "superadditivity_gap"]);
    let mut worst = f64::NEG_INFINITY;
    for r in rows {
        worst = worst.max(r[4]);
        table.push(r);
    }
    out.checks.push(Check::at_most("decoupling_worst_gap", worst, 1e-9));
    out.tables.push(("decoupling".into(), table));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSummary {
    pub d: usize,
    pub alpha: f64,
    pub q0: f64,
    pub method: Method,
    pub residual_linf: f64,
    pub pohozaev_r1: f64,
    pub pohozaev_r2: f64,
    pub mass: f64,
    /// `max_{|x| ≤ 20} |Q - Q_closed|` in one dimension.
    pub closed_form_error: Option<f64>,
}

pub fn ground_state_summary(d: usize, alpha: f64, grid: GridParams) -> Result<(GroundStateResult, GroundStateSummary), CliError> {
    let q = ground_state(d, alpha, grid)?;
    let pz = pohozaev_check(&q, alpha);
    let closed_form_error = (d == 1).then(|| {
        let mut worst = 0.0f64;
        for (k, z) in q.field.values().iter().enumerate() {
            let x = q.field.point(k)[0];
            if x.abs() <= 20.0 {
                worst = worst.max((*z - Complex64::new(closed_form_1d(alpha, x), 0.0)).norm());
            }
        }
        worst
    });
    let s = GroundStateSummary {
        d,
        alpha,
        q0: q.q0,
        method: q.method,
        residual_linf: q.residual_linf,
        pohozaev_r1: pz.r1,
        pohozaev_r2: pz.r2,
        mass: pz.mass,
        closed_form_error,
    };
    Ok((q, s))
}

fn soliton_orbit(cfg: &ExperimentConfig, e: &Exponents) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let (q, gs) = ground_state_summary(e.d, e.alpha, params(&cfg.grid))?;
    if let Some(err) = gs.closed_form_error {
        out.checks.push(Check::at_most("ground_state_closed_form_error", err, 1e-8));
    }
    out.checks.push(Check::info("ground_state_residual_linf", gs.residual_linf));
    out.checks.push(Check::info("pohozaev_r1_relative", gs.pohozaev_r1 / gs.mass));
    out.checks.push(Check::info("pohozaev_r2_relative", gs.pohozaev_r2 / gs.mass));

    let scfg = solver(e.alpha, &cfg.solver);
    let traj = evolve(&q.field, &scfg)?;
    let spec = state_spec(e)?;
    let sizes = traj
        .fields
        .par_iter()
        .map(|u| size_function(u, &spec, &SizeFunctionConfig::default()).map(|s| s.value))
        .collect::<Result<Vec<_>, _>>()?;
    let m0 = traj.mass[0];
    let mut table = Table::new(&["t", "orbit_error", "mass", "energy", "size_ratio"]);
    let (mut worst, mut drift, mut lo, mut hi) = (0.0f64, 0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for (i, (t, u)) in traj.times.iter().zip(&traj.fields).enumerate() {
        let orbit = u.to_physical().sub(&q.field.scaled(Complex64::from_polar(1.0, *t)))?.sup_norm();
        let ratio = sizes[i] / sizes[0];
        worst = worst.max(orbit);
        drift = drift.max((traj.mass[i] - m0).abs() / m0);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        table.push(vec![*t, orbit, traj.mass[i], traj.energy[i], ratio]);
    }
    out.checks.push(Check::at_most("orbit_error_linf", worst, 1e-4));
    out.checks.push(Check::at_most("mass_drift_relative", drift, 1e-10));
    out.checks.push(Check::at_least("size_ratio_min", lo, 0.999));
    out.checks.push(Check::at_most("size_ratio_max", hi, 1.001));
    out.labels.push(("status".into(), label(classify(&traj, &scfg)?)));
    out.tables.push(("orbit".into(), table));

    let dg = &cfg.duhamel;
    let (dq, _) = ground_state_summary(e.d, e.alpha, params(&dg.grid))?;
    let residuals = [dg.dt, dg.dt / 2.0]
        .par_iter()
        .map(|&dt| {
            let s = SolverConfig { alpha: e.alpha, dt, t_end: dg.t_end, snapshot_stride: dg.snapshot_stride, ..Default::default() };
            let traj = evolve(&dq.field, &s)?;
            duhamel_residual(&traj, 0.0, *traj.times.last().expect("snapshots"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.checks.push(Check::info("duhamel_residual_dt", residuals[0]));
    out.checks.push(Check::info("duhamel_residual_half_dt", residuals[1]));
    out.checks.push(Check::at_least("duhamel_halving_ratio", residuals[0] / residuals[1], 3.0));
    Ok(out)
}

fn label(s: Status) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub c: f64,
    pub status: Status,
    /// `ℓ_r(cQ)`.
    pub size: f64,
    pub energy: f64,
    pub scattering_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    /// Last scattered-like `c` before the first run that is not.
    pub c_minus: f64,
    pub c_plus: f64,
    /// `ℓ_r(Q)`.
    pub size_q: f64,
    pub rows: Vec<ScanRow>,
    /// `max_c |ℓ_r(cQ) - c ℓ_r(Q)| / (c ℓ_r(Q))`.
    pub homogeneity_defect: f64,
}

/// Evolves `cQ` for every `c` and brackets the flip from scattered-like
/// to not scattered-like.
pub fn threshold_scan(
    d: usize,
    alpha: f64,
    r: f64,
    c_grid: &[f64],
    grid: GridParams,
    s: &Solver,
) -> Result<ThresholdScan, CliError> {
    if c_grid.is_empty() || c_grid.iter().any(|&c| !(c > 0.0)) || c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("c grid must be positive and increasing".into()));
    }
    let q = ground_state(d, alpha, grid)?.field;
    let spec = MorreySpec::hat(d as f64 * alpha, 2.0, r)?;
    let size_q = size_function(&q, &spec, &SizeFunctionConfig::default())?.value;
    let scfg = SolverConfig { size_r: Some(r), ..solver(alpha, s) };
    let rows = c_grid
        .par_iter()
        .map(|&c| -> Result<ScanRow, CliError> {
            let u0 = q.scaled(Complex64::new(c, 0.0));
            let traj = evolve(&u0, &scfg)?;
            Ok(ScanRow {
                c,
                status: classify(&traj, &scfg)?,
                size: size_function(&u0, &spec, &SizeFunctionConfig::default())?.value,
                energy: energy(&u0, alpha),
                scattering_norm: traj.s_cumulative.last().copied().unwrap_or(0.0).powf(1.0 / ((d as f64 + 2.0) * alpha)),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let homogeneity_defect =
        rows.iter().map(|r| (r.size - r.c * size_q).abs() / (r.c * size_q)).fold(0.0, f64::max);
    let flip = rows.iter().position(|r| r.status != Status::ScatteredLike);
    match flip {
        Some(k) if k > 0 => Ok(ThresholdScan { c_minus: rows[k - 1].c, c_plus: rows[k].c, size_q, rows, homogeneity_defect }),
        _ => Err(CliError::Numerical(format!(
            "bracket not found: statuses {:?}; widen the c grid",
            rows.iter().map(|r| (r.c, r.status)).collect::<Vec<_>>()
        ))),
    }
}

fn threshold_outcome(cfg: &ExperimentConfig, e: &Exponents) -> Result<Outcome, CliError> {
    let sc = &cfg.scan;
    let scan = threshold_scan(e.d, e.alpha, e.r, &sc.c, params(&sc.grid), &sc.solver)?;
    let mut out = Outcome::default();
    let below = scan.rows.iter().find(|r| r.c == scan.c_minus).expect("bracket row");
    out.checks.push(Check::at_least("c_minus", scan.c_minus, 0.01));
    out.checks.push(Check::at_most("c_plus", scan.c_plus, 3.0));
    out.checks.push(Check::info("size_q", scan.size_q));
    out.checks.push(Check::flag("size_of_c_minus_below_size_q", below.size < scan.size_q));
    out.checks.push(Check::info("homogeneity_defect", scan.homogeneity_defect));
    let mut table = Table::new(&["c", "scattered_like", "size", "energy", "scattering_norm"]);
    for r in &scan.rows {
        let sc = if r.status == Status::ScatteredLike { 1.0 } else { 0.0 };
        table.push(vec![r.c, sc, r.size, r.energy, r.scattering_norm]);
        out.labels.push((format!("status_c={}", r.c), label(r.status)));
    }
    out.tables.push(("threshold_scan".into(), table));
    Ok(out)
}

fn critical_numbers(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let mut table = Table::new(&["d", "e1", "e2", "e2_adaptive", "ratio", "energy_w"]);
    for &d in &cfg.critical.dims {
        let ct = critical_thresholds(d)?;
        let ratio = ct.e1 / ct.e2;
        out.checks.push(Check::at_most(format!("d{d}_e2_quadrature_agreement"), (ct.e2 - ct.e2_check).abs() / ct.e2, 1e-6));
        out.checks.push(Check::at_most(
            format!("d{d}_ratio_error"),
            (ratio - (2.0 / d as f64).sqrt()).abs(),
            4.0 * f64::EPSILON,
        ));
        out.checks.push(Check::info(format!("d{d}_e1_over_e2"), ratio));
        table.push(vec![d as f64, ct.e1, ct.e2, ct.e2_check, ratio, ct.energy_w]);
    }
    out.tables.push(("critical_numbers".into(), table));
    Ok(out)
}

fn profile_synthetic(cfg: &ExperimentConfig, e: &Exponents) -> Result<Outcome, CliError> {
    if e.d != 1 {
        return Err(CliError::Config("profile-synthetic is defined for d = 1".into()));
    }
    let pc = &cfg.profile;
    let (n, extent) = (pc.grid.n, pc.grid.extent());
    let oracle = two_profile_oracle(n, extent, &pc.exponents, e.alpha)?;
    let spec = greedy_spec(1, e.alpha)?;
    let dcfg = ProfileConfig { size_table: false, ..Default::default() };
    let dec = profile_decompose(&oracle.seq, pc.eps, &spec, e.alpha, &dcfg)?;
    let mut out = Outcome::default();
    out.checks.push(Check::flag("two_profiles", dec.profiles.len() == 2));
    out.checks.push(Check::at_most("unmatched_pieces", dec.unmatched_pieces as f64, 0.0));
    out.checks.push(Check::at_most("decoupling_residual", dec.decoupling_residual, 1e-6));
    out.checks.push(Check::info("remainder_strichartz_max", dec.remainder_strichartz.max));
    if dec.profiles.len() != 2 {
        return Ok(out);
    }
    // the dilated family is planted profile 0
    let which: Vec<usize> =
        dec.profiles.iter().map(|p| if p.deformations.iter().any(|g| g.m != 0) { 0 } else { 1 }).collect();
    out.checks.push(Check::flag("families_distinct", which[0] != which[1]));
    let mut errors = vec![Vec::new(); 2];
    for (p, &j) in dec.profiles.iter().zip(&which) {
        let phi = planted_profile(j, p.profile.n_per_axis(), p.profile.extent())?;
        for est in &p.estimates {
            errors[j].push(est.sub(&phi)?.l2_norm() / phi.l2_norm());
        }
    }
    let cell = 2.0 * extent / n as f64;
    let mut mismatch = 0.0f64;
    let mut table = Table::new(&[
        "m", "error_profile_1", "error_profile_2", "scale_gap", "boost_gap", "time_gap", "shift_gap", "planted_shift_gap",
    ]);
    for (k, planted) in oracle.planted.iter().enumerate() {
        let got = dec.divergence_series[0][1][k];
        let want = orthogonality_divergence(&planted[which[0]], &planted[which[1]]);
        for (x, y) in [
            (got.scale_gap, want.scale_gap),
            (got.boost_gap, want.boost_gap),
            (got.time_gap, want.time_gap),
            (got.shift_gap, want.shift_gap),
        ] {
            mismatch = mismatch.max((x - y).abs());
        }
        table.push(vec![
            oracle.exponents[k] as f64,
            errors[0][k],
            errors[1][k],
            got.scale_gap,
            got.boost_gap,
            got.time_gap,
            got.shift_gap,
            want.shift_gap,
        ]);
    }
    for (j, errs) in errors.iter().enumerate() {
        let monotone = errs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        out.checks.push(Check::flag(format!("profile_{}_error_non_increasing", j + 1), monotone));
        out.checks.push(Check::at_most(format!("profile_{}_error_last", j + 1), *errs.last().unwrap_or(&f64::NAN), 0.05));
    }
    out.checks.push(Check::at_most("divergence_mismatch", mismatch, cell));
    out.tables.push(("profile_recovery".into(), table));
    Ok(out)
}

fn rows_table(rows: &[PeriodicityRow], norms: &[f64]) -> Table {
    let mut t = Table::new(&["t", "n_scale", "y", "z", "residual", "relative_residual"]);
    for (r, nx) in rows.iter().zip(norms) {
        t.push(vec![r.t, r.n_scale, r.y[0], r.z[0], r.residual, r.residual / nx]);
    }
    t
}

fn almost_periodicity(cfg: &ExperimentConfig, e: &Exponents) -> Result<Outcome, CliError> {
    if e.d != 1 {
        return Err(CliError::Config("almost-periodicity is defined for d = 1".into()));
    }
    let pc = &cfg.periodicity;
    let spec = state_spec(e)?;
    let acfg = PeriodicityConfig::default();
    let mut out = Outcome::default();

    let q = ground_state(1, e.alpha, params(&cfg.grid))?.field;
    let traj = evolve(&q, &solver(e.alpha, &cfg.solver))?;
    let rows = track_almost_periodicity(&traj, pc.delta, pc.eta, pc.c_eta, &spec, &acfg)?;
    let norms = traj.fields.iter().map(|u| hat_norm(u, &spec)).collect::<Result<Vec<_>, _>>()?;
    let (dx, dxi) = (2.0 * cfg.grid.extent() / cfg.grid.n as f64, PI / cfg.grid.extent());
    let r0 = &rows[0];
    let spread = |f: &dyn Fn(&PeriodicityRow) -> f64| rows.iter().map(|r| (f(r) - f(r0)).abs()).fold(0.0, f64::max);
    out.checks.push(Check::at_most("soliton_n_spread", spread(&|r| r.n_scale), 0.0));
    out.checks.push(Check::at_most("soliton_y_spread", spread(&|r| r.y[0]), dx));
    out.checks.push(Check::at_most("soliton_z_spread", spread(&|r| r.z[0]), dxi));
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let worst_rel = rows.iter().zip(&norms).map(|(r, n)| r.residual / n).fold(0.0, f64::max);
    out.checks.push(Check::at_most("soliton_residual_max", worst, pc.eta));
    out.checks.push(Check::info("soliton_relative_residual_max", worst_rel));
    out.tables.push(("soliton_tracking".into(), rows_table(&rows, &norms)));

    let bq = ground_state(1, e.alpha, params(&pc.boost_grid))?.field;
    // e^{+i b0 x} Q travels with velocity 2 b0
    let u0 = bq.modulate(&[-pc.boost]);
    let traj = evolve(&u0, &solver(e.alpha, &pc.boost_solver))?;
    let rows = track_almost_periodicity(&traj, pc.delta, pc.eta, pc.c_eta, &spec, &acfg)?;
    let norms = traj.fields.iter().map(|u| hat_norm(u, &spec)).collect::<Result<Vec<_>, _>>()?;
    let (t, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.t, r.y[0])).unzip();
    let slope = ls_slope(&t, &y);
    let want = 2.0 * pc.boost;
    out.checks.push(Check::info("boosted_y_slope", slope));
    out.checks.push(Check::at_most("boosted_y_slope_relative_error", (slope - want).abs() / want.abs(), 0.05));
    out.tables.push(("boosted_tracking".into(), rows_table(&rows, &norms)));
    Ok(out)
}

fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let (tm, ym) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = t.iter().zip(y).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let den: f64 = t.iter().map(|t| (t - tm).powi(2)).sum();
    num / den
}

fn strichartz_sweep(cfg: &ExperimentConfig, e: &Exponents) -> Result<Outcome, CliError> {
    let sw = &cfg.sweep;
    let spec = state_spec(e)?;
    let d = e.d;
    let rows = (0..sw.samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>, CliError> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(i as u64));
            let width = rng.gen_range(0.5..2.0);
            let amp = rng.gen_range(0.1..2.0);
            let centre: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let boost: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = GridField::from_fn_physical(d, sw.grid.n, sw.grid.extent(), |x| {
                let r2: f64 = x.iter().zip(&centre).map(|(a, b)| (a - b) * (a - b)).sum();
                let ph: f64 = x.iter().zip(&boost).map(|(a, b)| a * b).sum();
                Complex64::from_polar(amp * (-r2 / (2.0 * width * width)).exp(), ph)
            })?;
            let rep = strichartz_ratio(&f, &spec, sw.t_max)?;
            Ok(vec![i as f64, width, amp, boost[0], rep.ratio, rep.tail_fraction, if rep.flagged { 1.0 } else { 0.0 }])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Outcome::default();
    let mut table = Table::new(&["sample", "width", "amplitude", "boost", "ratio", "tail_fraction", "flagged"]);
    let ratios: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    for r in rows {
        table.push(r);
    }
    out.checks.push(Check::flag("ratios_finite_and_positive", ratios.iter().all(|r| r.is_finite() && *r > 0.0)));
    out.checks.push(Check::info("ratio_max", ratios.iter().copied().fold(0.0, f64::max)));
    out.checks.push(Check::info("ratio_min", ratios.iter().copied().fold(f64::INFINITY, f64::min)));
    out.checks.push(Check::info("flagged", table.rows.iter().filter(|r| r[6] == 1.0).count() as f64));
    out.tables.push(("strichartz_sweep".into(), table));
    Ok(out)
}
