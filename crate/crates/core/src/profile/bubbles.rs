//! Space-time bubble extraction from a sequence `R_n`.
//!
//! A bubble is located by maximizing the local mass
//! `⟨|U(-s)R_n|², w(· - a)⟩` (unit Gaussian window `w`) over a grid of `s`
//! and every sample position `a`, then refined by golden-section search.
//! Profiles are fitted jointly by least squares, one frequency at a time;
//! with a single bubble this is the average of the aligned
//! `T(-a_n)U(-s_n)R_n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::free_propagate;
use crate::grid::{fft_nd, GridField};
use crate::group::apply_shift;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleConfig {
    /// The coarse `s` grid is `s_points` values evenly spread on `[-s_max, s_max]`.
    pub s_max: f64,
    pub s_points: usize,
    /// Stop once the aligned window mass falls below `tol` times the mean
    /// initial `‖R_n‖²`.
    pub tol: f64,
    pub window_width: f64,
    /// Multiply aligned pieces by a smooth cutoff of this radius before
    /// averaging.
    pub localize: Option<f64>,
    /// Tikhonov weight (relative to the sequence length) of the joint
    /// per-frequency profile fit when several bubbles are present.
    pub ridge: f64,
    /// Re-location passes of each bubble against the others' fits.
    pub backfit_passes: usize,
}

impl Default for BubbleConfig {
    fn default() -> Self {
        Self { s_max: 8.0, s_points: 65, tol: 1e-3, window_width: 1.0, localize: None, ridge: 1e-6, backfit_passes: 2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bubble {
    pub s: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    /// Least-squares fit of the aligned pieces.
    pub profile: GridField,
    /// Aligned piece for each `n`.
    pub estimates: Vec<GridField>,
    /// Mean window mass at the optimum.
    pub window_mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BubbleExtraction {
    pub bubbles: Vec<Bubble>,
    /// `r_n = R_n - Σ_l U(s_n^l)T(a_n^l)φ^l`.
    pub residuals: Vec<GridField>,
    /// `separation[l][m][n] = |s_n^l - s_n^m| + |a_n^l - a_n^m|`.
    pub separation: Vec<Vec<Vec<f64>>>,
    /// Every pairwise separation increases with `n`.
    pub diverging: bool,
}

fn torus_sq(x: &[f64], a: &[f64], period: f64) -> f64 {
    x.iter()
        .zip(a)
        .map(|(&x, &a)| {
            let d = (x - a + 0.5 * period).rem_euclid(period) - 0.5 * period;
            d * d
        })
        .sum()
}

struct Locator {
    dim: usize,
    n: usize,
    width: f64,
    /// FFT of the window centred at the origin.
    window_hat: Vec<Complex64>,
}

impl Locator {
    fn new(template: &GridField, width: f64) -> Self {
        let w = template.to_physical().with_values(vec![Complex64::new(0.0, 0.0); template.len()]);
        let period = 2.0 * template.extent();
        let zero = vec![0.0; w.dim()];
        let (mut mi, mut disp) = (vec![0usize; w.dim()], vec![0.0; w.dim()]);
        // entry k holds the window at displacement k·Δx (per axis)
        let mut vals: Vec<Complex64> = (0..w.len())
            .map(|i| {
                w.multi_index(i, &mut mi);
                for (d, &k) in disp.iter_mut().zip(&mi) {
                    *d = k as f64 * w.dx();
                }
                Complex64::new((-torus_sq(&disp, &zero, period) / (2.0 * width * width)).exp(), 0.0)
            })
            .collect();
        fft_nd(&mut vals, w.dim(), w.n_per_axis(), false);
        Self { dim: w.dim(), n: w.n_per_axis(), width, window_hat: vals }
    }

    /// `a ↦ Σ_x |v(x)|² w(x - a) Δx^d` on the sample positions.
    fn scan(&self, v: &GridField) -> Vec<f64> {
        let cell = v.cell_volume();
        let mut rho: Vec<Complex64> = v.values().iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
        fft_nd(&mut rho, self.dim, self.n, false);
        for (r, w) in rho.iter_mut().zip(&self.window_hat) {
            *r *= w;
        }
        fft_nd(&mut rho, self.dim, self.n, true);
        let norm = cell / rho.len() as f64;
        rho.iter().map(|z| z.re * norm).collect()
    }

    /// `Σ_x rho(x) k(x - a)` over the samples within 12 widths of `a`
    /// (nearest periodic image), times the cell volume.
    fn window_sum(&self, v: &GridField, rho: &[f64], a: &[f64], k: impl Fn(&[f64], f64) -> f64) -> f64 {
        let (n, dx) = (self.n as i64, v.dx());
        let radius = 12.0 * self.width;
        let ranges: Vec<(i64, i64)> = a
            .iter()
            .map(|&c| {
                let (lo, hi) = (((c - radius) / dx).ceil() as i64, ((c + radius) / dx).floor() as i64);
                if hi - lo + 1 >= n {
                    let lo = (c / dx).round() as i64 - n / 2;
                    (lo, lo + n - 1)
                } else {
                    (lo, hi)
                }
            })
            .collect();
        if ranges.iter().any(|(lo, hi)| hi < lo) {
            return 0.0;
        }
        let mut off: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut disp = vec![0.0; self.dim];
        let (cut, mut acc) = (radius * radius, 0.0);
        loop {
            let mut idx = 0usize;
            let mut r2 = 0.0;
            for ax in 0..self.dim {
                idx = idx * self.n + (off[ax] + n / 2).rem_euclid(n) as usize;
                disp[ax] = off[ax] as f64 * dx - a[ax];
                r2 += disp[ax] * disp[ax];
            }
            if r2 < cut {
                acc += rho[idx] * k(&disp, r2);
            }
            let mut ax = self.dim;
            loop {
                if ax == 0 {
                    return acc * v.cell_volume();
                }
                ax -= 1;
                if off[ax] < ranges[ax].1 {
                    off[ax] += 1;
                    break;
                }
                off[ax] = ranges[ax].0;
            }
        }
    }

    /// Window mass at an arbitrary centre; `rho = |v|²`.
    fn at(&self, v: &GridField, rho: &[f64], a: &[f64]) -> f64 {
        let w2 = 2.0 * self.width * self.width;
        self.window_sum(v, rho, a, |_, r2| (-r2 / w2).exp())
    }

    /// `∂/∂a_axis` of the window mass.
    fn slope(&self, v: &GridField, rho: &[f64], a: &[f64], axis: usize) -> f64 {
        let w2 = self.width * self.width;
        self.window_sum(v, rho, a, |d, r2| (-r2 / (2.0 * w2)).exp() * d[axis] / w2)
    }

    /// `d/ds` of the window mass of `U(-s)R` at a fixed centre, given
    /// `v = U(-s)R`.
    fn time_slope(&self, v: &GridField, a: &[f64]) -> f64 {
        let dv = v.fourier_multiply(|xi| Complex64::new(0.0, xi.iter().map(|k| k * k).sum::<f64>())).to_physical();
        let rho: Vec<f64> = v.values().iter().zip(dv.values()).map(|(z, d)| 2.0 * (z.conj() * d).re).collect();
        let w2 = 2.0 * self.width * self.width;
        self.window_sum(v, &rho, a, |_, r2| (-r2 / w2).exp())
    }
}

fn density(v: &GridField) -> Vec<f64> {
    v.values().iter().map(|z| z.norm_sqr()).collect()
}

/// Root of a decreasing `g` on `[lo, hi]` (Illinois false position), when
/// bracketed.
fn root_decreasing(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> Option<f64> {
    let (mut glo, mut ghi) = (g(lo), g(hi));
    if !(glo > 0.0 && ghi < 0.0) {
        return None;
    }
    let tol = 1e-14 * lo.abs().max(hi.abs()).max(1.0);
    let mut side = 0i8;
    for _ in 0..100 {
        let x = (lo * ghi - hi * glo) / (ghi - glo);
        if !(x > lo && x < hi) || hi - lo <= tol {
            break;
        }
        let gx = g(x);
        if gx == 0.0 {
            return Some(x);
        }
        if gx > 0.0 {
            lo = x;
            glo = gx;
            if side == 1 {
                ghi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            ghi = gx;
            if side == -1 {
                glo *= 0.5;
            }
            side = -1;
        }
    }
    Some((lo * ghi - hi * glo) / (ghi - glo))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_max(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Best centre for a fixed `v`: grid argmax, then coordinate-wise
/// refinement within one sample spacing.
fn best_centre(loc: &Locator, v: &GridField) -> (Vec<f64>, f64) {
    let scan = loc.scan(v);
    let (imax, _) = scan
        .iter()
        .enumerate()
        .fold((0usize, f64::MIN), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) });
    let rho = density(v);
    let mut a = v.point(imax);
    let dx = v.dx();
    let mut best = loc.at(v, &rho, &a);
    let sweeps = if a.len() == 1 { 1 } else { 3 };
    for _ in 0..sweeps {
        for axis in 0..a.len() {
            let c = a[axis];
            let mut probe = a.clone();
            let root = root_decreasing(c - dx, c + dx, |t| {
                let mut p = probe.clone();
                p[axis] = t;
                loc.slope(v, &rho, &p, axis)
            });
            let (x, val) = match root {
                Some(x) => {
                    probe[axis] = x;
                    (x, loc.at(v, &rho, &probe))
                }
                None => golden_max(c - dx, c + dx, 1e-10 * dx.max(1.0), |t| {
                    probe[axis] = t;
                    loc.at(v, &rho, &probe)
                }),
            };
            if val > best {
                a[axis] = x;
                best = val;
            }
        }
    }
    (a, best)
}

/// `None` when the coarse peak is below `floor`.
fn locate(loc: &Locator, r: &GridField, cfg: &BubbleConfig, floor: f64) -> Result<Option<(f64, Vec<f64>, f64)>> {
    let rh = r.to_fourier();
    let m = cfg.s_points;
    let step = 2.0 * cfg.s_max / (m - 1) as f64;
    let mut best = (0usize, f64::MIN);
    for i in 0..m {
        let s = -cfg.s_max + i as f64 * step;
        let v = free_propagate(&rh, -s).to_physical();
        let peak = loc.scan(&v).into_iter().fold(f64::MIN, f64::max);
        if peak > best.1 {
            best = (i, peak);
        }
    }
    if best.1 < floor {
        return Ok(None);
    }
    if best.0 == 0 || best.0 == m - 1 {
        return Err(Error::Extraction(format!(
            "window mass peaks at the edge of the s grid (s = {}); widen s_max",
            -cfg.s_max + best.0 as f64 * step
        )));
    }
    let s0 = -cfg.s_max + best.0 as f64 * step;
    let (s, _) = golden_max(s0 - step, s0 + step, 1e-3 * step, |s| {
        let v = free_propagate(&rh, -s).to_physical();
        best_centre(loc, &v).1
    });
    // the window mass is smooth in s: finish on the sign of its derivative
    let s = root_decreasing(s - 2e-3 * step, s + 2e-3 * step, |s| {
        let v = free_propagate(&rh, -s).to_physical();
        let (a, _) = best_centre(loc, &v);
        loc.time_slope(&v, &a)
    })
    .unwrap_or(s);
    let v = free_propagate(&rh, -s).to_physical();
    let (a, mass) = best_centre(loc, &v);
    Ok(Some((s, a, mass)))
}

fn cutoff(f: &GridField, radius: f64) -> GridField {
    let f = f.to_physical();
    let mut x = vec![0.0; f.dim()];
    let vals = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            f.point_into(i, &mut x);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            z * (0.5 * statrs::function::erf::erfc((r - radius) / 2.0))
        })
        .collect();
    f.with_values(vals)
}

/// `T(-a)U(-s)R`.
pub fn align(r: &GridField, s: f64, a: &[f64]) -> GridField {
    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
    apply_shift(&free_propagate(r, -s), &neg).to_physical()
}

/// `U(s)T(a)φ`.
pub fn place(phi: &GridField, s: f64, a: &[f64]) -> GridField {
    free_propagate(&apply_shift(phi, a), s).to_physical()
}

fn multipliers(template: &GridField, s: &[f64], a: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let ones = template.to_fourier().with_values(vec![Complex64::new(1.0, 0.0); template.len()]);
    s.iter()
        .zip(a)
        .map(|(&s, a)| place(&ones, s, a).to_fourier().into_values())
        .collect()
}

/// Solves `min Σ_n |F R_n - Σ_l m_n^l F φ^l|²` frequency by frequency, with
/// `m_n^l` the multiplier of `U(s_n^l)T(a_n^l)`.
fn fit(seq: &[GridField], tracks: &[(Vec<f64>, Vec<Vec<f64>>)], ridge: f64) -> Result<Vec<GridField>> {
    let template = seq[0].to_fourier();
    let data: Vec<Vec<Complex64>> = seq.iter().map(|r| r.to_fourier().into_values()).collect();
    let mults: Vec<Vec<Vec<Complex64>>> = tracks.iter().map(|(s, a)| multipliers(&template, s, a)).collect();
    let (nl, nn) = (tracks.len(), seq.len());
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![vec![zero; template.len()]; nl];
    let mut mat = vec![vec![zero; nl + 1]; nl];
    for i in 0..template.len() {
        for l in 0..nl {
            for k in 0..nl {
                mat[l][k] = (0..nn).map(|n| mults[l][n][i].conj() * mults[k][n][i]).sum();
            }
            if nl > 1 {
                mat[l][l] += ridge * nn as f64;
            }
            mat[l][nl] = (0..nn).map(|n| mults[l][n][i].conj() * data[n][i]).sum();
        }
        let x = solve(&mut mat)?;
        for l in 0..nl {
            out[l][i] = x[l];
        }
    }
    Ok(out.into_iter().map(|v| template.with_values(v).to_space(seq[0].space())).collect())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(m: &mut [Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let n = m.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].norm().total_cmp(&m[b][c].norm())).unwrap();
        if m[p][c].norm() == 0.0 {
            return Err(Error::Extraction("singular profile fit".into()));
        }
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                let v = m[c][k];
                m[r][k] -= f * v;
            }
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let acc: Complex64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - acc) / m[r][r];
    }
    Ok(x)
}

fn residuals_of(seq: &[GridField], tracks: &[(Vec<f64>, Vec<Vec<f64>>)], profiles: &[GridField]) -> Result<Vec<GridField>> {
    seq.iter()
        .enumerate()
        .map(|(n, r)| {
            let mut r = r.clone();
            for ((s, a), phi) in tracks.iter().zip(profiles) {
                r = r.sub(&place(phi, s[n], &a[n]))?;
            }
            Ok(r)
        })
        .collect()
}

fn localized(f: &GridField, cfg: &BubbleConfig) -> GridField {
    match cfg.localize {
        Some(rad) => cutoff(f, rad),
        None => f.clone(),
    }
}

/// Extracts up to `max_bubbles` bubbles from `R_n`; `|F R_n| ≤ F_cap` is
/// checked sample-wise.
pub fn extract_bubbles(
    seq: &[GridField],
    f_cap: &GridField,
    max_bubbles: usize,
    cfg: &BubbleConfig,
) -> Result<BubbleExtraction> {
    if seq.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 fields, got {}", seq.len())));
    }
    if cfg.s_points < 3 || !(cfg.s_max > 0.0) || !(cfg.window_width > 0.0) || !(cfg.ridge >= 0.0) {
        return Err(Error::Config("s grid needs s_max > 0 and at least 3 points; ridge must be non-negative".into()));
    }
    let cap = f_cap.to_fourier();
    for r in seq {
        if !r.same_grid(f_cap) {
            return Err(Error::Validation("sequence and F_cap live on different grids".into()));
        }
        let rh = r.to_fourier();
        let slack = 1e-12 * cap.sup_norm();
        if rh.values().iter().zip(cap.values()).any(|(z, c)| z.norm() > c.norm() + slack) {
            return Err(Error::Validation("|F R_n| exceeds F_cap".into()));
        }
    }
    let loc = Locator::new(&seq[0], cfg.window_width);
    let seq: Vec<GridField> = seq.iter().map(|r| r.to_physical()).collect();
    let scale: f64 = seq.iter().map(|r| r.l2_norm().powi(2)).sum::<f64>() / seq.len() as f64;
    let mut tracks: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    let mut estimates: Vec<Vec<GridField>> = Vec::new();
    let mut profiles: Vec<GridField> = Vec::new();
    let mut residuals = seq.clone();
    while tracks.len() < max_bubbles && scale > 0.0 {
        let floor = cfg.tol * scale;
        let found = residuals.iter().map(|r| locate(&loc, r, cfg, floor)).collect::<Result<Vec<_>>>()?;
        let params: Vec<_> = found.into_iter().map(|p| p.unwrap_or((0.0, vec![0.0; seq[0].dim()], 0.0))).collect();
        let mean_mass = params.iter().map(|p| p.2).sum::<f64>() / params.len() as f64;
        if mean_mass < floor {
            break;
        }
        estimates.push(residuals.iter().zip(&params).map(|(r, (s, a, _))| localized(&align(r, *s, a), cfg)).collect());
        tracks.push((params.iter().map(|p| p.0).collect(), params.iter().map(|p| p.1.clone()).collect()));
        masses.push(mean_mass);
        profiles = fit(&seq, &tracks, cfg.ridge)?.iter().map(|p| localized(p, cfg)).collect();
        residuals = residuals_of(&seq, &tracks, &profiles)?;
    }
    if tracks.len() > 1 {
        for _ in 0..cfg.backfit_passes {
            for l in 0..tracks.len() {
                let partial: Vec<GridField> = residuals
                    .iter()
                    .enumerate()
                    .map(|(n, r)| r.add(&place(&profiles[l], tracks[l].0[n], &tracks[l].1[n])))
                    .collect::<Result<_>>()?;
                let params = partial
                    .iter()
                    .zip(&tracks[l].0)
                    .zip(&tracks[l].1)
                    .map(|((r, &s), a)| Ok(locate(&loc, r, cfg, 0.0)?.unwrap_or((s, a.clone(), 0.0))))
                    .collect::<Result<Vec<_>>>()?;
                estimates[l] = partial.iter().zip(&params).map(|(r, (s, a, _))| localized(&align(r, *s, a), cfg)).collect();
                tracks[l] = (params.iter().map(|p| p.0).collect(), params.iter().map(|p| p.1.clone()).collect());
                masses[l] = params.iter().map(|p| p.2).sum::<f64>() / params.len() as f64;
                profiles = fit(&seq, &tracks, cfg.ridge)?.iter().map(|p| localized(p, cfg)).collect();
                residuals = residuals_of(&seq, &tracks, &profiles)?;
            }
        }
    }
    let bubbles: Vec<Bubble> = tracks
        .into_iter()
        .zip(profiles)
        .zip(estimates)
        .zip(masses)
        .map(|((((s, a), profile), estimates), window_mass)| Bubble { s, a, profile, estimates, window_mass })
        .collect();
    let nb = bubbles.len();
    let mut separation = vec![vec![Vec::new(); nb]; nb];
    let mut diverging = true;
    for l in 0..nb {
        for m in 0..nb {
            let seps: Vec<f64> = (0..seq.len())
                .map(|n| {
                    let (b1, b2) = (&bubbles[l], &bubbles[m]);
                    let da = b1.a[n].iter().zip(&b2.a[n]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                    (b1.s[n] - b2.s[n]).abs() + da
                })
                .collect();
            if l != m && !seps.windows(2).all(|w| w[1] > w[0]) {
                diverging = false;
            }
            separation[l][m] = seps;
        }
    }
    Ok(BubbleExtraction { bubbles, residuals, separation, diverging: diverging && nb > 1 })
}
