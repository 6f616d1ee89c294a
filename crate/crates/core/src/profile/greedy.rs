//! Greedy dyadic scale decomposition of the spectrum.
//!
//! Each step picks the cube `τ` with the largest normalized mass
//! `|τ|^{1/P-1/Q}‖F q‖_{L^Q(τ)}` (`P = (dα)'`, `Q = q̃'`), moves every sample
//! of `τ` with modulus at most `A = C1 ‖u‖ |τ|^{-1/P}` into a new piece and
//! repeats on the remainder. Samples move as a whole, so the pieces and the
//! remainder have disjoint supports and add up to `u` exactly.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicCube, GridField};
use crate::spaces::{hat_norm, CellPyramid, Mode, MorreySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Amplitude threshold constant.
    pub c1: f64,
    /// Abort when the remainder norm drops by less than this fraction over
    /// three steps.
    pub stall_delta: f64,
    pub max_steps: usize,
    /// Pieces whose cubes are this close in `|log(h/h')| + |k - (h'/h)k'|`
    /// are merged.
    pub merge_radius: f64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self { c1: 1.0, stall_delta: 1e-6, max_steps: 512, merge_radius: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalePiece {
    /// Leading cube `τ = h([0,1)^d + k)`.
    pub cube: DyadicCube,
    /// Every selected cube merged into this piece, leading cube first.
    pub cubes: Vec<DyadicCube>,
    /// Fourier samples.
    pub field: GridField,
    /// Amplitude threshold used for the leading cube.
    pub amp_cap: f64,
    /// `|τ|^{1/(dα)'-1/2} ‖F f‖_{L²(τ)}` on the leading cube.
    pub local_mass: f64,
}

impl ScalePiece {
    /// Cube side `h`.
    pub fn scale(&self) -> f64 {
        self.cube.side()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleDecomposition {
    pub pieces: Vec<ScalePiece>,
    /// Fourier samples of `q`.
    pub remainder: GridField,
    /// Cubes selected before merging.
    pub steps: usize,
    /// `‖q‖` after each step, starting with `‖u‖`.
    pub norm_history: Vec<f64>,
}

impl ScaleDecomposition {
    /// `Σ f^j + q`.
    pub fn reconstruct(&self) -> GridField {
        let mut acc = self.remainder.clone();
        for p in &self.pieces {
            acc = acc.add(&p.field).expect("pieces share the grid");
        }
        acc
    }

    /// `(Σ‖f^j‖^r + ‖q‖^r - ‖u‖^r) / ‖u‖^r`; non-positive when the
    /// decoupling inequality holds.
    pub fn decoupling_gap(&self, u: &GridField, spec: &MorreySpec) -> Result<f64> {
        let r = spec.r;
        let total = hat_norm(u, spec)?.powf(r);
        if total == 0.0 {
            return Ok(0.0);
        }
        let mut sum = hat_norm(&self.remainder, spec)?.powf(r);
        for p in &self.pieces {
            sum += hat_norm(&p.field, spec)?.powf(r);
        }
        Ok((sum - total) / total)
    }
}

/// Exponents `(q̃, r̃)` for the decomposition: `q̃` in the middle of
/// `(2, (d + 2/(d+3))α)` and `r̃ = ((d+2)α)^*`.
pub fn greedy_spec(d: usize, alpha: f64) -> Result<MorreySpec> {
    let df = d as f64;
    let hi = (df + 2.0 / (df + 3.0)) * alpha;
    if hi <= 2.0 {
        return Err(Error::Assumption(format!("(2, {hi}) is empty for d = {d}, α = {alpha}")));
    }
    let q = 0.5 * (2.0 + hi);
    MorreySpec::hat(df * alpha, q, crate::evolution::strichartz_star(d, alpha))
}

struct Pick {
    level: usize,
    idx: usize,
    weight: f64,
}

fn better(a: &Pick, b: &Pick, pyr: &CellPyramid) -> bool {
    match a.weight.partial_cmp(&b.weight).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.level.cmp(&b.level) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => pyr.cube_of(a.level, a.idx).k < pyr.cube_of(b.level, b.idx).k,
        },
    }
}

fn best_cube(pyr: &CellPyramid, p_out: f64) -> Option<Pick> {
    let mut best: Option<Pick> = None;
    for l in 0..=pyr.top_level() {
        for (idx, &m) in pyr.levels[l].iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let cand = Pick { level: l, idx, weight: pyr.weight(l, m, p_out) };
            if best.as_ref().map_or(true, |b| better(&cand, b, pyr)) {
                best = Some(cand);
            }
        }
    }
    best
}

fn samples_in(f: &GridField, cube: &DyadicCube) -> Vec<usize> {
    let mut xi = vec![0.0; f.dim()];
    (0..f.len())
        .filter(|&i| {
            f.point_into(i, &mut xi);
            cube.contains(&xi)
        })
        .collect()
}

fn cube_distance(lead: &DyadicCube, other: &DyadicCube) -> f64 {
    let (h, h2) = (lead.side(), other.side());
    let shift: f64 = lead
        .k
        .iter()
        .zip(&other.k)
        .map(|(&a, &b)| {
            let v = a as f64 - h2 / h * b as f64;
            v * v
        })
        .sum::<f64>()
        .sqrt();
    (h / h2).ln().abs() + shift
}

fn local_mass(field: &GridField, cube: &DyadicCube, p_out: f64) -> f64 {
    let mut xi = vec![0.0; field.dim()];
    let mut m2 = 0.0;
    for (i, z) in field.values().iter().enumerate() {
        field.point_into(i, &mut xi);
        if cube.contains(&xi) {
            m2 += z.norm_sqr();
        }
    }
    let m2 = m2 * field.cell_volume();
    cube.volume().powf(1.0 / p_out - 0.5) * m2.sqrt()
}

/// Greedy decomposition `u = Σ f^j + q` until `‖q‖_{M̂} ≤ eps`.
pub fn greedy_scale_decomposition(
    u: &GridField,
    eps: f64,
    spec: &MorreySpec,
    cfg: &GreedyConfig,
) -> Result<ScaleDecomposition> {
    if !(eps > 0.0) {
        return Err(Error::Config("eps must be positive".into()));
    }
    if spec.mode != Mode::Hat {
        return Err(Error::Config("the greedy decomposition needs a hat-mode spec".into()));
    }
    if !(cfg.c1 > 0.0) {
        return Err(Error::Config("C1 must be positive".into()));
    }
    let (p_out, q_in) = spec.cube_exponents();
    let mut rem = u.to_fourier();
    let m_norm = hat_norm(&rem, spec)?;
    let mut history = vec![m_norm];
    let mut raw: Vec<(DyadicCube, GridField, f64)> = Vec::new();
    let zero = Complex64::new(0.0, 0.0);
    while *history.last().unwrap() > eps {
        let cur = *history.last().unwrap();
        if raw.len() >= cfg.max_steps {
            return Err(Error::Stall(format!("{} steps without reaching ‖q‖ ≤ {eps} (‖q‖ = {cur:.3e})", raw.len())));
        }
        let h = history.len();
        if h >= 4 && cur > (1.0 - cfg.stall_delta) * history[h - 4] {
            return Err(Error::Stall(format!(
                "‖q‖ went from {:.6e} to {cur:.6e} over three steps (after {} steps)",
                history[h - 4],
                raw.len()
            )));
        }
        let pyr = CellPyramid::build(&rem, q_in)?;
        let pick = best_cube(&pyr, p_out).ok_or_else(|| Error::Stall("remainder vanished above eps".into()))?;
        let mut cube = pyr.cube_of(pick.level, pick.idx);
        let (taken, cap) = loop {
            let cap = cfg.c1 * m_norm * cube.volume().powf(-1.0 / p_out);
            let take: Vec<usize> = samples_in(&rem, &cube)
                .into_iter()
                .filter(|&i| {
                    let m = rem.values()[i].norm();
                    m > 0.0 && m <= cap
                })
                .collect();
            if !take.is_empty() {
                break (take, cap);
            }
            if cube.j >= pyr.jc {
                return Err(Error::Stall(format!("no sample of {cube:?} is below the amplitude cap {cap:.3e}")));
            }
            // descend into the heaviest child; its cap is larger
            let vals = rem.values();
            let mut best: Option<(f64, DyadicCube)> = None;
            for child in cube.children() {
                let m: f64 = samples_in(&rem, &child).iter().map(|&i| vals[i].norm().powf(q_in)).sum();
                let w = child.volume().powf(1.0 / p_out - 1.0 / q_in) * m.powf(1.0 / q_in);
                if best.as_ref().map_or(true, |(bw, bc)| w > *bw || (w == *bw && child.k < bc.k)) {
                    best = Some((w, child));
                }
            }
            cube = best.unwrap().1;
        };
        let mut f = GridField::zeros(rem.dim(), rem.n_per_axis(), rem.extent(), rem.space())?;
        for i in taken {
            f.values_mut()[i] = rem.values()[i];
            rem.values_mut()[i] = zero;
        }
        raw.push((cube, f, cap));
        history.push(hat_norm(&rem, spec)?);
    }

    let steps = raw.len();
    let mut pieces: Vec<ScalePiece> = Vec::new();
    for (cube, field, cap) in raw {
        match pieces.iter_mut().find(|p| cube_distance(&p.cube, &cube) <= cfg.merge_radius) {
            Some(p) => {
                p.field = p.field.add(&field)?;
                p.cubes.push(cube);
            }
            None => pieces.push(ScalePiece {
                cube: cube.clone(),
                cubes: vec![cube],
                field,
                amp_cap: cap,
                local_mass: 0.0,
            }),
        }
    }
    for p in &mut pieces {
        p.local_mass = local_mass(&p.field, &p.cube, p_out);
    }
    Ok(ScaleDecomposition { pieces, remainder: rem, steps, norm_history: history })
}
