//! Linear profile decomposition of a bounded sequence.
//!
//! Per `n`: greedy scale pieces. Pieces are matched across `n` into
//! families, each piece is renormalized to `R = P(k)D(h)^{-1}f` (cube
//! `h([0,1)^d + k)`), bubbles are extracted from every family, and the
//! profiles come back with `G_n = D(h_n)P(-k_n)U(s_n)T(a_n)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bubbles::{extract_bubbles, BubbleConfig};
use super::greedy::{greedy_scale_decomposition, GreedyConfig, ScaleDecomposition, ScalePiece};
use crate::error::{Error, Result};
use crate::evolution::{default_size_r, free_space_time_norm};
use crate::grid::{DyadicCube, GridField};
use crate::group::{apply, apply_dilation, orthogonality_divergence, Deformation, FamilyDivergence};
use crate::spaces::size::{size_function, SizeFunctionConfig};
use crate::spaces::{hat_norm, MorreySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub greedy: GreedyConfig,
    pub bubbles: BubbleConfig,
    pub max_bubbles: usize,
    /// Pieces are matched across `n` when the similarity
    /// `Σ min(|F a|,|F b|)² / Σ max(|F a|,|F b|)²` of their renormalized
    /// spectra is at least this.
    pub match_threshold: f64,
    /// `r` of the size function used in the decoupling table; `None` picks
    /// the middle of the admissible range.
    pub size_r: Option<f64>,
    /// Compute the `ℓ_r` decoupling table.
    pub size_table: bool,
    /// Window `[-T, T]` and Simpson panels per side for remainder
    /// space-time norms.
    pub strichartz_t: f64,
    pub strichartz_panels: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            greedy: GreedyConfig::default(),
            bubbles: BubbleConfig::default(),
            max_bubbles: 4,
            match_threshold: 0.5,
            size_r: None,
            size_table: true,
            strichartz_t: 4.0,
            strichartz_panels: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub family: usize,
    /// `G_n` for every `n`.
    pub deformations: Vec<Deformation>,
    /// `φ`, on the largest-extent grid among the family's renormalized
    /// pieces.
    pub profile: GridField,
    /// Aligned renormalized piece for each `n` (same grid as `profile`).
    pub estimates: Vec<GridField>,
}

/// `limsup` surrogate: the maximum over the tested `n` and the
/// least-squares slope against the index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub max: f64,
    pub slope: f64,
}

impl Trend {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let max = v.iter().copied().fold(0.0, f64::max);
        if v.len() < 2 {
            return Self { max, slope: 0.0 };
        }
        let xm = (n - 1.0) / 2.0;
        let ym = v.iter().sum::<f64>() / n;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, y) in v.iter().enumerate() {
            num += (i as f64 - xm) * (y - ym);
            den += (i as f64 - xm).powi(2);
        }
        Self { max, slope: num / den }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeTable {
    pub r: f64,
    pub u: Vec<f64>,
    pub profiles: Vec<f64>,
    pub remainder: Vec<f64>,
    /// `max_n (Σ ℓ_r(φ)^r + ℓ_r(R_n)^r - ℓ_r(u_n)^r) / ℓ_r(u_n)^r`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileDecomposition {
    pub profiles: Vec<Profile>,
    /// `R_n = u_n - Σ_j G_n^j φ^j`, physical samples.
    pub remainders: Vec<GridField>,
    /// `max_n (Σ‖f_n^j‖^r + ‖q_n‖^r - ‖u_n‖^r)_+ / ‖u_n‖^r` for the greedy
    /// step.
    pub decoupling_residual: f64,
    /// `[i][k]` totals at the last `n`.
    pub pairwise_divergence: Vec<Vec<f64>>,
    /// `[i][k][n]`.
    pub divergence_series: Vec<Vec<Vec<FamilyDivergence>>>,
    /// Merged pieces per `n`.
    pub piece_counts: Vec<usize>,
    /// Pieces that could not be matched to a family; they stay in the
    /// remainder.
    pub unmatched_pieces: usize,
    pub remainder_strichartz: Trend,
    pub remainder_strichartz_values: Vec<f64>,
    pub size_table: Option<SizeTable>,
}

impl ProfileDecomposition {
    /// `G_n^j φ^j` on the grid of `u_n`.
    pub fn component(&self, j: usize, n: usize, alpha: f64, template: &GridField) -> Result<GridField> {
        place_profile(&self.profiles[j].profile, &self.profiles[j].deformations[n], alpha, template)
    }
}

fn place_profile(phi: &GridField, g: &Deformation, alpha: f64, template: &GridField) -> Result<GridField> {
    let h = (2f64).powi(g.m);
    let (phi, _) = phi.regrid(template.extent() * h, template.n_per_axis())?;
    Ok(apply(g, &phi, alpha)?.to_physical())
}

/// `R = P(k) D(h)^{-1} f` for a piece on `h([0,1)^d + k)`.
pub fn renormalize(f: &GridField, cube: &DyadicCube, alpha: f64) -> GridField {
    let g = apply_dilation(&f.to_fourier(), cube.j, alpha);
    let k: Vec<f64> = cube.k.iter().map(|&k| k as f64).collect();
    g.modulate(&k)
}

/// The deformation taking `R` back to the piece: `D(h)P(-k)`.
pub fn piece_deformation(cube: &DyadicCube) -> Deformation {
    let mut g = Deformation::dilation(cube.dim(), -cube.j);
    g.b = cube.k.iter().map(|&k| -(k as f64)).collect();
    g
}

/// `Σ min(|F a|, |F b|)² / Σ max(|F a|, |F b|)²`: 1 for equal spectral
/// moduli, sensitive to amplitude as well as shape.
fn similarity(a: &GridField, b: &GridField) -> f64 {
    let (fa, fb) = (a.to_fourier(), b.to_fourier());
    let (mut lo, mut hi) = (0.0, 0.0);
    for (x, y) in fa.values().iter().zip(fb.values()) {
        let (x, y) = (x.norm(), y.norm());
        lo += x.min(y).powi(2);
        hi += x.max(y).powi(2);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

struct Renormed {
    cube: DyadicCube,
    field: GridField,
}

/// Profile decomposition of `u_n` with greedy threshold `eps`; `spec` is the
/// `(dα, q̃, r̃)` hat-Morrey triple of the greedy step.
pub fn profile_decompose(
    seq: &[GridField],
    eps: f64,
    spec: &MorreySpec,
    alpha: f64,
    cfg: &ProfileConfig,
) -> Result<ProfileDecomposition> {
    if seq.is_empty() {
        return Err(Error::InsufficientData("empty sequence".into()));
    }
    let d = seq[0].dim();
    let (n0, l0) = (seq[0].n_per_axis(), seq[0].extent());
    if seq.iter().any(|u| u.dim() != d || u.n_per_axis() != n0 || u.extent() != l0) {
        return Err(Error::Validation("all u_n must share one grid".into()));
    }
    let norms = seq.iter().map(|u| hat_norm(u, spec)).collect::<Result<Vec<_>>>()?;
    if norms.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("hat-Morrey norms are not bounded".into()));
    }

    let decomps: Vec<ScaleDecomposition> = seq
        .par_iter()
        .map(|u| greedy_scale_decomposition(u, eps, spec, &cfg.greedy))
        .collect::<Result<_>>()?;
    let mut decoupling_residual = 0.0f64;
    for (u, dc) in seq.iter().zip(&decomps) {
        decoupling_residual = decoupling_residual.max(dc.decoupling_gap(u, spec)?);
    }
    let piece_counts: Vec<usize> = decomps.iter().map(|dc| dc.pieces.len()).collect();

    let renormed: Vec<Vec<Renormed>> = decomps
        .iter()
        .map(|dc| {
            dc.pieces
                .iter()
                .map(|p: &ScalePiece| Renormed { cube: p.cube.clone(), field: renormalize(&p.field, &p.cube, alpha) })
                .collect()
        })
        .collect();

    // families: seeded by the first n, extended by best spectral similarity
    let mut families: Vec<Vec<usize>> = (0..renormed[0].len()).map(|i| vec![i]).collect();
    let mut alive = vec![true; families.len()];
    let mut unmatched = 0usize;
    for n in 1..seq.len() {
        let mut used = vec![false; renormed[n].len()];
        for (fi, fam) in families.iter_mut().enumerate() {
            if !alive[fi] {
                continue;
            }
            let reference = &renormed[0][fam[0]].field;
            let mut best: Option<(f64, usize)> = None;
            for (ci, cand) in renormed[n].iter().enumerate() {
                if used[ci] {
                    continue;
                }
                let Ok((moved, _)) = cand.field.regrid(reference.extent(), reference.n_per_axis()) else {
                    continue;
                };
                let o = similarity(reference, &moved);
                if o >= cfg.match_threshold && best.map_or(true, |(bo, _)| o > bo) {
                    best = Some((o, ci));
                }
            }
            match best {
                Some((_, ci)) => {
                    used[ci] = true;
                    fam.push(ci);
                }
                None => alive[fi] = false,
            }
        }
        unmatched += used.iter().filter(|u| !**u).count();
    }
    let families: Vec<Vec<usize>> = families
        .into_iter()
        .zip(&alive)
        .filter_map(|(f, &a)| a.then_some(f))
        .collect();
    unmatched += renormed[0].len() - families.len();

    let mut profiles = Vec::new();
    for (fi, fam) in families.iter().enumerate() {
        // the finest spectral sampling in the family: no piece is truncated
        let first = fam
            .iter()
            .enumerate()
            .map(|(n, &ci)| &renormed[n][ci].field)
            .fold(&renormed[0][fam[0]].field, |best, f| if f.extent() > best.extent() { f } else { best });
        let mut rs = Vec::with_capacity(seq.len());
        for (n, &ci) in fam.iter().enumerate() {
            let (moved, _) = renormed[n][ci].field.regrid(first.extent(), first.n_per_axis())?;
            rs.push(moved.to_physical());
        }
        let spectra: Vec<GridField> = rs.iter().map(|r| r.to_fourier()).collect();
        let cap_vals: Vec<Complex64> = (0..first.len())
            .map(|i| Complex64::new(spectra.iter().map(|r| r.values()[i].norm()).fold(0.0, f64::max), 0.0))
            .collect();
        let cap = first.to_fourier().with_values(cap_vals);
        let cap = cap.to_space(rs[0].space());
        let rs_aligned: Vec<GridField> = rs.iter().map(|r| r.to_space(cap.space())).collect();
        let ex = if rs_aligned.len() >= 3 {
            extract_bubbles(&rs_aligned, &cap, cfg.max_bubbles, &cfg.bubbles)?
        } else {
            return Err(Error::InsufficientData(format!("need at least 3 fields, got {}", rs_aligned.len())));
        };
        for b in ex.bubbles {
            let deformations = fam
                .iter()
                .enumerate()
                .map(|(n, &ci)| {
                    let mut g = piece_deformation(&renormed[n][ci].cube);
                    g.s = b.s[n];
                    g.a = b.a[n].clone();
                    g
                })
                .collect();
            profiles.push(Profile { family: fi, deformations, profile: b.profile, estimates: b.estimates });
        }
    }

    let mut remainders = Vec::with_capacity(seq.len());
    for (n, u) in seq.iter().enumerate() {
        let mut r = u.to_physical();
        for p in &profiles {
            r = r.sub(&place_profile(&p.profile, &p.deformations[n], alpha, &r)?)?;
        }
        remainders.push(r);
    }

    let np = profiles.len();
    let mut divergence_series = vec![vec![Vec::new(); np]; np];
    let mut pairwise_divergence = vec![vec![0.0; np]; np];
    for i in 0..np {
        for k in 0..np {
            let series: Vec<FamilyDivergence> = (0..seq.len())
                .map(|n| orthogonality_divergence(&profiles[i].deformations[n], &profiles[k].deformations[n]))
                .collect();
            pairwise_divergence[i][k] = series.last().map_or(0.0, |s| s.total);
            divergence_series[i][k] = series;
        }
    }

    let p = (d as f64 + 2.0) * alpha;
    let remainder_strichartz_values = remainders
        .par_iter()
        .map(|r| free_space_time_norm(r, p, cfg.strichartz_t, cfg.strichartz_panels).map(|s| s.full))
        .collect::<Result<Vec<_>>>()?;

    let size_table = if cfg.size_table {
        Some(size_table(seq, &profiles, &remainders, alpha, cfg)?)
    } else {
        None
    };

    Ok(ProfileDecomposition {
        profiles,
        remainders,
        decoupling_residual: decoupling_residual.max(0.0),
        pairwise_divergence,
        divergence_series,
        piece_counts,
        unmatched_pieces: unmatched,
        remainder_strichartz: Trend::of(&remainder_strichartz_values),
        remainder_strichartz_values,
        size_table,
    })
}

fn size_table(
    seq: &[GridField],
    profiles: &[Profile],
    remainders: &[GridField],
    alpha: f64,
    cfg: &ProfileConfig,
) -> Result<SizeTable> {
    let d = seq[0].dim();
    let r = cfg
        .size_r
        .or_else(|| default_size_r(d, alpha))
        .ok_or_else(|| Error::Assumption(format!("no admissible r for d = {d}, α = {alpha}")))?;
    let spec = MorreySpec::hat(d as f64 * alpha, 2.0, r)?;
    let scfg = SizeFunctionConfig::default();
    let ell = |f: &GridField| -> Result<f64> {
        if f.sup_norm() == 0.0 {
            Ok(0.0)
        } else {
            Ok(size_function(f, &spec, &scfg)?.value)
        }
    };
    let u = seq.par_iter().map(ell).collect::<Result<Vec<_>>>()?;
    let prof = profiles.par_iter().map(|p| ell(&p.profile)).collect::<Result<Vec<_>>>()?;
    let rem = remainders.par_iter().map(ell).collect::<Result<Vec<_>>>()?;
    let psum: f64 = prof.iter().map(|x| x.powf(r)).sum();
    let mut gap = f64::MIN;
    for (un, rn) in u.iter().zip(&rem) {
        let total = un.powf(r);
        if total > 0.0 {
            gap = gap.max((psum + rn.powf(r) - total) / total);
        }
    }
    Ok(SizeTable { r, u, profiles: prof, remainder: rem, gap: if gap == f64::MIN { 0.0 } else { gap } })
}
