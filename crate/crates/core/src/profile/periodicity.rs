//! Concentration lower bound and almost-periodicity parameters `N, y, z`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decompose::{profile_decompose, renormalize, ProfileConfig};
use super::greedy::{greedy_scale_decomposition, greedy_spec, GreedyConfig};
use crate::error::{Error, Result};
use crate::evolution::{free_propagate, free_space_time_norm, Trajectory};
use crate::grid::GridField;
use crate::spaces::size::{size_function, SizeFunctionConfig};
use crate::spaces::{almost_periodicity_residual, hat_norm, MorreySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    /// `min_n S_ℝ(e^{itΔ}u_n)`.
    pub m: f64,
    /// `max_n ‖u_n‖`.
    pub big_m: f64,
    /// `½ (m^p / M^r)^{1/(p-r)}`, `p = (d+2)α`.
    pub beta_shape: f64,
    pub max_profile_size: f64,
    pub profiles: usize,
    /// `m = 0`, or some profile has positive size.
    pub consistent: bool,
}

/// `½ (m^p / M^r)^{1/(p-r)}`.
pub fn beta_shape(m: f64, big_m: f64, p: f64, r: f64) -> f64 {
    if m == 0.0 || big_m == 0.0 {
        return 0.0;
    }
    0.5 * (m.powf(p) / big_m.powf(r)).powf(1.0 / (p - r))
}

/// Compares the lower-bound shape with the largest extracted profile;
/// `spec` is the state space `M̂^{dα}_{2,r}`.
pub fn eta_lower_bound(
    seq: &[GridField],
    spec: &MorreySpec,
    alpha: f64,
    eps: f64,
    cfg: &ProfileConfig,
) -> Result<EtaReport> {
    if seq.is_empty() {
        return Err(Error::InsufficientData("empty sequence".into()));
    }
    let d = seq[0].dim();
    let p = (d as f64 + 2.0) * alpha;
    let ss = seq
        .par_iter()
        .map(|u| free_space_time_norm(u, p, cfg.strichartz_t, cfg.strichartz_panels).map(|s| s.full))
        .collect::<Result<Vec<_>>>()?;
    let m = ss.iter().copied().fold(f64::INFINITY, f64::min);
    let big_m = seq.iter().map(|u| hat_norm(u, spec)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let beta = beta_shape(m, big_m, p, spec.r);
    if m == 0.0 {
        return Ok(EtaReport { m, big_m, beta_shape: beta, max_profile_size: 0.0, profiles: 0, consistent: true });
    }
    let gspec = greedy_spec(d, alpha)?;
    let dec = profile_decompose(seq, eps, &gspec, alpha, &ProfileConfig { size_table: false, ..cfg.clone() })?;
    let scfg = SizeFunctionConfig::default();
    let mut best = 0.0f64;
    for pr in &dec.profiles {
        best = best.max(size_function(&pr.profile, spec, &scfg)?.value);
    }
    Ok(EtaReport {
        m,
        big_m,
        beta_shape: beta,
        max_profile_size: best,
        profiles: dec.profiles.len(),
        consistent: best > 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityConfig {
    pub greedy: GreedyConfig,
    /// Window and panels for `S_ℝ`.
    pub strichartz_t: f64,
    pub strichartz_panels: usize,
    /// Space-time tiles cover `t ∈ [-tile_t, tile_t)`.
    pub tile_t: i64,
    /// Simpson panels per unit time inside a tile (even).
    pub tile_panels: usize,
}

impl Default for PeriodicityConfig {
    fn default() -> Self {
        Self { greedy: GreedyConfig::default(), strichartz_t: 4.0, strichartz_panels: 64, tile_t: 2, tile_panels: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityParams {
    /// Dyadic scale `λ` of the selected cube `λ([0,1)^d + b)`.
    pub lambda: f64,
    pub b: Vec<i64>,
    /// Spatial centre of the heaviest unit tile, in the renormalized frame.
    pub a: Vec<f64>,
    pub tile_time: i64,
    /// `∫∫_{Q_k0} |e^{itΔ}g|^p`.
    pub tile_mass: f64,
    /// `S_ℝ(e^{itΔ}f^{m0})` and the floor `δ/(2M)` it had to clear.
    pub piece_strichartz: f64,
    pub floor: f64,
    pub pieces: usize,
}

impl PeriodicityParams {
    /// `(N, y, z) = (λ, a/λ, λb)`.
    pub fn nyz(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let y = self.a.iter().map(|a| a / self.lambda).collect();
        let z = self.b.iter().map(|&b| self.lambda * b as f64).collect();
        (self.lambda, y, z)
    }
}

fn tile_masses(g: &GridField, p: f64, cfg: &PeriodicityConfig) -> Result<BTreeMap<(i64, Vec<i64>), f64>> {
    if cfg.tile_panels < 2 || cfg.tile_panels % 2 == 1 || cfg.tile_t < 1 {
        return Err(Error::Config("tiles need tile_t ≥ 1 and an even panel count".into()));
    }
    let gh = g.to_fourier();
    let m = cfg.tile_panels;
    let h = 1.0 / m as f64;
    let cell = g.cell_volume();
    let mut out: BTreeMap<(i64, Vec<i64>), f64> = BTreeMap::new();
    let mut x = vec![0.0; g.dim()];
    for ti in -cfg.tile_t..cfg.tile_t {
        for k in 0..=m {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            let v = free_propagate(&gh, ti as f64 + k as f64 * h).to_physical();
            for (i, z) in v.values().iter().enumerate() {
                let a = z.norm();
                if a == 0.0 {
                    continue;
                }
                v.point_into(i, &mut x);
                let key: Vec<i64> = x.iter().map(|v| v.floor() as i64).collect();
                *out.entry((ti, key)).or_insert(0.0) += w * a.powf(p) * cell;
            }
        }
    }
    Ok(out)
}

/// Scale, frequency and spatial centre of the concentrating part of `u`;
/// `spec` is the state space, its `p` fixes `α = p/d`.
pub fn almost_periodicity_params(u: &GridField, delta: f64, spec: &MorreySpec, cfg: &PeriodicityConfig) -> Result<PeriodicityParams> {
    let d = u.dim();
    let alpha = spec.p / d as f64;
    let p = (d as f64 + 2.0) * alpha;
    let s = free_space_time_norm(u, p, cfg.strichartz_t, cfg.strichartz_panels)?.full;
    if s < delta {
        return Err(Error::Extraction(format!("S(e^(itΔ)u) = {s:.3e} is below δ = {delta}")));
    }
    let gspec = greedy_spec(d, alpha)?;
    let dec = greedy_scale_decomposition(u, delta / 3.0, &gspec, &cfg.greedy)?;
    let count = dec.pieces.len();
    if count == 0 {
        return Err(Error::Extraction("the greedy step returned no pieces".into()));
    }
    let floor = delta / (2.0 * count as f64);
    let strich = dec
        .pieces
        .par_iter()
        .map(|pc| free_space_time_norm(&pc.field, p, cfg.strichartz_t, cfg.strichartz_panels).map(|s| s.full))
        .collect::<Result<Vec<_>>>()?;
    let mut pick: Option<usize> = None;
    for (i, pc) in dec.pieces.iter().enumerate() {
        if strich[i] < floor {
            continue;
        }
        pick = match pick {
            None => Some(i),
            Some(j) => {
                let other = &dec.pieces[j];
                if pc.local_mass > other.local_mass || (pc.local_mass == other.local_mass && pc.cube.k < other.cube.k) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    let i0 = pick.ok_or_else(|| {
        Error::Extraction(format!(
            "no piece reaches the floor δ/(2M) = {floor:.3e}; piece norms {:?}",
            strich.iter().map(|s| format!("{s:.2e}")).collect::<Vec<_>>()
        ))
    })?;
    let piece = &dec.pieces[i0];
    let g = renormalize(&piece.field, &piece.cube, alpha);
    let tiles = tile_masses(&g, p, cfg)?;
    let ((ti, key), mass) = tiles
        .iter()
        .fold(None::<(&(i64, Vec<i64>), f64)>, |best, (k, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        })
        .ok_or_else(|| Error::Extraction("the renormalized piece vanished".into()))?;
    Ok(PeriodicityParams {
        lambda: piece.cube.side(),
        b: piece.cube.k.clone(),
        a: key.iter().map(|&k| k as f64 + 0.5).collect(),
        tile_time: *ti,
        tile_mass: mass,
        piece_strichartz: strich[i0],
        floor,
        pieces: count,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityRow {
    pub t: f64,
    pub n_scale: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub residual: f64,
    pub below_eta: bool,
}

/// Runs [`almost_periodicity_params`] and the residual diagnostic on every
/// snapshot.
pub fn track_almost_periodicity(
    traj: &Trajectory,
    delta: f64,
    eta: f64,
    c_eta: f64,
    spec: &MorreySpec,
    cfg: &PeriodicityConfig,
) -> Result<Vec<PeriodicityRow>> {
    traj.times
        .par_iter()
        .zip(traj.fields.par_iter())
        .map(|(&t, u)| {
            let prm = almost_periodicity_params(u, delta, spec, cfg)?;
            let (n_scale, y, z) = prm.nyz();
            let residual = almost_periodicity_residual(u, n_scale, &y, &z, c_eta, spec)?;
            Ok(PeriodicityRow { t, n_scale, y, z, residual, below_eta: residual <= eta })
        })
        .collect()
}
