//! The size function `ℓ_r(f) = inf_ξ ‖e^{-ix·ξ} f‖_{M̂^{dα}_{2,r}}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{hat_norm, Mode, MorreySpec};
use crate::error::{Error, Result};
use crate::grid::GridField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeFunctionConfig {
    pub xi_search_radius: f64,
    pub coarse_grid_points: usize,
    pub refine_iters: usize,
    pub refine_tol: f64,
}

impl Default for SizeFunctionConfig {
    fn default() -> Self {
        Self { xi_search_radius: 4.0, coarse_grid_points: 33, refine_iters: 3, refine_tol: 1e-7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeResult {
    pub value: f64,
    pub xi_star: Vec<f64>,
    /// The search radius is smaller than the width of the visible spectrum.
    pub radius_warning: bool,
    /// Off-lattice refinement was skipped because the field does not decay
    /// at the box edge.
    pub lattice_only: bool,
    pub evaluations: usize,
}

const STARTS: usize = 4;
const DECAY_TOL: f64 = 1e-8;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

struct Objective<'a> {
    f: &'a GridField,
    fhat: GridField,
    spec: MorreySpec,
    evals: usize,
}

impl Objective<'_> {
    /// Exact spectral shift by an integer lattice vector.
    fn lattice(&mut self, m: &[i64]) -> Result<f64> {
        self.evals += 1;
        let g = &self.fhat;
        let d = g.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        let mut mi = vec![0usize; d];
        let mut mj = vec![0usize; d];
        'outer: for (idx, slot) in out.iter_mut().enumerate() {
            g.multi_index(idx, &mut mi);
            for a in 0..d {
                // new(η) = old(η + ξ)
                let s = g.signed_index(mi[a]) + m[a];
                match g.storage_index(s) {
                    Some(j) => mj[a] = j,
                    None => continue 'outer,
                }
            }
            *slot = g.values()[g.flat_index(&mj)];
        }
        hat_norm(&g.with_values(out), &self.spec)
    }

    fn continuous(&mut self, xi: &[f64]) -> Result<f64> {
        self.evals += 1;
        hat_norm(&self.f.modulate(xi), &self.spec)
    }
}

fn spectral_width(fhat: &GridField) -> f64 {
    let peak = fhat.sup_norm();
    if peak == 0.0 {
        return 0.0;
    }
    let d = fhat.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut xi = vec![0.0; d];
    for (idx, z) in fhat.values().iter().enumerate() {
        if z.norm() >= 1e-3 * peak {
            fhat.point_into(idx, &mut xi);
            for a in 0..d {
                lo[a] = lo[a].min(xi[a]);
                hi[a] = hi[a].max(xi[a] + fhat.dxi());
            }
        }
    }
    (0..d).map(|a| hi[a] - lo[a]).fold(0.0, f64::max)
}

/// Multi-start coarse search on the frequency lattice followed by
/// coordinate-wise golden-section refinement. Off-lattice boosts are applied
/// as physical phase multiplication, which is only trusted when the field has
/// decayed at the box edge; otherwise refinement stays on the lattice.
pub fn size_function(f: &GridField, spec: &MorreySpec, cfg: &SizeFunctionConfig) -> Result<SizeResult> {
    if spec.mode != Mode::Hat || spec.q != 2.0 {
        return Err(Error::Config("size function needs a hat-mode spec with q = 2".into()));
    }
    if !(cfg.xi_search_radius > 0.0 && cfg.refine_tol > 0.0) {
        return Err(Error::Config("search radius and refine_tol must be positive".into()));
    }
    let d = f.dim();
    let fhat = f.to_fourier();
    if fhat.sup_norm() == 0.0 {
        return Ok(SizeResult {
            value: 0.0,
            xi_star: vec![0.0; d],
            radius_warning: false,
            lattice_only: false,
            evaluations: 0,
        });
    }
    let dxi = fhat.dxi();
    let radius_warning = cfg.xi_search_radius < spectral_width(&fhat);
    let lattice_only = f.boundary_ratio() > DECAY_TOL;
    let mut obj = Objective { f, fhat, spec: *spec, evals: 0 };

    let pts = cfg.coarse_grid_points.max(2);
    let want = 2.0 * cfg.xi_search_radius / (pts - 1) as f64;
    let stride = ((want / dxi).ceil() as i64).max(1);
    let half = ((cfg.xi_search_radius / dxi) / stride as f64).floor() as i64;
    let side = (2 * half + 1) as usize;

    let mut coarse: Vec<(f64, Vec<i64>)> = Vec::with_capacity(side.pow(d as u32));
    let mut m = vec![0i64; d];
    for flat in 0..side.pow(d as u32) {
        let mut t = flat;
        for a in (0..d).rev() {
            m[a] = ((t % side) as i64 - half) * stride;
            t /= side;
        }
        let v = obj.lattice(&m)?;
        coarse.push((v, m.clone()));
    }
    coarse.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut best_val = f64::INFINITY;
    let mut best_xi = vec![0.0; d];
    for (v0, m0) in coarse.iter().take(STARTS) {
        let (v, xi) = if lattice_only {
            lattice_descent(&mut obj, m0.clone(), *v0, stride, cfg.refine_iters)?
        } else {
            let x0: Vec<f64> = m0.iter().map(|&k| k as f64 * dxi).collect();
            golden_refine(&mut obj, x0, *v0, stride as f64 * dxi, cfg)?
        };
        if v < best_val {
            best_val = v;
            best_xi = xi;
        }
    }
    Ok(SizeResult {
        value: best_val,
        xi_star: best_xi,
        radius_warning,
        lattice_only,
        evaluations: obj.evals,
    })
}

fn lattice_descent(
    obj: &mut Objective,
    mut m: Vec<i64>,
    mut val: f64,
    stride: i64,
    sweeps: usize,
) -> Result<(f64, Vec<f64>)> {
    let dxi = obj.fhat.dxi();
    for _ in 0..sweeps.max(1) {
        let mut moved = false;
        for a in 0..m.len() {
            let centre = m[a];
            for off in -stride..=stride {
                if off == 0 {
                    continue;
                }
                let mut t = m.clone();
                t[a] = centre + off;
                let v = obj.lattice(&t)?;
                if v < val {
                    val = v;
                    m = t;
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    Ok((val, m.iter().map(|&k| k as f64 * dxi).collect()))
}

fn golden_refine(
    obj: &mut Objective,
    mut x: Vec<f64>,
    mut val: f64,
    bracket: f64,
    cfg: &SizeFunctionConfig,
) -> Result<(f64, Vec<f64>)> {
    for _ in 0..cfg.refine_iters.max(1) {
        let before = val;
        for a in 0..x.len() {
            let (mut lo, mut hi) = (x[a] - bracket, x[a] + bracket);
            let mut probe = x.clone();
            let eval = |t: f64, probe: &mut Vec<f64>, obj: &mut Objective| {
                probe[a] = t;
                obj.continuous(probe)
            };
            let mut c = hi - INV_PHI * (hi - lo);
            let mut e = lo + INV_PHI * (hi - lo);
            let mut fc = eval(c, &mut probe, obj)?;
            let mut fe = eval(e, &mut probe, obj)?;
            while hi - lo > cfg.refine_tol {
                if fc < fe {
                    hi = e;
                    e = c;
                    fe = fc;
                    c = hi - INV_PHI * (hi - lo);
                    fc = eval(c, &mut probe, obj)?;
                } else {
                    lo = c;
                    c = e;
                    fc = fe;
                    e = lo + INV_PHI * (hi - lo);
                    fe = eval(e, &mut probe, obj)?;
                }
            }
            let (t, ft) = if fc < fe { (c, fc) } else { (e, fe) };
            if ft < val {
                val = ft;
                x[a] = t;
            }
        }
        if before - val <= cfg.refine_tol * val {
            break;
        }
    }
    Ok((val, x))
}
