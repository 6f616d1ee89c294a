//! Exact all-scale dyadic sums for fields that are piecewise constant on
//! their grid cells.
//!
//! Sample `c` (signed index per axis) owns the half-open cell
//! `[cδ, (c+1)δ)^d` with `δ = 2^{-jc}`. Cubes between the cell scale and the
//! half-box scale are enumerated by a summation pyramid. Finer cubes see a
//! constant value, coarser cubes see fixed orthant masses, so both tails are
//! geometric series.

use crate::error::{Error, Result};
use crate::grid::{exact_log2, DyadicCube, GridField, Space};

pub(crate) fn recip(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// Hölder conjugate, with `1' = ∞` and `∞' = 1`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Cell spacing exponent `jc` with `δ = 2^{-jc}` for the field's current
/// representation, or a misalignment error.
pub fn cell_scale(f: &GridField) -> Result<i32> {
    let delta = match f.space() {
        Space::Physical => f.dx(),
        Space::Fourier => f.dxi(),
    };
    let e = delta.log2().round() as i32;
    if ((2f64).powi(e) - delta).abs() > 1e-12 * delta {
        let hint = match f.space() {
            Space::Physical => "choose L so that 2L/n is a power of two",
            Space::Fourier => "choose L = π·2^m",
        };
        return Err(Error::Misaligned(format!("cell spacing {delta} is not a power of two ({hint})")));
    }
    debug_assert!(exact_log2((2f64).powi(e)).is_some());
    Ok(-e)
}

/// Summation pyramid of local `L^Q` masses.
#[derive(Clone, Debug)]
pub struct CellPyramid {
    pub dim: usize,
    pub n: usize,
    /// cell scale
    pub jc: i32,
    pub q: f64,
    /// `|g|` per cell, centred order (index `c + n/2` per axis).
    pub mags: Vec<f64>,
    /// `levels[l]`: per cube at scale `jc - l`, `Σ|g|^Q δ^d` (or the max when
    /// `Q = ∞`), centred order with `n >> l` cubes per axis.
    pub levels: Vec<Vec<f64>>,
}

impl CellPyramid {
    pub fn build(f: &GridField, q: f64) -> Result<Self> {
        let jc = cell_scale(f)?;
        let dim = f.dim();
        let n = f.n_per_axis();
        let mut mags = vec![0.0; f.len()];
        let mut mi = vec![0usize; dim];
        let half = (n / 2) as i64;
        for (idx, z) in f.values().iter().enumerate() {
            f.multi_index(idx, &mut mi);
            let c = mi
                .iter()
                .fold(0usize, |acc, &i| acc * n + (f.signed_index(i) + half) as usize);
            mags[c] = z.norm();
        }
        let vol = (2f64).powi(-jc * dim as i32);
        let base: Vec<f64> = if q.is_infinite() {
            mags.clone()
        } else {
            mags.iter().map(|m| m.powf(q) * vol).collect()
        };
        let top = n.trailing_zeros() as usize - 1;
        let mut levels = vec![base];
        for l in 1..=top {
            let prev = &levels[l - 1];
            let np = n >> (l - 1);
            let nc = np / 2;
            let mut next = vec![0.0f64; nc.pow(dim as u32)];
            let mut pi = vec![0usize; dim];
            for (idx, &m) in prev.iter().enumerate() {
                let mut t = idx;
                for a in (0..dim).rev() {
                    pi[a] = t % np;
                    t /= np;
                }
                let c = pi.iter().fold(0usize, |acc, &i| acc * nc + i / 2);
                if q.is_infinite() {
                    next[c] = next[c].max(m);
                } else {
                    next[c] += m;
                }
            }
            levels.push(next);
        }
        Ok(Self { dim, n, jc, q, mags, levels })
    }

    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.mags.iter().all(|&m| m == 0.0)
    }

    fn cube_volume(&self, l: i64) -> f64 {
        (2f64).powf(((l - self.jc as i64) * self.dim as i64) as f64)
    }

    /// Normalized local mass `|τ|^{1/P-1/Q} ‖g‖_{L^Q(τ)}` from a stored mass.
    pub fn weight(&self, l: usize, mass: f64, p: f64) -> f64 {
        let vol = self.cube_volume(l as i64);
        if self.q.is_infinite() {
            vol.powf(recip(p)) * mass
        } else {
            vol.powf(recip(p) - 1.0 / self.q) * mass.powf(1.0 / self.q)
        }
    }

    /// `Σ_τ w(τ)^r` (or `max_τ w(τ)` for `r = ∞`) at pyramid level `l`.
    pub fn level_term(&self, l: usize, p: f64, r: f64) -> f64 {
        let it = self.levels[l].iter().map(|&m| self.weight(l, m, p));
        if r.is_infinite() {
            it.fold(0.0, f64::max)
        } else {
            it.map(|w| w.powf(r)).sum()
        }
    }

    /// Term at an arbitrary scale `j`: `Σ w^r`, or `max w` when `r = ∞`.
    pub fn term_at(&self, j: i32, p: f64, r: f64) -> f64 {
        let l = self.jc as i64 - j as i64;
        let top = self.top_level() as i64;
        let d = self.dim as f64;
        if r.is_infinite() {
            return if l < 0 {
                self.level_term(0, p, r) * (2f64).powf(-d * recip(p) * (-l) as f64)
            } else if l > top {
                let e = d * (1.0 / self.q - recip(p));
                self.level_term(top as usize, p, r) * (2f64).powf(-e * (l - top) as f64)
            } else {
                self.level_term(l as usize, p, r)
            };
        }
        if l < 0 {
            let sr: f64 = self.mags.iter().map(|m| m.powf(r)).sum();
            let delta_pow = (2f64).powf(-(self.jc as f64) * d * r * recip(p));
            sr * delta_pow * (2f64).powf(d * (1.0 - r * recip(p)) * (-l) as f64)
        } else if l > top {
            let e = d * r * (1.0 / self.q - recip(p));
            self.level_term(top as usize, p, r) * (2f64).powf(-e * (l - top) as f64)
        } else {
            self.level_term(l as usize, p, r)
        }
    }

    fn fine_ratio(&self, p: f64, r: f64) -> f64 {
        (2f64).powf(self.dim as f64 * (1.0 - r * recip(p)))
    }

    fn coarse_ratio(&self, p: f64, r: f64) -> f64 {
        (2f64).powf(-(self.dim as f64) * r * (1.0 / self.q - recip(p)))
    }

    /// Geometric tail sums `(fine, coarse)` beyond `extra_fine` scales finer
    /// than the cell and `extra_coarse` scales coarser than the half box.
    pub fn tails(&self, p: f64, r: f64, extra_fine: u32, extra_coarse: u32) -> (f64, f64) {
        let rf = self.fine_ratio(p, r);
        let rc = self.coarse_ratio(p, r);
        let f0 = self.term_at(self.jc + 1, p, r) / rf;
        let c0 = self.level_term(self.top_level(), p, r);
        let fine = f0 * rf.powi(extra_fine as i32 + 1) / (1.0 - rf);
        let coarse = c0 * rc.powi(extra_coarse as i32 + 1) / (1.0 - rc);
        (fine, coarse)
    }

    /// The full sum over all `j ∈ ℤ` (r-th power), or the sup for `r = ∞`.
    pub fn total(&self, p: f64, r: f64) -> f64 {
        if r.is_infinite() {
            return (0..=self.top_level())
                .map(|l| self.level_term(l, p, r))
                .fold(0.0, f64::max);
        }
        let inner: f64 = (0..=self.top_level()).map(|l| self.level_term(l, p, r)).sum();
        let (fine, coarse) = self.tails(p, r, 0, 0);
        inner + fine + coarse
    }

    /// Partial sum over `j ∈ [j_min, j_max]` (max for `r = ∞`).
    pub fn windowed(&self, p: f64, r: f64, j_min: i32, j_max: i32) -> f64 {
        let terms = (j_min..=j_max).map(|j| self.term_at(j, p, r));
        if r.is_infinite() {
            terms.fold(0.0, f64::max)
        } else {
            terms.sum()
        }
    }

    /// Centred cube index range covered by level `l`.
    pub fn level_side(&self, l: usize) -> usize {
        self.n >> l
    }

    /// Dyadic cube for flat centred index `idx` at level `l`.
    pub fn cube_of(&self, l: usize, idx: usize) -> DyadicCube {
        let side = self.level_side(l);
        let half = (side / 2) as i64;
        let mut k = vec![0i64; self.dim];
        let mut t = idx;
        for a in (0..self.dim).rev() {
            k[a] = (t % side) as i64 - half;
            t /= side;
        }
        DyadicCube::new(self.jc - l as i32, k)
    }
}
