//! Duality pairing bound, dyadic averaging projection, and the compactness
//! and almost-periodicity moduli.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dyadic::{cell_scale, conjugate, recip};
use super::{hat_norm, morrey_norm, Mode, MorreySpec};
use crate::error::{Error, Result};
use crate::grid::{DyadicCube, GridField};

/// Sampled sup directions: `±e_a` for every axis plus the main diagonal, at
/// four fractions of the radius. The sup over this set is a lower bound of
/// the true sup.
pub fn sample_offsets(dim: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(2 * dim + 1);
    for a in 0..dim {
        for sgn in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[a] = sgn;
            dirs.push(e);
        }
    }
    dirs.push(vec![1.0 / (dim as f64).sqrt(); dim]);
    let mut out = Vec::with_capacity(dirs.len() * 4);
    for frac in [0.25, 0.5, 0.75, 1.0] {
        for d in &dirs {
            out.push(d.iter().map(|x| x * frac * radius).collect());
        }
    }
    out
}

/// `(‖f 1_{|x|≥C}‖_M, sup_{|z|≤1/C} ‖(T(z)-1)f‖_M)` with the sup sampled.
pub fn compactness_modulus(f: &GridField, spec: &MorreySpec, c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(Error::Config("C must be positive".into()));
    }
    let f = f.to_physical();
    let mut outside = f.clone();
    let mut x = vec![0.0; f.dim()];
    for idx in 0..f.len() {
        f.point_into(idx, &mut x);
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() < c {
            outside.values_mut()[idx] = Complex64::new(0.0, 0.0);
        }
    }
    let tail = morrey_norm(&outside, spec)?.norm;
    let mut shift = 0.0f64;
    for z in sample_offsets(f.dim(), 1.0 / c) {
        let moved = f
            .fourier_multiply(|xi| {
                let ph: f64 = xi.iter().zip(&z).map(|(a, b)| a * b).sum();
                Complex64::from_polar(1.0, -ph)
            })
            .to_physical();
        shift = shift.max(morrey_norm(&moved.sub(&f)?, spec)?.norm);
    }
    Ok((tail, shift))
}

/// `sup_{|w|≤N/C} ‖(e^{iw·(x-y)}-1)u‖_{M̂} + ‖F^{-1}1_{|ξ-z|≥CN}F u‖_{M̂}`
/// with the sup sampled as in [`compactness_modulus`].
pub fn almost_periodicity_residual(
    u: &GridField,
    n_scale: f64,
    y: &[f64],
    z: &[f64],
    c_eta: f64,
    spec: &MorreySpec,
) -> Result<f64> {
    if !(n_scale > 0.0 && c_eta > 0.0) {
        return Err(Error::Config("N and C_eta must be positive".into()));
    }
    let u = u.to_physical();
    let mut sup = 0.0f64;
    for w in sample_offsets(u.dim(), n_scale / c_eta) {
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let phase = Complex64::from_polar(1.0, -w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>());
        let moved = u.modulate(&neg).scaled(phase);
        sup = sup.max(hat_norm(&moved.sub(&u)?, spec)?);
    }
    let radius = c_eta * n_scale;
    let far = u.fourier_multiply(|xi| {
        let d2: f64 = xi.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2.sqrt() >= radius {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(sup + hat_norm(&far, spec)?)
}

/// Cell averages over the cubes of side `2^{-j1}` inside
/// `D_0 = [-2^{-j0}, 2^{-j0})^d`, zero outside `D_0`.
pub fn dyadic_average_projection(f: &GridField, j0: i32, j1: i32) -> Result<GridField> {
    if j1 < j0 {
        return Err(Error::Config(format!("need j1 ≥ j0, got j0 = {j0}, j1 = {j1}")));
    }
    let f = f.to_physical();
    let jc = cell_scale(&f)?;
    if j1 > jc {
        return Err(Error::Config(format!(
            "cube side 2^{} is smaller than the grid spacing 2^{}",
            -j1, -jc
        )));
    }
    let d = f.dim();
    let half = (2f64).powi(-j0);
    let inv = (2f64).powi(j1);
    let mut sums: std::collections::BTreeMap<Vec<i64>, (Complex64, usize)> = Default::default();
    let mut keys = vec![None; f.len()];
    let mut x = vec![0.0; d];
    for (idx, z) in f.values().iter().enumerate() {
        f.point_into(idx, &mut x);
        if x.iter().all(|&v| v >= -half && v < half) {
            let k: Vec<i64> = x.iter().map(|&v| (v * inv).floor() as i64).collect();
            let e = sums.entry(k.clone()).or_insert((Complex64::new(0.0, 0.0), 0));
            e.0 += z;
            e.1 += 1;
            keys[idx] = Some(k);
        }
    }
    let vals = keys
        .into_iter()
        .map(|k| match k {
            Some(k) => {
                let (s, c) = sums[&k];
                s / c as f64
            }
            None => Complex64::new(0.0, 0.0),
        })
        .collect();
    Ok(f.with_values(vals))
}

#[derive(Clone, Debug)]
pub struct Block {
    pub lambda: Complex64,
    pub cube: DyadicCube,
    pub a: GridField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Blocks whose `L^{q'}` norm exceeded the block bound and were scaled down.
    pub renormalized: usize,
}

/// Checks `|∫ f g| ≤ ‖f‖_{M^p_{q,r}} ‖λ‖_{ℓ^{r'}}` for `g = Σ λ_j A_j`.
pub fn duality_pairing_check(f: &GridField, blocks: &[Block], spec: &MorreySpec) -> Result<PairingCheck> {
    if spec.mode != Mode::Morrey {
        return Err(Error::Config("pairing check needs a Morrey-mode spec".into()));
    }
    let f = f.to_physical();
    let jc = cell_scale(&f)?;
    let (p, q) = (spec.p, spec.q);
    let (pc, qc) = (conjugate(p), conjugate(q));
    let mut seen = BTreeSet::new();
    let mut g = GridField::zeros(f.dim(), f.n_per_axis(), f.extent(), f.space())?;
    let mut renormalized = 0;
    let mut x = vec![0.0; f.dim()];
    for b in blocks {
        if !seen.insert(b.cube.clone()) {
            return Err(Error::Validation(format!("block cube {:?} appears twice", b.cube)));
        }
        if b.cube.j > jc {
            return Err(Error::Validation(format!("block cube {:?} is finer than a grid cell", b.cube)));
        }
        let a = b.a.to_physical();
        if !a.same_grid(&f) {
            return Err(Error::Validation("block lives on a different grid".into()));
        }
        let peak = a.sup_norm();
        for (idx, z) in a.values().iter().enumerate() {
            a.point_into(idx, &mut x);
            if !b.cube.contains(&x) && z.norm() > 1e-12 * peak {
                return Err(Error::Validation(format!("block escapes its cube {:?}", b.cube)));
            }
        }
        let mut a = a.restrict_physical(&b.cube);
        let bound = b.cube.volume().powf(recip(qc) - recip(pc));
        let norm = a.lp_norm(qc);
        if norm > bound {
            a = a.scaled(Complex64::new(bound / norm, 0.0));
            renormalized += 1;
        }
        g = g.add(&a.scaled(b.lambda))?;
    }
    let pairing: Complex64 = f.values().iter().zip(g.values()).map(|(u, v)| u * v).sum();
    let lhs = pairing.norm() * f.cell_volume();
    let rc = conjugate(spec.r);
    let lam = if rc.is_infinite() {
        blocks.iter().map(|b| b.lambda.norm()).fold(0.0, f64::max)
    } else {
        blocks.iter().map(|b| b.lambda.norm().powf(rc)).sum::<f64>().powf(1.0 / rc)
    };
    let rhs = morrey_norm(&f, spec)?.norm * lam;
    Ok(PairingCheck { lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-9), renormalized })
}

impl GridField {
    /// Zeroes physical samples outside `cube`.
    pub fn restrict_physical(&self, cube: &DyadicCube) -> GridField {
        let f = self.to_physical();
        let mut out = f.clone();
        let mut x = vec![0.0; f.dim()];
        for idx in 0..f.len() {
            f.point_into(idx, &mut x);
            if !cube.contains(&x) {
                out.values_mut()[idx] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }
}
