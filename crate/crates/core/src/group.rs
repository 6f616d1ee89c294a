//! The deformation group `e^{iθ} D(h) P(b) U(s) T(a)`.
//!
//! `D(h)f = h^{1/α} f(hx)`, `P(b)f = e^{-ix·b} f`, `U(s) = e^{isΔ}`,
//! `T(a)f = f(· - a)`. `h = 2^m` is stored as the integer `m`, which makes
//! `D(h)` sample-exact: the samples stay, the box half-width becomes `L/h`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridField, Space};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deformation {
    pub theta: f64,
    /// `h = 2^m`
    pub m: i32,
    pub b: Vec<f64>,
    pub s: f64,
    pub a: Vec<f64>,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

impl Deformation {
    pub fn identity(dim: usize) -> Self {
        Self { theta: 0.0, m: 0, b: vec![0.0; dim], s: 0.0, a: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn h(&self) -> f64 {
        (2f64).powi(self.m)
    }

    pub fn dilation(dim: usize, m: i32) -> Self {
        Self { m, ..Self::identity(dim) }
    }
    pub fn boost(b: Vec<f64>) -> Self {
        let d = b.len();
        Self { b, ..Self::identity(d) }
    }
    pub fn flow(dim: usize, s: f64) -> Self {
        Self { s, ..Self::identity(dim) }
    }
    pub fn shift(a: Vec<f64>) -> Self {
        let d = a.len();
        Self { a, ..Self::identity(d) }
    }

    /// Phase wrapped into `(-π, π]`.
    pub fn normalized(&self) -> Self {
        Self { theta: wrap_phase(self.theta), ..self.clone() }
    }

    /// Equality of all parameters, phase modulo 2π.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= tol);
        self.m == other.m
            && wrap_phase(self.theta - other.theta).abs() <= tol
            && close(&self.b, &other.b)
            && (self.s - other.s).abs() <= tol
            && close(&self.a, &other.a)
    }

    /// `|log h| + |b| + |s| + |a|`.
    pub fn magnitude(&self) -> f64 {
        (self.m as f64 * std::f64::consts::LN_2).abs() + norm(&self.b) + self.s.abs() + norm(&self.a)
    }
}

/// Product `G1 ∘ G2` in normal representation.
pub fn compose(g1: &Deformation, g2: &Deformation) -> Deformation {
    let h2 = g2.h();
    let big_a: Vec<f64> = g1.a.iter().map(|x| h2 * x).collect();
    let big_s = h2 * h2 * g1.s;
    let theta = g1.theta + g2.theta + dot(&big_a, &g2.b) - big_s * dot(&g2.b, &g2.b);
    let b = g1.b.iter().zip(&g2.b).map(|(b1, b2)| b1 / h2 + b2).collect();
    let a = big_a
        .iter()
        .zip(&g2.b)
        .zip(&g2.a)
        .map(|((aa, b2), a2)| aa - 2.0 * big_s * b2 + a2)
        .collect();
    Deformation { theta, m: g1.m + g2.m, b, s: big_s + g2.s, a }
}

/// `G^{-1} = e^{i(-θ + a·b + s|b|²)} D(h^{-1}) P(-hb) U(-s/h²) T(-(a+2sb)/h)`.
pub fn invert(g: &Deformation) -> Deformation {
    let h = g.h();
    Deformation {
        theta: -g.theta + dot(&g.a, &g.b) + g.s * dot(&g.b, &g.b),
        m: -g.m,
        b: g.b.iter().map(|b| -h * b).collect(),
        s: -g.s / (h * h),
        a: g.a.iter().zip(&g.b).map(|(a, b)| -(a + 2.0 * g.s * b) / h).collect(),
    }
}

/// Fraction of spectral L² mass within the outer tenth of the band.
fn band_edge_fraction(f: &GridField) -> f64 {
    let g = f.to_fourier();
    let edge = 0.9 * g.nyquist();
    let mut outer = 0.0;
    let mut total = 0.0;
    let mut xi = vec![0.0; g.dim()];
    for (idx, z) in g.values().iter().enumerate() {
        g.point_into(idx, &mut xi);
        let m = z.norm_sqr();
        total += m;
        if xi.iter().any(|v| v.abs() >= edge) {
            outer += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (outer / total).sqrt()
    }
}

pub fn apply_shift(f: &GridField, a: &[f64]) -> GridField {
    if a.iter().all(|&x| x == 0.0) {
        return f.clone();
    }
    f.fourier_multiply(|xi| Complex64::from_polar(1.0, -dot(a, xi)))
}

pub fn apply_flow(f: &GridField, s: f64) -> GridField {
    if s == 0.0 {
        return f.clone();
    }
    f.fourier_multiply(|xi| Complex64::from_polar(1.0, -s * dot(xi, xi)))
}

pub fn apply_boost(f: &GridField, b: &[f64]) -> Result<GridField> {
    if b.iter().all(|&x| x == 0.0) {
        return Ok(f.clone());
    }
    let before = band_edge_fraction(f);
    let g = f.modulate(b);
    let after = band_edge_fraction(&g);
    if after > 1e-6 && after > 2.0 * before {
        return Err(Error::BandOverflow(format!(
            "boost {b:?} pushes {after:.2e} of the spectrum into the band edge"
        )));
    }
    Ok(g)
}

/// `D(2^m)`: same samples on a box of half-width `L/h`, amplitude `h^{1/α}`
/// (`h^{1/α-d}` on Fourier samples).
pub fn apply_dilation(f: &GridField, m: i32, alpha: f64) -> GridField {
    if m == 0 {
        return f.clone();
    }
    let h = (2f64).powi(m);
    let amp = match f.space() {
        Space::Physical => h.powf(1.0 / alpha),
        Space::Fourier => h.powf(1.0 / alpha - f.dim() as f64),
    };
    f.scaled(Complex64::new(amp, 0.0)).with_extent(f.extent() / h)
}

/// Applies `G` right to left: `T(a)`, `U(s)`, `P(b)`, `D(h)`, phase.
pub fn apply(g: &Deformation, f: &GridField, alpha: f64) -> Result<GridField> {
    if g.dim() != f.dim() || g.a.len() != f.dim() {
        return Err(Error::Config("deformation and field dimensions differ".into()));
    }
    let space = f.space();
    let mut u = apply_shift(f, &g.a);
    u = apply_flow(&u, g.s);
    u = apply_boost(&u, &g.b)?;
    u = apply_dilation(&u, g.m, alpha);
    if g.theta != 0.0 {
        u = u.scaled(Complex64::from_polar(1.0, g.theta));
    }
    Ok(u.to_space(space))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDivergence {
    pub scale_gap: f64,
    pub boost_gap: f64,
    pub time_gap: f64,
    pub shift_gap: f64,
    pub total: f64,
}

/// Relative parameter magnitudes of two deformations; these are the
/// parameters of `G2^{-1} ∘ G1`.
pub fn orthogonality_divergence(g1: &Deformation, g2: &Deformation) -> FamilyDivergence {
    let ratio = (2f64).powi(g1.m - g2.m);
    let db: Vec<f64> = g1.b.iter().zip(&g2.b).map(|(b1, b2)| b1 - b2 / ratio).collect();
    let scale_gap = ((g1.m - g2.m) as f64 * std::f64::consts::LN_2).abs();
    let boost_gap = norm(&db);
    let time_gap = (g1.s - ratio * ratio * g2.s).abs();
    let shift: Vec<f64> = g1
        .a
        .iter()
        .zip(&g2.a)
        .zip(&db)
        .map(|((a1, a2), d)| a1 - ratio * a2 + 2.0 * ratio * ratio * g2.s * d)
        .collect();
    let shift_gap = norm(&shift);
    FamilyDivergence {
        scale_gap,
        boost_gap,
        time_gap,
        shift_gap,
        total: scale_gap + boost_gap + time_gap + shift_gap,
    }
}

/// Finite-data vanishing heuristic: the magnitude `|log h| + |b| + |s| + |a|`
/// increases strictly over the last third of the list and has grown by at
/// least 10 units from the first entry.
pub fn is_vanishing_trajectory(params: &[Deformation]) -> Result<bool> {
    if params.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 deformations, got {}", params.len())));
    }
    let mags: Vec<f64> = params.iter().map(Deformation::magnitude).collect();
    let start = mags.len() - (mags.len() / 3).max(2);
    let increasing = mags[start..].windows(2).all(|w| w[1] > w[0]);
    Ok(increasing && mags[mags.len() - 1] - mags[0] >= 10.0)
}
