//! Planted two-profile sequences with known deformations, d = 1.
//!
//! `u_n = D(h_n)P(-1)φ¹ + T(h_n²)φ²`, `h_n = 2^{m_n}`, where both profiles
//! have a smooth bump spectrum on `[0, 1)`: `F φ¹ = bump`, `F φ² = 2 bump`.
//! The first family lives on `[h_n, 2h_n)` in frequency, the second at a
//! spatial distance `h_n²`.

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::group::{apply, Deformation};
use crate::Complex64;

/// `exp(1 - 1/(1 - (2t-1)²))` on `(0, 1)`, zero elsewhere.
pub fn bump(t: f64) -> f64 {
    let s = 2.0 * t - 1.0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

pub const AMPLITUDES: [f64; 2] = [1.0, 2.0];

/// Profile `j ∈ {0, 1}` sampled on the given grid.
pub fn planted_profile(j: usize, n: usize, extent: f64) -> Result<GridField> {
    let amp = AMPLITUDES[j];
    Ok(GridField::from_fn_fourier(1, n, extent, |xi| Complex64::new(amp * bump(xi[0]), 0.0))?.to_physical())
}

/// `[D(h)P(-1), T(h²)]` for `h = 2^m`.
pub fn planted_deformations(m: i32) -> [Deformation; 2] {
    let h = (2f64).powi(m);
    let mut g1 = Deformation::dilation(1, m);
    g1.b = vec![-1.0];
    [g1, Deformation::shift(vec![h * h])]
}

#[derive(Clone, Debug)]
pub struct TwoProfileOracle {
    pub seq: Vec<GridField>,
    pub exponents: Vec<i32>,
    /// `planted[n] = [G¹_n, G²_n]`.
    pub planted: Vec<[Deformation; 2]>,
}

/// Builds `u_n` for `h_n = 2^m`, `m ∈ exponents`, on an `n`-point grid of
/// half-width `extent`.
pub fn two_profile_oracle(n: usize, extent: f64, exponents: &[i32], alpha: f64) -> Result<TwoProfileOracle> {
    let mut seq = Vec::with_capacity(exponents.len());
    let mut planted = Vec::with_capacity(exponents.len());
    for &m in exponents {
        let h = (2f64).powi(m);
        let g = planted_deformations(m);
        if h * h >= extent || 2.0 * h >= n as f64 * std::f64::consts::PI / (2.0 * extent) {
            return Err(Error::Config(format!("h = 2^{m} does not fit a grid of {n} points on [-{extent}, {extent})")));
        }
        let u1 = apply(&g[0], &planted_profile(0, n, extent * h)?, alpha)?;
        let u2 = apply(&g[1], &planted_profile(1, n, extent)?, alpha)?;
        seq.push(u1.to_physical().add(&u2.to_physical())?);
        planted.push(g);
    }
    Ok(TwoProfileOracle { seq, exponents: exponents.to_vec(), planted })
}
