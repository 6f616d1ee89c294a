//! Sampled complex fields on a periodic box and dyadic cube geometry.
//!
//! Continuous transform convention: `F f(ξ) = ∫ e^{-ix·ξ} f(x) dx`.
//! On the grid `x_i = -L + iΔx`, `Δx = 2L/n`, frequencies `ξ_m = mΔξ` with
//! `Δξ = π/L` and signed `m ∈ [-n/2, n/2)`, stored in FFT order.
//! Fourier samples approximate the continuous transform, so they do not
//! depend on `n` for well-resolved fields. L² norms on the Fourier side use
//! the measure `dξ/(2π)^d`, which makes [`GridField::l2_norm`] representation
//! independent.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Physical,
    Fourier,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dim: usize,
    n: usize,
    extent: f64,
    space: Space,
    values: Vec<Complex64>,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized n-dimensional DFT, applied axis by axis.
pub(crate) fn fft_nd(values: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = values.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in values.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (t, v) in line.iter_mut().enumerate() {
                    *v = values[base + t * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    values[base + t * stride] = *v;
                }
            }
        }
    }
}

pub(crate) fn is_pow2(n: usize) -> bool {
    n >= 2 && n.is_power_of_two()
}

/// Exact base-2 exponent of `x`, if `x` is a power of two.
pub fn exact_log2(x: f64) -> Option<i32> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let e = x.log2().round() as i32;
    if (2f64).powi(e) == x {
        Some(e)
    } else {
        None
    }
}

impl GridField {
    pub fn new(dim: usize, n: usize, extent: f64, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !is_pow2(n) {
            return Err(Error::Config(format!("samples per axis must be a power of two ≥ 2, got {n}")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Config(format!("extent must be positive, got {extent}")));
        }
        let expect = n
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Config("grid too large".into()))?;
        if values.len() != expect {
            return Err(Error::Config(format!("expected {expect} samples, got {}", values.len())));
        }
        Ok(Self { dim, n, extent, space, values })
    }

    pub fn zeros(dim: usize, n: usize, extent: f64, space: Space) -> Result<Self> {
        let len = n.checked_pow(dim as u32).unwrap_or(0);
        Self::new(dim, n, extent, space, vec![Complex64::new(0.0, 0.0); len])
    }

    /// Samples `f` at the physical grid points.
    pub fn from_fn_physical(
        dim: usize,
        n: usize,
        extent: f64,
        f: impl Fn(&[f64]) -> Complex64,
    ) -> Result<Self> {
        let mut g = Self::zeros(dim, n, extent, Space::Physical)?;
        let mut x = vec![0.0; dim];
        for idx in 0..g.values.len() {
            g.point_into(idx, &mut x);
            g.values[idx] = f(&x);
        }
        Ok(g)
    }

    /// Sets Fourier samples from a function of the frequency vector.
    pub fn from_fn_fourier(
        dim: usize,
        n: usize,
        extent: f64,
        f: impl Fn(&[f64]) -> Complex64,
    ) -> Result<Self> {
        let mut g = Self::zeros(dim, n, extent, Space::Fourier)?;
        let mut xi = vec![0.0; dim];
        for idx in 0..g.values.len() {
            g.point_into(idx, &mut xi);
            g.values[idx] = f(&xi);
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_per_axis(&self) -> usize {
        self.n
    }
    pub fn extent(&self) -> f64 {
        self.extent
    }
    pub fn space(&self) -> Space {
        self.space
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }
    pub fn dxi(&self) -> f64 {
        PI / self.extent
    }
    /// Nyquist frequency `π n / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.dxi() * (self.n / 2) as f64
    }
    /// Volume of one sample cell in the current representation.
    pub fn cell_volume(&self) -> f64 {
        let h = match self.space {
            Space::Physical => self.dx(),
            Space::Fourier => self.dxi(),
        };
        h.powi(self.dim as i32)
    }

    /// Same geometry, new values.
    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self { values, ..self.clone() }
    }

    /// Same values reinterpreted on a box of half-width `extent`.
    pub fn with_extent(&self, extent: f64) -> Self {
        Self { extent, ..self.clone() }
    }

    /// Signed per-axis index: cell index `i - n/2` on the physical side,
    /// frequency index `m` on the Fourier side.
    pub fn signed_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        match self.space {
            Space::Physical => i - n / 2,
            Space::Fourier => {
                if i < n / 2 {
                    i
                } else {
                    i - n
                }
            }
        }
    }

    /// Storage index along one axis for a signed index, if on the grid.
    pub fn storage_index(&self, s: i64) -> Option<usize> {
        let n = self.n as i64;
        if s < -n / 2 || s >= n / 2 {
            return None;
        }
        Some(match self.space {
            Space::Physical => (s + n / 2) as usize,
            Space::Fourier => s.rem_euclid(n) as usize,
        })
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates (position or frequency) of sample `idx`.
    pub fn point_into(&self, mut idx: usize, out: &mut [f64]) {
        let h = match self.space {
            Space::Physical => self.dx(),
            Space::Fourier => self.dxi(),
        };
        for a in (0..self.dim).rev() {
            out[a] = self.signed_index(idx % self.n) as f64 * h;
            idx /= self.n;
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.point_into(idx, &mut x);
        x
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.dim == other.dim && self.n == other.n && self.extent == other.extent
    }

    fn check_same(&self, other: &GridField) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::Config("fields live on different grids".into()));
        }
        if self.space != other.space {
            return Err(Error::WrongSpace(self.space));
        }
        Ok(())
    }

    pub fn to_fourier(&self) -> GridField {
        match self.space {
            Space::Fourier => self.clone(),
            Space::Physical => {
                let mut v = self.values.clone();
                fft_nd(&mut v, self.dim, self.n, false);
                let scale = self.dx().powi(self.dim as i32);
                self.apply_parity(&mut v, scale);
                Self { values: v, space: Space::Fourier, ..self.clone() }
            }
        }
    }

    pub fn to_physical(&self) -> GridField {
        match self.space {
            Space::Physical => self.clone(),
            Space::Fourier => {
                let mut v = self.values.clone();
                let scale = (self.n as f64 * self.dx()).powi(-(self.dim as i32));
                self.apply_parity(&mut v, 1.0);
                fft_nd(&mut v, self.dim, self.n, true);
                for z in &mut v {
                    *z *= scale;
                }
                Self { values: v, space: Space::Physical, ..self.clone() }
            }
        }
    }

    pub fn to_space(&self, space: Space) -> GridField {
        match space {
            Space::Physical => self.to_physical(),
            Space::Fourier => self.to_fourier(),
        }
    }

    // multiply by scale·(-1)^{Σ i_a}
    fn apply_parity(&self, v: &mut [Complex64], scale: f64) {
        let mut mi = vec![0usize; self.dim];
        for (idx, z) in v.iter_mut().enumerate() {
            self.multi_index(idx, &mut mi);
            let odd = mi.iter().sum::<usize>() % 2 == 1;
            *z *= if odd { -scale } else { scale };
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        let w = match self.space {
            Space::Physical => self.cell_volume(),
            Space::Fourier => self.cell_volume() / (2.0 * PI).powi(self.dim as i32),
        };
        (s * w).sqrt()
    }

    /// Quadrature `L^p` norm in the current representation (plain measure).
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s: f64 = self.values.iter().map(|z| z.norm().powf(p)).sum();
        (s * self.cell_volume()).powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `∫ f ḡ` in physical space.
    pub fn inner(&self, other: &GridField) -> Result<Complex64> {
        let a = self.to_physical();
        let b = other.to_physical();
        a.check_same(&b)?;
        let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y.conj()).sum();
        Ok(s * a.cell_volume())
    }

    pub fn scaled(&self, c: Complex64) -> GridField {
        self.with_values(self.values.iter().map(|z| z * c).collect())
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        let b = other.to_space(self.space);
        self.check_same(&b)?;
        Ok(self.with_values(self.values.iter().zip(&b.values).map(|(x, y)| x + y).collect()))
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        let b = other.to_space(self.space);
        self.check_same(&b)?;
        Ok(self.with_values(self.values.iter().zip(&b.values).map(|(x, y)| x - y).collect()))
    }

    /// Largest modulus on the outermost sample layer, relative to the sup norm.
    pub fn boundary_ratio(&self) -> f64 {
        let f = self.to_physical();
        let sup = f.sup_norm();
        if sup == 0.0 {
            return 0.0;
        }
        let mut mi = vec![0usize; f.dim];
        let mut m = 0.0f64;
        for (idx, z) in f.values.iter().enumerate() {
            f.multi_index(idx, &mut mi);
            if mi.iter().any(|&i| i == 0 || i == f.n - 1) {
                m = m.max(z.norm());
            }
        }
        m / sup
    }

    /// Multiplies by `e^{-i x·b}` in physical space.
    pub fn modulate(&self, b: &[f64]) -> GridField {
        let f = self.to_physical();
        let mut out = f.clone();
        let mut x = vec![0.0; f.dim];
        for idx in 0..f.values.len() {
            f.point_into(idx, &mut x);
            let ph: f64 = x.iter().zip(b).map(|(xi, bi)| xi * bi).sum();
            out.values[idx] *= Complex64::from_polar(1.0, -ph);
        }
        out
    }

    /// Multiplies Fourier samples by `m(ξ)`.
    pub fn fourier_multiply(&self, m: impl Fn(&[f64]) -> Complex64) -> GridField {
        let mut g = self.to_fourier();
        let mut xi = vec![0.0; g.dim];
        for idx in 0..g.values.len() {
            g.point_into(idx, &mut xi);
            g.values[idx] *= m(&xi);
        }
        g
    }

    /// Zeroes every Fourier sample outside `cube` (half-open per axis).
    pub fn restrict_to_cube(&self, cube: &DyadicCube) -> Result<GridField> {
        if cube.dim() != self.dim {
            return Err(Error::Config("cube dimension mismatch".into()));
        }
        let mut g = self.to_fourier();
        let mut xi = vec![0.0; g.dim];
        for idx in 0..g.values.len() {
            g.point_into(idx, &mut xi);
            if !cube.contains(&xi) {
                g.values[idx] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(g)
    }

    /// Moves the field to a box of half-width `extent` with `n` samples per
    /// axis. Both the extent ratio and the spacing ratio must be powers of two.
    /// Padding is exact; cropping (in space) and band truncation (in
    /// frequency) drop content, whose relative L² size is returned.
    pub fn regrid(&self, extent: f64, n: usize) -> Result<(GridField, f64)> {
        if !is_pow2(n) {
            return Err(Error::Config(format!("samples per axis must be a power of two, got {n}")));
        }
        let ratio = extent / self.extent;
        let k = exact_log2(ratio)
            .ok_or_else(|| Error::Config(format!("extent ratio {ratio} is not a power of two")))?;
        let n1 = if k >= 0 {
            self.n << k
        } else {
            self.n >> (-k)
        };
        if n1 < 2 {
            return Err(Error::Config("regrid would leave fewer than two samples".into()));
        }
        let total = self.l2_norm();
        let mut dropped = 0.0;

        // same Δx, new extent
        let phys = self.to_physical();
        let mut step1 = GridField::zeros(self.dim, n1, extent, Space::Physical)?;
        let mut mi = vec![0usize; self.dim];
        let mut mj = vec![0usize; self.dim];
        'outer: for (idx, z) in phys.values.iter().enumerate() {
            phys.multi_index(idx, &mut mi);
            for a in 0..self.dim {
                match step1.storage_index(phys.signed_index(mi[a])) {
                    Some(j) => mj[a] = j,
                    None => {
                        dropped += z.norm_sqr() * phys.cell_volume();
                        continue 'outer;
                    }
                }
            }
            let j = step1.flat_index(&mj);
            step1.values[j] = *z;
        }

        // same Δξ, new band
        let four = step1.to_fourier();
        let mut out = GridField::zeros(self.dim, n, extent, Space::Fourier)?;
        let w = four.cell_volume() / (2.0 * PI).powi(self.dim as i32);
        'outer2: for (idx, z) in four.values.iter().enumerate() {
            four.multi_index(idx, &mut mi);
            for a in 0..self.dim {
                match out.storage_index(four.signed_index(mi[a])) {
                    Some(j) => mj[a] = j,
                    None => {
                        dropped += z.norm_sqr() * w;
                        continue 'outer2;
                    }
                }
            }
            let j = out.flat_index(&mj);
            out.values[j] = *z;
        }
        let rel = if total > 0.0 { dropped.sqrt() / total } else { 0.0 };
        Ok((out.to_space(self.space), rel))
    }

    pub fn write_gfld<W: Write>(&self, mut w: W) -> Result<()> {
        let header = GfldHeader {
            dim: self.dim,
            n_per_axis: self.n,
            extent: self.extent,
            space: self.space,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.values.len() * 16);
        for z in &self.values {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_gfld<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: GfldHeader = serde_json::from_str(line.trim_end())?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let expect = h
            .n_per_axis
            .checked_pow(h.dim as u32)
            .ok_or_else(|| Error::Config("grid too large".into()))?;
        if bytes.len() != expect * 16 {
            return Err(Error::Config(format!(
                "GFLD1 payload has {} bytes, expected {}",
                bytes.len(),
                expect * 16
            )));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::new(h.dim, h.n_per_axis, h.extent, h.space, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_gfld(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_gfld(std::fs::File::open(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GfldHeader {
    dim: usize,
    n_per_axis: usize,
    extent: f64,
    space: Space,
}

/// `τ = 2^{-j}([0,1)^d + k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub j: i32,
    pub k: Vec<i64>,
}

impl DyadicCube {
    pub fn new(j: i32, k: Vec<i64>) -> Self {
        Self { j, k }
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn side(&self) -> f64 {
        (2f64).powi(-self.j)
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    pub fn corner(&self) -> Vec<f64> {
        let s = self.side();
        self.k.iter().map(|&k| k as f64 * s).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let inv = (2f64).powi(self.j);
        x.iter().zip(&self.k).all(|(&xi, &k)| (xi * inv).floor() as i64 == k)
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let d = self.dim();
        (0..1usize << d)
            .map(|bits| {
                let k = self
                    .k
                    .iter()
                    .enumerate()
                    .map(|(a, &k)| 2 * k + ((bits >> a) & 1) as i64)
                    .collect();
                DyadicCube::new(self.j + 1, k)
            })
            .collect()
    }

    pub fn parent(&self) -> DyadicCube {
        DyadicCube::new(self.j - 1, self.k.iter().map(|k| k.div_euclid(2)).collect())
    }
}

/// Scale truncation `[j_min, j_max]`; `k_bound` is the largest `|k|` a cube at
/// scale `j_max` can have while meeting the Nyquist band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyWindow {
    pub j_min: i32,
    pub j_max: i32,
    pub k_bound: i64,
}

impl FrequencyWindow {
    pub fn new(j_min: i32, j_max: i32, nyquist: f64) -> Self {
        let k_bound = (nyquist * (2f64).powi(j_max)).ceil() as i64;
        Self { j_min, j_max, k_bound }
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }
}
