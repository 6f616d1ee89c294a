//! Morrey, hat-Morrey and hat-Lebesgue norms plus space-level diagnostics.

pub mod dyadic;
pub mod moduli;
pub mod size;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FrequencyWindow, GridField, Space};
pub use dyadic::{cell_scale, conjugate, CellPyramid};
pub use moduli::{
    almost_periodicity_residual, compactness_modulus, duality_pairing_check, dyadic_average_projection,
    Block, PairingCheck,
};
pub use size::{size_function, SizeFunctionConfig, SizeResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Morrey,
    Hat,
}

/// Exponent triple `(p, q, r)`; `window = None` means the full sum over all
/// scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorreySpec {
    #[serde(with = "ext_real")]
    pub p: f64,
    #[serde(with = "ext_real")]
    pub q: f64,
    #[serde(with = "ext_real")]
    pub r: f64,
    pub mode: Mode,
    pub window: Option<FrequencyWindow>,
}

/// Extended reals in JSON: `∞` is written as the string `"inf"`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            "inf".serialize(s)
        } else {
            x.serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" || s == "infinity" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad exponent {s}"))),
        }
    }
}

impl MorreySpec {
    pub fn morrey(p: f64, q: f64, r: f64) -> Result<Self> {
        let s = Self { p, q, r, mode: Mode::Morrey, window: None };
        s.validate()?;
        Ok(s)
    }

    pub fn hat(p: f64, q: f64, r: f64) -> Result<Self> {
        let s = Self { p, q, r, mode: Mode::Hat, window: None };
        s.validate()?;
        Ok(s)
    }

    pub fn with_window(mut self, w: FrequencyWindow) -> Self {
        self.window = Some(w);
        self
    }

    /// Outer and inner exponents `(P, Q)` of the cube weight
    /// `|τ|^{1/P-1/Q}‖g‖_{L^Q(τ)}`.
    pub fn cube_exponents(&self) -> (f64, f64) {
        match self.mode {
            Mode::Morrey => (self.p, self.q),
            Mode::Hat => (conjugate(self.p), conjugate(self.q)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x >= 1.0 && !x.is_nan();
        let (p, q, r) = (self.p, self.q, self.r);
        if !(ok(p) && ok(q) && ok(r)) {
            return Err(Error::Assumption(format!("exponents must lie in [1, ∞]: ({p}, {q}, {r})")));
        }
        match self.mode {
            Mode::Morrey => {
                if !(q <= p && p <= r) {
                    return Err(Error::Assumption(format!("Morrey mode needs q ≤ p ≤ r, got ({p}, {q}, {r})")));
                }
                if r.is_finite() && !(q < p && p < r) {
                    return Err(Error::Assumption(format!("finite r needs q < p < r, got ({p}, {q}, {r})")));
                }
            }
            Mode::Hat => {
                let (pc, qc) = (conjugate(p), conjugate(q));
                if !(p <= q && pc <= r) {
                    return Err(Error::Assumption(format!("hat mode needs p ≤ q and p' ≤ r, got ({p}, {q}, {r})")));
                }
                if r.is_finite() && !(qc < pc && pc < r) {
                    return Err(Error::Assumption(format!("finite r needs q' < p' < r, got ({p}, {q}, {r})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm: f64,
    /// Exact size of the omitted scales (0 for the full sum).
    pub tail_bound: f64,
    pub window: FrequencyWindow,
    pub spec: MorreySpec,
}

/// The full-sum value of `(ΣΣ w^r)^{1/r}` minus a partial sum `S - x`,
/// evaluated without cancellation.
fn root_gap(total: f64, omitted: f64, r: f64) -> f64 {
    if total <= 0.0 || omitted <= 0.0 {
        return 0.0;
    }
    let frac = (omitted / total).min(1.0);
    -total.powf(1.0 / r) * ((-frac).ln_1p() / r).exp_m1()
}

fn evaluate(g: &GridField, spec: &MorreySpec) -> Result<NormReport> {
    spec.validate()?;
    let (p_out, q_in) = spec.cube_exponents();
    let pyr = CellPyramid::build(g, q_in)?;
    let nyq = g.nyquist_for_space();
    let full_window = FrequencyWindow::new(pyr.jc - pyr.top_level() as i32, pyr.jc, nyq);
    let r = spec.r;
    if pyr.is_zero() {
        return Ok(NormReport {
            norm: 0.0,
            tail_bound: 0.0,
            window: spec.window.unwrap_or(FrequencyWindow::new(pyr.jc, pyr.jc, nyq)),
            spec: *spec,
        });
    }
    let total = pyr.total(p_out, r);
    let full = if r.is_infinite() { total } else { total.powf(1.0 / r) };
    match spec.window {
        None => Ok(NormReport { norm: full, tail_bound: 0.0, window: full_window, spec: *spec }),
        Some(w) => {
            let part = pyr.windowed(p_out, r, w.j_min, w.j_max);
            let (norm, tail) = if r.is_infinite() {
                (part, full - part)
            } else {
                (part.powf(1.0 / r), root_gap(total, (total - part).max(0.0), r))
            };
            Ok(NormReport { norm, tail_bound: tail.max(0.0), window: w, spec: *spec })
        }
    }
}

impl GridField {
    /// Nyquist bound of the current representation's conjugate side, used to
    /// bound cube indices.
    pub(crate) fn nyquist_for_space(&self) -> f64 {
        match self.space() {
            Space::Fourier => self.nyquist(),
            Space::Physical => self.extent(),
        }
    }
}

/// `‖f‖_{M^p_{q,r}}` over physical-space dyadic cubes.
pub fn morrey_norm(f: &GridField, spec: &MorreySpec) -> Result<NormReport> {
    if spec.mode != Mode::Morrey {
        return Err(Error::Config("morrey_norm needs a Morrey-mode spec".into()));
    }
    evaluate(&f.to_physical(), spec)
}

/// `‖f‖_{M̂^p_{q,r}} = ‖ |τ|^{1/p'-1/q'} ‖F f‖_{L^{q'}(τ)} ‖_{ℓ^r}`.
pub fn hat_morrey_norm(f: &GridField, spec: &MorreySpec) -> Result<NormReport> {
    if spec.mode != Mode::Hat {
        return Err(Error::Config("hat_morrey_norm needs a hat-mode spec".into()));
    }
    evaluate(&f.to_fourier(), spec)
}

/// Shorthand for the value of [`hat_morrey_norm`].
pub fn hat_norm(f: &GridField, spec: &MorreySpec) -> Result<f64> {
    Ok(hat_morrey_norm(f, spec)?.norm)
}

/// `‖F f‖_{L^{p'}}` by cell quadrature.
pub fn hat_lebesgue_norm(f: &GridField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Assumption(format!("hat-Lebesgue exponent must be ≥ 1, got {p}")));
    }
    Ok(f.to_fourier().lp_norm(conjugate(p)))
}

/// Smallest window around the enumerated scales whose omitted tail is at most
/// `tail_tol`. Scales are added one at a time on whichever side carries the
/// larger remaining tail, so shrinking the tolerance only ever widens it.
pub fn default_window(f: &GridField, spec: &MorreySpec, tail_tol: f64) -> Result<(FrequencyWindow, f64)> {
    if !(tail_tol > 0.0) {
        return Err(Error::Config("tail_tol must be positive".into()));
    }
    let (p_out, q_in) = spec.cube_exponents();
    if spec.r.is_finite() && spec.r <= p_out {
        return Err(Error::Assumption(format!(
            "r = {} ≤ {p_out}: the sum over fine scales diverges",
            spec.r
        )));
    }
    spec.validate()?;
    let g = match spec.mode {
        Mode::Hat => f.to_fourier(),
        Mode::Morrey => f.to_physical(),
    };
    let pyr = CellPyramid::build(&g, q_in)?;
    let nyq = g.nyquist_for_space();
    if pyr.is_zero() {
        return Ok((FrequencyWindow::new(pyr.jc, pyr.jc, nyq), 0.0));
    }
    let js = pyr.jc - pyr.top_level() as i32;
    if spec.r.is_infinite() {
        return Ok((FrequencyWindow::new(js, pyr.jc, nyq), 0.0));
    }
    let r = spec.r;
    let total = pyr.total(p_out, r);
    let (mut ef, mut ec) = (0u32, 0u32);
    loop {
        let (fine, coarse) = pyr.tails(p_out, r, ef, ec);
        let gap = root_gap(total, fine + coarse, r);
        if gap <= tail_tol || ef + ec > 100_000 {
            let w = FrequencyWindow::new(js - ec as i32, pyr.jc + ef as i32, nyq);
            return Ok((w, gap));
        }
        if fine >= coarse {
            ef += 1;
        } else {
            ec += 1;
        }
    }
}
