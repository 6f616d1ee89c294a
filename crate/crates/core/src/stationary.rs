//! Ground states of `-ΔQ + Q = Q^{2α+1}`, the Aubin–Talenti profile `W`,
//! Pohozaev identities and the energy-critical thresholds.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::GridField;

pub use crate::evolution::{energy, gradient_sq, mass};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub n: usize,
    pub extent: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm1d,
    RadialShooting,
    NormalizedFlow,
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub field: GridField,
    /// `‖-ΔQ + Q - Q^{2α+1}‖_∞` on the grid.
    pub residual_linf: f64,
    pub method: Method,
    /// `Q(0)`.
    pub q0: f64,
}

/// `(α+1)^{1/(2α)} sech^{1/α}(αx)`.
pub fn closed_form_1d(alpha: f64, x: f64) -> f64 {
    (alpha + 1.0).powf(0.5 / alpha) * (1.0 / (alpha * x).cosh()).powf(1.0 / alpha)
}

fn check_subcritical(d: usize, alpha: f64) -> Result<()> {
    if d == 0 || !(alpha > 0.0) || (d >= 3 && alpha >= 2.0 / (d as f64 - 2.0)) {
        return Err(Error::Assumption(format!("no ground state for d = {d}, α = {alpha}")));
    }
    Ok(())
}

fn radial_field(d: usize, grid: GridParams, f: impl Fn(f64) -> f64) -> Result<GridField> {
    GridField::from_fn_physical(d, grid.n, grid.extent, |x| {
        Complex64::new(f(x.iter().map(|v| v * v).sum::<f64>().sqrt()), 0.0)
    })
}

fn power(u: &GridField, p: f64) -> GridField {
    u.with_values(u.values().iter().map(|z| Complex64::new(z.re.abs().powf(p - 1.0) * z.re, 0.0)).collect())
}

/// `‖-Δu + λ²u - u^{2α+1}‖_∞` with a spectral Laplacian.
pub fn ground_state_residual(u: &GridField, alpha: f64, lambda: f64) -> f64 {
    let u = u.to_physical();
    let l2 = lambda * lambda;
    let lin = u
        .fourier_multiply(|xi| Complex64::new(xi.iter().map(|v| v * v).sum::<f64>() + l2, 0.0))
        .to_physical();
    let nl = power(&u, 2.0 * alpha + 1.0);
    lin.sub(&nl).expect("same grid").sup_norm()
}

/// Ground state: closed form for `d = 1`, radial shooting polished on the
/// grid for `d ≥ 2`.
pub fn ground_state(d: usize, alpha: f64, grid: GridParams) -> Result<GroundStateResult> {
    let method = if d == 1 { Method::ClosedForm1d } else { Method::RadialShooting };
    ground_state_with(d, alpha, grid, method)
}

pub fn ground_state_with(d: usize, alpha: f64, grid: GridParams, method: Method) -> Result<GroundStateResult> {
    check_subcritical(d, alpha)?;
    let field = match method {
        Method::ClosedForm1d => {
            if d != 1 {
                return Err(Error::Config("the closed form exists only for d = 1".into()));
            }
            radial_field(1, grid, |r| closed_form_1d(alpha, r))?
        }
        Method::RadialShooting => {
            let prof = shoot(d, alpha)?;
            let guess = radial_field(d, grid, |r| prof.eval(r))?;
            petviashvili(guess, alpha, 1e-12, 200)?
        }
        Method::NormalizedFlow => {
            let guess = radial_field(d, grid, |r| 1.5 * (-r * r / 2.0).exp())?;
            petviashvili(guess, alpha, 1e-12, 2000)?
        }
    };
    let residual_linf = ground_state_residual(&field, alpha, 1.0);
    let q0 = field.sup_norm();
    Ok(GroundStateResult { field, residual_linf, method, q0 })
}

/// Petviashvili iteration `û ← M^γ F(u^p)/(1+|ξ|²)` with the stabilizing
/// factor `M = ⟨(1-Δ)u,u⟩/⟨u^p,u⟩`, `γ = p/(p-1)`.
fn petviashvili(mut u: GridField, alpha: f64, tol: f64, max_iter: usize) -> Result<GridField> {
    let p = 2.0 * alpha + 1.0;
    let gamma_exp = p / (p - 1.0);
    let symbol = |xi: &[f64]| 1.0 + xi.iter().map(|v| v * v).sum::<f64>();
    let mut best = (f64::INFINITY, u.clone());
    let mut stale = 0;
    for _ in 0..max_iter {
        let uhat = u.to_fourier();
        let nl = power(&u, p).to_fourier();
        let mut xi = vec![0.0; u.dim()];
        let (mut num, mut den) = (0.0, 0.0);
        for (k, (a, b)) in uhat.values().iter().zip(nl.values()).enumerate() {
            uhat.point_into(k, &mut xi);
            num += symbol(&xi) * a.norm_sqr();
            den += (b * a.conj()).re;
        }
        if !(den > 0.0) {
            return Err(Error::Solver("Petviashvili iteration lost positivity".into()));
        }
        let m = (num / den).powf(gamma_exp);
        let next = nl.fourier_multiply(|xi| Complex64::new(m / symbol(xi), 0.0)).to_physical();
        u = next.with_values(next.values().iter().map(|z| Complex64::new(z.re.max(0.0), 0.0)).collect());
        let res = ground_state_residual(&u, alpha, 1.0);
        if !res.is_finite() {
            return Err(Error::Solver("Petviashvili iteration diverged".into()));
        }
        if res < best.0 * (1.0 - 1e-3) {
            best = (res, u.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        if res < tol || stale >= 20 {
            break;
        }
    }
    Ok(best.1)
}

/// Radial profile from shooting: RK4 samples up to the matching radius, an
/// exponential tail beyond it.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub d: usize,
    pub q0: f64,
    pub h: f64,
    pub rho0: f64,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
}

impl RadialProfile {
    pub fn match_radius(&self) -> f64 {
        self.rho0 + (self.q.len() - 1) as f64 * self.h
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.rho0 {
            return self.q0 + 0.5 * (self.dq[0] / self.rho0) * r * r;
        }
        let rm = self.match_radius();
        if r >= rm {
            let last = *self.q.last().unwrap();
            let k = (self.d as f64 - 1.0) / 2.0;
            return last * (rm / r).powf(k) * (rm - r).exp();
        }
        let t = (r - self.rho0) / self.h;
        let i = (t.floor() as usize).min(self.q.len() - 2);
        let s = t - i as f64;
        let (y0, y1) = (self.q[i], self.q[i + 1]);
        let (m0, m1) = (self.dq[i] * self.h, self.dq[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }
}

enum Shot {
    /// Crossed zero.
    Over,
    /// Turned up while positive.
    Under,
    Undecided,
}

fn rhs(d: usize, p: f64, r: f64, q: f64, dq: f64) -> (f64, f64) {
    (dq, -(d as f64 - 1.0) / r * dq + q - q.abs().powf(p - 1.0) * q)
}

fn integrate(d: usize, p: f64, q0: f64, h: f64, rho0: f64, r_max: f64, keep: bool) -> (Shot, Vec<f64>, Vec<f64>) {
    let q2 = (q0 - q0.powf(p)) / d as f64;
    let mut q = q0 + 0.5 * q2 * rho0 * rho0;
    let mut dq = q2 * rho0;
    let mut r = rho0;
    let (mut qs, mut dqs) = (Vec::new(), Vec::new());
    if keep {
        qs.push(q);
        dqs.push(dq);
    }
    while r < r_max {
        let (k1q, k1d) = rhs(d, p, r, q, dq);
        let (k2q, k2d) = rhs(d, p, r + 0.5 * h, q + 0.5 * h * k1q, dq + 0.5 * h * k1d);
        let (k3q, k3d) = rhs(d, p, r + 0.5 * h, q + 0.5 * h * k2q, dq + 0.5 * h * k2d);
        let (k4q, k4d) = rhs(d, p, r + h, q + h * k3q, dq + h * k3d);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        dq += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        r += h;
        if keep {
            qs.push(q);
            dqs.push(dq);
        }
        if q < 0.0 {
            return (Shot::Over, qs, dqs);
        }
        if dq > 0.0 {
            return (Shot::Under, qs, dqs);
        }
    }
    (Shot::Undecided, qs, dqs)
}

/// Bisection on `Q(0)`: zero crossing means too high, turning up means too
/// low. RK4 with step `1e-3`, Taylor start `Q''(0) = (Q0 - Q0^p)/d`.
pub fn shoot(d: usize, alpha: f64) -> Result<RadialProfile> {
    check_subcritical(d, alpha)?;
    let p = 2.0 * alpha + 1.0;
    let (h, rho0, r_max) = (1e-3, 1e-3, 60.0);
    let mut lo = 1.0 + 1e-6;
    if !matches!(integrate(d, p, lo, h, rho0, r_max, false).0, Shot::Under) {
        return Err(Error::Solver("lower shooting height does not undershoot".into()));
    }
    let mut hi = 2.0;
    let mut tries = 0;
    while !matches!(integrate(d, p, hi, h, rho0, r_max, false).0, Shot::Over) {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 40 {
            return Err(Error::Solver("shooting could not bracket Q(0)".into()));
        }
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        match integrate(d, p, mid, h, rho0, r_max, false).0 {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let q0 = 0.5 * (lo + hi);
    let (_, qs, dqs) = integrate(d, p, q0, h, rho0, r_max, true);
    // keep the part that is still trustworthy: positive, decreasing, above 1e-6·Q0
    let cut = qs.iter().zip(&dqs).position(|(&q, &dq)| q < 1e-6 * q0 || dq >= 0.0).unwrap_or(qs.len());
    if cut < 2 {
        return Err(Error::Solver("shooting profile is empty".into()));
    }
    Ok(RadialProfile { d, q0, h, rho0, q: qs[..cut].to_vec(), dq: dqs[..cut].to_vec() })
}

/// `W(x) = (1 + |x|²/(d(d-2)))^{-(d-2)/2}`.
pub fn aubin_talenti_value(d: usize, r: f64) -> f64 {
    let c = (d * (d - 2)) as f64;
    (1.0 + r * r / c).powf(-(d as f64 - 2.0) / 2.0)
}

pub fn aubin_talenti(d: usize, grid: GridParams) -> Result<GridField> {
    if d < 3 {
        return Err(Error::Config(format!("W needs d ≥ 3, got {d}")));
    }
    radial_field(d, grid, |r| aubin_talenti_value(d, r))
}

/// `‖-ΔW - W^{(d+2)/(d-2)}‖_∞` on `|x| ≤ L/2`. `W` is multiplied by the
/// window `½ erfc((|x| - 3L/4)/σ)`, `σ = L/20`, before the spectral
/// Laplacian so that the slow decay does not wrap around; the window is flat
/// to `1e-12` on the interior and on the box faces.
pub fn aubin_talenti_residual(w: &GridField) -> f64 {
    let d = w.dim();
    let l = w.extent();
    let w = w.to_physical();
    let sigma = l / 20.0;
    let mut x = vec![0.0; d];
    let cut: Vec<Complex64> = w
        .values()
        .iter()
        .enumerate()
        .map(|(k, z)| {
            w.point_into(k, &mut x);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            z * 0.5 * erfc((r - 0.75 * l) / sigma)
        })
        .collect();
    let lap = w
        .with_values(cut)
        .fourier_multiply(|xi| Complex64::new(xi.iter().map(|v| v * v).sum::<f64>(), 0.0))
        .to_physical();
    let e = (d as f64 + 2.0) / (d as f64 - 2.0);
    let mut worst = 0.0f64;
    for (k, (a, z)) in lap.values().iter().zip(w.values()).enumerate() {
        w.point_into(k, &mut x);
        if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.5 * l {
            worst = worst.max((a.re - z.re.powf(e)).abs());
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResiduals {
    /// `|‖∇Q‖² + ‖Q‖² - ‖Q‖^{2α+2}_{2α+2}|`
    pub r1: f64,
    /// `|(d-2)/2 ‖∇Q‖² + d/2 ‖Q‖² - d/(2α+2) ‖Q‖^{2α+2}_{2α+2}|`
    pub r2: f64,
    pub mass: f64,
}

impl PohozaevResiduals {
    pub fn relative(&self) -> (f64, f64) {
        (self.r1 / self.mass, self.r2 / self.mass)
    }
}

pub fn pohozaev_check(q: &GroundStateResult, alpha: f64) -> PohozaevResiduals {
    pohozaev_residuals(&q.field, alpha)
}

pub fn pohozaev_residuals(u: &GridField, alpha: f64) -> PohozaevResiduals {
    let d = u.dim() as f64;
    let u = u.to_physical();
    let a = gradient_sq(&u);
    let b = mass(&u);
    let e = 2.0 * alpha + 2.0;
    let c = u.lp_norm(e).powf(e);
    PohozaevResiduals {
        r1: (a + b - c).abs(),
        r2: ((d - 2.0) / 2.0 * a + d / 2.0 * b - d / e * c).abs(),
        mass: b,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalThresholds {
    pub d: usize,
    pub e1: f64,
    pub e2: f64,
    /// `E2` from the independent adaptive radial quadrature.
    pub e2_check: f64,
    /// `E[W] = ½‖W‖²_{Ḣ¹} - (d-2)/(2d) ‖W‖^{2d/(d-2)}_{L^{2d/(d-2)}}`.
    pub energy_w: f64,
}

/// Surface area of the unit sphere in `ℝ^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

fn gl_half_pi(f: impl FnMut(f64) -> f64) -> f64 {
    GaussLegendre::new(64).expect("valid degree").integrate(0.0, PI / 2.0, f)
}

/// `‖W‖²_{Ḣ¹}` via `ρ = √c tan θ`, which turns the radial integral into
/// `∫_0^{π/2} sin^{d+1}θ cos^{d-3}θ dθ`.
fn w_hdot1_sq(d: usize) -> f64 {
    let df = d as f64;
    let c = df * (df - 2.0);
    let pref = sphere_area(d) * (df - 2.0).powi(2) / (c * c) * c.powf((df + 2.0) / 2.0);
    pref * gl_half_pi(|t| t.sin().powi(d as i32 + 1) * t.cos().powi(d as i32 - 3))
}

fn w_crit_power(d: usize) -> f64 {
    let df = d as f64;
    let c = df * (df - 2.0);
    sphere_area(d) * c.powf(df / 2.0) * gl_half_pi(|t| (t.sin() * t.cos()).powi(d as i32 - 1))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `‖W‖²_{Ḣ¹}` by adaptive Simpson on `[0, R]` plus the binomial series of
/// the tail `∫_R^∞`.
fn w_hdot1_sq_adaptive(d: usize, tol: f64) -> f64 {
    let df = d as f64;
    let c = df * (df - 2.0);
    let pref = sphere_area(d) * (df - 2.0).powi(2) / (c * c);
    let radius = 20.0 * c.sqrt();
    let f = |r: f64| r.powi(d as i32 + 1) * (1.0 + r * r / c).powf(-df);
    let body = adaptive_simpson(&f, 0.0, radius, tol / pref);
    // ρ^{d+1}(1+ρ²/c)^{-d} = c^d ρ^{1-d} Σ_k binom(-d,k) (c/ρ²)^k
    let mut tail = 0.0;
    let mut coef = 1.0;
    for k in 0..200 {
        let e = df - 2.0 + 2.0 * k as f64;
        let term = coef * c.powi(k) * radius.powf(-e) / e;
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        coef *= -(df + k as f64) / (k as f64 + 1.0);
    }
    pref * (body + c.powf(df) * tail)
}

/// `E2 = ‖W‖_{Ḣ¹}` and `E1 = √(2/d) E2`.
pub fn critical_thresholds(d: usize) -> Result<CriticalThresholds> {
    if d < 3 {
        return Err(Error::Config(format!("critical thresholds need d ≥ 3, got {d}")));
    }
    let a = w_hdot1_sq(d);
    let e2 = a.sqrt();
    let df = d as f64;
    Ok(CriticalThresholds {
        d,
        e1: (2.0 / df).sqrt() * e2,
        e2,
        e2_check: w_hdot1_sq_adaptive(d, 1e-10).sqrt(),
        energy_w: 0.5 * a - (df - 2.0) / (2.0 * df) * w_crit_power(d),
    })
}

/// `λ^{1/α} u(λx)` sampled on the same grid.
pub fn rescale_radial(d: usize, alpha: f64, lambda: f64, grid: GridParams, q: impl Fn(f64) -> f64) -> Result<GridField> {
    radial_field(d, grid, |r| lambda.powf(1.0 / alpha) * q(lambda * r))
}
