//! Experiment configuration (TOML) and its exact validation.

use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    NormSuite,
    SolitonOrbit,
    ThresholdScan,
    CriticalNumbers,
    ProfileSynthetic,
    AlmostPeriodicity,
    StrichartzSweep,
}

impl Kind {
    /// Kinds that use `X = M̂^{dα}_{2,r}` as the state space.
    pub fn needs_state_space(self) -> bool {
        !matches!(self, Kind::NormSuite | Kind::CriticalNumbers)
    }
}

/// A real given either as a TOML number or as an exact string such as
/// `"3/2"` or `"1.5"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Num(f64),
    Text(String),
}

impl Real {
    pub fn rational(&self) -> Result<BigRational, CliError> {
        match self {
            // the shortest decimal that round-trips, so `3.6` reads as 18/5
            Real::Num(x) if x.is_finite() => parse_rational(&x.to_string()),
            Real::Num(x) => Err(CliError::Config(format!("{x} is not finite"))),
            Real::Text(s) => parse_rational(s),
        }
    }

    pub fn value(&self) -> Result<f64, CliError> {
        let q = self.rational()?;
        q.to_f64().ok_or_else(|| CliError::Config(format!("{self:?} is out of range")))
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::Num(x)
    }
}

fn parse_rational(s: &str) -> Result<BigRational, CliError> {
    let bad = || CliError::Config(format!("cannot read {s:?} as a rational number"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let q = BigRational::new(digits, scale);
    Ok(if neg { -q } else { q })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub n: usize,
    /// Half-width `L` in units of `π`; dyadic norms need a power of two.
    pub extent_pi: f64,
}

impl Grid {
    pub fn extent(&self) -> f64 {
        self.extent_pi * std::f64::consts::PI
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self { n: 1024, extent_pi: 8.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solver {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
}

impl Default for Solver {
    fn default() -> Self {
        Self { dt: 1e-4, t_end: 1.0, snapshot_stride: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Norms {
    pub indicator_grid: Grid,
    /// `r` of the closed-form indicator check.
    pub indicator_r: f64,
    pub pairs: usize,
    pub pair_grid: Grid,
}

impl Default for Norms {
    fn default() -> Self {
        Self {
            indicator_grid: Grid { n: 1024, extent_pi: 32.0 },
            indicator_r: 4.0,
            pairs: 100,
            pair_grid: Grid { n: 256, extent_pi: 8.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Duhamel {
    pub grid: Grid,
    /// The second run uses `dt/2` with the same stride, so the snapshot
    /// spacing halves too.
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
}

impl Default for Duhamel {
    fn default() -> Self {
        Self { grid: Grid { n: 512, extent_pi: 8.0 }, dt: 1e-3, t_end: 0.5, snapshot_stride: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scan {
    pub c: Vec<f64>,
    pub grid: Grid,
    pub solver: Solver,
}

impl Default for Scan {
    fn default() -> Self {
        Self {
            c: vec![0.01, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            grid: Grid { n: 4096, extent_pi: 64.0 },
            solver: Solver { dt: 1e-3, t_end: 10.0, snapshot_stride: 100 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Critical {
    pub dims: Vec<usize>,
}

impl Default for Critical {
    fn default() -> Self {
        Self { dims: vec![3, 4, 5] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSynthetic {
    pub grid: Grid,
    /// Planted scales `h_n = 2^m`.
    pub exponents: Vec<i32>,
    pub eps: f64,
}

impl Default for ProfileSynthetic {
    fn default() -> Self {
        Self { grid: Grid { n: 1 << 18, extent_pi: 1024.0 }, exponents: vec![2, 3, 4, 5], eps: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Periodicity {
    pub delta: f64,
    pub eta: f64,
    pub c_eta: f64,
    /// Boost `b0` of the moving soliton `e^{i b0 x} Q`.
    pub boost: f64,
    pub boost_grid: Grid,
    pub boost_solver: Solver,
}

impl Default for Periodicity {
    fn default() -> Self {
        Self {
            delta: 1.0,
            eta: 0.1,
            c_eta: 8.0,
            boost: 8.0,
            boost_grid: Grid { n: 2048, extent_pi: 32.0 },
            boost_solver: Solver { dt: 5e-4, t_end: 2.0, snapshot_stride: 200 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub samples: usize,
    pub t_max: f64,
    pub grid: Grid,
}

impl Default for Sweep {
    fn default() -> Self {
        Self { samples: 24, t_max: 8.0, grid: Grid { n: 2048, extent_pi: 64.0 } }
    }
}

fn one() -> usize {
    1
}

fn out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub alpha: Option<Real>,
    /// `None`: the middle of `((dα)', ((d+2)α)^*)`.
    #[serde(default)]
    pub r: Option<Real>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub norms: Norms,
    #[serde(default)]
    pub duhamel: Duhamel,
    #[serde(default)]
    pub scan: Scan,
    #[serde(default)]
    pub critical: Critical,
    #[serde(default)]
    pub profile: ProfileSynthetic,
    #[serde(default)]
    pub periodicity: Periodicity,
    #[serde(default)]
    pub sweep: Sweep,
}

/// `(d, α, r)` after validation; `α = r = 0` for critical-numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub d: usize,
    pub alpha: f64,
    pub r: f64,
}

impl ExperimentConfig {
    /// `d = 1`, `α = 3/2` and every section at its default.
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            d: 1,
            alpha: Some(Real::Text("3/2".into())),
            r: None,
            seed: 0,
            output_dir: out(),
            grid: Grid::default(),
            solver: Solver::default(),
            norms: Norms::default(),
            duhamel: Duhamel::default(),
            scan: Scan::default(),
            critical: Critical::default(),
            profile: ProfileSynthetic::default(),
            periodicity: Periodicity::default(),
            sweep: Sweep::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return Err(CliError::Usage("the config is empty; it needs at least `kind = \"...\"`".into()));
        }
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks the exponent assumptions exactly and returns `(d, α, r)`.
    pub fn validate(&self) -> Result<Exponents, CliError> {
        if self.d == 0 {
            return Err(CliError::Config("d must be at least 1".into()));
        }
        for (name, g) in self.grids() {
            if g.n < 4 || !g.n.is_power_of_two() {
                return Err(CliError::Config(format!("{name}.n = {} must be a power of two ≥ 4", g.n)));
            }
            if !(g.extent_pi > 0.0) || g.extent_pi.log2().fract() != 0.0 {
                return Err(CliError::Config(format!("{name}.extent_pi = {} must be a power of two", g.extent_pi)));
            }
        }
        if !(self.duhamel.dt > 0.0 && self.duhamel.t_end > 0.0 && self.duhamel.snapshot_stride > 0) {
            return Err(CliError::Config("duhamel needs dt > 0, t_end > 0 and snapshot_stride ≥ 1".into()));
        }
        for (name, s) in [("solver", &self.solver), ("scan.solver", &self.scan.solver), ("periodicity.boost_solver", &self.periodicity.boost_solver)] {
            if !(s.dt > 0.0 && s.t_end > 0.0 && s.snapshot_stride > 0) {
                return Err(CliError::Config(format!("{name} needs dt > 0, t_end > 0 and snapshot_stride ≥ 1")));
            }
        }
        if self.kind == Kind::CriticalNumbers {
            if self.critical.dims.is_empty() || self.critical.dims.iter().any(|&d| d < 3) {
                return Err(CliError::Config("critical.dims must be non-empty with every d ≥ 3".into()));
            }
            return Ok(Exponents { d: self.d, alpha: 0.0, r: 0.0 });
        }
        let alpha = self.alpha.as_ref().ok_or_else(|| CliError::Config("alpha is required".into()))?;
        let a = alpha.rational()?;
        if !a.is_positive() {
            return Err(CliError::Config("alpha must be positive".into()));
        }
        let d = BigRational::from_integer(BigInt::from(self.d));
        let two = BigRational::from_integer(BigInt::from(2));
        let pd = &d * &a;
        let r_default = || -> Result<BigRational, CliError> {
            let (lo, hi) = r_bounds(&d, &a).ok_or_else(|| no_r_range(self.d, &a))?;
            Ok((lo + hi) / &two)
        };
        let r = match &self.r {
            Some(r) => r.rational()?,
            None if self.kind.needs_state_space() => r_default()?,
            None => BigRational::from_integer(BigInt::from(4)),
        };
        if self.kind.needs_state_space() {
            let hi = &two / &d;
            let lo = &hi / (BigRational::one() + &two / (&d * (&d + BigRational::from_integer(BigInt::from(3)))));
            if !(a > lo && a < hi) {
                return Err(CliError::Config(format!(
                    "alpha = {a} violates (2/d)/(1 + 2/(d(d+3))) < alpha < 2/d, i.e. {lo} < alpha < {hi}"
                )));
            }
            let (rlo, rhi) = r_bounds(&d, &a).ok_or_else(|| no_r_range(self.d, &a))?;
            if !(r > rlo && r < rhi) {
                return Err(CliError::Config(format!(
                    "r = {r} violates (d alpha)' < r < ((d+2) alpha)^*, i.e. {rlo} < r < {rhi}"
                )));
            }
        } else if pd <= BigRational::one() {
            return Err(CliError::Config(format!("d alpha = {pd} must exceed 1")));
        }
        let f = |q: &BigRational| q.to_f64().unwrap_or(f64::NAN);
        Ok(Exponents { d: self.d, alpha: f(&a), r: f(&r) })
    }

    fn grids(&self) -> Vec<(&'static str, &Grid)> {
        vec![
            ("grid", &self.grid),
            ("norms.indicator_grid", &self.norms.indicator_grid),
            ("norms.pair_grid", &self.norms.pair_grid),
            ("duhamel.grid", &self.duhamel.grid),
            ("scan.grid", &self.scan.grid),
            ("profile.grid", &self.profile.grid),
            ("periodicity.boost_grid", &self.periodicity.boost_grid),
            ("sweep.grid", &self.sweep.grid),
        ]
    }
}

fn no_r_range(d: usize, a: &BigRational) -> CliError {
    CliError::Config(format!("no admissible r for d = {d}, alpha = {a}"))
}

/// `((dα)', p*)` with `p = (d+2)α` and `p* = min(p, 2p/(p-2))` for `p > 2`.
fn r_bounds(d: &BigRational, a: &BigRational) -> Option<(BigRational, BigRational)> {
    let one = BigRational::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let pd = d * a;
    if pd <= one {
        return None;
    }
    let lo = &pd / (&pd - &one);
    let p = (d + &two) * a;
    let hi = if p > two {
        let alt = &two * &p / (&p - &two);
        if alt < p {
            alt
        } else {
            p
        }
    } else {
        p
    };
    (lo < hi).then_some((lo, hi))
}
