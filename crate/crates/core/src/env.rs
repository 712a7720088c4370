//! Bandit environments over `[0, 1]^d`.
//!
//! An [`Environment`] couples a mean-payoff function with a reward law whose
//! support is `[0, 1]`. Every built-in family carries its exact `ℓ∞`
//! Lipschitz constant, its Hessian bound and its maximum, computed in closed
//! form so that regret accounting never depends on a numerical optimizer.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the arm space `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ArmPoint(Vec<f64>);

impl ArmPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArm("dimension must be at least 1".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidArm(format!("coordinate {c} outside [0, 1]")));
        }
        Ok(Self(coords))
    }

    /// The same value `c` on every one of the `d` axes.
    pub fn splat(c: f64, d: usize) -> Result<Self> {
        Self::new(vec![c; d])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `ℓ∞` distance to `other`.
    pub fn sup_distance(&self, other: &ArmPoint) -> f64 {
        sup_distance(&self.0, &other.0)
    }
}

impl TryFrom<Vec<f64>> for ArmPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<ArmPoint> for Vec<f64> {
    fn from(p: ArmPoint) -> Self {
        p.0
    }
}

pub(crate) fn sup_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Reward law around the mean payoff. All laws are supported on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// `Y ~ Bernoulli(f(x))`.
    #[default]
    Bernoulli,
    /// `Y = f(x)`.
    Zero,
    /// `Y ~ Uniform[f(x) - w, f(x) + w]` with `w = min(half_width, f(x), 1 - f(x))`,
    /// so the support never leaves `[0, 1]` and the mean stays `f(x)`.
    TruncatedUniform { half_width: f64 },
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::TruncatedUniform { half_width } if !(half_width > 0.0 && half_width <= 0.5) => {
                Err(Error::InvalidNoise(format!(
                    "truncated-uniform half width must lie in (0, 0.5], got {half_width}"
                )))
            }
            _ => Ok(()),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseSpec::Zero => mean,
            NoiseSpec::TruncatedUniform { half_width } => {
                let w = half_width.min(mean).min(1.0 - mean);
                let u: f64 = rng.random();
                (mean + w * (2.0 * u - 1.0)).clamp(0.0, 1.0)
            }
        }
    }
}

/// Bound `M` on the Hessian quadratic forms, `|yᵀ H(x) y| ≤ M ‖y‖∞²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianBound {
    Bounded(f64),
    /// The mean function is not twice differentiable.
    Unbounded,
}

impl HessianBound {
    /// `M` as a number, `+∞` when unbounded.
    pub fn value(&self) -> f64 {
        match *self {
            HessianBound::Bounded(m) => m,
            HessianBound::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, HessianBound::Bounded(_))
    }
}

/// Parameters of the cone-bump instances used by the minimax lower bound:
/// `f(x) = baseline + max(0, eps - L ‖x - center‖∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    pub d: usize,
    pub lipschitz: f64,
    pub eps: f64,
    pub center: ArmPoint,
    pub baseline: f64,
}

/// Built-in mean-payoff families.
///
/// Vector parameters of length 1 are broadcast to every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `f(x) = intercept + Σ slope_i x_i`.
    Affine { slope: Vec<f64>, intercept: f64 },
    /// `f(x) = offset + Σ coef_i (x_i - center_i)²`.
    Quadratic {
        coef: Vec<f64>,
        center: Vec<f64>,
        offset: f64,
    },
    /// `f(x) = 0.5 + (0.4 / d) Σ cos(2π κ x_i)`.
    Cosine { kappa: f64 },
    /// Cone bump, see [`HardInstanceSpec`]. `center` is broadcast like the
    /// other vector parameters.
    Hard {
        lipschitz: f64,
        eps: f64,
        center: Vec<f64>,
        baseline: f64,
    },
}

impl Family {
    /// `f ≡ c`.
    pub fn constant(c: f64) -> Self {
        Family::Affine {
            slope: vec![0.0],
            intercept: c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Affine { .. } => "affine",
            Family::Quadratic { .. } => "quadratic",
            Family::Cosine { .. } => "cosine",
            Family::Hard { .. } => "hard",
        }
    }
}

/// Resolved mean function with per-axis parameters.
#[derive(Debug, Clone, PartialEq)]
enum MeanFn {
    Affine { slope: Vec<f64>, intercept: f64 },
    Quadratic { coef: Vec<f64>, center: Vec<f64>, offset: f64 },
    Cosine { kappa: f64 },
    Hard { lipschitz: f64, eps: f64, center: Vec<f64>, baseline: f64 },
}

impl MeanFn {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFn::Affine { slope, intercept } => {
                intercept + slope.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>()
            }
            MeanFn::Quadratic { coef, center, offset } => {
                offset
                    + coef
                        .iter()
                        .zip(center)
                        .zip(x)
                        .map(|((c, z), xi)| c * (xi - z) * (xi - z))
                        .sum::<f64>()
            }
            MeanFn::Cosine { kappa } => {
                let omega = 2.0 * PI * kappa;
                let d = x.len() as f64;
                0.5 + 0.4 / d * x.iter().map(|xi| (omega * xi).cos()).sum::<f64>()
            }
            MeanFn::Hard { lipschitz, eps, center, baseline } => {
                baseline + (eps - lipschitz * sup_distance(x, center)).max(0.0)
            }
        }
    }

    /// Closed-form average over the box `Π [lo_i, hi_i]`, for the separable
    /// families.
    fn box_average(&self, lo: &[f64], hi: &[f64]) -> Option<f64> {
        let axes = lo.iter().zip(hi);
        match self {
            MeanFn::Affine { slope, intercept } => Some(
                intercept
                    + slope
                        .iter()
                        .zip(axes)
                        .map(|(a, (l, h))| a * 0.5 * (l + h))
                        .sum::<f64>(),
            ),
            MeanFn::Quadratic { coef, center, offset } => Some(
                offset
                    + coef
                        .iter()
                        .zip(center)
                        .zip(axes)
                        .map(|((c, z), (l, h))| {
                            let (a, b) = (l - z, h - z);
                            // mean of (x - z)² over [l, h]
                            c * (a * a + a * b + b * b) / 3.0
                        })
                        .sum::<f64>(),
            ),
            MeanFn::Cosine { kappa } => {
                let omega = 2.0 * PI * kappa;
                let d = lo.len() as f64;
                let sum: f64 = axes
                    .map(|(l, h)| ((omega * h).sin() - (omega * l).sin()) / (omega * (h - l)))
                    .sum();
                Some(0.5 + 0.4 / d * sum)
            }
            MeanFn::Hard { .. } => None,
        }
    }
}

/// Metadata derived in closed form for one mean function.
struct Certified {
    lipschitz: f64,
    hessian: HessianBound,
    f_star: f64,
    argmax: Vec<f64>,
    f_min: f64,
}

/// A stochastic environment: mean payoff, reward law and certified metadata.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    family: Family,
    mean: MeanFn,
    noise: NoiseSpec,
    d: usize,
    lipschitz: f64,
    hessian: HessianBound,
    f_star: f64,
    argmax: ArmPoint,
}

fn broadcast(name: &str, v: &[f64], d: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(Error::InvalidEnvironment(format!(
            "parameter `{name}` has {n} entries, expected 1 or {d}"
        ))),
    }
}

fn finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidEnvironment(format!("parameter `{name}` must be finite")))
    }
}

impl Environment {
    /// Builds a member of one of the built-in families, in dimension `d`.
    ///
    /// Fails when the range of the mean function leaves `[0, 1]`.
    pub fn from_family(family: &Family, d: usize, noise: NoiseSpec) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidEnvironment("dimension must be at least 1".into()));
        }
        noise.validate()?;
        let mean = match family {
            Family::Affine { slope, intercept } => {
                finite("slope", slope)?;
                finite("intercept", &[*intercept])?;
                MeanFn::Affine {
                    slope: broadcast("slope", slope, d)?,
                    intercept: *intercept,
                }
            }
            Family::Quadratic { coef, center, offset } => {
                finite("coef", coef)?;
                finite("center", center)?;
                finite("offset", &[*offset])?;
                MeanFn::Quadratic {
                    coef: broadcast("coef", coef, d)?,
                    center: broadcast("center", center, d)?,
                    offset: *offset,
                }
            }
            Family::Cosine { kappa } => {
                if !(kappa.is_finite() && *kappa > 0.0) {
                    return Err(Error::InvalidEnvironment(format!(
                        "cosine frequency must be positive, got {kappa}"
                    )));
                }
                MeanFn::Cosine { kappa: *kappa }
            }
            Family::Hard { lipschitz, eps, center, baseline } => {
                let center = ArmPoint::new(broadcast("center", center, d)?)?;
                let spec = HardInstanceSpec {
                    d,
                    lipschitz: *lipschitz,
                    eps: *eps,
                    center,
                    baseline: *baseline,
                };
                return Self::hard_instance(&spec, noise);
            }
        };
        Self::certify(family.clone(), mean, d, noise)
    }

    /// The cone-bump instance `baseline + max(0, eps - L ‖x - center‖∞)`.
    pub fn hard_instance(spec: &HardInstanceSpec, noise: NoiseSpec) -> Result<Self> {
        let HardInstanceSpec { d, lipschitz, eps, ref center, baseline } = *spec;
        if d == 0 || center.dim() != d {
            return Err(Error::InvalidEnvironment(format!(
                "hard instance center has dimension {}, expected d = {d} ≥ 1",
                center.dim()
            )));
        }
        if !(lipschitz.is_finite() && lipschitz > 0.0) {
            return Err(Error::InvalidEnvironment(format!(
                "hard instance needs L > 0, got {lipschitz}"
            )));
        }
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(Error::InvalidEnvironment(format!(
                "hard instance needs 0 < eps ≤ 1/4, got {eps}"
            )));
        }
        if !(baseline >= eps && baseline + eps <= 1.0) {
            return Err(Error::InvalidEnvironment(format!(
                "hard instance baseline {baseline} must lie in [eps, 1 - eps] = [{eps}, {}]",
                1.0 - eps
            )));
        }
        noise.validate()?;
        let family = Family::Hard {
            lipschitz,
            eps,
            center: center.coords().to_vec(),
            baseline,
        };
        let mean = MeanFn::Hard {
            lipschitz,
            eps,
            center: center.coords().to_vec(),
            baseline,
        };
        Self::certify(family, mean, d, noise)
    }

    /// `f ≡ c` in dimension `d`.
    pub fn constant(c: f64, d: usize, noise: NoiseSpec) -> Result<Self> {
        Self::from_family(&Family::constant(c), d, noise)
    }

    fn certify(family: Family, mean: MeanFn, d: usize, noise: NoiseSpec) -> Result<Self> {
        let cert = certificate(&mean, d);
        const RANGE_SLACK: f64 = 1e-12;
        if cert.f_min < -RANGE_SLACK || cert.f_star > 1.0 + RANGE_SLACK {
            return Err(Error::InvalidEnvironment(format!(
                "{} mean function ranges over [{}, {}], outside [0, 1]",
                family.name(),
                cert.f_min,
                cert.f_star
            )));
        }
        Ok(Self {
            family,
            mean,
            noise,
            d,
            lipschitz: cert.lipschitz,
            hessian: cert.hessian,
            f_star: cert.f_star,
            argmax: ArmPoint::new(cert.argmax)?,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `ℓ∞` Lipschitz constant, the maximum of `‖∇f‖₁` for smooth families.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn hessian_bound(&self) -> HessianBound {
        self.hessian
    }

    /// `sup f` over the cube.
    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn argmax_hint(&self) -> &ArmPoint {
        &self.argmax
    }

    /// Mean payoff at `x`; `x` must have `d` coordinates.
    #[inline]
    pub fn mean(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        self.mean.eval(x)
    }

    /// Instantaneous pseudo-regret `f* - f(x)`, clamped at zero.
    #[inline]
    pub fn gap(&self, x: &[f64]) -> f64 {
        (self.f_star - self.mean(x)).max(0.0)
    }

    /// Draws a reward for arm `x`.
    #[inline]
    pub fn draw_reward<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        self.noise.sample(self.mean(x), rng)
    }

    /// Closed-form average of `f` over the box `Π [lo_i, hi_i]`, when the
    /// family admits one.
    pub fn box_average(&self, lo: &[f64], hi: &[f64]) -> Option<f64> {
        self.mean.box_average(lo, hi)
    }

    /// Stable textual identifier (family, parameters, dimension, noise).
    pub fn id(&self) -> String {
        #[derive(Serialize)]
        struct Id<'a> {
            #[serde(flatten)]
            family: &'a Family,
            d: usize,
            noise: NoiseSpec,
        }
        serde_json::to_string(&Id {
            family: &self.family,
            d: self.d,
            noise: self.noise,
        })
        .expect("environment id serializes")
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (d = {}, L = {}, M = {}, f* = {})",
            self.family.name(),
            self.d,
            self.lipschitz,
            self.hessian.value(),
            self.f_star
        )
    }
}

fn certificate(mean: &MeanFn, d: usize) -> Certified {
    match mean {
        MeanFn::Affine { slope, intercept } => Certified {
            lipschitz: slope.iter().map(|a| a.abs()).sum(),
            hessian: HessianBound::Bounded(0.0),
            f_star: intercept + slope.iter().map(|a| a.max(0.0)).sum::<f64>(),
            argmax: slope.iter().map(|&a| if a > 0.0 { 1.0 } else { 0.0 }).collect(),
            f_min: intercept + slope.iter().map(|a| a.min(0.0)).sum::<f64>(),
        },
        MeanFn::Quadratic { coef, center, offset } => {
            let mut argmax = Vec::with_capacity(d);
            let (mut hi, mut lo, mut lip) = (0.0, 0.0, 0.0);
            let (mut pos, mut neg) = (0.0, 0.0);
            for (&c, &z) in coef.iter().zip(center) {
                let near = z.clamp(0.0, 1.0);
                let far = if (1.0 - z).abs() >= z.abs() { 1.0 } else { 0.0 };
                let term = |x: f64| c * (x - z) * (x - z);
                let (x_max, x_min) = if c > 0.0 { (far, near) } else { (near, far) };
                argmax.push(x_max);
                hi += term(x_max);
                lo += term(x_min);
                lip += 2.0 * c.abs() * z.abs().max((1.0 - z).abs());
                if c > 0.0 {
                    pos += c;
                } else {
                    neg -= c;
                }
            }
            Certified {
                lipschitz: lip,
                hessian: HessianBound::Bounded(2.0 * f64::max(pos, neg)),
                f_star: offset + hi,
                argmax,
                f_min: offset + lo,
            }
        }
        MeanFn::Cosine { kappa } => {
            let sin_peak = if *kappa >= 0.25 {
                1.0
            } else {
                (2.0 * PI * kappa).sin()
            };
            Certified {
                lipschitz: 0.8 * PI * kappa * sin_peak,
                hessian: HessianBound::Bounded(1.6 * PI * PI * kappa * kappa),
                f_star: 0.9,
                argmax: vec![0.0; d],
                f_min: 0.1,
            }
        }
        MeanFn::Hard { lipschitz, eps, center, baseline } => Certified {
            lipschitz: *lipschitz,
            hessian: HessianBound::Unbounded,
            f_star: baseline + eps,
            argmax: center.clone(),
            f_min: *baseline,
        },
    }
}
