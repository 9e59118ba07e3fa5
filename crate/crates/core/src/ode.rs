//! Riccati-type prescribing functions `a·h² + h' + b = 0`, the weights `u`
//! paired with them, and the perturbed profiles used in existence arguments.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::grid::{fmt17, Grid, Profile};

/// Largest admissible perturbation size.
pub const EPSILON_MAX: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    RicciSpectral,
    ScalarSpectral,
    RicciPointwise,
}

/// Parameters of a curvature bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub gamma: f64,
    pub lambda: f64,
    pub kind: BoundKind,
    pub n: usize,
    pub kappa: i32,
}

impl SpectralParams {
    pub fn ricci(gamma: f64, lambda: f64) -> Result<Self> {
        Self {
            gamma,
            lambda,
            kind: BoundKind::RicciSpectral,
            n: 3,
            kappa: 0,
        }
        .validated()
    }

    pub fn scalar(n: usize, gamma: f64, lambda: f64) -> Result<Self> {
        Self {
            gamma,
            lambda,
            kind: BoundKind::ScalarSpectral,
            n,
            kappa: 0,
        }
        .validated()
    }

    /// Pointwise bound `Ric ≥ 2κ` in dimension three.
    pub fn pointwise(kappa: i32) -> Result<Self> {
        Self {
            gamma: 0.0,
            lambda: 2.0 * kappa as f64,
            kind: BoundKind::RicciPointwise,
            n: 3,
            kappa,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !self.gamma.is_finite() || !self.lambda.is_finite() {
            return bad("gamma and lambda must be finite".into());
        }
        match self.kind {
            BoundKind::RicciSpectral => {
                if !(0.0..4.0).contains(&self.gamma) {
                    return bad(format!("Ricci bound needs 0 <= gamma < 4, got {}", self.gamma));
                }
                if self.lambda <= 0.0 {
                    return bad(format!("lambda must be positive, got {}", self.lambda));
                }
                if self.n != 3 {
                    return bad(format!("Ricci bound is three-dimensional, got n = {}", self.n));
                }
            }
            BoundKind::ScalarSpectral => {
                if !(3..=7).contains(&self.n) {
                    return bad(format!("scalar bound needs 3 <= n <= 7, got {}", self.n));
                }
                let cap = 2.0 * self.n as f64 / (self.n as f64 - 1.0);
                if !(self.gamma >= 0.0 && self.gamma < cap) {
                    return bad(format!(
                        "scalar bound needs 0 <= gamma < {cap}, got {}",
                        self.gamma
                    ));
                }
                if self.lambda <= 0.0 {
                    return bad(format!("lambda must be positive, got {}", self.lambda));
                }
                if scalar_coefficient(self.n, self.gamma) <= 0.0 {
                    return bad("scalar coefficient is not positive".into());
                }
            }
            BoundKind::RicciPointwise => {
                if !(-1..=1).contains(&self.kappa) {
                    return bad(format!("kappa must be -1, 0 or 1, got {}", self.kappa));
                }
                if self.n != 3 {
                    return bad(format!("pointwise bound is three-dimensional, got n = {}", self.n));
                }
            }
        }
        Ok(())
    }

    /// Coefficient `a` of `h²` in the Riccati equation.
    pub fn quadratic_coefficient(&self) -> f64 {
        match self.kind {
            BoundKind::RicciSpectral => 1.0 - 0.25 * self.gamma,
            BoundKind::ScalarSpectral => scalar_coefficient(self.n, self.gamma),
            BoundKind::RicciPointwise => 1.0,
        }
    }

    /// Constant term `b` of the Riccati equation.
    pub fn forcing(&self) -> f64 {
        match self.kind {
            BoundKind::RicciPointwise => 4.0 * self.kappa as f64,
            _ => self.lambda,
        }
    }

    /// Frequency `√(a·Λ)` of the tangent families.
    pub fn frequency(&self) -> f64 {
        (self.quadratic_coefficient() * self.lambda).sqrt()
    }

    /// Half-width `π/(2√(aΛ))` of the maximal interval of the tangent families.
    pub fn half_width(&self) -> f64 {
        FRAC_PI_2 / self.frequency()
    }

    /// `D` with `(log u)' = h/D` on the rigidity models.
    pub fn log_weight_divisor(&self) -> f64 {
        match self.kind {
            BoundKind::ScalarSpectral => {
                let n = self.n as f64;
                2.0 * (n - 1.0) + self.gamma * (2.0 - n)
            }
            _ => 2.0,
        }
    }
}

/// `(−nγ + γ + 2n) / (4(n−1) + 2γ(2−n))`.
pub fn scalar_coefficient(n: usize, gamma: f64) -> f64 {
    let n = n as f64;
    (-n * gamma + gamma + 2.0 * n) / (4.0 * (n - 1.0) + 2.0 * gamma * (2.0 - n))
}

fn tangent_family(params: &SpectralParams, s: f64) -> Result<[f64; 2]> {
    let k = params.frequency();
    let lo = -FRAC_PI_2 / k;
    let hi = FRAC_PI_2 / k;
    if !(s > lo && s < hi) {
        return Err(Error::Domain { t: s, lo, hi });
    }
    let amp = (params.lambda / params.quadratic_coefficient()).sqrt();
    let sec = 1.0 / (k * s).cos();
    Ok([-amp * (k * s).tan(), -params.lambda * sec * sec])
}

fn require(params: &SpectralParams, kind: BoundKind) -> Result<()> {
    params.validate()?;
    if params.kind != kind {
        return Err(Error::InvalidParams(format!(
            "expected {kind:?} parameters, got {:?}",
            params.kind
        )));
    }
    Ok(())
}

/// `−√(Λ/(1−γ/4)) tan(√(Λ(1−γ/4)) t)`.
pub fn h_ricci(params: &SpectralParams, t: f64) -> Result<f64> {
    require(params, BoundKind::RicciSpectral)?;
    Ok(tangent_family(params, t)?[0])
}

/// `−√(Λ/c) tan(√(Λc)(t + shift))` with the scalar coefficient `c`.
pub fn h_scalar(params: &SpectralParams, t: f64, shift: f64) -> Result<f64> {
    require(params, BoundKind::ScalarSpectral)?;
    Ok(tangent_family(params, t + shift)?[0])
}

fn kappa_domain(kappa: i32) -> (f64, f64) {
    if kappa == 1 {
        (0.0, FRAC_PI_2)
    } else {
        (0.0, f64::INFINITY)
    }
}

fn kappa_jet(kappa: i32, t: f64) -> Result<[f64; 2]> {
    let (lo, hi) = kappa_domain(kappa);
    if !(t > lo && t < hi) {
        return Err(Error::Domain { t, lo, hi });
    }
    Ok(match kappa {
        1 => {
            let s = (2.0 * t).sin();
            [2.0 * (2.0 * t).cos() / s, -4.0 / (s * s)]
        }
        0 => [1.0 / t, -1.0 / (t * t)],
        -1 => {
            let s = (2.0 * t).sinh();
            [2.0 * (2.0 * t).cosh() / s, -4.0 / (s * s)]
        }
        other => {
            return Err(Error::InvalidParams(format!(
                "kappa must be -1, 0 or 1, got {other}"
            )))
        }
    })
}

/// Solution of `η' + η² + 4κ = 0` blowing up at `t = 0`.
pub fn h_kappa(kappa: i32, t: f64) -> Result<f64> {
    Ok(kappa_jet(kappa, t)?[0])
}

/// Positive weight paired with the tangent families, normalised by `u(0) = 1`.
pub fn u_profile(params: &SpectralParams, t: f64) -> Result<f64> {
    Ok(u_jet(params, t)?[0])
}

/// `[u, u', u'']` at an interior point.
pub fn u_jet(params: &SpectralParams, t: f64) -> Result<[f64; 3]> {
    params.validate()?;
    if params.kind == BoundKind::RicciPointwise {
        return Err(Error::InvalidParams(
            "the pointwise bound has no weight function".into(),
        ));
    }
    let [h, dh] = tangent_family(params, t)?;
    let k = params.frequency();
    let d = params.log_weight_divisor();
    // (log u)' = h/D and h = −√(Λ/a) tan(kt) give u = cos(kt)^{1/(aD)}
    let exponent = 1.0 / (params.quadratic_coefficient() * d);
    let u = (k * t).cos().powf(exponent);
    let l = h / d;
    Ok([u, u * l, u * (dh / d + l * l)])
}

/// Samples `u` on `grid`. Endpoints on the poles get the limit value `0`.
pub fn u_profile_on(params: &SpectralParams, grid: Grid) -> Result<Profile> {
    let half = params.half_width();
    if grid.t_min() < -half * (1.0 + 1e-12) || grid.t_max() > half * (1.0 + 1e-12) {
        return Err(Error::Domain {
            t: if grid.t_min() < -half { grid.t_min() } else { grid.t_max() },
            lo: -half,
            hi: half,
        });
    }
    Profile::from_closed_form(grid, |t| {
        if t.abs() >= half * (1.0 - 1e-14) {
            [0.0, f64::NAN, f64::NAN]
        } else {
            u_jet(params, t).unwrap_or([f64::NAN; 3])
        }
    })
}

/// Odd bump `α` with `α' = (m − |t|)·exp(−4t²/ℓ²)`.
///
/// The default turning point `m = ℓ/2` makes `α' > 0` on `[0, ℓ/2)`,
/// `α' < 0` beyond, and `α > 0` on `(0, ℓ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSpec {
    pub ell: f64,
    pub turning: f64,
}

impl AlphaSpec {
    pub fn new(ell: f64) -> Self {
        Self {
            ell,
            turning: 0.5 * ell,
        }
    }

    pub fn alpha(&self, t: f64) -> f64 {
        let (l, m) = (self.ell, self.turning);
        let a = t.abs();
        let x = 2.0 * a / l;
        let v = m * l * PI.sqrt() / 4.0 * erf(x) + l * l / 8.0 * ((-x * x).exp() - 1.0);
        v.copysign(t)
    }

    pub fn alpha_prime(&self, t: f64) -> f64 {
        let x = 2.0 * t / self.ell;
        (self.turning - t.abs()) * (-x * x).exp()
    }

    /// Checks the sign conditions on `samples` points of `[0, ℓ]`.
    pub fn validate(&self, samples: usize) -> Result<()> {
        if !(self.ell.is_finite() && self.ell > 0.0) {
            return Err(Error::InvalidAlpha(format!("length {} is not positive", self.ell)));
        }
        let half = 0.5 * self.ell;
        for k in 0..=samples {
            let t = self.ell * k as f64 / samples as f64;
            let a = self.alpha(t);
            let da = self.alpha_prime(t);
            if t > 0.0 && a <= 0.0 {
                return Err(Error::InvalidAlpha(format!("alpha({t}) = {a} is not positive")));
            }
            if t < half && da <= 0.0 {
                return Err(Error::InvalidAlpha(format!(
                    "alpha'({t}) = {da} should be positive before l/2"
                )));
            }
            if t > half && da >= 0.0 {
                return Err(Error::InvalidAlpha(format!(
                    "alpha'({t}) = {da} should be negative after l/2"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Perturbation {
    epsilon: f64,
    alpha: AlphaSpec,
    cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Tangent,
    Kappa(i32),
}

/// A prescribing function on its maximal open domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HProfile {
    params: SpectralParams,
    shift: f64,
    family: Family,
    perturbation: Option<Perturbation>,
}

impl HProfile {
    /// The tangent family of a spectral bound, or `η_κ` for the pointwise one.
    pub fn new(params: SpectralParams) -> Result<Self> {
        Self::shifted(params, 0.0)
    }

    /// Phase-shifted profile `h(t + shift)`.
    pub fn shifted(params: SpectralParams, shift: f64) -> Result<Self> {
        params.validate()?;
        let family = match params.kind {
            BoundKind::RicciPointwise => Family::Kappa(params.kappa),
            _ => Family::Tangent,
        };
        Ok(Self {
            params,
            shift,
            family,
            perturbation: None,
        })
    }

    pub fn params(&self) -> &SpectralParams {
        &self.params
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn epsilon(&self) -> f64 {
        self.perturbation.map_or(0.0, |p| p.epsilon)
    }

    /// Open interval on which the profile is finite.
    pub fn domain(&self) -> (f64, f64) {
        if let Some(p) = self.perturbation {
            return (-p.cutoff, p.cutoff);
        }
        match self.family {
            Family::Tangent => {
                let half = self.params.half_width();
                (-half - self.shift, half - self.shift)
            }
            Family::Kappa(k) => {
                let (lo, hi) = kappa_domain(k);
                (lo - self.shift, hi - self.shift)
            }
        }
    }

    fn base(&self, s: f64) -> Result<[f64; 2]> {
        match self.family {
            Family::Tangent => tangent_family(&self.params, s + self.shift),
            Family::Kappa(k) => kappa_jet(k, s + self.shift),
        }
    }

    /// `[h(t), h'(t)]`.
    pub fn jet(&self, t: f64) -> Result<[f64; 2]> {
        match self.perturbation {
            None => self.base(t),
            Some(p) => {
                if t.abs() >= p.cutoff {
                    return Err(Error::Domain {
                        t,
                        lo: -p.cutoff,
                        hi: p.cutoff,
                    });
                }
                let s = t + p.epsilon * p.alpha.alpha(t);
                let [v, d] = self.base(s)?;
                Ok([v, d * (1.0 + p.epsilon * p.alpha.alpha_prime(t))])
            }
        }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.jet(t)?[0])
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        Ok(self.jet(t)?[1])
    }

    /// `a·h² + h' + b`, zero for the unperturbed families.
    pub fn residual(&self, t: f64) -> Result<f64> {
        let [h, dh] = self.jet(t)?;
        Ok(self.params.quadratic_coefficient() * h * h + dh + self.params.forcing())
    }

    /// `ε·α'(t)·η'(t + εα(t))`, the closed form of the perturbed residual.
    pub fn predicted_residual(&self, t: f64) -> Result<f64> {
        match self.perturbation {
            None => Ok(0.0),
            Some(p) => {
                let s = t + p.epsilon * p.alpha.alpha(t);
                Ok(p.epsilon * p.alpha.alpha_prime(t) * self.base(s)?[1])
            }
        }
    }

    /// CSV `t,h,residual` on `grid` (which must lie inside the domain).
    pub fn to_csv(&self, grid: &Grid) -> Result<String> {
        let mut s = String::from("t,h,residual\n");
        for t in grid.points() {
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt17(t),
                fmt17(self.value(t)?),
                fmt17(self.residual(t)?)
            );
        }
        Ok(s)
    }
}

/// `η_ε(t) = η(t + εα(t))` on `(−T_ε, T_ε)` for a spectral tangent family.
pub fn perturbed_profile(params: &SpectralParams, epsilon: f64, alpha: AlphaSpec) -> Result<HProfile> {
    params.validate()?;
    if params.kind == BoundKind::RicciPointwise {
        return Err(Error::InvalidParams(
            "perturbations are defined for the spectral families only".into(),
        ));
    }
    if !(0.0..=EPSILON_MAX).contains(&epsilon) {
        return Err(Error::InvalidParams(format!(
            "epsilon must lie in [0, {EPSILON_MAX}], got {epsilon}"
        )));
    }
    alpha.validate(2000)?;
    let pole = params.half_width();
    // t + εα(t) must stay increasing for the cutoff to be well defined
    let min_slope = 1.0 + epsilon * alpha.alpha_prime(pole).min(alpha.alpha_prime(alpha.ell));
    if min_slope <= 0.0 {
        return Err(Error::InvalidAlpha("t + eps*alpha(t) is not increasing".into()));
    }
    let phase = |t: f64| t + epsilon * alpha.alpha(t) - pole;
    let (mut lo, mut hi) = (0.0, pole);
    while phase(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phase(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let mut base = HProfile::new(*params)?;
    base.perturbation = Some(Perturbation {
        epsilon,
        alpha,
        cutoff: lo,
    });
    Ok(base)
}

/// Outcome of sampling the perturbed residual on both sides of `ℓ/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignDichotomy {
    /// Largest residual seen on `|t| < ℓ/2` (must be negative).
    pub inner_max: f64,
    /// Smallest residual seen on `ℓ/2 < |t| < T_ε` (must be positive).
    pub outer_min: f64,
    pub cutoff: f64,
    pub holds: bool,
}

/// Samples the residual of a perturbed profile at `samples` points per side.
pub fn sign_dichotomy(profile: &HProfile, samples: usize) -> Result<SignDichotomy> {
    let Some(p) = profile.perturbation else {
        return Err(Error::InvalidParams("profile is not perturbed".into()));
    };
    let half = 0.5 * p.alpha.ell;
    let mut inner_max = f64::NEG_INFINITY;
    let mut outer_min = f64::INFINITY;
    for k in 1..samples {
        let t = p.cutoff * k as f64 / samples as f64;
        if (t - half).abs() < 1e-12 * p.cutoff {
            continue;
        }
        for s in [t, -t] {
            let r = profile.residual(s)?;
            if t < half {
                inner_max = inner_max.max(r);
            } else {
                outer_min = outer_min.min(r);
            }
        }
    }
    Ok(SignDichotomy {
        inner_max,
        outer_min,
        cutoff: p.cutoff,
        holds: inner_max < 0.0 && outer_min > 0.0,
    })
}

/// Classical fourth-order Runge–Kutta for a scalar ODE `y' = f(t, y)`.
pub fn rk4(f: impl Fn(f64, f64) -> f64, t0: f64, y0: f64, t1: f64, max_step: f64) -> f64 {
    let steps = ((t1 - t0).abs() / max_step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let (mut t, mut y) = (t0, y0);
    for _ in 0..steps {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    y
}
