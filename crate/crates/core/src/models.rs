//! Constructors for the rigidity model bands of each curvature bound.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};
use crate::geometry::Band;
use crate::grid::{Grid, Profile, DEFAULT_POINTS};
use crate::ode::{HProfile, SpectralParams};

/// Default lower end of the κ-model intervals (the warps degenerate at `t = 0`).
pub const KAPPA_T_MINUS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelFamily {
    RicciSpectralModel,
    ScalarSpectralModel,
    KappaModel,
}

fn default_n() -> usize {
    3
}

fn default_lambda() -> f64 {
    1.0
}

fn default_phi0() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_points() -> usize {
    DEFAULT_POINTS
}

/// Model description as read from a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: ModelFamily,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub kappa: i32,
    /// `φ₁'(0)/φ₁(0)` for the Ricci family.
    #[serde(default)]
    pub beta: f64,
    /// Anisotropy of the κ family, in `[0, 1]`.
    #[serde(default)]
    pub c: f64,
    #[serde(default = "default_phi0")]
    pub phi0: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_lengths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_plus: Option<f64>,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

impl ModelSpec {
    pub fn ricci(gamma: f64, lambda: f64, beta: f64) -> Self {
        Self {
            family: ModelFamily::RicciSpectralModel,
            n: 3,
            gamma,
            lambda,
            kappa: 0,
            beta,
            c: 0.0,
            phi0: default_phi0(),
            fiber_lengths: None,
            t_minus: None,
            t_plus: None,
            n_points: DEFAULT_POINTS,
        }
    }

    pub fn scalar(n: usize, gamma: f64, lambda: f64) -> Self {
        Self {
            family: ModelFamily::ScalarSpectralModel,
            n,
            ..Self::ricci(gamma, lambda, 0.0)
        }
    }

    pub fn kappa(kappa: i32, c: f64) -> Self {
        Self {
            family: ModelFamily::KappaModel,
            kappa,
            c,
            gamma: 0.0,
            ..Self::ricci(0.0, 1.0, 0.0)
        }
    }

    pub fn with_interval(mut self, t_minus: f64, t_plus: f64) -> Self {
        self.t_minus = Some(t_minus);
        self.t_plus = Some(t_plus);
        self
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }

    pub fn params(&self) -> Result<SpectralParams> {
        match self.family {
            ModelFamily::RicciSpectralModel => SpectralParams::ricci(self.gamma, self.lambda),
            ModelFamily::ScalarSpectralModel => {
                SpectralParams::scalar(self.n, self.gamma, self.lambda)
            }
            ModelFamily::KappaModel => SpectralParams::pointwise(self.kappa),
        }
    }

    /// `[t₋, t₊]`, defaulting to the maximal interval of the family.
    pub fn interval(&self) -> Result<(f64, f64)> {
        let (lo, hi) = match self.family {
            ModelFamily::KappaModel => {
                let hi = if self.kappa == 1 {
                    FRAC_PI_2 - KAPPA_T_MINUS
                } else {
                    1.5
                };
                (
                    self.t_minus.unwrap_or(KAPPA_T_MINUS),
                    self.t_plus.unwrap_or(hi),
                )
            }
            _ => {
                let half = self.params()?.half_width();
                (self.t_minus.unwrap_or(-half), self.t_plus.unwrap_or(half))
            }
        };
        if !(lo < hi) {
            return Err(Error::InvalidParams(format!(
                "interval [{lo}, {hi}] is empty"
            )));
        }
        Ok((lo, hi))
    }

    pub fn grid(&self) -> Result<Grid> {
        let (lo, hi) = self.interval()?;
        Grid::new(lo, hi, self.n_points)
    }

    /// The prescribing function the model saturates.
    pub fn h_profile(&self) -> Result<HProfile> {
        HProfile::new(self.params()?)
    }

    /// Weight `u` of the model (identically one for the pointwise bound).
    pub fn u_profile(&self, grid: Grid) -> Result<Profile> {
        match self.family {
            ModelFamily::KappaModel => Profile::from_closed_form(grid, |_| [1.0, 0.0, 0.0]),
            _ => crate::ode::u_profile_on(&self.params()?, grid),
        }
    }

    fn fibers(&self) -> Vec<f64> {
        let count = match self.family {
            ModelFamily::ScalarSpectralModel => self.n - 1,
            _ => 2,
        };
        self.fiber_lengths.clone().unwrap_or_else(|| vec![1.0; count])
    }

    pub fn build(&self) -> Result<Band> {
        match self.family {
            ModelFamily::RicciSpectralModel => build_ricci_model(self),
            ModelFamily::ScalarSpectralModel => build_scalar_model(self),
            ModelFamily::KappaModel => build_kappa_model(self),
        }
    }
}

/// `∫₀^θ cos(s)^μ ds` for `μ > −1` and `|θ| ≤ π/2`.
pub fn cos_power_integral(mu: f64, theta: f64) -> f64 {
    let x = theta.sin().powi(2).min(1.0);
    let v = if mu == -1.0 {
        theta.abs().tan().asinh()
    } else {
        let b = 0.5 * (mu + 1.0);
        0.5 * ln_beta(0.5, b).exp() * beta_reg(0.5, b, x)
    };
    v.copysign(theta)
}

/// Per-factor cosine exponent `(1−γ/2)/(2−γ/2)` of the Ricci model.
pub fn ricci_warp_exponent(gamma: f64) -> f64 {
    (1.0 - 0.5 * gamma) / (2.0 - 0.5 * gamma)
}

/// The exponent `(1−γ/2)/(2−γ/8)` found in some statements of the model.
pub fn ricci_warp_exponent_alt(gamma: f64) -> f64 {
    (1.0 - 0.5 * gamma) / (2.0 - 0.125 * gamma)
}

fn check_pole_interval(half: f64, lo: f64, hi: f64) -> Result<()> {
    let slack = half * 1e-12;
    if lo < -half - slack || hi > half + slack {
        return Err(Error::PoleProximity(format!(
            "interval [{lo}, {hi}] leaves the maximal interval [{}, {half}]",
            -half
        )));
    }
    Ok(())
}

fn on_pole(t: f64, half: f64) -> bool {
    t.abs() >= half * (1.0 - 1e-14)
}

/// `2β² ≤ ½(1−γ/2)Λ`, the admissible range of the Ricci model.
pub fn check_beta_restriction(gamma: f64, lambda: f64, beta: f64) -> Result<()> {
    let cap = 0.5 * (1.0 - 0.5 * gamma) * lambda;
    let need = 2.0 * beta * beta;
    if need > cap + 1e-12 * cap.abs().max(1e-300) || cap < 0.0 {
        return Err(Error::Constraint(format!(
            "beta = {beta} violates ½(1−γ/2)Λ ≥ 2(φ′(0)/φ(0))²: ½(1−γ/2)Λ = {cap}, 2β² = {need}"
        )));
    }
    Ok(())
}

/// `[φ, φ', φ'']` of `φ₀·cos(kt)^p·exp(β∫₀ᵗ cos(ks)^{−2p} ds)`.
fn ricci_warp_jet(k: f64, p: f64, beta: f64, scale: f64, t: f64) -> [f64; 3] {
    let c = (k * t).cos();
    let integral = cos_power_integral(-2.0 * p, k * t) / k;
    let phi = scale * c.powf(p) * (beta * integral).exp();
    let tan = (k * t).tan();
    let pull = c.powf(-2.0 * p);
    let l = -p * k * tan + beta * pull;
    let dl = -p * k * k / (c * c) + 2.0 * beta * p * k * tan * pull;
    [phi, phi * l, phi * (dl + l * l)]
}

pub fn build_ricci_model(spec: &ModelSpec) -> Result<Band> {
    let params = spec.params()?;
    check_beta_restriction(spec.gamma, spec.lambda, spec.beta)?;
    check_scales(spec)?;
    let (lo, hi) = spec.interval()?;
    let half = params.half_width();
    check_pole_interval(half, lo, hi)?;
    let grid = spec.grid()?;
    let k = params.frequency();
    let p = ricci_warp_exponent(spec.gamma);
    let warp = |scale: f64, beta: f64| {
        Profile::from_closed_form(grid, move |t| {
            if p == 0.0 {
                // flat case: cos^0 ≡ 1 and the integrand is 1
                let v = scale * (beta * t).exp();
                [v, beta * v, beta * beta * v]
            } else if on_pole(t, half) {
                [0.0, f64::NAN, f64::NAN]
            } else {
                ricci_warp_jet(k, p, beta, scale, t)
            }
        })
    };
    let phi1 = warp(spec.phi0[0], spec.beta)?;
    let phi2 = warp(spec.phi0[1], -spec.beta)?;
    Band::doubly_warped(phi1, phi2, spec.fibers())
}

/// Exponent `2(2−γ)/(−nγ+γ+2n)` of `ξ = cos(kt)^e`.
pub fn scalar_warp_exponent(n: usize, gamma: f64) -> f64 {
    let n = n as f64;
    2.0 * (2.0 - gamma) / (-n * gamma + gamma + 2.0 * n)
}

pub fn build_scalar_model(spec: &ModelSpec) -> Result<Band> {
    let params = spec.params()?;
    let (lo, hi) = spec.interval()?;
    let half = params.half_width();
    check_pole_interval(half, lo, hi)?;
    let e = scalar_warp_exponent(spec.n, spec.gamma);
    if e < 0.0 && (on_pole(lo, half) || on_pole(hi, half)) {
        return Err(Error::PoleProximity(format!(
            "the warp exponent {e} is negative, so the warp blows up at the ends of the maximal interval"
        )));
    }
    let grid = spec.grid()?;
    let k = params.frequency();
    let xi = Profile::from_closed_form(grid, |t| {
        if e == 0.0 {
            [1.0, 0.0, 0.0]
        } else if on_pole(t, half) {
            [0.0, f64::NAN, f64::NAN]
        } else {
            let c = (k * t).cos();
            let v = c.powf(e);
            let l = -e * k * (k * t).tan();
            let dl = -e * k * k / (c * c);
            [v, v * l, v * (dl + l * l)]
        }
    })?;
    Band::single_warp(spec.n, xi, spec.fibers())
}

fn check_scales(spec: &ModelSpec) -> Result<()> {
    if spec.phi0.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidParams(format!(
            "fiber scales {:?} must be positive",
            spec.phi0
        )));
    }
    Ok(())
}

/// `(S'/S, S''/S)` and `(C'/C, C''/C)` for the κ-family base functions.
fn kappa_logs(kappa: i32, t: f64) -> [[f64; 2]; 2] {
    match kappa {
        1 => [[1.0 / t.tan(), -1.0], [-t.tan(), -1.0]],
        0 => [[1.0 / t, 0.0], [0.0, 0.0]],
        _ => [[1.0 / t.tanh(), 1.0], [t.tanh(), 1.0]],
    }
}

fn kappa_base(kappa: i32, t: f64) -> [f64; 2] {
    match kappa {
        1 => [t.sin(), t.cos()],
        0 => [t, 1.0],
        _ => [t.sinh(), t.cosh()],
    }
}

pub fn build_kappa_model(spec: &ModelSpec) -> Result<Band> {
    spec.params()?;
    check_scales(spec)?;
    if !(0.0..=1.0).contains(&spec.c) {
        return Err(Error::Constraint(format!("c = {} must lie in [0, 1]", spec.c)));
    }
    let (lo, hi) = spec.interval()?;
    let upper = if spec.kappa == 1 { FRAC_PI_2 } else { f64::INFINITY };
    if !(lo > 0.0 && hi < upper) {
        return Err(Error::Constraint(format!(
            "interval [{lo}, {hi}] must lie inside (0, {upper})"
        )));
    }
    let grid = spec.grid()?;
    let kappa = spec.kappa;
    // φ = S^a C^b with (a, b) = ((1±c)/2, (1∓c)/2)
    let warp = |scale: f64, a: f64, b: f64| {
        Profile::from_closed_form(grid, move |t| {
            let [s, c] = kappa_base(kappa, t);
            let [[ls, rs], [lc, rc]] = kappa_logs(kappa, t);
            let v = scale * s.powf(a) * c.powf(b);
            let l = a * ls + b * lc;
            let dl = a * (rs - ls * ls) + b * (rc - lc * lc);
            [v, v * l, v * (dl + l * l)]
        })
    };
    let plus = 0.5 * (1.0 + spec.c);
    let minus = 0.5 * (1.0 - spec.c);
    let phi1 = warp(spec.phi0[0], plus, minus)?;
    let phi2 = warp(spec.phi0[1], minus, plus)?;
    Band::doubly_warped(phi1, phi2, spec.fibers())
}

/// Residuals of the Ricci-model identities for one choice of per-factor exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentResiduals {
    pub exponent: f64,
    /// `max |φ₁φ₂ / cos^{(1−γ/2)/(1−γ/4)} − 1|`.
    pub product: f64,
    /// `max |H − (1−γ/2)h| / max(1, |h|)`.
    pub mean_curvature: f64,
    /// `max |−γΔu/u + 2·Ric − Λ| / Λ`.
    pub spectral_equality: f64,
}

impl ExponentResiduals {
    pub fn max(&self) -> f64 {
        self.product.max(self.mean_curvature).max(self.spectral_equality)
    }
}

/// Side-by-side residuals of the two candidate warp exponents (`β = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentReport {
    pub gamma: f64,
    pub lambda: f64,
    pub derived: ExponentResiduals,
    pub alternative: ExponentResiduals,
    /// Exponent whose residuals are all below the tolerance, preferring the derived one.
    pub satisfying: Option<f64>,
}

/// Evaluates both exponents on `|t| ≤ 0.9·ℓ` from the closed forms.
pub fn exponent_report(gamma: f64, lambda: f64, tol: f64) -> Result<ExponentReport> {
    let params = SpectralParams::ricci(gamma, lambda)?;
    let h = HProfile::new(params)?;
    let k = params.frequency();
    let half = params.half_width();
    let product_exponent = (1.0 - 0.5 * gamma) / (1.0 - 0.25 * gamma);
    let residuals = |q: f64| -> Result<ExponentResiduals> {
        let mut out = ExponentResiduals {
            exponent: q,
            product: 0.0,
            mean_curvature: 0.0,
            spectral_equality: 0.0,
        };
        for j in 0..=400 {
            let t = 0.9 * half * (j as f64 / 200.0 - 1.0);
            let c = (k * t).cos();
            let [hv, dh] = h.jet(t)?;
            // both warps equal cos^q, so l = φ'/φ and r = φ''/φ are shared
            let l = -q * k * (k * t).tan();
            let r = -q * k * k / (c * c) + l * l;
            let mean = 2.0 * l;
            out.product = out.product.max((c.powf(2.0 * q - product_exponent) - 1.0).abs());
            out.mean_curvature = out
                .mean_curvature
                .max((mean - (1.0 - 0.5 * gamma) * hv).abs() / hv.abs().max(1.0));
            let ric_t = -2.0 * r;
            let ric_fiber = -(r + l * l);
            let lu = 0.5 * hv;
            let lap_over_u = 0.5 * dh + lu * lu + mean * lu;
            let res = -gamma * lap_over_u + 2.0 * ric_t.min(ric_fiber) - lambda;
            out.spectral_equality = out.spectral_equality.max(res.abs() / lambda);
        }
        Ok(out)
    };
    let derived = residuals(ricci_warp_exponent(gamma))?;
    let alternative = residuals(ricci_warp_exponent_alt(gamma))?;
    let satisfying = if derived.max() <= tol {
        Some(derived.exponent)
    } else if alternative.max() <= tol {
        Some(alternative.exponent)
    } else {
        None
    };
    Ok(ExponentReport {
        gamma,
        lambda,
        derived,
        alternative,
        satisfying,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curvature;

    #[test]
    fn cos_power_integral_matches_quadrature() {
        for mu in [-0.6, -0.2, 0.0, 0.5] {
            let theta: f64 = 1.1;
            let n = 20000;
            let h = theta / n as f64;
            let simpson: f64 = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * (i as f64 * h).cos().powf(mu)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((cos_power_integral(mu, theta) - simpson).abs() < 1e-10, "mu={mu}");
            assert!((cos_power_integral(mu, -theta) + simpson).abs() < 1e-10);
        }
        assert!((cos_power_integral(-1.0, 0.7) - (1.0 / 0.7f64.cos() + 0.7f64.tan()).ln()).abs() < 1e-14);
    }

    #[test]
    fn symmetric_ricci_model_at_gamma_two() {
        let band = build_ricci_model(&ModelSpec::ricci(2.0, 2.0, 0.0)).unwrap();
        let c = curvature(&band).unwrap();
        let k = band.grid().nearest(0.0) - c.offset;
        assert!(c.mean_curv.values()[k].abs() < 1e-14);
    }

    #[test]
    fn beta_restriction_is_enforced() {
        let err = build_ricci_model(&ModelSpec::ricci(1.0, 4.0, 0.8)).unwrap_err();
        assert!(err.to_string().contains("½(1−γ/2)Λ ≥ 2(φ′(0)/φ(0))²"));
        assert!(build_ricci_model(&ModelSpec::ricci(1.0, 4.0, 0.5f64.sqrt())).is_ok());
        assert!(build_ricci_model(&ModelSpec::ricci(3.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn beta_equality_balances_ricci_at_centre() {
        let band = build_ricci_model(&ModelSpec::ricci(1.0, 4.0, 0.5f64.sqrt())).unwrap();
        let c = curvature(&band).unwrap();
        let k = band.grid().nearest(0.0) - c.offset;
        let rt = c.ric_t.values()[k];
        assert!((rt - c.ric_fiber[0].values()[k]).abs() < 1e-12);
        assert!((rt - c.ric_fiber[1].values()[k]).abs() < 1e-12);
    }

    #[test]
    fn scalar_model_basics() {
        let spec = ModelSpec::scalar(3, 1.0, 3.0);
        assert!((scalar_warp_exponent(3, 1.0) - 0.5).abs() < 1e-15);
        let band = build_scalar_model(&spec).unwrap();
        let g = *band.grid();
        let i = g.nearest(0.0);
        let crate::geometry::Warp::SingleWarp { xi } = band.warp() else { panic!() };
        assert!((xi.value(i) - 1.0).abs() < 1e-15);
        assert!(xi.first(i).abs() < 1e-15);
        let err = build_scalar_model(&ModelSpec::scalar(3, 2.5, 1.0)).unwrap_err();
        assert!(matches!(err, Error::PoleProximity(_)));
        let inner = ModelSpec::scalar(3, 2.5, 1.0).with_interval(-0.5, 0.5);
        assert!(build_scalar_model(&inner).is_ok());
    }

    #[test]
    fn kappa_models() {
        let band = build_kappa_model(&ModelSpec::kappa(0, 1.0).with_interval(0.5, 1.5)).unwrap();
        assert!(curvature(&band).unwrap().ric_t.max_abs() < 1e-12);
        let band = build_kappa_model(&ModelSpec::kappa(1, 0.0).with_interval(0.25, 1.3)).unwrap();
        let c = curvature(&band).unwrap();
        let g = band.grid();
        let i = g.nearest(std::f64::consts::FRAC_PI_4);
        let t = g.point(i);
        assert!((c.mean_curv.values()[i - c.offset] - 2.0 / (2.0 * t).tan()).abs() < 1e-12);
        assert!(build_kappa_model(&ModelSpec::kappa(0, 1.5)).is_err());
        assert!(build_kappa_model(&ModelSpec::kappa(1, 0.5).with_interval(0.2, 1.8)).is_err());
    }

    #[test]
    fn exponent_report_prefers_derived() {
        let r = exponent_report(1.0, 2.0, 1e-8).unwrap();
        assert!(r.derived.max() < 1e-10, "{r:?}");
        assert!(r.alternative.max() > 1e-3);
        assert_eq!(r.satisfying, Some(ricci_warp_exponent(1.0)));
        let r = exponent_report(2.0, 2.0, 1e-8).unwrap();
        assert_eq!(r.derived.exponent, r.alternative.exponent);
    }

    #[test]
    fn spec_json_defaults() {
        let s: ModelSpec = serde_json::from_str(r#"{"family":"KappaModel","kappa":-1,"c":0.5}"#).unwrap();
        assert_eq!(s.n_points, DEFAULT_POINTS);
        assert_eq!(s.interval().unwrap(), (KAPPA_T_MINUS, 1.5));
        assert!(serde_json::from_str::<ModelSpec>(r#"{"family":"KappaModel","bogus":1}"#).is_err());
    }
}
