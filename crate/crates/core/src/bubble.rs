//! Warped μ-bubbles restricted to the slices `{t ≤ t*}` of a band.

use std::f64::consts::PI;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{curvature, Band, CurvatureProfile};
use crate::grid::{Grid, GridFunction, Profile};
use crate::ode::{scalar_coefficient, BoundKind, HProfile, SpectralParams};
use crate::roots::brent;
use crate::spectral::potential;

/// Below this sup-norm the first variation counts as identically zero.
pub const RIGID_THRESHOLD: f64 = 1e-7;
/// Tolerance on `t*` in the root solve.
pub const ROOT_TOL: f64 = 1e-12;
/// Default tolerance of the rigidity audit.
pub const AUDIT_TOL: f64 = 1e-6;
/// Allowed increase of the weighted mean curvature between samples.
pub const MONOTONE_TOL: f64 = 1e-6;

/// Data of the reduced variational problem.
#[derive(Debug, Clone)]
pub struct BubbleProblem {
    band: Band,
    u: Profile,
    h: HProfile,
    gamma: f64,
    reference_t0: f64,
    working: Range<usize>,
    fields: Fields,
    /// `u^γ·A` on every node.
    boundary_density: GridFunction,
    /// Quadrature of `h·u^γ·A`.
    volume: VolumeQuadrature,
}

/// Node fields on the working sub-grid.
#[derive(Debug, Clone)]
struct Fields {
    mean: GridFunction,
    log_u: GridFunction,
    lap_over_u: GridFunction,
    curv: CurvatureProfile,
}

impl BubbleProblem {
    /// `reference_t0` defaults to the midpoint of the band.
    pub fn new(band: Band, u: Profile, h: HProfile, gamma: f64, reference_t0: Option<f64>) -> Result<Self> {
        let grid = *band.grid();
        if u.grid() != &grid {
            return Err(Error::InvalidProblem("u is sampled on a different grid".into()));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidProblem(format!("gamma = {gamma} must be non-negative")));
        }
        let t0 = reference_t0.unwrap_or(0.5 * (grid.t_min() + grid.t_max()));
        if !grid.contains(t0) {
            return Err(Error::InvalidProblem(format!("reference slice {t0} is outside the band")));
        }
        let (br, ur) = (band.regular_range(), u.regular());
        let working = br.start.max(ur.start)..br.end.min(ur.end);
        if working.len() < 5 {
            return Err(Error::InvalidProblem("too few nodes where u and the warps are positive".into()));
        }
        let sub = grid.subgrid(working.clone())?;
        let curv_full = curvature(&band)?;
        let offset = working.start - curv_full.offset;
        let cut = |f: &GridFunction| GridFunction::new(sub, f.values()[offset..offset + working.len()].to_vec());
        let curv = CurvatureProfile {
            offset: working.start,
            ric_t: cut(&curv_full.ric_t)?,
            ric_fiber: curv_full.ric_fiber.iter().map(cut).collect::<Result<_>>()?,
            ric_min: cut(&curv_full.ric_min)?,
            scalar: cut(&curv_full.scalar)?,
            mean_curv: cut(&curv_full.mean_curv)?,
            second_ff_sq: cut(&curv_full.second_ff_sq)?,
            traceless_a_sq: cut(&curv_full.traceless_a_sq)?,
        };
        let log_u = GridFunction::new(sub, working.clone().map(|i| u.log_first(i)).collect())?;
        let lap_over_u = GridFunction::new(
            sub,
            working
                .clone()
                .map(|i| u.ratio_second(i) + band.mean_curvature_at(i) * u.log_first(i))
                .collect(),
        )?;
        let mut bd = Vec::with_capacity(grid.len());
        let mut integrand = Vec::with_capacity(grid.len());
        for (i, t) in grid.points().enumerate() {
            let b = u.value(i).powf(gamma) * band.fiber_area(i);
            bd.push(b);
            if b == 0.0 {
                integrand.push(0.0);
                continue;
            }
            match h.value(t) {
                Ok(v) if v.is_finite() => integrand.push(v * b),
                _ => {
                    return Err(Error::InvalidProblem(format!(
                        "h is not finite at t = {t} where u^γ·A = {b}"
                    )))
                }
            }
        }
        Ok(Self {
            fields: Fields {
                mean: curv.mean_curv.clone(),
                log_u,
                lap_over_u,
                curv,
            },
            boundary_density: GridFunction::new(grid, bd.clone())?,
            volume: VolumeQuadrature::new(GridFunction::new(grid, integrand)?, &bd)?,
            band,
            u,
            h,
            gamma,
            reference_t0: t0,
            working,
        })
    }

    pub fn band(&self) -> &Band {
        &self.band
    }

    pub fn u(&self) -> &Profile {
        &self.u
    }

    pub fn h(&self) -> &HProfile {
        &self.h
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reference_t0(&self) -> f64 {
        self.reference_t0
    }

    /// Grid of the nodes where `u` and the warps are positive.
    pub fn working_grid(&self) -> &Grid {
        self.fields.mean.grid()
    }

    /// Curvature restricted to the working nodes.
    pub fn curvature(&self) -> &CurvatureProfile {
        &self.fields.curv
    }

    /// `H + γ(log u)' − h` on the working nodes.
    pub fn first_variation(&self) -> Result<GridFunction> {
        let g = *self.working_grid();
        let vals = g
            .points()
            .enumerate()
            .map(|(k, t)| {
                Ok(self.fields.mean.values()[k] + self.gamma * self.fields.log_u.values()[k] - self.h.value(t)?)
            })
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(g, vals)
    }

    /// `H + γ(log u)' − h` between nodes, from interpolated `H` and `(log u)'`.
    pub fn first_variation_at(&self, t: f64) -> Result<f64> {
        let g = self.working_grid();
        if !g.contains(t) {
            return Err(Error::Domain {
                t,
                lo: g.t_min(),
                hi: g.t_max(),
            });
        }
        Ok(self.fields.mean.interpolate(t) + self.gamma * self.fields.log_u.interpolate(t) - self.h.value(t)?)
    }

    /// `u^γ·A` between nodes.
    pub fn boundary_density_at(&self, t: f64) -> f64 {
        self.boundary_density.interpolate(t)
    }

    /// `E(t*) = u^γA(t*) − ∫_{t0}^{t*} h·u^γ·A`.
    pub fn energy(&self, t_star: f64) -> Result<f64> {
        let g = self.band.grid();
        if !g.contains(t_star) {
            return Err(Error::OutOfRange {
                a: t_star,
                b: t_star,
                t_min: g.t_min(),
                t_max: g.t_max(),
            });
        }
        let volume = self.volume.at(t_star)? - self.volume.at(self.reference_t0)?;
        Ok(self.boundary_density_at(t_star) - volume)
    }

    /// Energy of every grid slice.
    pub fn energy_trace(&self) -> Result<GridFunction> {
        let g = *self.band.grid();
        let base = self.volume.at(self.reference_t0)?;
        let vals = (0..g.len())
            .map(|i| self.boundary_density.values()[i] - (self.volume.cumulative[i] - base))
            .collect();
        GridFunction::new(g, vals)
    }

    /// `γΔu/u − (|A|² + Ric(ν,ν)) − γH(log u)' − h' − γ((log u)')²` at working node `k`,
    /// the derivative of the first variation along the slices.
    pub fn second_variation_density(&self, k: usize) -> Result<f64> {
        let t = self.working_grid().point(k);
        let f = &self.fields;
        let w = f.log_u.values()[k];
        let h_prime = self.h.derivative(t)?;
        Ok(self.gamma * f.lap_over_u.values()[k]
            - (f.curv.second_ff_sq.values()[k] + f.curv.ric_t.values()[k])
            - self.gamma * f.mean.values()[k] * w
            - h_prime
            - self.gamma * w * w)
    }
}

/// Cells next to a collapsed end slice that get the power-law rule.
const SINGULAR_CELLS: usize = 16;

/// Integrals of `h·u^γ·A` from the lower end.
///
/// Where an end slice collapses (`u^γ·A = 0`) the integrand behaves like
/// `s^μ·g(s)` with `s` the distance to that end and `g` smooth; the cells
/// there integrate `s^μ` against a cubic fit of `g` exactly.
#[derive(Debug, Clone)]
struct VolumeQuadrature {
    integrand: GridFunction,
    /// Fitted `μ` at the lower and upper end.
    powers: [Option<f64>; 2],
    singular_cells: usize,
    cumulative: Vec<f64>,
}

impl VolumeQuadrature {
    fn new(integrand: GridFunction, boundary_density: &[f64]) -> Result<Self> {
        let n = integrand.values().len();
        let f = integrand.values();
        let singular_cells = SINGULAR_CELLS.min((n - 1) / 2).min(n.saturating_sub(5));
        let fit = |at: &dyn Fn(usize) -> f64, end: f64| -> Option<f64> {
            if end != 0.0 || singular_cells == 0 {
                return None;
            }
            let v = [at(1), at(2), at(3)];
            if !v.iter().all(|x| x.is_finite() && *x != 0.0 && x.signum() == v[0].signum()) {
                return None;
            }
            // ln|f| = μ ln x + a + b x through x = 1, 2, 3
            let l = v.map(|x| x.abs().ln());
            let mu = (2.0 * l[1] - l[0] - l[2]) / (4.0f64 / 3.0).ln();
            (mu.is_finite() && mu > -1.0).then_some(mu)
        };
        let powers = [
            fit(&|k| f[k], boundary_density[0]),
            fit(&|k| f[n - 1 - k], boundary_density[n - 1]),
        ];
        let mut quad = Self {
            integrand,
            powers,
            singular_cells,
            cumulative: Vec::with_capacity(n),
        };
        let g = *quad.integrand.grid();
        let mut acc = 0.0;
        quad.cumulative.push(0.0);
        for j in 0..n - 1 {
            acc += quad.cell(j, g.point(j), g.point(j + 1))?;
            quad.cumulative.push(acc);
        }
        Ok(quad)
    }

    /// Integral over `[x0, x1]` inside cell `j`.
    fn cell(&self, j: usize, x0: f64, x1: f64) -> Result<f64> {
        let n = self.integrand.values().len();
        if let (Some(mu), true) = (self.powers[0], j < self.singular_cells) {
            return Ok(self.power_rule(mu, false, x0, x1));
        }
        if let (Some(mu), true) = (self.powers[1], j + 1 + self.singular_cells >= n) {
            return Ok(self.power_rule(mu, true, x0, x1));
        }
        self.integrand.integrate(x0, x1)
    }

    /// `∫ s^μ·p(s)` with `p` the cubic through `f/s^μ` on nodes clear of the end.
    fn power_rule(&self, mu: f64, upper: bool, x0: f64, x1: f64) -> f64 {
        let g = self.integrand.grid();
        let f = self.integrand.values();
        let n = f.len();
        let dt = g.spacing();
        // distances in units of the spacing
        let dist = |t: f64| if upper { (g.t_max() - t) / dt } else { (t - g.t_min()) / dt };
        let (a, b) = (dist(x0), dist(x1));
        let (lo, hi) = (a.min(b), a.max(b));
        let cell = lo.floor().max(0.0) as usize;
        let start = cell.saturating_sub(1).max(1).min(n - 4);
        let xs: Vec<f64> = (start..start + 4).map(|k| k as f64).collect();
        let ys: Vec<f64> = (start..start + 4)
            .map(|k| {
                let v = if upper { f[n - 1 - k] } else { f[k] };
                v / (k as f64).powf(mu)
            })
            .collect();
        let c = cubic_coefficients(&xs, &ys);
        let moment = |x: f64, m: usize| {
            let e = mu + m as f64 + 1.0;
            if x == 0.0 {
                0.0
            } else {
                x.powf(e) / e
            }
        };
        let total: f64 = (0..4).map(|m| c[m] * (moment(hi, m) - moment(lo, m))).sum();
        dt * total
    }

    /// Integral from the lower end to `t`.
    fn at(&self, t: f64) -> Result<f64> {
        let g = self.integrand.grid();
        let j = g.cell_of(t);
        Ok(self.cumulative[j] + self.cell(j, g.point(j), t)?)
    }
}

/// Monomial coefficients of the cubic through four points.
fn cubic_coefficients(xs: &[f64], ys: &[f64]) -> [f64; 4] {
    let mut a = [[0.0; 5]; 4];
    for r in 0..4 {
        for (m, slot) in a[r].iter_mut().take(4).enumerate() {
            *slot = xs[r].powi(m as i32);
        }
        a[r][4] = ys[r];
    }
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        a.swap(col, piv);
        for r in 0..4 {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for k in col..5 {
                    a[r][k] -= factor * a[col][k];
                }
            }
        }
    }
    [a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleResult {
    pub t_star: f64,
    pub first_variation_residual: f64,
    pub q: f64,
    pub energy_trace: GridFunction,
    pub rigid: bool,
    /// Grid slice of least energy among the working nodes.
    pub scan_t_star: f64,
    /// All sign changes of the first variation, in increasing order.
    pub roots: Vec<f64>,
}

impl BubbleResult {
    /// Whether the dense scan and the root agree within one grid cell.
    pub fn scan_agrees(&self, spacing: f64) -> bool {
        self.rigid || (self.scan_t_star - self.t_star).abs() <= spacing * (1.0 + 1e-9)
    }
}

/// Finds the critical slice `H + γ(log u)' = h`.
pub fn solve_critical(problem: &BubbleProblem) -> Result<BubbleResult> {
    let params = *problem.h.params();
    let f = problem.first_variation()?;
    let trace = problem.energy_trace()?;
    let g = *problem.working_grid();
    let offset = problem.working.start;
    let scan_k = (0..g.len())
        .min_by(|&a, &b| trace.values()[a + offset].total_cmp(&trace.values()[b + offset]))
        .unwrap_or(0);
    let scan_t_star = g.point(scan_k);
    if f.max_abs() <= RIGID_THRESHOLD {
        let t0 = problem.reference_t0.clamp(g.t_min(), g.t_max());
        return Ok(BubbleResult {
            t_star: t0,
            first_variation_residual: problem.first_variation_at(t0)?,
            q: stability_q(problem, &params, t0)?,
            energy_trace: trace,
            rigid: true,
            scan_t_star,
            roots: Vec::new(),
        });
    }
    let v = f.values();
    let mut roots = Vec::new();
    let mut upward = Vec::new();
    for k in 0..v.len() - 1 {
        let (a, b) = (v[k], v[k + 1]);
        if a == 0.0 {
            roots.push(g.point(k));
            upward.push(b > 0.0);
        } else if a * b < 0.0 {
            let root = brent(
                |t| problem.first_variation_at(t).unwrap_or(f64::NAN),
                g.point(k),
                g.point(k + 1),
                ROOT_TOL,
            )?;
            roots.push(root);
            upward.push(b > a);
        }
    }
    if v[v.len() - 1] == 0.0 {
        roots.push(g.t_max());
        upward.push(false);
    }
    if roots.is_empty() {
        let sign = v.iter().copied().find(|x| *x != 0.0).unwrap_or(0.0).signum();
        return Err(Error::NoCriticalPoint { sign });
    }
    // local minima of E are the − → + crossings
    let candidates: Vec<f64> = if upward.iter().any(|u| *u) {
        roots.iter().zip(&upward).filter(|(_, u)| **u).map(|(r, _)| *r).collect()
    } else {
        roots.clone()
    };
    let mut best = candidates[0];
    let mut best_e = problem.energy(best)?;
    for &r in &candidates[1..] {
        let e = problem.energy(r)?;
        if e < best_e {
            best = r;
            best_e = e;
        }
    }
    Ok(BubbleResult {
        t_star: best,
        first_variation_residual: problem.first_variation_at(best)?,
        q: stability_q(problem, &params, best)?,
        energy_trace: trace,
        rigid: false,
        scan_t_star,
        roots,
    })
}

/// `a·h² + h' + b` for the bound `params` (`a`, `b` as in the Riccati equation).
pub fn stability_q(problem: &BubbleProblem, params: &SpectralParams, t: f64) -> Result<f64> {
    let [h, dh] = problem.h.jet(t)?;
    Ok(params.quadratic_coefficient() * h * h + dh + params.forcing())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Holds by construction of the reduction rather than by computation.
    pub structural: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RigidityAudit {
    pub t_star: f64,
    pub checks: Vec<AuditCheck>,
}

impl RigidityAudit {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_failing_residual(&self) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.residual)
            .fold(None, |m, r| Some(m.map_or(r, |x: f64| x.max(r))))
    }
}

/// Checks the equality conditions of the rigidity argument on the slice `t_star`.
pub fn rigidity_audit(problem: &BubbleProblem, params: &SpectralParams, t_star: f64) -> Result<RigidityAudit> {
    rigidity_audit_with_tol(problem, params, t_star, AUDIT_TOL)
}

pub fn rigidity_audit_with_tol(
    problem: &BubbleProblem,
    params: &SpectralParams,
    t_star: f64,
    tol: f64,
) -> Result<RigidityAudit> {
    let g = problem.working_grid();
    if !g.contains(t_star) {
        return Err(Error::Domain {
            t: t_star,
            lo: g.t_min(),
            hi: g.t_max(),
        });
    }
    let f = &problem.fields;
    let at = |x: &GridFunction| x.interpolate(t_star);
    let mut checks = Vec::new();
    let mut push = |name: &str, residual: f64, structural: bool| {
        checks.push(AuditCheck {
            name: name.to_string(),
            residual,
            tolerance: tol,
            pass: residual <= tol,
            structural,
        })
    };
    push("fiber_scalar_curvature", 0.0, true);
    let [h, _] = problem.h.jet(t_star)?;
    let q = stability_q(problem, params, t_star)?;
    let w = at(&f.log_u);
    let v = potential(&f.curv, params.kind);
    let v = GridFunction::new(*g, v)?;
    match params.kind {
        BoundKind::RicciSpectral | BoundKind::ScalarSpectral => {
            if params.kind == BoundKind::ScalarSpectral {
                push("umbilic", at(&f.curv.traceless_a_sq).abs(), false);
            }
            push("first_variation", problem.first_variation_at(t_star)?.abs(), false);
            push("log_weight_ratio", (w - h / params.log_weight_divisor()).abs(), false);
            push("stability_scalar", q.abs(), false);
            if params.kind == BoundKind::RicciSpectral {
                if f.curv.ric_fiber.len() == 2 {
                    let diff = at(&f.curv.ric_fiber[0]) - at(&f.curv.ric_fiber[1]);
                    push("ricci_fiber_equality", diff.abs(), false);
                }
            }
            let spectral = -params.gamma * at(&f.lap_over_u) + at(&v) - params.lambda;
            push("spectral_equality", spectral.abs(), false);
        }
        BoundKind::RicciPointwise => {
            push("mean_curvature_equals_h", (at(&f.mean) - h).abs(), false);
            let lower = 2.0 * params.kappa as f64;
            let deficit = f
                .curv
                .ric_min
                .values()
                .iter()
                .fold(0.0f64, |m, r| m.max(lower - r));
            push("ricci_lower_bound", deficit, false);
            push("stability_scalar", q.abs(), false);
        }
    }
    Ok(RigidityAudit { t_star, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub t_range: (f64, f64),
    /// `sup |H̃|` over the range.
    pub h_tilde_max: f64,
    /// Largest increase of `exp(∫Ψ)·H̃` between neighbouring nodes.
    pub max_increase: f64,
    pub monotone: bool,
    /// Whether the spectral bound holds on the range.
    pub hypothesis_holds: bool,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub weighted: Vec<f64>,
}

/// Checks that `exp(∫_{t_a}^t (−γ(log u)' + 2h)) · H̃` does not increase on `t_range`.
pub fn monotonicity_check(
    problem: &BubbleProblem,
    params: &SpectralParams,
    t_range: (f64, f64),
) -> Result<MonotonicityReport> {
    let g = *problem.working_grid();
    let (a, b) = t_range;
    if !(a < b && g.contains(a) && g.contains(b)) {
        return Err(Error::OutOfRange {
            a,
            b,
            t_min: g.t_min(),
            t_max: g.t_max(),
        });
    }
    let f = problem.first_variation()?;
    let psi = GridFunction::new(
        g,
        g.points()
            .enumerate()
            .map(|(k, t)| Ok(-problem.gamma * problem.fields.log_u.values()[k] + 2.0 * problem.h.value(t)?))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let cumulative = psi.cumulative_integral()?;
    let v = potential(&problem.fields.curv, params.kind);
    let nodes: Vec<usize> = (0..g.len()).filter(|&k| g.point(k) >= a && g.point(k) <= b).collect();
    let base = nodes.first().map_or(0.0, |&k| cumulative.values()[k]);
    let weighted: Vec<f64> = nodes
        .iter()
        .map(|&k| (cumulative.values()[k] - base).exp() * f.values()[k])
        .collect();
    let h_tilde_max = nodes.iter().fold(0.0f64, |m, &k| m.max(f.values()[k].abs()));
    let max_increase = weighted.windows(2).fold(0.0f64, |m, p| m.max(p[1] - p[0]));
    let hypothesis_holds = nodes.iter().all(|&k| {
        let r = -params.gamma * problem.fields.lap_over_u.values()[k] + v[k] - params.lambda;
        r >= -crate::spectral::BOUND_TOL * params.lambda.abs().max(1.0)
    });
    let mut warnings = Vec::new();
    if !hypothesis_holds {
        warnings.push("the spectral bound fails on the range; monotonicity is not expected".into());
    }
    Ok(MonotonicityReport {
        t_range,
        h_tilde_max,
        max_increase,
        monotone: max_increase <= MONOTONE_TOL,
        hypothesis_holds,
        warnings,
        weighted,
    })
}

/// Closed-form width bound of the spectral bounds.
pub fn width_bound(params: &SpectralParams) -> Result<f64> {
    params.validate()?;
    match params.kind {
        BoundKind::RicciSpectral => Ok(2.0 * PI / (params.lambda * (4.0 - params.gamma)).sqrt()),
        BoundKind::ScalarSpectral => {
            Ok(PI / (scalar_coefficient(params.n, params.gamma) * params.lambda).sqrt())
        }
        BoundKind::RicciPointwise => Err(Error::InvalidParams(
            "the pointwise bound depends on the boundary mean curvature; use check_width".into(),
        )),
    }
}

/// Inverse of `η_κ`: the `t > 0` with `η_κ(t) = mean`.
pub fn kappa_level(kappa: i32, mean: f64) -> Result<f64> {
    let t = match kappa {
        1 => 0.5 * 2.0f64.atan2(mean),
        0 if mean > 0.0 => 1.0 / mean,
        -1 if mean > 2.0 => 0.5 * (2.0 / mean).atanh(),
        _ => {
            return Err(Error::InvalidParams(format!(
                "mean curvature {mean} is not attained by the kappa = {kappa} profile"
            )))
        }
    };
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthReport {
    pub width: f64,
    pub bound: f64,
    pub within: bool,
}

/// Compares `t₊ − t₋` with the bound.
///
/// For the pointwise bound the bound is read off the boundary mean
/// curvatures through the inverse of `η_κ`.
pub fn check_width(band: &Band, params: &SpectralParams) -> Result<WidthReport> {
    let width = band.width();
    let bound = match params.kind {
        BoundKind::RicciPointwise => {
            params.validate()?;
            let r = band.regular_range();
            let n = band.grid().len();
            if r.start != 0 || r.end != n {
                return Err(Error::InvalidBand("boundary slices are degenerate".into()));
            }
            let lo = kappa_level(params.kappa, band.mean_curvature_at(0))?;
            let hi = kappa_level(params.kappa, band.mean_curvature_at(n - 1))?;
            hi - lo
        }
        _ => width_bound(params)?,
    };
    Ok(WidthReport {
        width,
        bound,
        within: width <= bound * (1.0 + 1e-12),
    })
}

/// `γw² − γhw + h² − (1 − γ/4)h²`, non-negative with equality at `w = h/2`.
pub fn ricci_cs_gap(gamma: f64, w: f64, h: f64) -> f64 {
    gamma * w * w - gamma * h * w + h * h - (1.0 - 0.25 * gamma) * h * h
}

/// Scalar-curvature analogue of [`ricci_cs_gap`], zero at `w = h/D`
/// with `D = 2(n−1) + γ(2−n)`.
pub fn scalar_cs_gap(n: usize, gamma: f64, w: f64, h: f64) -> f64 {
    let m = n as f64 - 1.0;
    let nf = n as f64;
    (nf * gamma * gamma / (2.0 * m) - gamma * gamma + gamma) * w * w - gamma / m * h * w
        + nf / (2.0 * m) * h * h
        - scalar_coefficient(n, gamma) * h * h
}

/// Exponent `α` of the conformal change, `(4(n−2)/(n−3))·α = 8/(4−γ)`, for `n > 3`.
pub fn conformal_exponent(n: usize, gamma: f64) -> Result<f64> {
    if n <= 3 {
        return Err(Error::InvalidParams(format!("conformal exponent needs n > 3, got {n}")));
    }
    if gamma >= 4.0 {
        return Err(Error::InvalidParams(format!("gamma = {gamma} must be below 4")));
    }
    let nf = n as f64;
    Ok(8.0 / (4.0 - gamma) * (nf - 3.0) / (4.0 * (nf - 2.0)))
}
