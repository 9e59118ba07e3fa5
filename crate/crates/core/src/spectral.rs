//! Spectral curvature bounds: pointwise residuals for a given weight and the
//! principal Dirichlet eigenvalue of the reduced operator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{curvature, Band, CurvatureProfile};
use crate::grid::{Grid, GridFunction, Profile};
use crate::ode::{BoundKind, SpectralParams};

/// Default tolerance of the bound checks.
pub const BOUND_TOL: f64 = 1e-8;

/// Relative disagreement between raw and extrapolated eigenvalues above
/// which the grid is flagged as too coarse.
pub const COARSE_GRID_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub kind: BoundKind,
    pub lambda_target: f64,
    /// Minimum of `(−γΔu + V·u − Λu)/u`, when a weight was supplied.
    pub residual_min: Option<f64>,
    /// Richardson-extrapolated principal eigenvalue, when computed.
    pub principal_eigenvalue: Option<f64>,
    /// Eigenvalue on the full grid before extrapolation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_order: Option<f64>,
    #[serde(skip)]
    pub eigenfunction: Option<GridFunction>,
    pub satisfied: bool,
    pub grid_points: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Coefficient field `V` of the operator: `2·Ric_min` or `½·Sc`.
pub fn potential(curv: &CurvatureProfile, kind: BoundKind) -> Vec<f64> {
    match kind {
        BoundKind::ScalarSpectral => curv.scalar.values().iter().map(|s| 0.5 * s).collect(),
        _ => curv.ric_min.values().iter().map(|r| 2.0 * r).collect(),
    }
}

/// `Δu = u'' + H·u'` by finite differences, on the regular nodes of the band.
pub fn radial_laplacian(band: &Band, u: &GridFunction) -> Result<GridFunction> {
    if u.grid() != band.grid() {
        return Err(Error::InvalidBand("u is sampled on a different grid".into()));
    }
    let d1 = u.derivative(1)?;
    let d2 = u.derivative(2)?;
    let range = band.regular_range();
    let grid = band.grid().subgrid(range.clone())?;
    let values = range
        .map(|i| d2.values()[i] + band.mean_curvature_at(i) * d1.values()[i])
        .collect();
    GridFunction::new(grid, values)
}

fn check_weight(u: &Profile) -> Result<()> {
    let v = u.values().values();
    let top = u.values().max_abs();
    let g = u.grid();
    for (i, x) in [(0, v[0]), (v.len() - 1, v[v.len() - 1])] {
        if x > 1e-6 * top {
            return Err(Error::BoundaryNonzero {
                t: g.point(i),
                value: x,
            });
        }
    }
    Ok(())
}

/// Pointwise residual `(−γΔu + V·u − Λu)/u` of the bound for a given weight.
///
/// Returns the residual on the nodes where both `u` and the band are regular.
pub fn bound_residual(band: &Band, u: &Profile, params: &SpectralParams) -> Result<GridFunction> {
    params.validate()?;
    if u.grid() != band.grid() {
        return Err(Error::InvalidBand("u is sampled on a different grid".into()));
    }
    let curv = curvature(band)?;
    let v = potential(&curv, params.kind);
    let (br, ur) = (band.regular_range(), u.regular());
    let range = br.start.max(ur.start)..br.end.min(ur.end);
    let grid = band.grid().subgrid(range.clone())?;
    let values = range
        .map(|i| {
            let lap = u.ratio_second(i) + band.mean_curvature_at(i) * u.log_first(i);
            -params.gamma * lap + v[i - curv.offset] - params.lambda
        })
        .collect();
    GridFunction::new(grid, values)
}

/// Checks the bound with `u` supplied; `u` must vanish at both ends.
pub fn check_bound_pointwise(band: &Band, u: &Profile, params: &SpectralParams) -> Result<SpectralReport> {
    check_weight(u)?;
    let res = bound_residual(band, u, params)?;
    let min = res.min();
    Ok(SpectralReport {
        kind: params.kind,
        lambda_target: params.lambda,
        residual_min: Some(min),
        principal_eigenvalue: None,
        raw_eigenvalue: None,
        error_estimate: None,
        convergence_order: None,
        eigenfunction: None,
        satisfied: min >= -BOUND_TOL,
        grid_points: band.grid().len(),
        warnings: Vec::new(),
    })
}

/// `−γ(w u')'/w + V u = λ u` with Dirichlet conditions on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SturmLiouville {
    grid: Grid,
    gamma: f64,
    /// Weight on every node (may vanish at the endpoints).
    weight: Vec<f64>,
    /// Potential on the interior nodes `1..n-1`.
    potential: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Positive eigenfunction with maximum one, zero at both ends.
    pub function: GridFunction,
}

impl SturmLiouville {
    pub fn new(grid: Grid, gamma: f64, weight: Vec<f64>, potential: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if weight.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: weight.len(),
            });
        }
        if potential.len() != n - 2 {
            return Err(Error::LengthMismatch {
                expected: n - 2,
                got: potential.len(),
            });
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParams(format!("gamma = {gamma} must be non-negative")));
        }
        for (i, &w) in weight.iter().enumerate() {
            let interior = i > 0 && i + 1 < n;
            if !w.is_finite() || w < 0.0 || (interior && w == 0.0) {
                return Err(Error::NonPositiveWeight {
                    t: grid.point(i),
                    value: w,
                });
            }
        }
        if let Some((i, &v)) = potential.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index: i + 1, value: v });
        }
        Ok(Self {
            grid,
            gamma,
            weight,
            potential,
        })
    }

    /// The operator of a band for the given bound.
    pub fn from_band(band: &Band, params: &SpectralParams) -> Result<Self> {
        params.validate()?;
        let curv = curvature(band)?;
        let v = potential(&curv, params.kind);
        let n = band.grid().len();
        let range = band.regular_range();
        if range.start > 1 || range.end < n - 1 {
            return Err(Error::InvalidBand("band degenerates at an interior node".into()));
        }
        let pot = (1..n - 1).map(|i| v[i - curv.offset]).collect();
        let weight = (0..n).map(|i| band.density(i)).collect();
        Self::new(*band.grid(), params.gamma, weight, pot)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Same operator with `V + s`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.potential.iter_mut().for_each(|v| *v += s);
        out
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn with_potential(&self, potential: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, self.gamma, self.weight.clone(), potential)
    }

    /// Operator restricted to every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Option<Self> {
        let grid = self.grid.coarsen(stride)?;
        let weight = self.weight.iter().step_by(stride).copied().collect();
        let n = grid.len();
        let potential = (1..n - 1).map(|j| self.potential[j * stride - 1]).collect();
        Self::new(grid, self.gamma, weight, potential).ok()
    }

    fn half_weight(&self, i: usize) -> f64 {
        0.5 * (self.weight[i] + self.weight[i + 1])
    }

    /// Symmetrised tridiagonal matrix `(diag, off)` acting on `√w·u`.
    fn matrix(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let h2 = self.grid.spacing().powi(2);
        let m = n - 2;
        let mut d = Vec::with_capacity(m);
        let mut e = Vec::with_capacity(m.saturating_sub(1));
        for k in 0..m {
            let i = k + 1;
            let w = self.weight[i];
            d.push(self.gamma * (self.half_weight(i - 1) + self.half_weight(i)) / (h2 * w) + self.potential[k]);
            if k + 1 < m {
                e.push(-self.gamma * self.half_weight(i) / (h2 * (w * self.weight[i + 1]).sqrt()));
            }
        }
        (d, e)
    }

    /// Lowest eigenpair by Sturm bisection and inverse iteration.
    pub fn principal(&self) -> Result<Eigenpair> {
        let (d, e) = self.matrix();
        let m = d.len();
        if m < 2 {
            return Err(Error::Eigen("need at least two interior nodes".into()));
        }
        let radius = |k: usize| {
            let l = if k > 0 { e[k - 1].abs() } else { 0.0 };
            let r = if k + 1 < m { e[k].abs() } else { 0.0 };
            l + r
        };
        let mut lo = (0..m).map(|k| d[k] - radius(k)).fold(f64::INFINITY, f64::min);
        let mut hi = (0..m).map(|k| d[k] + radius(k)).fold(f64::NEG_INFINITY, f64::max);
        let scale = lo.abs().max(hi.abs()).max(1.0);
        // count of eigenvalues below x
        let below = |x: f64| -> usize {
            let mut count = 0;
            let mut q = d[0] - x;
            for k in 0..m {
                if k > 0 {
                    let prev = if q == 0.0 { f64::EPSILON * scale } else { q };
                    q = d[k] - x - e[k - 1] * e[k - 1] / prev;
                }
                if q < 0.0 {
                    count += 1;
                }
            }
            count
        };
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let y = inverse_iteration(&d, &e, lambda, scale)?;
        let mut u: Vec<f64> = Vec::with_capacity(m + 2);
        u.push(0.0);
        u.extend(y.iter().enumerate().map(|(k, v)| v / self.weight[k + 1].sqrt()));
        u.push(0.0);
        let peak = u.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if peak == 0.0 {
            return Err(Error::Eigen("inverse iteration returned the zero vector".into()));
        }
        u.iter_mut().for_each(|v| *v /= peak);
        Ok(Eigenpair {
            value: lambda,
            function: GridFunction::new(self.grid, u)?,
        })
    }

    /// Discrete Rayleigh quotient of `u` (zero at both ends).
    pub fn rayleigh_quotient(&self, u: &GridFunction) -> Result<f64> {
        if u.grid() != &self.grid {
            return Err(Error::InvalidGrid("u is sampled on a different grid".into()));
        }
        let v = u.values();
        let n = v.len();
        let h2 = self.grid.spacing().powi(2);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n - 1 {
            num += self.gamma * self.half_weight(i) * (v[i + 1] - v[i]).powi(2) / h2;
        }
        for i in 1..n - 1 {
            let w = self.weight[i];
            num += w * self.potential[i - 1] * v[i] * v[i];
            den += w * v[i] * v[i];
        }
        Ok(num / den)
    }
}

fn inverse_iteration(d: &[f64], e: &[f64], lambda: f64, scale: f64) -> Result<Vec<f64>> {
    let m = d.len();
    // a shift just below the eigenvalue keeps T − σI positive definite
    let sigma = lambda - 1e-10 * scale.max(lambda.abs());
    let mut y = vec![1.0; m];
    for _ in 0..6 {
        // Thomas algorithm on (T − σI) x = y
        let mut c = vec![0.0; m];
        let mut r = vec![0.0; m];
        let mut piv = d[0] - sigma;
        if piv == 0.0 {
            return Err(Error::Eigen("zero pivot in inverse iteration".into()));
        }
        if m > 1 {
            c[0] = e[0] / piv;
        }
        r[0] = y[0] / piv;
        for k in 1..m {
            piv = d[k] - sigma - e[k - 1] * c[k - 1];
            if piv == 0.0 {
                return Err(Error::Eigen("zero pivot in inverse iteration".into()));
            }
            if k + 1 < m {
                c[k] = e[k] / piv;
            }
            r[k] = (y[k] - e[k - 1] * r[k - 1]) / piv;
        }
        for k in (0..m - 1).rev() {
            r[k] -= c[k] * r[k + 1];
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Eigen("inverse iteration diverged".into()));
        }
        y = r.into_iter().map(|v| v / norm).collect();
    }
    Ok(y)
}

/// Richardson estimate from eigenvalues on grids of spacing `4h`, `2h`, `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    pub order: f64,
    pub error_estimate: f64,
}

pub fn richardson(coarsest: f64, coarse: f64, fine: f64) -> Extrapolation {
    let ratio = (coarsest - coarse) / (coarse - fine);
    let order = if ratio.is_finite() && ratio > 1.0 {
        ratio.log2().clamp(0.5, 4.0)
    } else {
        2.0
    };
    let value = fine + (fine - coarse) / (2f64.powf(order) - 1.0);
    Extrapolation {
        value,
        order,
        error_estimate: (value - fine).abs(),
    }
}

/// Principal eigenvalue of the operator of `band`, checked against `Λ`.
pub fn principal_eigenvalue(band: &Band, params: &SpectralParams) -> Result<SpectralReport> {
    principal_eigenvalue_with_tol(band, params, BOUND_TOL)
}

pub fn principal_eigenvalue_with_tol(
    band: &Band,
    params: &SpectralParams,
    tol: f64,
) -> Result<SpectralReport> {
    let op = SturmLiouville::from_band(band, params)?;
    let fine = op.principal()?;
    let mut warnings = Vec::new();
    let (value, order, err) = match (op.coarsen(2), op.coarsen(4)) {
        (Some(c2), Some(c4)) if c4.grid().len() >= 5 => {
            let ex = richardson(c4.principal()?.value, c2.principal()?.value, fine.value);
            (ex.value, Some(ex.order), ex.error_estimate)
        }
        _ => {
            warnings.push("grid size does not allow Richardson extrapolation".to_string());
            (fine.value, None, 0.0)
        }
    };
    if err > COARSE_GRID_THRESHOLD * value.abs().max(f64::MIN_POSITIVE) {
        warnings.push(format!(
            "grid too coarse: raw {} and extrapolated {value} eigenvalues differ by {err:.3e}",
            fine.value
        ));
    }
    Ok(SpectralReport {
        kind: params.kind,
        lambda_target: params.lambda,
        residual_min: None,
        principal_eigenvalue: Some(value),
        raw_eigenvalue: Some(fine.value),
        error_estimate: Some(err),
        convergence_order: order,
        satisfied: value >= params.lambda - tol.max(err),
        eigenfunction: Some(fine.function),
        grid_points: band.grid().len(),
        warnings,
    })
}
