//! Warped-product bands `dt² + Σ fᵢ(t)² dsᵢ²` over flat tori and their curvature.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::grid::{fmt17, Grid, GridFunction, Profile};

/// Warp data of a band.
#[derive(Debug, Clone, PartialEq)]
pub enum Warp {
    /// `dt² + φ₁² ds₁² + φ₂² ds₂²`, three-dimensional only.
    DoublyWarped { phi1: Profile, phi2: Profile },
    /// `dt² + ξ² g_flat` on an `(n-1)`-torus.
    SingleWarp { xi: Profile },
}

/// A cohomogeneity-one torical band.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    dimension: usize,
    grid: Grid,
    warp: Warp,
    fiber_lengths: Vec<f64>,
}

impl Band {
    pub fn doubly_warped(phi1: Profile, phi2: Profile, fiber_lengths: Vec<f64>) -> Result<Self> {
        if phi1.grid() != phi2.grid() {
            return Err(Error::InvalidBand("warps live on different grids".into()));
        }
        let grid = *phi1.grid();
        Self::validated(3, grid, Warp::DoublyWarped { phi1, phi2 }, fiber_lengths)
    }

    pub fn single_warp(dimension: usize, xi: Profile, fiber_lengths: Vec<f64>) -> Result<Self> {
        let grid = *xi.grid();
        Self::validated(dimension, grid, Warp::SingleWarp { xi }, fiber_lengths)
    }

    /// Convenience constructor with unit fiber circles.
    pub fn doubly_warped_unit(phi1: Profile, phi2: Profile) -> Result<Self> {
        Self::doubly_warped(phi1, phi2, vec![1.0; 2])
    }

    pub fn single_warp_unit(dimension: usize, xi: Profile) -> Result<Self> {
        Self::single_warp(dimension, xi, vec![1.0; dimension.saturating_sub(1)])
    }

    /// The flat band `[t_min, t_max] × T^{n-1}`.
    pub fn flat(dimension: usize, grid: Grid) -> Result<Self> {
        let one = || Profile::from_closed_form(grid, |_| [1.0, 0.0, 0.0]);
        if dimension == 3 {
            Self::doubly_warped_unit(one()?, one()?)
        } else {
            Self::single_warp_unit(dimension, one()?)
        }
    }

    fn validated(dimension: usize, grid: Grid, warp: Warp, fiber_lengths: Vec<f64>) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::Dimension(format!("n = {dimension}, need n >= 3")));
        }
        if matches!(warp, Warp::DoublyWarped { .. }) && dimension != 3 {
            return Err(Error::Dimension(format!(
                "a doubly warped band must be three-dimensional, got n = {dimension}"
            )));
        }
        if fiber_lengths.len() != dimension - 1 {
            return Err(Error::InvalidBand(format!(
                "{} fiber lengths for an {}-torus",
                fiber_lengths.len(),
                dimension - 1
            )));
        }
        if let Some(l) = fiber_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidBand(format!("fiber length {l} is not positive")));
        }
        let band = Self {
            dimension,
            grid,
            warp,
            fiber_lengths,
        };
        if band.regular_range().len() < 5 {
            return Err(Error::InvalidBand("fewer than five regular nodes".into()));
        }
        Ok(band)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn warp(&self) -> &Warp {
        &self.warp
    }

    pub fn fiber_lengths(&self) -> &[f64] {
        &self.fiber_lengths
    }

    /// Distance between the two boundary components, `t₊ − t₋`.
    pub fn width(&self) -> f64 {
        self.grid.t_max() - self.grid.t_min()
    }

    /// One profile per fiber circle (the single warp repeated `n-1` times).
    pub fn factors(&self) -> Vec<&Profile> {
        match &self.warp {
            Warp::DoublyWarped { phi1, phi2 } => vec![phi1, phi2],
            Warp::SingleWarp { xi } => vec![xi; self.dimension - 1],
        }
    }

    /// Nodes where every warp is positive.
    pub fn regular_range(&self) -> Range<usize> {
        match &self.warp {
            Warp::DoublyWarped { phi1, phi2 } => {
                let (a, b) = (phi1.regular(), phi2.regular());
                a.start.max(b.start)..a.end.min(b.end)
            }
            Warp::SingleWarp { xi } => xi.regular(),
        }
    }

    /// Fiber volume density `Π fᵢ(t)` (without the circle lengths).
    pub fn density(&self, i: usize) -> f64 {
        self.factors().iter().map(|p| p.value(i)).product()
    }

    /// Fiber area `Π Lᵢ · Π fᵢ(t)`.
    pub fn fiber_area(&self, i: usize) -> f64 {
        self.fiber_lengths.iter().product::<f64>() * self.density(i)
    }

    pub fn density_function(&self) -> Result<GridFunction> {
        GridFunction::new(
            self.grid,
            (0..self.grid.len()).map(|i| self.density(i)).collect(),
        )
    }

    /// Mean curvature `Σ fᵢ'/fᵢ` of the slice at regular node `i`.
    pub fn mean_curvature_at(&self, i: usize) -> f64 {
        self.factors().iter().map(|p| p.log_first(i)).sum()
    }

    /// CSV export with header `t,phi1,phi2` or `t,xi`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match &self.warp {
            Warp::DoublyWarped { phi1, phi2 } => {
                s.push_str("t,phi1,phi2\n");
                for (i, t) in self.grid.points().enumerate() {
                    let _ = writeln!(
                        s,
                        "{},{},{}",
                        fmt17(t),
                        fmt17(phi1.value(i)),
                        fmt17(phi2.value(i))
                    );
                }
            }
            Warp::SingleWarp { xi } => {
                s.push_str("t,xi\n");
                for (i, t) in self.grid.points().enumerate() {
                    let _ = writeln!(s, "{},{}", fmt17(t), fmt17(xi.value(i)));
                }
            }
        }
        s
    }
}

/// Curvature of a band along its regular nodes.
///
/// Every field lives on the sub-grid starting at band node `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub offset: usize,
    pub ric_t: GridFunction,
    pub ric_fiber: Vec<GridFunction>,
    pub ric_min: GridFunction,
    pub scalar: GridFunction,
    pub mean_curv: GridFunction,
    pub second_ff_sq: GridFunction,
    pub traceless_a_sq: GridFunction,
}

impl CurvatureProfile {
    pub fn grid(&self) -> &Grid {
        self.ric_t.grid()
    }

    pub fn len(&self) -> usize {
        self.ric_t.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Band node index of local node `k`.
    pub fn band_index(&self, k: usize) -> usize {
        self.offset + k
    }

    /// CSV with columns `t,ric_t,ric_fiber_1..,ric_min,scalar,H,A_sq,A0_sq`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,ric_t");
        for i in 0..self.ric_fiber.len() {
            let _ = write!(s, ",ric_fiber_{}", i + 1);
        }
        s.push_str(",ric_min,scalar,H,A_sq,A0_sq\n");
        for (k, t) in self.grid().points().enumerate() {
            s.push_str(&fmt17(t));
            let mut col = |f: &GridFunction| {
                s.push(',');
                s.push_str(&fmt17(f.values()[k]));
            };
            col(&self.ric_t);
            for f in &self.ric_fiber {
                col(f);
            }
            col(&self.ric_min);
            col(&self.scalar);
            col(&self.mean_curv);
            col(&self.second_ff_sq);
            col(&self.traceless_a_sq);
            s.push('\n');
        }
        s
    }
}

struct Columns {
    ric_t: Vec<f64>,
    ric_fiber: Vec<Vec<f64>>,
    scalar: Vec<f64>,
    mean: Vec<f64>,
    a_sq: Vec<f64>,
}

impl Columns {
    fn new(fibers: usize, len: usize) -> Self {
        Self {
            ric_t: Vec::with_capacity(len),
            ric_fiber: vec![Vec::with_capacity(len); fibers],
            scalar: Vec::with_capacity(len),
            mean: Vec::with_capacity(len),
            a_sq: Vec::with_capacity(len),
        }
    }

    fn finish(self, band: &Band, range: Range<usize>) -> Result<CurvatureProfile> {
        let grid = band.grid.subgrid(range.clone())?;
        let n1 = (band.dimension - 1) as f64;
        let ric_min: Vec<f64> = (0..self.ric_t.len())
            .map(|k| {
                self.ric_fiber
                    .iter()
                    .fold(self.ric_t[k], |m, col| m.min(col[k]))
            })
            .collect();
        let traceless: Vec<f64> = self
            .a_sq
            .iter()
            .zip(&self.mean)
            .map(|(a, h)| (a - h * h / n1).max(0.0))
            .collect();
        let gf = |v: Vec<f64>| GridFunction::new(grid, v);
        Ok(CurvatureProfile {
            offset: range.start,
            ric_t: gf(self.ric_t)?,
            ric_fiber: self
                .ric_fiber
                .into_iter()
                .map(gf)
                .collect::<Result<_>>()?,
            ric_min: gf(ric_min)?,
            scalar: gf(self.scalar)?,
            mean_curv: gf(self.mean)?,
            second_ff_sq: gf(self.a_sq)?,
            traceless_a_sq: gf(traceless)?,
        })
    }
}

/// Curvature of `dt² + φ₁²ds₁² + φ₂²ds₂²`.
pub fn curvature_doubly_warped(band: &Band) -> Result<CurvatureProfile> {
    let Warp::DoublyWarped { phi1, phi2 } = &band.warp else {
        return Err(Error::Dimension(format!(
            "expected a doubly warped three-dimensional band, got a single warp with n = {}",
            band.dimension
        )));
    };
    let range = band.regular_range();
    let mut c = Columns::new(2, range.len());
    for i in range.clone() {
        let (a1, a2) = (phi1.log_first(i), phi2.log_first(i));
        let (r1, r2) = (phi1.ratio_second(i), phi2.ratio_second(i));
        let ric_t = -(r1 + r2);
        let e1 = -(r1 + a1 * a2);
        let e2 = -(r2 + a1 * a2);
        c.ric_t.push(ric_t);
        c.ric_fiber[0].push(e1);
        c.ric_fiber[1].push(e2);
        c.scalar.push(ric_t + e1 + e2);
        c.mean.push(a1 + a2);
        c.a_sq.push(a1 * a1 + a2 * a2);
    }
    c.finish(band, range)
}

/// Curvature of `dt² + ξ² g_flat` on `[t₋, t₊] × T^{n-1}`.
pub fn curvature_single_warp(band: &Band) -> Result<CurvatureProfile> {
    let Warp::SingleWarp { xi } = &band.warp else {
        return Err(Error::InvalidBand("expected a single-warp band".into()));
    };
    let n1 = (band.dimension - 1) as f64;
    let n2 = n1 - 1.0;
    let range = band.regular_range();
    let mut c = Columns::new(band.dimension - 1, range.len());
    for i in range.clone() {
        let l = xi.log_first(i);
        let r = xi.ratio_second(i);
        let fiber = -(r + n2 * l * l);
        c.ric_t.push(-n1 * r);
        for col in &mut c.ric_fiber {
            col.push(fiber);
        }
        c.scalar.push(-2.0 * n1 * r - n1 * n2 * l * l);
        c.mean.push(n1 * l);
        c.a_sq.push(n1 * l * l);
    }
    c.finish(band, range)
}

/// Dispatches on the warp kind.
pub fn curvature(band: &Band) -> Result<CurvatureProfile> {
    match band.warp {
        Warp::DoublyWarped { .. } => curvature_doubly_warped(band),
        Warp::SingleWarp { .. } => curvature_single_warp(band),
    }
}

/// The alternative `Ric(∂t,∂t) = −2φ₂''/φ₂` obtained by reading the
/// symmetric formula with both second derivatives on the second warp.
/// Kept only to quantify how far it is from the true component.
pub fn ric_t_asymmetric_candidate(band: &Band) -> Result<GridFunction> {
    let Warp::DoublyWarped { phi2, .. } = &band.warp else {
        return Err(Error::Dimension("candidate formula needs a doubly warped band".into()));
    };
    let range = band.regular_range();
    let grid = band.grid.subgrid(range.clone())?;
    GridFunction::new(grid, range.map(|i| -2.0 * phi2.ratio_second(i)).collect())
}

/// Curvature at a point computed from scratch out of the metric coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCurvature {
    /// Diagonal Ricci entries in the orthonormal frame, `∂t` first.
    pub ric: Vec<f64>,
    pub scalar: f64,
    /// Largest off-diagonal Ricci entry (coordinate frame).
    pub off_diagonal: f64,
}

/// Brute-force curvature of the band metric at `t`.
///
/// First and second derivatives of the metric come from second-order central
/// differences of `ln g_ii(t)` with step equal to the grid spacing; the
/// Christoffel symbols, their derivatives and the Riemann tensor follow in
/// coordinates. `t` needs a margin of one step from each endpoint.
pub fn riemann_fd_oracle(band: &Band, t: f64) -> Result<OracleCurvature> {
    let g = band.grid;
    let dt = g.spacing();
    let margin = dt;
    if t - margin < g.t_min() - 1e-12 * dt || t + margin > g.t_max() + 1e-12 * dt {
        return Err(Error::BoundaryProximity { t, margin });
    }
    let factors: Vec<&GridFunction> = band.factors().iter().map(|p| p.values()).collect();
    let dim = band.dimension;
    // metric diagonal at an arbitrary point
    let metric = |s: f64| -> Vec<f64> {
        let mut m = Vec::with_capacity(dim);
        m.push(1.0);
        m.extend(factors.iter().map(|f| f.interpolate(s).powi(2)));
        m
    };
    let gm = metric(t);
    let (gp, gn) = (metric(t + dt), metric(t - dt));
    // second-order central differences of ln g_kk; ½(ln g_kk)' is Γ^k_{0k}
    let log_d = |k: usize| {
        let (l, lp, ln) = (gm[k].ln(), gp[k].ln(), gn[k].ln());
        ((lp - ln) / (2.0 * dt), (lp - 2.0 * l + ln) / (dt * dt))
    };
    let mut dg = vec![0.0; dim];
    let mut ddg = vec![0.0; dim];
    for k in 1..dim {
        let (d1, d2) = log_d(k);
        dg[k] = d1 * gm[k];
        ddg[k] = (d2 + d1 * d1) * gm[k];
    }
    // only ∂_t g_kk is nonzero; ∂_l g_ij = δ_{l0} δ_{ij} dg[i]
    let partial = |d: &[f64], l: usize, i: usize, j: usize| {
        if l == 0 && i == j {
            d[i]
        } else {
            0.0
        }
    };
    let idx = |k: usize, i: usize, j: usize| (k * dim + i) * dim + j;
    // Γ^k_{ij} = ½ g^{kk}(∂_i g_jk + ∂_j g_ik − ∂_k g_ij) and its t-derivative
    let mut gam = vec![0.0; dim * dim * dim];
    let mut dgam = vec![0.0; dim * dim * dim];
    for k in 0..dim {
        for i in 0..dim {
            for j in 0..dim {
                let first = partial(&dg, i, j, k) + partial(&dg, j, i, k) - partial(&dg, k, i, j);
                let second = partial(&ddg, i, j, k) + partial(&ddg, j, i, k) - partial(&ddg, k, i, j);
                gam[idx(k, i, j)] = 0.5 * first / gm[k];
                dgam[idx(k, i, j)] = 0.5 * (second / gm[k] - first * dg[k] / (gm[k] * gm[k]));
            }
        }
    }
    // ∂_μ Γ is nonzero only for μ = 0
    let d = |mu: usize, k: usize, i: usize, j: usize| {
        if mu == 0 {
            dgam[idx(k, i, j)]
        } else {
            0.0
        }
    };
    // R^ρ_{σμν} = ∂_μ Γ^ρ_{νσ} − ∂_ν Γ^ρ_{μσ} + Γ^ρ_{μλ}Γ^λ_{νσ} − Γ^ρ_{νλ}Γ^λ_{μσ}
    let riemann = |rho: usize, sigma: usize, mu: usize, nu: usize| {
        let mut r = d(mu, rho, nu, sigma) - d(nu, rho, mu, sigma);
        for lam in 0..dim {
            r += gam[idx(rho, mu, lam)] * gam[idx(lam, nu, sigma)]
                - gam[idx(rho, nu, lam)] * gam[idx(lam, mu, sigma)];
        }
        r
    };
    let mut ric = vec![0.0; dim];
    let mut off = 0.0f64;
    for s in 0..dim {
        for v in 0..dim {
            let r_sv: f64 = (0..dim).map(|rho| riemann(rho, s, rho, v)).sum();
            if s == v {
                ric[s] = r_sv / gm[s];
            } else {
                off = off.max(r_sv.abs());
            }
        }
    }
    let scalar = ric.iter().sum();
    Ok(OracleCurvature {
        ric,
        scalar,
        off_diagonal: off,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_warp(grid: Grid, p: f64) -> Profile {
        Profile::from_closed_form(grid, |t| {
            [t.powf(p), p * t.powf(p - 1.0), p * (p - 1.0) * t.powf(p - 2.0)]
        })
        .unwrap()
    }

    fn kappa0_band(c: f64) -> Band {
        let g = Grid::new(0.5, 1.5, 1001).unwrap();
        Band::doubly_warped_unit(power_warp(g, 0.5 * (1.0 + c)), power_warp(g, 0.5 * (1.0 - c)))
            .unwrap()
    }

    #[test]
    fn flat_band_has_no_curvature() {
        let g = Grid::new(0.0, 1.0, 21).unwrap();
        for n in [3, 5] {
            let band = Band::flat(n, g).unwrap();
            let c = curvature(&band).unwrap();
            for f in [&c.ric_t, &c.ric_min, &c.scalar, &c.mean_curv, &c.second_ff_sq] {
                assert_eq!(f.max_abs(), 0.0);
            }
            let o = riemann_fd_oracle(&band, 0.5).unwrap();
            assert!(o.ric.iter().all(|r| r.abs() < 1e-9));
        }
    }

    #[test]
    fn kappa_zero_c_one_is_flat() {
        let band = kappa0_band(1.0);
        let c = curvature_doubly_warped(&band).unwrap();
        assert!(c.ric_t.max_abs() < 1e-12);
        assert!(c.scalar.max_abs() < 1e-12);
    }

    #[test]
    fn kappa_zero_half_at_one() {
        let band = kappa0_band(0.5);
        let c = curvature_doubly_warped(&band).unwrap();
        let k = band.grid().nearest(1.0) - c.offset;
        assert!((c.ric_t.values()[k] - 0.375).abs() < 1e-12);
        assert!(c.ric_fiber[0].values()[k].abs() < 1e-12);
        assert!(c.ric_fiber[1].values()[k].abs() < 1e-12);
        let o = riemann_fd_oracle(&band, 1.0).unwrap();
        assert!((o.ric[0] - 0.375).abs() < 1e-5, "{:?}", o.ric);
    }

    #[test]
    fn doubly_warped_rejects_higher_dimension() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let one = Profile::from_closed_form(g, |_| [1.0, 0.0, 0.0]).unwrap();
        let band = Band::single_warp_unit(4, one).unwrap();
        assert!(matches!(curvature_doubly_warped(&band), Err(Error::Dimension(_))));
    }

    #[test]
    fn cosine_warp_scalar_curvature() {
        let g = Grid::new(-1.0, 1.0, 2001).unwrap();
        let xi = Profile::from_closed_form(g, |t| [t.cos(), -t.sin(), -t.cos()]).unwrap();
        let band = Band::single_warp_unit(3, xi).unwrap();
        let c = curvature_single_warp(&band).unwrap();
        let k = g.nearest(0.0);
        assert!((c.scalar.values()[k] - 4.0).abs() < 1e-12);
        let o = riemann_fd_oracle(&band, 0.0).unwrap();
        assert!((o.scalar - 4.0).abs() < 1e-5);
        assert!(c.traceless_a_sq.max_abs() < 1e-12);
    }

    #[test]
    fn cosh_warp_matches_oracle() {
        let g = Grid::new(0.0, 1.0, 1001).unwrap();
        let xi = Profile::from_closed_form(g, |t| [t.cosh(), t.sinh(), t.cosh()]).unwrap();
        let band = Band::single_warp_unit(3, xi).unwrap();
        let c = curvature_single_warp(&band).unwrap();
        let k = g.nearest(0.5);
        let o = riemann_fd_oracle(&band, g.point(k)).unwrap();
        assert!((o.ric[0] - c.ric_t.values()[k]).abs() < 1e-5);
        assert!((o.ric[1] - c.ric_fiber[0].values()[k]).abs() < 1e-5);
        assert!((o.scalar - c.scalar.values()[k]).abs() < 1e-5);
    }

    #[test]
    fn oracle_rejects_points_near_the_boundary() {
        let band = kappa0_band(0.5);
        let dt = band.grid().spacing();
        assert!(riemann_fd_oracle(&band, 0.5 + dt).is_ok());
        assert!(matches!(
            riemann_fd_oracle(&band, 0.5 + 0.5 * dt),
            Err(Error::BoundaryProximity { .. })
        ));
    }

    #[test]
    fn scalar_is_trace_of_ricci() {
        let band = kappa0_band(0.3);
        let c = curvature(&band).unwrap();
        for k in 0..c.len() {
            let tr = c.ric_t.values()[k] + c.ric_fiber[0].values()[k] + c.ric_fiber[1].values()[k];
            assert!((tr - c.scalar.values()[k]).abs() <= 1e-12 * (1.0 + tr.abs()));
        }
    }

    #[test]
    fn curvature_csv_header() {
        let band = kappa0_band(0.5);
        let csv = curvature(&band).unwrap().to_csv();
        assert_eq!(
            csv.lines().next().unwrap(),
            "t,ric_t,ric_fiber_1,ric_fiber_2,ric_min,scalar,H,A_sq,A0_sq"
        );
    }
}
