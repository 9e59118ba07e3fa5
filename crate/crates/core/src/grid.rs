//! Uniform 1-D grids, sampled functions, finite differences and quadrature.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};

/// Default number of grid points for verification runs.
pub const DEFAULT_POINTS: usize = 2001;

/// Uniform grid on the closed interval `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    t_min: f64,
    t_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(t_min: f64, t_max: f64, n_points: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "non-finite bounds [{t_min}, {t_max}]"
            )));
        }
        if t_min >= t_max {
            return Err(Error::InvalidGrid(format!(
                "t_min = {t_min} must be smaller than t_max = {t_max}"
            )));
        }
        if n_points < 3 {
            return Err(Error::TooFewPoints {
                required: 3,
                got: n_points,
            });
        }
        Ok(Self {
            t_min,
            t_max,
            n_points,
        })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_points - 1) as f64
    }

    /// Coordinate of node `i`. The last node is pinned to `t_max` exactly.
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.t_max
        } else {
            self.t_min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.point(i))
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_min && t <= self.t_max
    }

    /// Index of the cell `[t_j, t_{j+1}]` containing `t` (clamped to the grid).
    pub fn cell_of(&self, t: f64) -> usize {
        let x = ((t - self.t_min) / self.spacing()).floor();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.n_points - 2)
        }
    }

    /// Index of the node nearest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let x = ((t - self.t_min) / self.spacing()).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.n_points - 1)
        }
    }

    /// The grid formed by nodes `range` of this grid.
    pub fn subgrid(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.n_points || range.len() < 3 {
            return Err(Error::InvalidGrid(format!(
                "sub-range {range:?} of a {}-point grid",
                self.n_points
            )));
        }
        Grid::new(
            self.point(range.start),
            self.point(range.end - 1),
            range.len(),
        )
    }

    /// Every `stride`-th node, when `(n_points - 1)` is divisible by `stride`.
    pub fn coarsen(&self, stride: usize) -> Option<Self> {
        if stride == 0 || (self.n_points - 1) % stride != 0 {
            return None;
        }
        let n = (self.n_points - 1) / stride + 1;
        Grid::new(self.t_min, self.t_max, n).ok()
    }
}

/// A real function sampled on a [`Grid`]. All samples are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn restrict(&self, range: Range<usize>) -> Result<Self> {
        let grid = self.grid.subgrid(range.clone())?;
        Self::new(grid, self.values[range].to_vec())
    }

    /// Samples at every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Option<Self> {
        let grid = self.grid.coarsen(stride)?;
        let values = self.values.iter().step_by(stride).copied().collect();
        Self::new(grid, values).ok()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Finite-difference derivative of order 1 or 2.
    ///
    /// Fourth-order stencils on interior nodes (off-centred next to the
    /// boundary), second-order one-sided stencils at the two endpoints.
    pub fn derivative(&self, order: u8) -> Result<Self> {
        let n = self.grid.len();
        if n < 5 {
            return Err(Error::TooFewPoints {
                required: 5,
                got: n,
            });
        }
        let h = self.grid.spacing();
        let f = &self.values;
        let mut d = vec![0.0; n];
        match order {
            1 => {
                d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
                d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
                for i in 2..n - 2 {
                    d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
                }
                let m = n - 1;
                d[m - 1] = (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3]
                    - f[m - 4])
                    / (12.0 * h);
                d[m] = (3.0 * f[m] - 4.0 * f[m - 1] + f[m - 2]) / (2.0 * h);
            }
            2 => {
                let h2 = h * h;
                let m = n - 1;
                d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
                d[m] = (2.0 * f[m] - 5.0 * f[m - 1] + 4.0 * f[m - 2] - f[m - 3]) / h2;
                if n >= 6 {
                    d[1] = (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4]
                        + f[5])
                        / (12.0 * h2);
                    d[m - 1] = (10.0 * f[m] - 15.0 * f[m - 1] - 4.0 * f[m - 2]
                        + 14.0 * f[m - 3]
                        - 6.0 * f[m - 4]
                        + f[m - 5])
                        / (12.0 * h2);
                } else {
                    d[1] = (f[0] - 2.0 * f[1] + f[2]) / h2;
                    d[m - 1] = (f[m - 2] - 2.0 * f[m - 1] + f[m]) / h2;
                }
                for i in 2..n - 2 {
                    d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1]
                        - f[i + 2])
                        / (12.0 * h2);
                }
            }
            other => {
                return Err(Error::InvalidParams(format!(
                    "derivative order must be 1 or 2, got {other}"
                )))
            }
        }
        Self::new(self.grid, d)
    }

    /// Piecewise-cubic (4-point Lagrange) interpolation at `t`.
    pub fn interpolate(&self, t: f64) -> f64 {
        let j = self.grid.cell_of(t);
        let (start, len) = self.stencil(j);
        let nodes: Vec<f64> = (start..start + len).map(|i| self.grid.point(i)).collect();
        lagrange(&nodes, &self.values[start..start + len], t)
    }

    fn stencil(&self, cell: usize) -> (usize, usize) {
        let n = self.grid.len();
        let len = n.min(4);
        let start = cell.saturating_sub(1).min(n - len);
        (start, len)
    }

    /// Exact integral of the local cubic interpolant over `[x0, x1]`, a
    /// sub-interval of cell `cell`.
    fn cell_integral(&self, cell: usize, x0: f64, x1: f64) -> f64 {
        if x1 == x0 {
            return 0.0;
        }
        let (start, len) = self.stencil(cell);
        let nodes: Vec<f64> = (start..start + len).map(|i| self.grid.point(i)).collect();
        let vals = &self.values[start..start + len];
        // Two-point Gauss-Legendre integrates the cubic exactly.
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * (x1 - x0);
        let off = half / 3f64.sqrt();
        half * (lagrange(&nodes, vals, mid - off) + lagrange(&nodes, vals, mid + off))
    }

    /// Integral over `[a, b]`: composite Simpson on the whole cells, with the
    /// partial cells at either end integrated from the local cubic interpolant.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        let g = self.grid;
        if !(a <= b && g.contains(a) && g.contains(b)) {
            return Err(Error::OutOfRange {
                a,
                b,
                t_min: g.t_min,
                t_max: g.t_max,
            });
        }
        if a == b {
            return Ok(0.0);
        }
        let h = g.spacing();
        // first node >= a and last node <= b
        let mut ia = ((a - g.t_min) / h).ceil().max(0.0) as usize;
        while ia > 0 && g.point(ia - 1) >= a {
            ia -= 1;
        }
        let mut ib = (((b - g.t_min) / h).floor().max(0.0) as usize).min(g.len() - 1);
        while ib + 1 < g.len() && g.point(ib + 1) <= b {
            ib += 1;
        }
        if ia > ib {
            let cell = g.cell_of(a);
            return Ok(self.cell_integral(cell, a, b));
        }
        let mut total = 0.0;
        if ia > 0 && g.point(ia) > a {
            total += self.cell_integral(ia - 1, a, g.point(ia));
        }
        total += self.node_integral(ia, ib);
        if ib + 1 < g.len() && g.point(ib) < b {
            total += self.cell_integral(ib, g.point(ib), b);
        }
        Ok(total)
    }

    fn node_integral(&self, ia: usize, ib: usize) -> f64 {
        let m = ib - ia;
        let h = self.grid.spacing();
        let f = &self.values;
        match m {
            0 => 0.0,
            1 => self.cell_integral(ia, self.grid.point(ia), self.grid.point(ib)),
            _ => {
                let simpson = |lo: usize, hi: usize| -> f64 {
                    let mut s = f[lo] + f[hi];
                    for (k, v) in f[lo + 1..hi].iter().enumerate() {
                        s += if k % 2 == 0 { 4.0 * v } else { 2.0 * v };
                    }
                    s * h / 3.0
                };
                if m % 2 == 0 {
                    simpson(ia, ib)
                } else {
                    let lo = ib - 3;
                    let tail = 3.0 * h / 8.0 * (f[lo] + 3.0 * f[lo + 1] + 3.0 * f[lo + 2] + f[ib]);
                    if lo > ia {
                        simpson(ia, lo) + tail
                    } else {
                        tail
                    }
                }
            }
        }
    }

    /// Running integral `F(t_i) = ∫_{t_min}^{t_i} f`.
    pub fn cumulative_integral(&self) -> Result<Self> {
        let g = self.grid;
        let mut out = Vec::with_capacity(g.len());
        let mut acc = 0.0;
        out.push(0.0);
        for j in 0..g.len() - 1 {
            acc += self.cell_integral(j, g.point(j), g.point(j + 1));
            out.push(acc);
        }
        Self::new(g, out)
    }

    /// CSV with header `t,value` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value\n");
        for (t, v) in self.grid.points().zip(&self.values) {
            let _ = writeln!(s, "{},{}", fmt17(t), fmt17(*v));
        }
        s
    }
}

/// Formats with 17 significant digits, enough for an exact `f64` round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn lagrange(nodes: &[f64], values: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    for (i, (&xi, &fi)) in nodes.iter().zip(values).enumerate() {
        let mut w = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                w *= (t - xj) / (xi - xj);
            }
        }
        sum += w * fi;
    }
    sum
}

/// A non-negative function on a grid together with its first two
/// derivatives.
///
/// The function is positive on every interior node and may vanish at the
/// endpoints (a degenerate warp or a Dirichlet weight). Derivatives are only
/// stored on the regular nodes, i.e. where the value is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    values: GridFunction,
    regular: Range<usize>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Profile {
    /// Builds a profile from a closed form returning `[f, f', f'']`.
    ///
    /// Nodes where `f` evaluates to exactly zero are treated as degenerate
    /// endpoints; their derivatives are never evaluated as part of the jet.
    pub fn from_closed_form(grid: Grid, f: impl Fn(f64) -> [f64; 3]) -> Result<Self> {
        let jets: Vec<[f64; 3]> = grid.points().map(&f).collect();
        let values = GridFunction::new(grid, jets.iter().map(|j| j[0]).collect())?;
        let regular = regular_range(&values)?;
        let first: Vec<f64> = jets[regular.clone()].iter().map(|j| j[1]).collect();
        let second: Vec<f64> = jets[regular.clone()].iter().map(|j| j[2]).collect();
        for (k, (&d1, &d2)) in first.iter().zip(&second).enumerate() {
            if !d1.is_finite() || !d2.is_finite() {
                return Err(Error::NonFinite {
                    index: regular.start + k,
                    value: if d1.is_finite() { d2 } else { d1 },
                });
            }
        }
        Ok(Self {
            values,
            regular,
            first,
            second,
        })
    }

    /// Builds a profile from samples, differentiating numerically.
    pub fn from_samples(values: GridFunction) -> Result<Self> {
        let regular = regular_range(&values)?;
        let d1 = values.derivative(1)?;
        let d2 = values.derivative(2)?;
        Ok(Self {
            first: d1.values()[regular.clone()].to_vec(),
            second: d2.values()[regular.clone()].to_vec(),
            values,
            regular,
        })
    }

    pub fn values(&self) -> &GridFunction {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    /// Nodes where the profile is positive and its derivatives are known.
    pub fn regular(&self) -> Range<usize> {
        self.regular.clone()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values.values()[i]
    }

    /// `f'(t_i)`; `i` must be a regular node.
    pub fn first(&self, i: usize) -> f64 {
        self.first[i - self.regular.start]
    }

    /// `f''(t_i)`; `i` must be a regular node.
    pub fn second(&self, i: usize) -> f64 {
        self.second[i - self.regular.start]
    }

    /// `(log f)'` at regular node `i`.
    pub fn log_first(&self, i: usize) -> f64 {
        self.first(i) / self.value(i)
    }

    /// `f''/f` at regular node `i`.
    pub fn ratio_second(&self, i: usize) -> f64 {
        self.second(i) / self.value(i)
    }

    /// Restriction to the nodes `range`.
    pub fn restrict(&self, range: Range<usize>) -> Result<Self> {
        if range.start < self.regular.start || range.end > self.regular.end {
            return Err(Error::InvalidGrid(format!(
                "restriction {range:?} leaves the regular nodes {:?}",
                self.regular
            )));
        }
        let values = self.values.restrict(range.clone())?;
        let off = range.start - self.regular.start;
        let len = range.len();
        Ok(Self {
            regular: 0..len,
            first: self.first[off..off + len].to_vec(),
            second: self.second[off..off + len].to_vec(),
            values,
        })
    }
}

fn regular_range(values: &GridFunction) -> Result<Range<usize>> {
    let v = values.values();
    let n = v.len();
    let g = values.grid();
    for (i, &x) in v.iter().enumerate() {
        let interior = i > 0 && i + 1 < n;
        if x < 0.0 || (interior && x == 0.0) {
            return Err(Error::NonPositiveWeight {
                t: g.point(i),
                value: x,
            });
        }
    }
    let start = usize::from(v[0] == 0.0);
    let end = if v[n - 1] == 0.0 { n - 1 } else { n };
    Ok(start..end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 2).is_err());
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        assert_eq!(g.point(10), 1.0);
    }

    #[test]
    fn derivative_of_square_is_exact() {
        let g = Grid::new(0.0, 1.0, 101).unwrap();
        let f = GridFunction::from_fn(g, |t| t * t).unwrap();
        let d = f.derivative(1).unwrap();
        for (t, v) in g.points().zip(d.values()) {
            assert!((v - 2.0 * t).abs() <= 1e-10, "t={t} v={v}");
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = Grid::new(-1.0, 2.0, 31).unwrap();
        let f = GridFunction::from_fn(g, |_| 3.5).unwrap();
        assert!(f.derivative(1).unwrap().max_abs() < 1e-12);
        assert!(f.derivative(2).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn second_derivative_of_sine() {
        let g = Grid::new(0.0, PI, 3143).unwrap();
        assert!(g.spacing() <= 1.0001e-3);
        let f = GridFunction::from_fn(g, f64::sin).unwrap();
        let d = f.derivative(2).unwrap();
        let n = g.len();
        let err = (1..n - 1)
            .map(|i| (d.values()[i] + g.point(i).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-7, "err = {err}");
    }

    #[test]
    fn derivative_needs_five_points() {
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        let f = GridFunction::from_fn(g, |t| t).unwrap();
        assert!(matches!(f.derivative(1), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let one = GridFunction::from_fn(g, |_| 1.0).unwrap();
        assert!((one.integrate(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);

        let g = Grid::new(0.0, PI / 2.0, 201).unwrap();
        let c = GridFunction::from_fn(g, f64::cos).unwrap();
        assert!((c.integrate(0.0, PI / 2.0).unwrap() - 1.0).abs() <= 1e-8);

        let g = Grid::new(0.0, 2.0, 8).unwrap();
        let cube = GridFunction::from_fn(g, |t| t * t * t).unwrap();
        assert!((cube.integrate(0.0, 2.0).unwrap() - 4.0).abs() <= 1e-10);
        // partial cells on both sides
        let exact = (1.77f64.powi(4) - 0.13f64.powi(4)) / 4.0;
        assert!((cube.integrate(0.13, 1.77).unwrap() - exact).abs() <= 1e-12);
        // inside a single cell
        let exact = (0.2f64.powi(4) - 0.15f64.powi(4)) / 4.0;
        assert!((cube.integrate(0.15, 0.2).unwrap() - exact).abs() <= 1e-14);
    }

    #[test]
    fn integrate_rejects_outside_interval() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let f = GridFunction::from_fn(g, |t| t).unwrap();
        assert!(matches!(f.integrate(-0.1, 0.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(f.integrate(0.6, 0.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn csv_has_header_and_round_trips() {
        let g = Grid::new(0.0, 1.0, 5).unwrap();
        let f = GridFunction::from_fn(g, |t| (3.0 * t).exp() / 7.0).unwrap();
        let csv = f.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,value"));
        for (line, v) in lines.zip(f.values()) {
            let parsed: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(parsed, *v);
        }
    }

    #[test]
    fn profile_marks_degenerate_endpoints() {
        let g = Grid::new(-PI / 2.0, PI / 2.0, 21).unwrap();
        let p = Profile::from_closed_form(g, |t| {
            let c = t.cos();
            if t.abs() >= PI / 2.0 {
                [0.0, f64::NAN, f64::NAN]
            } else {
                [c, -t.sin(), -c]
            }
        })
        .unwrap();
        assert_eq!(p.regular(), 1..20);
        assert!((p.log_first(10)).abs() < 1e-15);
    }

    #[test]
    fn profile_rejects_interior_zero() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let f = GridFunction::from_fn(g, |t| (t - 0.5).abs()).unwrap();
        assert!(matches!(
            Profile::from_samples(f),
            Err(Error::NonPositiveWeight { .. })
        ));
    }
}
