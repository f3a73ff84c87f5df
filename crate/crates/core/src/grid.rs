//! Structured grids for `W = X x [-1, 1]`, fields on them, finite-difference
//! stencils, quadrature and discrete norms.
//!
//! Two backends are supported. The torus backend resolves every coordinate
//! of `X = T^{n-1}` on a periodic axis of period `2 pi`. The axisymmetric
//! sphere backend resolves only the colatitude of `X = S^2` on cell-centred
//! nodes and treats the longitude as a symmetry direction.
//!
//! Axes and chart coordinates are matched by name, so a field on `W` and a
//! metric that only depends on `X` can be combined without copying.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MetricField;

pub const COORD_T: &str = "t";
pub const COORD_THETA: &str = "theta";
pub const COORD_RHO: &str = "rho";
pub const COORD_PSI: &str = "psi";

pub fn torus_coord(i: usize) -> String {
    format!("x{}", i + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Torus,
    SphereAxisym,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Torus => "torus",
            Backend::SphereAxisym => "sphere-axisym",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisKind {
    /// Nodes `lo + k h` for `k < n`, wrapping with period `hi - lo`.
    Periodic,
    /// Cell-centred nodes `lo + (k + 1/2) h` on `[0, pi]`; stencils reflect
    /// through both poles.
    Polar,
    /// Nodes `lo + k h` for `k < n` including both endpoints.
    Closed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub kind: AxisKind,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Axis {
    pub fn periodic(name: impl Into<String>, n: usize, period: f64) -> Self {
        Axis {
            name: name.into(),
            kind: AxisKind::Periodic,
            n,
            lo: 0.0,
            hi: period,
        }
    }

    pub fn polar(name: impl Into<String>, n: usize) -> Self {
        Axis {
            name: name.into(),
            kind: AxisKind::Polar,
            n,
            lo: 0.0,
            hi: PI,
        }
    }

    pub fn closed(name: impl Into<String>, n: usize, lo: f64, hi: f64) -> Self {
        Axis {
            name: name.into(),
            kind: AxisKind::Closed,
            n,
            lo,
            hi,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self.kind {
            AxisKind::Periodic | AxisKind::Polar => (self.hi - self.lo) / self.n as f64,
            AxisKind::Closed => (self.hi - self.lo) / (self.n - 1) as f64,
        }
    }

    pub fn coord(&self, k: usize) -> f64 {
        let h = self.spacing();
        match self.kind {
            AxisKind::Polar => self.lo + (k as f64 + 0.5) * h,
            _ => self.lo + k as f64 * h,
        }
    }

    /// Quadrature weight of node `k` (midpoint rule, trapezoid on closed axes).
    pub fn weight(&self, k: usize) -> f64 {
        let h = self.spacing();
        match self.kind {
            AxisKind::Closed if k == 0 || k + 1 == self.n => 0.5 * h,
            _ => h,
        }
    }

    /// Index reached from `k` by `off` steps, and whether the step crossed a
    /// pole (so odd fields change sign). `None` past the end of a closed axis.
    fn step(&self, k: usize, off: isize) -> Option<(usize, bool)> {
        let n = self.n as isize;
        let j = k as isize + off;
        match self.kind {
            AxisKind::Periodic => Some((j.rem_euclid(n) as usize, false)),
            AxisKind::Polar => {
                if j < 0 {
                    Some(((-1 - j) as usize, true))
                } else if j >= n {
                    Some(((2 * n - 1 - j) as usize, true))
                } else {
                    Some((j as usize, false))
                }
            }
            AxisKind::Closed => (0..n).contains(&j).then_some((j as usize, false)),
        }
    }

    fn d1_taps(&self, k: usize) -> Taps {
        let h = self.spacing();
        if self.kind == AxisKind::Closed && k == 0 {
            Taps::new(&[(0, -1.5 / h), (1, 2.0 / h), (2, -0.5 / h)])
        } else if self.kind == AxisKind::Closed && k + 1 == self.n {
            Taps::new(&[(0, 1.5 / h), (-1, -2.0 / h), (-2, 0.5 / h)])
        } else {
            Taps::new(&[(-1, -0.5 / h), (1, 0.5 / h)])
        }
    }

    fn d2_taps(&self, k: usize) -> Taps {
        let h2 = self.spacing() * self.spacing();
        if self.kind == AxisKind::Closed && k == 0 {
            Taps::new(&[(0, 2.0 / h2), (1, -5.0 / h2), (2, 4.0 / h2), (3, -1.0 / h2)])
        } else if self.kind == AxisKind::Closed && k + 1 == self.n {
            Taps::new(&[
                (0, 2.0 / h2),
                (-1, -5.0 / h2),
                (-2, 4.0 / h2),
                (-3, -1.0 / h2),
            ])
        } else {
            Taps::new(&[(-1, 1.0 / h2), (0, -2.0 / h2), (1, 1.0 / h2)])
        }
    }
}

/// Up to four stencil taps along one axis.
#[derive(Clone, Copy, Debug)]
pub struct Taps {
    taps: [(isize, f64); 4],
    len: usize,
}

impl Taps {
    fn new(src: &[(isize, f64)]) -> Self {
        let mut taps = [(0, 0.0); 4];
        taps[..src.len()].copy_from_slice(src);
        Taps {
            taps,
            len: src.len(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.taps[..self.len].iter().copied()
    }
}

/// Reflection parity of a field across the poles of a polar axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Tensor-product grid; the last axis varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Self {
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].n;
        }
        let len = axes.iter().map(|a| a.n).product();
        Grid { axes, strides, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn index_along(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.axes[axis].n
    }

    pub fn node_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.axes.len())
            .map(|a| self.axes[a].coord(self.index_along(node, a)))
            .collect()
    }

    pub fn coord(&self, node: usize, axis: usize) -> f64 {
        self.axes[axis].coord(self.index_along(node, axis))
    }

    pub fn cell_volume(&self, node: usize) -> f64 {
        (0..self.axes.len())
            .map(|a| self.axes[a].weight(self.index_along(node, a)))
            .product()
    }

    /// Grid with `axis` appended as the fastest-varying axis.
    pub fn with_axis(&self, axis: Axis) -> Grid {
        let mut axes = self.axes.clone();
        axes.push(axis);
        Grid::new(axes)
    }

    pub fn without_axis(&self, name: &str) -> Grid {
        Grid::new(
            self.axes
                .iter()
                .filter(|a| a.name != name)
                .cloned()
                .collect(),
        )
    }

    fn step(&self, node: usize, axis: usize, off: isize) -> Option<(usize, bool)> {
        let k = self.index_along(node, axis);
        let (j, flipped) = self.axes[axis].step(k, off)?;
        Some((
            node + j * self.strides[axis] - k * self.strides[axis],
            flipped,
        ))
    }

    fn tap_value(&self, values: &[f64], node: usize, parity: Parity, flips: bool) -> f64 {
        let v = values[node];
        if flips && parity == Parity::Odd {
            -v
        } else {
            v
        }
    }

    /// Central first difference (second-order one-sided at closed ends).
    pub fn d1(&self, values: &[f64], node: usize, axis: usize, parity: Parity) -> f64 {
        let k = self.index_along(node, axis);
        self.axes[axis]
            .d1_taps(k)
            .iter()
            .map(|(off, w)| {
                let (m, f) = self.step(node, axis, off).expect("stencil inside axis");
                w * self.tap_value(values, m, parity, f)
            })
            .sum()
    }

    pub fn d2(&self, values: &[f64], node: usize, axis: usize, parity: Parity) -> f64 {
        let k = self.index_along(node, axis);
        self.axes[axis]
            .d2_taps(k)
            .iter()
            .map(|(off, w)| {
                let (m, f) = self.step(node, axis, off).expect("stencil inside axis");
                w * self.tap_value(values, m, parity, f)
            })
            .sum()
    }

    /// Mixed second difference `D_a D_b` (the 4-point cross stencil in the
    /// interior). Falls back to `d2` when `a == b`.
    pub fn d11(&self, values: &[f64], node: usize, a: usize, b: usize, parity: Parity) -> f64 {
        if a == b {
            return self.d2(values, node, a, parity);
        }
        let ka = self.index_along(node, a);
        let mut acc = 0.0;
        for (oa, wa) in self.axes[a].d1_taps(ka).iter() {
            let (na, fa) = self.step(node, a, oa).expect("stencil inside axis");
            let kb = self.index_along(na, b);
            for (ob, wb) in self.axes[b].d1_taps(kb).iter() {
                let (nb, fb) = self.step(na, b, ob).expect("stencil inside axis");
                acc += wa * wb * self.tap_value(values, nb, parity, fa ^ fb);
            }
        }
        acc
    }

    /// Stencil entries `(node, weight)` of the first difference, with pole
    /// reflection applied for an even field.
    pub fn d1_entries(&self, node: usize, axis: usize) -> Vec<(usize, f64)> {
        let k = self.index_along(node, axis);
        self.axes[axis]
            .d1_taps(k)
            .iter()
            .map(|(off, w)| {
                (
                    self.step(node, axis, off).expect("stencil inside axis").0,
                    w,
                )
            })
            .collect()
    }

    pub fn d2_entries(&self, node: usize, axis: usize) -> Vec<(usize, f64)> {
        let k = self.index_along(node, axis);
        self.axes[axis]
            .d2_taps(k)
            .iter()
            .map(|(off, w)| {
                (
                    self.step(node, axis, off).expect("stencil inside axis").0,
                    w,
                )
            })
            .collect()
    }

    pub fn d11_entries(&self, node: usize, a: usize, b: usize) -> Vec<(usize, f64)> {
        if a == b {
            return self.d2_entries(node, a);
        }
        let ka = self.index_along(node, a);
        let mut out = Vec::with_capacity(9);
        for (oa, wa) in self.axes[a].d1_taps(ka).iter() {
            let (na, _) = self.step(node, a, oa).expect("stencil inside axis");
            let kb = self.index_along(na, b);
            for (ob, wb) in self.axes[b].d1_taps(kb).iter() {
                let (nb, _) = self.step(na, b, ob).expect("stencil inside axis");
                out.push((nb, wa * wb));
            }
        }
        out
    }

    /// Map a node of `self` onto `coarse`, whose axes must be a subset of ours.
    pub fn projector(&self, coarse: &Grid) -> Result<Projector> {
        let mut map = Vec::with_capacity(coarse.axes.len());
        for ca in &coarse.axes {
            let fi = self.axis_index(&ca.name).ok_or_else(|| {
                Error::Mismatch(format!("axis '{}' missing from field grid", ca.name))
            })?;
            if self.axes[fi] != *ca {
                return Err(Error::Mismatch(format!(
                    "axis '{}' differs between grids",
                    ca.name
                )));
            }
            map.push(fi);
        }
        Ok(Projector {
            fine: self.clone(),
            map,
            coarse_strides: coarse.strides.clone(),
        })
    }
}

/// Node map from a fine grid to a grid over a subset of its axes.
#[derive(Clone, Debug)]
pub struct Projector {
    fine: Grid,
    map: Vec<usize>,
    coarse_strides: Vec<usize>,
}

impl Projector {
    pub fn project(&self, node: usize) -> usize {
        self.map
            .iter()
            .zip(&self.coarse_strides)
            .map(|(&fa, s)| self.fine.index_along(node, fa) * s)
            .sum()
    }
}

/// A coordinate of a chart. Coordinates with a period that are not resolved
/// on a grid are symmetry directions: nothing depends on them.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    pub name: String,
    pub period: Option<f64>,
}

impl Coordinate {
    pub fn new(name: impl Into<String>, period: Option<f64>) -> Self {
        Coordinate {
            name: name.into(),
            period,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    coords: Vec<Coordinate>,
}

impl Chart {
    pub fn new(coords: Vec<Coordinate>) -> Self {
        Chart { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }

    pub fn with(&self, c: Coordinate) -> Chart {
        let mut coords = self.coords.clone();
        coords.push(c);
        Chart { coords }
    }

    pub fn without(&self, name: &str) -> Chart {
        Chart {
            coords: self
                .coords
                .iter()
                .filter(|c| c.name != name)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|n| f(&grid.coords(n))).collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn d1(&self, node: usize, axis: usize) -> f64 {
        self.grid.d1(&self.values, node, axis, Parity::Even)
    }

    pub fn d2(&self, node: usize, axis: usize) -> f64 {
        self.grid.d2(&self.values, node, axis, Parity::Even)
    }

    pub fn d11(&self, node: usize, a: usize, b: usize) -> f64 {
        self.grid.d11(&self.values, node, a, b, Parity::Even)
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Restriction to the nodes where `axis` has index `k`.
    pub fn slice(&self, axis: &str, k: usize) -> Result<ScalarField> {
        let a = self
            .grid
            .axis_index(axis)
            .ok_or_else(|| Error::Mismatch(format!("no axis '{axis}'")))?;
        let grid = self.grid.without_axis(axis);
        let values = (0..self.grid.len())
            .filter(|&n| self.grid.index_along(n, a) == k)
            .map(|n| self.values[n])
            .collect();
        ScalarField::new(grid, values)
    }

    /// One row per node: coordinates, then the value.
    pub fn to_csv(&self, value_name: &str) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.grid.axes().iter().map(|a| a.name.as_str()).collect();
        let _ = writeln!(out, "{},{}", header.join(","), value_name);
        for n in 0..self.grid.len() {
            for c in self.grid.coords(n) {
                let _ = write!(out, "{c:.12e},");
            }
            let _ = writeln!(out, "{:.12e}", self.values[n]);
        }
        out
    }
}

/// Per-node vector with components along the coordinates of a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * dim {
            return Err(Error::Mismatch("vector field length".into()));
        }
        Ok(VectorField { grid, dim, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: (0..self.grid.len()).map(|n| self.at(n)[c]).collect(),
        }
    }

    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.grid.axes().iter().map(|a| a.name.as_str()).collect();
        let _ = writeln!(out, "{},{}", header.join(","), names.join(","));
        for n in 0..self.grid.len() {
            let row: Vec<String> = self
                .grid
                .coords(n)
                .into_iter()
                .chain(self.at(n).iter().copied())
                .map(|v| format!("{v:.12e}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub backend: Backend,
    pub dim_x: usize,
    pub resolution: Vec<usize>,
    pub t_nodes: usize,
}

/// The grids and charts of `X`, `Y = X x S^1`, `W = X x [-1,1]` and `M = W x S^1`.
#[derive(Clone, Debug)]
pub struct DiscreteDomain {
    spec: DomainSpec,
    x_grid: Grid,
    w_grid: Grid,
    x_chart: Chart,
}

pub fn build_domain(spec: &DomainSpec) -> Result<DiscreteDomain> {
    if spec.dim_x < 2 {
        return Err(Error::Domain(format!(
            "dim_x = {} but dim X >= 2 is required",
            spec.dim_x
        )));
    }
    if spec.t_nodes < 5 || spec.t_nodes % 2 == 0 {
        return Err(Error::Domain(format!(
            "t_nodes = {} must be odd and at least 5",
            spec.t_nodes
        )));
    }
    if spec.resolution.iter().any(|&r| r < 3) {
        return Err(Error::Domain("every resolution must be at least 3".into()));
    }
    let (axes, coords) = match spec.backend {
        Backend::Torus => {
            if spec.resolution.len() != spec.dim_x {
                return Err(Error::Domain(format!(
                    "torus needs {} resolutions, got {}",
                    spec.dim_x,
                    spec.resolution.len()
                )));
            }
            let axes: Vec<Axis> = spec
                .resolution
                .iter()
                .enumerate()
                .map(|(i, &n)| Axis::periodic(torus_coord(i), n, 2.0 * PI))
                .collect();
            let coords = (0..spec.dim_x)
                .map(|i| Coordinate::new(torus_coord(i), Some(2.0 * PI)))
                .collect();
            (axes, coords)
        }
        Backend::SphereAxisym => {
            if spec.dim_x != 2 || spec.resolution.len() != 1 {
                return Err(Error::Domain(
                    "sphere-axisym needs dim_x = 2 and one colatitude resolution".into(),
                ));
            }
            let axes = vec![Axis::polar(COORD_RHO, spec.resolution[0])];
            let coords = vec![
                Coordinate::new(COORD_RHO, None),
                Coordinate::new(COORD_PSI, Some(2.0 * PI)),
            ];
            (axes, coords)
        }
    };
    let x_grid = Grid::new(axes);
    let w_grid = x_grid.with_axis(Axis::closed(COORD_T, spec.t_nodes, -1.0, 1.0));
    Ok(DiscreteDomain {
        spec: spec.clone(),
        x_grid,
        w_grid,
        x_chart: Chart::new(coords),
    })
}

impl DiscreteDomain {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn backend(&self) -> Backend {
        self.spec.backend
    }

    /// Dimension `n` of `Y = X x S^1`.
    pub fn n(&self) -> usize {
        self.spec.dim_x + 1
    }

    pub fn x_grid(&self) -> &Grid {
        &self.x_grid
    }

    pub fn w_grid(&self) -> &Grid {
        &self.w_grid
    }

    pub fn t_axis(&self) -> &Axis {
        self.w_grid.axes().last().expect("t axis")
    }

    pub fn t_index(&self) -> usize {
        self.w_grid.axes().len() - 1
    }

    pub fn t_spacing(&self) -> f64 {
        self.t_axis().spacing()
    }

    /// Index of the `t = 0` node.
    pub fn t_mid(&self) -> usize {
        self.spec.t_nodes / 2
    }

    pub fn x_chart(&self) -> &Chart {
        &self.x_chart
    }

    pub fn y_chart(&self) -> Chart {
        self.x_chart
            .with(Coordinate::new(COORD_THETA, Some(2.0 * PI)))
    }

    pub fn w_chart(&self) -> Chart {
        self.x_chart.with(Coordinate::new(COORD_T, None))
    }

    pub fn m_chart(&self) -> Chart {
        self.y_chart().with(Coordinate::new(COORD_T, None))
    }

    pub fn is_t_boundary(&self, w_node: usize) -> bool {
        let k = self.w_grid.index_along(w_node, self.t_index());
        k == 0 || k + 1 == self.spec.t_nodes
    }

    /// `W` node above an `X` node at t-index `k`.
    pub fn w_node(&self, x_node: usize, k: usize) -> usize {
        x_node * self.spec.t_nodes + k
    }
}

/// `(sum |f|^p sqrt(det g) dV)^(1/p)` over the grid of `f`.
///
/// Chart coordinates that `f` does not resolve must be periodic symmetry
/// directions; they contribute their period to the volume.
pub fn lp_norm(f: &ScalarField, metric: &MetricField, p: u32) -> Result<f64> {
    if p < 1 {
        return Err(Error::Mismatch("p must be at least 1".into()));
    }
    let vol = volume_weights(f.grid(), metric)?;
    let pf = p as f64;
    let sum: f64 = f
        .values()
        .iter()
        .zip(&vol)
        .map(|(v, w)| v.abs().powf(pf) * w)
        .sum();
    Ok(sum.powf(1.0 / pf))
}

/// Metric volume of each node of `grid`: `sqrt(det g)` times the cell volume
/// times the periods of unresolved coordinates.
pub fn volume_weights(grid: &Grid, metric: &MetricField) -> Result<Vec<f64>> {
    let proj = grid.projector(metric.grid())?;
    let mut extra = 1.0;
    for c in metric.chart().coords() {
        if grid.axis_index(&c.name).is_none() {
            extra *= c.period.ok_or_else(|| {
                Error::Mismatch(format!(
                    "coordinate '{}' is neither resolved nor periodic",
                    c.name
                ))
            })?;
        }
    }
    for a in grid.axes() {
        if metric.chart().index_of(&a.name).is_none() {
            return Err(Error::Mismatch(format!(
                "axis '{}' is not a chart coordinate",
                a.name
            )));
        }
    }
    Ok((0..grid.len())
        .map(|n| metric.jet(proj.project(n)).det().sqrt() * grid.cell_volume(n) * extra)
        .collect())
}

/// Discrete `C^1` norm: `sup|f|` plus the largest coordinate difference quotient.
pub fn c1_norm(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let mut grad = 0.0f64;
    for a in 0..grid.axes().len() {
        for n in 0..grid.len() {
            grad = grad.max(f.d1(n, a).abs());
        }
    }
    f.sup_abs() + grad
}
