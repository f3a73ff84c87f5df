//! Metric tensor fields with first and second coordinate derivatives.
//!
//! A [`MetricField`] stores a [`Jet`] (components plus derivatives) at every
//! node of its grid. Jets come either from a closed-form [`AnalyticMetric`]
//! or from finite differences of sampled components.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{AxisKind, Chart, Coordinate, Grid, Parity, ScalarField, COORD_PSI, COORD_T};

/// Smallest eigenvalue accepted as positive definite.
pub const SPD_FLOOR: f64 = 1e-10;

/// Metric components `g_ij`, `d_k g_ij` and `d_k d_l g_ij` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    dim: usize,
    g: Vec<f64>,
    dg: Vec<f64>,
    ddg: Vec<f64>,
}

impl Jet {
    pub fn zeros(dim: usize) -> Self {
        Jet {
            dim,
            g: vec![0.0; dim * dim],
            dg: vec![0.0; dim * dim * dim],
            ddg: vec![0.0; dim * dim * dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut j = Jet::zeros(dim);
        for i in 0..dim {
            j.set_g(i, i, 1.0);
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.dim + j]
    }

    #[inline]
    pub fn dg(&self, k: usize, i: usize, j: usize) -> f64 {
        self.dg[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn ddg(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.ddg[((k * d + l) * d + i) * d + j]
    }

    pub fn set_g(&mut self, i: usize, j: usize, v: f64) {
        let d = self.dim;
        self.g[i * d + j] = v;
        self.g[j * d + i] = v;
    }

    pub fn set_dg(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let d = self.dim;
        self.dg[(k * d + i) * d + j] = v;
        self.dg[(k * d + j) * d + i] = v;
    }

    pub fn set_ddg(&mut self, k: usize, l: usize, i: usize, j: usize, v: f64) {
        let d = self.dim;
        for (a, b) in [(k, l), (l, k)] {
            self.ddg[((a * d + b) * d + i) * d + j] = v;
            self.ddg[((a * d + b) * d + j) * d + i] = v;
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.g)
    }

    pub fn det(&self) -> f64 {
        self.matrix().determinant()
    }

    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        self.matrix().try_inverse()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `h(a, b)` for coordinate vectors `a`, `b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += a[i] * self.g(i, j) * b[j];
            }
        }
        s
    }

    /// Sub-jet on the coordinates `keep` (derivatives along them only).
    pub fn restrict(&self, keep: &[usize]) -> Jet {
        let m = keep.len();
        let mut out = Jet::zeros(m);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                out.g[a * m + b] = self.g(i, j);
                for (c, &k) in keep.iter().enumerate() {
                    out.dg[(c * m + a) * m + b] = self.dg(k, i, j);
                    for (e, &l) in keep.iter().enumerate() {
                        out.ddg[((c * m + e) * m + a) * m + b] = self.ddg(k, l, i, j);
                    }
                }
            }
        }
        out
    }

    /// Append a flat coordinate orthogonal to all others.
    pub fn extend_flat(&self) -> Jet {
        let d = self.dim;
        let keep: Vec<usize> = (0..d).collect();
        let mut out = Jet::zeros(d + 1);
        let m = d + 1;
        for &i in &keep {
            for &j in &keep {
                out.g[i * m + j] = self.g(i, j);
                for &k in &keep {
                    out.dg[(k * m + i) * m + j] = self.dg(k, i, j);
                    for &l in &keep {
                        out.ddg[((k * m + l) * m + i) * m + j] = self.ddg(k, l, i, j);
                    }
                }
            }
        }
        out.set_g(d, d, 1.0);
        out
    }

    /// Jet of `w * g` given the value, gradient and Hessian of `w`.
    pub fn scaled(&self, w: f64, dw: &[f64], ddw: &[f64]) -> Jet {
        let d = self.dim;
        let mut out = Jet::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let g = self.g(i, j);
                out.g[i * d + j] = w * g;
                for k in 0..d {
                    out.dg[(k * d + i) * d + j] = dw[k] * g + w * self.dg(k, i, j);
                    for l in 0..d {
                        out.ddg[((k * d + l) * d + i) * d + j] = ddw[k * d + l] * g
                            + dw[k] * self.dg(l, i, j)
                            + dw[l] * self.dg(k, i, j)
                            + w * self.ddg(k, l, i, j);
                    }
                }
            }
        }
        out
    }
}

/// A metric given in closed form on a chart.
pub trait AnalyticMetric: Sync {
    fn name(&self) -> String;
    fn chart(&self) -> Chart;
    /// Jet at chart coordinates `x`.
    fn jet(&self, x: &[f64]) -> Jet;
}

/// A scalar function given in closed form on a chart.
pub trait AnalyticScalar: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// Row-major Hessian of coordinate second derivatives.
    fn hess(&self, x: &[f64]) -> Vec<f64>;
}

/// One product `amp * prod cos(k x_c + phase)` of a [`TrigSeries`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub amp: f64,
    /// `(coordinate index, wavenumber, phase)`
    pub waves: Vec<(usize, f64, f64)>,
}

/// Sum of products of cosines, used for smooth test functions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigSeries {
    pub dim: usize,
    pub terms: Vec<TrigTerm>,
}

impl TrigSeries {
    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Self {
        TrigSeries { dim, terms }
    }

    /// Same function with every amplitude multiplied by `s`.
    pub fn scale(&self, s: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| TrigTerm {
                amp: t.amp * s,
                waves: t.waves.clone(),
            })
            .collect();
        TrigSeries {
            dim: self.dim,
            terms,
        }
    }

    // value, first and second derivative of each factor
    fn factors(t: &TrigTerm, x: &[f64]) -> Vec<(usize, f64, f64, f64)> {
        t.waves
            .iter()
            .map(|&(c, k, ph)| {
                let a = k * x[c] + ph;
                (c, a.cos(), -k * a.sin(), -k * k * a.cos())
            })
            .collect()
    }
}

impl AnalyticScalar for TrigSeries {
    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amp * Self::factors(t, x).iter().map(|f| f.1).product::<f64>())
            .sum()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for t in &self.terms {
            let f = Self::factors(t, x);
            for i in 0..f.len() {
                let mut p = t.amp * f[i].2;
                for (j, fj) in f.iter().enumerate() {
                    if j != i {
                        p *= fj.1;
                    }
                }
                g[f[i].0] += p;
            }
        }
        g
    }

    fn hess(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        for t in &self.terms {
            let f = Self::factors(t, x);
            for i in 0..f.len() {
                for j in 0..f.len() {
                    let mut p = t.amp;
                    for (m, fm) in f.iter().enumerate() {
                        p *= if m == i && m == j {
                            fm.3
                        } else if m == i || m == j {
                            fm.2
                        } else {
                            fm.1
                        };
                    }
                    h[f[i].0 * d + f[j].0] += p;
                }
            }
        }
        h
    }
}

/// `e^{2 psi} g` for an analytic metric `g` and scalar `psi`.
pub struct Conformal<'a, M: AnalyticMetric + ?Sized, S: AnalyticScalar + ?Sized> {
    pub base: &'a M,
    pub psi: &'a S,
}

impl<M: AnalyticMetric + ?Sized, S: AnalyticScalar + ?Sized> AnalyticMetric
    for Conformal<'_, M, S>
{
    fn name(&self) -> String {
        format!("conformal({})", self.base.name())
    }

    fn chart(&self) -> Chart {
        self.base.chart()
    }

    fn jet(&self, x: &[f64]) -> Jet {
        let d = x.len();
        let psi = self.psi.value(x);
        let dpsi = self.psi.grad(x);
        let ddpsi = self.psi.hess(x);
        let w = (2.0 * psi).exp();
        let dw: Vec<f64> = dpsi.iter().map(|v| 2.0 * w * v).collect();
        let mut ddw = vec![0.0; d * d];
        for k in 0..d {
            for l in 0..d {
                ddw[k * d + l] = w * (4.0 * dpsi[k] * dpsi[l] + 2.0 * ddpsi[k * d + l]);
            }
        }
        self.base.jet(x).scaled(w, &dw, &ddw)
    }
}

pub mod builtin {
    //! Named closed-form metrics on `X x S^1`.

    use std::f64::consts::PI;

    use super::{AnalyticMetric, Jet};
    use crate::grid::{torus_coord, Chart, Coordinate, COORD_PSI, COORD_RHO, COORD_THETA};

    fn torus_chart(dim_x: usize) -> Chart {
        let mut c: Vec<Coordinate> = (0..dim_x)
            .map(|i| Coordinate::new(torus_coord(i), Some(2.0 * PI)))
            .collect();
        c.push(Coordinate::new(COORD_THETA, Some(2.0 * PI)));
        Chart::new(c)
    }

    fn sphere_chart() -> Chart {
        Chart::new(vec![
            Coordinate::new(COORD_RHO, None),
            Coordinate::new(COORD_PSI, Some(2.0 * PI)),
            Coordinate::new(COORD_THETA, Some(2.0 * PI)),
        ])
    }

    /// Flat `T^{dim_x} x S^1`.
    #[derive(Clone, Copy, Debug)]
    pub struct ProductFlat {
        pub dim_x: usize,
    }

    impl ProductFlat {
        pub fn new(dim_x: usize) -> Self {
            ProductFlat { dim_x }
        }
    }

    impl AnalyticMetric for ProductFlat {
        fn name(&self) -> String {
            format!("product_flat{{n={}}}", self.dim_x + 1)
        }
        fn chart(&self) -> Chart {
            torus_chart(self.dim_x)
        }
        fn jet(&self, _x: &[f64]) -> Jet {
            Jet::identity(self.dim_x + 1)
        }
    }

    /// Flat metric `dx^2 + (d theta + c dx1)^2` on `T^{dim_x} x S^1`.
    ///
    /// The unit normal of `{theta = const}` makes angle `atan(c)` with `d/d theta`.
    #[derive(Clone, Copy, Debug)]
    pub struct TwistedFlat {
        pub dim_x: usize,
        pub c: f64,
    }

    impl TwistedFlat {
        pub fn new(dim_x: usize, c: f64) -> Self {
            TwistedFlat { dim_x, c }
        }
    }

    impl AnalyticMetric for TwistedFlat {
        fn name(&self) -> String {
            format!("twisted_flat{{c={}}}", self.c)
        }
        fn chart(&self) -> Chart {
            torus_chart(self.dim_x)
        }
        fn jet(&self, _x: &[f64]) -> Jet {
            let th = self.dim_x;
            let mut j = Jet::identity(th + 1);
            j.set_g(0, 0, 1.0 + self.c * self.c);
            j.set_g(0, th, self.c);
            j
        }
    }

    /// Round `S^2(r) x S^1` in coordinates `(rho, psi, theta)`.
    #[derive(Clone, Copy, Debug)]
    pub struct SphereProduct {
        pub r: f64,
    }

    impl SphereProduct {
        pub fn new(r: f64) -> Self {
            SphereProduct { r }
        }
    }

    impl AnalyticMetric for SphereProduct {
        fn name(&self) -> String {
            format!("sphere_product{{r={}}}", self.r)
        }
        fn chart(&self) -> Chart {
            sphere_chart()
        }
        fn jet(&self, x: &[f64]) -> Jet {
            let r2 = self.r * self.r;
            let rho = x[0];
            let mut j = Jet::zeros(3);
            j.set_g(0, 0, r2);
            j.set_g(1, 1, r2 * rho.sin().powi(2));
            j.set_g(2, 2, 1.0);
            j.set_dg(0, 1, 1, r2 * (2.0 * rho).sin());
            j.set_ddg(0, 0, 1, 1, 2.0 * r2 * (2.0 * rho).cos());
            j
        }
    }

    /// `r^2 (d rho^2 + sin^2 rho d psi^2) + (d theta + beta d psi)^2` with
    /// `beta = beta0 sin^2 rho`: a circle bundle whose slices are tilted
    /// against the fibre by `|V|^2 = beta0^2 sin^2 rho / r^2`.
    #[derive(Clone, Copy, Debug)]
    pub struct SphereTwist {
        pub r: f64,
        pub beta0: f64,
    }

    impl SphereTwist {
        pub fn new(r: f64, beta0: f64) -> Self {
            SphereTwist { r, beta0 }
        }

        /// Closed-form scalar curvature `2/r^2 - 2 beta0^2 cos^2 rho / r^4`.
        pub fn scalar_curvature(&self, rho: f64) -> f64 {
            let r2 = self.r * self.r;
            2.0 / r2 - 2.0 * self.beta0 * self.beta0 * rho.cos().powi(2) / (r2 * r2)
        }
    }

    impl AnalyticMetric for SphereTwist {
        fn name(&self) -> String {
            format!("sphere_twist{{r={},beta={}}}", self.r, self.beta0)
        }
        fn chart(&self) -> Chart {
            sphere_chart()
        }
        fn jet(&self, x: &[f64]) -> Jet {
            let r2 = self.r * self.r;
            let rho = x[0];
            let (s2, c2) = ((2.0 * rho).sin(), (2.0 * rho).cos());
            let b = self.beta0 * rho.sin().powi(2);
            let db = self.beta0 * s2;
            let ddb = 2.0 * self.beta0 * c2;
            let mut j = Jet::zeros(3);
            j.set_g(0, 0, r2);
            j.set_g(1, 1, r2 * rho.sin().powi(2) + b * b);
            j.set_g(1, 2, b);
            j.set_g(2, 2, 1.0);
            j.set_dg(0, 1, 1, r2 * s2 + 2.0 * b * db);
            j.set_dg(0, 1, 2, db);
            j.set_ddg(0, 0, 1, 1, 2.0 * r2 * c2 + 2.0 * db * db + 2.0 * b * ddb);
            j.set_ddg(0, 0, 1, 2, ddb);
            j
        }
    }
}

/// Metric jets at every node of a grid.
#[derive(Clone, Debug)]
pub struct MetricField {
    name: String,
    chart: Chart,
    grid: Grid,
    jets: Vec<Jet>,
}

fn chart_point(chart: &Chart, grid: &Grid, node: usize, unresolved: f64) -> Vec<f64> {
    let coords = grid.coords(node);
    chart
        .coords()
        .iter()
        .map(|c| grid.axis_index(&c.name).map_or(unresolved, |a| coords[a]))
        .collect()
}

impl MetricField {
    /// Build from jets, checking shape and positive definiteness.
    pub fn from_jets(
        name: impl Into<String>,
        chart: Chart,
        grid: Grid,
        jets: Vec<Jet>,
    ) -> Result<Self> {
        if jets.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} jets for a grid of {} nodes",
                jets.len(),
                grid.len()
            )));
        }
        for a in grid.axes() {
            if chart.index_of(&a.name).is_none() {
                return Err(Error::Mismatch(format!(
                    "grid axis '{}' is not a chart coordinate",
                    a.name
                )));
            }
        }
        if let Some(j) = jets.iter().find(|j| j.dim() != chart.dim()) {
            return Err(Error::Mismatch(format!(
                "jet of dimension {} on a {}-dimensional chart",
                j.dim(),
                chart.dim()
            )));
        }
        let bad = jets
            .par_iter()
            .enumerate()
            .map(|(n, j)| (n, j.min_eigenvalue()))
            .find_first(|(_, ev)| !(*ev > SPD_FLOOR));
        if let Some((node, min_eigenvalue)) = bad {
            return Err(Error::NotPositiveDefinite {
                node,
                min_eigenvalue,
            });
        }
        Ok(MetricField {
            name: name.into(),
            chart,
            grid,
            jets,
        })
    }

    /// Closed-form jets at the nodes of `grid`; chart coordinates the grid
    /// does not resolve are evaluated at `unresolved`.
    pub fn from_analytic<M: AnalyticMetric + ?Sized>(
        m: &M,
        grid: &Grid,
        unresolved: f64,
    ) -> Result<Self> {
        let chart = m.chart();
        let jets = (0..grid.len())
            .into_par_iter()
            .map(|n| m.jet(&chart_point(&chart, grid, n, unresolved)))
            .collect();
        Self::from_jets(m.name(), chart, grid.clone(), jets)
    }

    /// Components of `m` sampled at the nodes, derivatives by finite differences.
    pub fn sampled<M: AnalyticMetric + ?Sized>(
        m: &M,
        grid: &Grid,
        unresolved: f64,
    ) -> Result<Self> {
        let chart = m.chart();
        let d = chart.dim();
        let mut comps = vec![Vec::with_capacity(grid.len()); d * (d + 1) / 2];
        for n in 0..grid.len() {
            let j = m.jet(&chart_point(&chart, grid, n, unresolved));
            let mut c = 0;
            for i in 0..d {
                for k in i..d {
                    comps[c].push(j.g(i, k));
                    c += 1;
                }
            }
        }
        Self::from_components(format!("sampled({})", m.name()), chart, grid, &comps)
    }

    /// Metric from component tables, upper triangle in row-major order
    /// (`g_00, g_01, .., g_11, ..`), one value per grid node.
    ///
    /// On a polar axis the longitudinal component is differentiated through
    /// its square root, which is odd across the poles; components coupling
    /// the polar coordinate to others must vanish.
    pub fn from_components(
        name: impl Into<String>,
        chart: Chart,
        grid: &Grid,
        comps: &[Vec<f64>],
    ) -> Result<Self> {
        let d = chart.dim();
        if comps.len() != d * (d + 1) / 2 || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Mismatch(format!(
                "expected {} component tables of {} values",
                d * (d + 1) / 2,
                grid.len()
            )));
        }
        let polar = grid.axes().iter().position(|a| a.kind == AxisKind::Polar);
        let polar_coord = polar.and_then(|a| chart.index_of(&grid.axis(a).name));
        let psi = chart.index_of(COORD_PSI);
        // chart coordinate -> grid axis
        let axis_of: Vec<Option<usize>> = chart
            .coords()
            .iter()
            .map(|c| grid.axis_index(&c.name))
            .collect();

        let mut jets = vec![Jet::zeros(d); grid.len()];
        let mut c = 0;
        for i in 0..d {
            for k in i..d {
                let vals = &comps[c];
                c += 1;
                let couples_polar = polar_coord.is_some_and(|p| (i == p) != (k == p));
                if couples_polar {
                    if vals.iter().any(|v| v.abs() > 1e-14) {
                        return Err(Error::Domain(format!(
                            "component g_{}{} must vanish on an axisymmetric grid",
                            chart.coords()[i].name,
                            chart.coords()[k].name
                        )));
                    }
                    continue;
                }
                let areal = polar.is_some() && psi == Some(i) && psi == Some(k);
                let (f, parity) = if areal {
                    (
                        vals.iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>(),
                        Parity::Odd,
                    )
                } else {
                    (vals.clone(), Parity::Even)
                };
                let per_node: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..grid.len())
                    .into_par_iter()
                    .map(|n| {
                        let mut df = vec![0.0; d];
                        let mut ddf = vec![0.0; d * d];
                        for a in 0..d {
                            let Some(ax) = axis_of[a] else { continue };
                            df[a] = grid.d1(&f, n, ax, parity);
                            for b in a..d {
                                let Some(bx) = axis_of[b] else { continue };
                                let v = grid.d11(&f, n, ax, bx, parity);
                                ddf[a * d + b] = v;
                                ddf[b * d + a] = v;
                            }
                        }
                        (f[n], df, ddf)
                    })
                    .collect();
                for (n, (s, ds, dds)) in per_node.into_iter().enumerate() {
                    let jet = &mut jets[n];
                    jet.set_g(i, k, vals[n]);
                    for a in 0..d {
                        let dv = if areal { 2.0 * s * ds[a] } else { ds[a] };
                        jet.set_dg(a, i, k, dv);
                        for b in a..d {
                            let ddv = if areal {
                                2.0 * (ds[a] * ds[b] + s * dds[a * d + b])
                            } else {
                                dds[a * d + b]
                            };
                            jet.set_ddg(a, b, i, k, ddv);
                        }
                    }
                }
            }
        }
        Self::from_jets(name, chart, grid.clone(), jets)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn jet(&self, node: usize) -> &Jet {
        &self.jets[node]
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    /// Induced metric on the coordinates named in `keep` (in that order).
    pub fn restrict(&self, keep: &[&str]) -> Result<MetricField> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|k| {
                self.chart
                    .index_of(k)
                    .ok_or_else(|| Error::Mismatch(format!("no coordinate '{k}'")))
            })
            .collect::<Result<_>>()?;
        let chart = Chart::new(
            idx.iter()
                .map(|&i| self.chart.coords()[i].clone())
                .collect(),
        );
        let jets = self.jets.par_iter().map(|j| j.restrict(&idx)).collect();
        Self::from_jets(self.name.clone(), chart, self.grid.clone(), jets)
    }

    /// Jets at the nodes where grid axis `axis` has index `k`.
    pub fn slice(&self, axis: &str, k: usize) -> Result<MetricField> {
        let a = self
            .grid
            .axis_index(axis)
            .ok_or_else(|| Error::Mismatch(format!("no axis '{axis}'")))?;
        let grid = self.grid.without_axis(axis);
        let jets = (0..self.grid.len())
            .filter(|&n| self.grid.index_along(n, a) == k)
            .map(|n| self.jets[n].clone())
            .collect();
        Self::from_jets(self.name.clone(), self.chart.clone(), grid, jets)
    }

    /// `w * g` for a positive scalar `w` on the grid of this metric;
    /// derivatives of `w` by finite differences.
    pub fn scaled(&self, w: &ScalarField) -> Result<MetricField> {
        if w.grid() != &self.grid {
            return Err(Error::Mismatch(
                "scale factor lives on a different grid".into(),
            ));
        }
        let d = self.dim();
        let axis_of: Vec<Option<usize>> = self
            .chart
            .coords()
            .iter()
            .map(|c| self.grid.axis_index(&c.name))
            .collect();
        let jets = (0..self.grid.len())
            .into_par_iter()
            .map(|n| {
                let mut dw = vec![0.0; d];
                let mut ddw = vec![0.0; d * d];
                for a in 0..d {
                    let Some(ax) = axis_of[a] else { continue };
                    dw[a] = w.d1(n, ax);
                    for b in 0..d {
                        let Some(bx) = axis_of[b] else { continue };
                        ddw[a * d + b] = w.d11(n, ax, bx);
                    }
                }
                self.jets[n].scaled(w.values()[n], &dw, &ddw)
            })
            .collect();
        Self::from_jets(
            format!("scaled({})", self.name),
            self.chart.clone(),
            self.grid.clone(),
            jets,
        )
    }
}

/// `g = h + dt^2`: appends the coordinate `t` with `g_tt = 1`. The grid is
/// unchanged because nothing depends on `t`.
pub fn product_extend(h: &MetricField) -> MetricField {
    let chart = h.chart.with(Coordinate::new(COORD_T, None));
    let jets = h.jets.par_iter().map(Jet::extend_flat).collect();
    MetricField {
        name: format!("{}+dt^2", h.name),
        chart,
        grid: h.grid.clone(),
        jets,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::builtin::*;
    use super::*;
    use crate::grid::{Axis, COORD_RHO, COORD_THETA};

    fn torus3(n: usize) -> Grid {
        Grid::new(vec![
            Axis::periodic("x1", n, 2.0 * PI),
            Axis::periodic("x2", n, 2.0 * PI),
            Axis::periodic(COORD_THETA, n, 2.0 * PI),
        ])
    }

    fn jet_err(a: &MetricField, b: &MetricField) -> f64 {
        let d = a.dim();
        let mut e = 0.0f64;
        for n in 0..a.grid().len() {
            let (ja, jb) = (a.jet(n), b.jet(n));
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        e = e.max((ja.dg(k, i, j) - jb.dg(k, i, j)).abs());
                        for l in 0..d {
                            e = e.max((ja.ddg(k, l, i, j) - jb.ddg(k, l, i, j)).abs());
                        }
                    }
                }
            }
        }
        e
    }

    #[test]
    fn twisted_flat_components() {
        let j = TwistedFlat::new(2, 0.5).jet(&[0.0, 0.0, 0.0]);
        assert_eq!(j.g(0, 0), 1.25);
        assert_eq!(j.g(2, 0), 0.5);
        assert_eq!(j.g(1, 1), 1.0);
        assert!((j.det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_metric() {
        let g = Grid::new(vec![Axis::periodic("x1", 4, 1.0)]);
        let chart = Chart::new(vec![Coordinate::new("x1", Some(1.0))]);
        let err = MetricField::from_components("bad", chart, &g, &[vec![0.0; 4]]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn sphere_derivatives_converge_at_second_order() {
        let m = SphereTwist::new(1.0, 0.5);
        let mut errs = vec![];
        for n in [32, 64] {
            let g = Grid::new(vec![Axis::polar(COORD_RHO, n)]);
            let exact = MetricField::from_analytic(&m, &g, 0.0).unwrap();
            let fd = MetricField::sampled(&m, &g, 0.0).unwrap();
            errs.push(jet_err(&exact, &fd));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "order {order}, errors {errs:?}");
    }

    #[test]
    fn conformal_torus_derivatives_converge_at_second_order() {
        let psi = TrigSeries::new(
            3,
            vec![TrigTerm {
                amp: 0.2,
                waves: vec![(0, 1.0, 0.3), (2, 1.0, -0.2)],
            }],
        );
        let base = TwistedFlat::new(2, 0.5);
        let m = Conformal {
            base: &base,
            psi: &psi,
        };
        let mut errs = vec![];
        for n in [16, 32] {
            let g = torus3(n);
            errs.push(jet_err(
                &MetricField::from_analytic(&m, &g, 0.0).unwrap(),
                &MetricField::sampled(&m, &g, 0.0).unwrap(),
            ));
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "order {order}, errors {errs:?}");
    }

    #[test]
    fn trig_series_derivatives_match_differences() {
        let f = TrigSeries::new(
            2,
            vec![
                TrigTerm {
                    amp: 0.7,
                    waves: vec![(0, 2.0, 0.1), (1, 1.0, 0.4)],
                },
                TrigTerm {
                    amp: -0.3,
                    waves: vec![(1, 3.0, 1.0)],
                },
            ],
        );
        let x = [0.37, -1.2];
        let h = 1e-4;
        let g = f.grad(&x);
        let hs = f.hess(&x);
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            assert!((g[a] - (f.value(&xp) - f.value(&xm)) / (2.0 * h)).abs() < 1e-6);
            let gp = f.grad(&xp);
            let gm = f.grad(&xm);
            for b in 0..2 {
                assert!((hs[a * 2 + b] - (gp[b] - gm[b]) / (2.0 * h)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn restrict_slice_and_extend() {
        let g = torus3(4);
        let m = MetricField::from_analytic(&TwistedFlat::new(2, 0.5), &g, 0.0).unwrap();
        let s = m.slice(COORD_THETA, 1).unwrap();
        assert_eq!(s.grid().len(), 16);
        let hx = s.restrict(&["x1", "x2"]).unwrap();
        assert_eq!(hx.jet(3).g(0, 0), 1.25);
        let w = product_extend(&hx);
        assert_eq!(w.dim(), 3);
        assert_eq!(w.jet(0).g(2, 2), 1.0);
        assert!((w.jet(0).det() - hx.jet(0).det()).abs() < 1e-15);
    }
}
