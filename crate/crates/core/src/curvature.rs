//! Christoffel symbols, Ricci and scalar curvature, hypersurface data, and
//! the covariant derivatives of scalar fields needed by the pipeline.
//!
//! Conventions: `Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`,
//! `R_ij = d_k Gamma^k_ij - d_j Gamma^k_ik + Gamma^k_kl Gamma^l_ij - Gamma^k_jl Gamma^l_ik`
//! and `Delta u = g^ab (d_a d_b u - Gamma^k_ab d_k u)`, so `-Delta` is nonnegative.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Chart, Grid, Projector, ScalarField, VectorField};
use crate::metric::{Jet, MetricField};

/// Inverse metric, Christoffel symbols and their first derivatives at a point.
#[derive(Clone, Debug)]
pub struct Geometry {
    dim: usize,
    ginv: Vec<f64>,
    gamma: Vec<f64>,
    dgamma: Vec<f64>,
}

impl Geometry {
    pub fn new(jet: &Jet) -> Result<Self> {
        let d = jet.dim();
        let inv = jet
            .inverse()
            .ok_or_else(|| Error::Numerical("singular metric".into()))?;
        let ginv: Vec<f64> = (0..d * d).map(|k| inv[(k / d, k % d)]).collect();
        let gi = |i: usize, j: usize| ginv[i * d + j];

        // S_mij = d_i g_jm + d_j g_im - d_m g_ij and its derivative along l
        let s = |m: usize, i: usize, j: usize| jet.dg(i, j, m) + jet.dg(j, i, m) - jet.dg(m, i, j);
        let ds = |l: usize, m: usize, i: usize, j: usize| {
            jet.ddg(l, i, j, m) + jet.ddg(l, j, i, m) - jet.ddg(l, m, i, j)
        };
        let mut dginv = vec![0.0; d * d * d];
        for l in 0..d {
            for k in 0..d {
                for m in 0..d {
                    let mut v = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            v -= gi(k, a) * jet.dg(l, a, b) * gi(b, m);
                        }
                    }
                    dginv[(l * d + k) * d + m] = v;
                }
            }
        }
        let mut gamma = vec![0.0; d * d * d];
        let mut dgamma = vec![0.0; d * d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let mut v = 0.0;
                    for m in 0..d {
                        v += 0.5 * gi(k, m) * s(m, i, j);
                    }
                    gamma[(k * d + i) * d + j] = v;
                    gamma[(k * d + j) * d + i] = v;
                    for l in 0..d {
                        let mut dv = 0.0;
                        for m in 0..d {
                            dv += 0.5
                                * (dginv[(l * d + k) * d + m] * s(m, i, j)
                                    + gi(k, m) * ds(l, m, i, j));
                        }
                        dgamma[((l * d + k) * d + i) * d + j] = dv;
                        dgamma[((l * d + k) * d + j) * d + i] = dv;
                    }
                }
            }
        }
        Ok(Geometry {
            dim: d,
            ginv,
            gamma,
            dgamma,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn ginv(&self, i: usize, j: usize) -> f64 {
        self.ginv[i * self.dim + j]
    }

    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.dim + i) * self.dim + j]
    }

    /// `d_l Gamma^k_ij`
    #[inline]
    pub fn dgamma(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.dgamma[((l * d + k) * d + i) * d + j]
    }

    /// Row-major Ricci tensor.
    pub fn ricci(&self) -> Vec<f64> {
        let d = self.dim;
        let mut ric = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let mut v = 0.0;
                for k in 0..d {
                    v += self.dgamma(k, k, i, j) - self.dgamma(j, k, i, k);
                    for l in 0..d {
                        v += self.gamma(k, k, l) * self.gamma(l, i, j)
                            - self.gamma(k, j, l) * self.gamma(l, i, k);
                    }
                }
                ric[i * d + j] = v;
                ric[j * d + i] = v;
            }
        }
        ric
    }

    pub fn trace(&self, t: &[f64]) -> f64 {
        let d = self.dim;
        (0..d * d).map(|k| self.ginv[k] * t[k]).sum()
    }
}

/// Coordinate gradient and Hessian of a scalar at one node, in chart order.
#[derive(Clone, Debug)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

/// Per-node geometry of a metric, used to differentiate scalar fields that
/// live on the metric grid or on a finer grid with extra axes.
#[derive(Clone, Debug)]
pub struct Connection {
    chart: Chart,
    grid: Grid,
    geoms: Vec<Geometry>,
}

impl Connection {
    pub fn new(g: &MetricField) -> Result<Self> {
        let geoms = g
            .jets()
            .par_iter()
            .map(Geometry::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Connection {
            chart: g.chart().clone(),
            grid: g.grid().clone(),
            geoms,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn geometry(&self, node: usize) -> &Geometry {
        &self.geoms[node]
    }

    /// Map from nodes of `u`'s grid to metric nodes, and from chart
    /// coordinates to axes of `u`'s grid.
    pub fn bind(&self, u_grid: &Grid) -> Result<Binding> {
        for a in u_grid.axes() {
            if self.chart.index_of(&a.name).is_none() {
                return Err(Error::Mismatch(format!(
                    "axis '{}' is not a chart coordinate",
                    a.name
                )));
            }
        }
        Ok(Binding {
            proj: u_grid.projector(&self.grid)?,
            axis_of: self
                .chart
                .coords()
                .iter()
                .map(|c| u_grid.axis_index(&c.name))
                .collect(),
        })
    }

    /// Coordinate derivatives of `u` at node `n` of its grid.
    pub fn scalar_jet(&self, b: &Binding, u: &ScalarField, n: usize) -> ScalarJet {
        let d = self.chart.dim();
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for a in 0..d {
            let Some(ax) = b.axis_of[a] else { continue };
            grad[a] = u.d1(n, ax);
            for c in a..d {
                let Some(cx) = b.axis_of[c] else { continue };
                let v = u.d11(n, ax, cx);
                hess[a * d + c] = v;
                hess[c * d + a] = v;
            }
        }
        ScalarJet {
            value: u.values()[n],
            grad,
            hess,
        }
    }

    fn map_nodes(
        &self,
        u: &ScalarField,
        f: impl Fn(&Geometry, usize, &ScalarJet) -> f64 + Sync,
    ) -> Result<ScalarField> {
        let b = self.bind(u.grid())?;
        let values = (0..u.grid().len())
            .into_par_iter()
            .map(|n| {
                let m = b.proj.project(n);
                f(&self.geoms[m], m, &self.scalar_jet(&b, u, n))
            })
            .collect();
        ScalarField::new(u.grid().clone(), values)
    }

    /// `Delta u = g^ab (d_a d_b u - Gamma^k_ab d_k u)`.
    pub fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.map_nodes(u, |geo, _, s| laplacian_at(geo, s))
    }

    /// `|grad u|^2 = g^ab d_a u d_b u`.
    pub fn grad_norm2(&self, u: &ScalarField) -> Result<ScalarField> {
        self.map_nodes(u, |geo, _, s| geo.trace(&outer(&s.grad)))
    }

    /// `X^a d_a u` for a vector field `X` on the metric grid.
    pub fn directional(&self, u: &ScalarField, x: &VectorField) -> Result<ScalarField> {
        self.check_vector(x)?;
        self.map_nodes(u, |_, m, s| dot(x.at(m), &s.grad))
    }

    /// Covariant Hessian `grad^2 u (X, X)`.
    pub fn hessian_along(&self, u: &ScalarField, x: &VectorField) -> Result<ScalarField> {
        self.check_vector(x)?;
        self.map_nodes(u, |geo, m, s| hessian_pair(geo, s, x.at(m), x.at(m)))
    }

    fn check_vector(&self, x: &VectorField) -> Result<()> {
        if x.grid() != &self.grid || x.dim() != self.chart.dim() {
            return Err(Error::Mismatch(
                "vector field does not match the metric".into(),
            ));
        }
        Ok(())
    }
}

/// Node and axis maps produced by [`Connection::bind`].
#[derive(Clone, Debug)]
pub struct Binding {
    pub proj: Projector,
    pub axis_of: Vec<Option<usize>>,
}

pub fn laplacian_at(geo: &Geometry, s: &ScalarJet) -> f64 {
    let d = geo.dim();
    let mut v = 0.0;
    for a in 0..d {
        for b in 0..d {
            let mut cov = s.hess[a * d + b];
            for k in 0..d {
                cov -= geo.gamma(k, a, b) * s.grad[k];
            }
            v += geo.ginv(a, b) * cov;
        }
    }
    v
}

pub fn hessian_pair(geo: &Geometry, s: &ScalarJet, x: &[f64], y: &[f64]) -> f64 {
    let d = geo.dim();
    let mut v = 0.0;
    for a in 0..d {
        for b in 0..d {
            let w = x[a] * y[b];
            if w == 0.0 {
                continue;
            }
            let mut cov = s.hess[a * d + b];
            for k in 0..d {
                cov -= geo.gamma(k, a, b) * s.grad[k];
            }
            v += w * cov;
        }
    }
    v
}

fn outer(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d * d).map(|k| v[k / d] * v[k % d]).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ricci tensor and scalar curvature at every node of a metric.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    connection: Connection,
    ricci: Vec<Vec<f64>>,
    scalar: ScalarField,
}

impl CurvatureBundle {
    pub fn new(g: &MetricField) -> Result<Self> {
        let connection = Connection::new(g)?;
        let ricci: Vec<Vec<f64>> = connection.geoms.par_iter().map(Geometry::ricci).collect();
        let scalar = ricci
            .iter()
            .zip(&connection.geoms)
            .map(|(r, geo)| geo.trace(r))
            .collect();
        let scalar = ScalarField::new(g.grid().clone(), scalar)?;
        Ok(CurvatureBundle {
            connection,
            ricci,
            scalar,
        })
    }

    pub fn connection(&self) -> &Connection {
        &self.connection
    }

    pub fn scalar(&self) -> &ScalarField {
        &self.scalar
    }

    pub fn ricci(&self, node: usize) -> &[f64] {
        &self.ricci[node]
    }

    /// `Ric(X, Y)` at a node.
    pub fn ricci_pair(&self, node: usize, x: &[f64], y: &[f64]) -> f64 {
        let d = x.len();
        let r = &self.ricci[node];
        let mut v = 0.0;
        for i in 0..d {
            for j in 0..d {
                v += x[i] * r[i * d + j] * y[j];
            }
        }
        v
    }

    /// Ricci components as a CSV table (upper triangle).
    pub fn ricci_csv(&self) -> Result<String> {
        let chart = self.connection.chart();
        let d = chart.dim();
        let mut names = vec![];
        let mut vals = vec![];
        for i in 0..d {
            for j in i..d {
                names.push(format!(
                    "ric_{}_{}",
                    chart.coords()[i].name,
                    chart.coords()[j].name
                ));
            }
        }
        for r in &self.ricci {
            for i in 0..d {
                for j in i..d {
                    vals.push(r[i * d + j]);
                }
            }
        }
        let f = VectorField::new(self.scalar.grid().clone(), names.len(), vals)?;
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Ok(f.to_csv(&refs))
    }
}

pub fn scalar_curvature(g: &MetricField) -> Result<ScalarField> {
    Ok(CurvatureBundle::new(g)?.scalar)
}

/// Unit normal `nu^a = g^{as} / sqrt(g^{ss})` of the level sets of the
/// coordinate `coord`, oriented so that `nu^s > 0`.
pub fn level_set_normal(g: &MetricField, coord: &str) -> Result<VectorField> {
    let s = g
        .chart()
        .index_of(coord)
        .ok_or_else(|| Error::Mismatch(format!("no coordinate '{coord}'")))?;
    let d = g.dim();
    let mut vals = Vec::with_capacity(g.grid().len() * d);
    for jet in g.jets() {
        let inv = jet
            .inverse()
            .ok_or_else(|| Error::Numerical("singular metric".into()))?;
        let norm = inv[(s, s)].sqrt();
        vals.extend((0..d).map(|a| inv[(a, s)] / norm));
    }
    VectorField::new(g.grid().clone(), d, vals)
}

/// Extrinsic data of the level sets `{coord = const}` at every node.
#[derive(Clone, Debug)]
pub struct HypersurfaceData {
    /// chart indices of the tangent coordinates
    pub tangent: Vec<usize>,
    /// second fundamental form in tangent coordinates, per node
    pub second_fundamental: Vec<Vec<f64>>,
    pub mean: ScalarField,
    pub a_norm2: ScalarField,
    pub ric_nn: ScalarField,
}

/// Second fundamental form `A(X, Y) = g(grad_X nu, Y)`, mean curvature, `|A|^2`
/// and `Ric(nu, nu)` of `{coord = const}` with unit normal `nu`.
pub fn hypersurface_data(
    bundle: &CurvatureBundle,
    g: &MetricField,
    coord: &str,
    nu: &VectorField,
) -> Result<HypersurfaceData> {
    let s = g
        .chart()
        .index_of(coord)
        .ok_or_else(|| Error::Mismatch(format!("no coordinate '{coord}'")))?;
    let d = g.dim();
    if nu.grid() != g.grid() || nu.dim() != d {
        return Err(Error::Mismatch(
            "normal field does not match the metric".into(),
        ));
    }
    let tangent: Vec<usize> = (0..d).filter(|&i| i != s).collect();
    let m = tangent.len();
    let conn = bundle.connection();

    let rows = (0..g.grid().len())
        .into_par_iter()
        .map(|n| {
            let jet = g.jet(n);
            let v = nu.at(n);
            let unit = jet.inner(v, v);
            if (unit - 1.0).abs() > 1e-8 {
                return Err(Error::BadNormal {
                    node: n,
                    reason: format!("g(nu, nu) = {unit}"),
                });
            }
            let lower: Vec<f64> = (0..d)
                .map(|a| (0..d).map(|b| jet.g(a, b) * v[b]).sum())
                .collect();
            for &i in &tangent {
                if lower[i].abs() > 1e-8 {
                    return Err(Error::BadNormal {
                        node: n,
                        reason: format!("g(nu, d_{}) = {}", g.chart().coords()[i].name, lower[i]),
                    });
                }
            }
            let geo = conn.geometry(n);
            let mut a = vec![0.0; m * m];
            for (p, &i) in tangent.iter().enumerate() {
                for (q, &j) in tangent.iter().enumerate() {
                    a[p * m + q] = -(0..d).map(|k| geo.gamma(k, i, j) * lower[k]).sum::<f64>();
                }
            }
            let gam = jet
                .restrict(&tangent)
                .inverse()
                .ok_or_else(|| Error::Numerical("singular induced metric".into()))?;
            let mut mean = 0.0;
            let mut norm2 = 0.0;
            for p in 0..m {
                for q in 0..m {
                    mean += gam[(p, q)] * a[p * m + q];
                    for r in 0..m {
                        for t in 0..m {
                            norm2 += gam[(p, r)] * gam[(q, t)] * a[p * m + q] * a[r * m + t];
                        }
                    }
                }
            }
            Ok((a, mean, norm2, bundle.ricci_pair(n, v, v)))
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = g.grid().clone();
    let mut second = Vec::with_capacity(rows.len());
    let (mut mean, mut a2, mut ric) = (vec![], vec![], vec![]);
    for (a, h, n2, r) in rows {
        second.push(a);
        mean.push(h);
        a2.push(n2);
        ric.push(r);
    }
    Ok(HypersurfaceData {
        tangent,
        second_fundamental: second,
        mean: ScalarField::new(grid.clone(), mean)?,
        a_norm2: ScalarField::new(grid.clone(), a2)?,
        ric_nn: ScalarField::new(grid, ric)?,
    })
}

/// `R - 2 Ric(nu, nu) + H^2 - |A|^2`, the scalar curvature of a hypersurface.
pub fn gauss_codazzi_scalar(
    r_amb: &ScalarField,
    ric_nn: &ScalarField,
    mean: &ScalarField,
    a_norm2: &ScalarField,
) -> Result<ScalarField> {
    let grid = r_amb.grid();
    if [ric_nn, mean, a_norm2].iter().any(|f| f.grid() != grid) {
        return Err(Error::Mismatch(
            "Gauss-Codazzi inputs live on different grids".into(),
        ));
    }
    let values = (0..grid.len())
        .map(|n| {
            r_amb.values()[n] - 2.0 * ric_nn.values()[n] + mean.values()[n].powi(2)
                - a_norm2.values()[n]
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}
