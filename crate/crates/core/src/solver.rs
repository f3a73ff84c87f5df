//! Assembly and solution of the Dirichlet problem on `W = X x [-1, 1]`:
//!
//! `L u = 4 grad^2 u (V, V) - 4 Delta u + R u = F`, `u = 0` at `t = +-1`,
//!
//! with `grad`, `Delta` taken in `sigma* g = h_X + dt^2` and `R` the scalar
//! curvature of `h` along the slice. Written out in coordinates,
//! `L u = -4 Q^ab d_a d_b u + 4 Q^ab Gamma^k_ab d_k u + R u` with
//! `Q = g^-1 - V V`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::Geometry;
use crate::error::{Error, Result};
use crate::grid::{c1_norm, Chart, DiscreteDomain, ScalarField, VectorField, COORD_T};
use crate::metric::{AnalyticScalar, MetricField, TrigSeries, TrigTerm};
use crate::normal::MARGIN_FLOOR;
use crate::sparse::{self, CsrMatrix, SolverSettings, SolverStats};

/// Below this symbol margin `1 - |V|^2` centred differences are flagged.
pub const ANISOTROPY_WARNING: f64 = 0.05;

#[derive(Clone, Debug)]
struct NodeCoeffs {
    q: Vec<f64>,
    drift: Vec<f64>,
    potential: f64,
}

/// The discrete operator together with its pointwise coefficients.
#[derive(Clone, Debug)]
pub struct OperatorAssembly {
    domain: DiscreteDomain,
    chart: Chart,
    coeffs: Vec<NodeCoeffs>,
    axis_of: Vec<Option<usize>>,
    matrix: CsrMatrix,
    /// `min (1 - |V|^2)` over the nodes
    pub symbol_margin: f64,
    pub warnings: Vec<String>,
}

/// Assemble `L` on the grid of `W`.
///
/// `sigma_g` is `h_X + dt^2` on the grid of `X`, `v` holds the components of
/// `V` along the coordinates of `X`, and `potential` is `R` on the grid of `X`.
pub fn assemble(
    domain: &DiscreteDomain,
    sigma_g: &MetricField,
    v: &VectorField,
    potential: &ScalarField,
) -> Result<OperatorAssembly> {
    let xg = domain.x_grid();
    let d = sigma_g.dim();
    let chart = sigma_g.chart().clone();
    if chart.index_of(COORD_T) != Some(d - 1) {
        return Err(Error::Mismatch(
            "sigma* g must end with the t coordinate".into(),
        ));
    }
    if sigma_g.grid() != xg || v.grid() != xg || potential.grid() != xg {
        return Err(Error::Mismatch(
            "coefficients must live on the grid of X".into(),
        ));
    }
    if v.dim() != d - 1 {
        return Err(Error::Mismatch(format!(
            "V has {} components, expected {}",
            v.dim(),
            d - 1
        )));
    }

    let coeffs = (0..xg.len())
        .into_par_iter()
        .map(|m| {
            let jet = sigma_g.jet(m);
            let geo = Geometry::new(jet)?;
            let mut vv = v.at(m).to_vec();
            vv.push(0.0);
            let mut q = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    q[a * d + b] = geo.ginv(a, b) - vv[a] * vv[b];
                }
            }
            let drift = (0..d)
                .map(|k| {
                    let mut s = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            s += q[a * d + b] * geo.gamma(k, a, b);
                        }
                    }
                    4.0 * s
                })
                .collect();
            Ok((
                NodeCoeffs {
                    q,
                    drift,
                    potential: potential.values()[m],
                },
                1.0 - jet.inner(&vv, &vv),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let symbol_margin = coeffs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    if !(symbol_margin > MARGIN_FLOOR) {
        return Err(Error::NotElliptic {
            margin: symbol_margin,
        });
    }
    let mut warnings = vec![];
    if symbol_margin < ANISOTROPY_WARNING {
        warnings.push(format!(
            "strong anisotropy: min (1 - |V|^2) = {symbol_margin:.3e}; centred differences may lose monotonicity"
        ));
    }
    let coeffs: Vec<NodeCoeffs> = coeffs.into_iter().map(|c| c.0).collect();

    let wg = domain.w_grid();
    let axis_of: Vec<Option<usize>> = chart
        .coords()
        .iter()
        .map(|c| wg.axis_index(&c.name))
        .collect();
    let nt = domain.spec().t_nodes;
    let rows = (0..wg.len())
        .into_par_iter()
        .map(|n| {
            if domain.is_t_boundary(n) {
                return vec![(n, 1.0)];
            }
            let c = &coeffs[n / nt];
            let mut row = Vec::with_capacity(32);
            for a in 0..d {
                let Some(ax) = axis_of[a] else { continue };
                for b in 0..d {
                    let Some(bx) = axis_of[b] else { continue };
                    let w = -4.0 * c.q[a * d + b];
                    if w != 0.0 {
                        row.extend(
                            wg.d11_entries(n, ax, bx)
                                .into_iter()
                                .map(|(j, s)| (j, w * s)),
                        );
                    }
                }
                if c.drift[a] != 0.0 {
                    row.extend(
                        wg.d1_entries(n, ax)
                            .into_iter()
                            .map(|(j, s)| (j, c.drift[a] * s)),
                    );
                }
            }
            row.push((n, c.potential));
            row
        })
        .collect();
    Ok(OperatorAssembly {
        domain: domain.clone(),
        chart,
        coeffs,
        axis_of,
        matrix: CsrMatrix::from_rows(rows),
        symbol_margin,
        warnings,
    })
}

impl OperatorAssembly {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn domain(&self) -> &DiscreteDomain {
        &self.domain
    }

    /// `L u*` from the exact derivatives of `u*` (chart coordinates of `W`),
    /// using the same pointwise coefficients as the matrix.
    pub fn apply_continuous<S: AnalyticScalar + ?Sized>(&self, u: &S) -> ScalarField {
        let wg = self.domain.w_grid();
        let nt = self.domain.spec().t_nodes;
        let d = self.chart.dim();
        let values = (0..wg.len())
            .into_par_iter()
            .map(|n| {
                let coords = wg.coords(n);
                let x: Vec<f64> = self
                    .axis_of
                    .iter()
                    .map(|a| a.map_or(0.0, |a| coords[a]))
                    .collect();
                let c = &self.coeffs[n / nt];
                let hs = u.hess(&x);
                let gr = u.grad(&x);
                let mut v = c.potential * u.value(&x);
                for a in 0..d {
                    v += c.drift[a] * gr[a];
                    for b in 0..d {
                        v -= 4.0 * c.q[a * d + b] * hs[a * d + b];
                    }
                }
                v
            })
            .collect();
        ScalarField::new(wg.clone(), values).expect("grid length")
    }

    /// Discrete `L u` at interior nodes, zero on the boundary.
    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        let mut out = self.matrix.matvec(u.values());
        for (n, v) in out.iter_mut().enumerate() {
            if self.domain.is_t_boundary(n) {
                *v = 0.0;
            }
        }
        ScalarField::new(u.grid().clone(), out).expect("grid length")
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub u: ScalarField,
    pub stats: SolverStats,
    pub residual_inf: f64,
    pub c1: f64,
}

/// Solve `L u = F` with `u = 0` on `t = +-1`.
pub fn solve_dirichlet(
    a: &OperatorAssembly,
    f: &ScalarField,
    settings: &SolverSettings,
) -> Result<SolveReport> {
    let wg = a.domain.w_grid();
    if f.grid() != wg {
        return Err(Error::Mismatch(
            "forcing does not live on the grid of W".into(),
        ));
    }
    let mut rhs = f.values().to_vec();
    for (n, v) in rhs.iter_mut().enumerate() {
        if a.domain.is_t_boundary(n) {
            *v = 0.0;
        }
    }
    let (x, stats) = sparse::solve(&a.matrix, &rhs, settings)?;
    let residual_inf = sparse::inf_norm(&a.matrix.residual(&x, &rhs));
    let u = ScalarField::new(wg.clone(), x)?;
    let c1 = c1_norm(&u);
    Ok(SolveReport {
        u,
        residual_inf,
        stats,
        c1,
    })
}

/// `u* = cos(pi t / 2) cos(x1)` on the torus, `cos(pi t / 2) cos(rho)` on the
/// sphere: smooth, even across the poles and zero at `t = +-1`.
pub fn manufactured_solution(chart: &Chart) -> TrigSeries {
    let t = chart.index_of(COORD_T).expect("t coordinate");
    TrigSeries::new(
        chart.dim(),
        vec![TrigTerm {
            amp: 1.0,
            waves: vec![(0, 1.0, 0.0), (t, std::f64::consts::FRAC_PI_2, 0.0)],
        }],
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmsResult {
    pub error_inf: f64,
    pub residual_inf: f64,
}

/// Solve with `F* = L u*` and measure `||u - u*||_inf`.
pub fn manufactured_error(a: &OperatorAssembly, settings: &SolverSettings) -> Result<MmsResult> {
    let ustar = manufactured_solution(&a.chart);
    let f = a.apply_continuous(&ustar);
    let rep = solve_dirichlet(a, &f, settings)?;
    let wg = a.domain.w_grid();
    let exact = ScalarField::from_fn(wg, |c| {
        let x: Vec<f64> = a
            .axis_of
            .iter()
            .map(|ax| ax.map_or(0.0, |ax| c[ax]))
            .collect();
        ustar.value(&x)
    });
    Ok(MmsResult {
        error_inf: rep.u.max_abs_diff(&exact)?,
        residual_inf: rep.residual_inf,
    })
}

/// `sup |d^2 u / dt^2|` over the interior nodes with `|t| < eps/4`.
pub fn dtt_monitor(u: &ScalarField, domain: &DiscreteDomain, epsilon: f64) -> Result<f64> {
    let ti = domain.t_index();
    let axis = domain.t_axis();
    let inside: Vec<usize> = (1..axis.n - 1)
        .filter(|&k| axis.coord(k).abs() < 0.25 * epsilon)
        .collect();
    if inside.len() < 3 {
        return Err(Error::Numerical(format!(
            "|t| < eps/4 = {} holds {} t-nodes; at least 3 are needed",
            0.25 * epsilon,
            inside.len()
        )));
    }
    let wg = domain.w_grid();
    Ok((0..wg.len())
        .filter(|&n| inside.contains(&wg.index_along(n, ti)))
        .map(|n| u.d2(n, ti).abs())
        .fold(0.0, f64::max))
}
