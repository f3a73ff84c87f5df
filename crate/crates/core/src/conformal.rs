//! Conformal lift of the Dirichlet solution and the scalar-curvature
//! certificate for the induced metric on `X`.
//!
//! With `u_Y = u_W(., 0)` and `g~ = u_Y^{4/(n-2)} h` on `Y = X x S^1`, the
//! induced metric on the slice `X x {P}` is `u_Y^{4/(n-2)} h_X`. Its scalar
//! curvature is computed three ways: directly (`R_exact`), through the
//! Gauss-Codazzi equation and the conformal laws in `u` (`R_chain`) or in
//! `phi = (2/(n-2)) ln u` (`R_phi`); `R_bound` is the lower bound that only
//! uses the equation solved by `u` and the measured constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{
    gauss_codazzi_scalar, hypersurface_data, Connection, CurvatureBundle, HypersurfaceData,
};
use crate::error::{Error, Result};
use crate::grid::{DiscreteDomain, ScalarField, VectorField, COORD_T, COORD_THETA};
use crate::metric::{product_extend, MetricField};
use crate::normal::{embed_v, NormalFrame};

/// `4 / (n - 2)`, the exponent of `u` in the conformal factor.
pub fn conformal_exponent(n: usize) -> f64 {
    4.0 / (n as f64 - 2.0)
}

/// Everything about the slice `X x {P}` that does not depend on `u`.
#[derive(Clone, Debug)]
pub struct SliceGeometry {
    /// `h` on `Y`, at the nodes of the slice
    pub h: MetricField,
    /// induced metric on the slice
    pub h_x: MetricField,
    /// `sigma* g = h_X + dt^2` on `W`
    pub sigma_g: MetricField,
    /// `g = h + dt^2` on `M`
    pub g_m: MetricField,
    pub frame: NormalFrame,
    /// `V` with a zero circle component, on the chart of `h`
    pub v_full: VectorField,
    pub bundle: CurvatureBundle,
    pub hyper: HypersurfaceData,
    pub conn_h: Connection,
    pub conn_x: Connection,
    pub conn_w: Connection,
    pub conn_m: Connection,
}

impl SliceGeometry {
    /// `h` must not resolve the circle (slice it first with [`crate::normal::slice_at`]).
    pub fn new(h: &MetricField) -> Result<Self> {
        if h.grid().axis_index(COORD_THETA).is_some() {
            return Err(Error::Mismatch(
                "slice the metric before building slice geometry".into(),
            ));
        }
        let frame = NormalFrame::new(h)?;
        let x_names: Vec<String> = h
            .chart()
            .coords()
            .iter()
            .filter(|c| c.name != COORD_THETA)
            .map(|c| c.name.clone())
            .collect();
        let keep: Vec<&str> = x_names.iter().map(String::as_str).collect();
        let h_x = h.restrict(&keep)?;
        let sigma_g = product_extend(&h_x);
        let g_m = product_extend(h);
        let bundle = CurvatureBundle::new(h)?;
        let hyper = hypersurface_data(&bundle, h, COORD_THETA, &frame.mu)?;
        let v_full = embed_v(h, &frame.v)?;
        Ok(SliceGeometry {
            conn_h: bundle.connection().clone(),
            conn_x: Connection::new(&h_x)?,
            conn_w: Connection::new(&sigma_g)?,
            conn_m: Connection::new(&g_m)?,
            h: h.clone(),
            h_x,
            sigma_g,
            g_m,
            frame,
            v_full,
            bundle,
            hyper,
        })
    }

    /// `n = dim Y`.
    pub fn n(&self) -> usize {
        self.h.dim()
    }

    /// `R_h` along the slice, the potential of the Dirichlet problem.
    pub fn r_h(&self) -> &ScalarField {
        self.bundle.scalar()
    }

    /// Scalar curvature of the induced metric by Gauss-Codazzi.
    pub fn gauss_codazzi(&self) -> Result<ScalarField> {
        gauss_codazzi_scalar(
            self.r_h(),
            &self.hyper.ric_nn,
            &self.hyper.mean,
            &self.hyper.a_norm2,
        )
    }

    /// `max (2 |Ric(mu, mu)| + H^2 + |A|^2)` over the slice.
    pub fn extrinsic_max(&self) -> f64 {
        let hy = &self.hyper;
        (0..self.h.grid().len())
            .map(|n| {
                2.0 * hy.ric_nn.values()[n].abs()
                    + hy.mean.values()[n].powi(2)
                    + hy.a_norm2.values()[n]
            })
            .fold(0.0, f64::max)
    }
}

/// `u_W = u + 1` on `W`, its pullback `u_M` to `M` (the same values, since it
/// does not depend on the circle) and `u_Y = u_W(., 0)`.
#[derive(Clone, Debug)]
pub struct ConformalFactors {
    pub n: usize,
    pub u_w: ScalarField,
    pub u_y: ScalarField,
    pub phi_w: ScalarField,
    pub phi_y: ScalarField,
}

impl ConformalFactors {
    pub fn u_m(&self) -> &ScalarField {
        &self.u_w
    }

    /// `u_Y^{4/(n-2)}`, the factor of the induced metric.
    pub fn factor_y(&self) -> ScalarField {
        let e = conformal_exponent(self.n);
        self.u_y.map(|u| u.powf(e))
    }
}

pub fn lift_solution(u: &ScalarField, domain: &DiscreteDomain) -> Result<ConformalFactors> {
    if u.grid() != domain.w_grid() {
        return Err(Error::Mismatch("u does not live on the grid of W".into()));
    }
    if !(u.min() > -1.0) {
        return Err(Error::Certificate(format!(
            "min u = {} so u + 1 is not positive",
            u.min()
        )));
    }
    let n = domain.n();
    let k = 0.5 * conformal_exponent(n);
    let u_w = u.map(|v| v + 1.0);
    let u_y = u_w.slice(COORD_T, domain.t_mid())?;
    Ok(ConformalFactors {
        n,
        phi_w: u_w.map(|v| k * v.ln()),
        phi_y: u_y.map(|v| k * v.ln()),
        u_w,
        u_y,
    })
}

fn zip_map(fields: &[&ScalarField], f: impl Fn(&[f64]) -> f64 + Sync) -> Result<ScalarField> {
    let grid = fields[0].grid();
    if fields.iter().any(|x| x.grid() != grid) {
        return Err(Error::Mismatch("fields live on different grids".into()));
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let row: Vec<f64> = fields.iter().map(|x| x.values()[n]).collect();
            f(&row)
        })
        .collect();
    ScalarField::new(grid.clone(), values)
}

/// Scalar curvature of `e^{2 phi} g`:
/// `e^{-2phi} (R - 2(n-1) Delta phi - (n-1)(n-2) |grad phi|^2)`.
pub fn conformal_scalar(
    bundle: &CurvatureBundle,
    phi: &ScalarField,
    n_dim: usize,
) -> Result<ScalarField> {
    let conn = bundle.connection();
    let lap = conn.laplacian(phi)?;
    let g2 = conn.grad_norm2(phi)?;
    let r = bundle.scalar();
    if r.grid() != phi.grid() {
        return Err(Error::Mismatch("phi must live on the metric grid".into()));
    }
    let n = n_dim as f64;
    zip_map(&[r, phi, &lap, &g2], |v| {
        (-2.0 * v[1]).exp() * (v[0] - 2.0 * (n - 1.0) * v[2] - (n - 1.0) * (n - 2.0) * v[3])
    })
}

/// `Ric~(e^{-phi} mu, e^{-phi} mu)` for `g~ = e^{2 phi} g` and a `g`-unit vector `mu`.
pub fn conformal_ricci_normal(
    bundle: &CurvatureBundle,
    g: &MetricField,
    phi: &ScalarField,
    mu: &VectorField,
    n_dim: usize,
) -> Result<ScalarField> {
    for (node, jet) in g.jets().iter().enumerate() {
        let m = mu.at(node);
        let unit = jet.inner(m, m);
        if (unit - 1.0).abs() > 1e-8 {
            return Err(Error::BadNormal {
                node,
                reason: format!("g(mu, mu) = {unit}"),
            });
        }
    }
    let conn = bundle.connection();
    let lap = conn.laplacian(phi)?;
    let g2 = conn.grad_norm2(phi)?;
    let hmm = conn.hessian_along(phi, mu)?;
    let dmu = conn.directional(phi, mu)?;
    let ric: Vec<f64> = (0..g.grid().len())
        .map(|n| bundle.ricci_pair(n, mu.at(n), mu.at(n)))
        .collect();
    let ric = ScalarField::new(g.grid().clone(), ric)?;
    let n = n_dim as f64;
    zip_map(&[&ric, phi, &lap, &g2, &hmm, &dmu], |v| {
        (-2.0 * v[1]).exp() * (v[0] - (n - 2.0) * (v[4] - v[5] * v[5]) - (v[2] + (n - 2.0) * v[3]))
    })
}

/// `(|A~|^2, H~^2)` of the slice in `e^{2 phi} g`, from `A`, `H` and
/// `d_mu phi`, with `n_dim` the dimension of the ambient manifold:
/// `A~ = e^phi (A + d_mu phi g)` on the `(n-1)`-dimensional slice.
pub fn conformal_second_fundamental(
    hyper: &HypersurfaceData,
    phi: &ScalarField,
    dmu_phi: &ScalarField,
    n_dim: usize,
) -> Result<(ScalarField, ScalarField)> {
    let m = n_dim as f64 - 1.0;
    let a2 = zip_map(&[&hyper.a_norm2, &hyper.mean, phi, dmu_phi], |v| {
        (-2.0 * v[2]).exp() * (v[0] + 2.0 * v[1] * v[3] + m * v[3] * v[3])
    })?;
    let h2 = zip_map(&[&hyper.mean, phi, dmu_phi], |v| {
        (-2.0 * v[1]).exp() * (v[0] * v[0] + 2.0 * m * v[0] * v[2] + m * m * v[2] * v[2])
    })?;
    Ok((a2, h2))
}

/// `B1 = Delta_g u_M - Delta_{sigma* g} u_W` on `W` and `K1 = sup 4 |B1|`.
pub fn laplacian_comparison(
    u_w: &ScalarField,
    slice: &SliceGeometry,
) -> Result<(ScalarField, f64)> {
    let lm = slice.conn_m.laplacian(u_w)?;
    let lw = slice.conn_w.laplacian(u_w)?;
    let b1 = zip_map(&[&lm, &lw], |v| v[0] - v[1])?;
    let k1 = 4.0 * b1.sup_abs();
    Ok((b1, k1))
}

/// `sup |Delta_g u_M(., 0) - Delta_h u_Y - d^2 u_M / dt^2 (., 0)|` over the slice.
pub fn slice_laplacian_identity(
    factors: &ConformalFactors,
    slice: &SliceGeometry,
    domain: &DiscreteDomain,
) -> Result<f64> {
    let lm = slice
        .conn_m
        .laplacian(factors.u_m())?
        .slice(COORD_T, domain.t_mid())?;
    let ly = slice.conn_h.laplacian(&factors.u_y)?;
    let tt = dtt_on_slice(factors.u_m(), domain)?;
    let r = zip_map(&[&lm, &ly, &tt], |v| v[0] - v[1] - v[2])?;
    Ok(r.sup_abs())
}

fn dtt_on_slice(u: &ScalarField, domain: &DiscreteDomain) -> Result<ScalarField> {
    let ti = domain.t_index();
    let values = (0..domain.x_grid().len())
        .map(|x| u.d2(domain.w_node(x, domain.t_mid()), ti))
        .collect();
    ScalarField::new(domain.x_grid().clone(), values)
}

/// `K2 = (4/(n-2)) (|grad_h u_W|^2 / u_W + n (V u_W)^2 / u_W)` on the slice.
pub fn k2_field(factors: &ConformalFactors, slice: &SliceGeometry) -> Result<ScalarField> {
    if !(factors.u_y.min() > 0.0) {
        return Err(Error::Certificate(
            "u_W is not positive on the slice".into(),
        ));
    }
    let g2 = slice.conn_h.grad_norm2(&factors.u_y)?;
    let dv = slice.conn_h.directional(&factors.u_y, &slice.v_full)?;
    let n = factors.n as f64;
    let e = conformal_exponent(factors.n);
    zip_map(&[&factors.u_y, &g2, &dv], |v| {
        e * (v[1] / v[0] + n * v[2] * v[2] / v[0])
    })
}

/// `1.1 ((3/2) max (2|Ric(mu,mu)| + H^2 + |A|^2) + K1 + 2)`.
pub fn select_c(slice: &SliceGeometry, k1: f64) -> f64 {
    1.1 * c_threshold(slice, k1)
}

/// The value `C` has to exceed.
pub fn c_threshold(slice: &SliceGeometry, k1: f64) -> f64 {
    1.5 * slice.extrinsic_max() + k1 + 2.0
}

/// Direct scalar curvature of the induced metric `u_Y^{4/(n-2)} h_X`.
pub fn exact_induced_scalar(
    factors: &ConformalFactors,
    slice: &SliceGeometry,
) -> Result<ScalarField> {
    crate::curvature::scalar_curvature(&slice.h_x.scaled(&factors.factor_y())?)
}

/// Scalar curvature of the induced metric written in `u`:
///
/// `u^{-(n+2)/(n-2)} [ (R_h - 2Ric(mu,mu) + H^2 - |A|^2) u + 4 grad^2 u(mu,mu)
///  - 4 Delta_g u_M + 4 d_tt u_M + 4 H d_mu u + (4/(n-2)) (|grad u|^2 - (d_mu u)^2) / u ]`
///
/// evaluated on the slice `t = 0`.
pub fn chain_scalar_exact(
    factors: &ConformalFactors,
    slice: &SliceGeometry,
    domain: &DiscreteDomain,
) -> Result<ScalarField> {
    let mu = &slice.frame.mu;
    let u = &factors.u_y;
    let gc = slice.gauss_codazzi()?;
    let hmm = slice.conn_h.hessian_along(u, mu)?;
    let dmu = slice.conn_h.directional(u, mu)?;
    let g2 = slice.conn_h.grad_norm2(u)?;
    let lm = slice
        .conn_m
        .laplacian(factors.u_m())?
        .slice(COORD_T, domain.t_mid())?;
    let tt = dtt_on_slice(factors.u_m(), domain)?;
    let n = factors.n as f64;
    let e = conformal_exponent(factors.n);
    let p = -(n + 2.0) / (n - 2.0);
    zip_map(
        &[u, &gc, &hmm, &lm, &tt, &slice.hyper.mean, &dmu, &g2],
        |v| {
            let u = v[0];
            u.powf(p)
                * (v[1] * u + 4.0 * v[2] - 4.0 * v[3]
                    + 4.0 * v[4]
                    + 4.0 * v[5] * v[6]
                    + e * (v[7] - v[6] * v[6]) / u)
        },
    )
}

/// The same curvature via the conformal laws in `phi_Y` and Gauss-Codazzi
/// for the slice in `(Y, e^{2 phi} h)`.
pub fn chain_scalar_phi(factors: &ConformalFactors, slice: &SliceGeometry) -> Result<ScalarField> {
    let n = factors.n;
    let phi = &factors.phi_y;
    let r = conformal_scalar(&slice.bundle, phi, n)?;
    let ric = conformal_ricci_normal(&slice.bundle, &slice.h, phi, &slice.frame.mu, n)?;
    let dmu = slice.conn_h.directional(phi, &slice.frame.mu)?;
    let (a2, h2) = conformal_second_fundamental(&slice.hyper, phi, &dmu, n)?;
    zip_map(&[&r, &ric, &h2, &a2], |v| v[0] - 2.0 * v[1] + v[2] - v[3])
}

/// Measured inputs of the lower bound.
#[derive(Clone, Debug)]
pub struct BoundInputs<'a> {
    /// forcing on `W`
    pub forcing: &'a ScalarField,
    /// `B1` on `W`
    pub b1: &'a ScalarField,
    pub k1: f64,
    pub k2: &'a ScalarField,
    pub eta_prime: f64,
    pub c: f64,
    pub residual_inf: f64,
    pub residual_tolerance: f64,
    /// tolerance of the identity checks (a multiple of the manufactured-solution error)
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub r_exact: ScalarField,
    pub r_chain: ScalarField,
    pub r_phi: ScalarField,
    pub r_bound: ScalarField,
    pub c: f64,
    pub k1: f64,
    pub k2_max: f64,
    pub eta_prime: f64,
    pub summary: CertificateSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub min_r_exact: f64,
    pub min_r_chain: f64,
    pub min_r_bound: f64,
    /// `||R_chain - R_exact||_inf`
    pub chain_error: f64,
    /// `||R_phi - R_exact||_inf`
    pub phi_error: f64,
    pub tolerance: f64,
    pub chain_within_tolerance: bool,
    /// `R_bound <= R_chain + tolerance` at every node
    pub bound_sound: bool,
    pub k2_below_one: bool,
    /// `min R_bound > tolerance`
    pub verdict: bool,
}

/// `R_bound = u^{-(n+2)/(n-2)} [ (-2Ric(mu,mu) + H^2 - |A|^2) u + F + R_h - 4 B1 - K2 - 4 eta' ]`
/// on the slice, with the exact and chain curvatures for comparison.
pub fn certificate(
    factors: &ConformalFactors,
    slice: &SliceGeometry,
    domain: &DiscreteDomain,
    inputs: &BoundInputs,
) -> Result<Certificate> {
    if !(inputs.residual_inf < inputs.residual_tolerance) {
        return Err(Error::Certificate(format!(
            "PDE residual {:e} is not below {:e}",
            inputs.residual_inf, inputs.residual_tolerance
        )));
    }
    let t0 = domain.t_mid();
    let f0 = inputs.forcing.slice(COORD_T, t0)?;
    let b1 = inputs.b1.slice(COORD_T, t0)?;
    let hy = &slice.hyper;
    let n = factors.n as f64;
    let p = -(n + 2.0) / (n - 2.0);
    let eta = inputs.eta_prime;
    let r_bound = zip_map(
        &[
            &factors.u_y,
            &hy.ric_nn,
            &hy.mean,
            &hy.a_norm2,
            &f0,
            slice.r_h(),
            &b1,
            inputs.k2,
        ],
        |v| {
            let u = v[0];
            u.powf(p)
                * ((-2.0 * v[1] + v[2] * v[2] - v[3]) * u + v[4] + v[5]
                    - 4.0 * v[6]
                    - v[7]
                    - 4.0 * eta)
        },
    )?;
    let r_exact = exact_induced_scalar(factors, slice)?;
    let r_chain = chain_scalar_exact(factors, slice, domain)?;
    let r_phi = chain_scalar_phi(factors, slice)?;
    let tol = inputs.tolerance;
    let chain_error = r_chain.max_abs_diff(&r_exact)?;
    let phi_error = r_phi.max_abs_diff(&r_exact)?;
    let bound_sound = r_bound
        .values()
        .iter()
        .zip(r_chain.values())
        .all(|(b, c)| *b <= c + tol);
    let k2_max = inputs.k2.sup_abs();
    let summary = CertificateSummary {
        min_r_exact: r_exact.min(),
        min_r_chain: r_chain.min(),
        min_r_bound: r_bound.min(),
        chain_error,
        phi_error,
        tolerance: tol,
        chain_within_tolerance: chain_error <= tol,
        bound_sound,
        k2_below_one: k2_max < 1.0,
        verdict: r_bound.min() > tol,
    };
    Ok(Certificate {
        r_exact,
        r_chain,
        r_phi,
        r_bound,
        c: inputs.c,
        k1: inputs.k1,
        k2_max,
        eta_prime: eta,
        summary,
    })
}
