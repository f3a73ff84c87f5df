//! Unit normal of the slices `X x {P}` in `X x S^1`, its decomposition
//! `mu = a d/dtheta + V`, the angle condition and the ellipticity test.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField, COORD_THETA};
use crate::metric::MetricField;

/// Ellipticity and the strict angle condition both require `1 - |V|^2` above this.
pub const MARGIN_FLOOR: f64 = 1e-8;

/// Metric on the slice `{theta = p}`. A metric that does not resolve `theta`
/// is circle-invariant and is returned unchanged.
pub fn slice_at(h: &MetricField, p: f64) -> Result<MetricField> {
    match h.grid().axis_index(COORD_THETA) {
        None => Ok(h.clone()),
        Some(a) => {
            let axis = h.grid().axis(a);
            let k = ((p - axis.lo) / axis.spacing())
                .round()
                .rem_euclid(axis.n as f64) as usize;
            h.slice(COORD_THETA, k)
        }
    }
}

fn theta_index(h: &MetricField) -> Result<usize> {
    h.chart()
        .index_of(COORD_THETA)
        .ok_or_else(|| Error::Mismatch("metric has no circle coordinate".into()))
}

/// Unit normal `mu` of `{theta = const}`: `h(mu, d_i) = 0` on slice tangents,
/// `h(mu, mu) = 1` and `h(mu, d_theta) > 0`.
pub fn unit_normal(h: &MetricField) -> Result<VectorField> {
    let th = theta_index(h)?;
    let d = h.dim();
    let rows = h
        .jets()
        .par_iter()
        .enumerate()
        .map(|(node, jet)| {
            let chol = jet.matrix().cholesky().ok_or(Error::NotPositiveDefinite {
                node,
                min_eigenvalue: jet.min_eigenvalue(),
            })?;
            let mut e = DVector::zeros(d);
            e[th] = 1.0;
            let m = chol.solve(&e);
            let norm = m[th].sqrt();
            Ok(m.iter().map(|v| v / norm).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(h.grid().clone(), d, rows.concat())
}

/// `a = 1 / h(d_theta, mu)` and `V = mu - a d_theta`, returned with the
/// circle component dropped (components along the coordinates of `X`).
pub fn decompose_normal(h: &MetricField, mu: &VectorField) -> Result<(ScalarField, VectorField)> {
    let th = theta_index(h)?;
    let d = h.dim();
    let mut a = Vec::with_capacity(h.grid().len());
    let mut v = Vec::with_capacity(h.grid().len() * (d - 1));
    for (node, jet) in h.jets().iter().enumerate() {
        let m = mu.at(node);
        let c: f64 = (0..d).map(|i| jet.g(th, i) * m[i]).sum();
        if !(c > 0.0) {
            return Err(Error::BadNormal {
                node,
                reason: format!("h(d_theta, mu) = {c} is not positive"),
            });
        }
        a.push(1.0 / c);
        v.extend((0..d).filter(|&i| i != th).map(|i| m[i]));
    }
    Ok((
        ScalarField::new(h.grid().clone(), a)?,
        VectorField::new(h.grid().clone(), d - 1, v)?,
    ))
}

/// `V` as a vector on the full chart of `h` (zero circle component).
pub fn embed_v(h: &MetricField, v: &VectorField) -> Result<VectorField> {
    let th = theta_index(h)?;
    let d = h.dim();
    let mut out = Vec::with_capacity(v.grid().len() * d);
    for n in 0..v.grid().len() {
        let mut it = v.at(n).iter();
        for i in 0..d {
            out.push(if i == th {
                0.0
            } else {
                *it.next().expect("component")
            });
        }
    }
    VectorField::new(v.grid().clone(), d, out)
}

/// `angle_h(mu, d_theta)` at every node, in `[0, pi/2)`.
pub fn angle_field(h: &MetricField, mu: &VectorField) -> Result<ScalarField> {
    let th = theta_index(h)?;
    let d = h.dim();
    let values = h
        .jets()
        .iter()
        .enumerate()
        .map(|(n, jet)| {
            let m = mu.at(n);
            let c: f64 = (0..d).map(|i| jet.g(th, i) * m[i]).sum();
            // component of d_theta orthogonal to mu
            let mut perp = vec![0.0; d];
            perp[th] = 1.0;
            for i in 0..d {
                perp[i] -= c * m[i];
            }
            jet.inner(&perp, &perp).max(0.0).sqrt().atan2(c)
        })
        .collect();
    ScalarField::new(h.grid().clone(), values)
}

/// Everything the pipeline needs about the slice normal.
#[derive(Clone, Debug)]
pub struct NormalFrame {
    pub mu: VectorField,
    pub a: ScalarField,
    /// `V` along the coordinates of `X`
    pub v: VectorField,
    /// `h(V, V)`
    pub v_norm2: ScalarField,
    /// `h(d_theta, d_theta) / h(mu, d_theta)^2`
    pub ratio: ScalarField,
    pub angle: ScalarField,
}

impl NormalFrame {
    /// Build and verify the frame on a slice metric.
    pub fn new(h: &MetricField) -> Result<Self> {
        let th = theta_index(h)?;
        let d = h.dim();
        let mu = unit_normal(h)?;
        let (a, v) = decompose_normal(h, &mu)?;
        let vfull = embed_v(h, &v)?;
        let mut v2 = Vec::with_capacity(h.grid().len());
        let mut ratio = Vec::with_capacity(h.grid().len());
        for (n, jet) in h.jets().iter().enumerate() {
            let m = mu.at(n);
            let unit = jet.inner(m, m);
            if (unit - 1.0).abs() > 1e-10 {
                return Err(Error::BadNormal {
                    node: n,
                    reason: format!("h(mu, mu) = {unit}"),
                });
            }
            for i in (0..d).filter(|&i| i != th) {
                let t: f64 = (0..d).map(|k| jet.g(i, k) * m[k]).sum();
                if t.abs() > 1e-10 {
                    return Err(Error::BadNormal {
                        node: n,
                        reason: format!("h(mu, d_{i}) = {t}"),
                    });
                }
            }
            let vn = vfull.at(n);
            let direct = jet.inner(vn, vn);
            let c = 1.0 / a.values()[n];
            let q = jet.g(th, th) / (c * c);
            if (direct - (q - 1.0)).abs() > 1e-10 * q.max(1.0) {
                return Err(Error::BadNormal {
                    node: n,
                    reason: format!("|V|^2 = {direct} but ratio - 1 = {}", q - 1.0),
                });
            }
            v2.push(direct);
            ratio.push(q);
        }
        let angle = angle_field(h, &mu)?;
        Ok(NormalFrame {
            mu,
            a,
            v,
            v_norm2: ScalarField::new(h.grid().clone(), v2)?,
            ratio: ScalarField::new(h.grid().clone(), ratio)?,
            angle,
        })
    }
}

/// Summary of the angle hypothesis over a slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSummary {
    pub max_angle: f64,
    pub max_ratio: f64,
    pub max_v_norm2: f64,
    /// `min (1 - |V|^2) = min (2 - ratio)`
    pub margin: f64,
    pub holds: bool,
}

impl AngleSummary {
    pub fn of(frame: &NormalFrame) -> Self {
        let max_ratio = frame.ratio.max();
        let margin = 2.0 - max_ratio;
        AngleSummary {
            max_angle: frame.angle.max(),
            max_ratio,
            max_v_norm2: frame.v_norm2.max(),
            margin,
            holds: margin > MARGIN_FLOOR,
        }
    }

    pub fn require(&self) -> Result<()> {
        if self.holds {
            Ok(())
        } else {
            Err(Error::AngleViolated {
                max_angle: self.max_angle,
                max_ratio: self.max_ratio,
            })
        }
    }

    /// Whether `angle < pi/4` and `ratio < 2` agree at every node (nodes
    /// within round-off of the boundary are skipped).
    pub fn pointwise_equivalence(frame: &NormalFrame) -> bool {
        frame
            .angle
            .values()
            .iter()
            .zip(frame.ratio.values())
            .all(|(&ang, &q)| (q - 2.0).abs() < 1e-10 || (ang < FRAC_PI_4) == (q < 2.0))
    }
}

/// Angle summary for the slice `{theta = p}` of `h`.
pub fn check_angle_condition(h: &MetricField, p: f64) -> Result<(NormalFrame, AngleSummary)> {
    let frame = NormalFrame::new(&slice_at(h, p)?)?;
    let summary = AngleSummary::of(&frame);
    Ok((frame, summary))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ellipticity {
    /// per node, leading minors `1 - sum_{i<=k} b_i^2` of `I - b b^T`
    pub dets: Vec<Vec<f64>>,
    pub is_elliptic: bool,
    pub margin: f64,
    /// largest difference between the closed form and direct determinants
    pub cross_check: f64,
}

/// Closed-form leading minors of `I - b b^T` for `b` in an orthonormal frame.
pub fn minors_closed_form(b: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    b.iter()
        .map(|x| {
            acc += x * x;
            1.0 - acc
        })
        .collect()
}

/// Leading minors of `I - b b^T` by LU determinants.
pub fn minors_direct(b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let bv = DVector::from_column_slice(b);
    let full = DMatrix::identity(m, m) - &bv * bv.transpose();
    (1..=m)
        .map(|k| full.view((0, 0), (k, k)).into_owned().determinant())
        .collect()
}

/// Ellipticity of `4 grad_V grad_V - 4 Delta`: the principal symbol is
/// `4 (|xi|^2 - (b.xi)^2)`, positive definite iff every leading minor of
/// `I - b b^T` is positive. `b` is `V` in an `h`-orthonormal frame of `X`.
pub fn ellipticity_minors(v: &VectorField, h: &MetricField) -> Result<Ellipticity> {
    let th = theta_index(h)?;
    let keep: Vec<usize> = (0..h.dim()).filter(|&i| i != th).collect();
    if v.grid() != h.grid() || v.dim() != keep.len() {
        return Err(Error::Mismatch("V does not match the metric".into()));
    }
    let rows = h
        .jets()
        .par_iter()
        .enumerate()
        .map(|(n, jet)| {
            let hx = jet.restrict(&keep).matrix();
            let l = hx.cholesky().ok_or(Error::NotPositiveDefinite {
                node: n,
                min_eigenvalue: jet.min_eigenvalue(),
            })?;
            let bhat = l.l().transpose() * DVector::from_column_slice(v.at(n));
            let closed = minors_closed_form(bhat.as_slice());
            let direct = minors_direct(bhat.as_slice());
            let err = closed
                .iter()
                .zip(&direct)
                .fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
            Ok((closed, err))
        })
        .collect::<Result<Vec<_>>>()?;
    let margin = rows
        .iter()
        .map(|(d, _)| d.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    let cross_check = rows.iter().fold(0.0f64, |e, r| e.max(r.1));
    Ok(Ellipticity {
        dets: rows.into_iter().map(|r| r.0).collect(),
        is_elliptic: margin > MARGIN_FLOOR,
        margin,
        cross_check,
    })
}
