//! The bump forcing `F = (C + 1) phi(t)`: constant on `|t| <= eps/2`,
//! supported in `|t| < eps`, with small `L^p` norm for small `eps`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm, DiscreteDomain, ScalarField};
use crate::metric::MetricField;

/// The calibrated `eps` must span at least this many t-spacings, so that the
/// monitored region `|t| < eps/4` contains three nodes.
pub const MIN_EPS_SPACINGS: f64 = 8.0;

fn mollifier(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Smooth step: `0` for `s <= 0`, `1` for `s >= 1`, `C^infinity` in between.
pub fn smooth_step(s: f64) -> f64 {
    let a = mollifier(s);
    let b = mollifier(1.0 - s);
    a / (a + b)
}

/// Cutoff `phi`: `1` on `|t| <= eps/2`, `0` on `|t| >= eps`.
pub fn cutoff(t: f64, eps: f64) -> f64 {
    smooth_step((eps - t.abs()) / (0.5 * eps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub c: f64,
    pub p: u32,
    pub delta: f64,
    pub epsilon: f64,
}

/// `F(x, t) = (C + 1) phi(t)` on the grid of `W`.
pub fn build_bump(spec: &ForcingSpec, domain: &DiscreteDomain) -> Result<ScalarField> {
    if !(spec.epsilon > 0.0 && spec.epsilon < 1.0) {
        return Err(Error::Forcing(format!(
            "epsilon = {} must lie in (0, 1)",
            spec.epsilon
        )));
    }
    let ti = domain.t_index();
    let plateau = spec.c + 1.0;
    Ok(ScalarField::from_fn(domain.w_grid(), |x| {
        plateau * cutoff(x[ti], spec.epsilon)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub epsilon: f64,
    pub norm: f64,
    pub halvings: u32,
}

/// Largest dyadic `eps = 2^-k` with `||F||_{L^p} < delta`. `metric` is `sigma* g`.
pub fn calibrate_epsilon(
    c: f64,
    p: u32,
    delta: f64,
    metric: &MetricField,
    domain: &DiscreteDomain,
) -> Result<Calibration> {
    if !(delta > 0.0) {
        return Err(Error::Forcing(format!("delta = {delta} must be positive")));
    }
    let min_eps = MIN_EPS_SPACINGS * domain.t_spacing();
    let mut k = 1;
    loop {
        let epsilon = 0.5f64.powi(k as i32);
        if epsilon < min_eps {
            return Err(Error::Forcing(format!(
                "no epsilon >= {min_eps} reaches ||F||_{p} < {delta}; refine the t grid (t_nodes = {})",
                domain.spec().t_nodes
            )));
        }
        let f = build_bump(
            &ForcingSpec {
                c,
                p,
                delta,
                epsilon,
            },
            domain,
        )?;
        let norm = lp_norm(&f, metric, p)?;
        if norm < delta {
            return Ok(Calibration {
                epsilon,
                norm,
                halvings: k,
            });
        }
        k += 1;
    }
}
