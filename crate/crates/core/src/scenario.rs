//! Scenario orchestration: angle check, ellipticity, forcing, solve and
//! certificate, in that order, with an early typed abort at each stage.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::{Choice, MetricChoice, RunConfig};
use crate::conformal::{
    c_threshold, certificate, k2_field, laplacian_comparison, lift_solution, select_c,
    slice_laplacian_identity, BoundInputs, CertificateSummary, SliceGeometry,
};
use crate::error::{Error, Result};
use crate::forcing::{build_bump, calibrate_epsilon, ForcingSpec};
use crate::grid::{build_domain, lp_norm, DiscreteDomain, ScalarField};
use crate::metric::builtin::{ProductFlat, SphereProduct, SphereTwist, TwistedFlat};
use crate::metric::MetricField;
use crate::normal::{check_angle_condition, ellipticity_minors, AngleSummary};
use crate::solver::{assemble, dtt_monitor, manufactured_error, solve_dirichlet};
use crate::sparse::SolverStats;

/// Identity checks pass within this multiple of the manufactured-solution error.
pub const TOLERANCE_FACTOR: f64 = 10.0;

/// Rounds of `C` selection before giving up.
pub const MAX_C_ROUNDS: usize = 8;

pub const FLAG_NO_PSC: &str = "PSC hypothesis on h fails";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    CheckAngle,
    Solve,
    Certify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub is_elliptic: bool,
    pub margin: f64,
    pub cross_check: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSection {
    pub c: f64,
    pub c_rounds: usize,
    pub epsilon: f64,
    pub forcing_norm: f64,
    pub symbol_margin: f64,
    pub stats: SolverStats,
    pub c1: f64,
    pub min_u: f64,
    pub mms_error: f64,
    pub eta_prime: f64,
    pub k1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSection {
    pub k2_max: f64,
    pub slice_identity_residual: f64,
    #[serde(flatten)]
    pub summary: CertificateSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub stage: Stage,
    pub metric: String,
    pub angle: AngleSummary,
    pub ellipticity: EllipticityReport,
    pub min_r_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
}

/// Fields kept for CSV dumps.
#[derive(Clone, Debug, Default)]
pub struct RunFields {
    pub u: Option<ScalarField>,
    pub r_exact: Option<ScalarField>,
    pub r_chain: Option<ScalarField>,
    pub r_bound: Option<ScalarField>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub fields: RunFields,
    pub wall_time: Duration,
}

fn read_components(path: &Path, domain: &DiscreteDomain) -> Result<MetricField> {
    let name = path.display().to_string();
    let chart = domain.y_chart();
    let d = chart.dim();
    let expected: Vec<String> = (0..d)
        .flat_map(|i| {
            let c = chart.coords().to_vec();
            (i..d).map(move |k| format!("h_{}_{}", c[i].name, c[k].name))
        })
        .collect();
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| Error::config(&name, 0, e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::config(&name, 1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != expected {
        return Err(Error::config(
            &name,
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }
    let mut comps = vec![Vec::with_capacity(domain.x_grid().len()); expected.len()];
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::config(&name, line, e.to_string()))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::config(&name, line, format!("`{field}` is not a number")))?;
            comps[c].push(v);
        }
    }
    if comps[0].len() != domain.x_grid().len() {
        return Err(Error::config(
            &name,
            0,
            format!(
                "{} rows for {} nodes of X",
                comps[0].len(),
                domain.x_grid().len()
            ),
        ));
    }
    MetricField::from_components(name.clone(), chart, domain.x_grid(), &comps)
}

/// `h` at the nodes of the slice `X x {p}` (built-in metrics are circle-invariant).
pub fn build_metric(choice: &MetricChoice, domain: &DiscreteDomain, p: f64) -> Result<MetricField> {
    let dx = domain.spec().dim_x;
    let g = domain.x_grid();
    match choice {
        MetricChoice::ProductFlat { .. } => MetricField::from_analytic(&ProductFlat::new(dx), g, p),
        MetricChoice::TwistedFlat { c } => {
            MetricField::from_analytic(&TwistedFlat::new(dx, *c), g, p)
        }
        MetricChoice::SphereProduct { r } => {
            MetricField::from_analytic(&SphereProduct::new(*r), g, p)
        }
        MetricChoice::SphereTwist { r, beta } => {
            MetricField::from_analytic(&SphereTwist::new(*r, *beta), g, p)
        }
        MetricChoice::Csv { path } => read_components(path, domain),
    }
}

pub fn run_scenario(config: &RunConfig, stage: Stage) -> Result<RunOutcome> {
    let start = Instant::now();
    let domain = build_domain(&config.domain)?;
    let h = build_metric(&config.metric, &domain, config.slice)?;

    let (frame, angle) = check_angle_condition(&h, config.slice)?;
    angle.require()?;
    let ell = ellipticity_minors(&frame.v, &h)?;
    if !ell.is_elliptic {
        return Err(Error::NotElliptic { margin: ell.margin });
    }
    let slice = SliceGeometry::new(&h)?;
    let min_r_h = slice.r_h().min();

    let mut flags = vec![];
    if !(min_r_h > 0.0) {
        flags.push(format!("{FLAG_NO_PSC}: min R_h = {min_r_h:.6e}"));
    }
    let mut report = RunReport {
        config: config.clone(),
        stage,
        metric: h.name().to_string(),
        angle,
        ellipticity: EllipticityReport {
            is_elliptic: ell.is_elliptic,
            margin: ell.margin,
            cross_check: ell.cross_check,
        },
        min_r_h,
        solve: None,
        certificate: None,
        verdict: None,
        flags,
        warnings: vec![],
    };
    let mut fields = RunFields::default();
    if stage == Stage::CheckAngle {
        return Ok(RunOutcome {
            report,
            fields,
            wall_time: start.elapsed(),
        });
    }

    let a = assemble(&domain, &slice.sigma_g, &frame.v, slice.r_h())?;
    report.warnings.extend(a.warnings.iter().cloned());
    let settings = config.solver;
    let mms = manufactured_error(&a, &settings)?;
    let tolerance = TOLERANCE_FACTOR * mms.error_inf;

    let fc = &config.forcing;
    let mut c = match fc.c {
        Choice::Fixed(c) => c,
        Choice::Auto => select_c(&slice, 0.0),
    };
    let mut rounds = 0;
    let (epsilon, forcing_norm, f, sol, k1, b1) = loop {
        rounds += 1;
        let (epsilon, norm) = match fc.epsilon {
            Choice::Fixed(e) => {
                let f = build_bump(
                    &ForcingSpec {
                        c,
                        p: fc.p,
                        delta: fc.delta,
                        epsilon: e,
                    },
                    &domain,
                )?;
                (e, lp_norm(&f, &slice.sigma_g, fc.p)?)
            }
            Choice::Auto => {
                let cal = calibrate_epsilon(c, fc.p, fc.delta, &slice.sigma_g, &domain)?;
                (cal.epsilon, cal.norm)
            }
        };
        let f = build_bump(
            &ForcingSpec {
                c,
                p: fc.p,
                delta: fc.delta,
                epsilon,
            },
            &domain,
        )?;
        let sol = solve_dirichlet(&a, &f, &settings)?;
        let factors = lift_solution(&sol.u, &domain)?;
        let (b1, k1) = laplacian_comparison(&factors.u_w, &slice)?;
        let needed = c_threshold(&slice, k1);
        if c > needed || fc.c != Choice::Auto {
            break (epsilon, norm, f, sol, k1, b1);
        }
        if rounds >= MAX_C_ROUNDS {
            return Err(Error::Certificate(format!(
                "C selection did not settle after {MAX_C_ROUNDS} rounds (C = {c}, K1 = {k1})"
            )));
        }
        c = select_c(&slice, k1);
    };
    let eta_prime = dtt_monitor(&sol.u, &domain, epsilon)?;
    let needed = c_threshold(&slice, k1);
    if !(c > needed) {
        report
            .flags
            .push(format!("C = {c} does not exceed the required {needed:.6e}"));
    }
    if fc.epsilon != Choice::Auto && !(forcing_norm < fc.delta) {
        report.flags.push(format!(
            "||F||_{} = {forcing_norm:.6e} is not below delta = {}",
            fc.p, fc.delta
        ));
    }
    if !(sol.c1 < 1.0) {
        report
            .flags
            .push(format!("c1(u) = {:.6e} is not below 1", sol.c1));
    }
    if !(eta_prime < 0.25) {
        report
            .flags
            .push(format!("eta' = {eta_prime:.6e} is not below 1/4"));
    }
    report.solve = Some(SolveSection {
        c,
        c_rounds: rounds,
        epsilon,
        forcing_norm,
        symbol_margin: a.symbol_margin,
        stats: sol.stats.clone(),
        c1: sol.c1,
        min_u: sol.u.min(),
        mms_error: mms.error_inf,
        eta_prime,
        k1,
    });
    if stage == Stage::Solve {
        fields.u = Some(sol.u);
        return Ok(RunOutcome {
            report,
            fields,
            wall_time: start.elapsed(),
        });
    }

    let factors = lift_solution(&sol.u, &domain)?;
    let k2 = k2_field(&factors, &slice)?;
    let slice_identity_residual = slice_laplacian_identity(&factors, &slice, &domain)?;
    let cert = certificate(
        &factors,
        &slice,
        &domain,
        &BoundInputs {
            forcing: &f,
            b1: &b1,
            k1,
            k2: &k2,
            eta_prime,
            c,
            residual_inf: sol.residual_inf,
            residual_tolerance: settings.tolerance,
            tolerance,
        },
    )?;
    let s = cert.summary;
    if !s.k2_below_one {
        report
            .flags
            .push(format!("max |K2| = {:.6e} is not below 1", cert.k2_max));
    }
    if !s.chain_within_tolerance {
        report.flags.push(format!(
            "|R_chain - R_exact| = {:.6e} exceeds tolerance {:.6e}",
            s.chain_error, s.tolerance
        ));
    }
    if !s.bound_sound {
        report
            .flags
            .push("R_bound exceeds R_chain + tolerance somewhere".into());
    }
    report.verdict = Some(s.verdict);
    report.certificate = Some(CertificateSection {
        k2_max: cert.k2_max,
        slice_identity_residual,
        summary: s,
    });
    fields.u = Some(sol.u);
    fields.r_exact = Some(cert.r_exact);
    fields.r_chain = Some(cert.r_chain);
    fields.r_bound = Some(cert.r_bound);
    Ok(RunOutcome {
        report,
        fields,
        wall_time: start.elapsed(),
    })
}
