use std::path::{Path, PathBuf};

use proptest::prelude::*;
use pscslice_core::metric::builtin::TwistedFlat;
use pscslice_core::report::{from_json, to_json, to_text};
use pscslice_core::{
    build_domain, parse_config, parse_config_str, run_scenario, scalar_curvature, CurvatureBundle,
    MetricField, RunConfig, ScalarField, Stage,
};

const TWISTED: &str = "[domain]\nresolution = 8\nt_nodes = 33\n[metric]\nkind = twisted_flat\nc = 0.5\n[forcing]\nepsilon = 0.5\n";

const SPHERE: &str = "[domain]\nbackend = sphere-axisym\nresolution = 16\nt_nodes = 65\n\
[metric]\nkind = sphere_product\nr = 1.0\n[forcing]\ndelta = 8.0\n";

fn config(text: &str) -> RunConfig {
    parse_config_str(Path::new("test.ini"), text).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn report_survives_json_round_trip() {
    let r = run_scenario(&config(SPHERE), Stage::Certify)
        .unwrap()
        .report;
    let a = to_json(&r).unwrap();
    let back = from_json(&a).unwrap();
    assert_eq!(to_json(&back).unwrap(), a);
    assert_eq!(back.verdict, Some(true));
    assert_eq!(back.config, r.config);
}

#[test]
fn stages_stop_where_asked() {
    let c = config(TWISTED);
    let a = run_scenario(&c, Stage::CheckAngle).unwrap().report;
    assert!(a.solve.is_none() && a.certificate.is_none() && a.verdict.is_none());
    let s = run_scenario(&c, Stage::Solve).unwrap().report;
    assert!(s.solve.is_some() && s.certificate.is_none());
    let t = to_text(&s).unwrap();
    assert!(t.contains("solve.c1 = "));
}

#[test]
fn slice_position_is_irrelevant_for_circle_invariant_metrics() {
    let base = run_scenario(&config(SPHERE), Stage::Certify)
        .unwrap()
        .report;
    let moved = config(&format!("{SPHERE}[slice]\np = 1.3\n"));
    let other = run_scenario(&moved, Stage::Certify).unwrap().report;
    let (a, b) = (
        base.certificate.unwrap().summary,
        other.certificate.unwrap().summary,
    );
    assert_eq!(a.min_r_exact, b.min_r_exact);
    assert_eq!(a.min_r_bound, b.min_r_bound);
    assert_eq!(base.verdict, other.verdict);
}

#[test]
fn csv_metric_matches_builtin() {
    let dir = scratch("csv_metric");
    let spec = config(TWISTED).domain;
    let domain = build_domain(&spec).unwrap();
    let h = MetricField::from_analytic(&TwistedFlat::new(2, 0.5), domain.x_grid(), 0.0).unwrap();
    let names: Vec<String> = h.chart().coords().iter().map(|c| c.name.clone()).collect();
    let d = names.len();
    let mut body = String::new();
    let mut header = vec![];
    for i in 0..d {
        for k in i..d {
            header.push(format!("h_{}_{}", names[i], names[k]));
        }
    }
    body += &header.join(",");
    body.push('\n');
    for jet in h.jets() {
        let row: Vec<String> = (0..d)
            .flat_map(|i| (i..d).map(move |k| (i, k)))
            .map(|(i, k)| jet.g(i, k).to_string())
            .collect();
        body += &row.join(",");
        body.push('\n');
    }
    std::fs::write(dir.join("h.csv"), body).unwrap();
    let ini = dir.join("csv.ini");
    std::fs::write(
        &ini,
        "[domain]\nresolution = 8\nt_nodes = 33\n[metric]\nkind = csv\nfile = h.csv\n[forcing]\nepsilon = 0.5\n",
    )
    .unwrap();
    let from_csv = run_scenario(&parse_config(&ini).unwrap(), Stage::Certify)
        .unwrap()
        .report;
    let builtin = run_scenario(&config(TWISTED), Stage::Certify)
        .unwrap()
        .report;
    assert!((from_csv.angle.max_angle - builtin.angle.max_angle).abs() < 1e-12);
    assert!((from_csv.min_r_h - builtin.min_r_h).abs() < 1e-12);
    assert_eq!(from_csv.verdict, builtin.verdict);
    let (a, b) = (from_csv.solve.unwrap(), builtin.solve.unwrap());
    assert!((a.c - b.c).abs() < 1e-10 && (a.c1 - b.c1).abs() < 1e-8 * b.c1);
}

#[test]
fn csv_metric_with_wrong_header_is_a_config_error() {
    let dir = scratch("csv_bad");
    std::fs::write(dir.join("h.csv"), "a,b\n1,2\n").unwrap();
    let ini = dir.join("bad.ini");
    std::fs::write(
        &ini,
        "[domain]\nresolution = 8\nt_nodes = 9\n[metric]\nkind = csv\nfile = h.csv\n",
    )
    .unwrap();
    let e = run_scenario(&parse_config(&ini).unwrap(), Stage::CheckAngle).unwrap_err();
    assert_eq!(e.exit_code(), 4);
    assert!(e.to_string().contains("header"));
}

#[test]
fn unknown_key_reports_its_line() {
    let e = parse_config_str(
        Path::new("x.ini"),
        "[domain]\nresolution = 8\n[metric]\nkind = twisted_flat\ncc = 1\n",
    )
    .unwrap_err();
    assert_eq!(e.exit_code(), 4);
    assert!(e.to_string().starts_with("config x.ini:5:"), "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// A constant conformal factor only rescales the curvature.
    #[test]
    fn constant_conformal_factor_scales_curvature(phi in -1.0f64..1.0, r in 0.5f64..3.0) {
        let d = build_domain(&config(SPHERE).domain).unwrap();
        let h = MetricField::from_analytic(&pscslice_core::metric::builtin::SphereProduct::new(r), d.x_grid(), 0.0)
            .unwrap()
            .restrict(&["rho", "psi"])
            .unwrap();
        let b = CurvatureBundle::new(&h).unwrap();
        let f = ScalarField::constant(h.grid(), phi);
        let got = pscslice_core::conformal::conformal_scalar(&b, &f, 2).unwrap();
        let direct = scalar_curvature(&h).unwrap();
        for (g, r0) in got.values().iter().zip(direct.values()) {
            prop_assert!((g - (-2.0 * phi).exp() * r0).abs() < 1e-9 * (1.0 + r0.abs()));
        }
    }
}
