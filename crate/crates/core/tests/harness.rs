use hodgelab::error::Error;
use hodgelab::harness::*;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hodgelab"))
}

#[test]
fn config_defaults() {
    let cfg = parse_config("scenario = elliptic-neg-d1\n").unwrap();
    assert_eq!(cfg.grid_size, 32);
    assert_eq!(cfg.h, 1e-2);
    assert_eq!(cfg.base_grid, 21);
    assert_eq!(cfg.pairs, 20);
    assert_eq!(cfg.directions, 9);
    assert!(cfg.perturbation.is_none());
}

#[test]
fn config_rejects_odd_grid() {
    let e = parse_config("scenario = elliptic-neg-d1\nN = 7\n").unwrap_err();
    assert!(e.to_string().contains("grid_size must be even, ≥ 8"), "{e}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn config_parses_quoted_perturbation() {
    let cfg = parse_config("scenario = elliptic-neg-d1  # comment\nperturbation = \"0.1*cos(2*pi*re(z))*im(t)\"\n").unwrap();
    let (text, ex) = cfg.perturbation.unwrap();
    assert_eq!(text, "0.1*cos(2*pi*re(z))*im(t)");
    assert_eq!(ex.depth(), 4);
}

#[test]
fn config_errors_carry_positions() {
    match parse_config("scenario = elliptic-cy\n\nfoo = 1\n") {
        Err(Error::ConfigParse { line, column, .. }) => assert_eq!((line, column), (3, 1)),
        other => panic!("{other:?}"),
    }
    match parse_config("scenario = elliptic-cy\nh = abc\n") {
        Err(Error::ConfigParse { line, column, .. }) => assert_eq!((line, column), (2, 5)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_config("scenario = elliptic-cy\nperturbation = t\n"), Err(Error::ConfigParse { .. })));
    assert!(matches!(parse_config("scenario = elliptic-cy\nh = 1\nh = 2\n"), Err(Error::ConfigParse { .. })));
    assert!(matches!(parse_config("N = 16\n"), Err(Error::ConfigValue { .. })));
    let e = parse_config("scenario = nope\n").unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("scenario not found"), "{e}");
}

#[test]
fn fit_order_recovers_power_laws() {
    let xs = [0.04, 0.02, 0.01];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
    let (p, r2) = fit_order(&xs, &ys).unwrap();
    assert!((p - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    assert!(fit_order(&[1.0], &[1.0]).is_none());
}

#[test]
fn sweep_needs_three_levels() {
    let cfg = RunConfig::new("elliptic-neg-d1");
    assert!(matches!(convergence_sweep(&cfg, SweepParam::H, 1), Err(Error::Precondition(_))));
}

#[test]
fn h_sweep_is_second_order() {
    let mut cfg = RunConfig::new("elliptic-neg-d1");
    cfg.grid_size = 16;
    let t = convergence_sweep(&cfg, SweepParam::H, 3).unwrap();
    let hs: Vec<f64> = t.levels.iter().map(|l| l.value).collect();
    assert_eq!(hs, [4e-2, 2e-2, 1e-2]);
    let p = t.order.unwrap();
    assert!((p - 2.0).abs() <= 0.3, "order {p}");
    assert!(t.monotone && t.r2.unwrap() > 0.99);
}

#[test]
fn flat_n_sweep_sits_at_the_rounding_floor() {
    let cfg = RunConfig::new("elliptic-cy");
    let t = convergence_sweep(&cfg, SweepParam::N, 3).unwrap();
    assert!(t.at_floor, "{:?}", t.levels);
    assert!(t.order.is_none());
}

#[test]
fn stencil_step_is_capped_near_the_degeneration() {
    let cfg = RunConfig::new("elliptic-degenerate");
    let scn = cfg.build_scenario("elliptic-degenerate").unwrap();
    assert!(stencil_step(&scn, 1e-2) < 1e-2);
    let scn = cfg.build_scenario("elliptic-cy").unwrap();
    assert_eq!(stencil_step(&scn, 1e-2), 1e-2);
}

#[test]
fn summaries_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new("elliptic-cy");
    cfg.grid_size = 16;
    cfg.pairs = 3;
    cfg.base_grid = 9;
    cfg.out = dir.path().to_path_buf();
    let read = || {
        let out = run_suite(&cfg, Pipeline::All).unwrap();
        assert_eq!(out.summary.exit_code, 0, "{:#?}", out.summary.scenarios[0].checks);
        (std::fs::read(dir.path().join("summary.json")).unwrap(), std::fs::read(dir.path().join("cascade.csv")).unwrap())
    };
    let a = read();
    let b = read();
    assert!(a == b, "summary or cascade table changed between identical runs");
}

#[test]
fn finsler_on_a_line_bundle_family_is_a_regime_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new("elliptic-neg-d1");
    cfg.grid_size = 16;
    cfg.out = dir.path().to_path_buf();
    let out = run_suite(&cfg, Pipeline::Finsler).unwrap();
    assert_eq!(out.summary.exit_code, 3);
    assert!(out.summary.scenarios[0].error.is_some());
}

#[test]
fn isotrivial_curvature_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new("isotrivial-flat");
    cfg.grid_size = 16;
    cfg.out = dir.path().to_path_buf();
    let out = run_suite(&cfg, Pipeline::Curvature).unwrap();
    let sc = &out.summary.scenarios[0];
    assert_eq!(out.summary.exit_code, 0);
    for r in &sc.curvature.as_ref().unwrap().reports {
        assert!(r.analytic_total.abs() <= 1e-8 && r.fd_total.abs() <= 1e-8, "{r:?}");
    }
    let csv = std::fs::read_to_string(dir.path().join("curvature.csv")).unwrap();
    assert!(csv.lines().count() >= 3);
}

#[test]
fn cli_catalog_lists_every_scenario() {
    let out = bin().args(["catalog", "--json"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    for id in ["isotrivial-flat", "elliptic-cy", "elliptic-neg-d1", "elliptic-pos-d1", "abelian-surface-flat", "elliptic-degenerate"] {
        assert!(ids.contains(&id), "{id}");
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "scenario = nope\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario not found"));

    let good = dir.path().join("good.conf");
    std::fs::write(&good, format!("scenario = elliptic-cy\nN = 16\nout = \"{}\"\n", dir.path().join("o").display())).unwrap();
    let out = bin().args(["sweep", "--param", "h", "--levels", "1", "--config"]).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "--pipeline", "identities", "--config"]).arg(&good).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("o/summary.json").exists());
    assert!(dir.path().join("o/spectrum.csv").exists());
}

#[test]
fn degree_override_must_match_the_regime() {
    let cfg = parse_config("scenario = elliptic-neg-d1\ndegree = -3\n").unwrap();
    assert_eq!(cfg.build_scenario("elliptic-neg-d1").unwrap().degree, -3);
    let cfg = parse_config("scenario = elliptic-neg-d1\ndegree = 3\n").unwrap();
    assert!(matches!(cfg.build_scenario("elliptic-neg-d1"), Err(Error::ConfigValue { .. })));
    let cfg = parse_config("scenario = elliptic-cy\ndegree = -1\n").unwrap();
    assert!(cfg.build_scenario("elliptic-cy").is_err());
}
