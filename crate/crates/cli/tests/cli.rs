use std::fs;
use std::path::Path;
use std::process::Command;

use rte_cli::commands::{bench, compare_runs, compare_sym, error_ladder_fields, normalized_cpu, solve};
use rte_cli::config::Config;
use rte_cli::CliError;
use rte_core::meshgen::box_mesh;
use rte_core::scenario::{kobayashi, spacing_for_vertices, KobayashiTest, Variant};
use rte_core::{Vec3, VolumeMesh};

fn rte(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rte")).args(args).output().unwrap()
}

fn small(name: &str, dir: &Path) -> Config {
    let mut c = Config::builtin(name);
    c.scenario.vertices = 300;
    c.output.dir = dir.to_path_buf();
    c
}

#[test]
fn missing_mesh_exits_with_code_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let missing = dir.path().join("nowhere.tet");
    fs::write(
        &cfg,
        format!(
            "[scenario]\nvolume_mesh = {:?}\nsurface_mesh = {:?}\n\n[[bands]]\nlo = 0.0\nhi = inf\n\n[[regions]]\ntag = 1\nkappa = [0.1]\n\n[[boundary]]\nlabel = 1\nq0 = [0.1]\n",
            missing.display().to_string(),
            dir.path().join("s.tri").display().to_string()
        ),
    )
    .unwrap();
    let out = rte(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing.display().to_string()));

    let out = rte(&["solve", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_settings_are_listed_together() {
    let out = rte(&["solve", "--scenario", "kobayashi-test7", "--eta=-1", "--eps=0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["kobayashi-test7", "hmatrix.eta", "hmatrix.eps"] {
        assert!(err.contains(needle), "{err}");
    }
}

#[test]
fn builtin_solve_writes_fields_trace_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let out = rte(&[
        "solve",
        "--scenario",
        "kobayashi-test1",
        "--vertices",
        "300",
        "--workers",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["field.vtk", "field.csv", "trace.csv", "probe_x_y25_z25.csv", "probe_y_x5_z5.csv", "config.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let probe = fs::read_to_string(dir.path().join("probe_y_x5_z5.csv")).unwrap();
    assert_eq!(probe.lines().count(), 102);
    assert!(probe.lines().nth(50).unwrap().split(',').nth(4).unwrap().parse::<f64>().unwrap() > 0.0);
}

#[test]
fn effective_config_reproduces_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = small("kobayashi-test3", a.path());
    solve(&first).unwrap();
    let mut again = Config::load(&a.path().join("config.toml")).unwrap();
    assert_eq!(again, first);
    again.output.dir = b.path().to_path_buf();
    solve(&again).unwrap();
    for f in ["field.csv", "probe_x_y25_z25.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn mesh_files_give_the_same_answer_as_the_builtin_problem() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = small("kobayashi-test1", &dir.path().join("a"));
    let sc = builtin.scenario().unwrap();
    fs::write(dir.path().join("v.tet"), sc.volume.to_text()).unwrap();
    fs::write(dir.path().join("s.tri"), sc.surface.to_text()).unwrap();
    let text = format!(
        r#"
[scenario]
volume_mesh = {:?}
surface_mesh = {:?}

[[bands]]
lo = 0.0
hi = inf

[[regions]]
tag = 1
kappa = [0.1]

[[boundary]]
label = 1
q0 = [0.1]

[[boundary]]
label = 10
reflector = {{ point = [0.0, 0.0, 0.0], normal = [-1.0, 0.0, 0.0], r0 = 1.0 }}

[output]
dir = {:?}
"#,
        dir.path().join("v.tet").display().to_string(),
        dir.path().join("s.tri").display().to_string(),
        dir.path().join("b").display().to_string(),
    );
    let from_files = Config::from_toml(&text).unwrap();
    let (x, y) = (solve(&builtin).unwrap(), solve(&from_files).unwrap());
    let scale = x.state.t.iter().fold(0.0f64, |m, v| m.max(*v));
    for (p, q) in x.state.t.iter().zip(&y.state.t) {
        assert!((p - q).abs() <= 1e-12 * scale);
    }
}

#[test]
fn bench_reports_one_finite_row_per_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("kobayashi-test3", dir.path());
    c.ladder.vertices = vec![200, 400];
    let rows = bench(&c).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].vertices < rows[1].vertices);
    for r in &rows {
        assert!(r.normalized.is_finite() && r.normalized > 0.0);
        assert!((0.0..1.0).contains(&r.volume_cl));
    }
    let tsv = fs::read_to_string(dir.path().join("bench.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3);
    c.ladder.vertices = vec![200];
    assert!(matches!(bench(&c), Err(CliError::Invalid(_))));
}

#[test]
fn normalized_cpu_formula() {
    let n = 1000usize;
    let want = 1e5 * 2.0 / (1000.0 * 10.0 * 1000f64.ln());
    assert!((normalized_cpu(2.0, n) - want).abs() < 1e-12 * want);
}

#[test]
fn compare_with_zero_reflectance_and_the_original_domain_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let c = small("kobayashi-test1", dir.path());
    let mut rc = c.scenario().unwrap();
    rc.reflectors[0].r0 = 0.0;
    let mut plain = rc.clone();
    plain.reflectors.clear();
    let report = compare_runs(rc, plain.clone(), plain, &c).unwrap();
    assert!(report.reflective <= 1e-14, "{}", report.reflective);
    assert!(report.no_reflection <= 1e-14);
    assert_eq!(report.probes.len(), 2);
}

#[test]
fn compare_needs_exactly_one_reflector() {
    let dir = tempfile::tempdir().unwrap();
    let err = compare_sym(&small("kobayashi-test3", dir.path())).unwrap_err();
    assert!(err.to_string().contains("exactly one reflector"));
}

#[test]
fn error_ladder_rejects_repeated_meshes() {
    let m = box_mesh(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), [2, 2, 2]);
    let m2 = box_mesh(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), [4, 4, 4]);
    let f = vec![1.0; m.num_vertices()];
    let f2 = vec![1.0; m2.num_vertices()];
    let err = error_ladder_fields(&[(&m, &f), (&m, &f), (&m2, &f2)]).unwrap_err();
    assert!(err.to_string().contains("distinct"));
    assert!(error_ladder_fields(&[(&m, &f), (&m2, &f2)]).is_err());
}

#[test]
fn interpolation_error_of_a_smooth_field_falls_like_h_squared() {
    let f = |p: Vec3| (2.0 * p.x).sin() * (1.5 * p.y).cos() * p.z.exp();
    let meshes: Vec<VolumeMesh> =
        [3, 6, 12, 48].iter().map(|&n| box_mesh(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), [n, n, n])).collect();
    let fields: Vec<Vec<f64>> = meshes.iter().map(|m| m.vertices.iter().map(|&p| f(p)).collect()).collect();
    let pairs: Vec<(&VolumeMesh, &[f64])> = meshes.iter().zip(&fields).map(|(m, v)| (m, v.as_slice())).collect();
    // the finest mesh is the reference, so it must be much finer than the rest
    let report = error_ladder_fields(&pairs).unwrap();
    assert_eq!(report.rows.len(), 3);
    // interpolation error goes as (1/n)², while the ladder's h is N^(-1/3) = 1/(n+1)
    let expected = rte_cli::output::loglog_slope(&[3.0f64, 6.0, 12.0].map(|n| (1.0 / (n + 1.0), 1.0 / (n * n))));
    assert!((report.slope - expected).abs() <= 0.1, "{} vs {expected}", report.slope);
}

#[test]
fn ladder_spacing_tracks_the_requested_size() {
    for n in [300, 1000] {
        let sc = kobayashi(KobayashiTest::Test3, spacing_for_vertices(n), Variant::Reflective);
        let got = sc.volume.num_vertices() as f64;
        assert!((got / n as f64 - 1.0).abs() < 0.5, "{n}: {got}");
    }
}
