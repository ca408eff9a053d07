//! End-to-end runs of the `specgeom` binary: experiment configs, artifact
//! round trips, determinism, and designed failures.

use std::path::Path;
use std::process::{Command, Output};

fn specgeom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specgeom"))
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn cantor_dims_config_recovers_hausdorff_dimension() {
    let out = tempfile::tempdir().unwrap();
    let res = specgeom(&[
        "--out",
        out.path().to_str().unwrap(),
        "run",
        "--config",
        "fixtures/cantor_dims.toml",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["spectral_report.json", "box_report.json"] {
        let report: serde_json::Value = serde_json::from_str(&read(out.path(), name)).unwrap();
        let slope = report["slope"].as_f64().unwrap();
        let reference = 3.0f64.log2();
        assert!(
            (slope - reference).abs() <= 0.15,
            "{name}: slope {slope} vs {reference}"
        );
    }
}

#[test]
fn multiscale_checks_pass_and_artifacts_round_trip() {
    let out = tempfile::tempdir().unwrap();
    let res = specgeom(&[
        "--out",
        out.path().to_str().unwrap(),
        "run",
        "--config",
        "fixtures/multiscale_checks.toml",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("density PASS"), "{stdout}");
    assert!(stdout.contains("bounds-check PASS"), "{stdout}");

    // every written artifact loads through its module loader
    let space: specgeom::Space =
        specgeom::spaces::load_space(&out.path().join("space.csv")).unwrap();
    let support: specgeom::Support =
        specgeom::support::load_support(&out.path().join("support.csv")).unwrap();
    assert_eq!(support.n_points(), space.n());
    let spectrum =
        specgeom::deformation::load_spectrum(&support, &out.path().join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.len(), support.len());
    let metric: specgeom::Metric =
        specgeom::connes::load_metric(&out.path().join("metric.csv")).unwrap();
    assert!(metric.connected);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(out.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["checks"]["connes"], serde_json::json!(true));
    assert_eq!(manifest["checks"]["deform-convergence"], serde_json::json!(true));
}

#[test]
fn rerun_is_byte_identical_modulo_timestamp() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let res = specgeom(&[
            "--out",
            dir.path().to_str().unwrap(),
            "--threads",
            if dir.path() == a.path() { "1" } else { "4" },
            "run",
            "--config",
            "fixtures/multiscale_checks.toml",
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 7, "{names:?}");
    for name in names {
        let (x, y) = (read(a.path(), &name), read(b.path(), &name));
        if name == "manifest.json" {
            let strip = |s: &str| -> String {
                s.lines().filter(|l| !l.contains("\"timestamp\"")).collect()
            };
            assert_eq!(strip(&x), strip(&y), "{name} differs");
        } else {
            assert_eq!(x, y, "{name} differs");
        }
    }
}

#[test]
fn connes_on_disconnected_support_fails_with_named_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    // 4 points on a line, support = two disjoint edges
    let coords = [0.0f64, 1.0, 3.0, 4.5];
    let n = coords.len();
    let dist: Vec<f64> = (0..n * n)
        .map(|k| (coords[k / n] - coords[k % n]).abs())
        .collect();
    let space = specgeom::Space::from_matrix(n, dist, None, 0.0).unwrap();
    let support =
        specgeom::Support::from_unordered_pairs(&space, [(0, 1), (2, 3)]).unwrap();
    specgeom::spaces::save_space(&space, &dir.path().join("space.csv")).unwrap();
    specgeom::support::save_support(&support, &dir.path().join("support.csv")).unwrap();
    let config = format!(
        "analysis = [\"connes\"]\n\n\
         [space]\ngenerator = \"file\"\npath = {space:?}\n\n\
         [support]\nmethod = \"file\"\npath = {support:?}\n",
        space = dir.path().join("space.csv"),
        support = dir.path().join("support.csv"),
    );
    let cfg_path = dir.path().join("config.toml");
    std::fs::write(&cfg_path, config).unwrap();
    let res = specgeom(&[
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "run",
        "--config",
        cfg_path.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["module"], "connes");
    assert!(err["error"].as_str().unwrap().contains("connected"), "{err}");
}

#[test]
fn verify_rejects_unknown_suite() {
    let res = specgeom(&["verify", "nonsense"]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["module"], "verify");
}

#[test]
fn verify_perturb_suite_passes() {
    let res = specgeom(&["verify", "perturb"]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("C8 PASS"), "{stdout}");
}
