use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FOOTPRINT: &str = r#"{"id": "box", "crs": "local-metres", "ring": [[0, 0], [20, 0], [20, 20], [0, 20]]}"#;
const HEADER: &str = "timestamp,x,y,alt,azimuth,elevation,cn0,sat_id,truth_label";

fn gnssmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnssmap")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Simulates the default scene into `dir`.
fn simulate(dir: &Path, seed: &str) {
    let out = gnssmap(&["simulate", "--seed", seed, "--out", path(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Planar observation CSV of receivers west of the box looking east, one
/// row per `(cn0, truth)` pair.
fn write_obs(p: &Path, rows: &[(Option<f64>, Option<&str>)]) {
    let mut text = format!("{HEADER}\n");
    for (i, (cn0, truth)) in rows.iter().enumerate() {
        let y = 1.0 + (i % 18) as f64;
        let el = 10.0 + (i % 70) as f64;
        let cn0 = cn0.map(|v| v.to_string()).unwrap_or_default();
        text += &format!("{},-10,{y},1,90,{el},{cn0},G{:02},{}\n", i / 18, i % 18 + 1, truth.unwrap_or(""));
    }
    fs::write(p, text).unwrap();
}

#[test]
fn estimate_on_simulated_scene_reports_range_identity() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "7");
    let est_dir = dir.path().join("est");
    let out = gnssmap(&[
        "estimate",
        "--obs",
        path(&dir.path().join("observations.csv")),
        "--footprint",
        path(&dir.path().join("footprint.json")),
        "--algo",
        "4plb",
        "--out",
        path(&est_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&est_dir.join("estimate.json"));
    let b = v["map_params"]["b"].as_f64().unwrap();
    let width = v["range_high"].as_f64().unwrap() - v["range_low"].as_f64().unwrap();
    assert!((width - 3.0 / b).abs() < 1e-9);
    assert_eq!(v["algorithm"], "4plb");
    assert!(fs::read_to_string(est_dir.join("summary.txt")).unwrap().contains("height"));
}

#[test]
fn every_algorithm_runs_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "8");
    for algo in ["4pl", "hinge", "bayes"] {
        let out = gnssmap(&[
            "estimate",
            "--obs",
            path(&dir.path().join("observations.csv")),
            "--footprint",
            path(&dir.path().join("footprint.json")),
            "--algo",
            algo,
        ]);
        assert_eq!(out.status.code(), Some(0), "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(v["point"].as_f64().unwrap().is_finite());
    }
}

#[test]
fn all_blocked_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    write_obs(&obs, &vec![(None, None); 40]);
    let fp = dir.path().join("fp.json");
    fs::write(&fp, FOOTPRINT).unwrap();
    let out = gnssmap(&["estimate", "--obs", path(&obs), "--footprint", path(&fp)]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["stop_reason"], "degenerate");
    assert!(v["failure"].as_str().unwrap().contains("same label"));
}

#[test]
fn missing_footprint_exits_one_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    write_obs(&obs, &[(Some(40.0), None)]);
    let out = gnssmap(&["estimate", "--obs", path(&obs), "--footprint", path(&dir.path().join("none.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest:"));

    let out = gnssmap(&["estimate", "--obs", path(&obs)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic_and_sized_by_scene() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"scene": {"epochs_per_site": 20, "satellite_sampler": {"count_per_epoch": 5}}}"#).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = gnssmap(&["simulate", "--config", path(&cfg), "--seed", "99", "--out", path(d)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["observations.csv", "truth.json", "footprint.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let lines = fs::read_to_string(a.join("observations.csv")).unwrap().lines().count();
    assert_eq!(lines - 1, 3 * 20 * 5);
    assert_eq!(read_json(&a.join("truth.json"))["seed"], 99);
}

#[test]
fn unseeded_simulate_prints_a_reusable_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"scene": {"epochs_per_site": 4}}"#).unwrap();
    let a = dir.path().join("a");
    let out = gnssmap(&["simulate", "--config", path(&cfg), "--out", path(&a)]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let seed = stdout.lines().find_map(|l| l.strip_prefix("seed: ")).unwrap().to_string();
    let b = dir.path().join("b");
    assert!(gnssmap(&["simulate", "--config", path(&cfg), "--seed", &seed, "--out", path(&b)]).status.success());
    assert_eq!(fs::read(a.join("observations.csv")).unwrap(), fs::read(b.join("observations.csv")).unwrap());
}

#[test]
fn sweep_writes_table_summary_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "3");
    let out_dir = dir.path().join("sweep");
    let out = gnssmap(&[
        "sweep",
        "--obs",
        path(&dir.path().join("observations.csv")),
        "--footprint",
        path(&dir.path().join("footprint.json")),
        "--sweep-c-min",
        "20",
        "--sweep-c-max",
        "39",
        "--truth-height",
        "20",
        "--out",
        path(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let mut rdr = csv::Reader::from_path(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 80);

    let envelope = read_json(&out_dir.join("sweep.json"));
    for s in envelope["summary"].as_array().unwrap() {
        let algo = s["algorithm"].as_str().unwrap();
        let points: Vec<f64> = rows
            .iter()
            .filter(|r| &r[1] == algo && &r[2] == "true" && !r[3].is_empty())
            .map(|r| r[3].parse().unwrap())
            .collect();
        let rmse = (points.iter().map(|p| (p - 20.0f64).powi(2)).sum::<f64>() / points.len() as f64).sqrt();
        assert!((rmse - s["rmse"].as_f64().unwrap()).abs() < 1e-9, "{algo}");
        assert_eq!(s["converged"].as_u64().unwrap() as usize, points.len());
    }

    let svg = fs::read_to_string(out_dir.join("sweep.svg")).unwrap();
    assert_eq!(svg.matches("class=\"series\"").count(), 4);
    assert_eq!(svg.matches("class=\"truth\"").count(), 1);
}

fn fit_classifier(rows: &[(Option<f64>, Option<&str>)]) -> (Option<i32>, Value) {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    write_obs(&obs, rows);
    let fp = dir.path().join("fp.json");
    fs::write(&fp, FOOTPRINT).unwrap();
    let out = gnssmap(&["fit-classifier", "--obs", path(&obs), "--footprint", path(&fp)]);
    (out.status.code(), serde_json::from_slice(&out.stdout).unwrap())
}

#[test]
fn classifier_explains_nothing_when_labels_ignore_signal() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<(Option<f64>, Option<&str>)> = (0..10_000)
        .map(|_| {
            let cn0 = rng.random_range(15.0..50.0);
            (Some(cn0), Some(if rng.random_bool(0.5) { "open" } else { "closed" }))
        })
        .collect();
    let (_, v) = fit_classifier(&rows);
    assert_eq!(v["training_tuples"], 10_000);
    let r2 = v["mcfadden_r2"].as_f64().unwrap();
    assert!((0.0..0.02).contains(&r2), "{r2}");
}

#[test]
fn classifier_separates_clean_labels_and_tabulates_consistently() {
    let mut rows: Vec<(Option<f64>, Option<&str>)> = (0..200)
        .map(|i| {
            let cn0 = 15.0 + (i % 40) as f64 * 0.8;
            (Some(cn0), Some(if cn0 > 30.0 { "open" } else { "closed" }))
        })
        .collect();
    rows.extend([(None, Some("closed")); 12]);
    rows.push((Some(40.0), None));
    let (_, v) = fit_classifier(&rows);
    assert!(v["mcfadden_r2"].as_f64().unwrap() > 0.99);

    let open: Vec<u64> = v["confusion"]["predicted_open"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let closed: Vec<u64> =
        v["confusion"]["predicted_closed"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let truth_open = rows.iter().filter(|r| r.1 == Some("open")).count() as u64;
    let truth_closed = rows.iter().filter(|r| r.1 == Some("closed")).count() as u64;
    assert_eq!(open[0] + closed[0], truth_open);
    assert_eq!(open[1] + closed[1], truth_closed);
    assert_eq!(open[2] + closed[2], 0);
    assert_eq!(open.iter().sum::<u64>() + closed.iter().sum::<u64>(), truth_open + truth_closed);
    // blocked rows can only be predicted closed
    assert!(closed[1] >= 12);
}
