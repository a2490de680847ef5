use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use respira::dataset::{load_manifest, load_trial, BreathingType};

fn respira(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_respira"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = respira(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a cohort spec and generates it under `dir/data`.
fn generate(dir: &Path, spec: &str) -> PathBuf {
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, spec).unwrap();
    let data = dir.join("data");
    ok(&["generate", "--spec", p(&spec_path), "--out", p(&data)]);
    data.join("manifest.json")
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn polylines(svg_path: &Path) -> usize {
    let text = fs::read_to_string(svg_path).unwrap();
    let doc = roxmltree::Document::parse(&text).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    doc.descendants().filter(|n| n.has_tag_name("polyline")).count()
}

#[test]
fn generate_default_cohort_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["generate", "--out", p(&a)]);
    ok(&["generate", "--out", p(&b)]);
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta, tb);
    let m = load_manifest(a.join("manifest.json")).unwrap();
    assert_eq!(m.entries.len(), 90);

    let csv = ok(&["br", "--input", p(&a.join("manifest.json"))]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "trial_id,pressure_bpm,flow_bpm,tidal_volume_bpm,consensus_bpm,max_pairwise_diff_bpm");
    assert_eq!(lines.len(), 91);
}

#[test]
fn generate_into_unwritable_location_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = respira(&["generate", "--out", p(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn br_reports_the_generating_rate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate(
        dir.path(),
        r#"{"n_subjects": 2, "frequency_jitter": 0.0, "noise_std_fraction": 0.0,
            "normal": {"frequency_hz": 0.25, "amplitude_l": 0.5, "duration_s": 65.0}}"#,
    );
    let spectra = dir.path().join("spectra");
    let csv = ok(&["br", "--input", p(&manifest), "--type", "normal", "--dump-spectrum", p(&spectra)]);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let consensus: f64 = cells[4].parse().unwrap();
        assert!((consensus - 15.0).abs() <= 0.2, "{row}");
    }
    assert_eq!(fs::read_dir(&spectra).unwrap().count(), 6);

    let single = ok(&["br", "--input", p(&manifest), "--trial", "S01_deep"]);
    assert_eq!(single.lines().count(), 2);
    let none = respira(&["br", "--input", p(&manifest), "--subject", "nobody"]);
    assert_eq!(none.status.code(), Some(2));
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_report_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate(dir.path(), r#"{"n_subjects": 6}"#);
    let out = dir.path().join("out");
    let stdout = ok(&[
        "run", "--input", p(&manifest), "--out", p(&out), "--seed", "7", "--models", "forest,logreg",
        "--splitter", "kfold", "--k", "5",
    ]);
    assert!(stdout.contains("forest_br_kfold5"));
    let r = report(&out);
    let evals = r["evaluations"].as_array().unwrap();
    assert_eq!(evals.len(), 2);
    for e in evals {
        let acc = e["accuracy_mean"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert_eq!(e["folds"].as_array().unwrap().len(), 5);
    }

    assert_eq!(polylines(&out.join("roc_forest_normal.svg")), 1);
    assert_eq!(polylines(&out.join("vtidal_compare.svg")), 3);
    for t in BreathingType::ALL {
        assert_eq!(polylines(&out.join(format!("signals_S01_{}.svg", t.name()))), 5);
    }
    let features = fs::read_to_string(out.join("features.csv")).unwrap();
    let n_windows = r["dataset"]["n_windows"].as_u64().unwrap() as usize;
    assert_eq!(features.lines().count(), n_windows + 1);
    assert!(out.join("roc").join("logreg_br_kfold5_deep.csv").exists());
}

#[test]
fn include_br_both_pairs_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate(dir.path(), r#"{"n_subjects": 5}"#);
    let out = dir.path().join("out");
    ok(&[
        "run", "--input", p(&manifest), "--out", p(&out), "--seed", "1", "--models", "forest",
        "--include-br", "both", "--k", "4", "--group-by-subject", "--save-models",
    ]);
    let r = report(&out);
    let ids: Vec<&str> = r["evaluations"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    for want in ["forest_nobr_kfold4", "forest_br_kfold4", "forest_nobr_loso", "forest_br_loso"] {
        assert!(ids.contains(&want), "{want} missing from {ids:?}");
    }
    // One series per evaluation of that model.
    assert_eq!(polylines(&out.join("roc_forest_panting.svg")), 4);
    assert!(out.join("models").join("forest_br.json").exists());
    assert!(out.join("models").join("forest_nobr.json").exists());
}

#[test]
fn unknown_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = respira(&["run", "--input", "nowhere.json", "--out", p(&out), "--seed", "1", "--models", "forest,knn"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
    let res = respira(&["run", "--input", "nowhere.json", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2), "seed is required");
}

#[test]
fn strict_mode_fails_on_skipped_folds() {
    let dir = tempfile::tempdir().unwrap();
    // One short panting trial gives a single panting window, so the fold
    // that tests it cannot train on that class.
    let manifest = generate(
        dir.path(),
        r#"{"n_subjects": 1, "panting": {"frequency_hz": 1.5, "amplitude_l": 0.3, "duration_s": 10.5}}"#,
    );
    let args = |out: &Path, strict: bool| {
        let mut a = vec![
            "run".to_string(), "--input".into(), p(&manifest).into(), "--out".into(), p(out).into(),
            "--seed".into(), "2".into(), "--models".into(), "forest".into(),
        ];
        if strict {
            a.push("--strict".into());
        }
        a
    };
    let lenient = dir.path().join("lenient");
    let a = args(&lenient, false);
    let res = respira(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(report(&lenient)["flags"]["skipped_folds"].as_u64().unwrap() >= 1);

    let strict = dir.path().join("strict");
    let a = args(&strict, true);
    let res = respira(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(res.status.code(), Some(1));
    assert!(strict.join("report.json").exists());
}

#[test]
fn ingest_round_trips_a_foreign_table() {
    let dir = tempfile::tempdir().unwrap();
    let fs_hz = 50.0;
    let mut table = String::from("# exported\nP_kPa;Q;V_ml;RIP_c;RIP_a;mark\n");
    for i in 0..1500 {
        let t = i as f64 / fs_hz;
        let phase = 2.0 * std::f64::consts::PI * 0.3 * t;
        table.push_str(&format!(
            "{};{};{};{};{};{}\n",
            0.5 + 0.1 * phase.sin(),
            0.4 * phase.cos(),
            300.0 * (1.0 - phase.cos()),
            80.0 + phase.sin(),
            90.0 + 0.5 * phase.sin(),
            u8::from(i % 167 == 0)
        ));
    }
    let table_path = dir.path().join("rec.txt");
    fs::write(&table_path, table).unwrap();
    let mapping = r#"{
        "delimiter": ";", "skip_lines": 1,
        "channels": {
            "pressure": {"column": "P_kPa", "scale": 10.197},
            "flow": {"column": "Q"},
            "tidal_volume": {"column": "V_ml", "scale": 0.001},
            "chest_circ": {"column": "RIP_c"},
            "abdomen_circ": {"column": "RIP_a"}
        },
        "insp_marker": "mark"
    }"#;
    let mapping_path = dir.path().join("map.json");
    fs::write(&mapping_path, mapping).unwrap();
    let manifest = dir.path().join("db").join("manifest.json");
    fs::create_dir_all(manifest.parent().unwrap()).unwrap();
    let ingest = |extra: &[&str]| {
        let mut a = vec![
            "ingest", "--table", p(&table_path), "--mapping", p(&mapping_path), "--manifest", p(&manifest),
            "--subject-id", "P7", "--sex", "f", "--age", "29", "--height-cm", "165", "--weight-kg", "58",
            "--type", "normal", "--peep", "5", "--fs", "50",
        ];
        a.extend_from_slice(extra);
        respira(&a)
    };
    assert!(ingest(&[]).status.success());
    assert_eq!(ingest(&[]).status.code(), Some(2), "duplicate entry without --replace");
    assert!(ingest(&["--replace"]).status.success());

    let m = load_manifest(&manifest).unwrap();
    assert_eq!(m.entries.len(), 1);
    let t = &load_trial(&m.entries[0].path, m.entries[0].meta.clone()).unwrap();
    assert_eq!(t.len(), 1500);
    assert_eq!(t.insp_starts, (0..1500).filter(|i| i % 167 == 0).collect::<Vec<_>>());
    assert!((t.tidal_volume[25] - 0.3 * (1.0 - (std::f64::consts::PI * 0.3).cos())).abs() < 1e-9);
    assert!((t.time[10] - 0.2).abs() < 1e-12);

    let csv = ok(&["br", "--input", p(&manifest)]);
    let consensus: f64 = csv.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((consensus - 18.0).abs() <= 0.5, "{consensus}");
}

#[test]
fn tuning_picks_parameters_per_outer_fold() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate(dir.path(), r#"{"n_subjects": 3}"#);
    let out = dir.path().join("out");
    ok(&[
        "run", "--input", p(&manifest), "--out", p(&out), "--seed", "5", "--models", "forest,logreg",
        "--k", "3", "--tune",
    ]);
    let r = report(&out);
    let evals = r["evaluations"].as_array().unwrap();
    let forest = evals.iter().find(|e| e["model"] == "forest").unwrap();
    let rows = forest["tuning"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!([50, 100, 200].contains(&row["n_trees"].as_u64().unwrap()));
        let inner = row["inner_accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&inner));
    }
    let logreg = evals.iter().find(|e| e["model"] == "logreg").unwrap();
    assert!(logreg.get("tuning").is_none());
}
