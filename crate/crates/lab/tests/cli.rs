use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_threefield")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Stand-in reference for plumbing tests; its value plays no role in any
/// numerical claim.
fn write_reference(path: &Path, domain: &str, lambda: f64) {
    let r = serde_json::json!({
        "domain": domain, "lambda": lambda, "mu": 1.0, "index": 1,
        "value": 40.0, "uncertainty": 1e-3, "order": 2.0,
        "samples": [[4, 41.0], [8, 40.3], [16, 40.1]],
        "provenance": "test fixture",
    });
    std::fs::write(path, r.to_string()).unwrap();
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = bin(&["spread", "--config", "missing.toml"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("missing.toml"));
    assert_eq!(code(&bin(&["solve", "--bogus"], d)), 1);
    assert_eq!(code(&bin(&["frobnicate"], d)), 1);
    assert_eq!(code(&bin(&[], d)), 1);
    assert_eq!(code(&bin(&["solve", "--threads", "0"], d)), 1);
    assert_eq!(code(&bin(&["solve", "--n", "8,4"], d)), 1);
    assert_eq!(code(&bin(&["solve", "--family", "lshape_left", "--n", "5"], d)), 1);
    assert_eq!(code(&bin(&["solve", "--lambda", "-1"], d)), 1);
    assert_eq!(code(&bin(&["--help"], d)), 0);

    std::fs::write(d.join("bad.toml"), "mesh_family = \"square_right\"\nn_list = [4]\nunknown_key = 1\n").unwrap();
    let o = bin(&["solve", "--config", "bad.toml"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown_key"));
}

#[test]
fn solve_reports_all_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.toml"), "mesh_family = \"square_right\"\nn_list = [8]\noutput = \"res\"\n").unwrap();
    let o = bin(&["solve", "--config", "c.toml", "--n", "4"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("res/spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    let report = read_json(&d.join("res/report.json"));
    let n_inf = report["n_infinite"].as_u64().unwrap() as usize;
    assert_eq!(rows.len() + n_inf, 18);
    assert_eq!(report["n_disp"], 18);
    assert_eq!(report["h"], 0.25);
    assert!(report["solver"].is_object() && report["pencil"].is_object());
    let moduli: Vec<f64> = rows.iter().map(|(a, b)| a.hypot(*b)).collect();
    assert!(moduli.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)));
}

#[test]
fn mesh_export_writes_text_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = bin(&["mesh", "--family", "lshape_left", "--n", "2,4", "--out", "m"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for n in [2, 4] {
        let text = std::fs::read_to_string(d.join(format!("m/mesh_lshape_left_N{n}.txt"))).unwrap();
        let head: Vec<usize> = text.lines().next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
        assert_eq!(head[0] as i64 - head[2] as i64 + head[1] as i64, 1);
        let vtk = std::fs::read_to_string(d.join(format!("m/mesh_lshape_left_N{n}.vtk"))).unwrap();
        assert!(vtk.starts_with("# vtk DataFile"));
    }
}

#[test]
fn converge_requires_a_stamped_reference() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = bin(&["converge", "--n", "4,8"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("oracle"));
    assert_eq!(code(&bin(&["converge", "--n", "4,8", "--reference", "nope.json"], d)), 1);

    let mut r = serde_json::json!({"domain": "square", "lambda": 1.0, "mu": 1.0, "index": 1, "value": 40.0,
        "uncertainty": 1e-3, "order": 2.0, "samples": [], "provenance": ""});
    std::fs::write(d.join("blank.json"), r.to_string()).unwrap();
    assert_eq!(code(&bin(&["converge", "--n", "4,8", "--reference", "blank.json"], d)), 1);
    r["provenance"] = "fixture".into();
    r["domain"] = "lshape".into();
    std::fs::write(d.join("other.json"), r.to_string()).unwrap();
    assert_eq!(code(&bin(&["converge", "--n", "4,8", "--reference", "other.json"], d)), 1);
    assert!(!d.join("out").exists());
}

#[test]
fn converge_writes_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_reference(&d.join("ref.json"), "square", 1.0);
    std::fs::write(
        d.join("c.toml"),
        "mesh_family = \"square_right\"\nn_list = [2, 4]\nreference = \"ref.json\"\noutput = \"conv\"\n",
    )
    .unwrap();
    let o = bin(&["converge", "--config", "c.toml"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("conv/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,h,gamma1,err,rate");
    assert!(lines[1].starts_with("2,0.5,") && lines[1].ends_with(','));
    assert!(lines[2].starts_with("4,0.25,"));
    let report = read_json(&d.join("conv/report.json"));
    assert_eq!(report["complete"], true);
    assert_eq!(report["reference"]["provenance"], "test fixture");
    assert!(report["rate"].is_number());
    assert!(std::fs::read_to_string(d.join("conv/rate.svg")).unwrap().contains("<polyline"));

    // a single N leaves the rate undefined
    let o = bin(&["converge", "--config", "c.toml", "--n", "4", "--out", "one"], d);
    assert_eq!(code(&o), 0);
    let report = read_json(&d.join("one/report.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
    assert!(report["rate"].is_null());
}

#[test]
fn failed_study_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_reference(&d.join("ref.json"), "lshape", 1.0);
    // the L-shape with N = 2 has no free displacement vertex
    let o = bin(&["converge", "--family", "lshape_left", "--n", "2,4", "--reference", "ref.json", "--out", "x"], d);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("partial results"));
    let report = read_json(&d.join("x/report.json"));
    assert_eq!(report["complete"], false);
    assert!(report["failure"].as_str().unwrap().contains("N = 2"));
}

#[test]
fn spread_writes_spectra_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = bin(&["spread", "--family", "square_right", "--n", "4,8", "--lambda", "1,1e8", "--out", "s"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for tag in ["1e0", "1e8"] {
        for n in [4, 8] {
            let csv = std::fs::read_to_string(d.join(format!("s/spectrum_N{n}_lam{tag}.csv"))).unwrap();
            assert!(csv.starts_with("re,im\n"));
        }
        let auto = std::fs::read_to_string(d.join(format!("s/spread_lam{tag}.svg"))).unwrap();
        let fixed = std::fs::read_to_string(d.join(format!("s/spread_lam{tag}_fixed.svg"))).unwrap();
        assert!(auto.contains("N = 4") && auto.contains("N = 8"));
        assert!(fixed.starts_with("<svg"));
    }
    let report = read_json(&d.join("s/report.json"));
    let cases = report["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 4);
    assert!(cases.iter().all(|c| c["n_infinite"].is_u64()));
}

#[test]
fn oracle_rejects_bad_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["oracle", "--domain", "square", "--ns", "4,8"], dir.path());
    assert_eq!(code(&o), 1);
    let o = bin(&["oracle", "--domain", "square", "--ns", "4,8,12"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn oracle_writes_a_stamped_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["oracle", "--domain", "square", "--ns", "4,8,16", "--output", "r.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = read_json(&dir.path().join("r.json"));
    assert!(!r["provenance"].as_str().unwrap().is_empty());
    assert_eq!(r["samples"].as_array().unwrap().len(), 3);
}
