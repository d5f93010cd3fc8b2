use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use simscan::io::{write_matrix, Delimiter};
use simscan::simulate::{null_matrix, plant_signal, PlantSpec, SignPolicy};
use simscan::IntensityMatrix;
use simscan_cli::ResultDocument;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simscan"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// 100 x 400 white noise with 3 carriers shifted by 3 on probes 150..170,
/// on top of a strong rank-one wave and per-sample offsets for the
/// normalization to remove.
fn planted_fixture(name: &str) -> PathBuf {
    planted_with_truth(name).0
}

fn planted_with_truth(name: &str) -> (PathBuf, Vec<String>) {
    let path = scratch(name);
    let noise = null_matrix(100, 400, 77).unwrap();
    let rows = noise
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let gain = 1.0 + 0.01 * i as f64;
            row.iter()
                .enumerate()
                .map(|(t, y)| y + 5.0 + i as f64 * 0.1 + 4.0 * gain * (t as f64 / 37.0).sin())
                .collect()
        })
        .collect();
    let base = IntensityMatrix::with_ids(rows, noise.sample_ids().to_vec()).unwrap();
    let plant = PlantSpec {
        tau1: 150,
        tau2: 170,
        carrier_fraction: 0.03,
        snr: 3.0,
        sign_policy: SignPolicy::AllPositive,
    };
    let (data, truth) = plant_signal(&base, &plant, 77).unwrap();
    let mut buf = Vec::new();
    write_matrix(&mut buf, &data, Delimiter::Tab).unwrap();
    fs::write(&path, buf).unwrap();
    let ids = truth.carriers.iter().map(|&i| data.sample_ids()[i].clone()).collect();
    (path, ids)
}

fn null_fixture(name: &str) -> PathBuf {
    let path = scratch(name);
    let data = null_matrix(30, 300, 5).unwrap();
    let mut buf = Vec::new();
    write_matrix(&mut buf, &data, Delimiter::Comma).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

#[test]
fn threshold_matches_table_value() {
    let o = run(&["threshold", "--samples", "100", "--probes", "500", "--t1", "50", "--p0", "0.03"]);
    assert!(o.status.success());
    let b: f64 = stdout(&o).trim().parse().unwrap();
    assert!((b - 17.1).abs() < 0.3, "{b}");
}

#[test]
fn chi_square_scale_is_twice_mixture_at_p0_one() {
    let common = ["--samples", "100", "--probes", "500", "--t1", "50", "--alpha", "0.1"];
    let mut a = vec!["threshold", "--p0", "1"];
    a.extend(common);
    let mut b = vec!["threshold", "--statistic", "sumchisq"];
    b.extend(common);
    let mix: f64 = stdout(&run(&a)).trim().parse().unwrap();
    let chi: f64 = stdout(&run(&b)).trim().parse().unwrap();
    assert!((mix - 84.1).abs() < 0.3, "{mix}");
    assert!((chi - 2.0 * mix).abs() < 1e-6 * chi, "{chi} vs {mix}");
}

#[test]
fn invalid_alpha_exits_3() {
    let o = run(&["threshold", "--samples", "100", "--probes", "500", "--t1", "50", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--alpha"));
}

#[test]
fn t1_at_least_t_exits_3() {
    let path = null_fixture("null0.csv");
    let o = run(&["scan", path.to_str().unwrap(), "--t1", "300"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--t1"));
}

#[test]
fn ragged_matrix_exits_2_with_line() {
    let path = scratch("ragged.tsv");
    fs::write(&path, "a\t1\t2\t3\nb\t1\t2\n").unwrap();
    let o = run(&["scan", path.to_str().unwrap(), "--t1", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn null_matrix_gives_no_detections() {
    let path = null_fixture("null1.csv");
    // already iid standard normal, so scan it as given; the per-probe spread
    // estimates of a 30-sample matrix are too noisy to be worth applying
    let o = run(&["scan", path.to_str().unwrap(), "--t1", "20", "--no-preprocess"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: ResultDocument = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(doc.detections.is_empty());
    assert_eq!(doc.n_samples, 30);
}

#[test]
fn planted_interval_is_found() {
    let (path, truth) = planted_with_truth("planted7.tsv");
    let o = run(&["scan", path.to_str().unwrap(), "--t1", "30", "--p0", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: ResultDocument = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc.detections.len(), 1, "{doc:?}");
    let d = &doc.detections[0];
    assert!(d.tau1.abs_diff(150) <= 2 && d.tau2.abs_diff(170) <= 2, "{d:?}");
    assert!(d.p_value <= 0.05);
    // a 20-probe median of pure noise clears the 0.3 gap fairly often, so
    // only require the true carriers to be among the calls
    assert!(truth.iter().all(|c| d.carriers.contains(c)), "{d:?}");
    assert_eq!(doc.statistic, "mixture(p0=0.1)");
    assert_eq!(doc.tool, "simscan");
}

#[test]
fn output_is_identical_across_thread_counts() {
    let path = planted_fixture("planted2.tsv");
    let p = path.to_str().unwrap();
    let one = run(&["--threads", "1", "scan", p, "--t1", "30"]);
    let four = run(&["--threads", "4", "scan", p, "--t1", "30"]);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn echoed_config_reproduces_document() {
    let path = planted_fixture("planted3.tsv");
    let first = scratch("first.json");
    let o = run(&[
        "scan",
        path.to_str().unwrap(),
        "--t1",
        "25",
        "--delta-min",
        "0.4",
        "--bonferroni",
        "--seed",
        "9",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = run(&["scan", "--from-config", first.to_str().unwrap()]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(fs::read(&first).unwrap(), again.stdout);
    let doc: ResultDocument = serde_json::from_slice(&again.stdout).unwrap();
    assert_eq!(doc.config.bonferroni, Some(23));
    assert!((doc.config.effective_alpha - 0.05 / 23.0).abs() < 1e-15);
}

#[test]
fn documents_reject_unknown_fields() {
    let path = planted_fixture("planted4.tsv");
    let o = run(&["scan", path.to_str().unwrap(), "--t1", "30"]);
    let mut value: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    value["extra"] = serde_json::json!(1);
    assert!(serde_json::from_value::<ResultDocument>(value).is_err());
}

#[test]
fn consistency_counts_from_document() {
    let path = planted_fixture("planted5.tsv");
    let doc_path = scratch("for_consistency.json");
    let o = run(&[
        "scan",
        path.to_str().unwrap(),
        "--t1",
        "30",
        "--max-intervals",
        "1",
        "--out",
        doc_path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let doc: ResultDocument = serde_json::from_slice(&fs::read(&doc_path).unwrap()).unwrap();
    let carriers = &doc.detections[0].carriers;
    let non_carrier = doc.sample_ids.iter().find(|s| !carriers.contains(s)).unwrap();
    // one consistent replicate pair (two carriers) and one broken pair
    let pedigree = scratch("pedigree.txt");
    fs::write(
        &pedigree,
        format!(
            "replicate {} {}\nreplicate {} {}\n",
            carriers[0], carriers[1], carriers[2], non_carrier
        ),
    )
    .unwrap();
    let o = run(&["consistency", doc_path.to_str().unwrap(), "--pedigree", pedigree.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let counts: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(counts["total"], 3);
    assert_eq!(counts["inconsistent"], 1);

    fs::write(&pedigree, "replicate nobody s1\n").unwrap();
    let o = run(&["consistency", doc_path.to_str().unwrap(), "--pedigree", pedigree.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn power_table(extra: &[&str]) -> String {
    let mut args = vec![
        "power",
        "--samples",
        "100",
        "--lengths",
        "2,4,8,12,16",
        "--snr",
        "0,2",
        "--carrier-fraction",
        "0.1",
        "--p0",
        "0.1",
        "--probes",
        "80000",
        "--t1",
        "1000",
        "--alpha",
        "0.05",
        "--bonferroni",
        "--reps",
        "2000",
        "--seed",
        "3",
    ];
    args.extend(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

#[test]
fn power_table_is_deterministic_and_sensible() {
    let a = power_table(&[]);
    assert_eq!(a, power_table(&["--threads", "3"]));
    let rows: Vec<Vec<f64>> = a
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("length"))
        .map(|l| l.split('\t').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    for r in rows.iter().filter(|r| r[1] == 0.0) {
        assert!(r[3] < 0.01, "{r:?}");
    }
    let signal: Vec<f64> = rows.iter().filter(|r| r[1] == 2.0).map(|r| r[3]).collect();
    assert!(signal.windows(2).all(|w| w[1] >= w[0]), "{signal:?}");
    assert!(signal[3] > 0.9, "{signal:?}");
}

#[test]
fn power_rejects_bad_grid() {
    let o = run(&["power", "--samples", "100", "--lengths", "0,4", "--threshold", "30"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["power", "--samples", "100", "--lengths", "4", "--threshold", "30", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn preprocess_writes_matrix_and_diagnostics() {
    let path = planted_fixture("planted6.tsv");
    let out = scratch("normalized.tsv");
    let prefix = scratch("diag");
    let report = scratch("report.json");
    let o = run(&[
        "preprocess",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--diagnostics",
        prefix.to_str().unwrap(),
        "--diagnostics-sample",
        "3",
        "--region",
        "100:200",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = simscan::io::read_matrix(&out).unwrap();
    assert_eq!((m.n_samples(), m.n_probes()), (100, 400));
    let region = fs::read_to_string(prefix.with_file_name("diag.qq_region.tsv")).unwrap();
    assert_eq!(region.lines().count(), 101);
    let acf = fs::read_to_string(prefix.with_file_name("diag.acf.tsv")).unwrap();
    assert_eq!(acf.lines().count(), 51);
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(rep["per_sample_medians"].as_array().unwrap().len(), 100);
}

#[test]
fn simulate_commands_are_seeded() {
    let args = [
        "simulate-null",
        "--samples",
        "10",
        "--probes",
        "100",
        "--t1",
        "10",
        "--reps",
        "200",
        "--seed",
        "4",
    ];
    let a = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, run(&args).stdout);
    let link = [
        "simulate-linkage",
        "--sequences",
        "50",
        "--genome-length",
        "200",
        "--reps",
        "100",
        "--alpha",
        "0.05",
    ];
    let o = run(&link);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout, run(&link).stdout);
    assert_eq!(stdout(&o).lines().count(), 3);
}
