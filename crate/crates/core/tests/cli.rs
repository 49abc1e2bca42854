//! End-to-end runs of the `megacon` binary: exit codes, golden outputs and
//! schema conformance.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn data(name: &str) -> String {
    manifest().join("tests/data").join(name).display().to_string()
}

fn megacon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_megacon"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = megacon(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

/// Compares against `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = manifest().join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

fn conforms(schema: &str, doc: &Value) {
    let text = fs::read_to_string(manifest().join("schemas").join(schema)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let v = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn stability_stable_exits_zero() {
    let out = ok(&["stability", "--alpha1", "1e-9", "--alpha2", "1e-4", "--alpha3", "1e-5", "--n", "8,64"]);
    let v = json(&out);
    assert_eq!(v["stable"], true);
    assert!(v["rings"][1]["max_real_part"].as_f64().unwrap() < 0.0);
    conforms("stability.schema.json", &v);
    golden("stability_stable.json", &out);
}

#[test]
fn stability_unstable_exits_two() {
    let o = megacon(&["stability", "--alpha1", "1e-8", "--alpha2", "1e-4", "--alpha3", "1e-5"]);
    assert_eq!(o.status.code(), Some(2));
    let v = json(&stdout(&o));
    assert_eq!(v["stable"], false);
    assert!(v["sup_gain"].as_f64().unwrap() > 1.0);
    conforms("stability.schema.json", &v);
    golden("stability_unstable.json", &stdout(&o));
}

#[test]
fn missing_argument_is_a_usage_error() {
    let o = megacon(&["stability", "--alpha1", "1e-8", "--alpha2", "1e-4"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("--alpha3") && err.contains("Usage"), "{err}");
}

#[test]
fn out_of_domain_parameters_exit_one() {
    let o = megacon(&["stability", "--alpha1", "-1e-9", "--alpha2", "1e-4", "--alpha3", "1e-5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("domain"));
}

#[test]
fn help_exits_zero() {
    let o = megacon(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
}

#[test]
fn pc_isotropic_closed_form() {
    let out = ok(&["pc", "--miss-x", "0", "--miss-y", "0", "--sigma-x", "1", "--sigma-y", "1", "--radius", "1"]);
    let v = json(&out);
    let exact = 1.0 - (-0.5f64).exp();
    assert!((v["pc"].as_f64().unwrap() - exact).abs() < 1e-6);
    assert_eq!(v["monte_carlo"], Value::Null);
    conforms("pc.schema.json", &v);
    golden("pc_isotropic.json", &out);
}

#[test]
fn pc_monte_carlo_uses_default_seed() {
    let args = [
        "pc", "--miss-x", "0.2", "--miss-y", "-0.1", "--sigma-x", "0.5", "--sigma-y", "0.2", "--radius", "0.3",
        "--mc-samples", "200000",
    ];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let v = json(&a);
    conforms("pc.schema.json", &v);
    assert_eq!(v["monte_carlo"]["seed"], megacon::cli::DEFAULT_SEED);
    let (pc, mc, se) = (
        v["pc"].as_f64().unwrap(),
        v["monte_carlo"]["pc"].as_f64().unwrap(),
        v["monte_carlo"]["std_error"].as_f64().unwrap(),
    );
    assert!((pc - mc).abs() < 4.0 * se, "{pc} vs {mc} +- {se}");
}

#[test]
fn pc_recomputes_report_rows() {
    let out = ok(&["pc", "--cdm", &data("conjunctions.csv")]);
    let v = json(&out);
    conforms("pc_cdm.schema.json", &v);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    // the first three stated values are isotropic closed forms
    for r in &rows[..3] {
        assert!(r["abs_diff"].as_f64().unwrap() < 1e-8, "{r}");
    }
    assert!(rows[3]["recomputed_pc"].as_f64().unwrap() > 0.0);
    assert_eq!(rows[4]["recomputed_pc"], Value::Null);
    assert_eq!(rows[4]["high_risk"], false);
    assert_eq!(v["out_of_order_rows"], serde_json::json!([3]));
    golden("pc_cdm.json", &out);

    let table = ok(&["pc", "--cdm", &data("conjunctions.csv"), "--format", "csv"]);
    assert_eq!(csv_rows(&table).len(), 5);
    golden("pc_cdm.csv", &table);
}

#[test]
fn pc_malformed_report_names_the_row() {
    let o = megacon(&["pc", "--cdm", &data("malformed_cdm.csv")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_input_file_exits_one() {
    let o = megacon(&["pc", "--cdm", "/nonexistent/reports.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/reports.csv"));
}

#[test]
fn paired_simulation_compares_policies() {
    let out = ok(&["simulate", "--config", &data("paired16.ini"), "--paired"]);
    let v = json(&out);
    conforms("simulate.schema.json", &v);
    let c = &v["comparison"];
    let (pw, bi) = (
        c["pairwise_amplification_factor"].as_f64().unwrap(),
        c["bilateral_amplification_factor"].as_f64().unwrap(),
    );
    assert_eq!(v["pairwise"]["summary"]["policy_kind"], "pairwise");
    assert_eq!(v["bilateral"]["summary"]["policy_kind"], "bilateral");
    assert!(bi < pw, "{bi} vs {pw}");
    let ratio = c["amplification_ratio"].as_f64().unwrap();
    assert!((ratio - bi / pw).abs() < 1e-8);
    golden("simulate_paired.json", &out);
}

#[test]
fn simulation_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let traj = dir.path().join(format!("{tag}_traj.csv"));
        let eph = dir.path().join(format!("{tag}_eph.csv"));
        let out = ok(&[
            "simulate",
            "--config",
            &data("ring8.ini"),
            "--duration-s",
            "36000",
            "--noise",
            "0.01",
            "--seed",
            "7",
            "--csv-out",
            traj.to_str().unwrap(),
            "--ephemeris-out",
            eph.to_str().unwrap(),
        ]);
        (out, fs::read(traj).unwrap(), fs::read(eph).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert!(a.1.starts_with(b"time_s,dtheta_0"));
}

#[test]
fn blow_up_still_succeeds() {
    let out = ok(&[
        "simulate", "--n", "8", "--alpha1", "1", "--alpha2", "0.2", "--alpha3", "0.1", "--duration-s", "20000",
        "--no-decouple",
    ]);
    let v = json(&out);
    conforms("simulate.schema.json", &v);
    assert_eq!(v["summary"]["blow_up"], true);
}

#[test]
fn simulate_without_parameters_exits_one() {
    let o = megacon(&["simulate", "--n", "8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha1"));
}

fn sweep(args: &[&str]) -> Vec<Vec<String>> {
    let mut full = vec!["sweep"];
    full.extend_from_slice(args);
    csv_rows(&ok(&full))
}

#[test]
fn single_cell_sweep_matches_other_commands() {
    let rows = sweep(&["--alpha1", "1e-9", "--alpha2", "1e-4", "--alpha3", "1e-5", "--n", "32", "--c-max", "1e-7"]);
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    let st = json(&ok(&["stability", "--alpha1", "1e-9", "--alpha2", "1e-4", "--alpha3", "1e-5"]));
    assert_eq!(r[3].parse::<f64>().unwrap(), st["margin"].as_f64().unwrap());
    assert_eq!(r[4], "true");
    assert_eq!(r[5].parse::<f64>().unwrap(), st["sup_gain"].as_f64().unwrap());
    let cap = json(&ok(&["capacity", "--delta-theta-safe", &r[6]]));
    assert_eq!(r[7], cap["max_sats"].to_string());
    assert_eq!(r[8].parse::<f64>().unwrap(), cap["max_capacity_gbps"].as_f64().unwrap());
    assert_eq!(r[9], "inf");
}

#[test]
fn margin_changes_sign_once_along_alpha1() {
    // margin = 1e-8 - 1e-10 - 2 alpha1 crosses zero at alpha1 = 4.95e-9
    let rows = sweep(&["--alpha1", "1e-9:9e-9:9", "--alpha2", "1e-4", "--alpha3", "1e-5"]);
    let margins: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(margins.windows(2).all(|w| w[1] < w[0]));
    let flips = rows.windows(2).filter(|w| w[0][4] != w[1][4]).count();
    assert_eq!(flips, 1);
    for r in &rows {
        let stable = r[4] == "true";
        assert_eq!(r[6].is_empty(), !stable);
        assert_eq!(r[9] == "inf", stable);
    }
}

#[test]
fn sweep_grid_golden() {
    let out = ok(&[
        "sweep", "--alpha1", "1e-9:8e-9:3", "--alpha2", "1e-4", "--alpha3", "1e-6:4e-5:3", "--n", "16",
    ]);
    golden("sweep_3x3.csv", &out);
}

#[test]
fn full_grid_has_ten_thousand_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let o = megacon(&[
        "sweep",
        "--alpha1",
        "1e-10:5e-9:100",
        "--alpha2",
        "1e-4",
        "--alpha3",
        "1e-6:5e-5:100:log",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(path).unwrap();
    assert_eq!(csv_rows(&text).len(), 10_000);
}

fn simulate_ephemeris(config: &str, dir: &Path) -> String {
    let eph = dir.join("eph.csv");
    ok(&["simulate", "--config", &data(config), "--ephemeris-out", eph.to_str().unwrap()]);
    eph.display().to_string()
}

#[test]
fn infer_recovers_simulated_policy() {
    let dir = tempfile::tempdir().unwrap();
    let eph = simulate_ephemeris("ring8.ini", dir.path());
    let out = ok(&["infer", "--ephemeris", &eph, "--shell", &data("shell8.ini")]);
    let v = json(&out);
    conforms("infer.schema.json", &v);
    for (key, truth) in [("alpha1", 1e-9), ("alpha2", 1e-4), ("alpha3", 1e-5)] {
        let got = v["params"][key].as_f64().unwrap();
        assert!((got - truth).abs() / truth < 1e-6, "{key}: {got}");
    }
    assert_eq!(v["stable"], true);
    golden("infer_ring8.json", &out);
}

#[test]
fn infer_flags_override_shell_file() {
    let dir = tempfile::tempdir().unwrap();
    let eph = simulate_ephemeris("ring8.ini", dir.path());
    // a 9-satellite spacing cannot describe an 8-satellite ring
    let o = megacon(&["infer", "--ephemeris", &eph, "--shell", &data("shell8.ini"), "--sats-per-orbit", "9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn chains_follow_the_simulated_cascade() {
    let dir = tempfile::tempdir().unwrap();
    let eph = simulate_ephemeris("cascade16.ini", dir.path());
    let sim = json(&ok(&["simulate", "--config", &data("cascade16.ini")]));
    let args = [
        "chains",
        "--ephemeris",
        &eph,
        "--cdm",
        &data("cascade16_cdm.csv"),
        "--shell",
        &data("shell16.ini"),
        "--trigger-threshold-rad",
        "1e-4",
    ];
    let v = json(&ok(&args));
    conforms("chains.schema.json", &v);
    let chains = v.as_array().unwrap();
    assert_eq!(chains.len(), 1);
    assert_eq!(chains[0]["seed"]["sat_id"], 1);
    assert_eq!(chains[0]["seed"]["counterpart_id"], 90001);
    assert_eq!(chains[0]["hop_count"], sim["summary"]["chain_hops"]);

    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    golden("chains_cascade16.csv", &ok(&csv_args));
}

#[test]
fn lifetime_geometric_sum() {
    let out = ok(&["lifetime", "--h", "2", "--t0", "1", "--n", "2", "--at-time", "1.5"]);
    let v = json(&out);
    conforms("lifetime.schema.json", &v);
    // t(2) = t0 (1 + 1/h)
    assert_eq!(v["time_of_nth_s"], 1.5);
    assert_eq!(v["horizon_s"], 2.0);
    assert!((v["maneuvers_at_time"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    golden("lifetime.json", &out);

    let o = megacon(&["lifetime", "--h", "1", "--t0", "1", "--n", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&ok(&["lifetime", "--h", "1", "--t0", "1", "--n", "3", "--unity-limit"]));
    assert_eq!(v["time_of_nth_s"], 3.0);
    assert_eq!(v["horizon_s"], Value::Null);
}

#[test]
fn capacity_twenty_gbps() {
    let out = ok(&["capacity", "--delta-theta-safe", "0.1", "--phase-factor", "1", "--per-sat-gbps", "20"]);
    let v = json(&out);
    conforms("capacity.schema.json", &v);
    assert_eq!(v["max_sats"], 62);
    assert_eq!(v["max_capacity_gbps"], 1240.0);
    golden("capacity.json", &out);

    let tau = std::f64::consts::TAU.to_string();
    let v = json(&ok(&["capacity", "--delta-theta-safe", &tau]));
    assert_eq!(v["max_sats"], 0);
}
