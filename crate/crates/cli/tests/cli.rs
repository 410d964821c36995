use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn scenario(name: &str) -> PathBuf {
    data_dir().join("scenarios").join(name)
}

fn airtoll(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airtoll"))
        .args(args)
        .env_remove("AIRTOLL_DATA_DIR")
        .output()
        .expect("spawn airtoll")
}

fn run_ok(cmd: &str, scn: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![cmd, "--scenario", scn.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = airtoll(&args);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn exit_code(cmd: &str, scn: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![cmd, "--scenario", scn.to_str().unwrap(), "--output-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    airtoll(&args).status.code().expect("exit code")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const ONE_REGION: &str = "region_id,name,lat,lon,population,households,income_ratio\n\
                          r1,Test,35.0,-90.0,1000000,400000,1.0\n";
const IDENTITY_SR: &str = "receptor_id,source_id,species,coefficient\n\
                           r1,r1,pm25,1.0\nr1,r1,nox,0.0\nr1,r1,so2,0.0\nr1,r1,voc,0.0\n";
const ONE_ENDPOINT: &str = "endpoint_id,beta_low,beta_mid,beta_high,baseline_rate,unit_value_low,unit_value_mid,unit_value_high\n\
                            hospitalizations,0.001,0.002,0.003,0.01,20000,20000,20000\n";

#[test]
fn identity_matrix_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "regions.csv", ONE_REGION);
    write(dir.path(), "sr.csv", IDENTITY_SR);
    write(dir.path(), "endpoints.csv", ONE_ENDPOINT);
    write(dir.path(), "emissions.csv", "scope,source_region,pm25,nox,so2,voc\nscope2,r1,0.5,0,0,0\n");
    let scn = write(
        dir.path(),
        "s.toml",
        "name = \"identity\"\n[inputs]\nregions = \"regions.csv\"\nsr_matrix = \"sr.csv\"\n\
         endpoints = \"endpoints.csv\"\nemissions = \"emissions.csv\"\n",
    );
    let out = dir.path().join("out");
    run_ok("health", &scn, &out, &[]);
    let report = json(&out.join("health_report.json"));
    for (band, beta) in [("cost_low", 0.001f64), ("cost_mid", 0.002), ("cost_high", 0.003)] {
        let expected = 1.0e6 * 0.01 * -(-beta * 0.5).exp_m1() * 20000.0;
        let got = report["national"][band].as_f64().unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected, "{band}: {got} vs {expected}");
    }
    let mid = report["national"]["cost_mid"].as_f64().unwrap();
    let per = report["regions"][0]["per_household_mid"].as_f64().unwrap();
    assert!((per - mid / 400000.0).abs() <= 1e-12 * per);
}

#[test]
fn huntsville_trips_match_published_table() {
    let dir = TempDir::new().unwrap();
    run_ok("health", &scenario("huntsville_training.toml"), dir.path(), &[]);
    let rows = read_csv(&dir.path().join("car_trips.csv"));
    let total = rows.iter().find(|r| r[0] == "total").unwrap();
    let pm: f64 = total[3].parse().unwrap();
    let nox: f64 = total[4].parse().unwrap();
    assert!((pm / 13_800.0 - 1.0).abs() <= 0.02, "pm25 trips {pm}");
    assert!((nox / 2_500.0 - 1.0).abs() <= 0.02, "nox trips {nox}");
}

#[test]
fn attribute_reports_every_configured_scope() {
    let dir = TempDir::new().unwrap();
    run_ok("attribute", &scenario("virginia_permits.toml"), dir.path(), &[]);
    let rows = read_csv(&dir.path().join("emissions.csv"));
    let mut scopes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    scopes.dedup();
    assert_eq!(scopes, ["scope1", "scope2", "scope3"]);
}

#[test]
fn zero_energy_task_gives_zero_report() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "regions.csv", ONE_REGION);
    write(dir.path(), "endpoints.csv", ONE_ENDPOINT);
    let scn = write(
        dir.path(),
        "s.toml",
        "name = \"idle\"\n[inputs]\nregions = \"regions.csv\"\nendpoints = \"endpoints.csv\"\n\
         [inputs.kernel]\ndecay_km = 100.0\nself_coefficient = 0.01\n\
         [attribute.task]\npower_fraction = 1.0\nduration_hours = 24.0\nenergy_mwh = 0.0\n\
         [attribute.scope2]\nsource_region = \"r1\"\nrate = { pm25 = 1e-5, nox = 1e-4 }\n",
    );
    let out = dir.path().join("out");
    run_ok("attribute", &scn, &out, &[]);
    for row in read_csv(&out.join("emissions.csv")) {
        assert!(row[2..].iter().all(|v| v == "0"), "{row:?}");
    }
    run_ok("health", &scn, &out, &[]);
    let report = json(&out.join("health_report.json"));
    assert_eq!(report["national"]["cost_mid"].as_f64(), Some(0.0));
    assert!(report["national"]["health_price_usd_per_mwh"].is_null());
}

fn summary(dir: &Path) -> Vec<Vec<String>> {
    read_csv(&dir.join("glb_summary.csv"))
}

#[test]
fn glb_carbon_sweep_and_health_reduction() {
    let dir = TempDir::new().unwrap();
    run_ok("glb", &scenario("table4_glb.toml"), dir.path(), &[]);
    let rows = summary(dir.path());
    let solvers: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        solvers,
        ["baseline", "carbon_0", "carbon_5", "carbon_200", "carbon_inf", "hi_glb_health_only", "hi_glb"]
    );
    let hi = rows.iter().find(|r| r[0] == "hi_glb").unwrap();
    assert!(hi[6].parse::<f64>().unwrap() < 0.0);
    assert!(dir.path().join("results_hi_glb.csv").exists());
    assert!(dir.path().join("allocation_carbon_inf.csv").exists());
}

#[test]
fn unit_slackness_reproduces_baseline() {
    let dir = TempDir::new().unwrap();
    run_ok("glb", &scenario("table4_glb.toml"), dir.path(), &["--lambda", "1"]);
    for row in summary(dir.path()) {
        for pct in &row[6..9] {
            let v: f64 = pct.parse().unwrap();
            assert!(v.abs() <= 1e-9, "{}: {pct}", row[0]);
        }
    }
}

#[test]
fn carbon_price_override_runs_single_price() {
    let dir = TempDir::new().unwrap();
    run_ok("glb", &scenario("hourly_glb.toml"), dir.path(), &["--carbon-price", "inf"]);
    let rows = summary(dir.path());
    let carbon: Vec<&str> = rows.iter().filter(|r| r[0].starts_with("carbon_")).map(|r| r[0].as_str()).collect();
    assert_eq!(carbon, ["carbon_inf"]);
}

#[test]
fn discount_rate_override_changes_mortality_only() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    run_ok("health", &scenario("huntsville_training.toml"), a.path(), &[]);
    run_ok("health", &scenario("huntsville_training.toml"), b.path(), &["--discount-rate", "0.07"]);
    let (ra, rb) = (json(&a.path().join("health_report.json")), json(&b.path().join("health_report.json")));
    assert_eq!(rb["discount_rate"].as_f64(), Some(0.07));
    assert!(rb["national"]["cost_mid"].as_f64() < ra["national"]["cost_mid"].as_f64());
    assert_eq!(ra["national"]["incidences"], rb["national"]["incidences"]);
}

#[test]
fn constant_signals_have_zero_spread_and_no_correlation() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("timestamp_utc,region_id,kind,value\n");
    for h in 0..24 {
        body += &format!("2023-01-01T{h:02}:00:00Z,r1,health_price_usd_per_mwh,12.5\n");
        body += &format!("2023-01-01T{h:02}:00:00Z,r1,carbon_intensity_ton_per_mwh,0.4\n");
    }
    write(dir.path(), "signals.csv", &body);
    let scn = write(dir.path(), "s.toml", "name = \"flat\"\n[inputs]\nsignals = [\"signals.csv\"]\n");
    let out = dir.path().join("out");
    run_ok("stats", &scn, &out, &[]);
    for row in read_csv(&out.join("summary_stats.csv")) {
        assert_eq!(&row[4..8], ["0", "0", "0", "0"], "{row:?}");
    }
    let spread = read_csv(&out.join("spread_table.csv"));
    assert_eq!(spread.len(), 1);
    assert_eq!(spread[0][1], "NA");
    assert_eq!(spread[0][4], "NA");
}

#[test]
fn validation_errors_exit_2_and_write_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    assert_eq!(exit_code("glb", &scenario("table4_glb.toml"), &out, &["--lambda", "0.5"]), 2);
    assert_eq!(exit_code("glb", &scenario("table4_glb.toml"), &out, &["--carbon-price", "-3"]), 2);
    let bad = write(dir.path(), "bad.toml", "name = \"bad\"\nunknown_key = 1\n");
    assert_eq!(exit_code("attribute", &bad, &out, &[]), 2);
    assert!(!out.exists());
}

#[test]
fn infeasible_demand_exits_3() {
    let dir = TempDir::new().unwrap();
    let scn = write(
        dir.path(),
        "s.toml",
        &format!(
            "name = \"overload\"\n[inputs]\nsites = \"{}\"\n[glb]\nlambda = 1.2\ndemand_factor = 1.5\n",
            data_dir().join("sites_table4.csv").display()
        ),
    );
    let out = dir.path().join("out");
    assert_eq!(exit_code("glb", &scn, &out, &[]), 3);
    assert!(!out.exists());
}

#[test]
fn missing_input_exits_4() {
    let dir = TempDir::new().unwrap();
    let scn = write(dir.path(), "s.toml", "name = \"lost\"\n[inputs]\nsites = \"nowhere.csv\"\n");
    let out = dir.path().join("out");
    assert_eq!(exit_code("glb", &scn, &out, &[]), 4);
    assert_eq!(exit_code("glb", &dir.path().join("absent.toml"), &out, &[]), 4);
    assert!(!out.exists());
}

#[test]
fn data_dir_fallback_resolves_inputs() {
    let dir = TempDir::new().unwrap();
    let scn = write(dir.path(), "s.toml", "name = \"fallback\"\n[inputs]\nsites = \"sites_table4.csv\"\n");
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_airtoll"))
        .args(["glb", "--scenario", scn.to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
        .env("AIRTOLL_DATA_DIR", data_dir())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("glb_summary.csv").exists());
}
