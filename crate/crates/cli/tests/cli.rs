use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "nx = 4\nny = 4\nn_steps = 8\nn_mc = 40\nn_boot = 4\nburn_in = 50\nthin = 2\nn_samples = 50\nn_bins = 5\n\
synth_pressure_obs = 300\nsynth_wells = 6\nproduction_bandwidth_km = 5.0\nseed = 11\n\
catalogue = \"data/catalogue.csv\"\npressure = \"data/pressure.csv\"\nproduction = \"data/production.csv\"\noutput_dir = \"out\"\n\
spatial_order = 2\ntemporal_order = 1\ninteraction_time_order = 1\ninteraction_space_order = 1\n";

fn coxrate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coxrate"))
        .current_dir(dir)
        .args(["--config", "run.toml"])
        .args(args)
        .output()
        .expect("spawn coxrate")
}

fn workspace() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("run.toml"), CONFIG).unwrap();
    tmp
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn simulate_is_reproducible() {
    let (a, b) = (workspace(), workspace());
    ok(&coxrate(a.path(), &["simulate"]));
    ok(&coxrate(b.path(), &["simulate"]));
    for f in ["data/catalogue.csv", "data/pressure.csv", "data/production.csv", "out/counts.csv", "out/truth.json", "out/simulate-report.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }

    let c = workspace();
    ok(&coxrate(c.path(), &["--seed", "12", "simulate"]));
    assert_ne!(read(a.path(), "data/catalogue.csv"), read(c.path(), "data/catalogue.csv"));
}

#[test]
fn binned_catalogue_matches_simulated_counts() {
    let dir = workspace();
    ok(&coxrate(dir.path(), &["simulate"]));
    let simulated = read(dir.path(), "out/counts.csv");
    ok(&coxrate(dir.path(), &["fit"]));
    assert_eq!(simulated, read(dir.path(), "out/counts.csv"));

    let fit: serde_json::Value = serde_json::from_str(&read(dir.path(), "out/fit-report.json")).unwrap();
    let results = &fit["results"];
    assert!(results.is_object());
    assert!(dir.path().join("out/fit.json").exists());
    assert!(dir.path().join("out/fit-timings.json").exists());
}

#[test]
fn post_fit_commands_write_outputs() {
    let dir = workspace();
    ok(&coxrate(dir.path(), &["simulate"]));
    ok(&coxrate(dir.path(), &["fit"]));
    ok(&coxrate(dir.path(), &["diagnose"]));
    ok(&coxrate(dir.path(), &["forecast"]));

    let bins = read(dir.path(), "out/residual-bins.csv");
    assert!(bins.lines().count() > 1);
    let risk = read(dir.path(), "out/riskmap.csv");
    let mut lines = risk.lines();
    assert_eq!(lines.next(), Some("cellId,x,y,postMeanIntensity,postSdIntensity"));
    assert_eq!(lines.count(), 16);
    let hist = read(dir.path(), "out/forecast-hist.csv");
    let total: f64 = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9, "histogram frequencies sum to {total}");
}

#[test]
fn malformed_catalogue_reports_line() {
    let dir = workspace();
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    ok(&coxrate(dir.path(), &["simulate"]));
    let path = dir.path().join("data/catalogue.csv");
    let mut lines: Vec<String> = read(dir.path(), "data/catalogue.csv").lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[2].split(',').collect();
    fields[1] = "east";
    lines[2] = fields.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let out = coxrate(dir.path(), &["fit"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("catalogue.csv"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "nx = 4\nbogus = 1\n").unwrap();
    let out = coxrate(dir.path(), &["simulate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn moments_fig1_table() {
    let dir = workspace();
    ok(&coxrate(dir.path(), &["moments", "--scenario", "fig1", "--n", "100"]));
    for (file, col) in [("out/moments-mean.csv", "mcMean"), ("out/moments-var.csv", "mcVar")] {
        let text = read(dir.path(), file);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("k,{col},ciLo,ciHi,approx,inside"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 50, "{file}");
        for row in rows {
            let f: Vec<&str> = row.split(',').collect();
            let lo: f64 = f[2].parse().unwrap();
            let hi: f64 = f[3].parse().unwrap();
            assert!(lo <= hi, "{row}");
        }
    }
}
