//! End-to-end runs of the `wonderboom` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wonderboom(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wonderboom"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = wonderboom(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn header(p: impl AsRef<Path>) -> String {
    read(p).lines().next().unwrap().to_string()
}

fn json(p: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

#[test]
fn plan_summarizes_small_tree_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let o = ok(&["plan", "--n", "4096", "--m", "256", "--seed", "7"], &a);
    assert!(String::from_utf8_lossy(&o.stdout).contains("16→1"));
    ok(&["plan", "--n", "4096", "--m", "256", "--seed", "7"], &b);
    for f in ["plan_summary.json", "plan_slot0.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let s = json(a.join("plan_summary.json"));
    assert_eq!(s["structure"], "16→1");
    assert_eq!(s["depth"], 2);
    assert_eq!(s["proposers"].as_array().unwrap().len(), 32);
    let m = json(a.join("manifest.json"));
    assert_eq!(m["command"], "plan");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["host"]["scheme"], "bls12-381-min-pk");
    assert!(m["host"]["available_cores"].as_u64().unwrap() >= 1);
}

#[test]
fn plan_auto_fanout_for_a_million_validators() {
    let d = tempfile::tempdir().unwrap();
    ok(&["plan", "--n", "1000000", "--m", "auto"], d.path());
    let s = json(d.path().join("plan_summary.json"));
    let m = s["m"].as_u64().unwrap();
    assert!((256..=320).contains(&m), "m = {m}");
    assert_eq!(s["depth"], 4);
    // the calibration behind the choice is kept for reruns
    let man = json(d.path().join("manifest.json"));
    assert!(man["config"]["simulation"]["cost_model"]["sgv"].as_f64().unwrap() > 0.0);
}

#[test]
fn analyze_defaults_and_k_range() {
    let d = tempfile::tempdir().unwrap();
    ok(&["analyze", "--k-range", "1..128", "--oracle", "small"], d.path());
    let csv = read(d.path().join("resilience.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,ethereum_epochs,wonderboom_validator,wonderboom_network,ethereum");
    assert_eq!(lines.count(), 128);
    let a = json(d.path().join("analysis.json"));
    let close = |v: &serde_json::Value, want: f64, rel: f64| {
        let x = v.as_f64().unwrap();
        assert!(((x - want) / want).abs() <= rel, "{x} vs {want}");
    };
    close(&a["supermajority_tail"], 5.55e-15, 0.05);
    close(&a["all_reps_faulty"], 1.45e-5, 0.01);
    close(&a["daily_censorship"]["probability"], 0.9987, 0.0005);
    close(&a["attack_opening"], 0.998, 0.001);
    close(&a["attack_opening_five_percent"], 0.548, 0.01);
    close(&a["report"]["no_committee_censored"], 0.998, 0.001);
    close(&a["ethereum_resilience_2_epochs"], 0.889, 0.001);
    let o = json(d.path().join("oracle.json"));
    assert_eq!(o["max_n"], 25);
    assert_eq!(o["exact_mismatches"], 0);
}

#[test]
fn simulate_writes_documented_headers_and_replays_from_manifest() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    let args = [
        "simulate", "--n", "1024", "--m", "64", "--participation", "0.9", "--worst-case", "--baseline",
        "--max-real-items", "32",
    ];
    ok(&args, &a);
    assert_eq!(
        header(a.join("results.csv")),
        "design,n,m,depth,cores,participation,worst_case,epoch,slot,timed,compute_s,network_s,execute_s,total_s,predicted_s,popcount_largest,popcount_random"
    );
    assert_eq!(
        header(a.join("phases.csv")),
        "design,n,cores,participation,slot,role,phase,items,sampled,parallel,measured_s,effective_s"
    );
    assert_eq!(read(a.join("results.csv")).lines().count(), 3);

    let manifest = a.join("manifest.json");
    ok(&["simulate", "--config", manifest.to_str().unwrap()], &b);
    let m = json(&manifest);
    for o in m["outputs"].as_array().unwrap() {
        if o["deterministic"] == true {
            let f = o["path"].as_str().unwrap();
            assert_eq!(read(a.join(f)), read(b.join(f)), "{f} differs on replay");
        }
    }
    let mut ma = m.clone();
    let mut mb = json(b.join("manifest.json"));
    for v in [&mut ma, &mut mb] {
        v["host"]["peak_rss_kib"] = serde_json::Value::Null;
    }
    assert_eq!(ma, mb);
}

#[test]
fn epochs_mode_fills_the_inclusion_ledger() {
    let d = tempfile::tempdir().unwrap();
    ok(
        &["simulate", "--mode", "epochs", "--n", "512", "--m", "32", "--adversary", "minority", "--k", "32", "--no-crypto"],
        d.path(),
    );
    let inc = read(d.path().join("inclusion.csv"));
    assert_eq!(inc.lines().next().unwrap(), "validator,slot,included_largest,included_random");
    assert_eq!(inc.lines().count(), 1 + 512 * 32);
    assert_eq!(
        header(d.path().join("epoch_slots.csv")),
        "point,n,participation,epoch,slot,popcount_largest,popcount_random,honest_voters,honest_included,victims,victims_included,targets,targets_included,collateral,silent_proposer"
    );
    assert_eq!(header(d.path().join("rewards.csv")), "point,window_start,k,validators,eligible");
    assert_eq!(read(d.path().join("rewards.csv")).lines().count(), 2);
}

#[test]
fn compare_sweeps_points() {
    let d = tempfile::tempdir().unwrap();
    ok(&["compare", "--n", "512,1024", "--m", "32", "--cores", "2", "--max-real-items", "16"], d.path());
    let csv = read(d.path().join("compare.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,cores,participation,worst_case,wonderboom_total_s,ethereum_total_s,ratio,wonderboom_predicted_s"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1024,2,"));
}

#[test]
fn bench_writes_a_cost_model() {
    let d = tempfile::tempdir().unwrap();
    ok(&["bench", "--iterations", "200", "--samples", "10"], d.path());
    let c = json(d.path().join("calibration.json"));
    for k in ["pka", "sga", "sgv"] {
        assert!(c["cost_model"][k].as_f64().unwrap() > 0.0, "{k}");
        assert!(c[k]["median"].as_f64().is_some());
    }
    // the calibration feeds straight back in as a cost model
    let p = d.path().join("calibration.json");
    let e = d.path().join("plan");
    ok(&["plan", "--n", "65536", "--m", "auto", "--cost-model", p.to_str().unwrap()], &e);
    assert!(json(e.join("plan_summary.json"))["predicted"]["full"]["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_errors_exit_one_with_line_numbers() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.toml");
    fs::write(&bad, "[simulation]\nn = 4096\nbogus = 3\n").unwrap();
    let o = wonderboom(&["plan", "--config", bad.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let bad = d.path().join("bad.json");
    fs::write(&bad, "{\n  \"simulation\": {\n    \"n\": \"many\"\n  }\n}\n").unwrap();
    let o = wonderboom(&["plan", "--config", bad.to_str().unwrap()], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    for args in [
        &["simulate", "--n", "1000000"][..],
        &["plan", "--participation", "0.5"],
        &["plan", "--adversary", "sneaky"],
        &["analyze", "--k-range", "9..3"],
        &["frobnicate"],
    ] {
        assert_eq!(wonderboom(args, d.path()).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn flags_override_the_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "[simulation]\nn = 2048\nm = 128\nseed = 3\n").unwrap();
    ok(&["plan", "--config", cfg.to_str().unwrap(), "--n", "4096"], d.path());
    let s = json(d.path().join("plan_summary.json"));
    assert_eq!((s["n"].as_u64(), s["m"].as_u64(), s["seed"].as_u64()), (Some(4096), Some(128), Some(3)));
}
