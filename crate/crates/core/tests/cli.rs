//! End-to-end checks of the `imsim` binary: output schemas, exit codes and
//! seed handling.

use std::path::Path;
use std::process::{Command, Output};

fn imsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn imsim")
}

fn header(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines().next().unwrap_or_default().to_string()
}

#[test]
fn subcommands_write_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [(&[&str], &str, &str); 8] = [
        (&["simulate", "--trials", "2"], "recall.csv", "scenario,protocol,trial,recall,spearman_nis_vtrue"),
        (&["ablate", "--trials", "2"], "ablation.csv", "pick,crisis,normal,desired,perfect"),
        (&["calibrate", "--trials", "2"], "cycles.csv", "cycle,recall,spearman_ir_skill,ring_mean_ir,nis_mvis_spearman"),
        (&["collusion", "--trials", "1"], "detection.csv", "run,planted_ring,flagged_set,jaccard,z_score"),
        (&["load"], "load.csv", "protocol,metric,value"),
        (&["longtail"], "longtail.csv", "venue,stat,k_or_q,pct_papers,pct_citations,avg"),
        (&["longtail"], "cumulative.csv", "venue,rank,cumulative_pct"),
        (&["plot-data"], "ir_density.csv", "x,crisis,normal,desired"),
    ];
    for (args, file, expected) in cases {
        let out_dir = d.join(args[0]);
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--quiet", "--out", out_dir.to_str().unwrap()]);
        let out = imsim(&full, d);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(header(&out_dir.join(file)), expected, "{args:?} {file}");
        if !matches!(args[0], "plot-data" | "longtail") {
            assert!(out_dir.join("summary.json").exists(), "{args:?} summary.json");
        }
    }
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\nbogus = 2\n").unwrap();
    let out = imsim(&["--config", cfg.to_str().unwrap(), "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn infeasible_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cp.toml");
    std::fs::write(
        &cfg,
        "[[scenario]]\nname = \"CP\"\nprotocol = \"CP\"\ncp = { select_fraction = 0.1, accept_target = 200 }\n",
    )
    .unwrap();
    let out = imsim(&["--config", cfg.to_str().unwrap(), "simulate", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_citation_row_exits_3_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    std::fs::write(&csv, "venue,paper,citations\nA,p1,4\nA,p2,x\n").unwrap();
    let out = imsim(&["longtail", "--input", csv.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = imsim(&["longtail", "--input", "nope.csv", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_preset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = imsim(&["--preset", "table9", "simulate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_results_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = imsim(&["simulate", "--preset", "table3", "--trials", "3", "--seed", seed, "--quiet", "--out", name], dir.path());
        assert!(out.status.success());
        std::fs::read(dir.path().join(name).join("recall.csv")).unwrap()
    };
    let a = run("7", "a");
    assert_eq!(a, run("7", "b"));
    assert_ne!(a, run("8", "c"));
}

#[test]
fn user_config_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "seed = 3\ntrials = 4\n\n[[scenario]]\nname = \"small\"\nprotocol = \"IM_REBEL\"\npool = { distribution = \"normal\" }\n",
    )
    .unwrap();
    let out = imsim(&["--config", cfg.to_str().unwrap(), "--quiet", "--out", "o", "simulate"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("o/recall.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.starts_with("small,IM-REBEL,")));
}
