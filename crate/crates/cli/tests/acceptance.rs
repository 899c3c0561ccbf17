//! Binary-level checks. [11] from the acceptance suite lives here: evolving
//! twice with one seed must write byte-identical population and trajectory
//! files. The smoke test walks every subcommand once.

use std::path::Path;
use std::process::{Command, Output};

fn pasdiv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pasdiv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let output = pasdiv(dir, args);
    assert!(
        output.status.success(),
        "pasdiv {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

#[test]
fn a11_evolve_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    ok(dir, &["generate", "--out", "inst.json", "--seed", "5"]);
    ok(dir, &["seed-solve", "inst.json", "--seed", "5"]);
    let evolve = |pop: &str, traj: &str| {
        ok(
            dir,
            &[
                "evolve", "inst.json", "--operator", "adaptive", "--mu", "10", "--evals", "4000",
                "--seed", "12", "--out", pop, "--trajectory", traj,
            ],
        );
    };
    evolve("pop-a.json", "traj-a.csv");
    evolve("pop-b.json", "traj-b.csv");
    let pops_match = std::fs::read(dir.join("pop-a.json")).unwrap()
        == std::fs::read(dir.join("pop-b.json")).unwrap();
    let trajs_match = std::fs::read(dir.join("traj-a.csv")).unwrap()
        == std::fs::read(dir.join("traj-b.csv")).unwrap();
    println!(
        "{} [11] repeated evolve writes byte-identical population ({pops_match}) and \
         trajectory ({trajs_match}) files",
        if pops_match && trajs_match { "PASS" } else { "FAIL" }
    );
    assert!(pops_match && trajs_match);
}

#[test]
fn every_subcommand_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let generated = ok(
        dir,
        &["generate", "--out", "inst.json", "--seed", "3", "--emit-breakdown"],
    );
    assert!(generated.contains("60 patients"));

    assert!(ok(dir, &["validate", "inst.json"]).contains("ok"));

    let solved = ok(dir, &["seed-solve", "inst.json", "--seed", "1"]);
    assert!(solved.contains("seed objective"));

    let evolved = ok(
        dir,
        &[
            "evolve", "inst.json", "--operator", "fixed", "--mu", "8", "--evals", "3000",
            "--seed", "2", "--out", "pop.json", "--trajectory", "traj.csv", "--step", "10",
        ],
    );
    assert!(evolved.contains("entropy"));
    assert!(dir.join("pop.json").exists() && dir.join("traj.csv").exists());
    let trajectory = std::fs::read_to_string(dir.join("traj.csv")).unwrap();
    assert!(trajectory.starts_with("evaluations,entropy\n0,0.000000\n"));

    let robustness = ok(
        dir,
        &["robustness", "inst.json", "pop.json", "--pairs", "1", "--reps", "20", "--seed", "4"],
    );
    assert!(robustness.starts_with("pairs,repetitions,ratio,alt\n1,20,"));

    let heatmap = ok(dir, &["heatmap", "inst.json", "pop.json"]);
    assert!(heatmap.starts_with("patient,distinct_rooms,room_fraction\n"));

    let summary = ok(
        dir,
        &[
            "compare", "inst.json", "--runs", "1", "--mu", "4", "--evals", "1000", "--seed", "7",
            "--out-dir", "cmp",
        ],
    );
    assert!(summary.starts_with("variant,run,seed,final_entropy,h_max\n"));
    assert!(summary.contains("swap,median,"));
    assert!(dir.join("cmp/summary.csv").exists());
    assert!(dir.join("cmp/trajectory-biased-0.csv").exists());
}

#[test]
fn validate_rejects_broken_files_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    ok(dir, &["generate", "--out", "inst.json", "--seed", "8"]);
    let mut text = std::fs::read_to_string(dir.join("inst.json")).unwrap();
    // First capacity becomes zero, which validation must flag.
    text = text.replacen("\"capacity\": 5", "\"capacity\": 0", 1);
    std::fs::write(dir.join("broken.json"), text).unwrap();
    let output = pasdiv(dir, &["validate", "broken.json"]);
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("capacity"));
}
