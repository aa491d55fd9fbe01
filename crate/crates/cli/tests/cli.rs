//! Exit-code contract of the binary: 0 ok, 2 infeasible, 3 invariant
//! violation, 4 I/O or parse failure.

use std::process::{Command, Output};

const CUBE_CONFIG: &str = r#"
[mesh.generate]
shape = "cube"
size = 0.1

[fleet]
capacities_l = [0.6, 0.6]

[extruder]
nozzle_height = 0.05
nozzle_to_head = 0.1
arm_length = 0.3
joint_to_nozzle = 0.2

[sampler]
normal_samples = 4
offsets_per_normal = 3

[search]
w_inner = 2
w_outer = 4

[print]
avg_speed = 1.0

[sim]
dt = 0.05
tracking_time_constant = 0.0
"#;

fn aeroprint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeroprint"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn full_pipeline_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, CUBE_CONFIG).unwrap();
    let out_dir = tmp.path().join("out");
    let args = |cmd: &'static str| {
        vec![
            cmd.to_string(),
            "--config".into(),
            config.display().to_string(),
            "--out".into(),
            out_dir.display().to_string(),
        ]
    };
    let run = |cmd| {
        let owned = args(cmd);
        let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
        aeroprint(&refs)
    };
    let decompose = run("decompose");
    assert_eq!(code(&decompose), 0, "{decompose:?}");
    assert!(String::from_utf8_lossy(&decompose.stdout).contains("2 chunks"));
    assert!(out_dir.join("bsp.json").exists());
    assert!(out_dir.join("schedule.json").exists());

    let print = run("print");
    assert_eq!(code(&print), 0, "{print:?}");
    assert!(out_dir.join("sim_trace.json").exists());

    let verify = run("verify");
    assert_eq!(code(&verify), 0, "{verify:?}");
    assert!(String::from_utf8_lossy(&verify.stdout).contains("all checks passed"));
}

#[test]
fn infeasible_fleet_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        CUBE_CONFIG.replace("capacities_l = [0.6, 0.6]", "capacities_l = [0.3, 0.3]"),
    )
    .unwrap();
    let out = aeroprint(&[
        "decompose",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds total fleet capacity"));
}

#[test]
fn missing_config_exits_four() {
    let out = aeroprint(&["decompose", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&out), 4, "{out:?}");
}

#[test]
fn unparsable_config_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, "not = [valid").unwrap();
    let out = aeroprint(&["decompose", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{out:?}");
}

#[test]
fn corrupted_artifacts_fail_verify_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, CUBE_CONFIG).unwrap();
    let out_dir = tmp.path().join("out");
    let decompose = aeroprint(&[
        "decompose",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&decompose), 0);

    // swap the print order in the schedule
    let schedule_path = out_dir.join("schedule.json");
    let schedule = std::fs::read_to_string(&schedule_path).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&schedule).unwrap();
    let entries = doc["entries"].as_array_mut().unwrap();
    entries.reverse();
    std::fs::write(&schedule_path, serde_json::to_string(&doc).unwrap()).unwrap();

    let verify = aeroprint(&[
        "verify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&verify), 3, "{verify:?}");
    assert!(String::from_utf8_lossy(&verify.stdout).contains("FAIL priority-order"));
}

#[test]
fn mode_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, CUBE_CONFIG).unwrap();
    let out = aeroprint(&[
        "decompose",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
        "--mode",
        "paper-max",
        "--feasibility",
        "per-uav",
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
}

#[test]
fn print_without_decompose_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, CUBE_CONFIG).unwrap();
    let out = aeroprint(&[
        "print",
        "--config",
        config.to_str().unwrap(),
        "--out",
        tmp.path().join("empty").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4, "{out:?}");
}
