//! End-to-end tests driving the `graspgame` binary: exit codes for each
//! command, the artifact files a solve writes, error reporting on bad input,
//! and the precision of the grasp text format.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graspgame::contact::phi;
use graspgame::game::GameTrace;
use graspgame::hand::unsquash_robot;
use graspgame::object::ObjectVariable;
use graspgame_cli::{load_run_config, load_scene, parse_grasp_text};
use nalgebra::Vector6;

fn assets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn scene(name: &str) -> PathBuf {
    assets_dir().join("scenes").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graspgame"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should start")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> String {
    p.to_str().expect("test paths are utf-8").to_owned()
}

/// Runs `solve` on the given scene into a fresh directory and returns that
/// directory together with the process output.
fn solve_into_temp(scene_name: &str) -> (tempfile::TempDir, Output) {
    let dir = tempfile::tempdir().expect("create temp dir");
    let out = run(&[
        "solve",
        "--config",
        &path_str(&scene(scene_name)),
        "--out",
        &path_str(dir.path()),
    ]);
    (dir, out)
}

#[test]
fn solve_on_a_caging_scene_exits_zero_and_writes_artifacts() {
    let (dir, out) = solve_into_temp("cage_sphere12.json");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("FirmGrasp"));

    let trace_text = std::fs::read_to_string(dir.path().join("trace.json")).expect("trace.json");
    let trace: GameTrace = serde_json::from_str(&trace_text).expect("trace.json parses");
    assert!(!trace.rounds.is_empty());

    let grasp_text = std::fs::read_to_string(dir.path().join("grasp.txt")).expect("grasp.txt");
    let state = parse_grasp_text(&grasp_text).expect("grasp.txt parses");
    assert_eq!(state.joints.len(), trace.final_state.joints.len());

    let csv = std::fs::read_to_string(dir.path().join("deltanorm.csv")).expect("deltanorm.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("round,delta_norm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), trace.rounds.len());
    for row in rows {
        let (round, norm) = row.split_once(',').expect("two csv columns");
        round.parse::<usize>().expect("round index");
        assert!(norm.parse::<f64>().expect("escape norm") >= 0.0);
    }
}

#[test]
fn solve_on_a_loose_scene_exits_two() {
    let (dir, out) = solve_into_temp("open_claw8.json");
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(!stdout_of(&out).contains("FirmGrasp"));
    // A non-firm run still records its artifacts for inspection.
    assert!(dir.path().join("trace.json").exists());
    assert!(dir.path().join("grasp.txt").exists());
}

#[test]
fn missing_object_file_exits_one_and_names_the_path() {
    let out = run(&[
        "solve",
        "--config",
        &path_str(&scene("cage_sphere12.json")),
        "--object",
        "/nonexistent/missing_object.xyz",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(
        err.contains("/nonexistent/missing_object.xyz"),
        "stderr should name the missing file, got: {err}"
    );
}

#[test]
fn unreadable_config_exits_one_and_names_the_path() {
    let out = run(&["solve", "--config", "/nonexistent/run.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("/nonexistent/run.json"));
}

#[test]
fn verify_accepts_a_caging_grasp() {
    let (dir, solve_out) = solve_into_temp("cage_sphere12.json");
    assert_eq!(solve_out.status.code(), Some(0));
    let out = run(&[
        "verify",
        &path_str(&dir.path().join("grasp.txt")),
        "--config",
        &path_str(&scene("cage_sphere12.json")),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("no escape"));
}

#[test]
fn verify_reports_an_escape_from_a_loose_grasp() {
    let (dir, solve_out) = solve_into_temp("open_claw8.json");
    assert_eq!(solve_out.status.code(), Some(2));
    let out = run(&[
        "verify",
        &path_str(&dir.path().join("grasp.txt")),
        "--config",
        &path_str(&scene("open_claw8.json")),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("escape twist found"),
        "expected the twist to be printed, got: {text}"
    );
    assert!(text.contains("translation") && text.contains("rotation"));
}

#[test]
fn verify_with_empty_escape_box_warns_and_exits_zero() {
    let (dir, solve_out) = solve_into_temp("cage_sphere12.json");
    assert_eq!(solve_out.status.code(), Some(0));
    let out = run(&[
        "verify",
        &path_str(&dir.path().join("grasp.txt")),
        "--config",
        &path_str(&scene("cage_sphere12.json")),
        "--epsilon",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let err = stderr_of(&out);
    assert!(
        err.contains("warning") && err.contains("empty"),
        "expected a vacuous-verdict warning on stderr, got: {err}"
    );
}

/// The grasp file stores every coordinate at 17 significant digits, so the
/// doubles survive the text round trip exactly and the scene's clearance
/// vector evaluated from the re-read state matches the solver's own state
/// far below the 1e-12 requirement.
#[test]
fn grasp_file_round_trip_reproduces_clearances() {
    let (dir, solve_out) = solve_into_temp("cage_sphere12.json");
    assert_eq!(solve_out.status.code(), Some(0));

    let trace_text = std::fs::read_to_string(dir.path().join("trace.json")).expect("trace.json");
    let trace: GameTrace = serde_json::from_str(&trace_text).expect("trace.json parses");
    let grasp_text = std::fs::read_to_string(dir.path().join("grasp.txt")).expect("grasp.txt");
    let reread = parse_grasp_text(&grasp_text).expect("grasp.txt parses");

    let cfg = load_run_config(&scene("cage_sphere12.json")).expect("scene config");
    let s = load_scene(&cfg).expect("scene assets");
    let wo = ObjectVariable {
        omega: Vector6::zeros(),
    };
    let min_phi = |state| {
        let (wr, clamped) = unsquash_robot(&s.spec, state).expect("state inside limits");
        assert!(!clamped, "solver states are strictly interior");
        let ph = phi(&s.spec, &s.cloud, &s.game.epsilon_bounds, &wr, &wo).expect("clearances");
        ph.values.min()
    };
    let from_solver = min_phi(&trace.final_state);
    let from_file = min_phi(&reread);
    assert!(
        (from_solver - from_file).abs() <= 1e-12,
        "round trip moved the minimum clearance by {:e}",
        (from_solver - from_file).abs()
    );
}

#[test]
fn morph_replays_every_step_firm() {
    let dir = tempfile::tempdir().expect("create temp dir");
    let out = run(&[
        "morph",
        &path_str(&assets_dir().join("objects/morph")),
        "--config",
        &path_str(&scene("morph_track.json")),
        "--out",
        &path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("5/5 steps attempted") && text.contains("5 firm"),
        "unexpected summary: {text}"
    );
    let saved = std::fs::read_to_string(dir.path().join("morph.txt")).expect("morph.txt");
    assert!(saved.contains("5 firm"));
}

#[test]
fn morph_with_an_unreachable_step_exits_two() {
    let dir = tempfile::tempdir().expect("create temp dir");
    let out = run(&[
        "morph",
        &path_str(&assets_dir().join("objects/morph_bad")),
        "--config",
        &path_str(&scene("morph_track.json")),
        "--out",
        &path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_of(&out).contains("4 firm"));
}

#[test]
fn morph_on_a_single_file_directory_behaves_like_solve() {
    let obj_dir = tempfile::tempdir().expect("create object dir");
    std::fs::copy(
        assets_dir().join("objects/morph/step_0.xyz"),
        obj_dir.path().join("step_0.xyz"),
    )
    .expect("copy step file");

    let out_dir = tempfile::tempdir().expect("create out dir");
    let out = run(&[
        "morph",
        &path_str(obj_dir.path()),
        "--config",
        &path_str(&scene("morph_track.json")),
        "--out",
        &path_str(out_dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    // One step is an ordinary solve: same artifacts, no chain summary.
    assert!(out_dir.path().join("trace.json").exists());
    assert!(out_dir.path().join("grasp.txt").exists());
    assert!(out_dir.path().join("deltanorm.csv").exists());
    assert!(!stdout_of(&out).contains("steps attempted"));
}

#[test]
fn flags_override_config_file_values() {
    // Shrinking the round cap to 1 on a scene that needs several rounds to
    // stall proves the flag reaches the game loop: the trace must stop at
    // round 1 with a RoundCap outcome (exit 2).
    let dir = tempfile::tempdir().expect("create temp dir");
    let out = run(&[
        "solve",
        "--config",
        &path_str(&scene("open_claw8.json")),
        "--rounds",
        "1",
        "--out",
        &path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    let trace_text = std::fs::read_to_string(dir.path().join("trace.json")).expect("trace.json");
    let trace: GameTrace = serde_json::from_str(&trace_text).expect("trace.json parses");
    assert_eq!(trace.rounds.len(), 1);
}
