//! Run-configuration plumbing and the three command implementations behind
//! the `graspgame` binary: `solve` plays the hand-object game and writes
//! replayable artifacts, `verify` audits a stored grasp with the sampling
//! escape search, and `morph` replays a sequence of deforming clouds with
//! warm starts.
//!
//! Exit codes are part of the contract so scripts can branch on outcomes:
//! 0 for a firm grasp (or a clean verify), 1 for any load, parse, or solve
//! error, 2 for a completed but non-firm run, 3 when verify finds an escape.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};

use graspgame::game::{brute_force_escape, run_game, GameConfig, GameOutcome, GameTrace};
use graspgame::hand::{load_hand_spec, HandSpec, RobotState};
use graspgame::object::{load_object_cloud, EscapeBounds, ObjectCloud};
use graspgame::solver::AlConfig;

pub const EXIT_FIRM: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NON_FIRM: i32 = 2;
pub const EXIT_ESCAPE: i32 = 3;

/// Direction and magnitude budgets for the verify command's escape search.
const VERIFY_DIRS: usize = 600;
const VERIFY_MAGS: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{context} {path}: {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("loading {what} {path}: {source}")]
    Load {
        what: &'static str,
        path: PathBuf,
        #[source]
        source: graspgame::Error,
    },
    #[error("solver failure: {0}")]
    Engine(#[from] graspgame::Error),
    #[error("{0}")]
    Invalid(String),
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_file(context: &'static str, path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        context,
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        context: "writing",
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// One full run description. The same document drives all three commands;
/// the bundled scene files under `assets/scenes` use exactly this shape.
///
/// Relative paths inside a config file are resolved against the file's own
/// directory; paths given on the command line resolve against the working
/// directory as usual.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hand_path: Option<PathBuf>,
    pub object_path: Option<PathBuf>,
    /// Downsample the cloud to this many points (farthest-point) when set.
    pub object_sample_n: Option<usize>,
    /// Overrides the game's escape box when set; kept separate so a file or
    /// flag can change the box without restating the whole game section.
    pub epsilon_bounds: Option<EscapeBounds>,
    pub game: GameConfig,
    pub al1: AlConfig,
    pub al2: AlConfig,
    /// Recorded with the outputs. The solve pipeline itself is
    /// deterministic; the seed exists for downstream sampling scripts.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

/// Loads a config file and resolves its relative paths against the file's
/// directory.
pub fn load_run_config(path: &Path) -> CliResult<RunConfig> {
    let text = read_file("reading config", path)?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let rebase = |p: &mut Option<PathBuf>| {
        if let Some(inner) = p {
            if inner.is_relative() {
                *inner = dir.join(&inner);
            }
        }
    };
    rebase(&mut cfg.hand_path);
    rebase(&mut cfg.object_path);
    rebase(&mut cfg.output_dir);
    Ok(cfg)
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub hand: Option<PathBuf>,
    pub object: Option<PathBuf>,
    pub epsilon: Option<EscapeBounds>,
    pub rounds: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub fn apply_overrides(cfg: &mut RunConfig, ov: &Overrides) {
    if let Some(p) = &ov.hand {
        cfg.hand_path = Some(p.clone());
    }
    if let Some(p) = &ov.object {
        cfg.object_path = Some(p.clone());
    }
    if let Some(e) = &ov.epsilon {
        cfg.epsilon_bounds = Some(*e);
    }
    if let Some(r) = ov.rounds {
        cfg.game.max_rounds = r;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(p) = &ov.out {
        cfg.output_dir = Some(p.clone());
    }
}

/// Parses the `--epsilon` flag: either `TRANS,ROT` or a single value applied
/// to both halves of the displacement box.
pub fn parse_epsilon(s: &str) -> std::result::Result<EscapeBounds, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse = |t: &str| -> std::result::Result<f64, String> {
        t.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad epsilon value '{t}': {e}"))
    };
    match parts.as_slice() {
        [one] => {
            let v = parse(one)?;
            Ok(EscapeBounds {
                translation: v,
                rotation: v,
            })
        }
        [t, r] => Ok(EscapeBounds {
            translation: parse(t)?,
            rotation: parse(r)?,
        }),
        _ => Err("expected TRANS,ROT or a single value".to_string()),
    }
}

/// Hand, cloud, and effective solver settings for one run.
pub struct LoadedScene {
    pub spec: HandSpec,
    pub cloud: ObjectCloud,
    pub game: GameConfig,
    pub al1: AlConfig,
    pub al2: AlConfig,
}

pub fn load_scene(cfg: &RunConfig) -> CliResult<LoadedScene> {
    let hand_path = cfg
        .hand_path
        .as_ref()
        .ok_or_else(|| CliError::Invalid("no hand file given (--hand or config)".into()))?;
    let object_path = cfg
        .object_path
        .as_ref()
        .ok_or_else(|| CliError::Invalid("no object file given (--object or config)".into()))?;
    let spec = load_hand_spec(hand_path).map_err(|source| CliError::Load {
        what: "hand file",
        path: hand_path.clone(),
        source,
    })?;
    let cloud =
        load_object_cloud(object_path, cfg.object_sample_n).map_err(|source| CliError::Load {
            what: "object file",
            path: object_path.clone(),
            source,
        })?;
    let mut game = cfg.game.clone();
    if let Some(eps) = &cfg.epsilon_bounds {
        game.epsilon_bounds = *eps;
    }
    game.validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    cfg.al1
        .validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    cfg.al2
        .validate()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    log::info!(
        "scene: hand '{}' ({} joints, {} spheres), object {} points",
        spec.name,
        spec.dof(),
        spec.point_count(),
        cloud.len()
    );
    Ok(LoadedScene {
        spec,
        cloud,
        game,
        al1: cfg.al1.clone(),
        al2: cfg.al2.clone(),
    })
}

// ---------------------------------------------------------------------------
// Grasp file format
// ---------------------------------------------------------------------------

/// Serializes a hand configuration: base translation, base rotation vector,
/// then the joint angles, all at 17 significant digits so parsing the file
/// back reproduces the exact doubles.
pub fn grasp_text(state: &RobotState) -> String {
    let fmt6 = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.16e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let base = state.base.as_slice();
    let mut text = String::from("# hand configuration: base transform plus joint vector\n");
    text.push_str(&format!("base_translation {}\n", fmt6(&base[0..3])));
    text.push_str(&format!("base_rotvec {}\n", fmt6(&base[3..6])));
    text.push_str("joints");
    for q in state.joints.iter() {
        text.push_str(&format!(" {q:.16e}"));
    }
    text.push('\n');
    text
}

pub fn parse_grasp_text(text: &str) -> std::result::Result<RobotState, String> {
    let mut translation: Option<Vec<f64>> = None;
    let mut rotvec: Option<Vec<f64>> = None;
    let mut joints: Option<Vec<f64>> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let values: std::result::Result<Vec<f64>, String> = parts
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| format!("line {}: bad number '{t}': {e}", lineno + 1))
            })
            .collect();
        let values = values?;
        match key {
            "base_translation" | "base_rotvec" => {
                if values.len() != 3 {
                    return Err(format!("line {}: {key} needs 3 values", lineno + 1));
                }
                if key == "base_translation" {
                    translation = Some(values);
                } else {
                    rotvec = Some(values);
                }
            }
            "joints" => joints = Some(values),
            other => return Err(format!("line {}: unknown field '{other}'", lineno + 1)),
        }
    }
    let t = translation.ok_or("missing base_translation")?;
    let r = rotvec.ok_or("missing base_rotvec")?;
    let q = joints.ok_or("missing joints line")?;
    Ok(RobotState {
        base: Vector6::new(t[0], t[1], t[2], r[0], r[1], r[2]),
        joints: DVector::from_vec(q),
    })
}

pub fn read_grasp_file(path: &Path) -> CliResult<RobotState> {
    let text = read_file("reading grasp file", path)?;
    parse_grasp_text(&text).map_err(|message| CliError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn output_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        context: "creating output directory",
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn deltanorm_csv(trace: &GameTrace) -> String {
    let mut csv = String::from("round,delta_norm\n");
    for round in &trace.rounds {
        csv.push_str(&format!("{},{:.16e}\n", round.round, round.delta_norm));
    }
    csv
}

fn write_solve_outputs(dir: &Path, trace: &GameTrace) -> CliResult<()> {
    let json = serde_json::to_string_pretty(trace)
        .map_err(|e| CliError::Invalid(format!("serializing trace: {e}")))?;
    write_file(&dir.join("trace.json"), &json)?;
    write_file(&dir.join("grasp.txt"), &grasp_text(&trace.final_state))?;
    write_file(&dir.join("deltanorm.csv"), &deltanorm_csv(trace))?;
    Ok(())
}

fn describe(trace: &GameTrace) -> String {
    let last = trace
        .rounds
        .last()
        .map(|r| format!("{:.3e}", r.delta_norm))
        .unwrap_or_else(|| "n/a".to_string());
    format!(
        "{:?} after {} rounds, final escape norm {}",
        trace.outcome,
        trace.rounds.len(),
        last
    )
}

fn solve_inner(cfg: &RunConfig) -> CliResult<i32> {
    let scene = load_scene(cfg)?;
    let trace = run_game(
        &scene.spec,
        &scene.cloud,
        &scene.game,
        &scene.al1,
        &scene.al2,
        None,
    )?;
    if let Some(r) = trace.aborted_round {
        eprintln!(
            "solve aborted in round {r}: both players' inner solves hit non-finite values; \
             outputs hold the partial trace"
        );
    }
    let dir = output_dir(cfg)?;
    write_solve_outputs(&dir, &trace)?;
    println!("{}", describe(&trace));
    Ok(if trace.outcome == GameOutcome::FirmGrasp {
        EXIT_FIRM
    } else {
        EXIT_NON_FIRM
    })
}

pub fn cmd_solve(cfg: &RunConfig) -> i32 {
    match solve_inner(cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn verify_inner(cfg: &RunConfig, grasp_path: &Path) -> CliResult<i32> {
    if let Some(eps) = &cfg.epsilon_bounds {
        if eps.translation <= 0.0 && eps.rotation <= 0.0 {
            eprintln!("warning: escape box is empty, nothing can move; verdict is vacuous");
            println!("no escape found within the displacement box");
            return Ok(EXIT_FIRM);
        }
    }
    let scene = load_scene(cfg)?;
    let state = read_grasp_file(grasp_path)?;
    if state.joints.len() != scene.spec.dof() {
        return Err(CliError::Invalid(format!(
            "grasp file has {} joints but hand '{}' has {}",
            state.joints.len(),
            scene.spec.name,
            scene.spec.dof()
        )));
    }
    let escape = brute_force_escape(
        &scene.spec,
        &scene.cloud,
        &state,
        &scene.game.epsilon_bounds.as_vector(),
        VERIFY_DIRS,
        VERIFY_MAGS,
    )?;
    match escape {
        None => {
            println!("no escape found within the displacement box");
            Ok(EXIT_FIRM)
        }
        Some(twist) => {
            let d = twist.to_vector6();
            println!(
                "escape twist found, norm {:.16e}: translation [{:.16e} {:.16e} {:.16e}] rotation [{:.16e} {:.16e} {:.16e}]",
                twist.norm(),
                d[0],
                d[1],
                d[2],
                d[3],
                d[4],
                d[5]
            );
            Ok(EXIT_ESCAPE)
        }
    }
}

pub fn cmd_verify(cfg: &RunConfig, grasp_path: &Path) -> i32 {
    match verify_inner(cfg, grasp_path) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

// ---------------------------------------------------------------------------
// morph
// ---------------------------------------------------------------------------

/// Cloud files in a morph directory, ordered by file name.
fn morph_steps(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        context: "reading morph directory",
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|x| x == "xyz" || x == "ply")
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Invalid(format!(
            "no .xyz or .ply cloud files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn morph_inner(cfg: &RunConfig, dir: &Path) -> CliResult<i32> {
    let files = morph_steps(dir)?;
    if files.len() == 1 {
        // A one-step sequence is an ordinary solve of that cloud.
        let mut single = cfg.clone();
        single.object_path = Some(files[0].clone());
        return solve_inner(&single);
    }

    let scene_cfg = {
        let mut c = cfg.clone();
        c.object_path = Some(files[0].clone());
        c
    };
    let scene = load_scene(&scene_cfg)?;
    let out = output_dir(cfg)?;

    let mut lines: Vec<String> = Vec::new();
    let mut warm: Option<RobotState> = None;
    let mut firm = 0usize;
    let mut attempted = 0usize;
    let mut max_change = 0.0f64;
    let mut aborted = false;
    for (k, file) in files.iter().enumerate() {
        let cloud =
            load_object_cloud(file, cfg.object_sample_n).map_err(|source| CliError::Load {
                what: "object file",
                path: file.clone(),
                source,
            })?;
        attempted += 1;
        match run_game(
            &scene.spec,
            &cloud,
            &scene.game,
            &scene.al1,
            &scene.al2,
            warm.as_ref(),
        ) {
            Err(e) => {
                lines.push(format!("step {k}: aborted: {e}"));
                aborted = true;
                break;
            }
            Ok(trace) => {
                let change = warm
                    .as_ref()
                    .map(|prev| (&trace.final_state.joints - &prev.joints).amax())
                    .unwrap_or(0.0);
                max_change = max_change.max(change);
                if trace.outcome == GameOutcome::FirmGrasp {
                    firm += 1;
                }
                if let Some(r) = trace.aborted_round {
                    lines.push(format!(
                        "step {k}: aborted in round {r}, stopping the sequence"
                    ));
                    aborted = true;
                    break;
                }
                lines.push(format!(
                    "step {k}: {} (max joint change {:.3e} rad)",
                    describe(&trace),
                    change
                ));
                warm = Some(trace.final_state.clone());
            }
        }
    }

    lines.push(format!(
        "summary: {attempted}/{} steps attempted, {firm} firm, max per-joint change {max_change:.3e} rad",
        files.len()
    ));
    let report = lines.join("\n") + "\n";
    write_file(&out.join("morph.txt"), &report)?;
    print!("{report}");
    Ok(if aborted || firm < files.len() {
        EXIT_NON_FIRM
    } else {
        EXIT_FIRM
    })
}

pub fn cmd_morph(cfg: &RunConfig, dir: &Path) -> i32 {
    match morph_inner(cfg, dir) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_flag_accepts_pair_and_scalar() {
        let pair = parse_epsilon("0.01,0.2").unwrap();
        assert_eq!(pair.translation, 0.01);
        assert_eq!(pair.rotation, 0.2);
        let scalar = parse_epsilon("0").unwrap();
        assert_eq!(scalar.translation, 0.0);
        assert_eq!(scalar.rotation, 0.0);
        assert!(parse_epsilon("1,2,3").is_err());
        assert!(parse_epsilon("abc").is_err());
    }

    #[test]
    fn overrides_take_precedence_over_file_values() {
        let mut cfg = RunConfig {
            hand_path: Some(PathBuf::from("file_hand.json")),
            object_path: Some(PathBuf::from("file_object.xyz")),
            ..RunConfig::default()
        };
        let ov = Overrides {
            hand: Some(PathBuf::from("flag_hand.json")),
            object: None,
            epsilon: Some(EscapeBounds {
                translation: 0.001,
                rotation: 0.002,
            }),
            rounds: Some(3),
            seed: Some(7),
            out: Some(PathBuf::from("outdir")),
        };
        apply_overrides(&mut cfg, &ov);
        assert_eq!(cfg.hand_path.unwrap(), PathBuf::from("flag_hand.json"));
        assert_eq!(cfg.object_path.unwrap(), PathBuf::from("file_object.xyz"));
        assert_eq!(cfg.epsilon_bounds.unwrap().translation, 0.001);
        assert_eq!(cfg.game.max_rounds, 3);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.output_dir.unwrap(), PathBuf::from("outdir"));
    }

    #[test]
    fn grasp_text_round_trips_exact_doubles() {
        let state = RobotState {
            base: Vector6::new(
                0.1234567890123456,
                -7.5e-7,
                3.0f64.sqrt(),
                0.0,
                -0.5000000000000001,
                2.0f64.powi(-40),
            ),
            joints: DVector::from_vec(vec![1.0 / 3.0, -std::f64::consts::FRAC_PI_4]),
        };
        let parsed = parse_grasp_text(&grasp_text(&state)).unwrap();
        assert_eq!(parsed.base, state.base);
        assert_eq!(parsed.joints, state.joints);
    }

    #[test]
    fn grasp_parser_rejects_malformed_input() {
        assert!(parse_grasp_text("").is_err());
        assert!(parse_grasp_text("base_translation 1 2\nbase_rotvec 0 0 0\njoints\n").is_err());
        assert!(parse_grasp_text("base_translation 1 2 x\nbase_rotvec 0 0 0\njoints\n").is_err());
        assert!(parse_grasp_text("base_translation 1 2 3\njoints\n").is_err());
        let ok = parse_grasp_text("# c\nbase_translation 1 2 3\nbase_rotvec 0 0 0\njoints\n");
        assert_eq!(ok.unwrap().joints.len(), 0);
    }

    #[test]
    fn config_paths_resolve_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"hand_path": "h.json", "object_path": "/abs/o.xyz"}"#,
        )
        .unwrap();
        let cfg = load_run_config(&path).unwrap();
        assert_eq!(cfg.hand_path.unwrap(), dir.path().join("h.json"));
        assert_eq!(cfg.object_path.unwrap(), PathBuf::from("/abs/o.xyz"));
    }
}
