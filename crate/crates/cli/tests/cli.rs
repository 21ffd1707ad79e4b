//! End-to-end tests of the `floodpulse` binary: exit codes, error shape,
//! artifact layout, and flag precedence.

use std::path::Path;
use std::process::{Command, Output};

fn floodpulse(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floodpulse"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn small_synth_config() -> &'static str {
    r#"
[run]
measure = "claims"
classes = "2"
seed = 5

[forest]
n_trees = 10
max_depth = 4

[synth]
preset = "planted-activity"
n_zones = 10
tiles_per_zone = 1
segments_per_zone = 1
traffic_periods_per_day = 12
activity_samples_per_day = 2
"#
}

#[test]
fn synth_then_validate_then_analyze_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), small_synth_config()).unwrap();

    let out = floodpulse(
        &["synth", "--config", "run.toml", "--out", "work"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "synth failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let data = dir.path().join("work").join("data");
    assert!(data.join("activity.csv").exists());
    assert!(data.join("ground_truth.csv").exists());

    // Point the real-data subcommands at the generated fileset.
    let inputs = format!(
        "[inputs]\n\
         activity = \"work/data/activity.csv\"\n\
         tile_zone_map = \"work/data/tile_zone_map.csv\"\n\
         traffic = \"work/data/traffic.csv\"\n\
         transactions = \"work/data/transactions.csv\"\n\
         posts = \"work/data/posts.csv\"\n\
         claims = \"work/data/claims.csv\"\n\
         population = \"work/data/population.csv\"\n\
         inundation = \"work/data/inundation.csv\"\n\
         lexicon = \"work/data/lexicon.tsv\"\n\
         negations = \"work/data/negations.txt\"\n\
         {}",
        small_synth_config()
            .replace("[synth]", "[unused_synth]")
            .split("[unused_synth]")
            .next()
            .unwrap()
    );
    std::fs::write(dir.path().join("real.toml"), &inputs).unwrap();

    let out = floodpulse(&["validate", "--config", "real.toml"], dir.path());
    assert!(
        out.status.success(),
        "validate failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: inputs valid"));

    let out = floodpulse(
        &["analyze", "--config", "real.toml", "--out", "results"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "analyze failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let results = dir.path().join("results");
    assert!(results.join("manifest.json").exists());
    assert!(results
        .join("reports")
        .join("claims_2")
        .join("ranks_response.csv")
        .exists());
    assert!(results.join("labels").join("labels_claims_2.csv").exists());
}

#[test]
fn full_produces_reports_and_seed_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), small_synth_config()).unwrap();

    let out = floodpulse(
        &[
            "full", "--config", "run.toml", "--out", "full_out", "--seed", "123",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "full failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest_text =
        std::fs::read_to_string(dir.path().join("full_out").join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text).unwrap();
    assert_eq!(manifest["subcommand"], "full");
    assert_eq!(
        manifest["seed"], 123,
        "--seed must override the config file"
    );
    let ranks = std::fs::read_to_string(
        dir.path()
            .join("full_out")
            .join("reports")
            .join("claims_2")
            .join("ranks_response.csv"),
    )
    .unwrap();
    assert!(ranks.starts_with("Feature,PersistenceDays,RankRangeMin,RankRangeMax,FinalRank"));
    assert!(ranks.contains("FE1,"));
}

#[test]
fn config_errors_exit_2_with_single_line_error() {
    let dir = tempfile::tempdir().unwrap();
    // analyze with no [inputs] block at all.
    let out = floodpulse(&["analyze"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(
        stderr.lines().count(),
        1,
        "stderr must be a single line: {stderr:?}"
    );
    assert!(stderr.starts_with("error[config] "), "got: {stderr}");

    // Unparsable config file.
    std::fs::write(dir.path().join("bad.toml"), "[run]\nwhatever = true\n").unwrap();
    let out = floodpulse(&["validate", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config] "));

    // Bad flag value is a usage error (clap exits 2 as well).
    let out = floodpulse(&["analyze", "--measure", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_labels_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), small_synth_config()).unwrap();
    let out = floodpulse(
        &["synth", "--config", "run.toml", "--out", "work"],
        dir.path(),
    );
    assert!(out.status.success());

    // Flatten the claims file so no 2-class split can exist.
    let claims_path = dir.path().join("work").join("data").join("claims.csv");
    let flat: String = std::fs::read_to_string(&claims_path)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                line.to_string()
            } else {
                format!("{},7", line.split(',').next().unwrap())
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&claims_path, flat + "\n").unwrap();
    // Population must be identical too so every normalized value ties.
    let pop_path = dir.path().join("work").join("data").join("population.csv");
    let flat_pop: String = std::fs::read_to_string(&pop_path)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                line.to_string()
            } else {
                format!("{},1000", line.split(',').next().unwrap())
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&pop_path, flat_pop + "\n").unwrap();

    let config = "[inputs]\n\
         activity = \"work/data/activity.csv\"\n\
         tile_zone_map = \"work/data/tile_zone_map.csv\"\n\
         traffic = \"work/data/traffic.csv\"\n\
         transactions = \"work/data/transactions.csv\"\n\
         posts = \"work/data/posts.csv\"\n\
         claims = \"work/data/claims.csv\"\n\
         population = \"work/data/population.csv\"\n\
         inundation = \"work/data/inundation.csv\"\n\
         lexicon = \"work/data/lexicon.tsv\"\n\
         negations = \"work/data/negations.txt\"\n\
         [run]\nmeasure = \"claims\"\nclasses = \"2\"\n"
        .to_string();
    std::fs::write(dir.path().join("flat.toml"), config).unwrap();
    let out = floodpulse(
        &["labels", "--config", "flat.toml", "--out", "flat_out"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[degenerate] "));
}

#[test]
fn missing_data_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[inputs]\n\
         activity = \"no/such/activity.csv\"\n\
         tile_zone_map = \"x\"\n\
         traffic = \"x\"\n\
         transactions = \"x\"\n\
         posts = \"x\"\n\
         claims = \"x\"\n\
         population = \"x\"\n\
         inundation = \"x\"\n\
         lexicon = \"x\"\n\
         negations = \"x\"\n";
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    let out = floodpulse(&["validate", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing input files"), "got: {stderr}");
}
