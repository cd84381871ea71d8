use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::commands::{execute, Command};
use super::emit::{read_json, write_json};
use super::layout::LayoutFile;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance written next to every run's outputs. Everything except the
/// timestamps determines the outputs bit for bit; the thread count is not
/// recorded because it never affects them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub command: Command,
    /// The circuit as read, in file units, so a rerun does not depend on the
    /// original file.
    pub layout: Option<LayoutFile>,
    pub master_seed: u64,
    pub code_version: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Executes `command` into `out_dir` and writes [`MANIFEST_FILE`] there.
pub fn run(
    command: &Command,
    layout: Option<&LayoutFile>,
    master_seed: u64,
    out_dir: &Path,
) -> Result<RunManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let started = now_ms();
    let outputs = execute(command, layout, master_seed, out_dir)?;
    let manifest = RunManifest {
        command: command.clone(),
        layout: layout.cloned(),
        master_seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        outputs,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Repeats the run recorded in `manifest_path` into `out_dir`.
pub fn rerun(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest> {
    let m: RunManifest = read_json(manifest_path)?;
    if m.code_version != env!("CARGO_PKG_VERSION") {
        return Err(Error::Precondition(format!(
            "manifest written by version {}, this is {}",
            m.code_version,
            env!("CARGO_PKG_VERSION")
        )));
    }
    run(&m.command, m.layout.as_ref(), m.master_seed, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::commands::{ClassifyParams, YBuildParams};

    #[test]
    fn manifest_round_trips_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = Command::YBuild(YBuildParams::default());
        let m = run(&cmd, None, 7, dir.path()).unwrap();
        assert_eq!(m.outputs, vec!["layout.json".to_string()]);
        let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["subcommand"], "y-build");
        assert_eq!(v["master_seed"], 7);
        assert!(v["parameters"]["current_a"].is_number());

        let again = tempfile::tempdir().unwrap();
        let m2 = rerun(&dir.path().join(MANIFEST_FILE), again.path()).unwrap();
        assert_eq!(m2.command, m.command);
        let a = std::fs::read(dir.path().join("layout.json")).unwrap();
        let b = std::fs::read(again.path().join("layout.json")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failed_runs_write_no_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cmd = Command::Classify(ClassifyParams {
            d_um: -1.0,
            current_a: 0.8,
            bias_g: 12.0,
        });
        assert!(run(&cmd, None, 1, dir.path()).is_err());
        assert!(!dir.path().join(MANIFEST_FILE).exists());
    }
}
