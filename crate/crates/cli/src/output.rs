//! Run directories: manifest, CSV tables, SVG plots, verdicts, and replay from a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gmc_core::io::{json_hash, sha256_hex, write_json};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::plan::{validate, Plan};
use crate::run::{execute, RunOutput, Verdict};
use crate::CliError;

pub const TOOL: &str = "gmclab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance record written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the config with the output path blanked; CSV rows trace back to it.
    pub run_id: String,
    pub config: RunConfig,
    pub resolved: Value,
    /// Output file name to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VerdictFile {
    run_id: String,
    pass: bool,
    verdicts: Vec<Verdict>,
}

/// What a finished run left on disk.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub verdicts: Vec<Verdict>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Process exit status: 0 iff every verdict passes.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

fn run_id(config: &RunConfig) -> Result<String, CliError> {
    let mut c = config.clone();
    c.output = PathBuf::new();
    Ok(json_hash(&c)?)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    let fail =
        |e: std::io::Error| CliError::Validation(format!("output directory {} is not writable: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".gmclab-write-test");
    std::fs::write(&probe, b"").map_err(fail)?;
    std::fs::remove_file(&probe).map_err(fail)?;
    Ok(())
}

/// Writes tables, plots, `verdicts.json` and `manifest.json` into `plan.config.output`.
pub fn write_run(plan: &Plan, output: &RunOutput) -> Result<RunSummary, CliError> {
    let dir = plan.config.output.clone();
    prepare_dir(&dir)?;
    let id = run_id(&plan.config)?;
    let mut outputs = BTreeMap::new();
    for (stem, table) in &output.tables {
        let name = format!("{stem}.csv");
        let mut table = table.clone();
        table.header.push("run_id".into());
        for row in &mut table.rows {
            row.push(id.clone());
        }
        let bytes = table.to_bytes()?;
        std::fs::write(dir.join(&name), &bytes)?;
        outputs.insert(name, sha256_hex(&bytes));
    }
    for (stem, svg) in &output.plots {
        let name = format!("{stem}.svg");
        std::fs::write(dir.join(&name), svg.as_bytes())?;
        outputs.insert(name, sha256_hex(svg.as_bytes()));
    }
    let verdicts = VerdictFile {
        run_id: id.clone(),
        pass: output.passed(),
        verdicts: output.verdicts.clone(),
    };
    write_json(&dir.join("verdicts.json"), &verdicts)?;
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        run_id: id,
        config: plan.config.clone(),
        resolved: plan.resolved.clone(),
        outputs,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunSummary {
        dir,
        manifest,
        verdicts: output.verdicts.clone(),
    })
}

/// Validates, executes and writes one run.
pub fn run(config: &RunConfig, workers: Option<usize>) -> Result<RunSummary, CliError> {
    let plan = validate(config)?;
    prepare_dir(&config.output)?;
    let out = execute(&plan, workers)?;
    write_run(&plan, &out)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read manifest {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayMode {
    /// Same config; CSV outputs must match byte for byte.
    Replay,
    /// The seed was overridden, so outputs are expected to differ.
    NonReplay,
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub mode: ReplayMode,
    pub summary: RunSummary,
    /// CSV files whose bytes differ from the original run (or are missing from either side).
    pub mismatched: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }

    /// 0 for a byte-identical replay; non-replay runs follow their verdicts.
    pub fn exit_code(&self) -> i32 {
        match self.mode {
            ReplayMode::Replay if self.identical() => 0,
            ReplayMode::Replay => 1,
            ReplayMode::NonReplay => self.summary.exit_code(),
        }
    }
}

/// Re-runs the config recorded in a manifest into `output` (default `<run dir>/replay`).
pub fn replay(
    manifest_path: &Path,
    output: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<ReplayReport, CliError> {
    let original = load_manifest(manifest_path)?;
    if original.tool != TOOL || original.version != VERSION {
        return Err(CliError::Validation(format!(
            "manifest was written by {} {}; this is {TOOL} {VERSION}; refusing to replay",
            original.tool, original.version
        )));
    }
    let mut config = original.config.clone();
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    config.output = output.unwrap_or_else(|| base.join("replay"));
    let mode = match seed {
        Some(s) if s != config.seed => {
            config.seed = s;
            ReplayMode::NonReplay
        }
        _ => ReplayMode::Replay,
    };
    let summary = run(&config, workers)?;
    let csv = |m: &Manifest| -> BTreeMap<String, String> {
        m.outputs
            .iter()
            .filter(|(k, _)| k.ends_with(".csv"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    };
    let (a, b) = (csv(&original), csv(&summary.manifest));
    let mut mismatched: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.clone())
        .collect();
    mismatched.extend(b.keys().filter(|k| !a.contains_key(*k)).cloned());
    Ok(ReplayReport {
        mode,
        summary,
        mismatched,
    })
}
