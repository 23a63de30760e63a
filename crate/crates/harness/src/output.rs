//! Versioned CSV tables, the run manifest and the resumable progress log.

use crate::error::{HarnessError, Result};
use crate::runner::{RunRecord, TaskId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const SWEEP_SCHEMA: &str = "qeopt-sweep/1";
pub const INSTANCE_SCHEMA: &str = "qeopt-instance/1";
pub const DETAIL_SCHEMA: &str = "qeopt-detail/1";
pub const OPTIMAL_SCHEMA: &str = "qeopt-optimal/1";
pub const SCALING_SCHEMA: &str = "qeopt-scaling/1";
pub const GAP_SCHEMA: &str = "qeopt-gap/1";
pub const LEDGER_SCHEMA: &str = "qeopt-ledger/1";
pub const MANIFEST_SCHEMA: &str = "qeopt-manifest/1";

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const INSTANCE_FILE: &str = "per_instance.csv";
pub const DETAIL_FILE: &str = "detail.csv";
pub const OPTIMAL_FILE: &str = "optimal.csv";
pub const SCALING_FILE: &str = "scaling.csv";
pub const GAP_FILE: &str = "gap.csv";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PROGRESS_FILE: &str = "progress.jsonl";

/// Writes `#schema=`, `#units=`, then a header row and one row per record.
///
/// The file is written to a temporary name and renamed into place.
pub fn write_table<T: Serialize>(path: &Path, schema: &str, units: &str, rows: &[T]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut file = File::create(&tmp)?;
        writeln!(file, "#schema={schema}")?;
        writeln!(file, "#units={units}")?;
        let mut w = csv::Writer::from_writer(file);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a table written by [`write_table`], rejecting any other schema.
pub fn read_table<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let found = first.trim_end().strip_prefix("#schema=").unwrap_or("");
    if found != schema {
        return Err(HarnessError::Schema(format!(
            "{}: expected schema {schema}, found {:?}",
            path.display(),
            first.trim_end()
        )));
    }
    let mut units = String::new();
    reader.read_line(&mut units)?;
    if !units.starts_with("#units=") {
        return Err(HarnessError::Schema(format!("{}: missing #units line", path.display())));
    }
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(HarnessError::from))
        .collect()
}

/// A task or scope that did not produce results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub scope: String,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn from_error(scope: impl Into<String>, e: &HarnessError) -> Self {
        let (kind, message) = match e {
            HarnessError::Cap(m) => ("cap", m.clone()),
            HarnessError::InsufficientData(m) => ("insufficient-data", m.clone()),
            HarnessError::Config(m) => ("config", m.clone()),
            other => ("error", other.to_string()),
        };
        Self {
            scope: scope.into(),
            kind: kind.into(),
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub workers: usize,
    pub tasks_total: usize,
    pub tasks_resumed: usize,
    pub files: Vec<String>,
    pub failures: Vec<Failure>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Schema(format!("manifest: {e}")))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(HarnessError::Schema(format!("manifest schema {:?}", m.schema)));
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct ProgressHeader {
    config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct ProgressLine {
    task: TaskId,
    records: Vec<RunRecord>,
}

/// Append-only log of finished tasks, so an interrupted run can pick up where
/// it stopped.
#[derive(Debug)]
pub struct Progress {
    sink: Option<Mutex<File>>,
    done: HashMap<TaskId, Vec<RunRecord>>,
}

impl Progress {
    /// No log; every task runs.
    pub fn disabled() -> Self {
        Self {
            sink: None,
            done: HashMap::new(),
        }
    }

    /// Opens `dir/progress.jsonl`. Finished tasks are loaded when the log was
    /// written for the same config hash and `fresh` is false; otherwise the log
    /// is restarted.
    pub fn open(dir: &Path, config_hash: &str, fresh: bool) -> Result<Self> {
        let path = dir.join(PROGRESS_FILE);
        let mut done = HashMap::new();
        let mut reuse = false;
        if !fresh && path.exists() {
            let mut lines = BufReader::new(File::open(&path)?).lines();
            if let Some(Ok(first)) = lines.next() {
                if let Ok(h) = serde_json::from_str::<ProgressHeader>(&first) {
                    reuse = h.config_hash == config_hash;
                }
            }
            if reuse {
                // A torn final line from a crash simply fails to parse.
                for line in lines.map_while(|l| l.ok()) {
                    if let Ok(p) = serde_json::from_str::<ProgressLine>(&line) {
                        done.insert(p.task, p.records);
                    }
                }
            }
        }
        let file = if reuse {
            let text = fs::read_to_string(&path)?;
            let mut f = OpenOptions::new().append(true).open(&path)?;
            if !text.ends_with('\n') {
                writeln!(f)?;
            }
            f
        } else {
            let mut f = File::create(&path)?;
            let header = ProgressHeader {
                config_hash: config_hash.to_string(),
            };
            writeln!(f, "{}", serde_json::to_string(&header).expect("header serializes"))?;
            f
        };
        Ok(Self {
            sink: Some(Mutex::new(file)),
            done,
        })
    }

    pub fn completed(&self, id: &TaskId) -> Option<&Vec<RunRecord>> {
        self.done.get(id)
    }

    pub fn record(&self, id: &TaskId, records: &[RunRecord]) -> Result<()> {
        if let Some(sink) = &self.sink {
            let line = serde_json::to_string(&ProgressLine {
                task: id.clone(),
                records: records.to_vec(),
            })
            .expect("progress serializes");
            let mut f = sink.lock().expect("progress lock");
            writeln!(f, "{line}")?;
            f.flush()?;
        }
        Ok(())
    }
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}
