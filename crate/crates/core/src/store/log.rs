//! On-disk layout: one newline-delimited JSON file per task
//! (`<task>.ndjson`), plus occasional `<task>.snapshot-<seq>.json` files.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Event, StoreError};
use crate::ids::TaskId;
use crate::scoring::TaskScoreboard;

pub const LOG_SCHEMA_VERSION: u32 = 1;
const LOG_EXT: &str = "ndjson";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogLine {
    pub schema_version: u32,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotFile {
    pub schema_version: u32,
    pub task_id: TaskId,
    pub seq: u64,
    pub provisional: TaskScoreboard,
    pub official: TaskScoreboard,
}

#[derive(Debug)]
pub(crate) struct LogWriter {
    dir: PathBuf,
    files: BTreeMap<TaskId, File>,
    durable: bool,
}

impl LogWriter {
    pub(crate) fn new(dir: &Path, durable: bool) -> Result<Self, StoreError> {
        fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_owned(),
            files: BTreeMap::new(),
            durable,
        })
    }

    pub(crate) fn append(&mut self, task: &TaskId, event: &Event) -> Result<(), StoreError> {
        let path = self.dir.join(format!("{task}.{LOG_EXT}"));
        let file = match self.files.entry(task.clone()) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => {
                let f = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .map_err(|err| StoreError::io(&path, err))?;
                e.insert(f)
            }
        };
        let mut line = serde_json::to_vec(&LogLine {
            schema_version: LOG_SCHEMA_VERSION,
            event: event.clone(),
        })
        .map_err(|e| StoreError::Io(e.to_string()))?;
        line.push(b'\n');
        file.write_all(&line).map_err(|e| StoreError::io(&path, e))?;
        if self.durable {
            file.sync_data().map_err(|e| StoreError::io(&path, e))?;
        }
        Ok(())
    }

    pub(crate) fn write_snapshot(&self, snap: &SnapshotFile) -> Result<PathBuf, StoreError> {
        let path = self.dir.join(format!("{}.snapshot-{:08}.json", snap.task_id, snap.seq));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| StoreError::io(&self.dir, e))?;
        serde_json::to_writer_pretty(&mut tmp, snap).map_err(|e| StoreError::Io(e.to_string()))?;
        tmp.persist(&path).map_err(|e| StoreError::io(&path, e.error))?;
        Ok(path)
    }
}

/// Event log files under `path`: the file itself, or every `*.ndjson` in a directory.
pub fn log_files(path: &Path) -> Result<Vec<PathBuf>, StoreError> {
    if path.is_file() {
        return Ok(vec![path.to_owned()]);
    }
    if !path.exists() {
        return Err(StoreError::NotFound(format!("event log {} does not exist", path.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| StoreError::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == LOG_EXT))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_events(file: &Path) -> Result<Vec<Event>, StoreError> {
    let reader = BufReader::new(File::open(file).map_err(|e| StoreError::io(file, e))?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(file, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |message: String| StoreError::Corrupt {
            file: file.display().to_string(),
            line: i + 1,
            message,
        };
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        if parsed.schema_version != LOG_SCHEMA_VERSION {
            return Err(corrupt(format!("unsupported schemaVersion {}", parsed.schema_version)));
        }
        events.push(parsed.event);
    }
    Ok(events)
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}
