//! Headered `path,label` CSV listing the images of one task.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::task::Task;

const HEADER: &str = "path,label";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory unless absolute.
    pub path: String,
    pub label: String,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    task: Task,
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Validates `(path, label)` pairs against the task's label set.
    pub fn new(task: Task, root: impl Into<PathBuf>, rows: Vec<(String, String)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("manifest has no entries".into()));
        }
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(rows.len());
        for (i, (path, label)) in rows.into_iter().enumerate() {
            let row = i + 1;
            let class = task.class_index(&label).ok_or_else(|| {
                Error::Validation(format!(
                    "row {row}: label `{label}` is not one of {:?} for task {task}",
                    task.labels()
                ))
            })?;
            if path.is_empty() {
                return Err(Error::Validation(format!("row {row}: empty path")));
            }
            if !seen.insert(path.clone()) {
                return Err(Error::Validation(format!("row {row}: duplicate path `{path}`")));
            }
            entries.push(ManifestEntry { path, label, class });
        }
        Ok(Manifest {
            task,
            root: root.into(),
            entries,
        })
    }

    pub fn parse(text: &str, task: Task, root: impl Into<PathBuf>) -> Result<Self> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some(HEADER) => {}
            other => {
                return Err(Error::Validation(format!(
                    "expected header `{HEADER}`, found {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let [path, label] = fields[..] else {
                return Err(Error::Validation(format!(
                    "row {}: expected 2 fields, found {}",
                    i + 1,
                    fields.len()
                )));
            };
            rows.push((path.trim().to_owned(), label.trim().to_owned()));
        }
        Self::new(task, root, rows)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{}", e.path, e.label);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_manifest(path: impl AsRef<Path>, task: Task) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Manifest::parse(&text, task, root)
}
