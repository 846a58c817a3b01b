//! Run records and artifact writers.
//!
//! Every CLI invocation emits one or more [`RunRecord`]s as JSON-lines.
//! Writes go through a temp-file-then-rename path so partially written
//! artifacts never appear, and identical inputs produce byte-identical files.

use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::PhysParams;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// One named numeric result.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Observable {
    pub name: String,
    pub value: f64,
}

impl Observable {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Observable {
            name: name.into(),
            value,
        }
    }
}

/// Time source for record timestamps.
///
/// `verify-all` and the tests use [`Clock::Fixed`] so that repeated runs
/// produce byte-identical artifact trees; interactive commands use wall time.
#[derive(Debug, Clone, Copy)]
pub enum Clock {
    Wall,
    /// Fixed epoch seconds, used for deterministic artifacts.
    Fixed(u64),
}

impl Clock {
    pub fn now(&self) -> u64 {
        match self {
            Clock::Wall => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            Clock::Fixed(t) => *t,
        }
    }
}

/// Provenance record for one command execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub seed: u64,
    pub params: PhysParams,
    pub command: String,
    pub observables: Vec<Observable>,
    pub started_at: u64,
    pub finished_at: u64,
}

impl RunRecord {
    /// Build a record with a deterministic `run_id` derived from the seed,
    /// command string, and parameters.
    pub fn new(
        seed: u64,
        params: PhysParams,
        command: impl Into<String>,
        observables: Vec<Observable>,
        clock: Clock,
    ) -> Self {
        let command = command.into();
        let t = clock.now();
        RunRecord {
            run_id: run_id(seed, &command, &params),
            seed,
            params,
            command,
            observables,
            started_at: t,
            finished_at: t,
        }
    }
}

/// Deterministic run identifier: FNV-1a over (seed, command, params).
fn run_id(seed: u64, command: &str, params: &PhysParams) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&seed.to_le_bytes());
    eat(command.as_bytes());
    for v in [params.m, params.omega, params.theta, params.hbar] {
        eat(&v.to_le_bytes());
    }
    let slug: String = command
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .take(24)
        .collect();
    format!("{slug}-{h:016x}")
}

/// Write records as JSON-lines via a temp file + atomic rename.
pub fn write_jsonl(path: &Path, records: &[RunRecord]) -> Result<(), ReportError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

/// Write a CSV artifact with a fixed header via a temp file + atomic rename.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), ReportError> {
    let mut buf = String::new();
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    atomic_write(path, buf.as_bytes())
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let io_err = |source: std::io::Error| ReportError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Render a float for CSV output with full round-trip precision.
pub fn fmt_f64(v: f64) -> String {
    let mut s = format!("{v:?}");
    if s == "-0.0" {
        s = "0.0".to_string();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = PhysParams::unit();
        let recs = vec![RunRecord::new(
            7,
            p,
            "matrix invariants",
            vec![Observable::new("i1", 3.5)],
            Clock::Fixed(0),
        )];
        let path1 = dir.path().join("a.jsonl");
        let path2 = dir.path().join("b.jsonl");
        write_jsonl(&path1, &recs).unwrap();
        write_jsonl(&path2, &recs).unwrap();
        let a = std::fs::read(&path1).unwrap();
        let b = std::fs::read(&path2).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn run_id_depends_on_seed_and_command() {
        let p = PhysParams::unit();
        let a = RunRecord::new(1, p, "x", vec![], Clock::Fixed(0));
        let b = RunRecord::new(2, p, "x", vec![], Clock::Fixed(0));
        let c = RunRecord::new(1, p, "y", vec![], Clock::Fixed(0));
        assert_ne!(a.run_id, b.run_id);
        assert_ne!(a.run_id, c.run_id);
    }

    #[test]
    fn empty_record_list_creates_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        write_jsonl(&path, &[]).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(
            &path,
            &["t", "x"],
            &[vec!["0.0".into(), fmt_f64(1.25)]],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,x\n0.0,1.25\n");
    }
}
