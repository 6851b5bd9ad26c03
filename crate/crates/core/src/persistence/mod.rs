//! On-disk state: the device registry (`devices.jsonl`) and the append-only
//! command log (`command.log`).
//!
//! Log records are one line each:
//!
//! ```text
//! entry\t<json LogEntry>\t<len>:<crc32 hex>
//! clock\t<json timestamp>\t<len>:<crc32 hex>
//! ```
//!
//! `len` is the byte length of the JSON field and the checksum is CRC-32 over
//! the same bytes. Reading stops at the first record that is torn or fails its
//! checksum; everything before it is kept.

mod replay;

pub use replay::replay;

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::causality::{CommandLog, LogEntry, LogSink, StorageError};
use crate::engine::Engine;
use crate::model::{Clock, DeviceDescriptor, Registry, SystemClock, Timestamp};

pub const DEVICES_FILE: &str = "devices.jsonl";
pub const LOG_FILE: &str = "command.log";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a registry file. Blank lines and lines starting with `#` are skipped.
pub fn load_registry(path: &Path) -> Result<Registry, PersistError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_registry(&text).map_err(|(line, reason)| PersistError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    })
}

/// Registry from JSON-lines text; errors carry the 1-based line number.
pub fn parse_registry(text: &str) -> Result<Registry, (usize, String)> {
    let mut registry = Registry::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let device: DeviceDescriptor =
            serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        registry.insert(device).map_err(|e| (i + 1, e.to_string()))?;
    }
    Ok(registry)
}

pub fn save_registry(path: &Path, registry: &Registry) -> Result<(), PersistError> {
    let mut out = String::new();
    for d in registry.iter() {
        out.push_str(&serde_json::to_string(d).expect("descriptors serialize"));
        out.push('\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    fs::write(&tmp, out).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn encode_record(tag: &str, json: &str) -> String {
    format!(
        "{tag}\t{json}\t{}:{:08x}\n",
        json.len(),
        crc32fast::hash(json.as_bytes())
    )
}

/// Splits a record line (without its newline) into tag and JSON, verifying
/// the length and checksum.
pub fn decode_record(line: &str) -> Option<(&str, &str)> {
    let (tag, rest) = line.split_once('\t')?;
    let (json, check) = rest.rsplit_once('\t')?;
    let (len, crc) = check.split_once(':')?;
    if len.parse::<usize>().ok()? != json.len()
        || u32::from_str_radix(crc, 16).ok()? != crc32fast::hash(json.as_bytes())
    {
        return None;
    }
    Some((tag, json))
}

/// What could be recovered from a log file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogContents {
    pub entries: Vec<LogEntry>,
    /// The latest clock position recorded, or the time of the last entry.
    pub clock: Option<Timestamp>,
    /// Byte length of the intact prefix.
    pub valid_len: u64,
    /// Why reading stopped early, with the 1-based line number.
    pub discarded: Option<(usize, String)>,
}

pub fn parse_log(bytes: &[u8]) -> LogContents {
    let mut out = LogContents::default();
    let mut mark: Option<Timestamp> = None;
    let mut offset = 0usize;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let Some(nl) = bytes[offset..].iter().position(|b| *b == b'\n') else {
            out.discarded = Some((line_no, "torn record".into()));
            break;
        };
        let raw = &bytes[offset..offset + nl];
        match decode_line(raw, out.entries.last()) {
            Ok(Record::Entry(e)) => out.entries.push(*e),
            Ok(Record::Clock(t)) => mark = Some(mark.map_or(t, |m| m.max(t))),
            Err(reason) => {
                out.discarded = Some((line_no, reason));
                break;
            }
        }
        offset += nl + 1;
        out.valid_len = offset as u64;
    }
    let last_at = out.entries.last().map(|e| e.at);
    out.clock = match (mark, last_at) {
        (Some(m), Some(a)) => Some(m.max(a)),
        (m, a) => m.or(a),
    };
    out
}

enum Record {
    Entry(Box<LogEntry>),
    Clock(Timestamp),
}

fn decode_line(raw: &[u8], prev: Option<&LogEntry>) -> Result<Record, String> {
    let line = std::str::from_utf8(raw).map_err(|_| "not utf-8".to_string())?;
    let (tag, json) = decode_record(line).ok_or("bad checksum")?;
    match tag {
        "entry" => {
            let e: LogEntry = serde_json::from_str(json).map_err(|e| e.to_string())?;
            let expected = prev.map_or(1, |p| p.seq + 1);
            if e.seq != expected {
                return Err(format!("expected seq {expected}, found {}", e.seq));
            }
            Ok(Record::Entry(Box::new(e)))
        }
        "clock" => serde_json::from_str(json)
            .map(Record::Clock)
            .map_err(|e| e.to_string()),
        other => Err(format!("unknown record type {other:?}")),
    }
}

pub fn read_log(path: &Path) -> Result<LogContents, PersistError> {
    match fs::read(path) {
        Ok(bytes) => Ok(parse_log(&bytes)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(LogContents::default()),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Appends records to `command.log`, flushing each one before returning.
pub struct FileSink {
    out: BufWriter<File>,
    last_clock: Option<Timestamp>,
}

impl FileSink {
    /// Opens for appending, first cutting the file back to `valid_len` so a
    /// torn tail never sits in front of new records.
    pub fn open(path: &Path, valid_len: u64) -> Result<Self, PersistError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        let len = file.metadata().map_err(io_err(path))?.len();
        if len > valid_len {
            log::warn!("{}: dropping {} bytes of damaged tail", path.display(), len - valid_len);
            file.set_len(valid_len).map_err(io_err(path))?;
        }
        Ok(Self {
            out: BufWriter::new(file),
            last_clock: None,
        })
    }

    fn write(&mut self, tag: &str, json: &str) -> Result<(), StorageError> {
        self.out.write_all(encode_record(tag, json).as_bytes())?;
        self.out.flush()?;
        Ok(())
    }
}

impl LogSink for FileSink {
    fn append(&mut self, entry: &LogEntry) -> Result<(), StorageError> {
        let json = serde_json::to_string(entry).map_err(io::Error::other)?;
        self.write("entry", &json)
    }

    fn mark_clock(&mut self, at: Timestamp) -> Result<(), StorageError> {
        if self.last_clock.is_some_and(|t| t >= at) {
            return Ok(());
        }
        let json = serde_json::to_string(&at).map_err(io::Error::other)?;
        self.write("clock", &json)?;
        self.last_clock = Some(at);
        Ok(())
    }
}

/// A data directory holding both files.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PersistError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn registry_path(&self) -> PathBuf {
        self.root.join(DEVICES_FILE)
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join(LOG_FILE)
    }

    /// The stored registry, or an empty one if none was saved yet.
    pub fn load_registry(&self) -> Result<Registry, PersistError> {
        let path = self.registry_path();
        if !path.exists() {
            return Ok(Registry::new());
        }
        load_registry(&path)
    }

    pub fn save_registry(&self, registry: &Registry) -> Result<(), PersistError> {
        save_registry(&self.registry_path(), registry)
    }

    /// Reads the log and opens a sink positioned after its intact prefix.
    pub fn open_log(&self) -> Result<(LogContents, FileSink), PersistError> {
        let path = self.log_path();
        let contents = read_log(&path)?;
        if let Some((line, reason)) = &contents.discarded {
            log::warn!("{}:{line}: {reason}; ignoring the rest", path.display());
        }
        let sink = FileSink::open(&path, contents.valid_len)?;
        Ok((contents, sink))
    }
}

/// Builds an engine that continues from a persisted log: entries stay
/// queryable, rules and schedules are rebuilt, and new entries go to `sink`.
pub fn resume_engine(
    registry: Registry,
    clock: SystemClock,
    contents: LogContents,
    sink: FileSink,
) -> Engine {
    let boot = replay(&contents.entries, &registry, clock.now());
    let log = CommandLog::with_entries(contents.entries, Some(Box::new(sink)));
    let mut engine = Engine::new(registry, clock, log);
    engine.bootstrap(boot);
    engine
}

#[cfg(test)]
mod tests;
