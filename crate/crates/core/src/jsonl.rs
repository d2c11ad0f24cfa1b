//! One-JSON-object-per-line persistence.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Writes `items` as JSON lines via a temporary file and rename.
pub fn write_atomic<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(io::Error::other)?;
        buf.push(b'\n');
    }
    write_bytes_atomic(path, &buf)
}

/// Replaces `path` with `bytes` using write-then-rename.
pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = tmp_path(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Append-only JSON-lines writer. Each record is written with a single
/// `write_all` of the full line followed by a flush and `sync_data`, so a
/// killed process leaves at most one truncated trailing line.
pub struct JsonlAppender {
    file: File,
}

impl JsonlAppender {
    pub fn open(path: &Path) -> io::Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }

    pub fn append<T: Serialize>(&mut self, item: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(item).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.file.sync_data()
    }
}

/// Result of reading a JSON-lines file that may contain damaged lines.
#[derive(Debug)]
pub struct Lines<T> {
    pub records: Vec<T>,
    /// Raw text of lines that failed to parse, with their 0-based line index.
    pub rejected: Vec<(usize, String)>,
}

/// Reads every parseable record; unparseable or unterminated lines are returned
/// separately instead of failing the read. A missing file yields no records.
pub fn read_lenient<T: DeserializeOwned>(path: &Path) -> io::Result<Lines<T>> {
    let mut out = Lines {
        records: Vec::new(),
        rejected: Vec::new(),
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e),
    };
    let mut reader = BufReader::new(file);
    let mut index = 0;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        let terminated = line.ends_with('\n');
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() {
            match serde_json::from_str::<T>(body) {
                // an unterminated final line is a torn write even if it happens to parse
                Ok(rec) if terminated => out.records.push(rec),
                _ => out.rejected.push((index, body.to_string())),
            }
        }
        index += 1;
    }
    Ok(out)
}

/// Strict reader: any bad line is an error.
pub fn read_all<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    parse_str(&text)
}

pub fn parse_str<T: DeserializeOwned>(text: &str) -> io::Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
            })
        })
        .collect()
}
