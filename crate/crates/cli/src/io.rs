//! Input and output plumbing. Outputs go through a temporary file in the
//! target directory and are renamed into place on success, so a failed run
//! never leaves a truncated artifact behind.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use epipulse_core::jsonl;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::NamedTempFile;

pub fn is_stdio(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p.as_os_str() == "-")
}

pub fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    match path {
        p if is_stdio(p) => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(Box::new(BufReader::new(f)))
        }
        None => unreachable!(),
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: Option<&Path>) -> Result<Vec<T>> {
    let label = display(path);
    jsonl::read_all(open_input(path)?).with_context(|| format!("reading {label}"))
}

/// Feeds records to `f` in chunks of at most `chunk`.
pub fn for_chunks<T: DeserializeOwned>(
    path: Option<&Path>,
    chunk: usize,
    mut f: impl FnMut(Vec<T>) -> Result<()>,
) -> Result<()> {
    let label = display(path);
    let mut buf = Vec::with_capacity(chunk);
    for record in jsonl::read_records(open_input(path)?) {
        buf.push(record.with_context(|| format!("reading {label}"))?);
        if buf.len() == chunk {
            f(std::mem::replace(&mut buf, Vec::with_capacity(chunk)))?;
        }
    }
    if !buf.is_empty() {
        f(buf)?;
    }
    Ok(())
}

pub fn display(path: Option<&Path>) -> String {
    match path {
        p if is_stdio(p) => "<stdio>".to_string(),
        Some(p) => p.display().to_string(),
        None => unreachable!(),
    }
}

enum Sink {
    Stdout(io::StdoutLock<'static>),
    File(BufWriter<NamedTempFile>, PathBuf),
}

/// An output artifact, committed by [`Output::finish`].
pub struct Output(Sink);

impl Output {
    pub fn create(path: Option<&Path>) -> Result<Self> {
        match path {
            p if is_stdio(p) => Ok(Output(Sink::Stdout(io::stdout().lock()))),
            Some(p) => {
                let dir = match p.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d,
                    _ => Path::new("."),
                };
                let tmp = NamedTempFile::new_in(dir).with_context(|| format!("creating {}", p.display()))?;
                Ok(Output(Sink::File(BufWriter::new(tmp), p.to_path_buf())))
            }
            None => unreachable!(),
        }
    }

    pub fn finish(self) -> Result<()> {
        match self.0 {
            Sink::Stdout(mut s) => s.flush().context("writing to stdout"),
            Sink::File(w, path) => {
                let tmp = w.into_inner().map_err(|e| e.into_error()).with_context(|| format!("writing {}", path.display()))?;
                #[cfg(unix)]
                {
                    use std::os::unix::fs::PermissionsExt;
                    // temp files are created 0600
                    tmp.as_file()
                        .set_permissions(std::fs::Permissions::from_mode(0o644))
                        .with_context(|| format!("writing {}", path.display()))?;
                }
                tmp.persist(&path)
                    .map_err(|e| e.error)
                    .with_context(|| format!("writing {}", path.display()))?;
                Ok(())
            }
        }
    }

    pub fn jsonl<T: Serialize>(&mut self, record: &T) -> Result<()> {
        jsonl::write_record(self, record).context("writing output")
    }
}

impl Write for Output {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match &mut self.0 {
            Sink::Stdout(s) => s.write(buf),
            Sink::File(w, _) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match &mut self.0 {
            Sink::Stdout(s) => s.flush(),
            Sink::File(w, _) => w.flush(),
        }
    }
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = Output::create(path)?;
    serde_json::to_writer_pretty(&mut out, value).context("writing output")?;
    out.write_all(b"\n").context("writing output")?;
    out.finish()
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    let mut out = Output::create(path)?;
    out.write_all(text.as_bytes()).context("writing output")?;
    out.finish()
}
