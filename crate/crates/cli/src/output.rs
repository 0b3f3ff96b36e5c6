use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::failure::Failure;

pub const SCHEMA: u32 = 1;

/// Top-level JSON document. Fields serialize in declaration order, so
/// `schema` always comes first.
#[derive(Serialize)]
pub struct Envelope<'a, I: Serialize, R: Serialize> {
    pub schema: u32,
    pub command: &'a str,
    pub inputs: I,
    pub report: R,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Destination for the files a command produces.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Sink, Failure> {
        if let Some(d) = dir {
            fs::create_dir_all(d)
                .map_err(|e| Failure::io(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
        })
    }

    /// Prints `text` on stdout and stores it as `name` when an output
    /// directory is set.
    pub fn primary(&self, name: &str, text: &str) -> Result<(), Failure> {
        io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(e.to_string()))?;
        self.file(name, |w| w.write_all(text.as_bytes()))
    }

    /// Writes a secondary file; skipped without an output directory.
    pub fn file<F>(&self, name: &str, write: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
    {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        let f = fs::File::create(&path)
            .map_err(|e| Failure::io(format!("cannot create {}: {e}", path.display())))?;
        let mut w = io::BufWriter::new(f);
        write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
    }
}
