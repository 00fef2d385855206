//! Staged, atomic output writing. Every file of a command is first written
//! to a hidden temp name in the target directory; only after all of them
//! succeed are they renamed into place, so a failing command never leaves
//! partial outputs behind.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const CSV_VERSION_HEADER: &str = "# omegagait-csv v1";

pub struct OutputStage {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl OutputStage {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputStage {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    /// Write `bytes` under a temp name; `name` must be a bare file name.
    pub fn stage(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        assert!(
            !name.contains('/') && !name.contains('\\'),
            "staged outputs are flat files"
        );
        let tmp = self.dir.join(format!(".tmp.{name}"));
        fs::write(&tmp, bytes)?;
        self.staged.push((tmp, self.dir.join(name)));
        Ok(())
    }

    /// Rename everything into place; returns the final paths.
    pub fn commit(mut self) -> io::Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.staged.len());
        for (tmp, dest) in self.staged.drain(..) {
            fs::rename(&tmp, &dest)?;
            done.push(dest);
        }
        Ok(done)
    }
}

impl Drop for OutputStage {
    // Abandoned stages (error paths) leave no temp litter.
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

/// CSV assembly: version comment, header row, then data rows.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        let mut buf = String::from(CSV_VERSION_HEADER);
        buf.push('\n');
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
