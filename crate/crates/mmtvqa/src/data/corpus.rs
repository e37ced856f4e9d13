//! Parallel corpus ingestion: one sentence per line, plus a companion `.ids`
//! file naming the paired image of each line.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// File triple describing one corpus split on disk.
#[derive(Debug, Clone)]
pub struct SplitPaths {
    pub name: String,
    pub sources: PathBuf,
    pub targets: PathBuf,
    pub image_ids: PathBuf,
}

impl SplitPaths {
    /// Conventional layout: `<dir>/<name>.src`, `.tgt`, `.ids`.
    pub fn in_dir(dir: &Path, name: &str) -> Self {
        SplitPaths {
            name: name.to_string(),
            sources: dir.join(format!("{name}.src")),
            targets: dir.join(format!("{name}.tgt")),
            image_ids: dir.join(format!("{name}.ids")),
        }
    }
}

/// An aligned split of the corpus: line `i` of every field describes the
/// same example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub name: String,
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    pub image_ids: Vec<String>,
}

impl CorpusSplit {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Construct from parallel vectors, enforcing equal lengths.
    pub fn new(
        name: impl Into<String>,
        sources: Vec<String>,
        targets: Vec<String>,
        image_ids: Vec<String>,
    ) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::Alignment {
                context: "sources vs targets".into(),
                left: sources.len(),
                right: targets.len(),
            });
        }
        if sources.len() != image_ids.len() {
            return Err(Error::Alignment {
                context: "sources vs image ids".into(),
                left: sources.len(),
                right: image_ids.len(),
            });
        }
        Ok(CorpusSplit { name: name.into(), sources, targets, image_ids })
    }

    /// Keep only the rows at `indices`, preserving order.
    pub fn select(&self, indices: &[usize]) -> CorpusSplit {
        CorpusSplit {
            name: self.name.clone(),
            sources: indices.iter().map(|&i| self.sources[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
            image_ids: indices.iter().map(|&i| self.image_ids[i].clone()).collect(),
        }
    }
}

/// Read a text file as UTF-8 lines, reporting the first undecodable line.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        match std::str::from_utf8(raw) {
            Ok(s) => lines.push(s.to_string()),
            Err(_) => {
                return Err(Error::Encoding { path: path.display().to_string(), line: i + 1 })
            }
        }
    }
    // files conventionally end with a trailing newline
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    Ok(lines)
}

/// Load and validate one corpus split from its three files.
pub fn load_corpus(paths: &SplitPaths) -> Result<CorpusSplit> {
    let sources = read_lines(&paths.sources)?;
    let targets = read_lines(&paths.targets)?;
    let image_ids = read_lines(&paths.image_ids)?;
    CorpusSplit::new(paths.name.clone(), sources, targets, image_ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, lines: &[&str]) -> PathBuf {
        let p = dir.join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        p
    }

    #[test]
    fn loads_aligned_triple() {
        let dir = tempfile::tempdir().unwrap();
        let paths = SplitPaths {
            name: "train".into(),
            sources: write(dir.path(), "s", &["a dog", "a cat", "a bird"]),
            targets: write(dir.path(), "t", &["ein hund", "eine katze", "ein vogel"]),
            image_ids: write(dir.path(), "i", &["img0", "img1", "img2"]),
        };
        let split = load_corpus(&paths).unwrap();
        assert_eq!(split.len(), 3);
        assert_eq!(split.sources[1], "a cat");
        assert_eq!(split.image_ids[2], "img2");
    }

    #[test]
    fn mismatched_lengths_is_alignment_error() {
        let dir = tempfile::tempdir().unwrap();
        let paths = SplitPaths {
            name: "train".into(),
            sources: write(dir.path(), "s", &["a", "b", "c"]),
            targets: write(dir.path(), "t", &["x", "y"]),
            image_ids: write(dir.path(), "i", &["0", "1", "2"]),
        };
        match load_corpus(&paths) {
            Err(Error::Alignment { left: 3, right: 2, .. }) => {}
            other => panic!("expected alignment error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad");
        std::fs::write(&p, b"fine line\n\xff\xfe broken\n").unwrap();
        match read_lines(&p) {
            Err(Error::Encoding { line: 2, .. }) => {}
            other => panic!("expected encoding error at line 2, got {other:?}"),
        }
    }
}
