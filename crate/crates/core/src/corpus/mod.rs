//! Test programs: the files under `corpus/<category>/<name>.hir` and a
//! random program generator.

mod generate;

use std::io;
use std::path::{Path, PathBuf};

pub use generate::{generate, GenParams};

use crate::ir::{parse, ParseError, Program};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub category: String,
    pub name: String,
    pub path: PathBuf,
    pub program: Program,
}

pub fn load_file(path: &Path) -> Result<Program, CorpusError> {
    let src = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    parse(&src).map_err(|source| CorpusError::Parse { path: path.to_owned(), source })
}

/// Every `.hir` file one directory below `root`, sorted by path.
pub fn load_dir(root: &Path) -> Result<Vec<Entry>, CorpusError> {
    let io_err = |path: &Path| {
        let path = path.to_owned();
        move |source| CorpusError::Io { path, source }
    };
    let mut paths = Vec::new();
    for cat in std::fs::read_dir(root).map_err(io_err(root))? {
        let cat = cat.map_err(io_err(root))?.path();
        if !cat.is_dir() {
            continue;
        }
        for f in std::fs::read_dir(&cat).map_err(io_err(&cat))? {
            let f = f.map_err(io_err(&cat))?.path();
            if f.extension().is_some_and(|e| e == "hir") {
                paths.push(f);
            }
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let stem = |p: &Path| p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(Entry {
                category: stem(path.parent().unwrap()),
                name: stem(&path),
                program: load_file(&path)?,
                path,
            })
        })
        .collect()
}
