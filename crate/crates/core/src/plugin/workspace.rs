use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

/// File name a user's controller executable is stored under.
pub const ARTIFACT_NAME: &str = "controller";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("empty path")]
    Empty,
    #[error("path escapes the workspace: {0}")]
    Escape(String),
}

/// A user's private directory under the data root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workspace {
    user: String,
    dir: PathBuf,
}

impl Workspace {
    /// Opens (creating if needed) `<root>/users/<dir_name>`.
    pub fn open(root: &Path, user: &str, dir_name: &str) -> io::Result<Self> {
        let dir = root.join("users").join(dir_name);
        fs::create_dir_all(&dir)?;
        Ok(Self { user: user.to_string(), dir })
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifact_path(&self) -> PathBuf {
        self.dir.join(ARTIFACT_NAME)
    }

    pub fn has_artifact(&self) -> bool {
        self.artifact_path().is_file()
    }

    /// Resolves a workspace-relative path, refusing anything that could leave
    /// the workspace (absolute paths, `..`, symlinks pointing outside).
    pub fn resolve(&self, relative: &str) -> Result<PathBuf, PathError> {
        let rel = Path::new(relative);
        let mut out = self.dir.clone();
        let mut depth = 0;
        for comp in rel.components() {
            match comp {
                Component::Normal(c) => {
                    out.push(c);
                    depth += 1;
                }
                Component::CurDir => {}
                _ => return Err(PathError::Escape(relative.to_string())),
            }
        }
        if depth == 0 {
            return Err(PathError::Empty);
        }
        if relative.contains('\0') {
            return Err(PathError::Escape(relative.to_string()));
        }
        // an existing prefix may be a symlink; make sure it stays inside
        if let (Ok(base), Some(existing)) = (self.dir.canonicalize(), deepest_existing(&out)) {
            if let Ok(real) = existing.canonicalize() {
                if !real.starts_with(&base) {
                    return Err(PathError::Escape(relative.to_string()));
                }
            }
        }
        Ok(out)
    }
}

fn deepest_existing(path: &Path) -> Option<PathBuf> {
    let mut p = path.to_path_buf();
    loop {
        if p.symlink_metadata().is_ok() {
            return Some(p);
        }
        if !p.pop() {
            return None;
        }
    }
}
