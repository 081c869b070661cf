//! In-memory filesystem backing the effectful builtins.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::syscall::normalize_path;

#[derive(Debug, thiserror::Error)]
pub enum VfsError {
    #[error("manifest is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("manifest entry `{0}` must be a string")]
    NotAString(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vfs {
    files: BTreeMap<String, String>,
    dirs: BTreeSet<String>,
}

impl Default for Vfs {
    /// A small fixed tree: a password file, two binaries and a static site.
    fn default() -> Self {
        let mut v = Vfs::empty();
        v.insert("/etc/passwd", "root:x:0:0:root:/root:/bin/sh\n");
        v.insert("/bin/ls", "\x7fELF ls");
        v.insert("/bin/cat", "\x7fELF cat");
        v.insert("/static/index.html", "<h1>hello</h1>\n");
        v
    }
}

impl Vfs {
    pub fn empty() -> Self {
        let mut dirs = BTreeSet::new();
        dirs.insert("/".to_string());
        Vfs {
            files: BTreeMap::new(),
            dirs,
        }
    }

    /// Parse a manifest of `"path" = "content"` pairs. Paths are normalized.
    pub fn from_manifest(text: &str) -> Result<Self, VfsError> {
        let table: toml::Table = text.parse()?;
        let mut v = Vfs::empty();
        for (path, content) in table {
            match content {
                toml::Value::String(s) => v.insert(&path, &s),
                _ => return Err(VfsError::NotAString(path)),
            }
        }
        Ok(v)
    }

    /// Add a file, creating its parent directories.
    pub fn insert(&mut self, path: &str, content: &str) {
        let path = normalize_path(path);
        let mut dir = String::new();
        for seg in path.trim_start_matches('/').split('/').collect::<Vec<_>>().split_last().map_or(&[][..], |(_, d)| d) {
            dir.push('/');
            dir.push_str(seg);
            self.dirs.insert(dir.clone());
        }
        self.files.insert(path, content.to_string());
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(String::as_str)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut String> {
        self.files.get_mut(path)
    }

    pub fn exists(&self, path: &str) -> bool {
        self.files.contains_key(path) || self.is_dir(path)
    }

    pub fn is_dir(&self, path: &str) -> bool {
        self.dirs.contains(path.trim_end_matches('/')) || path == "/"
    }

    pub fn remove(&mut self, path: &str) -> bool {
        self.files.remove(path).is_some()
    }

    pub fn mkdir(&mut self, path: &str) -> bool {
        !self.files.contains_key(path) && self.dirs.insert(path.trim_end_matches('/').to_string())
    }

    pub fn rename(&mut self, from: &str, to: &str) -> bool {
        match self.files.remove(from) {
            Some(c) => {
                self.insert(to, &c);
                true
            }
            None => false,
        }
    }

    pub fn files(&self) -> impl Iterator<Item = (&str, &str)> {
        self.files.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
