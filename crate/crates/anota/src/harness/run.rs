//! One execution of a script file on one input file.

use std::path::Path;

use crate::vm::{compile, execute, CompileError, ExecConfig, ExecResult};

use super::{ERROR_EXIT_CODE, USAGE_EXIT_CODE};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("script is not valid UTF-8")]
    Encoding,
    #[error(transparent)]
    Compile(#[from] CompileError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io { .. } | RunError::Encoding => USAGE_EXIT_CODE,
            RunError::Compile(_) => ERROR_EXIT_CODE,
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, RunError> {
    std::fs::read(path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_script(path: &Path) -> Result<String, RunError> {
    String::from_utf8(read_file(path)?).map_err(|_| RunError::Encoding)
}

/// Compile `script` and execute it once on the contents of `input`
/// (empty input when `None`).
pub fn run_files(script: &Path, input: Option<&Path>, config: &ExecConfig) -> Result<ExecResult, RunError> {
    let source = read_script(script)?;
    let input = match input {
        Some(p) => read_file(p)?,
        None => Vec::new(),
    };
    let program = compile(&source)?;
    Ok(execute(&program, &input, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_script_is_a_usage_error() {
        let e = run_files(Path::new("/nonexistent/x.anota"), None, &ExecConfig::default()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
