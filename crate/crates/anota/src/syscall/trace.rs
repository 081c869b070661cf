//! JSONL trace files: one [`SyscallEvent`] per line.

use std::io::{self, BufRead, Write};

use super::SyscallEvent;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parse a trace. Blank lines are skipped; line numbers are 1-based.
pub fn read_trace(reader: impl BufRead) -> Result<Vec<(usize, SyscallEvent)>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line).map_err(|source| TraceError::Malformed { line: i + 1, source })?;
        out.push((i + 1, ev));
    }
    Ok(out)
}

pub fn write_trace<'a>(mut w: impl Write, events: impl IntoIterator<Item = &'a SyscallEvent>) -> io::Result<()> {
    for ev in events {
        writeln!(w, "{}", ev.to_json_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_line_number() {
        let text = "\n{\"seq\":1,\"phase\":\"enter\",\"name\":\"read\",\"args\":[[\"fd\",3]],\"ret\":null,\"pid\":1,\"ts\":0}\n{oops}\n";
        match read_trace(text.as_bytes()) {
            Err(TraceError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
