use std::path::Path;

use crate::errors::{CliError, CliResult};

pub const CSV_VERSION_COMMENT: &str = "# episim csv v1";

/// Prints an aligned text table; numeric-looking cells are right-aligned.
pub fn print_table(headers: &[&str], rows: &[Vec<String>]) {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let is_numeric = |s: &str| {
        !s.is_empty()
            && s.chars()
                .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | '%'))
    };
    let mut header_line = String::new();
    for (i, h) in headers.iter().enumerate() {
        if i > 0 {
            header_line.push_str("  ");
        }
        header_line.push_str(&format!("{h:<width$}", width = widths[i]));
    }
    println!("{}", header_line.trim_end());
    for row in rows {
        let mut line = String::new();
        for (i, width) in widths.iter().enumerate().take(cols) {
            if i > 0 {
                line.push_str("  ");
            }
            let cell = row.get(i).map(String::as_str).unwrap_or("");
            if is_numeric(cell) {
                line.push_str(&format!("{cell:>width$}"));
            } else {
                line.push_str(&format!("{cell:<width$}"));
            }
        }
        println!("{}", line.trim_end());
    }
}

/// Writes a CSV file with the version comment on the first line. The
/// write is atomic: the content lands in a sibling temp file first.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut content = String::new();
    content.push_str(CSV_VERSION_COMMENT);
    content.push('\n');
    content.push_str(&header.join(","));
    content.push('\n');
    for row in rows {
        content.push_str(&row.join(","));
        content.push('\n');
    }
    write_atomic(path, &content)
}

pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

pub fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|err| CliError::Config(format!("cannot serialize report: {err}")))?;
    println!("{text}");
    Ok(())
}
