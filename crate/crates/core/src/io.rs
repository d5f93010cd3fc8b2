//! Plain delimited matrix files: one row per sample, first column the
//! sample id, optional header row of probe ids. Tab or comma delimiter is
//! detected from the first non-empty line. A first line is a header when its
//! first cell is `id`, `sample` or empty, or when any later cell is not a number.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::IntensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Tab,
    Comma,
}

impl Delimiter {
    pub fn as_char(self) -> char {
        match self {
            Delimiter::Tab => '\t',
            Delimiter::Comma => ',',
        }
    }

    fn detect(line: &str) -> Self {
        if line.contains('\t') {
            Delimiter::Tab
        } else {
            Delimiter::Comma
        }
    }
}

pub fn parse_matrix(text: &str) -> Result<IntensityMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((first_no, first)) = lines.next() else {
        return Err(Error::Parse {
            line: 1,
            message: "empty matrix file".into(),
        });
    };
    let delim = Delimiter::detect(first).as_char();
    let split = |l: &str| -> Vec<String> { l.split(delim).map(|f| f.trim().to_string()).collect() };

    let first_fields = split(first);
    // a leading `id` cell marks a header even when probe labels are numeric
    let is_header = matches!(first_fields[0].to_ascii_lowercase().as_str(), "id" | "sample" | "")
        || first_fields[1..].iter().any(|f| f.parse::<f64>().is_err());
    let mut probe_ids = None;
    let mut pending = Vec::new();
    if is_header {
        probe_ids = Some(first_fields[1..].to_vec());
    } else {
        pending.push((first_no, first_fields));
    }

    let width = probe_ids.as_ref().map(Vec::len);
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut n_probes = width;
    for (line, fields) in pending.into_iter().chain(lines.map(|(k, l)| (k, split(l)))) {
        let got = fields.len().saturating_sub(1);
        match n_probes {
            Some(n) if n != got => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {n} values after the sample id, found {got}"),
                })
            }
            None => n_probes = Some(got),
            _ => {}
        }
        ids.push(fields[0].clone());
        for (j, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: '{f}' is not a number", j + 2),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: non-finite value", j + 2),
                });
            }
            values.push(v);
        }
    }
    let n_probes = n_probes.unwrap_or(0);
    if ids.is_empty() {
        return Err(Error::Parse {
            line: first_no,
            message: "no sample rows".into(),
        });
    }
    let m = IntensityMatrix::from_flat(ids.len(), n_probes, values, ids)?;
    match probe_ids {
        Some(p) => m.with_probe_ids(p),
        None => Ok(m),
    }
}

pub fn read_matrix(path: &Path) -> Result<IntensityMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

/// Writes with a header row (`id` then probe ids, or `1..=T` when none are
/// attached). Values use the shortest representation that reads back exactly.
pub fn write_matrix<W: Write>(mut w: W, m: &IntensityMatrix, delim: Delimiter) -> std::io::Result<()> {
    let d = delim.as_char();
    write!(w, "id")?;
    match m.probe_ids() {
        Some(ids) => ids.iter().try_for_each(|p| write!(w, "{d}{p}"))?,
        None => m.probe_positions().iter().try_for_each(|p| write!(w, "{d}{p}"))?,
    }
    writeln!(w)?;
    for (id, row) in m.sample_ids().iter().zip(m.rows()) {
        write!(w, "{id}")?;
        for v in row {
            write!(w, "{d}{v:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Delimited table with a one-line header.
pub fn write_table<W: Write>(mut w: W, header: &[&str], rows: &[Vec<String>], delim: Delimiter) -> std::io::Result<()> {
    let d = delim.as_char().to_string();
    writeln!(w, "{}", header.join(&d))?;
    for row in rows {
        writeln!(w, "{}", row.join(&d))?;
    }
    Ok(())
}
