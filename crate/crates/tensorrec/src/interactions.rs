//! Tab-separated interaction logs: `user<TAB>item<TAB>epoch-seconds`.

use std::io::{BufRead, Write};

use tensorrec_core::data::Interaction;

use crate::error::{Error, Result};

/// Parses a log in file order. Blank lines and lines starting with `#` are
/// skipped; line numbers in errors are 1-based.
pub fn parse_interactions<R: BufRead>(reader: R) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let record = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(u), Some(q), Some(ts), None) => ts
                .trim()
                .parse::<i64>()
                .ok()
                .and_then(|ts| Interaction::new(u, q, ts).ok()),
            _ => None,
        };
        out.push(record.ok_or(Error::MalformedLine(i + 1))?);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

pub fn write_interactions<W: Write>(mut w: W, interactions: &[Interaction]) -> Result<()> {
    for x in interactions {
        writeln!(w, "{}\t{}\t{}", x.user, x.item, x.timestamp)?;
    }
    w.flush()?;
    Ok(())
}
