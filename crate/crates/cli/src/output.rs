use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use portdist::{Error, Result, VERSION};

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

/// Provenance shared by every JSON document.
pub struct Envelope<'a> {
    pub command: &'a str,
    pub argv: &'a [String],
    pub seed: Option<u64>,
    pub method: &'a str,
}

impl Envelope<'_> {
    pub fn wrap(&self, result: Value) -> Value {
        json!({
            "tool": "portdist",
            "version": VERSION,
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "method": self.method,
            "result": result,
        })
    }
}

/// Opens `path`, or stdout when absent, and hands the writer to `f`.
pub fn with_sink<F>(path: Option<&Path>, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_json(path: Option<&Path>, doc: &Value) -> Result<()> {
    with_sink(path, |w| {
        serde_json::to_writer_pretty(&mut *w, doc).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    })
}

/// Two-column CSV with a header.
pub fn write_pairs(path: Option<&Path>, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    with_sink(path, |w| {
        writeln!(w, "{},{}", header[0], header[1])?;
        for (x, y) in rows {
            writeln!(w, "{x},{y}")?;
        }
        Ok(())
    })
}

fn error_value(e: &Error) -> Value {
    let (row, column) = match e {
        Error::Csv { row, column, .. } => (Some(*row), Some(*column)),
        _ => (None, None),
    };
    json!({
        "error": {
            "kind": e.kind(),
            "message": e.to_string(),
            "row": row,
            "column": column,
        }
    })
}

/// Machine-readable error object on stderr.
pub fn report_error(e: &Error) {
    let _ = writeln!(io::stderr(), "{}", error_value(e));
}
