use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde::Serialize;

use crate::args::{Format, OutputArgs};
use crate::CliError;

fn sink(out: &OutputArgs) -> Result<Box<dyn Write>, CliError> {
    Ok(match &out.out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).map_err(|e| {
                CliError::usage(format!("cannot create {}: {e}", path.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_rows<T: Serialize>(rows: &[T], out: &OutputArgs) -> Result<(), CliError> {
    let w = sink(out)?;
    write_rows_to(w, rows, out.format)
}

pub fn write_rows_to<T: Serialize, W: Write>(mut w: W, rows: &[T], format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            for row in rows {
                csv.serialize(row).map_err(CliError::io)?;
            }
            csv.flush().map_err(CliError::io)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(CliError::io)?;
            writeln!(w).map_err(CliError::io)?;
            w.flush().map_err(CliError::io)?;
        }
    }
    Ok(())
}

/// JSON output for commands that also carry a summary object.
pub fn write_json<T: Serialize>(value: &T, out: &OutputArgs) -> Result<(), CliError> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::io)?;
    writeln!(w).map_err(CliError::io)?;
    w.flush().map_err(CliError::io)
}
