//! Output plumbing: every subcommand produces payload rows; this module
//! wraps them in run records (JSON lines) or flattens them to CSV.
//!
//! CSV columns are the union of flattened payload keys across all rows,
//! sorted lexicographically; nested objects use dotted keys, scalar arrays
//! join with `;`, and anything deeper is embedded as compact JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn write_records(
    format: Format,
    out: Option<&Path>,
    command: &str,
    config: &Value,
    rows: &[Value],
    started: Instant,
) -> io::Result<()> {
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    match format {
        Format::Json => {
            let wall_ms = started.elapsed().as_millis() as u64;
            for row in rows {
                let record = json!({
                    "command": command,
                    "version": env!("CARGO_PKG_VERSION"),
                    "wall_ms": wall_ms,
                    "config": config,
                    "payload": row,
                });
                serde_json::to_writer(&mut sink, &record)?;
                sink.write_all(b"\n")?;
            }
        }
        Format::Csv => {
            let flat: Vec<BTreeMap<String, String>> = rows.iter().map(flatten_row).collect();
            let columns: Vec<&String> = flat
                .iter()
                .flat_map(|r| r.keys())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let header: Vec<String> = columns.iter().map(|c| csv_cell(c)).collect();
            writeln!(sink, "{}", header.join(","))?;
            for row in &flat {
                let cells: Vec<String> = columns
                    .iter()
                    .map(|c| row.get(*c).map(|v| csv_cell(v)).unwrap_or_default())
                    .collect();
                writeln!(sink, "{}", cells.join(","))?;
            }
        }
    }
    sink.flush()
}

fn flatten_row(row: &Value) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    flatten("", row, &mut out);
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, inner, out);
            }
        }
        Value::Array(items) if items.iter().all(|x| !x.is_array() && !x.is_object()) => {
            let joined: Vec<String> = items.iter().map(scalar_text).collect();
            out.insert(prefix.to_string(), joined.join(";"));
        }
        other => {
            out.insert(prefix.to_string(), scalar_text(other));
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_handles_nesting_and_arrays() {
        let row = json!({
            "a": 1.5,
            "b": {"c": true, "d": [1, 2, 3]},
            "e": [[0, 1], [2]],
            "f": null,
        });
        let flat = flatten_row(&row);
        assert_eq!(flat["a"], "1.5");
        assert_eq!(flat["b.c"], "true");
        assert_eq!(flat["b.d"], "1;2;3");
        assert_eq!(flat["e"], "[[0,1],[2]]");
        assert_eq!(flat["f"], "");
    }

    #[test]
    fn csv_cells_escape_only_when_needed() {
        assert_eq!(csv_cell("plain"), "plain");
        assert_eq!(csv_cell("a,b"), "\"a,b\"");
        assert_eq!(csv_cell("q\"q"), "\"q\"\"q\"");
    }
}
