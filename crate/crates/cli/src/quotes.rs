//! Quote file ingestion.

use std::path::Path;

use rfr_sabr::calibration::{QuoteContext, QuoteEntry, QuoteSet};

use crate::error::CliError;

pub const QUOTE_HEADER: [&str; 5] = ["strike", "style", "quote_kind", "value", "weight"];

/// Parses a quote CSV (`#` lines are comments) and converts it into a
/// [`QuoteSet`]. Every malformed row is reported with its line number.
pub fn parse_quotes(text: &str, file: &Path, context: QuoteContext) -> Result<QuoteSet, CliError> {
    let schema = |rows: Vec<String>| CliError::Schema {
        file: file.to_path_buf(),
        rows,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| schema(vec![format!("unreadable header: {e}")]))?
        .clone();
    if header.iter().ne(QUOTE_HEADER) {
        return Err(schema(vec![format!(
            "header must be '{}', got '{}'",
            QUOTE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )]));
    }
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        match record.deserialize::<QuoteEntry>(Some(&header)) {
            Ok(e) => {
                entries.push(e);
                lines.push(line);
            }
            Err(e) => errors.push(format!("line {line}: {e}")),
        }
    }
    if !errors.is_empty() {
        return Err(schema(errors));
    }
    if entries.is_empty() {
        return Err(schema(vec!["no quotes".into()]));
    }
    QuoteSet::new(&entries, context).map_err(|e| match e {
        rfr_sabr::Error::InvalidQuote { index, reason } => {
            schema(vec![format!("line {}: {reason}", lines[index])])
        }
        other => CliError::Model(other),
    })
}
