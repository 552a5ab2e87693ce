//! Machine CSV output: a versioned `#` header line, then a header row.
//! Numbers carry 17 significant digits so they parse back bit-exactly.

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

pub struct CsvTable {
    kind: &'static str,
    writer: csv::Writer<Vec<u8>>,
    error: Option<csv::Error>,
}

impl CsvTable {
    pub fn new(kind: &'static str, columns: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let error = writer.write_record(columns).err();
        Self {
            kind,
            writer,
            error,
        }
    }

    pub fn row(&mut self, fields: Vec<String>) {
        if self.error.is_none() {
            self.error = self.writer.write_record(&fields).err();
        }
    }

    pub fn finish(self) -> Result<String, CliError> {
        let fail = |e: String| CliError::Config(format!("csv output: {e}"));
        if let Some(e) = self.error {
            return Err(fail(e.to_string()));
        }
        let body = self.writer.into_inner().map_err(|e| fail(e.to_string()))?;
        let body = String::from_utf8(body).map_err(|e| fail(e.to_string()))?;
        Ok(format!(
            "# rfr-sabr {} v{SCHEMA_VERSION}\n{body}",
            self.kind
        ))
    }
}
