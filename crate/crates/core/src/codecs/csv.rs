//! RFC 4180 CSV with a header row, CRLF line endings.

use super::{CodecError, EncodedPayload, MediaType};
use crate::query::ResultSet;

pub fn encode_csv(rs: &ResultSet) -> Result<EncodedPayload, CodecError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| CodecError::Csv(e.to_string());
    w.write_record(rs.columns.iter().map(|c| c.name.as_str())).map_err(csv_err)?;
    for row in &rs.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CodecError::Csv(e.to_string()))?;
    Ok(EncodedPayload { media_type: MediaType::Csv, bytes })
}
