//! Exit-code classification: 1 for user errors, 2 for internal ones.

use std::path::Path;

use geosensor_core::catalog::CatalogError;
use geosensor_core::ingest::IngestError;
use geosensor_core::raster::RasterError;
use geosensor_core::vector::VectorError;
use geosensor_wqs::ApiError;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Extra stderr lines such as a caret diagnostic.
    pub detail: Vec<String>,
}

impl Failure {
    pub fn user(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into(), detail: Vec::new() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into(), detail: Vec::new() }
    }

    /// Prefixes the message with the input file it concerns.
    pub fn with_context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

fn catalog_is_internal(e: &CatalogError) -> bool {
    matches!(
        e,
        CatalogError::Json { .. }
            | CatalogError::Raster(RasterError::CorruptTile { .. })
            | CatalogError::Vector(VectorError::CorruptRow { .. })
    )
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        if catalog_is_internal(&e) {
            Failure::internal(e.to_string())
        } else {
            Failure::user(e.to_string())
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Catalog(c) => c.into(),
            other => Failure::user(other.to_string()),
        }
    }
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let message = e.to_string();
        if e.is_internal() {
            Failure::internal(message)
        } else {
            Failure::user(message)
        }
    }
}

/// The source line holding byte `pos` with a caret under it.
pub fn caret(src: &str, pos: usize) -> Vec<String> {
    let pos = pos.min(src.len());
    let start = src[..pos].rfind('\n').map_or(0, |i| i + 1);
    let end = src[pos..].find('\n').map_or(src.len(), |i| pos + i);
    let line_no = src[..start].matches('\n').count() + 1;
    let col = src[start..pos].chars().count();
    vec![format!("  {line_no} | {}", &src[start..end]), format!("  {} | {}^", " ".repeat(line_no.to_string().len()), " ".repeat(col))]
}
