use crate::value::{Value, ValueKind};

/// Delivery format picked by the outermost select list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputFormat {
    Csv,
    GeoTiff,
    Png,
    Gml,
    /// `ST_AsBinary` geometry delivered inline as hex inside CSV.
    WkbInline,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::GeoTiff => "geotiff",
            OutputFormat::Png => "png",
            OutputFormat::Gml => "gml",
            OutputFormat::WkbInline => "wkb-inline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ValueKind,
}

#[derive(Debug, Clone)]
pub struct ResultSet {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
    pub format: OutputFormat,
    /// Column carrying the formatted payload, if any.
    pub format_column: Option<usize>,
}

impl ResultSet {
    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
