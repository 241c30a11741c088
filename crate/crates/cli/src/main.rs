mod cmd;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use geosensor_core::raster::PixelType;
use geosensor_core::value::parse_timestamp;
use geosensor_core::{SensorKind, Timestamp};

#[derive(Parser, Debug)]
#[command(name = "geosensor", version, about = "Catalog administration, loading, querying and serving for a geosensor database")]
pub struct Cli {
    /// Catalog directory.
    #[arg(long, global = true, env = "GEOSENSOR_ROOT")]
    root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create an empty catalog.
    Init,
    /// Load one band of an ESRI ASCII grid.
    LoadRaster(LoadRaster),
    /// Insert observation rows from a CSV file.
    LoadObservations(LoadObservations),
    /// Register or replace a sensor record.
    RegisterSensor(RegisterSensor),
    /// Run a query and write its payload to stdout.
    Query(QueryArgs),
    /// Serve the web query service.
    Serve(ServeArgs),
    /// Print a JSON description of the catalog or one object in it.
    Describe {
        /// Coverage, table, sensor or platform; the whole catalog when absent.
        name: Option<String>,
    },
}

fn timestamp(s: &str) -> Result<Timestamp, String> {
    parse_timestamp(s).map_err(|e| format!("expected an RFC 3339 timestamp: {e}"))
}

#[derive(Args, Debug)]
pub struct LoadRaster {
    /// Coverage name.
    pub name: String,
    /// Band index, starting at 1.
    pub band: u32,
    /// ESRI ASCII grid file.
    pub asc: PathBuf,
    #[arg(long)]
    pub srid: i32,
    /// Acquisition time.
    #[arg(long, value_parser = timestamp)]
    pub timestamp: Timestamp,
    #[arg(long)]
    pub sensor: String,
    #[arg(long, default_value_t = 256)]
    pub tile_size: u32,
    #[arg(long, default_value = "float64")]
    pub pixel_type: PixelType,
}

#[derive(Args, Debug)]
pub struct LoadObservations {
    pub table: String,
    /// CSV file with a header row.
    pub csv: PathBuf,
    /// Column list `name:type,...`, needed when the table does not exist yet.
    #[arg(long, requires = "srid")]
    pub schema: Option<String>,
    #[arg(long)]
    pub srid: Option<i32>,
    /// Key column; the first number column by default.
    #[arg(long, requires = "schema")]
    pub key: Option<String>,
}

#[derive(Args, Debug)]
pub struct RegisterSensor {
    pub sensor_id: String,
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub kind: SensorKind,
    #[arg(long)]
    pub platform: String,
    #[arg(long)]
    pub phenomenon: String,
    /// Coverage (remote) or table (in-situ) holding the sensor's data.
    #[arg(long)]
    pub linked: String,
    /// Creates or replaces the platform record as well.
    #[arg(long)]
    pub platform_name: Option<String>,
    #[arg(long, requires = "platform_name", default_value = "")]
    pub platform_description: String,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["q", "file"])))]
pub struct QueryArgs {
    /// Query text.
    pub q: Option<String>,
    /// Read the query from a file, `-` for stdin.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Write the payload to this file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = geosensor_wqs::DEFAULT_LISTEN)]
    pub listen: String,
    #[arg(long, default_value_t = geosensor_wqs::DEFAULT_MAX_QUERY_BYTES)]
    pub max_query_bytes: usize,
    #[arg(long, hide = true, default_value_t = 0)]
    pub debug_query_delay_ms: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_env("GEOSENSOR_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level));
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_env_filter(filter).init();

    match cmd::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            for line in &f.detail {
                eprintln!("{line}");
            }
            ExitCode::from(f.code)
        }
    }
}
