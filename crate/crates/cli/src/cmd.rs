use std::io::{IsTerminal, Read, Write};
use std::path::Path;
use std::time::Duration;

use geosensor_core::catalog::Database;
use geosensor_core::codecs::MediaType;
use geosensor_core::ingest::{load_observations, load_raster, RasterLoad};
use geosensor_core::vector::{read_table, TableSchema};
use geosensor_core::{PlatformRecord, SensorRecord};
use geosensor_wqs::{AppState, ServiceConfig};

use crate::fail::{caret, Failure};
use crate::{Cli, Command, LoadObservations, LoadRaster, QueryArgs, RegisterSensor, ServeArgs};

pub fn run(cli: Cli) -> Result<(), Failure> {
    let root = cli.root.ok_or_else(|| Failure::user("no catalog given; pass --root or set GEOSENSOR_ROOT"))?;
    match cli.command {
        Command::Init => {
            Database::init(&root)?;
            println!("initialized {}", root.display());
            Ok(())
        }
        Command::LoadRaster(a) => cmd_load_raster(&root, a),
        Command::LoadObservations(a) => cmd_load_observations(&root, a),
        Command::RegisterSensor(a) => cmd_register_sensor(&root, a),
        Command::Query(a) => cmd_query(&root, a),
        Command::Serve(a) => cmd_serve(&root, a),
        Command::Describe { name } => cmd_describe(&root, name.as_deref()),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::user(format!("reading stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

fn write_stdout(bytes: &[u8]) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|_| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::internal(format!("writing stdout: {e}"))),
    }
}

fn cmd_load_raster(root: &Path, a: LoadRaster) -> Result<(), Failure> {
    let text = read_text(&a.asc)?;
    let db = Database::open(root)?;
    let spec = RasterLoad {
        coverage: a.name.clone(),
        band: a.band,
        srid: a.srid,
        acquired_at: a.timestamp,
        sensor_id: a.sensor,
        tile_size: a.tile_size,
        pixel_type: a.pixel_type,
    };
    let report = load_raster(&db, &spec, &text).map_err(|e| Failure::from(e).with_context(&a.asc))?;
    let e = report.extent;
    println!(
        "{} {} band {}: {} tiles, extent {} {} {} {}",
        if report.created { "created" } else { "extended" },
        a.name,
        a.band,
        report.tiles,
        e.min_x,
        e.min_y,
        e.max_x,
        e.max_y
    );
    Ok(())
}

fn cmd_load_observations(root: &Path, a: LoadObservations) -> Result<(), Failure> {
    let text = read_text(&a.csv)?;
    let db = Database::open(root)?;
    let schema = match &a.schema {
        Some(spec) => Some(
            TableSchema::parse_inline(&a.table, a.srid.unwrap_or_default(), spec, a.key.as_deref())
                .map_err(|e| Failure::user(e.to_string()))?,
        ),
        None => None,
    };
    let report = load_observations(&db, &a.table, &text, schema).map_err(|e| Failure::from(e).with_context(&a.csv))?;
    for r in &report.rejected {
        if r.column.is_empty() {
            eprintln!("{}:{}: {}", a.csv.display(), r.line, r.reason);
        } else {
            eprintln!("{}:{}: column {}: {}", a.csv.display(), r.line, r.column, r.reason);
        }
    }
    println!("{}: accepted {}, rejected {}", a.table, report.accepted, report.rejected.len());
    if report.all_rejected() {
        return Err(Failure::user(format!("every row of {} was rejected", a.csv.display())));
    }
    Ok(())
}

fn cmd_register_sensor(root: &Path, a: RegisterSensor) -> Result<(), Failure> {
    let db = Database::open(root)?;
    let platform = a.platform_name.map(|name| PlatformRecord {
        platform_id: a.platform.clone(),
        name,
        description: a.platform_description,
    });
    let sensor = SensorRecord {
        sensor_id: a.sensor_id.clone(),
        name: a.name,
        kind: a.kind,
        platform_id: a.platform,
        phenomenon: a.phenomenon,
        linked_object: a.linked,
    };
    db.register_sensor(sensor, platform)?;
    println!("registered sensor {}", a.sensor_id);
    Ok(())
}

fn cmd_query(root: &Path, a: QueryArgs) -> Result<(), Failure> {
    let q = match (&a.q, &a.file) {
        (Some(q), _) => q.clone(),
        (None, Some(f)) => read_text(f)?,
        (None, None) => return Err(Failure::user("no query given")),
    };
    let db = Database::open(root)?;
    let payload = geosensor_wqs::handle_query(&db, &q).map_err(|e| {
        let detail = e.position.map(|p| caret(&q, p)).unwrap_or_default();
        Failure { detail, ..Failure::from(e) }
    })?;
    let binary = matches!(payload.media_type, MediaType::Tiff | MediaType::Png | MediaType::OctetStream);
    match &a.output {
        Some(path) if path != Path::new("-") => std::fs::write(path, &payload.bytes)
            .map_err(|e| Failure::user(format!("{}: {e}", path.display()))),
        Some(_) => write_stdout(&payload.bytes),
        None if binary && std::io::stdout().is_terminal() => Err(Failure::user(format!(
            "refusing to write {} to a terminal; use --output",
            payload.media_type
        ))),
        None => write_stdout(&payload.bytes),
    }
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down, finishing in-flight requests");
}

fn cmd_serve(root: &Path, a: ServeArgs) -> Result<(), Failure> {
    let config = ServiceConfig {
        max_query_bytes: a.max_query_bytes,
        query_delay: Duration::from_millis(a.debug_query_delay_ms),
    };
    let state = AppState::open(root, config)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::internal(format!("starting runtime: {e}")))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.listen)
            .await
            .map_err(|e| Failure::user(format!("cannot listen on {}: {e}", a.listen)))?;
        let addr = listener.local_addr().map_err(|e| Failure::internal(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        geosensor_wqs::serve(listener, state, shutdown_signal())
            .await
            .map_err(|e| Failure::internal(format!("server error: {e}")))
    })
}

fn cmd_describe(root: &Path, name: Option<&str>) -> Result<(), Failure> {
    let db = Database::open(root)?;
    let doc = match name {
        None => geosensor_wqs::capabilities(&db)?,
        Some(n) if db.raster().contains(n) => geosensor_wqs::describe_coverage(&db, n)?,
        Some(n) if db.vector().contains(n) => {
            let caps = geosensor_wqs::capabilities(&db)?;
            let handle = db.vector().table(n).map_err(|e| Failure::internal(e.to_string()))?;
            let table = read_table(&handle).schema.name.clone();
            caps["tables"]
                .as_array()
                .and_then(|ts| ts.iter().find(|t| t["name"] == table.as_str()))
                .cloned()
                .ok_or_else(|| Failure::internal(format!("table {n:?} missing from capabilities")))?
        }
        Some(n) if db.sensor(n).is_ok() => geosensor_wqs::describe_sensor(&db, n)?,
        Some(n) if db.platform(n).is_ok() => geosensor_wqs::describe_platform(&db, n)?,
        Some(n) => return Err(Failure::user(format!("no coverage, table, sensor or platform named {n:?}"))),
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::internal(e.to_string()))?;
    text.push('\n');
    write_stdout(text.as_bytes())
}
