use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;

pub const CSV_SCHEMA: &str = "# cookie-walk-lab schema v1";

pub fn csv_string<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let body = String::from_utf8(w.into_inner()?).expect("csv output is utf-8");
    Ok(format!("{CSV_SCHEMA}\n{body}"))
}

/// JSON run report: config echo, result, pass flag and wall time.
pub fn json_report(command: &str, run: &Resolved, result: Value, pass: bool, start: Instant) -> Result<String> {
    let mut echo = run.raw.clone();
    echo.output = None;
    let report = json!({
        "tool": "cookie-walk-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": echo,
        "config_digest": run.digest(),
        "environment_digest": run.env.digest(),
        "seed": run.seed,
        "replicas": run.replicas,
        "result": result,
        "pass": pass,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

pub fn write_output(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}
