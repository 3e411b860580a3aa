use crate::run::{Outcome, Status, Table};
use serde_json::{json, Map, Value};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

/// Plain-text summary with one line per check.
pub fn render(o: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command: {}", o.command.name());
    let _ = writeln!(s, "model: {} (sha256 {})", o.model, o.model_hash);
    for line in &o.summary {
        let _ = writeln!(s, "{line}");
    }
    if !o.constants.is_empty() {
        let _ = writeln!(s, "constants:");
        for (k, v) in &o.constants {
            let _ = writeln!(s, "  {k} = {v}");
        }
    }
    if !o.checks.is_empty() {
        let _ = writeln!(s, "checks:");
        for c in &o.checks {
            let _ = writeln!(s, "  [{}] {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail);
        }
    }
    for w in &o.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    if let Some(e) = &o.error {
        let _ = writeln!(s, "error: {e}");
    }
    let status = match o.status {
        Status::Ok => "OK",
        Status::Fail => "FAIL",
        Status::Refused => "REFUSED",
        Status::Error => "ERROR",
    };
    let _ = writeln!(s, "status: {status}");
    s
}

pub fn to_json(o: &Outcome) -> Value {
    let mut m = Map::new();
    m.insert("schema".into(), json!(crate::config::CONFIG_SCHEMA));
    m.insert("command".into(), json!(o.command.name()));
    m.insert("model".into(), json!(o.model));
    m.insert("model_hash".into(), json!(o.model_hash));
    m.insert("status".into(), json!(o.status));
    m.insert("exit_code".into(), json!(o.exit_code));
    m.insert("checks".into(), json!(o.checks));
    m.insert("warnings".into(), json!(o.warnings));
    m.insert("error".into(), json!(o.error));
    for (k, v) in &o.result {
        m.insert(k.clone(), v.clone());
    }
    Value::Object(m)
}

pub fn write_csv(t: &Table, path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.flush()
}

/// Writes `<command>.json`, `<command>.csv` when there is a table, and `report.txt`.
pub fn write_artifacts(o: &Outcome, dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let name = o.command.name();
    let mut written = Vec::new();
    let json_path = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(&to_json(o)).map_err(io::Error::other)?;
    std::fs::write(&json_path, text + "\n")?;
    written.push(json_path);
    if let Some(t) = &o.table {
        let p = dir.join(format!("{name}.csv"));
        write_csv(t, &p)?;
        written.push(p);
    }
    let p = dir.join("report.txt");
    std::fs::write(&p, render(o))?;
    written.push(p);
    Ok(written)
}
