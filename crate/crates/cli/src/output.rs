//! JSON reports on stdout and CSV surfaces on disk. Both carry the tool
//! version, the resolved configuration and frame tags.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const TOOL: &str = "heston-degen";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub frames: Value,
}

impl Meta {
    pub fn new(command: &str, config: &impl Serialize, frames: Value) -> Self {
        Self { tool: TOOL, version: VERSION, command: command.into(), config: serde_json::to_value(config).expect("config serialises"), frames }
    }
}

/// `result` with a `meta` member added; `result` must serialise to an object.
pub fn report(meta: &Meta, result: impl Serialize) -> Value {
    let mut v = serde_json::to_value(result).expect("report serialises");
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("meta".into(), serde_json::to_value(meta).expect("meta serialises"));
            v
        }
        None => json!({ "result": v, "meta": meta }),
    }
}

pub fn print_json(v: &Value) {
    use std::io::Write;
    // a closed pipe downstream is not our failure
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("json"));
}

/// Fixed CSV dialect: `#` metadata lines, one header row, comma separated,
/// every number in `{:.16e}`, LF endings.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(meta: &Meta, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# tool: {} {}", meta.tool, meta.version);
        let _ = writeln!(text, "# command: {}", meta.command);
        let _ = writeln!(text, "# config: {}", serde_json::to_string(&meta.config).expect("json"));
        let _ = writeln!(text, "# frames: {}", serde_json::to_string(&meta.frames).expect("json"));
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{v:.16e}");
        }
        self.text.push('\n');
    }

    #[cfg(test)]
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(path, &self.text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// Reads `coord,value` pairs, skipping `#` lines and a non-numeric header.
pub fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::BadFlag(format!("--samples {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (cols.len() >= 2).then(|| (cols[0].parse::<f64>(), cols[1].parse::<f64>()));
        match parsed {
            Some((Ok(a), Ok(b))) => out.push((a, b)),
            _ if out.is_empty() && n == first_data_line(&text) => continue,
            _ => return Err(CliError::BadFlag(format!("--samples {} line {}: expected 'coord,value'", path.display(), n + 1))),
        }
    }
    Ok(out)
}

fn first_data_line(text: &str) -> usize {
    text.lines().position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).unwrap_or(0)
}
