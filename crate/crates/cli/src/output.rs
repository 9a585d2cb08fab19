//! Artifact writers. Every file starts with a reproducibility header: the
//! full resolved config (as commented TOML) plus the effective seed, so any
//! output can be regenerated from the file alone. Floats are written with 17
//! significant digits, which round-trips f64 losslessly.

use std::io::Write;
use std::path::Path;

pub fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn header_comments(config_echo: &str, seed: u64) -> Vec<String> {
    let mut lines = vec![format!("seed = {seed}")];
    lines.extend(config_echo.lines().map(|l| l.to_string()));
    lines
}

pub fn write_csv(
    path: &Path,
    comments: &[String],
    columns: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{}", columns.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let text = serde_json::to_string_pretty(value).expect("JSON serialization cannot fail here");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}
