//! JSON-lines and CSV writers. JSON objects come out with sorted keys; CSV
//! numbers carry 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One JSON object per line. `serde_json::Value` keeps object keys in a
/// `BTreeMap`, so the key order is lexicographic.
pub fn json_line<W: Write, T: Serialize>(out: &mut W, record: &T) -> io::Result<()> {
    let value = serde_json::to_value(record).map_err(io::Error::other)?;
    writeln!(
        out,
        "{}",
        serde_json::to_string(&value).map_err(io::Error::other)?
    )
}

pub fn json_value<W: Write>(out: &mut W, value: &Value) -> io::Result<()> {
    json_line(out, value)
}

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv<'a, W: Write> {
    out: &'a mut W,
}

impl<'a, W: Write> Csv<'a, W> {
    pub fn new(out: &'a mut W, header: &[&str]) -> io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))
    }
}
