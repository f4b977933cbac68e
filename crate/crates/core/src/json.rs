//! JSON encoding with floats written as `{:.16e}` (17 significant digits),
//! enough to round-trip any finite f64 exactly.

use crate::{Error, Result};
use serde::Serialize;
use serde_json::ser::Formatter;
use std::io;

struct SciFormatter;

impl Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:e}")
    }
}

/// Serializes to compact JSON with exact float round-tripping.
pub fn to_string_17<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidParameter(format!("json encoding failed: {e}")))?;
    Ok(String::from_utf8(out).expect("json output is utf-8"))
}
