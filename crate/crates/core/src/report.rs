//! Number formatting and small CSV helpers shared by every exporter.

use std::io::Write;

use sha2::{Digest, Sha256};

/// Scientific notation with `digits` significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

/// 12 significant digits, the precision of every analysis CSV.
pub fn sig12(x: f64) -> String {
    sig(x, 12)
}

/// Writes one CSV line from already formatted fields.
pub fn write_row<W: Write + ?Sized, S: AsRef<str>>(w: &mut W, fields: &[S]) -> std::io::Result<()> {
    let mut first = true;
    for f in fields {
        if !first {
            w.write_all(b",")?;
        }
        w.write_all(f.as_ref().as_bytes())?;
        first = false;
    }
    w.write_all(b"\n")
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
