//! Vector-batch file formats: the conventional fvecs binary layout (per
//! vector, a little-endian u32 dimension followed by that many little-endian
//! f32 values) and a CSV alternative whose first line declares the
//! dimension. Parsers validate structure and reject non-finite values
//! before any large allocation.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Decodes an fvecs byte buffer. Every vector must carry the same
/// dimension; values are widened from f32. The per-vector length check
/// happens before the payload is touched, so a corrupt dimension header
/// cannot trigger an oversized allocation.
pub fn parse_fvecs(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.is_empty() {
        return Err(Error::EmptyInput("fvecs buffer"));
    }
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    let mut rows = 0usize;
    let mut offset = 0usize;
    while offset < bytes.len() {
        if bytes.len() - offset < 4 {
            return Err(Error::format(format!(
                "fvecs: truncated dimension header at byte {offset}"
            )));
        }
        let d = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
        offset += 4;
        if d == 0 {
            return Err(Error::format(format!("fvecs: vector {rows} has dimension 0")));
        }
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(format!(
                    "fvecs: vector {rows} has dimension {d}, expected {expected}"
                )));
            }
            Some(_) => {}
        }
        let payload = d
            .checked_mul(4)
            .ok_or_else(|| Error::format("fvecs: dimension overflows".to_string()))?;
        if bytes.len() - offset < payload {
            return Err(Error::format(format!(
                "fvecs: vector {rows} truncated ({} payload bytes missing)",
                payload - (bytes.len() - offset)
            )));
        }
        for i in 0..d {
            let start = offset + 4 * i;
            let value = f32::from_le_bytes(bytes[start..start + 4].try_into().unwrap());
            if !value.is_finite() {
                return Err(Error::format(format!(
                    "fvecs: non-finite value in vector {rows}"
                )));
            }
            data.push(f64::from(value));
        }
        offset += payload;
        rows += 1;
    }
    DenseMatrix::from_vec(rows, dim.unwrap(), data)
}

/// Encodes points as fvecs. Values are narrowed to f32, the format's
/// precision.
pub fn write_fvecs(points: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.rows() * (4 + 4 * points.cols()));
    for row in points.iter_rows() {
        out.extend_from_slice(&(points.cols() as u32).to_le_bytes());
        for &value in row {
            out.extend_from_slice(&(value as f32).to_le_bytes());
        }
    }
    out
}

/// Decodes the CSV alternative: a `dim,<d>` header line, then one
/// comma-separated row of `d` decimal values per vector. Blank lines are
/// ignored.
pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyInput("csv buffer"))?;
    let mut parts = header.split(',');
    let key = parts.next().unwrap_or("").trim();
    let declared = parts.next().map(str::trim);
    if key != "dim" || parts.next().is_some() {
        return Err(Error::format(format!(
            "csv: first line must be `dim,<d>`, got {header:?}"
        )));
    }
    let dim: usize = declared
        .unwrap_or("")
        .parse()
        .map_err(|_| Error::format(format!("csv: bad dimension in header {header:?}")))?;
    if dim == 0 {
        return Err(Error::format("csv: dimension must be positive".to_string()));
    }
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (line_no, line) in lines {
        let values: Vec<&str> = line.split(',').collect();
        if values.len() != dim {
            return Err(Error::format(format!(
                "csv line {}: expected {dim} values, got {}",
                line_no + 1,
                values.len()
            )));
        }
        for field in values {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::format(format!("csv line {}: bad number {field:?}", line_no + 1))
            })?;
            if !value.is_finite() {
                return Err(Error::format(format!(
                    "csv line {}: non-finite value",
                    line_no + 1
                )));
            }
            data.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyInput("csv: no data rows"));
    }
    DenseMatrix::from_vec(rows, dim, data)
}

/// Encodes points as CSV with the `dim,<d>` header. Values use Rust's
/// shortest round-trip decimal form.
pub fn write_csv(points: &DenseMatrix) -> String {
    let mut out = format!("dim,{}\n", points.cols());
    for row in points.iter_rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn format_of(path: &Path) -> Result<&'static str> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("fvecs") => Ok("fvecs"),
        Some("csv") => Ok("csv"),
        other => Err(Error::format(format!(
            "unsupported vector file extension {:?} (expected .fvecs or .csv)",
            other.unwrap_or("")
        ))),
    }
}

/// Reads a vector batch, dispatching on the file extension.
pub fn read_vectors_file(path: &Path) -> Result<DenseMatrix> {
    match format_of(path)? {
        "fvecs" => parse_fvecs(&std::fs::read(path)?),
        _ => parse_csv(&std::fs::read_to_string(path)?),
    }
}

/// Writes a vector batch, dispatching on the file extension.
pub fn write_vectors_file(path: &Path, points: &DenseMatrix) -> Result<()> {
    match format_of(path)? {
        "fvecs" => std::fs::write(path, write_fvecs(points))?,
        _ => std::fs::write(path, write_csv(points))?,
    }
    Ok(())
}
