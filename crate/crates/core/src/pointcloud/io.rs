use std::io::{Read, Write};

use super::PointCloud;
use crate::error::{Error, Result};

/// Reads one point per CSV row. A first row that does not parse as numbers
/// is treated as a header. The ambient dimension is the column count.
pub fn read_csv<R: Read>(reader: R, intrinsic_dim: usize) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut coords = Vec::new();
    let mut width = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", line + 1))),
        };
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "row {} has {} columns, expected {w}",
                    line + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        coords.extend(row);
    }
    let width = width.ok_or_else(|| Error::Parse("point-cloud file has no data rows".into()))?;
    PointCloud::new(coords, width, intrinsic_dim)
}

/// Writes the cloud with an `x0,x1,...` header.
pub fn write_csv<W: Write>(cloud: &PointCloud, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record((0..cloud.ambient_dim()).map(|d| format!("x{d}")))?;
    for p in cloud.points() {
        wtr.write_record(p.iter().map(|v| format!("{v:e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let with = "x,y\n0,0\n1,0.5\n";
        let without = "0,0\n1,0.5\n";
        let a = read_csv(with.as_bytes(), 2).unwrap();
        let b = read_csv(without.as_bytes(), 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ambient_dim(), 2);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(read_csv("0,0\n1\n".as_bytes(), 1).is_err());
        assert!(read_csv("a,b\n".as_bytes(), 1).is_err());
    }

    #[test]
    fn write_then_read() {
        let c = PointCloud::from_rows(&[[0.1, -2.5, 3.0], [1e-9, 4.0, 5.5]], 2).unwrap();
        let mut buf = Vec::new();
        write_csv(&c, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice(), 2).unwrap(), c);
    }
}
