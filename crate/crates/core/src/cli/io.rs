//! Correspondence CSV reading and writing.

use std::io::{Read, Write};

use crate::cli::calib::{PixelPair, StereoCalibration};
use crate::error::{PoseError, Result};
use crate::geom::Correspondence;

pub const NORMALIZED_COLUMNS: [&str; 4] = ["q1x", "q1y", "q2x", "q2y"];
pub const PIXEL_COLUMNS: [&str; 4] = ["p1x", "p1y", "p2x", "p2y"];

fn parse_err(msg: impl Into<String>) -> PoseError {
    PoseError::InvalidInput(msg.into())
}

fn column_indices(headers: &csv::StringRecord, names: &[&str; 4]) -> Option<[usize; 4]> {
    let mut idx = [0usize; 4];
    for (k, name) in names.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))?;
    }
    Some(idx)
}

/// Reads correspondences from CSV with either normalized (`q1x,q1y,q2x,q2y`)
/// or pixel (`p1x,p1y,p2x,p2y`) columns. Pixel input needs a calibration.
pub fn read_correspondences<R: Read>(
    input: R,
    calib: Option<&StereoCalibration>,
) -> Result<Vec<Correspondence>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(format!("csv header: {e}")))?
        .clone();
    let (idx, pixel) = if let Some(i) = column_indices(&headers, &NORMALIZED_COLUMNS) {
        (i, false)
    } else if let Some(i) = column_indices(&headers, &PIXEL_COLUMNS) {
        (i, true)
    } else {
        return Err(parse_err(
            "csv header must contain q1x,q1y,q2x,q2y or p1x,p1y,p2x,p2y",
        ));
    };
    let calib = match (pixel, calib) {
        (true, None) => {
            return Err(parse_err("pixel coordinates require a calibration file"));
        }
        (true, Some(c)) => Some(c),
        (false, _) => None,
    };

    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(format!("csv row {}: {e}", line + 1)))?;
        let mut v = [0.0; 4];
        for k in 0..4 {
            let field = rec
                .get(idx[k])
                .ok_or_else(|| parse_err(format!("csv row {}: missing column", line + 1)))?;
            v[k] = field
                .parse::<f64>()
                .map_err(|_| parse_err(format!("csv row {}: bad number {field:?}", line + 1)))?;
            if !v[k].is_finite() {
                return Err(parse_err(format!("csv row {}: non-finite value", line + 1)));
            }
        }
        out.push(match calib {
            Some(c) => c.normalize(&PixelPair::new(v[0], v[1], v[2], v[3])),
            None => Correspondence::new(v[0], v[1], v[2], v[3]),
        });
    }
    Ok(out)
}

pub fn write_correspondences<W: Write>(out: W, points: &[Correspondence]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(NORMALIZED_COLUMNS)?;
    for c in points {
        w.serialize((c.q1x, c.q1y, c.q2x, c.q2y))?;
    }
    w.flush()
}

pub fn write_pixels<W: Write>(out: W, points: &[PixelPair]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PIXEL_COLUMNS)?;
    for p in points {
        w.serialize((p.p1x, p.p1y, p.p2x, p.p2y))?;
    }
    w.flush()
}
