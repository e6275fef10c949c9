//! COLMAP `points3D.txt` reader.

use crate::error::{Error, Result};
use crate::splat::PointCloud;

/// Parses `POINT3D_ID X Y Z R G B ERROR TRACK[]` lines. Blank lines and lines
/// starting with `#` are ignored; track data is discarded.
pub fn parse_colmap_points(text: &str) -> Result<PointCloud> {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut ids = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() < 8 {
            return Err(err(format!("expected at least 8 fields, found {}", tok.len())));
        }
        let id = tok[0]
            .parse::<u64>()
            .map_err(|e| err(format!("POINT3D_ID: {e}")))?;
        let mut p = [0.0; 3];
        for (k, t) in tok[1..4].iter().enumerate() {
            p[k] = t.parse::<f64>().map_err(|e| err(format!("coordinate: {e}")))?;
            if !p[k].is_finite() {
                return Err(err("non-finite coordinate".into()));
            }
        }
        let mut c = [0.0; 3];
        for (k, t) in tok[4..7].iter().enumerate() {
            c[k] = t.parse::<u8>().map_err(|e| err(format!("color: {e}")))? as f64 / 255.0;
        }
        tok[7]
            .parse::<f64>()
            .map_err(|e| err(format!("ERROR: {e}")))?;
        positions.push(p);
        colors.push(c);
        ids.push(id);
    }
    Ok(PointCloud {
        positions,
        colors: Some(colors),
        ids: Some(ids),
    })
}
