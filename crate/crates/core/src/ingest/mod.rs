//! File formats: splat PLY, point-cloud PLY, COLMAP text, and report output.

pub mod colmap;
pub mod ply;
pub mod report;

pub use colmap::parse_colmap_points;
pub use ply::{
    parse_gaussian_ply, parse_header, parse_pointcloud_ply, write_gaussian_ply,
    write_pointcloud_ply, PlyElement, PlyFormat, PlyHeader, PlyProperty, ScalarType, SplatPly,
};
pub use report::{format_g17, to_canonical_json, to_csv, Cell};

use crate::error::{Error, Result};
use crate::splat::PointCloud;

/// Reads a point cloud, choosing PLY when the bytes carry the PLY magic and
/// COLMAP `points3D.txt` otherwise.
pub fn parse_cloud_auto(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.starts_with(b"ply") {
        parse_pointcloud_ply(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::UnsupportedFormat("neither PLY nor UTF-8 COLMAP text".into()))?;
        parse_colmap_points(text)
    }
}
