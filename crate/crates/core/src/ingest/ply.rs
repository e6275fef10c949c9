//! PLY readers and writers for splat files and point clouds.
//!
//! Splat files are the binary little-endian layout written by reference
//! Gaussian-splatting trainers:
//!
//! ```text
//! ply
//! format binary_little_endian 1.0
//! element vertex N
//! property float x            (y, z)
//! property float nx           (ny, nz; optional, carried through)
//! property float f_dc_0       (f_dc_1, f_dc_2)
//! property float f_rest_0     (… f_rest_44; optional)
//! property float opacity
//! property float scale_0      (scale_1, scale_2)
//! property float rot_0        (rot_1, rot_2, rot_3)
//! end_header
//! ```
//!
//! Properties the parser does not know are skipped by their byte size and
//! kept verbatim so a parse/write cycle reproduces the input file.

use crate::error::{Error, Result};
use crate::linalg::Quat;
use crate::splat::{GaussianPrimitive, PointCloud, SH_REST_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    F32,
    F64,
    U8,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "float" | "float32" => Some(Self::F32),
            "double" | "float64" => Some(Self::F64),
            "uchar" | "uint8" => Some(Self::U8),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Self::F32 => 4,
            Self::F64 => 8,
            Self::U8 => 1,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
            Self::U8 => b[0] as f64,
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            Self::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Self::F64 => out.extend_from_slice(&v.to_le_bytes()),
            Self::U8 => out.push(v.round().clamp(0.0, 255.0) as u8),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlyProperty {
    pub name: String,
    /// `None` for list properties and scalar types outside {float32, float64,
    /// uint8}; such properties are only tolerated in elements never read.
    pub ty: Option<ScalarType>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlyElement {
    pub name: String,
    pub count: usize,
    pub properties: Vec<PlyProperty>,
}

impl PlyElement {
    fn stride(&self) -> Option<usize> {
        self.properties
            .iter()
            .map(|p| p.ty.map(ScalarType::size))
            .sum()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }
}

/// Parsed header. The raw lines are kept so that writing reproduces the
/// original header byte for byte (only the vertex count is regenerated).
#[derive(Debug, Clone, PartialEq)]
pub struct PlyHeader {
    pub format: PlyFormat,
    pub elements: Vec<PlyElement>,
    lines: Vec<String>,
    vertex_line: usize,
    vertex_element: usize,
    /// Byte length of the header including the `end_header` line.
    pub len: usize,
}

impl PlyHeader {
    /// The header layout produced by reference trainers, with normals and
    /// optionally the 45 higher-order SH coefficients.
    pub fn splat_template(with_sh_rest: bool) -> Self {
        let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if with_sh_rest {
            names.extend((0..SH_REST_LEN).map(|i| format!("f_rest_{i}")));
        }
        names.extend(
            ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
                .iter()
                .map(|s| s.to_string()),
        );
        let mut text = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 0\n");
        for n in &names {
            text.push_str(&format!("property float {n}\n"));
        }
        text.push_str("end_header\n");
        parse_header(text.as_bytes()).expect("built-in template is valid")
    }

    pub fn vertex(&self) -> &PlyElement {
        &self.elements[self.vertex_element]
    }

    /// Serialized header announcing `vertex_count` vertices.
    pub fn to_bytes(&self, vertex_count: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len + 16);
        for (i, line) in self.lines.iter().enumerate() {
            if i == self.vertex_line {
                out.extend_from_slice(format!("element vertex {vertex_count}").as_bytes());
            } else {
                out.extend_from_slice(line.as_bytes());
            }
            out.push(b'\n');
        }
        out
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<PlyHeader> {
    if !bytes.starts_with(b"ply\n") && !bytes.starts_with(b"ply\r\n") {
        return Err(Error::UnsupportedFormat("missing `ply` magic".into()));
    }
    let mut lines = Vec::new();
    let mut pos = 0usize;
    let mut ended = false;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .ok_or_else(|| Error::Header("unterminated header".into()))?;
        let raw = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::Header("header is not valid UTF-8".into()))?;
        let line = raw.strip_suffix('\r').unwrap_or(raw).to_string();
        pos = end + 1;
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            ended = true;
            break;
        }
    }
    if !ended {
        return Err(Error::Header("missing end_header".into()));
    }

    let mut format = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut vertex_line = None;
    for (i, line) in lines.iter().enumerate().skip(1) {
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") | Some("end_header") => {}
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLittleEndian,
                    Some(other) => return Err(Error::UnsupportedFormat(other.to_string())),
                    None => return Err(Error::Header("empty format line".into())),
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::Header(format!("line {}: element without name", i + 1)))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::Header(format!("line {}: bad element count", i + 1)))?;
                if name == "vertex" {
                    if vertex_line.is_some() {
                        return Err(Error::Header("more than one vertex element".into()));
                    }
                    vertex_line = Some(i);
                }
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Header("property before any element".into()))?;
                let kind = tok
                    .next()
                    .ok_or_else(|| Error::Header(format!("line {}: empty property", i + 1)))?;
                let (ty, name) = if kind == "list" {
                    let name = tok.nth(2);
                    (None, name)
                } else {
                    (ScalarType::parse(kind), tok.next())
                };
                let name =
                    name.ok_or_else(|| Error::Header(format!("line {}: property without name", i + 1)))?;
                el.properties.push(PlyProperty {
                    name: name.to_string(),
                    ty,
                });
            }
            Some(other) => {
                return Err(Error::Header(format!("line {}: unknown keyword `{other}`", i + 1)))
            }
        }
    }
    let format = format.ok_or_else(|| Error::Header("missing format line".into()))?;
    let vertex_line = vertex_line.ok_or_else(|| Error::Schema("vertex".into()))?;
    let vertex_element = elements
        .iter()
        .position(|e| e.name == "vertex")
        .expect("vertex line implies vertex element");
    Ok(PlyHeader {
        format,
        elements,
        lines,
        vertex_line,
        vertex_element,
        len: pos,
    })
}

/// Scalar layout of the vertex element: per-property offset and type.
struct VertexLayout {
    offsets: Vec<usize>,
    types: Vec<ScalarType>,
    stride: usize,
}

impl VertexLayout {
    fn of(el: &PlyElement) -> Result<Self> {
        let mut offsets = Vec::with_capacity(el.properties.len());
        let mut types = Vec::with_capacity(el.properties.len());
        let mut stride = 0usize;
        for p in &el.properties {
            let ty = p.ty.ok_or_else(|| {
                Error::Schema(format!("{} (only float32, float64 and uint8 scalars are supported)", p.name))
            })?;
            offsets.push(stride);
            types.push(ty);
            stride += ty.size();
        }
        Ok(Self {
            offsets,
            types,
            stride,
        })
    }

    fn get(&self, row: &[u8], idx: usize) -> f64 {
        let o = self.offsets[idx];
        self.types[idx].decode(&row[o..])
    }
}

/// Locates the binary vertex payload, skipping any scalar elements that
/// precede it. Returns `(offset, byte_len)` after checking the length.
fn binary_vertex_span(bytes: &[u8], header: &PlyHeader, stride: usize) -> Result<(usize, usize)> {
    let mut offset = header.len;
    for el in &header.elements[..header.vertex_element] {
        let s = el
            .stride()
            .ok_or_else(|| Error::Schema(format!("element `{}` has list properties", el.name)))?;
        let len = s.checked_mul(el.count).ok_or_else(|| Error::Header("element size overflow".into()))?;
        offset = checked_span(bytes, offset, len)?;
    }
    let len = stride
        .checked_mul(header.vertex().count)
        .ok_or_else(|| Error::Header("vertex payload size overflow".into()))?;
    checked_span(bytes, offset, len)?;
    Ok((offset, len))
}

fn checked_span(bytes: &[u8], offset: usize, len: usize) -> Result<usize> {
    let available = bytes.len().saturating_sub(offset);
    if len > available {
        return Err(Error::Truncated {
            offset,
            needed: len,
            available,
        });
    }
    Ok(offset + len)
}

const REQUIRED_SPLAT: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0",
    "rot_1", "rot_2", "rot_3",
];

/// Parsed splat file.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatPly {
    pub header: PlyHeader,
    pub primitives: Vec<GaussianPrimitive>,
    /// Per vertex: whether the stored quaternion was rescaled to unit norm.
    pub renormalized: Vec<bool>,
    /// Raw bytes of properties the parser does not interpret, `extra_stride`
    /// bytes per vertex, in file order.
    pub extra: Vec<u8>,
    pub extra_stride: usize,
}

/// Parses a binary little-endian splat PLY.
pub fn parse_gaussian_ply(bytes: &[u8]) -> Result<SplatPly> {
    let header = parse_header(bytes)?;
    if header.format != PlyFormat::BinaryLittleEndian {
        return Err(Error::UnsupportedFormat(
            "splat files must be binary_little_endian".into(),
        ));
    }
    if header.elements.len() != 1 {
        return Err(Error::Schema("splat files hold only a vertex element".into()));
    }
    let el = header.vertex();
    let mut required = [0usize; REQUIRED_SPLAT.len()];
    for (slot, name) in required.iter_mut().zip(REQUIRED_SPLAT) {
        *slot = el.index_of(name).ok_or_else(|| Error::Schema(name.into()))?;
    }
    let has_rest = el.properties.iter().any(|p| p.name.starts_with("f_rest_"));
    let rest: Vec<usize> = if has_rest {
        (0..SH_REST_LEN)
            .map(|i| {
                let name = format!("f_rest_{i}");
                el.index_of(&name).ok_or(Error::Schema(name))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let layout = VertexLayout::of(el)?;
    let known: Vec<bool> = el
        .properties
        .iter()
        .map(|p| REQUIRED_SPLAT.contains(&p.name.as_str()) || rest_index(&p.name).is_some())
        .collect();
    let extra_stride: usize = el
        .properties
        .iter()
        .zip(&known)
        .filter(|(_, k)| !**k)
        .map(|(p, _)| p.ty.map_or(0, ScalarType::size))
        .sum();

    let (start, len) = binary_vertex_span(bytes, &header, layout.stride)?;
    let n = el.count;
    let mut primitives = Vec::with_capacity(n);
    let mut renormalized = Vec::with_capacity(n);
    let mut extra = Vec::with_capacity(extra_stride * n);
    for (v, row) in bytes[start..start + len].chunks_exact(layout.stride.max(1)).enumerate().take(n) {
        let g = |k: usize| layout.get(row, required[k]);
        let raw_q = Quat::new(g(10), g(11), g(12), g(13));
        let qn = raw_q.norm();
        let (rotation, renorm) = if (qn - 1.0).abs() <= 1e-6 {
            (raw_q, false)
        } else {
            let q = raw_q.normalized().ok_or_else(|| {
                Error::InvalidPrimitive(format!("vertex {v}: zero or non-finite quaternion"))
            })?;
            (q, true)
        };
        let prim = GaussianPrimitive {
            position: [g(0), g(1), g(2)],
            rotation,
            log_scales: [g(7), g(8), g(9)],
            opacity_logit: g(6),
            sh_dc: [g(3), g(4), g(5)],
            sh_rest: rest.iter().map(|&i| layout.get(row, i)).collect(),
        };
        prim.validate()
            .map_err(|e| Error::InvalidPrimitive(format!("vertex {v}: {e}")))?;
        for (i, k) in known.iter().enumerate() {
            if !k {
                let o = layout.offsets[i];
                extra.extend_from_slice(&row[o..o + layout.types[i].size()]);
            }
        }
        primitives.push(prim);
        renormalized.push(renorm);
    }
    Ok(SplatPly {
        header,
        primitives,
        renormalized,
        extra,
        extra_stride,
    })
}

fn rest_index(name: &str) -> Option<usize> {
    name.strip_prefix("f_rest_")
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&i| i < SH_REST_LEN)
}

/// Writes splats using `header` as the layout template. Uninterpreted
/// properties are filled from `extra` (as returned by the parser) or zeros.
pub fn write_gaussian_ply(
    primitives: &[GaussianPrimitive],
    header: &PlyHeader,
    extra: Option<&[u8]>,
) -> Vec<u8> {
    let el = header.vertex();
    let mut out = header.to_bytes(primitives.len());
    let mut extra_pos = 0usize;
    for p in primitives {
        for prop in &el.properties {
            let ty = prop.ty.unwrap_or(ScalarType::F32);
            let value = match prop.name.as_str() {
                "x" => Some(p.position[0]),
                "y" => Some(p.position[1]),
                "z" => Some(p.position[2]),
                "f_dc_0" => Some(p.sh_dc[0]),
                "f_dc_1" => Some(p.sh_dc[1]),
                "f_dc_2" => Some(p.sh_dc[2]),
                "opacity" => Some(p.opacity_logit),
                "scale_0" => Some(p.log_scales[0]),
                "scale_1" => Some(p.log_scales[1]),
                "scale_2" => Some(p.log_scales[2]),
                "rot_0" => Some(p.rotation.w),
                "rot_1" => Some(p.rotation.x),
                "rot_2" => Some(p.rotation.y),
                "rot_3" => Some(p.rotation.z),
                name => rest_index(name).map(|i| p.sh_rest.get(i).copied().unwrap_or(0.0)),
            };
            match value {
                Some(v) => ty.encode(v, &mut out),
                None => {
                    let size = ty.size();
                    match extra.and_then(|e| e.get(extra_pos..extra_pos + size)) {
                        Some(bytes) => out.extend_from_slice(bytes),
                        None => out.extend(std::iter::repeat_n(0u8, size)),
                    }
                    extra_pos += size;
                }
            }
        }
    }
    out
}

/// Parses an ascii or binary little-endian point cloud PLY.
pub fn parse_pointcloud_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let el = header.vertex();
    let xyz = ["x", "y", "z"].map(|n| el.index_of(n));
    let mut pos_idx = [0usize; 3];
    for (slot, (i, name)) in pos_idx.iter_mut().zip(xyz.iter().zip(["x", "y", "z"])) {
        *slot = i.ok_or_else(|| Error::Schema(name.into()))?;
    }
    let color_idx = ["red", "green", "blue"]
        .iter()
        .map(|n| el.index_of(n))
        .collect::<Option<Vec<_>>>()
        .or_else(|| ["r", "g", "b"].iter().map(|n| el.index_of(n)).collect());
    let rows: Vec<Vec<f64>> = match header.format {
        PlyFormat::BinaryLittleEndian => {
            let layout = VertexLayout::of(el)?;
            let (start, len) = binary_vertex_span(bytes, &header, layout.stride)?;
            bytes[start..start + len]
                .chunks_exact(layout.stride.max(1))
                .take(el.count)
                .map(|row| (0..layout.types.len()).map(|i| layout.get(row, i)).collect())
                .collect()
        }
        PlyFormat::Ascii => ascii_vertex_rows(bytes, &header)?,
    };
    let colors = color_idx.map(|idx| {
        rows.iter()
            .map(|r| {
                let mut c = [0.0; 3];
                for (k, &i) in idx.iter().enumerate() {
                    c[k] = match el.properties[i].ty {
                        Some(ScalarType::U8) => r[i] / 255.0,
                        _ => r[i],
                    };
                }
                c
            })
            .collect()
    });
    let positions: Vec<_> = rows
        .iter()
        .map(|r| [r[pos_idx[0]], r[pos_idx[1]], r[pos_idx[2]]])
        .collect();
    if !positions.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("point positions"));
    }
    Ok(PointCloud {
        positions,
        colors,
        ids: None,
    })
}

fn ascii_vertex_rows(bytes: &[u8], header: &PlyHeader) -> Result<Vec<Vec<f64>>> {
    let body = std::str::from_utf8(&bytes[header.len..]).map_err(|_| Error::Parse {
        line: header.lines.len() + 1,
        message: "ascii body is not valid UTF-8".into(),
    })?;
    let first_line = header.lines.len() + 1;
    let mut lines = body
        .lines()
        .enumerate()
        .map(|(i, l)| (first_line + i, l))
        .filter(|(_, l)| !l.trim().is_empty());
    for el in &header.elements[..header.vertex_element] {
        for _ in 0..el.count {
            lines.next().ok_or_else(|| Error::Parse {
                line: first_line,
                message: format!("missing `{}` rows", el.name),
            })?;
        }
    }
    let el = header.vertex();
    let width = el.properties.len();
    let mut rows = Vec::new();
    for _ in 0..el.count {
        let (ln, text) = lines.next().ok_or_else(|| Error::Parse {
            line: first_line,
            message: format!("expected {} vertex rows, found {}", el.count, rows.len()),
        })?;
        let values = text
            .split_whitespace()
            .take(width)
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: ln,
                message: e.to_string(),
            })?;
        if values.len() < width {
            return Err(Error::Parse {
                line: ln,
                message: format!("expected {width} values, found {}", values.len()),
            });
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Binary little-endian point cloud with float positions and, when present,
/// uint8 colors.
pub fn write_pointcloud_ply(cloud: &PointCloud) -> Vec<u8> {
    let mut text = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    );
    if cloud.colors.is_some() {
        text.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    text.push_str("end_header\n");
    let mut out = text.into_bytes();
    for (i, p) in cloud.positions.iter().enumerate() {
        for v in p {
            ScalarType::F32.encode(*v, &mut out);
        }
        if let Some(c) = &cloud.colors {
            for v in c[i] {
                ScalarType::U8.encode(v * 255.0, &mut out);
            }
        }
    }
    out
}
