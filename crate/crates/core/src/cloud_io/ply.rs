//! Minimal PLY reader/writer for point clouds.
//!
//! Supports `ascii 1.0` and `binary_little_endian 1.0`. Only the `vertex`
//! element is interpreted (x, y, z and optionally nx, ny, nz); every other
//! element and property is parsed and discarded.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{unit_or_default, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlyFormat {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlyPrecision {
    #[serde(rename = "32")]
    F32,
    #[serde(rename = "64")]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Ply(format!("unknown property type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<Header> {
    let mut line = Vec::new();
    let mut next_line = |reader: &mut R| -> Result<Option<String>> {
        line.clear();
        let n = reader
            .read_until(b'\n', &mut line)
            .map_err(|e| Error::Ply(format!("header read failed: {e}")))?;
        if n == 0 {
            return Ok(None);
        }
        let text = std::str::from_utf8(&line)
            .map_err(|_| Error::Ply("header is not valid text".into()))?;
        Ok(Some(text.trim_end_matches(['\n', '\r']).to_string()))
    };

    match next_line(reader)? {
        Some(magic) if magic.trim() == "ply" => {}
        _ => return Err(Error::Ply("missing `ply` magic line".into())),
    }

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some(text) = next_line(reader)? else {
            return Err(Error::Ply("header ends before `end_header`".into()));
        };
        let mut tok = text.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                let kind = tok.next().unwrap_or_default();
                let version = tok.next().unwrap_or_default();
                if version != "1.0" {
                    return Err(Error::Ply(format!("unsupported PLY version `{version}`")));
                }
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLe,
                    "binary_big_endian" => {
                        return Err(Error::UnsupportedPly(
                            "binary_big_endian payloads are not supported; convert to ascii or binary_little_endian".into(),
                        ))
                    }
                    other => return Err(Error::Ply(format!("unknown format `{other}`"))),
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::Ply("element without a name".into()))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::Ply(format!("element `{name}` has no valid count")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::Ply("property declared before any element".into()))?;
                let ty = tok.next().unwrap_or_default();
                let kind = if ty == "list" {
                    let count = Scalar::parse(tok.next().unwrap_or_default())?;
                    let item = Scalar::parse(tok.next().unwrap_or_default())?;
                    PropKind::List { count, item }
                } else {
                    PropKind::Scalar(Scalar::parse(ty)?)
                };
                let name = tok
                    .next()
                    .ok_or_else(|| Error::Ply("property without a name".into()))?;
                element.props.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::Ply(format!("unexpected header keyword `{other}`"))),
        }
    }

    let format = format.ok_or_else(|| Error::Ply("missing `format` line".into()))?;
    Ok(Header { format, elements })
}

/// Column positions of the vertex properties we keep.
struct VertexLayout {
    xyz: [usize; 3],
    normal: Option<[usize; 3]>,
}

impl VertexLayout {
    fn from_element(el: &Element) -> Result<Self> {
        let find = |name: &str| {
            el.props
                .iter()
                .position(|p| p.name == name)
                .filter(|&i| matches!(el.props[i].kind, PropKind::Scalar(_)))
        };
        let pick = |names: [&str; 3]| -> Option<[usize; 3]> {
            Some([find(names[0])?, find(names[1])?, find(names[2])?])
        };
        let xyz = pick(["x", "y", "z"])
            .ok_or_else(|| Error::Ply("vertex element lacks scalar x, y, z properties".into()))?;
        Ok(Self {
            xyz,
            normal: pick(["nx", "ny", "nz"]),
        })
    }
}

/// Per-element sink: collects the scalar properties of one instance.
fn assemble(
    layout: &VertexLayout,
    values: &[f64],
    points: &mut Vec<Point3<f64>>,
    normals: &mut Vec<Vector3<f64>>,
) {
    let [x, y, z] = layout.xyz;
    points.push(Point3::new(values[x], values[y], values[z]));
    if let Some([a, b, c]) = layout.normal {
        normals.push(Vector3::new(values[a], values[b], values[c]));
    }
}

/// Positions and (possibly empty) normals.
type VertexData = (Vec<Point3<f64>>, Vec<Vector3<f64>>);

fn parse_ascii(header: &Header, body: &str, layout: &VertexLayout) -> Result<VertexData> {
    let mut tokens = body.split_ascii_whitespace();
    let mut next = |what: &str| -> Result<f64> {
        let t = tokens
            .next()
            .ok_or_else(|| Error::Ply(format!("vertex count mismatch: data ends inside {what}")))?;
        t.parse::<f64>()
            .map_err(|_| Error::Ply(format!("invalid number `{t}` in {what}")))
    };

    let mut points = Vec::new();
    let mut normals = Vec::new();
    for el in &header.elements {
        let is_vertex = el.name == "vertex";
        let mut values = vec![0.0; el.props.len()];
        for _ in 0..el.count {
            for (slot, prop) in values.iter_mut().zip(&el.props) {
                match prop.kind {
                    PropKind::Scalar(_) => *slot = next(&el.name)?,
                    PropKind::List { .. } => {
                        let n = next(&el.name)?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(Error::Ply(format!("invalid list length {n}")));
                        }
                        for _ in 0..n as usize {
                            next(&el.name)?;
                        }
                    }
                }
            }
            if is_vertex {
                assemble(layout, &values, &mut points, &mut normals);
            }
        }
    }
    if tokens.next().is_some() {
        return Err(Error::Ply(
            "vertex count mismatch: trailing data after the declared elements".into(),
        ));
    }
    Ok((points, normals))
}

fn parse_binary_le(header: &Header, body: &[u8], layout: &VertexLayout) -> Result<VertexData> {
    let mut pos = 0usize;
    let mut take = |ty: Scalar, what: &str| -> Result<f64> {
        let end = pos + ty.size();
        let bytes = body.get(pos..end).ok_or_else(|| {
            Error::Ply(format!("vertex count mismatch: payload ends inside {what}"))
        })?;
        pos = end;
        Ok(ty.decode_le(bytes))
    };

    let mut points = Vec::new();
    let mut normals = Vec::new();
    for el in &header.elements {
        let is_vertex = el.name == "vertex";
        let mut values = vec![0.0; el.props.len()];
        for _ in 0..el.count {
            for (slot, prop) in values.iter_mut().zip(&el.props) {
                match prop.kind {
                    PropKind::Scalar(ty) => *slot = take(ty, &el.name)?,
                    PropKind::List { count, item } => {
                        let n = take(count, &el.name)?;
                        if n < 0.0 {
                            return Err(Error::Ply(format!("invalid list length {n}")));
                        }
                        for _ in 0..n as usize {
                            take(item, &el.name)?;
                        }
                    }
                }
            }
            if is_vertex {
                assemble(layout, &values, &mut points, &mut normals);
            }
        }
    }
    if pos != body.len() {
        return Err(Error::Ply(format!(
            "vertex count mismatch: {} trailing bytes after the declared elements",
            body.len() - pos
        )));
    }
    Ok((points, normals))
}

/// Reads a point cloud from any PLY byte stream.
pub fn read_ply_from<R: BufRead>(mut reader: R) -> Result<PointCloud> {
    let header = read_header(&mut reader)?;
    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| Error::Ply("no `vertex` element".into()))?;
    let layout = VertexLayout::from_element(vertex)?;

    let mut body = Vec::new();
    reader
        .read_to_end(&mut body)
        .map_err(|e| Error::Ply(format!("payload read failed: {e}")))?;

    let (points, normals) = match header.format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(&body)
                .map_err(|_| Error::Ply("ASCII payload is not valid text".into()))?;
            parse_ascii(&header, text, &layout)?
        }
        PlyFormat::BinaryLe => parse_binary_le(&header, &body, &layout)?,
    };
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }

    let normals = layout
        .normal
        .map(|_| normals.into_iter().map(unit_or_default).collect());
    Ok(PointCloud { points, normals })
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ply_from(BufReader::new(file))
}

/// Serializes `cloud` as PLY into any writer.
pub fn write_ply_to<W: Write>(
    cloud: &PointCloud,
    mut out: W,
    format: PlyFormat,
    precision: PlyPrecision,
) -> std::io::Result<()> {
    let ty = match precision {
        PlyPrecision::F32 => "float",
        PlyPrecision::F64 => "double",
    };
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLe => "binary_little_endian",
    };
    writeln!(out, "ply")?;
    writeln!(out, "format {fmt} 1.0")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    for name in ["x", "y", "z"] {
        writeln!(out, "property {ty} {name}")?;
    }
    if cloud.normals.is_some() {
        for name in ["nx", "ny", "nz"] {
            writeln!(out, "property {ty} {name}")?;
        }
    }
    writeln!(out, "end_header")?;

    let mut row = Vec::with_capacity(6);
    for (i, p) in cloud.points.iter().enumerate() {
        row.clear();
        row.extend_from_slice(&[p.x, p.y, p.z]);
        if let Some(normals) = &cloud.normals {
            let n = normals[i];
            row.extend_from_slice(&[n.x, n.y, n.z]);
        }
        match (format, precision) {
            (PlyFormat::Ascii, PlyPrecision::F64) => {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
            (PlyFormat::Ascii, PlyPrecision::F32) => {
                let line: Vec<String> = row.iter().map(|&v| (v as f32).to_string()).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
            (PlyFormat::BinaryLe, PlyPrecision::F64) => {
                for v in &row {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            (PlyFormat::BinaryLe, PlyPrecision::F32) => {
                for &v in &row {
                    out.write_all(&(v as f32).to_le_bytes())?;
                }
            }
        }
    }
    out.flush()
}

pub fn write_ply(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    format: PlyFormat,
    precision: PlyPrecision,
) -> Result<()> {
    let path = path.as_ref();
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_ply_to(cloud, BufWriter::new(file), format, precision).map_err(|e| Error::io(path, e))
}
