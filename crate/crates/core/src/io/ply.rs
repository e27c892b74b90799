//! PLY reading and writing.
//!
//! Reads ASCII and binary little-endian files. Only `x`, `y`, `z` of the
//! `vertex` element are kept; every other property and element is skipped,
//! including list properties.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
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
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
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

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug)]
struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    /// Byte offset of the first body byte.
    body_offset: usize,
    /// Number of header lines, so body line numbers continue from it.
    lines: usize,
}

/// Parsed PLY contents.
#[derive(Debug, Clone)]
pub struct PlyData {
    pub encoding: PlyEncoding,
    pub cloud: PointCloud,
}

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PlyData> {
    let header = parse_header(bytes, path)?;
    let points = match header.encoding {
        PlyEncoding::Ascii => read_ascii_body(bytes, &header, path)?,
        PlyEncoding::BinaryLittleEndian => read_binary_body(bytes, &header, path)?,
    };
    Ok(PlyData { encoding: header.encoding, cloud: PointCloud::new(points)? })
}

fn header_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::MalformedHeader { path: path.to_path_buf(), line, message: message.into() }
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();

    loop {
        let Some(rel_end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            return Err(header_err(path, line_no + 1, "missing end_header"));
        };
        let raw = &bytes[offset..offset + rel_end];
        offset += rel_end + 1;
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| header_err(path, line_no, "header is not valid text"))?
            .trim_end_matches('\r');
        let mut words = line.split_whitespace();
        let keyword = words.next().unwrap_or("");

        if line_no == 1 {
            if line.trim() != "ply" {
                return Err(Error::UnknownFormat { path: path.to_path_buf(), reason: "missing 'ply' magic".into() });
            }
            continue;
        }
        match keyword {
            "" | "comment" | "obj_info" => {}
            "format" => {
                let fmt = words.next().unwrap_or("");
                let version = words.next().unwrap_or("");
                if version != "1.0" {
                    return Err(header_err(path, line_no, format!("unsupported version '{version}'")));
                }
                encoding = Some(match fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    "binary_big_endian" => return Err(header_err(path, line_no, "binary_big_endian is not supported")),
                    other => return Err(header_err(path, line_no, format!("unknown format '{other}'"))),
                });
            }
            "element" => {
                let name = words.next().ok_or_else(|| header_err(path, line_no, "element without a name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| header_err(path, line_no, "element count is not a nonnegative integer"))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            "property" => {
                let element =
                    elements.last_mut().ok_or_else(|| header_err(path, line_no, "property before any element"))?;
                let ty = words.next().unwrap_or("");
                let bad_type = |t: &str| header_err(path, line_no, format!("unknown property type '{t}'"));
                let prop = if ty == "list" {
                    let count_ty = words.next().unwrap_or("");
                    let item_ty = words.next().unwrap_or("");
                    Property::List {
                        count: Scalar::parse(count_ty).ok_or_else(|| bad_type(count_ty))?,
                        item: Scalar::parse(item_ty).ok_or_else(|| bad_type(item_ty))?,
                    }
                } else {
                    Property::Scalar {
                        ty: Scalar::parse(ty).ok_or_else(|| bad_type(ty))?,
                        name: words
                            .next()
                            .ok_or_else(|| header_err(path, line_no, "property without a name"))?
                            .to_string(),
                    }
                };
                element.properties.push(prop);
            }
            "end_header" => break,
            other => return Err(header_err(path, line_no, format!("unexpected keyword '{other}'"))),
        }
    }

    let encoding = encoding.ok_or_else(|| header_err(path, line_no, "no format line"))?;
    let vertex =
        elements.iter().find(|e| e.name == "vertex").ok_or_else(|| header_err(path, line_no, "no vertex element"))?;
    for axis in ["x", "y", "z"] {
        let found = vertex.properties.iter().any(|p| match p {
            Property::Scalar { name, ty } => name == axis && matches!(ty, Scalar::F32 | Scalar::F64),
            Property::List { .. } => false,
        });
        if !found {
            return Err(header_err(path, line_no, format!("vertex element has no float or double property '{axis}'")));
        }
    }
    Ok(Header { encoding, elements, body_offset: offset, lines: line_no })
}

/// Positions of x, y, z among the vertex's properties.
fn xyz_slots(vertex: &Element) -> [usize; 3] {
    let find = |axis: &str| {
        vertex
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == axis))
            .expect("checked while parsing the header")
    };
    [find("x"), find("y"), find("z")]
}

fn read_ascii_body(bytes: &[u8], header: &Header, path: &Path) -> Result<Vec<Point3>> {
    let text = std::str::from_utf8(&bytes[header.body_offset..]).map_err(|e| Error::MalformedBody {
        path: path.to_path_buf(),
        line: header.lines + 1,
        message: format!("body is not valid text: {e}"),
    })?;
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (header.lines + 1 + i, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut points = Vec::new();
    let mut last_line = header.lines;

    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        let slots = if is_vertex { Some(xyz_slots(element)) } else { None };
        if is_vertex {
            points.reserve(element.count);
        }
        for row in 0..element.count {
            let Some((line_no, line)) = lines.next() else {
                return Err(if is_vertex {
                    Error::CountMismatch {
                        path: path.to_path_buf(),
                        declared: element.count,
                        found: row,
                        line: last_line,
                    }
                } else {
                    Error::Truncated {
                        path: path.to_path_buf(),
                        offset: bytes.len(),
                        message: format!("element '{}' ends after {row} of {} rows", element.name, element.count),
                    }
                });
            };
            last_line = line_no;
            let body_err = |message: String| Error::MalformedBody { path: path.to_path_buf(), line: line_no, message };
            let mut tokens = line.split_whitespace();
            let mut values = [0.0; 3];
            for (pi, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { name, .. } => {
                        let tok =
                            tokens.next().ok_or_else(|| body_err(format!("missing value for property '{name}'")))?;
                        if let Some(slots) = slots {
                            if let Some(axis) = slots.iter().position(|&s| s == pi) {
                                values[axis] =
                                    tok.parse::<f64>().map_err(|_| body_err(format!("'{tok}' is not a number")))?;
                            }
                        }
                    }
                    Property::List { .. } => {
                        let tok = tokens.next().ok_or_else(|| body_err("missing list length".into()))?;
                        let n: usize = tok.parse().map_err(|_| body_err(format!("'{tok}' is not a list length")))?;
                        for _ in 0..n {
                            tokens.next().ok_or_else(|| body_err("list shorter than its length".into()))?;
                        }
                    }
                }
            }
            if tokens.next().is_some() {
                return Err(body_err("more values than declared properties".into()));
            }
            if is_vertex {
                points.push(Point3::new(values[0], values[1], values[2]));
            }
        }
    }
    if let Some((line_no, _)) = lines.next() {
        let vertex = header.elements.iter().find(|e| e.name == "vertex").unwrap();
        let is_last = header.elements.last().is_some_and(|e| e.name == "vertex");
        if is_last {
            let extra = 1 + lines.count();
            return Err(Error::CountMismatch {
                path: path.to_path_buf(),
                declared: vertex.count,
                found: vertex.count + extra,
                line: line_no,
            });
        }
        return Err(Error::MalformedBody {
            path: path.to_path_buf(),
            line: line_no,
            message: "data after the last declared element".into(),
        });
    }
    Ok(points)
}

fn read_binary_body(bytes: &[u8], header: &Header, path: &Path) -> Result<Vec<Point3>> {
    let mut offset = header.body_offset;
    let mut points = Vec::new();
    let truncated = |offset: usize, what: String| Error::Truncated { path: path.to_path_buf(), offset, message: what };
    let mut vertex_stride = None;

    for element in &header.elements {
        let is_vertex = element.name == "vertex";
        let slots = if is_vertex { Some(xyz_slots(element)) } else { None };
        let fixed: Option<usize> = element
            .properties
            .iter()
            .map(|p| match p {
                Property::Scalar { ty, .. } => Some(ty.size()),
                Property::List { .. } => None,
            })
            .sum();
        if is_vertex {
            vertex_stride = fixed;
            points.reserve(element.count);
        }
        for row in 0..element.count {
            let mut values = [0.0; 3];
            for (pi, prop) in element.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { ty, .. } => {
                        let end = offset + ty.size();
                        if end > bytes.len() {
                            return Err(truncated(
                                offset,
                                format!("element '{}' row {row} of {}", element.name, element.count),
                            ));
                        }
                        if let Some(slots) = slots {
                            if let Some(axis) = slots.iter().position(|&s| s == pi) {
                                values[axis] = ty.read_le(&bytes[offset..end]);
                            }
                        }
                        offset = end;
                    }
                    Property::List { count, item } => {
                        let end = offset + count.size();
                        if end > bytes.len() {
                            return Err(truncated(offset, format!("list length in element '{}'", element.name)));
                        }
                        let n = count.read_le(&bytes[offset..end]);
                        if n.is_nan() || n < 0.0 {
                            return Err(Error::MalformedBody {
                                path: path.to_path_buf(),
                                line: header.lines,
                                message: format!("negative list length at byte {offset}"),
                            });
                        }
                        offset = end + n as usize * item.size();
                        if offset > bytes.len() {
                            return Err(truncated(end, format!("list items in element '{}'", element.name)));
                        }
                    }
                }
            }
            if is_vertex {
                points.push(Point3::new(values[0], values[1], values[2]));
            }
        }
    }
    if offset < bytes.len() {
        let trailing = bytes.len() - offset;
        let vertex = header.elements.iter().find(|e| e.name == "vertex").unwrap();
        let is_last = header.elements.last().is_some_and(|e| e.name == "vertex");
        if let (true, Some(stride)) = (is_last, vertex_stride) {
            if stride > 0 && trailing % stride == 0 {
                return Err(Error::CountMismatch {
                    path: path.to_path_buf(),
                    declared: vertex.count,
                    found: vertex.count + trailing / stride,
                    line: header.lines,
                });
            }
        }
        return Err(Error::MalformedBody {
            path: path.to_path_buf(),
            line: header.lines,
            message: format!("{trailing} unexpected bytes after the last element at byte {offset}"),
        });
    }
    Ok(points)
}

/// Writes `x y z` as double-precision properties of a single vertex element.
///
/// ASCII output uses 17 significant digits, so every value reads back exactly.
pub fn write_ply(cloud: &PointCloud, path: &Path, encoding: PlyEncoding) -> Result<()> {
    let bytes = encode_ply(cloud, encoding);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_ply(cloud: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + cloud.len() * 24);
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    // Writing into a Vec cannot fail.
    let _ = write!(
        out,
        "ply\nformat {fmt} 1.0\ncomment cfreg\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    );
    for p in cloud.iter() {
        match encoding {
            PlyEncoding::Ascii => {
                let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
            }
            PlyEncoding::BinaryLittleEndian => {
                for c in [p.x, p.y, p.z] {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
    }
    out
}
