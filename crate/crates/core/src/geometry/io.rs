//! OBJ and PLY (ascii, binary little-endian) triangle mesh ingestion.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::{GeometryError, TriangleMesh};

/// Loads an OBJ or PLY file. The format is chosen by the `ply` magic line,
/// falling back to the file extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, GeometryError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let mesh = if bytes.starts_with(b"ply") {
        parse_ply(&bytes)?
    } else if ext.as_deref() == Some("obj") || ext.is_none() {
        let text = std::str::from_utf8(&bytes).map_err(|e| GeometryError::Parse {
            line: 0,
            message: format!("not UTF-8: {e}"),
        })?;
        parse_obj(text)?
    } else {
        return Err(GeometryError::UnsupportedFormat(path.display().to_string()));
    };
    mesh.require_volume()?;
    Ok(mesh)
}

fn parse_err(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses `v` and `f` records; polygons are fan-triangulated. Other records
/// (normals, texture coordinates, materials, groups) are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let coords: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| parse_err(line_no, format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(parse_err(line_no, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|e| parse_err(line_no, format!("bad index {t:?}: {e}")))?;
                    let n = vertices.len() as i64;
                    let resolved = match i {
                        i if i > 0 => i - 1,
                        i if i < 0 => n + i,
                        _ => return Err(parse_err(line_no, "index 0 is not valid in OBJ")),
                    };
                    if resolved < 0 || resolved >= n {
                        return Err(parse_err(
                            line_no,
                            format!("vertex index {i} out of range ({n} vertices defined)"),
                        ));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(parse_err(line_no, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if triangles.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    TriangleMesh::new(vertices, triangles)
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Cursor over the PLY body yielding property values, tracking line
/// numbers for ascii bodies.
enum Body<'a> {
    Ascii {
        lines: std::iter::Enumerate<std::str::Lines<'a>>,
        first_line: usize,
        tokens: Vec<&'a str>,
        pos: usize,
        line: usize,
    },
    Binary {
        data: &'a [u8],
        pos: usize,
        header_line: usize,
    },
}

impl<'a> Body<'a> {
    fn line(&self) -> usize {
        match self {
            Body::Ascii { line, .. } => *line,
            Body::Binary { header_line, .. } => *header_line,
        }
    }

    /// Starts a new element record (ascii: a new line).
    fn begin_record(&mut self) -> Result<(), GeometryError> {
        if let Body::Ascii {
            lines,
            first_line,
            tokens,
            pos,
            line,
        } = self
        {
            loop {
                let (i, l) = lines
                    .next()
                    .ok_or_else(|| parse_err(*line + 1, "unexpected end of file"))?;
                *line = *first_line + i;
                let t: Vec<&str> = l.split_whitespace().collect();
                if !t.is_empty() {
                    *tokens = t;
                    *pos = 0;
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    fn next(&mut self, ty: Scalar) -> Result<f64, GeometryError> {
        match self {
            Body::Ascii {
                tokens, pos, line, ..
            } => {
                let t = tokens
                    .get(*pos)
                    .ok_or_else(|| parse_err(*line, "record has too few values"))?;
                *pos += 1;
                t.parse::<f64>()
                    .map_err(|e| parse_err(*line, format!("bad value {t:?}: {e}")))
            }
            Body::Binary {
                data,
                pos,
                header_line,
            } => {
                let n = ty.size();
                let b = data
                    .get(*pos..*pos + n)
                    .ok_or_else(|| parse_err(*header_line, "binary body truncated"))?;
                *pos += n;
                Ok(ty.read_le(b))
            }
        }
    }
}

/// Parses a PLY file with `vertex` (x, y, z) and `face` (vertex_indices)
/// elements. Other elements and properties are skipped.
pub fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh, GeometryError> {
    // Header is ascii and ends at "end_header\n".
    let marker = b"end_header";
    let header_end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| parse_err(1, "missing end_header"))?;
    let body_start = bytes[header_end..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| header_end + p + 1)
        .unwrap_or(bytes.len());
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| parse_err(1, "header is not ascii"))?;

    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut header_lines = 0;
    for (i, raw) in header.lines().enumerate() {
        let line_no = i + 1;
        header_lines = line_no;
        let t: Vec<&str> = raw.split_whitespace().collect();
        match t.first().copied() {
            Some("ply") if line_no == 1 => {}
            Some("format") => {
                format = Some(match t.get(1).copied() {
                    Some("ascii") => true,
                    Some("binary_little_endian") => false,
                    other => {
                        return Err(parse_err(line_no, format!("unsupported PLY format {other:?}")))
                    }
                });
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = t.get(1).ok_or_else(|| parse_err(line_no, "element needs a name"))?;
                let count = t
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(line_no, "element needs a count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before element"))?;
                let prop = if t.get(1) == Some(&"list") {
                    let count = t.get(2).and_then(|s| Scalar::parse(s));
                    let item = t.get(3).and_then(|s| Scalar::parse(s));
                    match (count, item, t.get(4)) {
                        (Some(count), Some(item), Some(name)) => Property::List {
                            name: name.to_string(),
                            count,
                            item,
                        },
                        _ => return Err(parse_err(line_no, "malformed list property")),
                    }
                } else {
                    match (t.get(1).and_then(|s| Scalar::parse(s)), t.get(2)) {
                        (Some(ty), Some(name)) => Property::Scalar {
                            name: name.to_string(),
                            ty,
                        },
                        _ => return Err(parse_err(line_no, "malformed property")),
                    }
                };
                el.props.push(prop);
            }
            Some(other) => return Err(parse_err(line_no, format!("unknown header keyword {other:?}"))),
        }
    }
    let ascii = format.ok_or_else(|| parse_err(1, "missing format line"))?;
    let body_line = header_lines + 2;
    let mut body = if ascii {
        let text = std::str::from_utf8(&bytes[body_start..])
            .map_err(|_| parse_err(body_line, "ascii body is not UTF-8"))?;
        Body::Ascii {
            lines: text.lines().enumerate(),
            first_line: body_line,
            tokens: Vec::new(),
            pos: 0,
            line: body_line,
        }
    } else {
        Body::Binary {
            data: &bytes[body_start..],
            pos: 0,
            header_line: header_lines + 1,
        }
    };

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            body.begin_record()?;
            let mut xyz = [f64::NAN; 3];
            let mut face: Vec<u32> = Vec::new();
            for p in &el.props {
                match p {
                    Property::Scalar { name, ty } => {
                        let v = body.next(*ty)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = body.next(*count)? as usize;
                        let wanted = el.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n {
                            let v = body.next(*item)?;
                            if wanted {
                                if v < 0.0 {
                                    return Err(parse_err(body.line(), "negative vertex index"));
                                }
                                face.push(v as u32);
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    if xyz.iter().any(|c| c.is_nan()) {
                        return Err(parse_err(body.line(), "vertex lacks x, y or z"));
                    }
                    vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
                }
                "face" => {
                    if face.len() < 3 {
                        return Err(parse_err(body.line(), "face needs at least three vertices"));
                    }
                    if let Some(&bad) = face.iter().find(|&&i| i as usize >= vertices.len()) {
                        return Err(parse_err(
                            body.line(),
                            format!("vertex index {bad} out of range ({} vertices)", vertices.len()),
                        ));
                    }
                    for k in 1..face.len() - 1 {
                        triangles.push([face[0], face[k], face[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    if triangles.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    TriangleMesh::new(vertices, triangles)
}

/// Writes the mesh as OBJ with 1-based indices and full-precision coordinates.
pub fn write_obj(mesh: &TriangleMesh, mut out: impl Write) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn obj_cube_counts() {
        let m = parse_obj(CUBE_OBJ).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.triangle_count(), 12);
        assert!(m.is_watertight());
    }

    #[test]
    fn obj_out_of_range_index_reports_line() {
        let bad = CUBE_OBJ.replace("f 4 5 8", "f 4 5 9");
        match parse_obj(&bad) {
            Err(GeometryError::Parse { line, .. }) => assert_eq!(line, 21),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn obj_quads_and_slash_tokens() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 -1/1\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn ply_ascii_and_binary_match_obj() {
        let obj = parse_obj(CUBE_OBJ).unwrap();
        let mut ascii = String::from(
            "ply\nformat ascii 1.0\ncomment cube\nelement vertex 8\nproperty float x\nproperty float y\nproperty float z\nelement face 12\nproperty list uchar int vertex_indices\nend_header\n",
        );
        for v in obj.vertices() {
            ascii.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
        }
        for t in obj.triangles() {
            ascii.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
        }
        let a = parse_ply(ascii.as_bytes()).unwrap();
        assert_eq!(a, obj);

        let mut bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 8\nproperty double x\nproperty double y\nproperty double z\nelement face 12\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for v in obj.vertices() {
            for c in [v.x, v.y, v.z] {
                bin.extend_from_slice(&c.to_le_bytes());
            }
        }
        for t in obj.triangles() {
            bin.push(3);
            for i in t {
                bin.extend_from_slice(&i.to_le_bytes());
            }
        }
        let b = parse_ply(&bin).unwrap();
        assert_eq!(b, obj);
    }

    #[test]
    fn ply_bad_index_reports_body_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        match parse_ply(text.as_bytes()) {
            Err(GeometryError::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_obj_is_rejected() {
        assert!(matches!(parse_obj("v 0 0 0\n"), Err(GeometryError::EmptyMesh)));
    }

    #[test]
    fn write_then_parse_is_lossless() {
        let m = parse_obj(CUBE_OBJ).unwrap().normalize(nalgebra::Vector3::new(15.0, 15.0, 8.0)).unwrap();
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        let back = parse_obj(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
