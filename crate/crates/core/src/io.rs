//! Point-cloud and transform files.
//!
//! Clouds are read from ASCII XYZ (`x y z [nx ny nz]` per line) or PLY
//! (ascii, binary little or big endian; vertex positions and optional
//! normals). Transforms are 4×4 row-major whitespace-separated text.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{Matrix4, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud, RigidTransform};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Read a cloud, choosing the format from the extension (`.ply` or XYZ).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let is_ply = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    let file = fs::File::open(path)?;
    if is_ply {
        read_ply(BufReader::new(file))
    } else {
        read_xyz(BufReader::new(file))
    }
}

/// Write a cloud; `.ply` paths get binary little-endian PLY, anything else XYZ.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let is_ply = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    let mut buf = Vec::new();
    if is_ply {
        write_ply(&mut buf, cloud, PlyFormat::BinaryLittleEndian)?;
    } else {
        write_xyz(&mut buf, cloud)?;
    }
    write_atomic(path, &buf)
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_xyz<R: BufRead>(reader: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut columns = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(n + 1, format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 3 && values.len() != 6 {
            return Err(parse_err(
                n + 1,
                format!("expected 3 or 6 values, got {}", values.len()),
            ));
        }
        if *columns.get_or_insert(values.len()) != values.len() {
            return Err(parse_err(n + 1, "inconsistent column count"));
        }
        points.push(Vector3::new(values[0], values[1], values[2]));
        if values.len() == 6 {
            normals.push(Vector3::new(values[3], values[4], values[5]));
        }
    }
    if normals.is_empty() {
        Ok(PointCloud::new(points))
    } else {
        PointCloud::with_normals(points, normals)
    }
}

pub fn write_xyz<W: Write>(mut w: W, cloud: &PointCloud) -> Result<()> {
    match cloud.normals() {
        Some(ns) => {
            for (p, n) in cloud.points().iter().zip(ns) {
                writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z)?;
            }
        }
        None => {
            for p in cloud.points() {
                writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
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

    fn read<R: Read>(self, r: &mut R, big_endian: bool) -> Result<f64> {
        let mut buf = [0u8; 8];
        let bytes = &mut buf[..self.size()];
        r.read_exact(bytes)?;
        macro_rules! conv {
            ($t:ty) => {{
                let arr = bytes.try_into().expect("sized");
                (if big_endian {
                    <$t>::from_be_bytes(arr)
                } else {
                    <$t>::from_le_bytes(arr)
                }) as f64
            }};
        }
        Ok(match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => conv!(i16),
            Scalar::U16 => conv!(u16),
            Scalar::I32 => conv!(i32),
            Scalar::U32 => conv!(u32),
            Scalar::F32 => conv!(f32),
            Scalar::F64 => conv!(f64),
        })
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

fn read_header_line<R: BufRead>(r: &mut R, line_no: &mut usize) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(parse_err(*line_no, "unexpected end of PLY header"));
    }
    *line_no += 1;
    Ok(line.trim().to_string())
}

pub fn read_ply<R: BufRead>(mut r: R) -> Result<PointCloud> {
    let mut line_no = 0;
    if read_header_line(&mut r, &mut line_no)? != "ply" {
        return Err(parse_err(1, "missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = read_header_line(&mut r, &mut line_no)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => PlyFormat::BinaryBigEndian,
                    other => return Err(parse_err(line_no, format!("unknown format {other}"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before element"))?;
                let count = Scalar::parse(count)
                    .ok_or_else(|| parse_err(line_no, "bad list count type"))?;
                let item =
                    Scalar::parse(item).ok_or_else(|| parse_err(line_no, "bad list item type"))?;
                el.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(line_no, format!("bad property type {ty}")))?;
                el.properties.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => {
                return Err(parse_err(
                    line_no,
                    format!("unrecognized header line {line:?}"),
                ))
            }
        }
    }
    let format = format.ok_or_else(|| parse_err(line_no, "missing format line"))?;

    let mut points = Vec::new();
    let mut normals = Vec::new();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        let slot = |name: &str| {
            el.properties
                .iter()
                .position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name))
        };
        let xyz = [slot("x"), slot("y"), slot("z")];
        let nxyz = [slot("nx"), slot("ny"), slot("nz")];
        let has_normals = nxyz.iter().all(Option::is_some);
        if is_vertex && xyz.iter().any(Option::is_none) {
            return Err(parse_err(line_no, "vertex element lacks x, y or z"));
        }
        for _ in 0..el.count {
            let mut values = Vec::with_capacity(el.properties.len());
            match format {
                PlyFormat::Ascii => {
                    let mut line = String::new();
                    if r.read_line(&mut line)? == 0 {
                        return Err(parse_err(line_no, "unexpected end of PLY data"));
                    }
                    line_no += 1;
                    let mut tokens = line.split_whitespace().map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| parse_err(line_no, format!("bad number {t:?}")))
                    });
                    let mut next = || {
                        tokens
                            .next()
                            .unwrap_or_else(|| Err(parse_err(line_no, "too few values")))
                    };
                    for p in &el.properties {
                        match p {
                            Property::Scalar { .. } => values.push(next()?),
                            Property::List { .. } => {
                                let n = next()? as usize;
                                for _ in 0..n {
                                    next()?;
                                }
                                values.push(f64::NAN);
                            }
                        }
                    }
                }
                PlyFormat::BinaryLittleEndian | PlyFormat::BinaryBigEndian => {
                    let big = format == PlyFormat::BinaryBigEndian;
                    for p in &el.properties {
                        match p {
                            Property::Scalar { ty, .. } => values.push(ty.read(&mut r, big)?),
                            Property::List { count, item } => {
                                let n = count.read(&mut r, big)? as usize;
                                for _ in 0..n {
                                    item.read(&mut r, big)?;
                                }
                                values.push(f64::NAN);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                let get = |i: Option<usize>| values[i.expect("checked")];
                points.push(Vector3::new(get(xyz[0]), get(xyz[1]), get(xyz[2])));
                if has_normals {
                    normals.push(Vector3::new(get(nxyz[0]), get(nxyz[1]), get(nxyz[2])));
                }
            }
        }
    }
    if normals.is_empty() {
        Ok(PointCloud::new(points))
    } else {
        PointCloud::with_normals(points, normals)
    }
}

pub fn write_ply<W: Write>(mut w: W, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    let name = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
        PlyFormat::BinaryBigEndian => "binary_big_endian",
    };
    writeln!(w, "ply\nformat {name} 1.0\nelement vertex {}", cloud.len())?;
    let mut names = vec!["x", "y", "z"];
    if cloud.normals().is_some() {
        names.extend(["nx", "ny", "nz"]);
    }
    for n in &names {
        writeln!(w, "property double {n}")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        let mut row: Vec<f64> = vec![p.x, p.y, p.z];
        if let Some(ns) = cloud.normals() {
            row.extend([ns[i].x, ns[i].y, ns[i].z]);
        }
        match format {
            PlyFormat::Ascii => {
                let text: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", text.join(" "))?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            PlyFormat::BinaryBigEndian => {
                for v in row {
                    w.write_all(&v.to_be_bytes())?;
                }
            }
        }
    }
    Ok(())
}

/// Parse a 4×4 row-major transform; the last row must be `0 0 0 1`.
pub fn parse_transform(text: &str) -> Result<RigidTransform> {
    let values = text
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| parse_err(0, format!("{s:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != 16 {
        return Err(parse_err(
            0,
            format!("expected 16 values, got {}", values.len()),
        ));
    }
    let m = Matrix4::from_row_slice(&values);
    if m.row(3)
        .iter()
        .zip([0.0, 0.0, 0.0, 1.0])
        .any(|(a, b)| *a != b)
    {
        return Err(parse_err(4, "last row must be 0 0 0 1"));
    }
    Ok(RigidTransform::from_matrix(&m))
}

pub fn format_transform(t: &RigidTransform) -> String {
    let m = t.to_matrix();
    let mut out = String::new();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| m[(r, c)].to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_transform(path: &Path) -> Result<RigidTransform> {
    parse_transform(&fs::read_to_string(path)?)
}

pub fn write_transform(path: &Path, t: &RigidTransform) -> Result<()> {
    write_atomic(path, format_transform(t).as_bytes())
}

/// Points only, for quick construction in tests and tools.
pub fn cloud_from_rows(rows: &[[f64; 3]]) -> PointCloud {
    PointCloud::new(rows.iter().map(|r| Point::new(r[0], r[1], r[2])).collect())
}
