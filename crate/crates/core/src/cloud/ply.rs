//! ASCII PLY reader/writer for `x y z [red green blue] [nx ny nz]` vertices.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Prop {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Nx,
    Ny,
    Nz,
    Ignored,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<(Prop, bool)>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn is_float_type(t: &str) -> bool {
    matches!(t, "float" | "float32" | "double" | "float64")
}

fn is_uchar_type(t: &str) -> bool {
    matches!(t, "uchar" | "uint8")
}

/// Parses ASCII PLY text. Elements other than `vertex` are skipped.
pub fn parse_ply(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(parse_err(n, "missing `ply` magic")),
        None => return Err(parse_err(1, "empty file")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let Some((n, line)) = lines.next() else {
            return Err(parse_err(0, "unterminated header"));
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => saw_format = true,
            ["format", other, ..] => return Err(parse_err(n, format!("unsupported format `{other}`"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(n, format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", ..] => {
                let el = elements.last_mut().ok_or_else(|| parse_err(n, "property before element"))?;
                if el.name == "vertex" {
                    return Err(Error::UnsupportedProperty(line.to_string()));
                }
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| parse_err(n, "property before element"))?;
                if el.name != "vertex" {
                    continue;
                }
                let prop = match *name {
                    "x" => Prop::X,
                    "y" => Prop::Y,
                    "z" => Prop::Z,
                    "red" => Prop::Red,
                    "green" => Prop::Green,
                    "blue" => Prop::Blue,
                    "nx" => Prop::Nx,
                    "ny" => Prop::Ny,
                    "nz" => Prop::Nz,
                    "alpha" | "intensity" | "confidence" => Prop::Ignored,
                    other => return Err(Error::UnsupportedProperty(other.to_string())),
                };
                let known_type = is_float_type(ty) || is_uchar_type(ty) || matches!(*ty, "int" | "uint" | "short" | "ushort" | "char" | "int32" | "uint32");
                if !known_type {
                    return Err(parse_err(n, format!("unknown property type `{ty}`")));
                }
                el.props.push((prop, is_uchar_type(ty)));
            }
            ["end_header"] => break,
            _ => return Err(parse_err(n, format!("malformed header line `{line}`"))),
        }
    }
    if !saw_format {
        return Err(parse_err(0, "missing format line"));
    }

    let mut cloud = PointCloud::default();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                lines.next().ok_or_else(|| parse_err(0, format!("truncated `{}` element", el.name)))?;
            }
            continue;
        }
        let has = |p: Prop| el.props.iter().any(|(q, _)| *q == p);
        for p in [Prop::X, Prop::Y, Prop::Z] {
            if !has(p) {
                return Err(parse_err(0, format!("vertex element lacks {p:?}")));
            }
        }
        let has_color = has(Prop::Red) && has(Prop::Green) && has(Prop::Blue);
        let has_normal = has(Prop::Nx) && has(Prop::Ny) && has(Prop::Nz);
        let mut colors = Vec::new();
        let mut normals = Vec::new();
        for _ in 0..el.count {
            let (n, line) = lines.next().ok_or_else(|| parse_err(0, "truncated vertex list"))?;
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != el.props.len() {
                return Err(parse_err(n, format!("expected {} values, found {}", el.props.len(), values.len())));
            }
            let mut pos = Vector3::zeros();
            let mut rgb = [0.0; 3];
            let mut nrm = Vector3::zeros();
            for ((prop, is_u8), raw) in el.props.iter().zip(values) {
                let v: f64 = raw.parse().map_err(|_| parse_err(n, format!("bad number `{raw}`")))?;
                let color = |v: f64| if *is_u8 { v / 255.0 } else { v };
                match prop {
                    Prop::X => pos.x = v,
                    Prop::Y => pos.y = v,
                    Prop::Z => pos.z = v,
                    Prop::Red => rgb[0] = color(v),
                    Prop::Green => rgb[1] = color(v),
                    Prop::Blue => rgb[2] = color(v),
                    Prop::Nx => nrm.x = v,
                    Prop::Ny => nrm.y = v,
                    Prop::Nz => nrm.z = v,
                    Prop::Ignored => {}
                }
            }
            cloud.points.push(pos);
            if has_color {
                colors.push(rgb);
            }
            if has_normal {
                let len = nrm.norm();
                normals.push(if len > 0.0 { nrm / len } else { Vector3::z() });
            }
        }
        if has_color {
            cloud.colors = Some(colors);
        }
        if has_normal {
            cloud.normals = Some(normals);
        }
    }
    Ok(cloud)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text)
}

/// Serializes a cloud as ASCII PLY with float32 coordinates and uchar colors.
pub fn write_ply(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.normals.is_some() {
        out.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
        if let Some(c) = &cloud.colors {
            let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            let _ = write!(out, " {} {} {}", q(c[i][0]), q(c[i][1]), q(c[i][2]));
        }
        if let Some(n) = &cloud.normals {
            let _ = write!(out, " {} {} {}", n[i].x as f32, n[i].y as f32, n[i].z as f32);
        }
        out.push('\n');
    }
    out
}

pub fn save_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_ply(cloud)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_three_points() {
        let c = PointCloud::from_points(vec![
            Vector3::new(0.1, 0.2, 0.3),
            Vector3::new(-1.5, 2.25, 1e-4),
            Vector3::new(3.0, -0.001, 0.5),
        ])
        .with_normals(vec![Vector3::x(), Vector3::y(), Vector3::new(0.6, 0.8, 0.0)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        save_ply(&path, &c).unwrap();
        let back = load_ply(&path).unwrap();
        for (a, b) in c.points.iter().zip(&back.points) {
            assert!((a - b).norm() < 1e-6);
        }
        for (a, b) in c.normals.unwrap().iter().zip(back.normals.unwrap().iter()) {
            assert!((a - b).norm() < 1e-6);
        }
        assert!(back.colors.is_none());
    }

    #[test]
    fn colors_scale_from_bytes() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n\
                    property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n\
                    0 0 0 255 0 51\n1 1 1 0 255 102\n";
        let c = parse_ply(text).unwrap();
        let colors = c.colors.clone().unwrap();
        assert_eq!(colors[0], [1.0, 0.0, 0.2]);
        assert_eq!(colors[1], [0.0, 1.0, 0.4]);
        // written colors quantize back to the same bytes
        let again = parse_ply(&write_ply(&c)).unwrap();
        assert_eq!(again.colors.unwrap(), colors);
    }

    #[test]
    fn malformed_header_names_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nbogus line here\nend_header\n0\n";
        match parse_ply(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 1\n";
        match parse_ply(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_property_is_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nproperty float curvature\nend_header\n";
        assert!(matches!(parse_ply(text), Err(Error::UnsupportedProperty(p)) if p == "curvature"));
    }

    #[test]
    fn face_elements_are_skipped() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert_eq!(parse_ply(text).unwrap().len(), 3);
    }
}
