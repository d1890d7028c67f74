//! PLY point clouds with exactly one layout: a `vertex` element with float
//! `x y z` and uchar `red green blue`. Writing is always binary little
//! endian; reading also accepts ASCII.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geometry::{ColoredPoint, PointCloud};

const PROPERTIES: [(&str, &str); 6] =
    [("float", "x"), ("float", "y"), ("float", "z"), ("uchar", "red"), ("uchar", "green"), ("uchar", "blue")];
const RECORD: usize = 15;

fn unsupported(msg: impl Into<String>) -> Error {
    Error::UnsupportedPly(msg.into())
}

pub fn write_ply(mut w: impl Write, cloud: &PointCloud) -> Result<()> {
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", cloud.len());
    for (ty, name) in PROPERTIES {
        header.push_str(&format!("property {ty} {name}\n"));
    }
    header.push_str("end_header\n");
    w.write_all(header.as_bytes())?;
    let mut body = Vec::with_capacity(cloud.len() * RECORD);
    for p in cloud.iter() {
        for c in p.position.iter() {
            body.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        body.extend_from_slice(&p.color);
    }
    w.write_all(&body)?;
    Ok(())
}

pub fn write_ply_file(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

pub fn read_ply_file(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_ply(BufReader::new(file))
}

#[derive(PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

fn header_line(r: &mut impl BufRead) -> Result<String> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(unsupported("truncated header"));
    }
    let line = String::from_utf8(line).map_err(|_| unsupported("header is not UTF-8"))?;
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

pub fn read_ply(mut r: impl BufRead) -> Result<PointCloud> {
    if header_line(&mut r)? != "ply" {
        return Err(unsupported("missing ply magic"));
    }
    let mut line = header_line(&mut r)?;
    while line.starts_with("comment") || line.starts_with("obj_info") {
        line = header_line(&mut r)?;
    }
    let encoding = match line.as_str() {
        "format ascii 1.0" => Encoding::Ascii,
        "format binary_little_endian 1.0" => Encoding::BinaryLe,
        other => return Err(unsupported(format!("unsupported format line {other:?}"))),
    };
    let mut line = header_line(&mut r)?;
    while line.starts_with("comment") {
        line = header_line(&mut r)?;
    }
    let count: usize = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["element", "vertex", n] => n.parse().map_err(|_| unsupported(format!("bad vertex count {n:?}")))?,
        _ => return Err(unsupported(format!("expected vertex element, got {line:?}"))),
    };
    for (ty, name) in PROPERTIES {
        let line = header_line(&mut r)?;
        let words: Vec<&str> = line.split_whitespace().collect();
        let type_ok = match ty {
            "float" => matches!(words.get(1), Some(&"float") | Some(&"float32")),
            _ => matches!(words.get(1), Some(&"uchar") | Some(&"uint8")),
        };
        if words.len() != 3 || words[0] != "property" || !type_ok || words[2] != name {
            return Err(unsupported(format!("expected property {ty} {name}, got {line:?}")));
        }
    }
    let line = header_line(&mut r)?;
    if line != "end_header" {
        return Err(unsupported(format!("unexpected header line {line:?}")));
    }

    let mut points = Vec::with_capacity(count);
    match encoding {
        Encoding::BinaryLe => {
            let mut body = Vec::new();
            r.read_to_end(&mut body)?;
            if body.len() != count * RECORD {
                return Err(unsupported(format!("body has {} bytes, expected {}", body.len(), count * RECORD)));
            }
            for rec in body.chunks_exact(RECORD) {
                let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
                points.push(ColoredPoint { position: Point3::new(f(0), f(1), f(2)), color: [rec[12], rec[13], rec[14]] });
            }
        }
        Encoding::Ascii => {
            let mut text = String::new();
            r.read_to_string(&mut text).map_err(|_| unsupported("ASCII body is not UTF-8"))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for k in 0..count {
                let line = lines.next().ok_or_else(|| unsupported(format!("missing vertex {k}")))?;
                let words: Vec<&str> = line.split_whitespace().collect();
                if words.len() != 6 {
                    return Err(unsupported(format!("vertex {k} has {} values", words.len())));
                }
                let coord = |s: &str| s.parse::<f32>().map(f64::from).map_err(|_| unsupported(format!("bad coordinate {s:?}")));
                let channel = |s: &str| s.parse::<u8>().map_err(|_| unsupported(format!("bad color value {s:?}")));
                points.push(ColoredPoint {
                    position: Point3::new(coord(words[0])?, coord(words[1])?, coord(words[2])?),
                    color: [channel(words[3])?, channel(words[4])?, channel(words[5])?],
                });
            }
            if lines.next().is_some() {
                return Err(unsupported("trailing data after vertices"));
            }
        }
    }
    Ok(PointCloud::new(points))
}
