//! ASCII PLY point clouds.
//!
//! Reading accepts any ASCII PLY whose `vertex` element carries scalar
//! `x`, `y`, `z` properties; `red`/`green`/`blue` (uchar) and
//! `track_length` are picked up when present. Other elements and
//! properties, including list properties, are skipped. Binary encodings are
//! rejected.
//!
//! Writing emits `x y z` as `double` with 9 significant digits, followed by
//! `red green blue` and `track_length` when the cloud carries them.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::geom::Vec3;

#[derive(Debug)]
enum Property {
    Scalar(String),
    /// List property: the count is read first, then that many items.
    List(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

const SCALAR_TYPES: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16", "uint16", "int32",
    "uint32", "float32", "float64",
];

pub fn read_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header_end = find_header_end(bytes)?;
    let header =
        std::str::from_utf8(&bytes[..header_end.0]).map_err(|_| Error::parse("header", "PLY header is not ASCII"))?;
    let elements = parse_header(header)?;

    let body = std::str::from_utf8(&bytes[header_end.1..])
        .map_err(|e| Error::parse(format!("body byte {}", e.valid_up_to()), "PLY body is not ASCII"))?;
    let mut tokens = body.split_ascii_whitespace();

    let vertex = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::schema("element vertex"))?;
    let prop_index = |name: &str| {
        elements[vertex]
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar(n) if n == name))
    };
    let (ix, iy, iz) = match (prop_index("x"), prop_index("y"), prop_index("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        (None, _, _) => return Err(Error::schema("vertex.x")),
        (_, None, _) => return Err(Error::schema("vertex.y")),
        _ => return Err(Error::schema("vertex.z")),
    };
    let rgb = match (prop_index("red"), prop_index("green"), prop_index("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let track = prop_index("track_length");

    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut tracks = Vec::new();
    let mut next = |what: &str| -> Result<&str> {
        tokens
            .next()
            .ok_or_else(|| Error::parse("body", format!("unexpected end of data while reading {what}")))
    };
    for (ei, el) in elements.iter().enumerate() {
        for row in 0..el.count {
            let mut values: Vec<&str> = Vec::with_capacity(el.properties.len());
            for p in &el.properties {
                match p {
                    Property::Scalar(_) => values.push(next(&el.name)?),
                    Property::List(name) => {
                        let n: usize = next(&el.name)?.parse().map_err(|_| {
                            Error::parse(format!("{} {row}", el.name), format!("invalid list count for `{name}`"))
                        })?;
                        for _ in 0..n {
                            next(&el.name)?;
                        }
                        values.push("");
                    }
                }
            }
            if ei != vertex {
                continue;
            }
            let num = |i: usize| -> Result<f64> {
                values[i]
                    .parse::<f64>()
                    .map_err(|_| Error::parse(format!("vertex {row}"), format!("invalid number `{}`", values[i])))
            };
            points.push(Vec3::new(num(ix)?, num(iy)?, num(iz)?));
            if let Some([r, g, b]) = rgb {
                let byte = |i: usize| -> Result<u8> {
                    values[i]
                        .parse::<u8>()
                        .map_err(|_| Error::parse(format!("vertex {row}"), format!("invalid color `{}`", values[i])))
                };
                colors.push([byte(r)?, byte(g)?, byte(b)?]);
            }
            if let Some(t) = track {
                tracks.push(values[t].parse::<u32>().map_err(|_| {
                    Error::parse(format!("vertex {row}"), format!("invalid track_length `{}`", values[t]))
                })?);
            }
        }
    }

    let mut cloud = PointCloud::new(points);
    if rgb.is_some() {
        cloud = cloud.with_colors(colors)?;
    }
    if track.is_some() {
        cloud = cloud.with_track_lengths(tracks)?;
    }
    cloud.retain_finite();
    Ok(cloud)
}

pub fn write_ply(cloud: &PointCloud) -> Vec<u8> {
    let mut out = String::with_capacity(64 + cloud.len() * 40);
    out.push_str("ply\nformat ascii 1.0\ncomment sfm-tumble point cloud\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if cloud.track_lengths.is_some() {
        out.push_str("property uint track_length\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        out.push_str(&format!("{} {} {}", sig9(p.x), sig9(p.y), sig9(p.z)));
        if let Some(c) = &cloud.colors {
            out.push_str(&format!(" {} {} {}", c[i][0], c[i][1], c[i][2]));
        }
        if let Some(t) = &cloud.track_lengths {
            out.push_str(&format!(" {}", t[i]));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// Returns (end of header text, start of body) byte offsets.
fn find_header_end(bytes: &[u8]) -> Result<(usize, usize)> {
    if !bytes.starts_with(b"ply") {
        return Err(Error::parse("byte 0", "missing `ply` magic"));
    }
    let marker = b"end_header";
    let pos = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::parse("header", "missing `end_header`"))?;
    let mut body = pos + marker.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    Ok((pos, body))
}

fn parse_header(header: &str) -> Result<Vec<Element>> {
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    for (i, line) in header.lines().enumerate().skip(1) {
        let loc = || format!("header line {}", i + 1);
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => saw_format = true,
            ["format", enc, ..] => {
                return Err(Error::Unsupported(format!(
                    "PLY encoding `{enc}` (only ascii is supported)"
                )))
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(loc(), format!("invalid element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", ct, it, name] if SCALAR_TYPES.contains(ct) && SCALAR_TYPES.contains(it) => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(loc(), "property before any element"))?;
                el.properties.push(Property::List(name.to_string()));
            }
            ["property", ty, name] if SCALAR_TYPES.contains(ty) => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(loc(), "property before any element"))?;
                el.properties.push(Property::Scalar(name.to_string()));
            }
            _ => return Err(Error::parse(loc(), format!("unrecognized header line `{line}`"))),
        }
    }
    if !saw_format {
        return Err(Error::parse("header", "missing `format` line"));
    }
    Ok(elements)
}
