//! PCD v0.7 reader and writer (ascii and uncompressed binary).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewpoint {
    pub translation: [f64; 3],
    /// Quaternion in PCD order `(w, x, y, z)`.
    pub rotation_wxyz: [f64; 4],
}

impl Default for Viewpoint {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            rotation_wxyz: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CloudFile {
    pub points: Vec<[f32; 3]>,
    pub labels: Option<Vec<i64>>,
    pub viewpoint: Option<Viewpoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataMode {
    Ascii,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Float,
    Signed,
    Unsigned,
}

#[derive(Clone, Debug)]
struct Field {
    name: String,
    size: usize,
    kind: Kind,
    count: usize,
    offset: usize,
}

impl Field {
    fn read_le(&self, bytes: &[u8]) -> f64 {
        match (self.kind, self.size) {
            (Kind::Float, 4) => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            (Kind::Float, 8) => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            (Kind::Signed, 1) => bytes[0] as i8 as f64,
            (Kind::Signed, 2) => i16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            (Kind::Signed, 4) => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            (Kind::Signed, 8) => i64::from_le_bytes(bytes[..8].try_into().unwrap()) as f64,
            (Kind::Unsigned, 1) => bytes[0] as f64,
            (Kind::Unsigned, 2) => u16::from_le_bytes(bytes[..2].try_into().unwrap()) as f64,
            (Kind::Unsigned, 4) => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            (Kind::Unsigned, 8) => u64::from_le_bytes(bytes[..8].try_into().unwrap()) as f64,
            _ => unreachable!("field sizes validated at header parse"),
        }
    }

    fn read_f32(&self, bytes: &[u8]) -> f32 {
        if self.kind == Kind::Float && self.size == 4 {
            f32::from_le_bytes(bytes[..4].try_into().unwrap())
        } else {
            self.read_le(bytes) as f32
        }
    }

    fn read_int(&self, bytes: &[u8]) -> i64 {
        match (self.kind, self.size) {
            (Kind::Signed, 8) => i64::from_le_bytes(bytes[..8].try_into().unwrap()),
            (Kind::Unsigned, 8) => u64::from_le_bytes(bytes[..8].try_into().unwrap()) as i64,
            _ => self.read_le(bytes) as i64,
        }
    }
}

#[derive(Debug)]
struct Header {
    fields: Vec<Field>,
    stride: usize,
    points: usize,
    viewpoint: Option<Viewpoint>,
    mode: DataMode,
    data_start: usize,
    data_line: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let mut names: Option<Vec<String>> = None;
    let mut sizes: Option<Vec<usize>> = None;
    let mut types: Option<Vec<Kind>> = None;
    let mut counts: Option<Vec<usize>> = None;
    let mut width: Option<usize> = None;
    let mut height: Option<usize> = None;
    let mut points: Option<usize> = None;
    let mut viewpoint = None;

    let mut pos = 0;
    let mut line_no = 0;
    while pos < bytes.len() {
        line_no += 1;
        let end = bytes[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .map_or(bytes.len(), |i| pos + i);
        let raw = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::parse(path, line_no, "header is not valid UTF-8"))?;
        let next = (end + 1).min(bytes.len());
        let line = raw.trim();
        pos = next;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let key = tokens.next().unwrap().to_ascii_uppercase();
        let rest: Vec<&str> = tokens.collect();
        let err = |msg: String| Error::parse(path, line_no, msg);
        let parse_usizes = |vals: &[&str]| -> Result<Vec<usize>> {
            vals.iter()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| err(format!("{key}: invalid integer '{t}'")))
                })
                .collect()
        };
        let single = |vals: &[&str]| -> Result<usize> {
            match parse_usizes(vals)?.as_slice() {
                [v] => Ok(*v),
                _ => Err(err(format!("{key} expects one value"))),
            }
        };
        match key.as_str() {
            "VERSION" => {}
            "FIELDS" => names = Some(rest.iter().map(|s| s.to_string()).collect()),
            "SIZE" => sizes = Some(parse_usizes(&rest)?),
            "TYPE" => {
                types = Some(
                    rest.iter()
                        .map(|t| match *t {
                            "F" | "f" => Ok(Kind::Float),
                            "I" | "i" => Ok(Kind::Signed),
                            "U" | "u" => Ok(Kind::Unsigned),
                            other => Err(err(format!("unknown TYPE '{other}'"))),
                        })
                        .collect::<Result<_>>()?,
                )
            }
            "COUNT" => counts = Some(parse_usizes(&rest)?),
            "WIDTH" => width = Some(single(&rest)?),
            "HEIGHT" => height = Some(single(&rest)?),
            "POINTS" => points = Some(single(&rest)?),
            "VIEWPOINT" => {
                let vals: Vec<f64> = rest
                    .iter()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(format!("VIEWPOINT: invalid number '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != 7 {
                    return Err(err(format!("VIEWPOINT expects 7 values, got {}", vals.len())));
                }
                viewpoint = Some(Viewpoint {
                    translation: [vals[0], vals[1], vals[2]],
                    rotation_wxyz: [vals[3], vals[4], vals[5], vals[6]],
                });
            }
            "DATA" => {
                let mode = match rest.first().map(|s| s.to_ascii_lowercase()).as_deref() {
                    Some("ascii") => DataMode::Ascii,
                    Some("binary") => DataMode::Binary,
                    Some(other) => {
                        return Err(Error::Unsupported {
                            path: path.to_path_buf(),
                            feature: format!("DATA {other}"),
                        })
                    }
                    None => return Err(err("DATA requires a mode".into())),
                };
                let names = names.ok_or_else(|| err("missing FIELDS before DATA".into()))?;
                let n = names.len();
                let sizes = sizes.unwrap_or_else(|| vec![4; n]);
                let types = types.unwrap_or_else(|| vec![Kind::Float; n]);
                let counts = counts.unwrap_or_else(|| vec![1; n]);
                if sizes.len() != n || types.len() != n || counts.len() != n {
                    return Err(err(format!(
                        "FIELDS/SIZE/TYPE/COUNT lengths disagree ({n}/{}/{}/{})",
                        sizes.len(),
                        types.len(),
                        counts.len()
                    )));
                }
                let mut fields = Vec::with_capacity(n);
                let mut offset = 0;
                for i in 0..n {
                    let ok = match types[i] {
                        Kind::Float => matches!(sizes[i], 4 | 8),
                        _ => matches!(sizes[i], 1 | 2 | 4 | 8),
                    };
                    if !ok || counts[i] == 0 {
                        return Err(err(format!(
                            "field '{}' has unsupported size {} / count {}",
                            names[i], sizes[i], counts[i]
                        )));
                    }
                    fields.push(Field {
                        name: names[i].clone(),
                        size: sizes[i],
                        kind: types[i],
                        count: counts[i],
                        offset,
                    });
                    offset += sizes[i] * counts[i];
                }
                let points = match (points, width, height) {
                    (Some(p), _, _) => p,
                    (None, Some(w), Some(h)) => w * h,
                    _ => return Err(err("missing POINTS".into())),
                };
                if let (Some(w), Some(h)) = (width, height) {
                    if w * h != points {
                        return Err(err(format!("WIDTH*HEIGHT = {} but POINTS = {points}", w * h)));
                    }
                }
                return Ok(Header {
                    fields,
                    stride: offset,
                    points,
                    viewpoint,
                    mode,
                    data_start: next,
                    data_line: line_no,
                });
            }
            other => return Err(err(format!("unknown header key '{other}'"))),
        }
    }
    Err(Error::parse(path, line_no, "header ended without DATA line"))
}

pub fn read_pcd(path: impl AsRef<Path>) -> Result<CloudFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pcd(path, &bytes)
}

/// Parses PCD bytes; `path` is only used in error messages.
pub fn parse_pcd(path: &Path, bytes: &[u8]) -> Result<CloudFile> {
    let header = parse_header(path, bytes)?;
    let find = |name: &str| header.fields.iter().find(|f| f.name == name);
    let (x, y, z) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x.clone(), y.clone(), z.clone()),
        _ => return Err(Error::parse(path, header.data_line, "FIELDS must include x, y and z")),
    };
    for f in [&x, &y, &z] {
        if f.kind != Kind::Float || f.count != 1 {
            return Err(Error::parse(
                path,
                header.data_line,
                format!("field '{}' must be a float scalar", f.name),
            ));
        }
    }
    let label = find("label").cloned();
    if let Some(l) = &label {
        if l.kind == Kind::Float || l.count != 1 {
            return Err(Error::parse(
                path,
                header.data_line,
                "field 'label' must be an integer scalar",
            ));
        }
    }

    let mut cloud = CloudFile {
        points: Vec::with_capacity(header.points),
        labels: label.as_ref().map(|_| Vec::with_capacity(header.points)),
        viewpoint: header.viewpoint,
    };
    let data = &bytes[header.data_start..];
    match header.mode {
        DataMode::Binary => {
            let need = header.points * header.stride;
            if data.len() < need {
                return Err(Error::parse(
                    path,
                    header.data_line,
                    format!("binary payload has {} bytes, expected {need}", data.len()),
                ));
            }
            for row in data[..need].chunks_exact(header.stride) {
                cloud.points.push([
                    x.read_f32(&row[x.offset..]),
                    y.read_f32(&row[y.offset..]),
                    z.read_f32(&row[z.offset..]),
                ]);
                if let (Some(l), Some(out)) = (&label, cloud.labels.as_mut()) {
                    out.push(l.read_int(&row[l.offset..]));
                }
            }
        }
        DataMode::Ascii => {
            let text = std::str::from_utf8(data)
                .map_err(|_| Error::parse(path, header.data_line + 1, "ascii payload is not UTF-8"))?;
            // Token index of each field's first value within a row.
            let mut token_index = Vec::with_capacity(header.fields.len());
            let mut t = 0;
            for f in &header.fields {
                token_index.push(t);
                t += f.count;
            }
            let tokens_per_row = t;
            let idx = |name: &str| {
                header
                    .fields
                    .iter()
                    .position(|f| f.name == name)
                    .map(|i| token_index[i])
            };
            let (xi, yi, zi) = (idx("x").unwrap(), idx("y").unwrap(), idx("z").unwrap());
            let li = idx("label");
            let mut rows = 0;
            for (offset, line) in text.lines().enumerate() {
                let line_no = header.data_line + 1 + offset;
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                if rows == header.points {
                    return Err(Error::parse(path, line_no, "more data rows than POINTS"));
                }
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != tokens_per_row {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("expected {tokens_per_row} values, found {}", tokens.len()),
                    ));
                }
                let coord = |i: usize| {
                    tokens[i]
                        .parse::<f32>()
                        .map_err(|_| Error::parse(path, line_no, format!("invalid float '{}'", tokens[i])))
                };
                cloud.points.push([coord(xi)?, coord(yi)?, coord(zi)?]);
                if let (Some(i), Some(out)) = (li, cloud.labels.as_mut()) {
                    let v = tokens[i]
                        .parse::<i64>()
                        .map_err(|_| Error::parse(path, line_no, format!("invalid label '{}'", tokens[i])))?;
                    out.push(v);
                }
                rows += 1;
            }
            if rows != header.points {
                return Err(Error::parse(
                    path,
                    header.data_line,
                    format!("POINTS = {} but {rows} data rows", header.points),
                ));
            }
        }
    }
    Ok(cloud)
}

/// Serializes a cloud as PCD v0.7. Labels are written as a `U 4` field.
pub fn encode_pcd(cloud: &CloudFile, mode: DataMode) -> Result<Vec<u8>> {
    if let Some(labels) = &cloud.labels {
        if labels.len() != cloud.points.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                cloud.points.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|l| !(0..=u32::MAX as i64).contains(*l)) {
            return Err(Error::invalid(format!("label {bad} does not fit a U4 field")));
        }
    }
    let n = cloud.points.len();
    let vp = cloud.viewpoint.unwrap_or_default();
    let has_labels = cloud.labels.is_some();
    let mut header = String::new();
    header.push_str("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n");
    if has_labels {
        header.push_str("FIELDS x y z label\nSIZE 4 4 4 4\nTYPE F F F U\nCOUNT 1 1 1 1\n");
    } else {
        header.push_str("FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n");
    }
    let _ = writeln!(header, "WIDTH {n}\nHEIGHT 1");
    let _ = writeln!(
        header,
        "VIEWPOINT {} {} {} {} {} {} {}",
        vp.translation[0],
        vp.translation[1],
        vp.translation[2],
        vp.rotation_wxyz[0],
        vp.rotation_wxyz[1],
        vp.rotation_wxyz[2],
        vp.rotation_wxyz[3]
    );
    let _ = writeln!(header, "POINTS {n}");
    let mut out = header.into_bytes();
    match mode {
        DataMode::Ascii => {
            out.extend_from_slice(b"DATA ascii\n");
            let mut body = String::with_capacity(n * 32);
            for (i, p) in cloud.points.iter().enumerate() {
                let _ = write!(body, "{} {} {}", p[0], p[1], p[2]);
                if let Some(labels) = &cloud.labels {
                    let _ = write!(body, " {}", labels[i]);
                }
                body.push('\n');
            }
            out.extend_from_slice(body.as_bytes());
        }
        DataMode::Binary => {
            out.extend_from_slice(b"DATA binary\n");
            out.reserve(n * if has_labels { 16 } else { 12 });
            for (i, p) in cloud.points.iter().enumerate() {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(labels) = &cloud.labels {
                    out.extend_from_slice(&(labels[i] as u32).to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn write_pcd(path: impl AsRef<Path>, cloud: &CloudFile, mode: DataMode) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pcd(cloud, mode)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
