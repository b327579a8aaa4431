//! File formats.
//!
//! Images are 8-bit portable graymaps. Everything else is line-oriented
//! text: a header line naming the kind and dimensions, then one pixel per
//! line in row-major order. Floats are written with 17 significant digits,
//! which round-trips every `f64` exactly. All writers go through
//! [`write_atomic`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::integrate::{DepthMap, Mask};
use crate::metrics::EvalReport;
use crate::model::{AlbedoMap, CombinationWeights, Direction, IntensityImage, NormalField, Vec3};
use crate::train::TrainRecord;

/// Tolerance on the norm of normals read from disk.
pub const UNIT_TOL: f64 = 1e-6;

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------- graymaps

struct PgmCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while self.data.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<(usize, &str)> {
        self.skip_space();
        let start = self.pos;
        while self
            .data
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format {
                offset: start,
                message: "unexpected end of data".into(),
            });
        }
        let s = std::str::from_utf8(&self.data[start..self.pos]).map_err(|_| Error::Format {
            offset: start,
            message: "non-ASCII header token".into(),
        })?;
        Ok((start, s))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let (offset, tok) = self.token()?;
        tok.parse().map_err(|_| Error::Format {
            offset,
            message: format!("invalid {what} {tok:?}"),
        })
    }
}

pub fn parse_pgm(data: &[u8]) -> Result<IntensityImage> {
    let magic = data.get(..2).ok_or(Error::Format {
        offset: data.len(),
        message: "missing magic number".into(),
    })?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(Error::UnsupportedFormat {
                offset: 0,
                message: format!(
                    "magic {:?}, only P2 and P5 graymaps are read",
                    String::from_utf8_lossy(other)
                ),
            })
        }
    };
    let mut cur = PgmCursor { data, pos: 2 };
    if !cur.data.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::UnsupportedFormat {
            offset: 2,
            message: "magic number not followed by whitespace".into(),
        });
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_offset = {
        cur.skip_space();
        cur.pos
    };
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format {
            offset: maxval_offset,
            message: format!("maxval must be 255, got {maxval}"),
        });
    }
    if width == 0 || height == 0 {
        return Err(Error::Format {
            offset: maxval_offset,
            message: format!("empty image {width}x{height}"),
        });
    }
    let m = width * height;
    let raw = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = cur.pos + 1;
        let end = start + m;
        if data.len() < end {
            return Err(Error::Format {
                offset: data.len(),
                message: format!("truncated raster: expected {m} bytes, found {}", data.len().saturating_sub(start)),
            });
        }
        data[start..end].to_vec()
    } else {
        let mut raw = Vec::with_capacity(m);
        for _ in 0..m {
            let (offset, tok) = cur.token().map_err(|_| Error::Format {
                offset: data.len(),
                message: format!("truncated raster: expected {m} samples, found {}", raw.len()),
            })?;
            match tok.parse::<u16>() {
                Ok(v) if v <= 255 => raw.push(v as u8),
                _ => {
                    return Err(Error::Format {
                        offset,
                        message: format!("invalid sample {tok:?}"),
                    })
                }
            }
        }
        raw
    };
    IntensityImage::from_gray8(width, height, &raw)
}

/// Binary (P5) encoding.
pub fn encode_pgm(img: &IntensityImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_gray8());
    out
}

pub fn read_image(path: &Path) -> Result<IntensityImage> {
    parse_pgm(&fs::read(path)?)
}

pub fn write_image(path: &Path, img: &IntensityImage) -> Result<()> {
    write_atomic(path, &encode_pgm(img))
}

/// Masks are stored as graymaps with 255 on the object and 0 elsewhere.
pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let values = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    write_image(path, &IntensityImage::new(mask.width(), mask.height(), values)?)
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = read_image(path)?;
    Mask::new(
        img.width(),
        img.height(),
        img.values().iter().map(|&v| v >= 0.5).collect(),
    )
}

// ------------------------------------------------------------ text formats

/// A parsed text file: dimensions from the header and one row of floats
/// per pixel, each tagged with its 1-based line number.
struct TextTable {
    dims: Vec<usize>,
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_table(text: &str, kind: &str, ndims: usize, columns: usize) -> Result<TextTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::CorruptField {
        line: 1,
        message: format!("missing {kind} header"),
    })?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(kind) {
        return Err(Error::CorruptField {
            line: hline,
            message: format!("expected header starting with {kind}, got {header:?}"),
        });
    }
    let dims: Vec<usize> = fields
        .map(|f| f.parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::CorruptField {
            line: hline,
            message: format!("invalid dimensions in {header:?}"),
        })?;
    if dims.len() != ndims || dims.contains(&0) {
        return Err(Error::CorruptField {
            line: hline,
            message: format!("expected {ndims} positive dimensions in {header:?}"),
        });
    }
    let rows = lines
        .map(|(line, l)| {
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::CorruptField {
                    line,
                    message: format!("unparsable number in {l:?}"),
                })?;
            if vals.len() != columns {
                return Err(Error::CorruptField {
                    line,
                    message: format!("expected {columns} values, found {}", vals.len()),
                });
            }
            Ok((line, vals))
        })
        .collect::<Result<Vec<_>>>()?;
    let expected = dims.iter().product();
    if rows.len() != expected {
        return Err(Error::Shape {
            what: "table rows",
            expected,
            found: rows.len(),
        });
    }
    Ok(TextTable { dims, rows })
}

fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

pub fn format_normals(field: &NormalField) -> String {
    let mut s = format!("NRM {} {}\n", field.width(), field.height());
    for n in field.normals() {
        let _ = writeln!(s, "{} {} {}", float(n.x), float(n.y), float(n.z));
    }
    s
}

pub fn parse_normals(text: &str) -> Result<NormalField> {
    let t = parse_table(text, "NRM", 2, 3)?;
    let normals = t
        .rows
        .iter()
        .map(|(line, v)| {
            let n = Vec3::new(v[0], v[1], v[2]);
            let norm = n.norm();
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::CorruptField {
                    line: *line,
                    message: format!("normal has norm {norm}, expected 1"),
                });
            }
            Ok(Direction::new_normalize(n))
        })
        .collect::<Result<_>>()?;
    NormalField::new(t.dims[0], t.dims[1], normals)
}

pub fn write_normals(path: &Path, field: &NormalField) -> Result<()> {
    write_atomic(path, format_normals(field).as_bytes())
}

pub fn read_normals(path: &Path) -> Result<NormalField> {
    parse_normals(&read_text(path)?)
}

/// Off-mask pixels are written as `nan`.
pub fn format_depth(depth: &DepthMap) -> String {
    let mut s = format!("DPT {} {}\n", depth.width(), depth.height());
    for (z, &on) in depth.heights().iter().zip(depth.mask().bits()) {
        if on {
            s.push_str(&float(*z));
        } else {
            s.push_str("nan");
        }
        s.push('\n');
    }
    s
}

pub fn parse_depth(text: &str) -> Result<DepthMap> {
    let t = parse_table(text, "DPT", 2, 1)?;
    let z: Vec<f64> = t.rows.iter().map(|(_, v)| v[0]).collect();
    if let Some((line, _)) = t.rows.iter().find(|(_, v)| v[0].is_infinite()) {
        return Err(Error::CorruptField {
            line: *line,
            message: "infinite depth".into(),
        });
    }
    let mask = Mask::new(t.dims[0], t.dims[1], z.iter().map(|v| !v.is_nan()).collect())?;
    DepthMap::new(z, mask)
}

pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    write_atomic(path, format_depth(depth).as_bytes())
}

pub fn read_depth(path: &Path) -> Result<DepthMap> {
    parse_depth(&read_text(path)?)
}

pub fn format_albedo(albedo: &AlbedoMap) -> String {
    let mut s = format!("ALB {} {}\n", albedo.width(), albedo.height());
    for a in albedo.values() {
        let _ = writeln!(s, "{}", float(*a));
    }
    s
}

pub fn parse_albedo(text: &str) -> Result<AlbedoMap> {
    let t = parse_table(text, "ALB", 2, 1)?;
    if let Some((line, v)) = t.rows.iter().find(|(_, v)| !(v[0] > 0.0 && v[0] <= 1.0)) {
        return Err(Error::CorruptField {
            line: *line,
            message: format!("albedo {} outside (0, 1]", v[0]),
        });
    }
    AlbedoMap::new(t.dims[0], t.dims[1], t.rows.iter().map(|(_, v)| v[0]).collect())
}

pub fn write_albedo(path: &Path, albedo: &AlbedoMap) -> Result<()> {
    write_atomic(path, format_albedo(albedo).as_bytes())
}

pub fn read_albedo(path: &Path) -> Result<AlbedoMap> {
    parse_albedo(&read_text(path)?)
}

/// One `diffuse specular` pair per pixel.
pub fn format_lambdas(lambdas: &CombinationWeights, width: usize, height: usize) -> Result<String> {
    if width * height != lambdas.len() {
        return Err(Error::Shape {
            what: "combination weights",
            expected: width * height,
            found: lambdas.len(),
        });
    }
    let mut s = format!("LAM {width} {height}\n");
    for (d, sp) in lambdas.diffuse().iter().zip(lambdas.specular()) {
        let _ = writeln!(s, "{} {}", float(*d), float(*sp));
    }
    Ok(s)
}

pub fn parse_lambdas(text: &str, floor: f64) -> Result<(CombinationWeights, usize, usize)> {
    let t = parse_table(text, "LAM", 2, 2)?;
    let (d, s) = t.rows.iter().map(|(_, v)| (v[0], v[1])).unzip();
    Ok((CombinationWeights::new(d, s, floor)?, t.dims[0], t.dims[1]))
}

pub fn write_lambdas(path: &Path, lambdas: &CombinationWeights, width: usize, height: usize) -> Result<()> {
    write_atomic(path, format_lambdas(lambdas, width, height)?.as_bytes())
}

pub fn read_lambdas(path: &Path, floor: f64) -> Result<(CombinationWeights, usize, usize)> {
    parse_lambdas(&read_text(path)?, floor)
}

pub fn format_lights(lights: &[Direction]) -> String {
    let mut s = format!("LGT {}\n", lights.len());
    for l in lights {
        let _ = writeln!(s, "{} {} {}", float(l.x), float(l.y), float(l.z));
    }
    s
}

pub fn parse_lights(text: &str) -> Result<Vec<Direction>> {
    let t = parse_table(text, "LGT", 1, 3)?;
    t.rows
        .iter()
        .map(|(line, v)| {
            let l = Vec3::new(v[0], v[1], v[2]);
            if !((l.norm() - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::CorruptField {
                    line: *line,
                    message: format!("light has norm {}, expected 1", l.norm()),
                });
            }
            Ok(Direction::new_normalize(l))
        })
        .collect()
}

pub fn write_lights(path: &Path, lights: &[Direction]) -> Result<()> {
    write_atomic(path, format_lights(lights).as_bytes())
}

pub fn read_lights(path: &Path) -> Result<Vec<Direction>> {
    parse_lights(&read_text(path)?)
}

pub const RECORD_HEADER: &str = "epoch,error,eta";

pub fn format_train_record(record: &TrainRecord) -> String {
    let mut s = format!("{RECORD_HEADER}\n");
    for e in record.entries() {
        let _ = writeln!(s, "{},{},{}", e.epoch, float(e.error), float(e.eta));
    }
    s
}

pub fn parse_train_record(text: &str) -> Result<TrainRecord> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, RECORD_HEADER)) => {}
        other => {
            return Err(Error::CorruptField {
                line: 1,
                message: format!("expected header {RECORD_HEADER:?}, got {:?}", other.map(|o| o.1)),
            })
        }
    }
    let mut record = TrainRecord::new();
    for (line, l) in lines.filter(|(_, l)| !l.is_empty()) {
        let bad = |message: String| Error::CorruptField { line, message };
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", f.len())));
        }
        let epoch = f[0].parse().map_err(|_| bad(format!("invalid epoch {:?}", f[0])))?;
        let error = f[1].parse().map_err(|_| bad(format!("invalid error {:?}", f[1])))?;
        let eta = f[2].parse().map_err(|_| bad(format!("invalid eta {:?}", f[2])))?;
        record.push(epoch, error, eta).map_err(|e| bad(e.to_string()))?;
    }
    Ok(record)
}

pub fn write_train_record(path: &Path, record: &TrainRecord) -> Result<()> {
    write_atomic(path, format_train_record(record).as_bytes())
}

pub fn read_train_record(path: &Path) -> Result<TrainRecord> {
    parse_train_record(&read_text(path)?)
}

/// Wavefront OBJ: a vertex `(x, y, z)` per on-mask pixel and two triangles
/// for every 2 x 2 block of on-mask pixels.
pub fn mesh_obj(depth: &DepthMap) -> Result<String> {
    let mask = depth.mask();
    if mask.is_empty() {
        return Err(Error::Empty("mask"));
    }
    let (w, h) = (depth.width(), depth.height());
    let mut index = vec![0usize; w * h];
    let mut s = String::new();
    for (next, i) in (1..).zip(mask.indices()) {
        index[i] = next;
        let _ = writeln!(s, "v {} {} {}", i % w, i / w, float(depth.heights()[i]));
    }
    for y in 0..h.saturating_sub(1) {
        for x in 0..w - 1 {
            let quad = [y * w + x, y * w + x + 1, (y + 1) * w + x, (y + 1) * w + x + 1];
            if quad.iter().all(|&i| mask.get(i)) {
                let [a, b, c, d] = quad.map(|i| index[i]);
                let _ = writeln!(s, "f {a} {c} {b}");
                let _ = writeln!(s, "f {b} {c} {d}");
            }
        }
    }
    Ok(s)
}

pub fn export_mesh(path: &Path, depth: &DepthMap) -> Result<()> {
    write_atomic(path, mesh_obj(depth)?.as_bytes())
}

/// Human-readable report followed by a blank line and `key=value` lines.
pub fn format_report(report: &EvalReport) -> String {
    let mut s = format!("{report}\n\n");
    for (k, v) in report.to_kv() {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(path, format_report(report).as_bytes())
}
