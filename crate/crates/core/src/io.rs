//! File formats: binary PNM (P5/P6), the FMAP float raster, fixation CSV,
//! contour masks and label rasters.
//!
//! FMAP layout: the bytes `FMAP`, then width and height as little-endian
//! `u32`, then `width * height` little-endian IEEE-754 `f32` values in row-major
//! order. Nothing follows the payload.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fixation::{group_by_image, FixationRecord, FixationSet};
use crate::raster::{ColorImage, ContourMask, FloatMap, GrayImage, Grid, Image, LabelMap};

pub const FIXATION_HEADER: [&str; 6] =
    ["image_id", "subject_id", "ordinal", "x", "y", "duration_ms"];

/// Raw samples of a binary PNM before scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct PnmSamples {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    last_start: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        self.last_start = start;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::format(start, format!("{what} too large")))
    }
}

/// Decodes a P5 or P6 file with maxval 255 or 65535.
pub fn decode_pnm_samples(bytes: &[u8]) -> Result<PnmSamples> {
    if bytes.len() < 2 {
        return Err(Error::format(0, "missing magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::format(
                0,
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let mut cur = HeaderCursor {
        bytes,
        pos: 2,
        last_start: 2,
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    let maxval_at = cur.last_start;
    if width == 0 || height == 0 {
        return Err(Error::format(maxval_at, "zero image dimension"));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(Error::format(
            maxval_at,
            format!("unsupported maxval {maxval}; expected 255 or 65535"),
        ));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::format(cur.pos, "expected whitespace after maxval")),
    }
    let bytes_per_sample = if maxval == 255 { 1 } else { 2 };
    let count = width * height * channels;
    let payload = &bytes[cur.pos..];
    if payload.len() < count * bytes_per_sample {
        return Err(Error::format(
            cur.pos + payload.len(),
            format!(
                "payload truncated: expected {} bytes, found {}",
                count * bytes_per_sample,
                payload.len()
            ),
        ));
    }
    let samples = if bytes_per_sample == 1 {
        payload[..count].iter().map(|&b| b as u16).collect()
    } else {
        payload[..2 * count]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok(PnmSamples {
        width,
        height,
        channels,
        maxval: maxval as u16,
        samples,
    })
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let raw = decode_pnm_samples(bytes)?;
    let scale = 1.0 / raw.maxval as f64;
    let (w, h) = (raw.width, raw.height);
    if raw.channels == 1 {
        let data = raw.samples.iter().map(|&s| s as f64 * scale).collect();
        Ok(Image::Gray(GrayImage::new(FloatMap::from_vec(
            w, h, data,
        )?)?))
    } else {
        let plane = |c: usize| {
            FloatMap::from_vec(
                w,
                h,
                raw.samples
                    .iter()
                    .skip(c)
                    .step_by(3)
                    .map(|&s| s as f64 * scale)
                    .collect(),
            )
        };
        Ok(Image::Color(ColorImage::new(
            plane(0)?,
            plane(1)?,
            plane(2)?,
        )?))
    }
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Image> {
    decode_pnm(&fs::read(path)?)
}

/// 8-bit quantization with round-half-up: `floor(v * 255 + 0.5)`.
pub fn quantize8(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn check_unit(map: &FloatMap) -> Result<()> {
    match map.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::argument(format!(
            "8-bit output needs values in [0, 1], found {v}"
        ))),
        None => Ok(()),
    }
}

/// Encodes a `[0, 1]` map as an 8-bit P5.
pub fn encode_pgm8(map: &FloatMap) -> Result<Vec<u8>> {
    check_unit(map)?;
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(map.as_slice().iter().map(|&v| quantize8(v)));
    Ok(out)
}

pub fn encode_pnm(image: &Image) -> Result<Vec<u8>> {
    match image {
        Image::Gray(g) => encode_pgm8(g.as_map()),
        Image::Color(c) => {
            let mut out = format!("P6\n{} {}\n255\n", c.width(), c.height()).into_bytes();
            let [r, g, b] = c.planes();
            for ((r, g), b) in r.as_slice().iter().zip(g.as_slice()).zip(b.as_slice()) {
                out.extend([quantize8(*r), quantize8(*g), quantize8(*b)]);
            }
            Ok(out)
        }
    }
}

pub fn write_pnm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path, &encode_pnm(image)?)
}

/// Writes a `[0, 1]` map as an 8-bit P5.
pub fn write_pgm8(map: &FloatMap, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path, &encode_pgm8(map)?)
}

/// Reads a P5/P6 contour mask: any non-zero sample is a contour pixel.
pub fn read_mask(path: impl AsRef<Path>) -> Result<ContourMask> {
    let raw = decode_pnm_samples(&fs::read(path)?)?;
    let bits = raw
        .samples
        .chunks_exact(raw.channels)
        .map(|px| px.iter().any(|&s| s > 0))
        .collect();
    Grid::from_vec(raw.width, raw.height, bits)
}

pub fn encode_mask(mask: &ContourMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.as_slice().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Writes a contour mask as P5 with 0 and 255.
pub fn write_mask(mask: &ContourMask, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path, &encode_mask(mask))
}

/// Reads a P5 label raster (8- or 16-bit). Sample values are renumbered to
/// `0..S` in ascending order.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let raw = decode_pnm_samples(&fs::read(path)?)?;
    if raw.channels != 1 {
        return Err(Error::format(0, "label rasters must be single-channel P5"));
    }
    let grid = Grid::from_vec(
        raw.width,
        raw.height,
        raw.samples.iter().map(|&s| s as u32).collect(),
    )?;
    Ok(LabelMap::relabel(grid))
}

/// Writes labels as 16-bit P5 (labels must fit in `u16`).
pub fn write_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    if labels.segment_count() > 65536 {
        return Err(Error::argument(
            "too many segments for a 16-bit label raster",
        ));
    }
    let mut out = format!("P5\n{} {}\n65535\n", labels.width(), labels.height()).into_bytes();
    for &l in labels.grid().as_slice() {
        out.extend((l as u16).to_be_bytes());
    }
    write_bytes(path, &out)
}

pub fn encode_fmap(map: &FloatMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * map.len());
    out.extend_from_slice(b"FMAP");
    out.extend((map.width() as u32).to_le_bytes());
    out.extend((map.height() as u32).to_le_bytes());
    for &v in map.as_slice() {
        out.extend((v as f32).to_le_bytes());
    }
    out
}

pub fn decode_fmap(bytes: &[u8]) -> Result<FloatMap> {
    if bytes.len() < 4 || &bytes[..4] != b"FMAP" {
        return Err(Error::format(0, "bad magic; expected FMAP"));
    }
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len(), "header truncated"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if width == 0 || height == 0 {
        return Err(Error::format(4, "zero map dimension"));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(4, "map dimensions overflow"))?;
    let payload = &bytes[12..];
    if payload.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!(
                "payload truncated: header says {width}x{height} ({expected} bytes), found {} bytes",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            12 + expected,
            format!(
                "size mismatch: {} bytes follow the {width}x{height} payload",
                payload.len() - expected
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    FloatMap::from_vec(width, height, data)
}

pub fn write_fmap(map: &FloatMap, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path, &encode_fmap(map))
}

pub fn read_fmap(path: impl AsRef<Path>) -> Result<FloatMap> {
    decode_fmap(&fs::read(path)?)
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::argument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses fixation CSV text with the exact header
/// `image_id,subject_id,ordinal,x,y,duration_ms`.
pub fn parse_fixation_csv(reader: impl Read) -> Result<Vec<FixationSet>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    if headers.iter().ne(FIXATION_HEADER.iter().copied()) {
        return Err(Error::parse(
            1,
            format!(
                "header must be '{}', found '{}'",
                FIXATION_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut records = Vec::new();
    let mut seen: HashMap<(String, String, u32), usize> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() != FIXATION_HEADER.len() {
            return Err(Error::parse(
                line,
                format!("missing column: expected 6 fields, found {}", row.len()),
            ));
        }
        let number = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(
                        line,
                        format!("non-numeric {} value '{}'", FIXATION_HEADER[i], &row[i]),
                    )
                })
        };
        let ordinal: u32 = row[2].parse().ok().filter(|&o| o >= 1).ok_or_else(|| {
            Error::parse(
                line,
                format!("ordinal must be an integer >= 1, got '{}'", &row[2]),
            )
        })?;
        let record = FixationRecord {
            image_id: row[0].to_string(),
            subject_id: row[1].to_string(),
            ordinal,
            x: number(3)?,
            y: number(4)?,
            duration_ms: number(5)?,
        };
        if record.duration_ms < 0.0 {
            return Err(Error::parse(line, "duration_ms must be non-negative"));
        }
        if record.image_id.is_empty() || record.subject_id.is_empty() {
            return Err(Error::parse(line, "empty image_id or subject_id"));
        }
        let key = (record.image_id.clone(), record.subject_id.clone(), ordinal);
        if let Some(first) = seen.insert(key, line) {
            return Err(Error::parse(
                line,
                format!(
                    "duplicate ordinal {ordinal} for subject '{}' on image '{}' (first on line {first})",
                    record.subject_id, record.image_id
                ),
            ));
        }
        records.push(record);
    }
    group_by_image(records)
}

pub fn read_fixation_csv(path: impl AsRef<Path>) -> Result<Vec<FixationSet>> {
    parse_fixation_csv(fs::File::open(path)?)
}

pub fn write_fixation_csv(sets: &[FixationSet], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(FIXATION_HEADER).map_err(csv_err)?;
    for r in sets.iter().flat_map(|s| s.records()) {
        w.write_record([
            r.image_id.clone(),
            r.subject_id.clone(),
            r.ordinal.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.duration_ms.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_bytes(path, &bytes)
}
