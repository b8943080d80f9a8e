//! Minimal Netpbm codec: PPM (P3/P6) for RGB images, PGM (P2/P5) for masks.
//!
//! Probability masks are stored as 16-bit PGM scaled by 65535 and label masks as 8-bit PGM
//! holding 0 or 255. Values already on the quantization grid survive a write/read cycle
//! bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, LabelMask, ProbMask, RgbImage};

pub const PROB_MAXVAL: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Header {
    magic: u8,
    width: usize,
    height: usize,
    maxval: u32,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Netpbm(msg.into())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn read_uint(&mut self) -> Result<u32> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(bad(format!("expected integer at byte {start}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("integer overflow"))
    }
}

fn parse_header(data: &[u8]) -> Result<(Header, Cursor<'_>)> {
    if data.len() < 2 || data[0] != b'P' {
        return Err(bad("missing magic number"));
    }
    let magic = data[1];
    if !matches!(magic, b'2' | b'3' | b'5' | b'6') {
        return Err(bad(format!("unsupported format P{}", magic as char)));
    }
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.read_uint()? as usize;
    let height = cur.read_uint()? as usize;
    let maxval = cur.read_uint()?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} out of range")));
    }
    if cur.pos >= data.len() && width * height > 0 && matches!(magic, b'5' | b'6') {
        return Err(bad("truncated header"));
    }
    // Exactly one whitespace byte separates the header from binary raster data.
    if matches!(magic, b'5' | b'6') {
        if !data[cur.pos].is_ascii_whitespace() {
            return Err(bad("missing whitespace after maxval"));
        }
        cur.pos += 1;
    }
    Ok((
        Header {
            magic,
            width,
            height,
            maxval,
        },
        cur,
    ))
}

fn read_samples(header: &Header, mut cur: Cursor<'_>, channels: usize) -> Result<Vec<u32>> {
    let n = header.width * header.height * channels;
    let mut out = Vec::with_capacity(n);
    match header.magic {
        b'2' | b'3' => {
            for _ in 0..n {
                out.push(cur.read_uint()?);
            }
        }
        _ => {
            let wide = header.maxval > 255;
            let bytes_per = if wide { 2 } else { 1 };
            let raster = &cur.data[cur.pos..];
            if raster.len() < n * bytes_per {
                return Err(bad(format!(
                    "raster truncated: need {} bytes, have {}",
                    n * bytes_per,
                    raster.len()
                )));
            }
            if wide {
                out.extend(
                    raster[..2 * n]
                        .chunks_exact(2)
                        .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32),
                );
            } else {
                out.extend(raster[..n].iter().map(|&b| b as u32));
            }
        }
    }
    if let Some(&v) = out.iter().find(|&&v| v > header.maxval) {
        return Err(bad(format!("sample {v} exceeds maxval {}", header.maxval)));
    }
    Ok(out)
}

fn write_raster(
    out: &mut Vec<u8>,
    magic: u8,
    width: usize,
    height: usize,
    maxval: u32,
    samples: &[u32],
    per_line: usize,
) {
    let _ = write!(
        out,
        "P{}\n{} {}\n{}\n",
        magic as char, width, height, maxval
    );
    match magic {
        b'2' | b'3' => {
            for row in samples.chunks(per_line) {
                let line: Vec<String> = row.iter().map(u32::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        _ if maxval > 255 => {
            for &s in samples {
                out.extend_from_slice(&(s as u16).to_be_bytes());
            }
        }
        _ => out.extend(samples.iter().map(|&s| s as u8)),
    }
}

#[inline]
fn quantize(v: f64, maxval: u32) -> u32 {
    (v.clamp(0.0, 1.0) * maxval as f64).round() as u32
}

/// Decodes a P3 or P6 image into `[0, 1]` channels (sample / maxval).
pub fn decode_ppm(data: &[u8]) -> Result<RgbImage> {
    let (header, cur) = parse_header(data)?;
    if !matches!(header.magic, b'3' | b'6') {
        return Err(bad("expected a PPM (P3/P6)"));
    }
    let samples = read_samples(&header, cur, 3)?;
    let scale = header.maxval as f64;
    let mut it = samples.chunks_exact(3);
    RgbImage::from_fn(header.height, header.width, |_, _| {
        let px = it.next().expect("sample count checked");
        [
            px[0] as f64 / scale,
            px[1] as f64 / scale,
            px[2] as f64 / scale,
        ]
    })
}

/// Encodes an RGB image as 8-bit PPM.
pub fn encode_ppm(img: &RgbImage, encoding: Encoding) -> Vec<u8> {
    let (h, w) = img.dims();
    let mut samples = Vec::with_capacity(h * w * 3);
    for i in 0..h {
        for j in 0..w {
            samples.extend(img.pixel(i, j).iter().map(|&v| quantize(v, 255)));
        }
    }
    let magic = match encoding {
        Encoding::Ascii => b'3',
        Encoding::Binary => b'6',
    };
    let mut out = Vec::new();
    write_raster(&mut out, magic, w, h, 255, &samples, w * 3);
    out
}

/// Decodes a P2 or P5 image into a grid of `sample / maxval` values, returning the maxval.
pub fn decode_pgm(data: &[u8]) -> Result<(Grid2D, u32)> {
    let (header, cur) = parse_header(data)?;
    if !matches!(header.magic, b'2' | b'5') {
        return Err(bad("expected a PGM (P2/P5)"));
    }
    let samples = read_samples(&header, cur, 1)?;
    let scale = header.maxval as f64;
    let grid = Grid2D::new(
        header.height,
        header.width,
        samples.iter().map(|&s| s as f64 / scale).collect(),
    )?;
    Ok((grid, header.maxval))
}

pub fn encode_pgm(grid: &Grid2D, maxval: u32, encoding: Encoding) -> Vec<u8> {
    let samples: Vec<u32> = grid.values().iter().map(|&v| quantize(v, maxval)).collect();
    let magic = match encoding {
        Encoding::Ascii => b'2',
        Encoding::Binary => b'5',
    };
    let mut out = Vec::new();
    write_raster(
        &mut out,
        magic,
        grid.width(),
        grid.height(),
        maxval,
        &samples,
        grid.width(),
    );
    out
}

/// 16-bit binary PGM, values scaled by 65535.
pub fn encode_prob_mask(mask: &ProbMask) -> Vec<u8> {
    encode_pgm(mask.grid(), PROB_MAXVAL as u32, Encoding::Binary)
}

pub fn decode_prob_mask(data: &[u8]) -> Result<ProbMask> {
    let (grid, _) = decode_pgm(data)?;
    ProbMask::new(grid)
}

/// 8-bit binary PGM with values {0, 255}.
pub fn encode_labels(labels: &LabelMask) -> Vec<u8> {
    encode_pgm(labels.grid(), 255, Encoding::Binary)
}

/// Accepts any maxval; every sample must be 0 or maxval.
pub fn decode_labels(data: &[u8]) -> Result<LabelMask> {
    let (grid, _) = decode_pgm(data)?;
    LabelMask::new(grid)
}

/// Rounds every value to the 16-bit grid used by [`encode_prob_mask`].
pub fn quantize_prob(mask: &ProbMask) -> ProbMask {
    let q = PROB_MAXVAL as f64;
    ProbMask::clamped(mask.grid().map(|v| (v * q).round() / q))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
