//! Frame decoding, sequence loading and the binary flow cache.
//!
//! Frames are grayscale `f32` planes in `[0, 255]`. Netpbm is the native
//! image format: P2/P5 decode directly, P3/P6 are reduced to luminance with
//! BT.601 weights. Flow fields are cached as little-endian `f32` planes
//! behind a fixed 28-byte header tagged `AADF`.

use std::cmp::Ordering;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{AadError, Result};
use crate::optical_flow::FlowField;

/// Smallest frame side the flow pyramid can work with.
pub const MIN_FLOW_SIDE: usize = 8;

pub const FLOW_CACHE_MAGIC: [u8; 4] = *b"AADF";
pub const FLOW_CACHE_VERSION: u32 = 1;
pub const FLOW_CACHE_HEADER_LEN: usize = 28;
const FLOW_CACHE_PLANES: u32 = 2;

/// A single grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffer {
    width: usize,
    height: usize,
    data: Vec<f32>,
    pub index: usize,
}

impl FrameBuffer {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(AadError::Shape(format!(
                "frame dimensions {width}x{height} below minimum 1x1"
            )));
        }
        if data.len() != width * height {
            return Err(AadError::Shape(format!(
                "frame data has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(AadError::Input(format!(
                "intensity {v} outside [0, 255]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            index: 0,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` and clamping to `[0, 255]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "empty frame");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 255.0) });
            }
        }
        Self {
            width,
            height,
            data,
            index: 0,
        }
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Encodes as 8-bit binary PGM (P5), rounding to the nearest level.
    pub fn to_pgm(&self) -> Vec<u8> {
        let bytes: Vec<u8> = self.data.iter().map(|v| v.round() as u8).collect();
        encode_pgm(self.width, self.height, &bytes)
    }
}

/// Encodes 8-bit samples as a binary PGM.
pub fn encode_pgm(width: usize, height: usize, samples: &[u8]) -> Vec<u8> {
    debug_assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(samples);
    out
}

/// Encodes interleaved 8-bit RGB as a binary PPM.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    debug_assert_eq!(rgb.len(), width * height * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Luminance from three equally sized channels (BT.601 weights).
pub fn to_grayscale(r: &[f32], g: &[f32], b: &[f32], width: usize, height: usize) -> Result<FrameBuffer> {
    let n = width * height;
    if r.len() != n || g.len() != n || b.len() != n {
        return Err(AadError::Shape(format!(
            "channel lengths {}/{}/{} do not match {width}x{height}",
            r.len(),
            g.len(),
            b.len()
        )));
    }
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 255.0))
        .collect();
    FrameBuffer::new(width, height, data)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn next_uint(&mut self, what: &str) -> Result<u64> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(AadError::Format(format!("expected {what} at byte {start}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| AadError::Format(format!("{what} out of range")))
    }
}

/// Decodes a netpbm grayscale (P2/P5) or color (P3/P6) image.
///
/// Samples are rescaled to `[0, 255]` by `255 / maxval`.
pub fn decode_pgm(bytes: &[u8]) -> Result<FrameBuffer> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(AadError::Format("missing netpbm magic".into()));
    }
    let (binary, channels) = match bytes[1] {
        b'2' => (false, 1),
        b'5' => (true, 1),
        b'3' => (false, 3),
        b'6' => (true, 3),
        other => {
            return Err(AadError::Format(format!(
                "unsupported netpbm type P{}",
                other as char
            )))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(AadError::Format("magic must be followed by whitespace".into()));
    }
    let width = cur.next_uint("width")? as usize;
    let height = cur.next_uint("height")? as usize;
    let maxval = cur.next_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(AadError::Format(format!(
            "dimensions {width}x{height} below minimum 1x1"
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(AadError::Format(format!("maxval {maxval} outside 1..=65535")));
    }
    let samples = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| AadError::Format("dimensions overflow".into()))?;
    let scale = 255.0 / maxval as f64;

    let mut values = Vec::with_capacity(samples.min(1 << 24));
    if binary {
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(AadError::Format("missing whitespace after maxval".into()));
        }
        let payload = &bytes[cur.pos + 1..];
        let bps = if maxval > 255 { 2 } else { 1 };
        let expected = samples
            .checked_mul(bps)
            .ok_or_else(|| AadError::Format("dimensions overflow".into()))?;
        if payload.len() < expected {
            return Err(AadError::Length {
                expected,
                found: payload.len(),
            });
        }
        for i in 0..samples {
            let raw = if bps == 2 {
                u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u64
            } else {
                payload[i] as u64
            };
            if raw > maxval {
                return Err(AadError::Format(format!("sample {raw} exceeds maxval {maxval}")));
            }
            values.push((raw as f64 * scale) as f32);
        }
    } else {
        for i in 0..samples {
            let raw = match cur.next_uint("sample") {
                Ok(v) => v,
                Err(_) if cur.pos >= bytes.len() => {
                    return Err(AadError::Length {
                        expected: samples,
                        found: i,
                    })
                }
                Err(e) => return Err(e),
            };
            if raw > maxval {
                return Err(AadError::Format(format!("sample {raw} exceeds maxval {maxval}")));
            }
            values.push((raw as f64 * scale) as f32);
        }
    }

    if channels == 1 {
        FrameBuffer::new(width, height, values)
    } else {
        let r: Vec<f32> = values.iter().step_by(3).copied().collect();
        let g: Vec<f32> = values.iter().skip(1).step_by(3).copied().collect();
        let b: Vec<f32> = values.iter().skip(2).step_by(3).copied().collect();
        to_grayscale(&r, &g, &b, width, height)
    }
}

/// Orders strings so that embedded digit runs compare numerically
/// (`f2` < `f10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].is_ascii_digit() && b[j].is_ascii_digit() {
            let si = i;
            while i < a.len() && a[i].is_ascii_digit() {
                i += 1;
            }
            let sj = j;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            let da = trim_zeros(&a[si..i]);
            let db = trim_zeros(&b[sj..j]);
            let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db));
            if ord != Ordering::Equal {
                return ord;
            }
        } else {
            let ord = a[i].cmp(&b[j]);
            if ord != Ordering::Equal {
                return ord;
            }
            i += 1;
            j += 1;
        }
    }
    (a.len() - i)
        .cmp(&(b.len() - j))
        // identical up to leading zeros: fall back to bytewise for a total order
        .then_with(|| a.cmp(b))
}

fn trim_zeros(digits: &[u8]) -> &[u8] {
    let nz = digits.iter().position(|&d| d != b'0').unwrap_or(digits.len());
    &digits[nz..]
}

/// Lists files in `directory` whose names match `pattern`, in natural order.
pub fn list_sequence(directory: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let matcher = glob::Pattern::new(pattern)
        .map_err(|e| AadError::Config(format!("bad filename pattern {pattern:?}: {e}")))?;
    let mut names = Vec::new();
    for entry in fs::read_dir(directory).map_err(|e| AadError::from(e).in_file(directory))? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if matcher.matches(&name) {
            names.push(name);
        }
    }
    names.sort_by(|a, b| natural_cmp(a, b));
    Ok(names.into_iter().map(|n| directory.join(n)).collect())
}

/// Decodes every matching frame in `directory`, indexed `0..n` in natural
/// filename order.
pub fn load_sequence(directory: &Path, pattern: &str) -> Result<Vec<FrameBuffer>> {
    let paths = list_sequence(directory, pattern)?;
    if paths.len() < 3 {
        return Err(AadError::InsufficientData(format!(
            "{} frames matching {pattern:?} in {}, need at least 3",
            paths.len(),
            directory.display()
        )));
    }
    let mut frames: Vec<FrameBuffer> = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let bytes = fs::read(path).map_err(|e| AadError::from(e).in_file(path))?;
        let frame = decode_pgm(&bytes).map_err(|e| e.in_file(path))?.with_index(index);
        if let Some(first) = frames.first() {
            if first.dims() != frame.dims() {
                return Err(AadError::Shape(format!(
                    "frame is {}x{}, sequence is {}x{}",
                    frame.width(),
                    frame.height(),
                    first.width(),
                    first.height()
                ))
                .in_file(path));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Header of a cached flow field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowCacheHeader {
    pub magic: [u8; 4],
    pub version: u32,
    pub width: u32,
    pub height: u32,
    pub frame_pair: (u32, u32),
}

impl FlowCacheHeader {
    pub fn new(width: usize, height: usize, source: usize, target: usize) -> Self {
        Self {
            magic: FLOW_CACHE_MAGIC,
            version: FLOW_CACHE_VERSION,
            width: width as u32,
            height: height as u32,
            frame_pair: (source as u32, target as u32),
        }
    }

    pub fn for_flow(flow: &FlowField, source: usize, target: usize) -> Self {
        Self::new(flow.width(), flow.height(), source, target)
    }
}

/// Writes `flow` behind `header`; returns the number of bytes written.
///
/// Header fields are 4-byte little-endian: magic, version, width, height,
/// source index, target index, plane count (always 2). The Vx plane then the
/// Vy plane follow as little-endian `f32`.
pub fn write_flow_cache<W: Write>(flow: &FlowField, header: &FlowCacheHeader, sink: &mut W) -> Result<usize> {
    if header.width as usize != flow.width() || header.height as usize != flow.height() {
        return Err(AadError::Shape(format!(
            "header declares {}x{}, flow is {}x{}",
            header.width,
            header.height,
            flow.width(),
            flow.height()
        )));
    }
    let mut buf = Vec::with_capacity(FLOW_CACHE_HEADER_LEN + 8 * flow.vx().len());
    buf.extend_from_slice(&header.magic);
    for field in [
        header.version,
        header.width,
        header.height,
        header.frame_pair.0,
        header.frame_pair.1,
        FLOW_CACHE_PLANES,
    ] {
        buf.extend_from_slice(&field.to_le_bytes());
    }
    for v in flow.vx().iter().chain(flow.vy()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(buf.len())
}

pub fn read_flow_cache<R: Read>(source: &mut R) -> Result<(FlowCacheHeader, FlowField)> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_flow_cache(&bytes)
}

pub fn decode_flow_cache(bytes: &[u8]) -> Result<(FlowCacheHeader, FlowField)> {
    if bytes.len() < FLOW_CACHE_HEADER_LEN {
        return Err(AadError::Length {
            expected: FLOW_CACHE_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != FLOW_CACHE_MAGIC {
        return Err(AadError::Format(format!("bad flow cache magic {magic:?}")));
    }
    let header = FlowCacheHeader {
        magic,
        version: word(1),
        width: word(2),
        height: word(3),
        frame_pair: (word(4), word(5)),
    };
    if header.version != FLOW_CACHE_VERSION {
        return Err(AadError::Format(format!(
            "unsupported flow cache version {}",
            header.version
        )));
    }
    if word(6) != FLOW_CACHE_PLANES {
        return Err(AadError::Format(format!("expected 2 planes, found {}", word(6))));
    }
    let n = (header.width as usize)
        .checked_mul(header.height as usize)
        .ok_or_else(|| AadError::Format("dimensions overflow".into()))?;
    let expected = FLOW_CACHE_HEADER_LEN + 8 * n;
    if bytes.len() != expected {
        return Err(AadError::Length {
            expected,
            found: bytes.len(),
        });
    }
    let plane = |offset: usize| -> Vec<f32> {
        bytes[offset..offset + 4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let vx = plane(FLOW_CACHE_HEADER_LEN);
    let vy = plane(FLOW_CACHE_HEADER_LEN + 4 * n);
    let flow = FlowField::new(header.width as usize, header.height as usize, vx, vy)?;
    Ok((header, flow))
}
