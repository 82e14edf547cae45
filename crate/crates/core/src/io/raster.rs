//! The `.hsr` raster pair: an ASCII header `<stem>.hdr` describing shape,
//! dtype, interleave, byte order and data max, plus a raw BSQ float32
//! little-endian payload `<stem>.raw`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{HsiCube, Raster};

/// Headers are padded with trailing spaces to this size when shorter, so the
/// header file length is predictable for the common shapes.
const MIN_HEADER_BYTES: usize = 80;

/// Strip a `.hsr`, `.hdr`, or `.raw` extension; other paths are taken as the
/// stem directly, so `cube.hsr`, `cube.hdr`, and `cube` all name one pair.
fn stem_of(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("hsr" | "hdr" | "raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

struct Header {
    bands: usize,
    lines: usize,
    samples: usize,
    data_max: f32,
    range: Option<(f32, f32)>,
}

fn render_header(h: &Header) -> String {
    let mut s = format!(
        "HSR1\nbands {}\nlines {}\nsamples {}\ndtype f32\nlayout bsq\nbyteorder le\nmax {}\n",
        h.bands, h.lines, h.samples, h.data_max
    );
    if let Some((a, b)) = h.range {
        s.push_str(&format!("range {a} {b}\n"));
    }
    while s.len() < MIN_HEADER_BYTES {
        s.push(' ');
    }
    s
}

fn parse_header(text: &str, path: &Path) -> Result<Header> {
    let malformed = |reason: String| Error::MalformedRaster {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("HSR1") {
        return Err(malformed("missing HSR1 magic".into()));
    }
    let mut bands = None;
    let mut height = None;
    let mut width = None;
    let mut max = None;
    let mut range = None;
    for line in lines {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or("");
        let mut value = |name: &str| -> Result<f64> {
            parts
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| malformed(format!("bad {name} field: {line:?}")))
        };
        match key {
            "bands" => bands = Some(value("bands")? as usize),
            "lines" => height = Some(value("lines")? as usize),
            "samples" => width = Some(value("samples")? as usize),
            "max" => max = Some(value("max")? as f32),
            "range" => {
                let a = value("range")? as f32;
                let b = value("range")? as f32;
                range = Some((a, b));
            }
            "dtype" => {
                if parts.next() != Some("f32") {
                    return Err(malformed(format!("unsupported dtype in {line:?}")));
                }
            }
            "layout" => {
                if parts.next() != Some("bsq") {
                    return Err(malformed(format!("unsupported layout in {line:?}")));
                }
            }
            "byteorder" => {
                if parts.next() != Some("le") {
                    return Err(malformed(format!("unsupported byte order in {line:?}")));
                }
            }
            other => return Err(malformed(format!("unknown header key {other:?}"))),
        }
    }
    let (Some(bands), Some(lines_), Some(samples), Some(data_max)) = (bands, height, width, max)
    else {
        return Err(malformed("header missing bands/lines/samples/max".into()));
    };
    if !data_max.is_finite() || data_max <= 0.0 {
        return Err(malformed(format!("data max {data_max} must be finite and positive")));
    }
    Ok(Header {
        bands,
        lines: lines_,
        samples,
        data_max,
        range,
    })
}

/// Write `cube` as an `.hsr` pair. The payload is stored as-is with
/// `max 1`, so a round trip through [`load_cube`] is bit-exact.
pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let stem = stem_of(path.as_ref());
    let header = render_header(&Header {
        bands: cube.bands(),
        lines: cube.height(),
        samples: cube.width(),
        data_max: 1.0,
        range: cube.band_range_nm,
    });
    let hdr_path = stem.with_extension("hdr");
    fs::write(&hdr_path, header).map_err(|e| Error::io(&hdr_path, e))?;

    let mut payload = Vec::with_capacity(cube.data().len() * 4);
    for v in cube.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let raw_path = stem.with_extension("raw");
    fs::write(&raw_path, payload).map_err(|e| Error::io(&raw_path, e))
}

/// Load an `.hsr` pair, dividing by the header's data max so the result is
/// normalized to roughly `[0, 1]`.
pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    let stem = stem_of(path.as_ref());
    let hdr_path = stem.with_extension("hdr");
    let text = fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let header = parse_header(&text, &hdr_path)?;

    let raw_path = stem.with_extension("raw");
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let expected = header.bands * header.lines * header.samples * 4;
    if bytes.len() != expected {
        return Err(Error::MalformedRaster {
            path: raw_path,
            reason: format!(
                "payload size mismatch: header declares {}x{}x{} ({} bytes), file has {} bytes",
                header.bands,
                header.lines,
                header.samples,
                expected,
                bytes.len()
            ),
        });
    }
    let scale = 1.0 / header.data_max;
    let mut data = Vec::with_capacity(bytes.len() / 4);
    for chunk in bytes.chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::MalformedRaster {
                path: raw_path,
                reason: format!("non-finite payload value at index {}", data.len()),
            });
        }
        data.push(if header.data_max == 1.0 { v } else { v * scale });
    }
    let cube = HsiCube::new(header.bands, header.lines, header.samples, data)?;
    Ok(cube.with_band_range(header.range))
}
