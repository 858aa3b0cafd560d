//! Binary PGM (P5) images and the batch index format.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

/// Parses a square P5 image; values are scaled by `1 / maxval`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::Parse(format!("expected P5 magic, found {:?}", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM header field {s:?}")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if w != h {
        return Err(Error::Parse(format!("image is {w}x{h}, only square images are supported")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("maxval {maxval} unsupported (need 1..=255)")));
    }
    let raster = bytes.get(pos..pos + w * h).ok_or_else(|| Error::Parse("PGM raster is truncated".into()))?;
    Image::new(w, raster.iter().map(|&b| b as f64 / maxval as f64).collect())
}

/// Encodes with maxval 255, rounding to the nearest level.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let n = img.size();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(img.pixels().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    decode_pgm(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Name of the index file in a batch directory.
pub const INDEX_FILE: &str = "index.csv";

/// One `filename,label` line of a batch index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub file: String,
    pub label: String,
}

pub fn parse_index(text: &str) -> Result<Vec<IndexEntry>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (file, label) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("index line {}: expected filename,label", k + 1)))?;
        out.push(IndexEntry { file: file.trim().to_string(), label: label.trim().to_string() });
    }
    Ok(out)
}

pub fn format_index(entries: &[IndexEntry]) -> String {
    entries.iter().map(|e| format!("{},{}\n", e.file, e.label)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_exact() {
        let img = Image::from_fn(4, |x, y| ((x * 4 + y) * 17) as f64 / 255.0);
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n4 4\n255\n"));
        let back = decode_pgm(&bytes).unwrap();
        assert_eq!(encode_pgm(&back), bytes);
    }

    #[test]
    fn header_comments_and_maxval() {
        let mut bytes = b"P5 # comment\n2 2\n# another\n15\n".to_vec();
        bytes.extend([0u8, 15, 5, 10]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.get(0, 1), 1.0);
        assert!((img.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode_pgm(b"P2\n2 2\n255\n....").is_err());
        assert!(decode_pgm(b"P5\n2 3\n255\n......").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n..").is_err());
        assert!(decode_pgm(b"P5\n2").is_err());
    }

    #[test]
    fn index_lines() {
        let entries = parse_index("a.pgm,3\n\n b.pgm , cat \n").unwrap();
        assert_eq!(entries[1], IndexEntry { file: "b.pgm".into(), label: "cat".into() });
        assert_eq!(format_index(&entries), "a.pgm,3\nb.pgm,cat\n");
        assert!(parse_index("nolabel\n").is_err());
    }
}
