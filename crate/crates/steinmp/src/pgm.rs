//! Netpbm grayscale images: `P2` (ASCII) and `P5` (binary), 8-bit only.

use std::fs;
use std::io;
use std::path::Path;

use steinmp_core::GrayImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a grayscale PGM (magic {0:?}, expected P2 or P5)")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    Header(&'static str),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    MaxVal(u32),
    #[error("truncated pixel data: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("sample {value} at index {index} exceeds maxval")]
    SampleRange { index: usize, value: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments, then reads one token.
    fn token(&mut self) -> Option<&[u8]> {
        loop {
            match self.bytes.get(self.pos)? {
                b if b.is_ascii_whitespace() => self.pos += 1,
                b'#' => {
                    while self.bytes.get(self.pos).is_some_and(|b| *b != b'\n') {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        Some(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &'static str) -> Result<u32, PgmError> {
        let tok = self.token().ok_or(PgmError::Header(what))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::Header(what))
    }
}

pub fn decode(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token().unwrap_or_default();
    let encoding = match magic {
        b"P2" => Encoding::Ascii,
        b"P5" => Encoding::Binary,
        other => return Err(PgmError::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(PgmError::Header("zero image dimension"));
    }
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(PgmError::MaxVal(maxval));
    }
    let expected = width * height;
    let pixels: Vec<f64> = match encoding {
        Encoding::Binary => {
            // exactly one whitespace byte separates the header from the raster
            let data = bytes.get(cur.pos + 1..).unwrap_or_default();
            if data.len() < expected {
                return Err(PgmError::Truncated {
                    expected,
                    found: data.len(),
                });
            }
            data[..expected].iter().map(|&b| f64::from(b)).collect()
        }
        Encoding::Ascii => {
            let mut out = Vec::with_capacity(expected);
            for index in 0..expected {
                let Some(tok) = cur.token().filter(|t| !t.is_empty()) else {
                    return Err(PgmError::Truncated { expected, found: index });
                };
                let value: u32 = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .ok_or(PgmError::Header("non-numeric sample"))?;
                if value > maxval {
                    return Err(PgmError::SampleRange { index, value });
                }
                out.push(f64::from(value));
            }
            out
        }
    };
    Ok(GrayImage::new(width, height, pixels).expect("dimensions checked"))
}

/// Pixels are clamped to `[0, 255]` and rounded.
pub fn encode(image: &GrayImage, encoding: Encoding) -> Vec<u8> {
    let samples = image.quantized();
    match encoding {
        Encoding::Binary => {
            let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
            out.extend_from_slice(&samples);
            out
        }
        Encoding::Ascii => {
            let mut out = format!("P2\n{} {}\n255\n", image.width(), image.height());
            for row in samples.chunks(image.width()) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage, PgmError> {
    decode(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> io::Result<()> {
    fs::write(path, encode(image, Encoding::Binary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_round_trip_is_byte_identical() {
        let bytes = b"P5\n2 2\n255\n\x00\x80\xff\x07".to_vec();
        let img = decode(&bytes).unwrap();
        assert_eq!(img.pixels(), &[0.0, 128.0, 255.0, 7.0]);
        assert_eq!(encode(&img, Encoding::Binary), bytes);
    }

    #[test]
    fn ascii_and_binary_agree() {
        let ascii = b"P2\n# comment line\n2 2\n255\n0 128\n255 7\n";
        let binary = b"P5 2 2 255 \x00\x80\xff\x07";
        assert_eq!(decode(ascii).unwrap(), decode(binary).unwrap());
        let img = decode(ascii).unwrap();
        assert_eq!(decode(&encode(&img, Encoding::Ascii)).unwrap(), img);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(decode(b"P6\n1 1\n255\n\0\0\0"), Err(PgmError::BadMagic(_))));
        assert!(matches!(decode(b"P5\n1 1\n65535\n\0\0"), Err(PgmError::MaxVal(65535))));
        assert!(matches!(
            decode(b"P5\n2 2\n255\n\x01\x02"),
            Err(PgmError::Truncated { expected: 4, found: 2 })
        ));
        assert!(matches!(decode(b"P2\n2 1\n255\n3"), Err(PgmError::Truncated { .. })));
        assert!(matches!(decode(b"P2\n1 1\n255\n300"), Err(PgmError::SampleRange { .. })));
        assert!(matches!(decode(b"P5\n0 1\n255\n"), Err(PgmError::Header(_))));
        assert!(matches!(decode(b""), Err(PgmError::BadMagic(_))));
    }
}
