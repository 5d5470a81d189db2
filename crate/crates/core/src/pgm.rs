//! Binary PGM (`P5`) reading and writing.
//!
//! Frames use `maxval` 255. Semantic maps use `maxval` 65535, samples stored
//! big-endian as the netpbm format requires.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

impl Pgm {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|msg| Error::parse(path.display().to_string(), 1, msg))
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0usize;
        let magic = header_token(bytes, &mut pos).ok_or("missing magic")?;
        if magic != b"P5" {
            return Err(format!(
                "bad magic `{}`, expected P5",
                String::from_utf8_lossy(magic)
            ));
        }
        let mut field = |name: &str| -> std::result::Result<usize, String> {
            let tok = header_token(bytes, &mut pos).ok_or(format!("missing {name}"))?;
            std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or(format!("bad {name}"))
        };
        let width = field("width")?;
        let height = field("height")?;
        let maxval = field("maxval")?;
        if width == 0 || height == 0 {
            return Err("zero dimension".into());
        }
        if maxval == 0 || maxval > 65535 {
            return Err(format!("maxval {maxval} out of range"));
        }
        // exactly one whitespace byte separates the header from the raster
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err("missing raster separator".into());
        }
        pos += 1;
        let count = width * height;
        let wide = maxval > 255;
        let need = if wide { 2 * count } else { count };
        let raster = &bytes[pos..];
        if raster.len() < need {
            return Err(format!(
                "truncated raster: {} of {need} bytes",
                raster.len()
            ));
        }
        let samples: Vec<u16> = if wide {
            raster[..need]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect()
        } else {
            raster[..need].iter().map(|&b| b as u16).collect()
        };
        if samples.iter().any(|&s| s as usize > maxval) {
            return Err("sample exceeds maxval".into());
        }
        Ok(Pgm {
            width,
            height,
            maxval: maxval as u16,
            samples,
        })
    }

    pub fn encode(&self, comment: Option<&str>) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.samples.len() * 2 + 64);
        out.extend_from_slice(b"P5\n");
        if let Some(c) = comment {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        let _ = write!(out, "{} {}\n{}\n", self.width, self.height, self.maxval);
        if self.maxval > 255 {
            for s in &self.samples {
                out.extend_from_slice(&s.to_be_bytes());
            }
        } else {
            out.extend(self.samples.iter().map(|&s| s as u8));
        }
        out
    }

    pub fn write(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        fs::write(path, self.encode(comment)).map_err(|e| Error::io(path, e))
    }
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_with_comments() {
        let mut bytes = b"P5\n# seed=7\n3 2\n# x\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let p = Pgm::decode(&bytes).unwrap();
        assert_eq!((p.width, p.height, p.maxval), (3, 2, 255));
        assert_eq!(p.samples, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn wide_samples_are_big_endian() {
        let p = Pgm {
            width: 2,
            height: 1,
            maxval: 65535,
            samples: vec![0x0102, 0xfffe],
        };
        let bytes = p.encode(None);
        assert_eq!(&bytes[bytes.len() - 4..], &[0x01, 0x02, 0xff, 0xfe]);
        assert_eq!(Pgm::decode(&bytes).unwrap(), p);
    }

    #[test]
    fn rejects_truncated_and_wrong_magic() {
        assert!(Pgm::decode(b"P5\n2 2\n255\n\x01\x02").is_err());
        assert!(Pgm::decode(b"P2\n1 1\n255\n1").is_err());
    }
}
