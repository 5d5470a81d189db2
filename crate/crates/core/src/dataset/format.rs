//! Line-oriented cache file:
//!
//! ```text
//! rsc-cache v1
//! seed=42
//! anchor_qp=22
//! qp_min=22
//! qp_max=51
//! ctu_size=64
//! frames=1
//! frame index=0 id=camera width=576 height=576 cus=81 split=train
//! samples=2430
//! 0 0 22 1.2345678901234567e0 0e0 3.2000000000000002e0
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DatasetCache, FrameMeta, RdSample, Split};
use crate::codec::Qp;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &str = "rsc-cache v1";

pub fn save_cache(cache: &DatasetCache, path: &Path) -> Result<()> {
    fs::write(path, render(cache)).map_err(|e| Error::io(path, e))
}

pub fn load_cache(path: &Path) -> Result<DatasetCache> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

pub(crate) fn render(cache: &DatasetCache) -> String {
    let mut out = String::with_capacity(64 * cache.len() + 256);
    let _ = writeln!(out, "{CACHE_MAGIC}");
    let _ = writeln!(out, "seed={}", cache.seed);
    let _ = writeln!(out, "anchor_qp={}", cache.anchor_qp);
    let _ = writeln!(out, "qp_min={}", cache.qp_min);
    let _ = writeln!(out, "qp_max={}", cache.qp_max);
    let _ = writeln!(out, "ctu_size={}", cache.ctu_size);
    let _ = writeln!(out, "frames={}", cache.frames.len());
    for (i, f) in cache.frames.iter().enumerate() {
        let _ = writeln!(
            out,
            "frame index={i} id={} width={} height={} cus={} split={}",
            f.id,
            f.width,
            f.height,
            f.cu_count,
            f.split.as_str()
        );
    }
    let _ = writeln!(out, "samples={}", cache.len());
    for s in cache.samples() {
        let _ = writeln!(
            out,
            "{} {} {} {:.16e} {:.16e} {:.16e}",
            s.frame_index, s.cu_index, s.qp, s.bpp, s.delta_m, s.mse
        );
    }
    out
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a str,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<&'a str> {
        match self.iter.next() {
            Some((i, line)) => {
                self.last = i + 1;
                Ok(line)
            }
            None => Err(Error::parse(self.source, self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.source, self.last, msg)
    }

    fn key<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next_line(key)?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| self.err(format!("expected `{key}=`, found `{line}`")))?;
        value.parse().map_err(|_| self.err(format!("bad value for {key}: `{value}`")))
    }
}

fn field<'a>(fields: &mut impl Iterator<Item = &'a str>, name: &str) -> std::result::Result<&'a str, String> {
    let tok = fields.next().ok_or_else(|| format!("missing {name}"))?;
    tok.strip_prefix(name)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| format!("expected {name}=, found `{tok}`"))
}

fn parse_qp(lines: &Lines<'_>, v: u8) -> Result<Qp> {
    Qp::new(v).map_err(|e| lines.err(e.to_string()))
}

pub(crate) fn parse(text: &str, source: &str) -> Result<DatasetCache> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        source,
        last: 0,
    };
    let magic = lines.next_line("header")?;
    if magic != CACHE_MAGIC {
        return Err(lines.err(format!("unsupported cache header `{magic}`, expected `{CACHE_MAGIC}`")));
    }
    let seed: u64 = lines.key("seed")?;
    let anchor: u8 = lines.key("anchor_qp")?;
    let anchor = parse_qp(&lines, anchor)?;
    let qp_min: u8 = lines.key("qp_min")?;
    let qp_min = parse_qp(&lines, qp_min)?;
    let qp_max: u8 = lines.key("qp_max")?;
    let qp_max = parse_qp(&lines, qp_max)?;
    let ctu_size: usize = lines.key("ctu_size")?;
    let frame_count: usize = lines.key("frames")?;
    let mut cache = DatasetCache::empty(seed, anchor, qp_min, qp_max, ctu_size);

    for expected in 0..frame_count {
        let line = lines.next_line("frame metadata")?;
        let meta = (|| -> std::result::Result<FrameMeta, String> {
            let mut f = line.split(' ');
            if f.next() != Some("frame") {
                return Err("expected a `frame` line".into());
            }
            let index: usize = field(&mut f, "index")?.parse().map_err(|_| "bad index")?;
            if index != expected {
                return Err(format!("frame index {index}, expected {expected}"));
            }
            let id = field(&mut f, "id")?.to_string();
            let width = field(&mut f, "width")?.parse().map_err(|_| "bad width")?;
            let height = field(&mut f, "height")?.parse().map_err(|_| "bad height")?;
            let cu_count = field(&mut f, "cus")?.parse().map_err(|_| "bad cus")?;
            let split = match field(&mut f, "split")? {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(format!("bad split `{other}`")),
            };
            if f.next().is_some() {
                return Err("trailing fields".into());
            }
            Ok(FrameMeta {
                id,
                width,
                height,
                cu_count,
                split,
            })
        })()
        .map_err(|m| lines.err(m))?;
        cache.frames.push(meta);
    }

    let sample_count: usize = lines.key("samples")?;
    for _ in 0..sample_count {
        let line = lines.next_line("sample record")?;
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 6 {
            return Err(lines.err(format!("expected 6 fields, found {}", parts.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| lines.err(format!("bad integer `{s}`")));
        let real = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| lines.err(format!("bad real `{s}`")))
        };
        let frame_index = int(parts[0])?;
        let cu_index = int(parts[1])?;
        let qp_value = u8::try_from(int(parts[2])?).map_err(|_| lines.err("qp out of range"))?;
        let qp = parse_qp(&lines, qp_value)?;
        if frame_index >= cache.frames.len() || cu_index >= cache.frames[frame_index].cu_count {
            return Err(lines.err(format!("record references unknown frame {frame_index} / cu {cu_index}")));
        }
        if qp < qp_min || qp > qp_max {
            return Err(lines.err(format!("qp {qp} outside cached range")));
        }
        cache.insert(RdSample {
            frame_index,
            cu_index,
            qp,
            bpp: real(parts[3])?,
            delta_m: real(parts[4])?,
            mse: real(parts[5])?,
        });
    }
    if let Ok(extra) = lines.next_line("") {
        if !extra.is_empty() {
            return Err(lines.err("trailing content after the last record"));
        }
    }
    if cache.len() != sample_count {
        return Err(lines.err(format!("{} distinct records, header announced {sample_count}", cache.len())));
    }
    Ok(cache)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(v: u8) -> Qp {
        Qp::new(v).unwrap()
    }

    fn small_cache() -> DatasetCache {
        let mut c = DatasetCache::empty(9, qp(22), qp(22), qp(23), 64);
        c.frames.push(FrameMeta {
            id: "f0".into(),
            width: 64,
            height: 64,
            cu_count: 1,
            split: Split::Train,
        });
        c.insert(RdSample { frame_index: 0, cu_index: 0, qp: qp(22), bpp: 0.1 + 0.2, delta_m: 0.0, mse: 1.0 / 3.0 });
        c.insert(RdSample { frame_index: 0, cu_index: 0, qp: qp(23), bpp: 1e-300, delta_m: 0.123456789, mse: 7.0 });
        c
    }

    #[test]
    fn canonical_round_trip() {
        let c = small_cache();
        let text = render(&c);
        let back = parse(&text, "mem").unwrap();
        assert_eq!(back, c);
        assert_eq!(render(&back), text);
        let s = back.lookup(0, 0, qp(22)).unwrap();
        assert_eq!(s.bpp.to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn empty_cache_round_trips() {
        let c = DatasetCache::empty(0, qp(22), qp(22), qp(51), 64);
        assert_eq!(parse(&render(&c), "mem").unwrap(), c);
    }

    #[test]
    fn truncation_names_line() {
        let text = render(&small_cache());
        let cut: String = text.lines().take(9).map(|l| format!("{l}\n")).collect();
        match parse(&cut, "cache.txt") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 10, "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch() {
        let text = render(&small_cache()).replacen("v1", "v2", 1);
        assert!(matches!(parse(&text, "x"), Err(Error::Parse { line: 1, .. })));
    }
}
