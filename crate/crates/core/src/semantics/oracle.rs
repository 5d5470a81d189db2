use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use super::map::{InstanceLayout, SemanticMap, Semantics};
use crate::codec::{Frame, Qp};
use crate::error::{Error, Result};

/// Which picture an oracle is being asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    /// The uncoded source frame.
    Original,
    /// Reconstruction after encoding every CU at one QP.
    Uniform(Qp),
    /// Reconstruction under a mixed per-CU QP map.
    Mixed,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleQuery<'a> {
    pub frame_id: &'a str,
    pub view: View,
}

impl<'a> OracleQuery<'a> {
    pub fn new(frame_id: &'a str, view: View) -> Self {
        OracleQuery { frame_id, view }
    }
}

/// Produces a semantic importance map and instance layout for a picture.
pub trait SemanticOracle: Sync {
    fn evaluate(&self, frame: &Frame, query: OracleQuery<'_>) -> Result<Semantics>;
}

/// Gradient-energy saliency stand-in for a task network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyOracle {
    pub threshold: f64,
    pub min_instance_area: usize,
}

impl Default for ProxyOracle {
    fn default() -> Self {
        ProxyOracle {
            threshold: 0.5,
            min_instance_area: 64,
        }
    }
}

impl ProxyOracle {
    pub fn map(&self, frame: &Frame) -> SemanticMap {
        let (w, h) = (frame.width(), frame.height());
        let grad = sobel_magnitude(frame);
        let mut blurred = box_blur(&grad, w, h, 2);
        let max = blurred.iter().copied().fold(0.0f64, f64::max);
        if max > 0.0 {
            for v in &mut blurred {
                *v = (*v / max).clamp(0.0, 1.0);
            }
        } else {
            blurred.iter_mut().for_each(|v| *v = 0.0);
        }
        SemanticMap::new(w, h, blurred).expect("normalized map is in range")
    }

    pub fn layout(&self, map: &SemanticMap) -> InstanceLayout {
        let labels = label_components(map, self.threshold, self.min_instance_area);
        InstanceLayout::new(map.width(), map.height(), labels).expect("dims match map")
    }

    pub fn semantics(&self, frame: &Frame) -> Semantics {
        let map = self.map(frame);
        let layout = self.layout(&map);
        Semantics { map, layout }
    }
}

impl SemanticOracle for ProxyOracle {
    fn evaluate(&self, frame: &Frame, _query: OracleQuery<'_>) -> Result<Semantics> {
        Ok(self.semantics(frame))
    }
}

fn sobel_magnitude(frame: &Frame) -> Vec<f64> {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let px = |x: isize, y: isize| frame.at(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize) as f64;
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            let gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Separable `(2r+1)²` mean filter with edge replication.
fn box_blur(src: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let taps = (2 * radius + 1) as f64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for d in -r..=r {
                acc += row[(x as isize + d).clamp(0, w as isize - 1) as usize];
            }
            tmp[y * w + x] = acc / taps;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for d in -r..=r {
                acc += tmp[(y as isize + d).clamp(0, h as isize - 1) as usize * w + x];
            }
            out[y * w + x] = acc / taps;
        }
    }
    out
}

/// 8-connected components of `{v >= threshold}` with at least `min_area`
/// pixels, labelled 1.. in raster discovery order.
fn label_components(map: &SemanticMap, threshold: f64, min_area: usize) -> Vec<u32> {
    let (w, h) = (map.width(), map.height());
    let on: Vec<bool> = map.values().iter().map(|&v| v >= threshold).collect();
    let mut visited = vec![false; w * h];
    let mut labels = vec![0u32; w * h];
    let mut next = 1u32;
    let mut queue = VecDeque::new();
    let mut members = Vec::new();
    for start in 0..w * h {
        if !on[start] || visited[start] {
            continue;
        }
        members.clear();
        visited[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            members.push(p);
            let (px, py) = ((p % w) as isize, (p / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (px + dx, py + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if on[q] && !visited[q] {
                        visited[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        if members.len() >= min_area {
            for &p in &members {
                labels[p] = next;
            }
            next += 1;
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileOracleMode {
    /// The stored map is returned regardless of what is being coded.
    Static,
    /// Reconstructions are looked up by the uniform QP they were coded at.
    PerQp,
}

#[derive(Debug, Clone, Default)]
struct StoredFrame {
    original: Option<Semantics>,
    per_qp: BTreeMap<u8, Semantics>,
}

/// Serves precomputed maps from disk; everything is loaded up front.
///
/// Directory layout: `<id>.map.pgm` / `<id>.layout.pgm` for the source frame
/// and `<id>.qpNN.map.pgm` (optionally `<id>.qpNN.layout.pgm`) per QP.
#[derive(Debug, Clone)]
pub struct FileOracle {
    mode: FileOracleMode,
    single: Option<Semantics>,
    frames: BTreeMap<String, StoredFrame>,
}

impl FileOracle {
    /// One map/layout pair served for every frame.
    pub fn from_files(map_path: &Path, layout_path: &Path) -> Result<Self> {
        Ok(FileOracle {
            mode: FileOracleMode::Static,
            single: Some(load_pair(map_path, Some(layout_path))?),
            frames: BTreeMap::new(),
        })
    }

    pub fn from_dir(dir: &Path, mode: FileOracleMode) -> Result<Self> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(".map.pgm"))
            .collect();
        names.sort();
        let mut frames: BTreeMap<String, StoredFrame> = BTreeMap::new();
        for name in names {
            let stem = name.trim_end_matches(".map.pgm");
            let map_path = dir.join(&name);
            let layout_path = dir.join(format!("{stem}.layout.pgm"));
            let layout = layout_path.exists().then_some(layout_path.as_path());
            match split_qp_suffix(stem) {
                Some((id, qp)) => {
                    let pair = load_pair(&map_path, layout)?;
                    frames.entry(id.to_string()).or_default().per_qp.insert(qp, pair);
                }
                None => {
                    let pair = load_pair(&map_path, layout)?;
                    frames.entry(stem.to_string()).or_default().original = Some(pair);
                }
            }
        }
        if frames.is_empty() {
            return Err(Error::NotFound(format!("no *.map.pgm files in {}", dir.display())));
        }
        Ok(FileOracle {
            mode,
            single: None,
            frames,
        })
    }

    pub fn mode(&self) -> FileOracleMode {
        self.mode
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = &str> {
        self.frames.keys().map(String::as_str)
    }

    fn lookup(&self, query: OracleQuery<'_>) -> Result<&Semantics> {
        if let Some(s) = &self.single {
            return Ok(s);
        }
        let stored = self
            .frames
            .get(query.frame_id)
            .ok_or_else(|| Error::NotFound(format!("no stored maps for frame `{}`", query.frame_id)))?;
        let original = || {
            stored.original.as_ref().ok_or_else(|| {
                Error::NotFound(format!("no source map for frame `{}`", query.frame_id))
            })
        };
        match (self.mode, query.view) {
            (FileOracleMode::Static, _) | (FileOracleMode::PerQp, View::Original) => original(),
            (FileOracleMode::PerQp, View::Uniform(qp)) => stored.per_qp.get(&qp.value()).ok_or_else(|| {
                Error::NotFound(format!("no qp {qp} map for frame `{}`", query.frame_id))
            }),
            (FileOracleMode::PerQp, View::Mixed) => Err(Error::NotFound(format!(
                "per-qp maps cannot describe a mixed-qp reconstruction of `{}`",
                query.frame_id
            ))),
        }
    }
}

impl SemanticOracle for FileOracle {
    fn evaluate(&self, frame: &Frame, query: OracleQuery<'_>) -> Result<Semantics> {
        let found = self.lookup(query)?;
        if found.map.width() != frame.width() || found.map.height() != frame.height() {
            return Err(Error::invalid(format!(
                "stored map for `{}` is {}x{}, frame is {}x{}",
                query.frame_id,
                found.map.width(),
                found.map.height(),
                frame.width(),
                frame.height()
            )));
        }
        Ok(found.clone())
    }
}

fn split_qp_suffix(stem: &str) -> Option<(&str, u8)> {
    let (id, tail) = stem.rsplit_once(".qp")?;
    let qp: u8 = tail.parse().ok()?;
    (qp <= Qp::MAX).then_some((id, qp))
}

fn load_pair(map_path: &Path, layout_path: Option<&Path>) -> Result<Semantics> {
    let map = SemanticMap::read(map_path)?;
    let layout = match layout_path {
        Some(p) => InstanceLayout::read(p)?,
        None => InstanceLayout::empty(map.width(), map.height())?,
    };
    if layout.width() != map.width() || layout.height() != map.height() {
        return Err(Error::invalid(format!(
            "layout {} does not match map {}",
            layout_path.map(Path::display).map(|d| d.to_string()).unwrap_or_default(),
            map_path.display()
        )));
    }
    Ok(Semantics { map, layout })
}

/// Writes `<id>.map.pgm` and `<id>.layout.pgm` (or the `.qpNN` variants).
pub fn write_semantics(dir: &Path, frame_id: &str, qp: Option<Qp>, semantics: &Semantics) -> Result<(PathBuf, PathBuf)> {
    let stem = match qp {
        Some(q) => format!("{frame_id}.qp{}", q.value()),
        None => frame_id.to_string(),
    };
    let map_path = dir.join(format!("{stem}.map.pgm"));
    let layout_path = dir.join(format!("{stem}.layout.pgm"));
    semantics.map.write(&map_path)?;
    semantics.layout.write(&layout_path)?;
    Ok((map_path, layout_path))
}
