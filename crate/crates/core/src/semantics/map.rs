use std::path::Path;

use crate::codec::Rect;
use crate::error::{Error, Result};
use crate::pgm::Pgm;

const MAP_MAXVAL: u16 = 65535;

/// Per-pixel importance field with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::invalid(format!(
                "map of {} values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("map value {v} outside [0, 1]")));
        }
        Ok(SemanticMap {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    pub fn mean_in(&self, region: Rect) -> f64 {
        region_values(&self.values, self.width, region).sum::<f64>() / region.area() as f64
    }

    pub fn to_pgm(&self) -> Pgm {
        Pgm {
            width: self.width,
            height: self.height,
            maxval: MAP_MAXVAL,
            samples: self
                .values
                .iter()
                .map(|v| (v * MAP_MAXVAL as f64).round() as u16)
                .collect(),
        }
    }

    pub fn from_pgm(pgm: &Pgm) -> Result<Self> {
        let scale = pgm.maxval as f64;
        Self::new(
            pgm.width,
            pgm.height,
            pgm.samples.iter().map(|&s| s as f64 / scale).collect(),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let pgm = Pgm::read(path)?;
        if pgm.maxval != MAP_MAXVAL {
            return Err(Error::parse(
                path.display().to_string(),
                1,
                format!("map maxval {} (expected 65535)", pgm.maxval),
            ));
        }
        Self::from_pgm(&pgm)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_pgm().write(path, None)
    }
}

/// Labelled instance masks; label 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceLayout {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    instance_count: u32,
}

impl InstanceLayout {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::invalid(format!(
                "layout of {} labels for {width}x{height}",
                labels.len()
            )));
        }
        let instance_count = labels.iter().copied().max().unwrap_or(0);
        Ok(InstanceLayout {
            width,
            height,
            labels,
            instance_count,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn instance_count(&self) -> u32 {
        self.instance_count
    }

    pub fn read(path: &Path) -> Result<Self> {
        let pgm = Pgm::read(path)?;
        if pgm.maxval != 255 {
            return Err(Error::parse(
                path.display().to_string(),
                1,
                format!("layout maxval {} (expected 255)", pgm.maxval),
            ));
        }
        Self::new(
            pgm.width,
            pgm.height,
            pgm.samples.iter().map(|&s| s as u32).collect(),
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if self.instance_count > 255 {
            return Err(Error::invalid(format!(
                "{} instances do not fit an 8-bit layout",
                self.instance_count
            )));
        }
        Pgm {
            width: self.width,
            height: self.height,
            maxval: 255,
            samples: self.labels.iter().map(|&l| l as u16).collect(),
        }
        .write(path, None)
    }
}

/// A map together with its instance layout, as produced by an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Semantics {
    pub map: SemanticMap,
    pub layout: InstanceLayout,
}

fn region_values(values: &[f64], width: usize, region: Rect) -> impl Iterator<Item = f64> + '_ {
    (region.y..region.y + region.height).flat_map(move |y| {
        values[y * width + region.x..y * width + region.x + region.width]
            .iter()
            .copied()
    })
}

fn check_region(region: Rect, width: usize, height: usize) -> Result<()> {
    if region.area() == 0 {
        return Err(Error::invalid("empty region"));
    }
    if !region.fits_in(width, height) {
        return Err(Error::invalid(format!(
            "region {region:?} exceeds {width}x{height}"
        )));
    }
    Ok(())
}

/// Mean absolute per-pixel difference between two maps, over `region` or
/// the whole map.
pub fn map_diff(before: &SemanticMap, after: &SemanticMap, region: Option<Rect>) -> Result<f64> {
    if before.width != after.width || before.height != after.height {
        return Err(Error::invalid(format!(
            "map sizes differ: {}x{} vs {}x{}",
            before.width, before.height, after.width, after.height
        )));
    }
    let region = region.unwrap_or_else(|| before.full_rect());
    check_region(region, before.width, before.height)?;
    let sum: f64 = region_values(&before.values, before.width, region)
        .zip(region_values(&after.values, after.width, region))
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / region.area() as f64)
}

/// Fraction of `region` pixels whose importance is at least `threshold`.
pub fn mask_ratio(map: &SemanticMap, region: Rect, threshold: f64) -> Result<f64> {
    check_region(region, map.width, map.height)?;
    let hits = region_values(&map.values, map.width, region)
        .filter(|&v| v >= threshold)
        .count();
    Ok(hits as f64 / region.area() as f64)
}

/// Number of distinct non-zero labels inside `region` (clipped to the layout).
pub fn instances_in(layout: &InstanceLayout, region: Rect) -> usize {
    let x1 = (region.x + region.width).min(layout.width);
    let y1 = (region.y + region.height).min(layout.height);
    let mut seen: Vec<u32> = Vec::new();
    for y in region.y.min(y1)..y1 {
        for &l in &layout.labels[y * layout.width + region.x.min(x1)..y * layout.width + x1] {
            if l != 0 && !seen.contains(&l) {
                seen.push(l);
            }
        }
    }
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> SemanticMap {
        let v = (0..w * h).map(|i| f(i % w, i / w)).collect();
        SemanticMap::new(w, h, v).unwrap()
    }

    #[test]
    fn diff_examples() {
        let ones = SemanticMap::filled(8, 4, 1.0).unwrap();
        let zeros = SemanticMap::filled(8, 4, 0.0).unwrap();
        let half = map(8, 4, |x, _| if x < 4 { 0.0 } else { 1.0 });
        assert_eq!(map_diff(&ones, &ones, None).unwrap(), 0.0);
        assert_eq!(map_diff(&ones, &zeros, None).unwrap(), 1.0);
        assert_eq!(map_diff(&ones, &half, None).unwrap(), 0.5);
        assert_eq!(map_diff(&ones, &half, Some(Rect::new(0, 0, 4, 4))).unwrap(), 1.0);
        let other = SemanticMap::filled(4, 4, 0.0).unwrap();
        assert!(map_diff(&ones, &other, None).is_err());
    }

    #[test]
    fn mask_ratio_examples() {
        let r = Rect::new(0, 0, 8, 8);
        assert_eq!(mask_ratio(&SemanticMap::filled(8, 8, 0.0).unwrap(), r, 0.5).unwrap(), 0.0);
        assert_eq!(mask_ratio(&SemanticMap::filled(8, 8, 1.0).unwrap(), r, 0.5).unwrap(), 1.0);
        let quarter = map(8, 8, |x, y| if x < 4 && y < 4 { 0.9 } else { 0.1 });
        assert_eq!(mask_ratio(&quarter, r, 0.5).unwrap(), 0.25);
        assert!(mask_ratio(&quarter, Rect::new(0, 0, 0, 3), 0.5).is_err());
        assert!(mask_ratio(&quarter, Rect::new(4, 4, 8, 8), 0.5).is_err());
    }

    #[test]
    fn instance_counting() {
        let labels: Vec<u32> = (0..16 * 4)
            .map(|i| match i % 16 {
                2..=5 => 1,
                9..=12 => 2,
                _ => 0,
            })
            .collect();
        let layout = InstanceLayout::new(16, 4, labels).unwrap();
        assert_eq!(layout.instance_count(), 2);
        assert_eq!(instances_in(&layout, Rect::new(0, 0, 2, 4)), 0);
        assert_eq!(instances_in(&layout, Rect::new(3, 0, 2, 2)), 1);
        assert_eq!(instances_in(&layout, Rect::new(4, 0, 8, 4)), 2);
    }

    #[test]
    fn out_of_range_values_rejected() {
        assert!(SemanticMap::new(1, 1, vec![1.5]).is_err());
        assert!(SemanticMap::new(1, 1, vec![f64::NAN]).is_err());
    }

    fn arb_map() -> impl Strategy<Value = SemanticMap> {
        prop::collection::vec(0.0f64..=1.0, 48).prop_map(|v| SemanticMap::new(8, 6, v).unwrap())
    }

    proptest! {
        #[test]
        fn diff_is_pseudometric(a in arb_map(), b in arb_map(), c in arb_map()) {
            let ab = map_diff(&a, &b, None).unwrap();
            let ba = map_diff(&b, &a, None).unwrap();
            let bc = map_diff(&b, &c, None).unwrap();
            let ac = map_diff(&a, &c, None).unwrap();
            prop_assert!(ab >= 0.0 && ab <= 1.0);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(map_diff(&a, &a, None).unwrap(), 0.0);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn whole_diff_is_area_weighted_mean(a in arb_map(), b in arb_map()) {
            let cells = [Rect::new(0, 0, 5, 4), Rect::new(5, 0, 3, 4), Rect::new(0, 4, 5, 2), Rect::new(5, 4, 3, 2)];
            let weighted: f64 = cells
                .iter()
                .map(|r| map_diff(&a, &b, Some(*r)).unwrap() * r.area() as f64)
                .sum::<f64>() / 48.0;
            prop_assert!((weighted - map_diff(&a, &b, None).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn mask_ratio_monotone_in_threshold(a in arb_map(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let r = a.full_rect();
            prop_assert!(mask_ratio(&a, r, hi).unwrap() <= mask_ratio(&a, r, lo).unwrap());
        }
    }
}
