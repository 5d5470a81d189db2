//! Fidelity proxy, RD curves, Bjontegaard deltas, the jittered-QP
//! correlation protocol and α sweeps.

mod bd;
mod curve;

pub use bd::{bd_bounds, bd_rate, fit_cubic, poly_integral, BdResult, MIN_BD_POINTS};
pub use curve::{curves_from_csv, curves_to_csv, RdCurve, CURVE_HEADER};

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{encode_frame_with_qpmap, Frame, Qp, ACTION_QP_MAX, ACTION_QP_MIN};
use crate::error::{Error, Result};
use crate::semantics::{map_diff, OracleQuery, SemanticMap, SemanticOracle, View, MASK_THRESHOLD};

pub const CORRELATION_CENTERS: [u8; 4] = [22, 27, 32, 37];
pub const CORRELATION_JITTER: i32 = 5;

/// Neumaier-compensated sum.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    stable_sum(values.iter().copied()) / values.len() as f64
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy = stable_sum(pairs.iter().map(|(x, y)| (x - mx) * (y - my)));
    let sxx = stable_sum(xs.iter().map(|x| (x - mx).powi(2)));
    let syy = stable_sum(ys.iter().map(|y| (y - my).powi(2)));
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// IoU of the two maps' `≥ 0.5` masks; two empty masks count as 1.
pub fn mask_iou(a: &SemanticMap, b: &SemanticMap) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::invalid(format!(
            "maps differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        let (p, q) = (x >= MASK_THRESHOLD, y >= MASK_THRESHOLD);
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Semantic fidelity of a reconstruction: mask IoU between the oracle's
/// maps of the original and the reconstruction.
pub fn fidelity_proxy(
    original: &Frame,
    reconstruction: &Frame,
    oracle: &dyn SemanticOracle,
    frame_id: &str,
    view: View,
) -> Result<f64> {
    if original.width() != reconstruction.width() || original.height() != reconstruction.height() {
        return Err(Error::invalid("reconstruction size differs from the original"));
    }
    let a = oracle.evaluate(original, OracleQuery::new(frame_id, View::Original))?;
    let b = oracle.evaluate(reconstruction, OracleQuery::new(frame_id, view))?;
    mask_iou(&a.map, &b.map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationConfig {
    pub centers: Vec<u8>,
    pub jitter: i32,
    pub trials_per_center: usize,
    pub seed: u64,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig {
            centers: CORRELATION_CENTERS.to_vec(),
            jitter: CORRELATION_JITTER,
            trials_per_center: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    /// `(ΔM over the whole frame, fidelity)` per trial.
    pub samples: Vec<(f64, f64)>,
    pub pearson: Option<f64>,
}

impl CorrelationResult {
    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = format!("# seed={seed}\ndelta_m,fidelity\n");
        for (d, f) in &self.samples {
            let _ = writeln!(out, "{d:e},{f:e}");
        }
        out
    }
}

/// Encode frames with per-CU QPs jittered around each center and pair the
/// frame's map change with its fidelity. Trial `i` (counted across all
/// centers) uses frame `i mod n`.
pub fn correlation_protocol(
    frames: &[(String, Frame)],
    oracle: &dyn SemanticOracle,
    config: &CorrelationConfig,
) -> Result<CorrelationResult> {
    if frames.is_empty() {
        return Err(Error::invalid("correlation protocol needs frames"));
    }
    if config.jitter < 0 {
        return Err(Error::invalid("jitter must be non-negative"));
    }
    let originals = frames
        .iter()
        .map(|(id, f)| Ok(oracle.evaluate(f, OracleQuery::new(id, View::Original))?.map))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(config.centers.len() * config.trials_per_center);
    let mut trial = 0;
    for &center in &config.centers {
        for _ in 0..config.trials_per_center {
            let k = trial % frames.len();
            trial += 1;
            let (id, frame) = &frames[k];
            let qpmap = (0..frame.cu_count())
                .map(|_| {
                    let j = rng.gen_range(-config.jitter..=config.jitter);
                    let q = (center as i32 + j).clamp(ACTION_QP_MIN as i32, ACTION_QP_MAX as i32);
                    Qp::new(q as u8)
                })
                .collect::<Result<Vec<_>>>()?;
            let coded = encode_frame_with_qpmap(frame, &qpmap)?;
            let map = oracle.evaluate(&coded.reconstruction, OracleQuery::new(id, View::Mixed))?.map;
            samples.push((map_diff(&map, &originals[k], None)?, mask_iou(&originals[k], &map)?));
        }
    }
    let pearson = pearson(&samples);
    Ok(CorrelationResult { samples, pearson })
}

/// Outcome of coding a set of frames with given QP maps: mean bpp and mean
/// fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub bpp: f64,
    pub fidelity: f64,
}

pub fn evaluate_qpmaps(
    frames: &[(String, Frame)],
    qpmaps: &[Vec<Qp>],
    oracle: &dyn SemanticOracle,
) -> Result<RdPoint> {
    if frames.is_empty() || frames.len() != qpmaps.len() {
        return Err(Error::invalid("need one qp map per frame"));
    }
    let mut bpp = Vec::with_capacity(frames.len());
    let mut fid = Vec::with_capacity(frames.len());
    for ((id, frame), qpmap) in frames.iter().zip(qpmaps) {
        let coded = encode_frame_with_qpmap(frame, qpmap)?;
        let uniform = qpmap.windows(2).all(|w| w[0] == w[1]);
        let view = if uniform { View::Uniform(qpmap[0]) } else { View::Mixed };
        bpp.push(coded.bpp());
        fid.push(fidelity_proxy(frame, &coded.reconstruction, oracle, id, view)?);
    }
    Ok(RdPoint {
        bpp: mean(&bpp),
        fidelity: mean(&fid),
    })
}

/// Uniform-QP reference curve.
pub fn anchor_curve(frames: &[(String, Frame)], qps: &[Qp], oracle: &dyn SemanticOracle) -> Result<RdCurve> {
    let points = qps
        .iter()
        .map(|&q| {
            let maps: Vec<Vec<Qp>> = frames.iter().map(|(_, f)| vec![q; f.cu_count()]).collect();
            evaluate_qpmaps(frames, &maps, oracle).map(|p| (p.bpp, p.fidelity))
        })
        .collect::<Result<Vec<_>>>()?;
    RdCurve::new("uniform", points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub alpha_s: f64,
    pub point: RdPoint,
}

pub const SWEEP_HEADER: &str = "alpha_s,bpp,fidelity";

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSweep {
    pub points: Vec<SweepPoint>,
}

impl AlphaSweep {
    /// Sorted by α.
    pub fn new(mut points: Vec<SweepPoint>) -> Self {
        points.sort_by(|a, b| a.alpha_s.total_cmp(&b.alpha_s));
        AlphaSweep { points }
    }

    /// The sweep as an RD curve. Fewer than four points cannot feed a BD
    /// computation and are reported as an insufficient-data error.
    pub fn curve(&self, label: &str) -> Result<RdCurve> {
        if self.points.len() < MIN_BD_POINTS {
            return Err(Error::Eval(format!(
                "α sweep has {} points; BD needs at least {MIN_BD_POINTS}",
                self.points.len()
            )));
        }
        RdCurve::new(label, self.points.iter().map(|p| (p.point.bpp, p.point.fidelity)).collect())
    }

    /// Adjacent α pairs whose bpp decreases.
    pub fn bpp_inversions(&self) -> usize {
        self.points.windows(2).filter(|w| w[1].point.bpp < w[0].point.bpp).count()
    }

    pub fn to_csv(&self, seed: Option<u64>) -> String {
        let mut out = String::new();
        if let Some(seed) = seed {
            let _ = writeln!(out, "# seed={seed}");
        }
        out.push_str(SWEEP_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(out, "{:e},{:e},{:e}", p.alpha_s, p.point.bpp, p.point.fidelity);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
        let err = |line: usize, msg: &str| Error::Parse {
            path: "<sweep>".into(),
            line,
            msg: msg.into(),
        };
        match rows.next() {
            Some((_, h)) if h == SWEEP_HEADER => {}
            Some((i, _)) => return Err(err(i + 1, "bad sweep header")),
            None => return Err(err(1, "empty sweep")),
        }
        let mut points = Vec::new();
        for (i, line) in rows {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(i + 1, "bad number"))?;
            if v.len() != 3 {
                return Err(err(i + 1, "expected 3 fields"));
            }
            points.push(SweepPoint {
                alpha_s: v[0],
                point: RdPoint {
                    bpp: v[1],
                    fidelity: v[2],
                },
            });
        }
        Ok(AlphaSweep::new(points))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::ProxyOracle;

    fn half_map(width: usize, height: usize, left_only: bool) -> SemanticMap {
        let mut v = vec![0.0; width * height];
        for y in 0..height {
            for x in 0..width {
                if !left_only || x < width / 2 {
                    v[y * width + x] = 0.9;
                }
            }
        }
        SemanticMap::new(width, height, v).unwrap()
    }

    #[test]
    fn iou_cases() {
        let a = half_map(8, 4, true);
        let whole = half_map(8, 4, false);
        assert_eq!(mask_iou(&a, &whole).unwrap(), 0.5);
        assert_eq!(mask_iou(&whole, &a).unwrap(), 0.5);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        let mut right = vec![0.0; 32];
        for y in 0..4 {
            for x in 4..8 {
                right[y * 8 + x] = 1.0;
            }
        }
        let right = SemanticMap::new(8, 4, right).unwrap();
        assert_eq!(mask_iou(&a, &right).unwrap(), 0.0);
        let empty = SemanticMap::filled(8, 4, 0.1).unwrap();
        assert_eq!(mask_iou(&empty, &empty).unwrap(), 1.0);
        assert!(mask_iou(&a, &SemanticMap::filled(4, 4, 0.0).unwrap()).is_err());
    }

    #[test]
    fn fidelity_of_identity_is_one() {
        let f = Frame::new(64, 64, (0..4096).map(|i| ((i * 7) % 251) as u8).collect()).unwrap();
        let o = ProxyOracle::default();
        assert_eq!(fidelity_proxy(&f, &f, &o, "x", View::Original).unwrap(), 1.0);
    }

    #[test]
    fn constant_frame_correlation_trial() {
        let frames = vec![("flat".to_string(), Frame::filled(128, 128, 128).unwrap())];
        let cfg = CorrelationConfig {
            centers: vec![22],
            jitter: 0,
            trials_per_center: 3,
            seed: 1,
        };
        let r = correlation_protocol(&frames, &ProxyOracle::default(), &cfg).unwrap();
        assert_eq!(r.samples, vec![(0.0, 1.0); 3]);
        assert_eq!(r.pearson, None);
    }

    #[test]
    fn stable_sum_is_order_stable() {
        let v: Vec<f64> = (0..1000).map(|i| 1e8 * ((i as f64) * 0.37).sin() + 1e-3 * i as f64).collect();
        let mut r = v.clone();
        r.reverse();
        assert!((stable_sum(v.iter().copied()) - stable_sum(r)).abs() < 1e-12 * 1e8);
    }

    #[test]
    fn pearson_of_line() {
        let p: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect();
        assert!((pearson(&p).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_csv_round_trip() {
        let s = AlphaSweep::new(vec![
            SweepPoint { alpha_s: 2.0, point: RdPoint { bpp: 0.5, fidelity: 0.7 } },
            SweepPoint { alpha_s: 0.0, point: RdPoint { bpp: 0.1, fidelity: 0.3 } },
        ]);
        assert_eq!(AlphaSweep::from_csv(&s.to_csv(Some(4))).unwrap(), s);
        assert!(s.curve("agent").is_err());
    }

    #[test]
    fn curve_csv_round_trip() {
        let c = vec![
            RdCurve::new("a", vec![(0.3, 0.9), (0.1, 0.5)]).unwrap(),
            RdCurve::new("b b", vec![(1.0 / 3.0, 0.25)]).unwrap(),
        ];
        assert_eq!(curves_from_csv(&curves_to_csv(&c, Some(1))).unwrap(), c);
    }
}
