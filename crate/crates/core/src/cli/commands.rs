use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{OracleChoice, RunConfig};
use crate::agent::{infer_qpmap, load_model, save_model, train, ModelMeta, QNetConfig, QNetwork, TrainingLog};
use crate::baselines::{handcrafted_qpmap, CurveKind, MappingCurve};
use crate::codec::{encode_frame_with_qpmap, Frame, Qp};
use crate::dataset::{build_cache, BuildConfig, DatasetCache, Split};
use crate::env::{EpisodeConfig, FrameContext, SemanticEnv, StateBuilder};
use crate::error::{Error, Result};
use crate::eval::{
    anchor_curve, bd_rate, correlation_protocol, curves_to_csv, evaluate_qpmaps, fidelity_proxy, AlphaSweep,
    BdResult, CorrelationConfig, CorrelationResult, RdCurve, RdPoint, SweepPoint,
};
use crate::semantics::{FileOracle, OracleQuery, ProxyOracle, SemanticOracle, View};

pub const MODEL_EXTENSION: &str = "rscq";

pub fn make_oracle(cfg: &RunConfig) -> Result<Box<dyn SemanticOracle>> {
    Ok(match cfg.oracle {
        OracleChoice::Proxy => Box::new(ProxyOracle::default()),
        OracleChoice::Files => Box::new(FileOracle::from_dir(cfg.require(&cfg.maps, "maps")?, cfg.map_mode)?),
    })
}

/// Every `*.pgm` in `dir`, sorted by name; ids are the file stems.
pub fn load_frames(dir: &Path) -> Result<Vec<(String, Frame)>> {
    if !dir.is_dir() {
        return Err(Error::NotFound(format!("frames directory {} does not exist", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::NotFound(format!("no .pgm frames in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok((id, Frame::read_pgm(p)?))
        })
        .collect()
}

/// The cached frames of one split, read from `dir/<id>.pgm`.
pub fn load_split(cache: &DatasetCache, dir: &Path, split: Split) -> Result<Vec<(String, Frame)>> {
    cache
        .frames_in(split)
        .map(|i| {
            let id = &cache.frames[i].id;
            Ok((id.clone(), Frame::read_pgm(&dir.join(format!("{id}.pgm")))?))
        })
        .collect()
}

pub fn contexts(cache: &DatasetCache, frames: &[(String, Frame)], oracle: &dyn SemanticOracle) -> Result<Vec<FrameContext>> {
    frames
        .iter()
        .map(|(id, f)| FrameContext::from_cache(cache, id, f, oracle))
        .collect()
}

pub fn net_config(cfg: &RunConfig) -> QNetConfig {
    let base = QNetConfig::default();
    if cfg.global_branch {
        base
    } else {
        base.without_global_branch()
    }
}

/// Train on the cached training split at `alpha_s`.
pub fn train_agent(
    cfg: &RunConfig,
    train_frames: &[FrameContext],
    alpha_s: f64,
) -> Result<(QNetwork<f32>, TrainingLog)> {
    let episode = EpisodeConfig {
        alpha_s,
        anchor_qp: cfg.anchor_qp,
        ..EpisodeConfig::default()
    };
    let mut env = SemanticEnv::new(train_frames.to_vec(), episode, cfg.seed)?;
    let mut tc = cfg.train;
    tc.seed = cfg.seed;
    train(&mut env, net_config(cfg), &tc)
}

pub fn agent_qpmaps(net: &QNetwork<f32>, frames: &[(String, Frame)], oracle: &dyn SemanticOracle) -> Result<Vec<Vec<Qp>>> {
    frames
        .iter()
        .map(|(id, f)| {
            let sem = oracle.evaluate(f, OracleQuery::new(id, View::Original))?;
            infer_qpmap(net, &StateBuilder::new(f, &sem)?)
        })
        .collect()
}

pub fn handcrafted_curve(
    frames: &[(String, Frame)],
    oracle: &dyn SemanticOracle,
    kind: CurveKind,
    exponent: f64,
    qp_mins: &[Qp],
) -> Result<RdCurve> {
    let originals = frames
        .iter()
        .map(|(id, f)| Ok(oracle.evaluate(f, OracleQuery::new(id, View::Original))?.map))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    for &qp_min in qp_mins {
        let curve = MappingCurve {
            kind,
            exponent,
            ..MappingCurve::new(kind)
        }
        .with_qp_min(qp_min);
        let maps = frames
            .iter()
            .zip(&originals)
            .map(|((_, f), m)| handcrafted_qpmap(f, m, &curve))
            .collect::<Result<Vec<_>>>()?;
        let p = evaluate_qpmaps(frames, &maps, oracle)?;
        points.push((p.bpp, p.fidelity));
    }
    dedup_rates(&mut points);
    RdCurve::new(kind.as_str(), points)
}

/// Two settings that land on the same rate keep only the first.
fn dedup_rates(points: &mut Vec<(f64, f64)>) {
    let mut seen: Vec<f64> = Vec::new();
    points.retain(|p| {
        let new = !seen.contains(&p.0);
        seen.push(p.0);
        new
    });
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    let out = cfg.require(&cfg.out, "out")?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(out)
}

pub fn cmd_build_dataset(cfg: &RunConfig) -> Result<String> {
    let frames = load_frames(cfg.require(&cfg.frames, "frames")?)?;
    let cache_path = cfg.require(&cfg.cache, "cache")?;
    let oracle = make_oracle(cfg)?;
    let build = BuildConfig {
        seed: cfg.seed,
        anchor_qp: cfg.anchor_qp,
        train_fraction: cfg.train_fraction,
        ..BuildConfig::default()
    };
    let cache = build_cache(&frames, oracle.as_ref(), &build)?;
    if let Some(parent) = cache_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    cache.save(cache_path)?;
    Ok(format!(
        "cache {} frames={} rows={} seed={}",
        cache_path.display(),
        cache.frames.len(),
        cache.len(),
        cfg.seed
    ))
}

struct Prepared {
    cache: DatasetCache,
    oracle: Box<dyn SemanticOracle>,
    frames_dir: PathBuf,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let cache_path = cfg.require(&cfg.cache, "cache")?;
    if !cache_path.exists() {
        return Err(Error::NotFound(format!("cache {} does not exist", cache_path.display())));
    }
    Ok(Prepared {
        cache: DatasetCache::load(cache_path)?,
        oracle: make_oracle(cfg)?,
        frames_dir: cfg.require(&cfg.frames, "frames")?.to_path_buf(),
    })
}

fn log_path(model: &Path) -> PathBuf {
    model.with_extension("log.csv")
}

pub fn cmd_train(cfg: &RunConfig) -> Result<String> {
    let p = prepare(cfg)?;
    let model_path = cfg.require(&cfg.model, "model")?;
    let frames = load_split(&p.cache, &p.frames_dir, Split::Train)?;
    let ctx = contexts(&p.cache, &frames, p.oracle.as_ref())?;
    let (net, log) = train_agent(cfg, &ctx, cfg.alpha_s)?;
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_model(
        model_path,
        &net,
        &ModelMeta {
            seed: cfg.seed,
            alpha_s: cfg.alpha_s,
        },
    )?;
    log.save(&log_path(model_path))?;
    Ok(format!(
        "model {} steps={} alpha={} seed={}",
        model_path.display(),
        log.rows.len(),
        cfg.alpha_s,
        cfg.seed
    ))
}

/// Model file name for one point of an α sweep.
pub fn sweep_model_name(alpha_s: f64) -> String {
    format!("alpha_{alpha_s}.{MODEL_EXTENSION}")
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<String> {
    let p = prepare(cfg)?;
    let dir = cfg.require(&cfg.model, "model")?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let frames = load_split(&p.cache, &p.frames_dir, Split::Train)?;
    let ctx = contexts(&p.cache, &frames, p.oracle.as_ref())?;
    let mut report = String::new();
    for &alpha in &cfg.alphas {
        let (net, log) = train_agent(cfg, &ctx, alpha)?;
        let path = dir.join(sweep_model_name(alpha));
        save_model(&path, &net, &ModelMeta { seed: cfg.seed, alpha_s: alpha })?;
        log.save(&log_path(&path))?;
        let _ = writeln!(report, "model {} alpha={alpha} seed={}", path.display(), cfg.seed);
    }
    Ok(report.trim_end().to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutcome {
    pub qpmap: Vec<Qp>,
    pub bpp: f64,
    pub fidelity: f64,
    pub qpmap_path: PathBuf,
    pub reconstruction_path: PathBuf,
}

pub fn cmd_encode(cfg: &RunConfig, frame_path: &Path) -> Result<EncodeOutcome> {
    let frame = Frame::read_pgm(frame_path)?;
    let id = frame_path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame").to_string();
    let oracle = make_oracle(cfg)?;
    let qpmap = if let Some(q) = cfg.uniform_qp {
        vec![q; frame.cu_count()]
    } else if let Some(kind) = cfg.baseline {
        let map = oracle.evaluate(&frame, OracleQuery::new(&id, View::Original))?.map;
        let curve = MappingCurve {
            exponent: cfg.exponent,
            ..MappingCurve::new(kind)
        };
        handcrafted_qpmap(&frame, &map, &curve)?
    } else {
        let (net, _) = load_model(cfg.require(&cfg.model, "model")?)?;
        let sem = oracle.evaluate(&frame, OracleQuery::new(&id, View::Original))?;
        infer_qpmap(&net, &StateBuilder::new(&frame, &sem)?)?
    };
    let coded = encode_frame_with_qpmap(&frame, &qpmap)?;
    let view = match cfg.uniform_qp {
        Some(q) => View::Uniform(q),
        None if qpmap.windows(2).all(|w| w[0] == w[1]) => View::Uniform(qpmap[0]),
        None => View::Mixed,
    };
    let fidelity = fidelity_proxy(&frame, &coded.reconstruction, oracle.as_ref(), &id, view)?;
    let out = out_dir(cfg)?;
    let qpmap_path = out.join(format!("{id}.qpmap.txt"));
    let reconstruction_path = out.join(format!("{id}.recon.pgm"));
    let mut text = String::new();
    for q in &qpmap {
        let _ = writeln!(text, "{}", q.value());
    }
    write(&qpmap_path, &text)?;
    coded
        .reconstruction
        .write_pgm(&reconstruction_path, Some(&format!("seed={}", cfg.seed)))?;
    let bpp = coded.bpp();
    write(
        &out.join(format!("{id}.stats.txt")),
        &format!("# seed={}\nbpp fidelity\n{bpp:e} {fidelity:e}\n", cfg.seed),
    )?;
    Ok(EncodeOutcome {
        qpmap,
        bpp,
        fidelity,
        qpmap_path,
        reconstruction_path,
    })
}

/// Parses a qpmap file: one QP per line.
pub fn read_qpmap(path: &Path) -> Result<Vec<Qp>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: u8 = l
                .trim()
                .parse()
                .map_err(|_| Error::parse(path.display().to_string(), i + 1, format!("bad qp `{l}`")))?;
            Qp::new(v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub anchor: RdCurve,
    pub agent: RdCurve,
    pub sweep: AlphaSweep,
    pub handcrafted: Vec<RdCurve>,
    /// Comparator label and its deltas against the uniform anchor.
    pub bd: Vec<(String, BdResult)>,
    pub correlation: CorrelationResult,
}

/// Loads every model in `dir` (sorted by α).
pub fn load_sweep_models(dir: &Path) -> Result<Vec<(f64, QNetwork<f32>)>> {
    if !dir.is_dir() {
        return Err(Error::NotFound(format!("model directory {} does not exist", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == MODEL_EXTENSION))
        .collect();
    paths.sort();
    let mut models = paths
        .iter()
        .map(|p| load_model(p).map(|(net, meta)| (meta.alpha_s, net)))
        .collect::<Result<Vec<_>>>()?;
    models.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(models)
}

pub fn sweep_points(
    models: &[(f64, QNetwork<f32>)],
    frames: &[(String, Frame)],
    oracle: &dyn SemanticOracle,
) -> Result<AlphaSweep> {
    let points = models
        .iter()
        .map(|(alpha, net)| {
            let maps = agent_qpmaps(net, frames, oracle)?;
            Ok(SweepPoint {
                alpha_s: *alpha,
                point: evaluate_qpmaps(frames, &maps, oracle)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlphaSweep::new(points))
}

/// Agent curve from a sweep; α values landing on the same rate are merged.
pub fn agent_curve(sweep: &AlphaSweep) -> Result<RdCurve> {
    let checked = sweep.curve("agent")?;
    let mut points: Vec<(f64, f64)> = checked.points().to_vec();
    dedup_rates(&mut points);
    RdCurve::new("agent", points)
}

pub fn evaluate(
    cfg: &RunConfig,
    models: &[(f64, QNetwork<f32>)],
    test: &[(String, Frame)],
    oracle: &dyn SemanticOracle,
) -> Result<EvalReport> {
    let sweep = sweep_points(models, test, oracle)?;
    let agent = agent_curve(&sweep)?;
    let anchor = anchor_curve(test, &cfg.anchor_qps, oracle)?;
    let handcrafted = [CurveKind::Linear, CurveKind::Nonlinear]
        .into_iter()
        .map(|k| handcrafted_curve(test, oracle, k, cfg.exponent, &cfg.handcrafted_qp_mins))
        .collect::<Result<Vec<_>>>()?;
    let mut bd = vec![("uniform".to_string(), bd_rate(&anchor, &anchor)?)];
    bd.push(("agent".to_string(), bd_rate(&agent, &anchor)?));
    for c in &handcrafted {
        bd.push((c.label().to_string(), bd_rate(c, &anchor)?));
    }
    let correlation = correlation_protocol(
        test,
        oracle,
        &CorrelationConfig {
            trials_per_center: cfg.correlation_trials,
            seed: cfg.seed,
            ..CorrelationConfig::default()
        },
    )?;
    Ok(EvalReport {
        anchor,
        agent,
        sweep,
        handcrafted,
        bd,
        correlation,
    })
}

pub fn bd_csv(rows: &[(String, BdResult)], seed: u64) -> String {
    let mut out = format!("# seed={seed}\ncomparator,bd_br,bd_metric\n");
    for (label, r) in rows {
        let _ = writeln!(out, "{label},{:.6},{:.6e}", r.bd_br, r.bd_metric);
    }
    out
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let p = prepare(cfg)?;
    let models = load_sweep_models(cfg.require(&cfg.model, "model")?)?;
    let test = load_split(&p.cache, &p.frames_dir, Split::Test)?;
    let report = evaluate(cfg, &models, &test, p.oracle.as_ref())?;
    let out = out_dir(cfg)?;
    let mut curves = vec![report.anchor.clone(), report.agent.clone()];
    curves.extend(report.handcrafted.iter().cloned());
    write(&out.join("curves.csv"), &curves_to_csv(&curves, Some(cfg.seed)))?;
    write(&out.join("sweep.csv"), &report.sweep.to_csv(Some(cfg.seed)))?;
    write(&out.join("bd.csv"), &bd_csv(&report.bd, cfg.seed))?;
    write(&out.join("correlation.csv"), &report.correlation.to_csv(cfg.seed))?;
    Ok(report)
}

pub fn summarize(report: &EvalReport) -> String {
    let mut s = String::new();
    for (label, r) in &report.bd {
        let _ = writeln!(s, "{label}: bd_br {:+.3}% bd_metric {:+.4}", r.bd_br, r.bd_metric);
    }
    match report.correlation.pearson {
        Some(r) => {
            let _ = write!(s, "correlation r = {r:.4} over {} encodes", report.correlation.samples.len());
        }
        None => {
            let _ = write!(s, "correlation undefined (constant samples)");
        }
    }
    s
}

pub fn rd_point(frames: &[(String, Frame)], maps: &[Vec<Qp>], oracle: &dyn SemanticOracle) -> Result<RdPoint> {
    evaluate_qpmaps(frames, maps, oracle)
}
