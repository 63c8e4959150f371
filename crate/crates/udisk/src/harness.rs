//! Brute-force oracles, seeded workloads, trace replay and result diffs.
//!
//! Trace lines are `I x y [id]`, `D id`, `Q x y`, `E x y` and `K x k`.
//! K ops treat live points with `0 <= y < 1` as arc centers over `y = 0`.
//! Replay results are written as JSON lines.

use crate::dynarcs::{build_delonly, DeletionOnlyArcs, DynamicArcSet};
use crate::engine::{DynamicUDRR, EngineError, StaticUDRR};
use crate::geometry::{arc_below_point, arc_from_center, Point, UnitArc};
use crate::tolerance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("op {op}: {source}")]
    Engine { op: usize, source: EngineError },
    #[error("op {op}: {msg}")]
    Replay { op: usize, msg: String },
    #[error("bad mix: {0}")]
    Mix(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Insert { x: f64, y: f64, id: Option<u64> },
    Delete { id: u64 },
    Report { x: f64, y: f64 },
    Empty { x: f64, y: f64 },
    KLowest { x: f64, k: usize },
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Insert { .. } => "I",
            Op::Delete { .. } => "D",
            Op::Report { .. } => "Q",
            Op::Empty { .. } => "E",
            Op::KLowest { .. } => "K",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Insert { x, y, id: Some(id) } => write!(f, "I {x} {y} {id}"),
            Op::Insert { x, y, id: None } => write!(f, "I {x} {y}"),
            Op::Delete { id } => write!(f, "D {id}"),
            Op::Report { x, y } => write!(f, "Q {x} {y}"),
            Op::Empty { x, y } => write!(f, "E {x} {y}"),
            Op::KLowest { x, k } => write!(f, "K {x} {k}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub ops: Vec<Op>,
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.ops {
            writeln!(f, "{op}")?;
        }
        Ok(())
    }
}

impl FromStr for Trace {
    type Err = HarnessError;

    /// Blank lines and `#` comments are skipped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut ops = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| HarnessError::Parse { line: i + 1, msg: format!("{msg}: {raw:?}") };
            let t: Vec<&str> = line.split_whitespace().collect();
            let num = |j: usize| -> Result<f64, HarnessError> {
                let v: f64 = t.get(j).ok_or_else(|| err("missing field"))?.parse().map_err(|_| err("bad number"))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err("non-finite number"))
                }
            };
            let int = |j: usize| -> Result<u64, HarnessError> {
                t.get(j).ok_or_else(|| err("missing field"))?.parse().map_err(|_| err("bad integer"))
            };
            let arity = |n: &[usize]| if n.contains(&t.len()) { Ok(()) } else { Err(err("wrong field count")) };
            let op = match t[0] {
                "I" => {
                    arity(&[3, 4])?;
                    Op::Insert { x: num(1)?, y: num(2)?, id: if t.len() == 4 { Some(int(3)?) } else { None } }
                }
                "D" => {
                    arity(&[2])?;
                    Op::Delete { id: int(1)? }
                }
                "Q" => {
                    arity(&[3])?;
                    Op::Report { x: num(1)?, y: num(2)? }
                }
                "E" => {
                    arity(&[3])?;
                    Op::Empty { x: num(1)?, y: num(2)? }
                }
                "K" => {
                    arity(&[3])?;
                    let k = int(2)? as usize;
                    if k == 0 {
                        return Err(err("k must be positive"));
                    }
                    Op::KLowest { x: num(1)?, k }
                }
                _ => return Err(err("unknown op")),
            };
            ops.push(op);
        }
        Ok(Trace { ops })
    }
}

/// Points, one `x y [id]` per line; ids default to the line's index.
pub fn parse_points(s: &str) -> Result<Vec<Point>, HarnessError> {
    let mut out = Vec::new();
    for (i, raw) in s.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| HarnessError::Parse { line: i + 1, msg: format!("{msg}: {raw:?}") };
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 2 && t.len() != 3 {
            return Err(err("expected `x y [id]`"));
        }
        let x: f64 = t[0].parse().map_err(|_| err("bad number"))?;
        let y: f64 = t[1].parse().map_err(|_| err("bad number"))?;
        let id: u64 = if t.len() == 3 { t[2].parse().map_err(|_| err("bad integer"))? } else { out.len() as u64 };
        out.push(Point::try_new(x, y, id).map_err(|e| err(&e.to_string()))?);
    }
    Ok(out)
}

pub fn oracle_report(live: &[Point], q: &Point) -> Vec<u64> {
    let mut v: Vec<u64> = live.iter().filter(|p| p.dist(q) <= 1.0 + tolerance()).map(|p| p.id).collect();
    v.sort_unstable();
    v
}

/// The in-disk point with the smallest id.
pub fn oracle_empty(live: &[Point], q: &Point) -> Option<Point> {
    live.iter().filter(|p| p.dist(q) <= 1.0 + tolerance()).min_by_key(|p| p.id).copied()
}

/// Arcs met by the downward ray from `q`.
pub fn oracle_level(gamma: &[UnitArc], q: &Point) -> usize {
    gamma.iter().filter(|g| arc_below_point(q, g)).count()
}

/// Ids of the `k` arcs lowest at `x` among those spanning it, by height then id.
pub fn oracle_k_lowest(gamma: &[UnitArc], x: f64, k: usize) -> Vec<u64> {
    let mut v: Vec<(f64, u64)> =
        gamma.iter().filter(|g| g.spans(x)).map(|g| (g.y_unchecked(x), g.source_id)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v.into_iter().take(k).map(|p| p.1).collect()
}

/// Arcs over `y = 0` of the points that have one.
pub fn arcs_of(points: &[Point]) -> Vec<UnitArc> {
    points.iter().filter(|p| p.y >= 0.0).filter_map(|p| arc_from_center(*p, 0.0).ok().flatten()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mix {
    pub insert: f64,
    pub delete: f64,
    pub report: f64,
    pub empty: f64,
    pub k_lowest: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Mix { insert: 0.4, delete: 0.2, report: 0.2, empty: 0.2, k_lowest: 0.0 }
    }
}

impl FromStr for Mix {
    type Err = HarnessError;

    /// `I:0.4,D:0.2,Q:0.2,E:0.2[,K:..]`; missing kinds get zero.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut m = Mix { insert: 0.0, delete: 0.0, report: 0.0, empty: 0.0, k_lowest: 0.0 };
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once(':').ok_or_else(|| HarnessError::Mix(format!("no ':' in {part:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| HarnessError::Mix(format!("bad weight in {part:?}")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(HarnessError::Mix(format!("weight out of range in {part:?}")));
            }
            match k.trim() {
                "I" => m.insert = v,
                "D" => m.delete = v,
                "Q" => m.report = v,
                "E" => m.empty = v,
                "K" => m.k_lowest = v,
                other => return Err(HarnessError::Mix(format!("unknown op {other:?}"))),
            }
        }
        let sum = m.insert + m.delete + m.report + m.empty + m.k_lowest;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(HarnessError::Mix(format!("weights sum to {sum}, not 1")));
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distribution {
    UniformSquare,
    Clustered,
    CollinearJittered,
}

impl FromStr for Distribution {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform-square" | "uniform" => Ok(Distribution::UniformSquare),
            "clustered" => Ok(Distribution::Clustered),
            "collinear-jittered" | "collinear" => Ok(Distribution::CollinearJittered),
            _ => Err(HarnessError::Mix(format!("unknown distribution {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    pub seed: u64,
    /// Number of ops.
    pub n: usize,
    pub mix: Mix,
    pub dist: Distribution,
    /// Coordinates are drawn from `[0, side]^2`.
    pub side: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig { seed: 0, n: 1000, mix: Mix::default(), dist: Distribution::UniformSquare, side: 10.0 }
    }
}

struct PointSource {
    dist: Distribution,
    side: f64,
    centers: Vec<(f64, f64)>,
    line: ((f64, f64), (f64, f64)),
}

impl PointSource {
    fn new(dist: Distribution, side: f64, rng: &mut ChaCha8Rng) -> Self {
        let clusters = rng.gen_range(2..=6);
        let centers = (0..clusters).map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side))).collect();
        let a = (rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        let b = (rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        PointSource { dist, side, centers, line: (a, b) }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self.dist {
            Distribution::UniformSquare => (rng.gen_range(0.0..self.side), rng.gen_range(0.0..self.side)),
            Distribution::Clustered => {
                if rng.gen_bool(0.05) {
                    return (rng.gen_range(0.0..self.side), rng.gen_range(0.0..self.side));
                }
                let c = self.centers[rng.gen_range(0..self.centers.len())];
                let r = rng.gen_range(0.0f64..1.0).sqrt() * 0.9;
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                (c.0 + r * t.cos(), c.1 + r * t.sin())
            }
            Distribution::CollinearJittered => {
                let ((ax, ay), (bx, by)) = self.line;
                let s = rng.gen_range(0.0..1.0);
                (ax + s * (bx - ax) + rng.gen_range(-1e-6..1e-6), ay + s * (by - ay) + rng.gen_range(-1e-6..1e-6))
            }
        }
    }

    /// Queries land near the data half of the time.
    fn query(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        if rng.gen_bool(0.5) {
            let (x, y) = self.draw(rng);
            (x + rng.gen_range(-1.0..1.0), y + rng.gen_range(-1.0..1.0))
        } else {
            (rng.gen_range(-1.0..self.side + 1.0), rng.gen_range(-1.0..self.side + 1.0))
        }
    }
}

/// Whether `q` is within 10τ of some live unit circle.
pub fn near_boundary(live: &[Point], q: &Point) -> bool {
    live.iter().any(|p| (p.dist(q) - 1.0).abs() < 10.0 * tolerance())
}

/// Whether the line `x` passes within 10τ of an arc end or two of its
/// arcs tie there.
fn k_line_degenerate(arcs: &[UnitArc], x: f64) -> bool {
    let m = 10.0 * tolerance();
    if arcs.iter().any(|g| (x - g.xl).abs() < m || (x - g.xr).abs() < m) {
        return true;
    }
    let mut ys: Vec<f64> = arcs.iter().filter(|g| g.spans(x)).map(|g| g.y_unchecked(x)).collect();
    ys.sort_by(f64::total_cmp);
    ys.windows(2).any(|w| w[1] - w[0] < m)
}

/// Cluster centers the clustered distribution draws around for `cfg.seed`.
pub fn workload_centers(cfg: &WorkloadConfig) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    PointSource::new(cfg.dist, cfg.side, &mut rng).centers
}

pub fn gen_workload(cfg: &WorkloadConfig) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let src = PointSource::new(cfg.dist, cfg.side, &mut rng);
    let mut live: BTreeMap<u64, Point> = BTreeMap::new();
    let mut next_id = 0u64;
    let mut ops = Vec::with_capacity(cfg.n);
    let m = cfg.mix;
    while ops.len() < cfg.n {
        let r: f64 = rng.gen::<f64>() * (m.insert + m.delete + m.report + m.empty + m.k_lowest);
        let op = if r < m.insert || (r < m.insert + m.delete && live.is_empty()) {
            let (x, y) = src.draw(&mut rng);
            let p = Point::new(x, y, next_id);
            next_id += 1;
            live.insert(p.id, p);
            Op::Insert { x, y, id: Some(p.id) }
        } else if r < m.insert + m.delete {
            let id = *live.keys().nth(rng.gen_range(0..live.len())).expect("non-empty");
            live.remove(&id);
            Op::Delete { id }
        } else if r < m.insert + m.delete + m.report + m.empty {
            let pts: Vec<Point> = live.values().copied().collect();
            let (x, y) = loop {
                let (x, y) = src.query(&mut rng);
                if !near_boundary(&pts, &Point::xy(x, y)) {
                    break (x, y);
                }
            };
            if r < m.insert + m.delete + m.report {
                Op::Report { x, y }
            } else {
                Op::Empty { x, y }
            }
        } else {
            let arcs = arcs_of(&live.values().copied().collect::<Vec<_>>());
            let x = loop {
                let x = rng.gen_range(-1.0..cfg.side + 1.0);
                if !k_line_degenerate(&arcs, x) {
                    break x;
                }
            };
            Op::KLowest { x, k: rng.gen_range(1..=16) }
        };
        ops.push(op);
    }
    Trace { ops }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EngineKind {
    /// Static engine rebuilt lazily after updates.
    StaticRebuild,
    Dynamic,
    Oracle,
}

impl FromStr for EngineKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" | "static-rebuild" => Ok(EngineKind::StaticRebuild),
            "dynamic" => Ok(EngineKind::Dynamic),
            "oracle" => Ok(EngineKind::Oracle),
            _ => Err(HarnessError::Mix(format!("unknown engine {s:?}"))),
        }
    }
}

/// One line of replay output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpResult {
    pub op_index: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_ids: Option<Vec<u64>>,
    /// Emptiness answer, `null` for none; any in-disk point is a valid witness.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub witness: Option<Option<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arcs: Option<Vec<u64>>,
    pub touched_counter: u64,
    pub nanos: u64,
}

/// A present field, even `null`, is `Some`.
fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Option<u64>>, D::Error> {
    Option::<u64>::deserialize(d).map(Some)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Replay {
    pub results: Vec<OpResult>,
    pub total_nanos: u64,
    pub total_touched: u64,
    /// Static rebuilds or dynamic coverage rebuilds.
    pub rebuilds: u64,
}

impl Replay {
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            s.push_str(&serde_json::to_string(r).expect("serializable result"));
            s.push('\n');
        }
        s
    }
}

pub fn parse_results(s: &str) -> Result<Vec<OpResult>, HarnessError> {
    s.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| HarnessError::Parse { line: i + 1, msg: e.to_string() }))
        .collect()
}

enum State {
    Static { engine: Option<StaticUDRR>, arcs: Option<DeletionOnlyArcs> },
    Dynamic { engine: DynamicUDRR, arcs: Option<DynamicArcSet> },
    Oracle,
}

/// Replays `trace` on one engine. Every engine also keeps the live point
/// set to validate ids and to serve as the oracle's state.
pub fn replay(trace: &Trace, kind: EngineKind) -> Result<Replay, HarnessError> {
    let has_k = trace.ops.iter().any(|o| matches!(o, Op::KLowest { .. }));
    let mut state = match kind {
        EngineKind::StaticRebuild => State::Static { engine: None, arcs: None },
        EngineKind::Dynamic => {
            State::Dynamic { engine: DynamicUDRR::new(), arcs: has_k.then(DynamicArcSet::new) }
        }
        EngineKind::Oracle => State::Oracle,
    };
    let mut live: BTreeMap<u64, Point> = BTreeMap::new();
    let mut next_id = 0u64;
    let mut out = Replay::default();
    for (i, op) in trace.ops.iter().enumerate() {
        let t0 = Instant::now();
        let mut res =
            OpResult { op_index: i, kind: op.kind().into(), answer_ids: None, witness: None, arcs: None, touched_counter: 0, nanos: 0 };
        let eng = |source| HarnessError::Engine { op: i, source };
        match *op {
            Op::Insert { x, y, id } => {
                let id = id.unwrap_or(next_id);
                next_id = next_id.max(id + 1);
                let p = Point::try_new(x, y, id).map_err(|e| HarnessError::Replay { op: i, msg: e.to_string() })?;
                if live.contains_key(&id) {
                    return Err(eng(EngineError::DuplicatePoint(id)));
                }
                live.insert(id, p);
                match &mut state {
                    State::Static { engine, arcs } => {
                        *engine = None;
                        *arcs = None;
                    }
                    State::Dynamic { engine, arcs } => {
                        let before = engine.work();
                        engine.insert(p).map_err(eng)?;
                        if let (Some(s), Some(a)) = (arcs.as_mut(), arcs_of(&[p]).first()) {
                            s.insert(*a).map_err(|e| eng(e.into()))?;
                        }
                        res.touched_counter = engine.work() - before;
                    }
                    State::Oracle => {}
                }
            }
            Op::Delete { id } => {
                if live.remove(&id).is_none() {
                    return Err(eng(EngineError::UnknownPoint(id)));
                }
                match &mut state {
                    State::Static { engine, arcs } => {
                        *engine = None;
                        *arcs = None;
                    }
                    State::Dynamic { engine, arcs } => {
                        let before = engine.work();
                        engine.delete(id).map_err(eng)?;
                        if let Some(s) = arcs.as_mut().filter(|s| s.contains(id)) {
                            s.delete(id).map_err(|e| eng(e.into()))?;
                        }
                        res.touched_counter = engine.work() - before;
                    }
                    State::Oracle => {}
                }
            }
            Op::Report { x, y } | Op::Empty { x, y } => {
                let q = Point::xy(x, y);
                let is_report = matches!(op, Op::Report { .. });
                match &mut state {
                    State::Static { engine, .. } => {
                        if engine.is_none() {
                            let pts: Vec<Point> = live.values().copied().collect();
                            *engine = Some(StaticUDRR::build(&pts).map_err(eng)?);
                            out.rebuilds += 1;
                        }
                        let s = engine.as_ref().expect("built");
                        if is_report {
                            let (ids, cost) = s.report_cost(&q);
                            res.answer_ids = Some(ids);
                            res.touched_counter = cost.touched;
                        } else {
                            res.witness = Some(s.empty(&q).map(|p| p.id));
                        }
                    }
                    State::Dynamic { engine, .. } => {
                        let before = engine.work();
                        if is_report {
                            res.answer_ids = Some(engine.report(&q));
                        } else {
                            res.witness = Some(engine.empty(&q).map(|p| p.id));
                        }
                        res.touched_counter = engine.work() - before;
                    }
                    State::Oracle => {
                        let pts: Vec<Point> = live.values().copied().collect();
                        res.touched_counter = pts.len() as u64;
                        if is_report {
                            res.answer_ids = Some(oracle_report(&pts, &q));
                        } else {
                            res.witness = Some(oracle_empty(&pts, &q).map(|p| p.id));
                        }
                    }
                }
            }
            Op::KLowest { x, k } => {
                let ids = match &mut state {
                    State::Static { arcs, .. } => {
                        if arcs.is_none() {
                            let pts: Vec<Point> = live.values().copied().collect();
                            *arcs = Some(build_delonly(&arcs_of(&pts)).map_err(|e| eng(EngineError::Arcs(e.into())))?);
                        }
                        let d = arcs.as_ref().expect("built");
                        let before = d.touched();
                        let v = d.k_lowest(x, k, true);
                        res.touched_counter = d.touched() - before;
                        v.iter().map(|g| g.source_id).collect()
                    }
                    State::Dynamic { arcs, .. } => {
                        let s = arcs.as_ref().expect("K ops enable the arc set");
                        let before = s.stats().touched;
                        let v = s.k_lowest(x, k, true);
                        res.touched_counter = s.stats().touched - before;
                        v.iter().map(|g| g.source_id).collect()
                    }
                    State::Oracle => {
                        let pts: Vec<Point> = live.values().copied().collect();
                        res.touched_counter = pts.len() as u64;
                        oracle_k_lowest(&arcs_of(&pts), x, k)
                    }
                };
                res.arcs = Some(ids);
            }
        }
        res.nanos = t0.elapsed().as_nanos() as u64;
        out.total_nanos += res.nanos;
        out.total_touched += res.touched_counter;
        out.results.push(res);
    }
    if let State::Dynamic { engine, .. } = &state {
        out.rebuilds = engine.rebuilds();
    }
    Ok(out)
}

/// A disagreement between two result streams.
#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub op_index: usize,
    pub reason: String,
}

/// Compares answers op by op. Emptiness answers are compared by whether a
/// witness exists, since engines may pick different witnesses.
pub fn diff(a: &[OpResult], b: &[OpResult]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for (x, y) in a.iter().zip(b) {
        let m = |reason: String| Mismatch { op_index: x.op_index, reason };
        if x.op_index != y.op_index || x.kind != y.kind {
            out.push(m(format!("op {} ({}) aligned with op {} ({})", x.op_index, x.kind, y.op_index, y.kind)));
            continue;
        }
        if x.answer_ids != y.answer_ids {
            out.push(m(format!("report {:?} vs {:?}", x.answer_ids, y.answer_ids)));
        }
        if x.witness.map(|w| w.is_some()) != y.witness.map(|w| w.is_some()) {
            out.push(m(format!("emptiness {:?} vs {:?}", x.witness, y.witness)));
        }
        if x.arcs != y.arcs {
            out.push(m(format!("k-lowest {:?} vs {:?}", x.arcs, y.arcs)));
        }
    }
    if a.len() != b.len() {
        let i = a.len().min(b.len());
        out.push(Mismatch { op_index: i, reason: format!("streams have {} and {} results", a.len(), b.len()) });
    }
    out
}

/// Replays `trace` on `kind` and on the oracle, diffs the streams, and
/// checks every emptiness witness against the live set.
pub fn differential(trace: &Trace, kind: EngineKind) -> Result<Vec<Mismatch>, HarnessError> {
    let got = replay(trace, kind)?;
    let want = replay(trace, EngineKind::Oracle)?;
    let mut out = diff(&got.results, &want.results);
    let mut live: BTreeMap<u64, Point> = BTreeMap::new();
    let mut next_id = 0u64;
    for (i, op) in trace.ops.iter().enumerate() {
        match *op {
            Op::Insert { x, y, id } => {
                let id = id.unwrap_or(next_id);
                next_id = next_id.max(id + 1);
                live.insert(id, Point::new(x, y, id));
            }
            Op::Delete { id } => {
                live.remove(&id);
            }
            Op::Empty { x, y } => {
                if let Some(Some(w)) = got.results[i].witness {
                    let ok = live.get(&w).is_some_and(|p| p.dist(&Point::xy(x, y)) <= 1.0 + tolerance());
                    if !ok {
                        out.push(Mismatch { op_index: i, reason: format!("witness {w} is not in the disk") });
                    }
                }
            }
            _ => {}
        }
    }
    out.sort_by_key(|m| m.op_index);
    Ok(out)
}

/// Points per unit area in benchmark workloads; the box grows with n.
pub const BENCH_DENSITY: f64 = 4.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub engine: String,
    pub n: usize,
    pub build_nanos: u64,
    pub ops: usize,
    pub mean_touched: f64,
    /// Largest touched / (log2 n + k) over the queries.
    pub max_cost_ratio: f64,
    pub mean_op_nanos: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "engine,n,build_nanos,ops,mean_touched,max_cost_ratio,mean_op_nanos";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.1}",
            self.engine, self.n, self.build_nanos, self.ops, self.mean_touched, self.max_cost_ratio, self.mean_op_nanos
        )
    }
}

fn bench_points(n: usize, seed: u64) -> (Vec<Point>, f64) {
    let side = (n as f64 / BENCH_DENSITY).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ((0..n as u64).map(|i| Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side), i)).collect(), side)
}

/// Static build time and report cost on `queries` uniform queries.
pub fn bench_static(n: usize, seed: u64, queries: usize) -> Result<BenchRow, EngineError> {
    let (pts, side) = bench_points(n, seed);
    let t0 = Instant::now();
    let s = StaticUDRR::build(&pts)?;
    let build_nanos = t0.elapsed().as_nanos() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51a7);
    let lg = (n.max(2) as f64).log2();
    let (mut touched, mut worst) = (0u64, 0f64);
    let t1 = Instant::now();
    for _ in 0..queries {
        let q = Point::xy(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        let (ids, cost) = s.report_cost(&q);
        touched += cost.touched;
        worst = worst.max(cost.touched as f64 / (lg + ids.len() as f64));
    }
    Ok(BenchRow {
        engine: "static".into(),
        n,
        build_nanos,
        ops: queries,
        mean_touched: touched as f64 / queries.max(1) as f64,
        max_cost_ratio: worst,
        mean_op_nanos: t1.elapsed().as_nanos() as f64 / queries.max(1) as f64,
    })
}

/// Dynamic engine: `n` inserts, then `ops` mixed inserts, deletes, reports
/// and emptiness queries. The per-op counter covers both phases.
pub fn bench_dynamic(n: usize, seed: u64, ops: usize) -> Result<BenchRow, EngineError> {
    let (pts, side) = bench_points(n, seed);
    let mut d = DynamicUDRR::new();
    let t0 = Instant::now();
    for p in &pts {
        d.insert(*p)?;
    }
    let build_nanos = t0.elapsed().as_nanos() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd7);
    let mut live: Vec<u64> = pts.iter().map(|p| p.id).collect();
    let mut next = n as u64;
    let lg = (n.max(2) as f64).log2();
    let mut worst = 0f64;
    let t1 = Instant::now();
    for _ in 0..ops {
        let (x, y) = (rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        match rng.gen_range(0..4) {
            0 => {
                d.insert(Point::new(x, y, next))?;
                live.push(next);
                next += 1;
            }
            1 if !live.is_empty() => {
                let id = live.swap_remove(rng.gen_range(0..live.len()));
                d.delete(id)?;
            }
            2 => {
                let before = d.work();
                let k = d.report(&Point::xy(x, y)).len();
                worst = worst.max((d.work() - before) as f64 / (lg + k as f64));
            }
            _ => {
                d.empty(&Point::xy(x, y));
            }
        }
    }
    Ok(BenchRow {
        engine: "dynamic".into(),
        n,
        build_nanos,
        ops: n + ops,
        mean_touched: d.work() as f64 / (n + ops).max(1) as f64,
        max_cost_ratio: worst,
        mean_op_nanos: (build_nanos as f64 + t1.elapsed().as_nanos() as f64) / (n + ops).max(1) as f64,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_stacked() -> Vec<UnitArc> {
        [(0.0, 0.5), (0.0, 0.3)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| arc_from_center(Point::new(x, y, i as u64), 0.0).unwrap().unwrap())
            .collect()
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_report(&[Point::new(0.0, 0.0, 0)], &Point::xy(0.5, 0.0)), vec![0]);
        assert_eq!(oracle_level(&two_stacked(), &Point::xy(0.0, -0.6)), 1);
        assert!(oracle_k_lowest(&[], 0.0, 5).is_empty());
        assert_eq!(oracle_k_lowest(&two_stacked(), 0.0, 5), vec![1, 0]);
    }

    #[test]
    fn trace_text_round_trips() {
        let t: Trace = "I 0 0 3\nI 1.5 2\n# comment\nD 3\nQ 0.5 0.5\nE 1 1\nK 0.25 4\n".parse().unwrap();
        assert_eq!(t.ops.len(), 6);
        assert_eq!(t.to_string().parse::<Trace>().unwrap(), t);
        assert!("X 1 2".parse::<Trace>().is_err());
        assert!("I 1".parse::<Trace>().is_err());
        assert!("K 1 0".parse::<Trace>().is_err());
    }

    #[test]
    fn mix_parsing() {
        let m: Mix = "I:0.5,D:0.1,Q:0.2,E:0.2".parse().unwrap();
        assert_eq!(m.delete, 0.1);
        assert!("I:0.5,D:0.1".parse::<Mix>().is_err());
        assert!("Z:1".parse::<Mix>().is_err());
    }

    #[test]
    fn generator_is_deterministic_and_follows_the_mix() {
        let cfg = WorkloadConfig { seed: 7, n: 300, ..Default::default() };
        assert_eq!(gen_workload(&cfg), gen_workload(&cfg));
        let ins = WorkloadConfig { n: 100, mix: "I:1".parse().unwrap(), ..cfg };
        assert!(gen_workload(&ins).ops.iter().all(|o| matches!(o, Op::Insert { .. })));
        assert_eq!(gen_workload(&ins).ops.len(), 100);
    }

    #[test]
    fn empty_trace_gives_empty_results() {
        for k in [EngineKind::StaticRebuild, EngineKind::Dynamic, EngineKind::Oracle] {
            assert!(replay(&Trace::default(), k).unwrap().results.is_empty());
        }
    }

    #[test]
    fn diff_flags_an_injected_wrong_answer() {
        let t = gen_workload(&WorkloadConfig { seed: 3, n: 200, ..Default::default() });
        let a = replay(&t, EngineKind::Oracle).unwrap().results;
        assert!(diff(&a, &a).is_empty());
        let mut b = a.clone();
        let j = b.iter().position(|r| r.answer_ids.is_some()).unwrap();
        b[j].answer_ids.as_mut().unwrap().push(999_999);
        let d = diff(&a, &b);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].op_index, j);
    }

    #[test]
    fn slope_of_a_line() {
        assert!((fit_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bad_delete_is_reported() {
        let t: Trace = "I 0 0 1\nD 2\n".parse().unwrap();
        assert!(matches!(replay(&t, EngineKind::Dynamic), Err(HarnessError::Engine { op: 1, .. })));
    }
}
