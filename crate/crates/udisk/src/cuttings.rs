//! Shallow cuttings for lower unit arcs hanging below the separator `y = 0`.
//!
//! The level of a point `u` below the separator is the number of arcs
//! strictly below it, which equals the number of arc centers strictly within
//! unit distance of `u`. A (k, K)-cutting in vertex-segment form is a set of
//! vertices Q of level at most K and separator segments S crossing at most K
//! arcs, such that the region below VD(Q ∪ S) contains every point of level
//! at most k inside the slab.

use crate::geometry::{arc_arc_crossing, circle_intersections, Point, UnitArc};
use crate::hulls::{ls_alpha_hull, vertical_decomposition, CellTop, ChainEdge, SepSegment, VDecomp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct CuttingConfig {
    /// Branching factor between hierarchy levels.
    pub b: usize,
    /// Conflict constant: level i is a (k_i, C k_i)-cutting.
    pub c: f64,
    /// Size constant: level i has at most C' n / k_i vertices.
    pub c_prime: f64,
    pub eps: f64,
    pub retry_growth: f64,
    pub max_retries: u32,
    /// Coverage samples used when a refined level is validated.
    pub samples: usize,
    pub seed: u64,
}

impl Default for CuttingConfig {
    fn default() -> Self {
        let (b, c) = (4, 12.0);
        CuttingConfig {
            b,
            c,
            c_prime: 48.0,
            eps: 1.0 / (3.0 * c * b as f64),
            retry_growth: 2.0,
            max_retries: 3,
            samples: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CuttingError {
    #[error("level k = {k} failed validation after {attempts} attempts: {reason}")]
    ValidationFailure { k: usize, attempts: u32, reason: String },
}

/// Arcs sorted by center abscissa, with endpoint orders for separator counts.
#[derive(Clone, Debug, Default)]
pub struct ArcSet {
    pub arcs: Vec<UnitArc>,
    cx: Vec<f64>,
    /// (xl, xr, id) by xl
    by_xl: Vec<(f64, f64, u64)>,
    /// (xr, xl, id) by xr
    by_xr: Vec<(f64, f64, u64)>,
}

impl ArcSet {
    pub fn new(gamma: &[UnitArc]) -> Self {
        let mut arcs = gamma.to_vec();
        arcs.sort_by(|a, b| a.center.key_cmp(&b.center));
        let cx = arcs.iter().map(|a| a.center.x).collect();
        let mut by_xl: Vec<_> = arcs.iter().map(|a| (a.xl, a.xr, a.source_id)).collect();
        by_xl.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut by_xr: Vec<_> = arcs.iter().map(|a| (a.xr, a.xl, a.source_id)).collect();
        by_xr.sort_by(|a, b| a.0.total_cmp(&b.0));
        ArcSet { arcs, cx, by_xl, by_xr }
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// `[min xl - 1, max xr + 1]`, or `[-1, 1]` without arcs.
    pub fn slab(&self) -> (f64, f64) {
        if self.arcs.is_empty() {
            return (-1.0, 1.0);
        }
        (self.by_xl[0].0 - 1.0, self.by_xr[self.by_xr.len() - 1].0 + 1.0)
    }

    /// Indices of arcs with center abscissa in `[lo, hi]`.
    fn window(&self, lo: f64, hi: f64) -> Range<usize> {
        self.cx.partition_point(|&x| x < lo)..self.cx.partition_point(|&x| x <= hi)
    }

    fn near(&self, lo: f64, hi: f64) -> &[UnitArc] {
        &self.arcs[self.window(lo, hi)]
    }

    pub fn level(&self, u: &Point) -> usize {
        level_in(self.near(u.x - 1.0, u.x + 1.0), u)
    }

    pub fn below_ids(&self, u: &Point) -> Vec<u64> {
        let mut v: Vec<u64> =
            self.near(u.x - 1.0, u.x + 1.0).iter().filter(|g| g.center.dist2(u) < 1.0).map(|g| g.source_id).collect();
        v.sort_unstable();
        v
    }

    /// Ids of arcs with an endpoint in `[a, b]`, stopping after `cap + 1`.
    pub fn separator_crossings(&self, a: f64, b: f64, cap: usize) -> Vec<u64> {
        let mut out = Vec::new();
        let i = self.by_xl.partition_point(|t| t.0 < a);
        for t in &self.by_xl[i..] {
            if t.0 > b || out.len() > cap {
                break;
            }
            out.push(t.2);
        }
        let j = self.by_xr.partition_point(|t| t.0 < a);
        for t in &self.by_xr[j..] {
            if t.0 > b || out.len() > cap {
                break;
            }
            if t.1 < a {
                out.push(t.2);
            }
        }
        out.sort_unstable();
        out
    }

    /// Height of the (m+1)-th lowest arc at `x`, capped at the separator.
    pub fn level_y(&self, x: f64, m: usize) -> f64 {
        level_y_in(self.near(x - 1.0, x + 1.0), x, m)
    }
}

fn level_in(arcs: &[UnitArc], u: &Point) -> usize {
    arcs.iter().filter(|g| g.center.dist2(u) < 1.0).count()
}

fn level_y_in(arcs: &[UnitArc], x: f64, m: usize) -> f64 {
    let mut ys: Vec<f64> = arcs.iter().filter(|g| g.xl < x && x < g.xr).map(|g| g.y_unchecked(x)).collect();
    if ys.len() <= m {
        return 0.0;
    }
    let (_, y, _) = ys.select_nth_unstable_by(m, f64::total_cmp);
    y.min(0.0)
}

pub fn top_y(t: &CellTop, x: f64) -> f64 {
    match t {
        CellTop::Arc(a) | CellTop::Wing(a) => a.y_unchecked(x),
        CellTop::Separator => 0.0,
        CellTop::Floor => -1.0,
    }
}

/// Whether `g` meets the open region over `(xl, xr)` strictly between
/// `bottom` (or nothing) and `top`.
pub fn arc_meets(g: &UnitArc, xl: f64, xr: f64, top: &CellTop, bottom: Option<&CellTop>) -> bool {
    let (lo, hi) = (xl.max(g.xl), xr.min(g.xr));
    if hi <= lo {
        return false;
    }
    let mut xs = vec![lo, hi];
    for t in std::iter::once(top).chain(bottom) {
        match t {
            CellTop::Arc(a) | CellTop::Wing(a) => {
                if let Some((p1, p2)) = circle_intersections(&g.center, &a.center) {
                    xs.extend([p1.x, p2.x].into_iter().filter(|&x| x > lo && x < hi));
                }
            }
            CellTop::Floor => xs.push(g.center.x.clamp(lo, hi)),
            CellTop::Separator => {}
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.windows(2).any(|w| {
        let xm = (w[0] + w[1]) / 2.0;
        let gy = g.y_unchecked(xm);
        w[1] > w[0] && gy < top_y(top, xm) && bottom.is_none_or(|b| gy > top_y(b, xm))
    })
}

/// Whether every point just above the lower arc of the circle around `c`
/// over `(xa, xb)` has level at least `k + 1` among `arcs`.
fn arc_above_level(arcs: &[UnitArc], c: &Point, xa: f64, xb: f64, k: usize) -> bool {
    if xb <= xa {
        return true;
    }
    let on = |x: f64| Point::xy(x, c.y - (1.0 - (x - c.x).powi(2)).max(0.0).sqrt());
    let mut ev: Vec<(f64, usize)> = Vec::new();
    for (i, g) in arcs.iter().enumerate() {
        if let Some((p1, p2)) = circle_intersections(c, &g.center) {
            for p in [p1, p2] {
                if p.x > xa && p.x < xb && p.y <= c.y {
                    ev.push((p.x, i));
                }
            }
        }
    }
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first = ev.first().map_or(xb, |e| e.0);
    let w = on((xa + first) / 2.0);
    let mut inside: Vec<bool> = arcs.iter().map(|g| g.center.dist2(&w) < 1.0).collect();
    let mut count = inside.iter().filter(|&&b| b).count();
    if count <= k {
        return false;
    }
    let mut i = 0;
    while i < ev.len() {
        let x = ev[i].0;
        let mut j = i;
        while j < ev.len() && ev[j].0 == x {
            j += 1;
        }
        let next = ev.get(j).map_or(xb, |e| e.0);
        let w = on((x + next) / 2.0);
        for &(_, a) in &ev[i..j] {
            let now = arcs[a].center.dist2(&w) < 1.0;
            if now != inside[a] {
                inside[a] = now;
                if now {
                    count += 1;
                } else {
                    count -= 1;
                }
            }
        }
        if count <= k {
            return false;
        }
        i = j;
    }
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutVertex {
    pub p: Point,
    /// Ids of arcs strictly below the vertex.
    pub conflicts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutSegment {
    pub a: f64,
    pub b: f64,
    /// Ids of arcs with an endpoint on the segment.
    pub conflicts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexSegmentCutting {
    pub k: usize,
    pub big_k: usize,
    /// x-sorted
    pub q: Vec<CutVertex>,
    pub s: Vec<CutSegment>,
    pub slab: (f64, f64),
}

impl VertexSegmentCutting {
    pub fn points(&self) -> Vec<Point> {
        self.q.iter().enumerate().map(|(i, v)| Point::new(v.p.x, v.p.y, i as u64)).collect()
    }

    pub fn decomposition(&self) -> VDecomp {
        let pts = self.points();
        let segs: Vec<SepSegment> =
            self.s.iter().map(|s| SepSegment::new(Point::xy(s.a, 0.0), Point::xy(s.b, 0.0))).collect();
        vertical_decomposition(&pts, &segs).expect("cutting segments are disjoint")
    }

    fn assemble(set: &ArcSet, k: usize, big_k: usize, q: Vec<Point>, s: Vec<(f64, f64)>, slab: (f64, f64)) -> Self {
        let q = q.into_iter().map(|p| CutVertex { p, conflicts: set.below_ids(&p) }).collect();
        let s = s
            .into_iter()
            .map(|(a, b)| CutSegment { a, b, conflicts: set.separator_crossings(a, b, usize::MAX - 1) })
            .collect();
        VertexSegmentCutting { k, big_k, q, s, slab }
    }
}

/// A pseudo-trapezoid over `[xl, xr]`; bottom-open when `bottom` is `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trapezoid {
    pub xl: f64,
    pub xr: f64,
    pub top: CellTop,
    pub bottom: Option<CellTop>,
    pub conflicts: Vec<u64>,
    /// A wing-topped cell extended up to the separator.
    pub special: bool,
}

impl Trapezoid {
    pub fn contains(&self, u: &Point) -> bool {
        let t = crate::tolerance();
        u.x >= self.xl - t
            && u.x <= self.xr + t
            && u.y <= top_y(&self.top, u.x) + t
            && self.bottom.as_ref().is_none_or(|b| u.y >= top_y(b, u.x) - t)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrapezoidCutting {
    pub cells: Vec<Trapezoid>,
    pub slab: (f64, f64),
}

impl TrapezoidCutting {
    pub fn max_conflicts(&self) -> usize {
        self.cells.iter().map(|c| c.conflicts.len()).max().unwrap_or(0)
    }
}

fn conflicts_of(set: &ArcSet, xl: f64, xr: f64, top: &CellTop, bottom: Option<&CellTop>) -> Vec<u64> {
    let mut v: Vec<u64> =
        set.near(xl - 1.0, xr + 1.0).iter().filter(|g| arc_meets(g, xl, xr, top, bottom)).map(|g| g.source_id).collect();
    v.sort_unstable();
    v
}

/// Vertical decomposition of the arrangement of `arcs` below the separator
/// over the slab.
fn arrangement_cells(arcs: &[UnitArc], slab: (f64, f64)) -> Vec<(f64, f64, CellTop, Option<CellTop>)> {
    let mut xs = vec![slab.0, slab.1];
    for (i, a) in arcs.iter().enumerate() {
        xs.push(a.xl);
        xs.push(a.xr);
        for b in &arcs[i + 1..] {
            if let Some(z) = arc_arc_crossing(a, b) {
                xs.push(z.x);
            }
        }
    }
    xs.retain(|&x| x >= slab.0 && x <= slab.1);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut cells = Vec::new();
    for w in xs.windows(2) {
        let xm = (w[0] + w[1]) / 2.0;
        let mut here: Vec<&UnitArc> = arcs.iter().filter(|a| a.xl < xm && xm < a.xr).collect();
        here.sort_by(|a, b| a.y_unchecked(xm).total_cmp(&b.y_unchecked(xm)));
        let mut below: Option<CellTop> = None;
        for a in here {
            cells.push((w[0], w[1], CellTop::Arc(*a), below));
            below = Some(CellTop::Arc(*a));
        }
        cells.push((w[0], w[1], CellTop::Separator, below));
    }
    cells
}

/// An ε-cutting of `gamma` below the separator over its slab: a random
/// sample's arrangement, resampled until every cell meets at most ε|Γ| arcs.
pub fn epsilon_cutting(gamma: &[UnitArc], eps: f64, seed: u64) -> TrapezoidCutting {
    assert!(eps > 0.0 && eps <= 1.0, "eps out of range");
    let set = ArcSet::new(gamma);
    let n = gamma.len();
    let slab = set.slab();
    let r = ((4.0 / eps) * (4.0 / eps).ln()).ceil().max(1.0) as usize;
    let limit = (eps * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<TrapezoidCutting> = None;
    for round in 0..64 {
        let sample: Vec<UnitArc> = if r >= n {
            set.arcs.clone()
        } else {
            rand::seq::index::sample(&mut rng, n, r).into_iter().map(|i| set.arcs[i]).collect()
        };
        let cells: Vec<Trapezoid> = arrangement_cells(&sample, slab)
            .into_iter()
            .map(|(xl, xr, top, bottom)| Trapezoid {
                xl,
                xr,
                conflicts: conflicts_of(&set, xl, xr, &top, bottom.as_ref()),
                top,
                bottom,
                special: false,
            })
            .collect();
        let cut = TrapezoidCutting { cells, slab };
        let worst = cut.max_conflicts();
        if worst <= limit || r >= n {
            return cut;
        }
        log::debug!("epsilon cutting round {round}: a cell meets {worst} > {limit} arcs, resampling");
        if best.as_ref().is_none_or(|b| b.max_conflicts() > worst) {
            best = Some(cut);
        }
    }
    log::warn!("epsilon cutting did not certify after 64 rounds");
    best.expect("at least one round")
}

/// The trivial (n, n)-cutting: the two slab ends and the separator between them.
pub fn base_cutting(gamma: &[UnitArc]) -> VertexSegmentCutting {
    let set = ArcSet::new(gamma);
    let slab = set.slab();
    let q = vec![Point::xy(slab.0, 0.0), Point::xy(slab.1, 0.0)];
    VertexSegmentCutting::assemble(&set, gamma.len(), gamma.len(), q, vec![slab], slab)
}

/// Levels of arc crossings, computed once per arc set by walking each arc
/// and toggling the arcs it crosses.
#[derive(Clone, Debug, Default)]
pub struct CrossingProbe {
    /// Crossing points with their levels, sorted by level.
    pub points: Vec<(Point, usize)>,
}

impl CrossingProbe {
    pub fn new(set: &ArcSet, cap: usize) -> Self {
        let slope = |c: &Point, z: &Point| (z.x - c.x) / (c.y - z.y).max(1e-300);
        let mut points = Vec::new();
        for (i, g) in set.arcs.iter().enumerate() {
            let mut ev: Vec<(Point, usize, bool)> = Vec::new();
            for j in set.window(g.center.x - 2.0, g.center.x + 2.0) {
                if j == i {
                    continue;
                }
                let h = &set.arcs[j];
                if let Some(z) = arc_arc_crossing(g, h) {
                    // h lies below g just left of z when it climbs faster
                    ev.push((z, j, slope(&h.center, &z) > slope(&g.center, &z)));
                }
            }
            ev.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
            let start = Point::xy(g.xl, 0.0);
            let mut count = set.near(g.xl - 1.0, g.xl + 1.0).iter().filter(|h| h.center.dist2(&start) < 1.0).count();
            // the arc itself sits at distance one from its start
            if g.center.dist2(&start) < 1.0 {
                count -= 1;
            }
            for (z, j, below_before) in ev {
                let at = count - below_before as usize;
                if i < j && at <= cap {
                    points.push((z, at));
                }
                if below_before {
                    count -= 1;
                } else {
                    count += 1;
                }
            }
        }
        points.sort_by_key(|p| p.1);
        CrossingProbe { points }
    }

    pub fn up_to(&self, k: usize) -> &[(Point, usize)] {
        &self.points[..self.points.partition_point(|p| p.1 <= k)]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub size_ok: bool,
    pub levels_ok: bool,
    pub segments_ok: bool,
    pub coverage_ok: bool,
    pub violations: Vec<String>,
    pub samples_checked: usize,
    pub crossings_checked: usize,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.size_ok && self.levels_ok && self.segments_ok && self.coverage_ok
    }
}

const MAX_VIOLATIONS: usize = 20;

/// Checks a vertex-segment cutting against the (k, K) definition with brute
/// force levels, random coverage samples and all low crossings.
pub fn verify(gamma: &[UnitArc], cut: &VertexSegmentCutting, k: usize, big_k: usize, cfg: &CuttingConfig, samples: usize) -> VerifyReport {
    let set = ArcSet::new(gamma);
    let probe = CrossingProbe::new(&set, k);
    verify_with(&set, &probe, cut, k, big_k, cfg, samples)
}

pub fn verify_with(
    set: &ArcSet,
    probe: &CrossingProbe,
    cut: &VertexSegmentCutting,
    k: usize,
    big_k: usize,
    cfg: &CuttingConfig,
    samples: usize,
) -> VerifyReport {
    let n = set.len();
    let mut rep = VerifyReport { size_ok: true, levels_ok: true, segments_ok: true, coverage_ok: true, ..Default::default() };
    let note = |rep: &mut VerifyReport, s: String| {
        if rep.violations.len() < MAX_VIOLATIONS {
            rep.violations.push(s);
        }
    };
    if n == 0 {
        return rep;
    }
    let bound = cfg.c_prime * n as f64 / k.max(1) as f64;
    if cut.q.len() as f64 > bound {
        rep.size_ok = false;
        note(&mut rep, format!("{} vertices exceed {bound:.0}", cut.q.len()));
    }
    for v in &cut.q {
        let l = set.level(&v.p);
        if l > big_k {
            rep.levels_ok = false;
            note(&mut rep, format!("vertex ({}, {}) has level {l}", v.p.x, v.p.y));
        }
    }
    for s in &cut.s {
        let c = set.separator_crossings(s.a, s.b, big_k).len();
        if c > big_k {
            rep.segments_ok = false;
            note(&mut rep, format!("segment [{}, {}] crosses more than {big_k} arcs", s.a, s.b));
        }
    }
    let vd = cut.decomposition();
    let (sl, sr) = cut.slab;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    for _ in 0..samples {
        let x = rng.gen_range(sl..=sr);
        let y = if rng.gen_bool(0.5) { rng.gen_range(-1.0..=0.0) } else { set.level_y(x, k) - 1e-9 };
        let u = Point::xy(x, y);
        if set.level(&u) <= k {
            rep.samples_checked += 1;
            if !vd.contains(&u) {
                rep.coverage_ok = false;
                note(&mut rep, format!("sample ({x}, {y}) of level <= {k} is uncovered"));
            }
        }
    }
    for (z, _) in probe.up_to(k) {
        if z.x < sl || z.x > sr {
            continue;
        }
        rep.crossings_checked += 1;
        if !vd.contains(z) {
            rep.coverage_ok = false;
            note(&mut rep, format!("crossing ({}, {}) of level <= {k} is uncovered", z.x, z.y));
        }
    }
    rep
}

/// Farthest `x` in `(x0, xe]` found by galloping for which `ok` holds.
fn gallop(x0: f64, xe: f64, step0: f64, mut ok: impl FnMut(f64) -> bool) -> Option<f64> {
    let min_step = 1e-12 * (1.0 + x0.abs());
    let mut d = step0.max(min_step);
    let mut good: Option<f64> = None;
    let mut bad;
    loop {
        let x1 = (x0 + d).min(xe);
        if ok(x1) {
            good = Some(x1);
            if x1 >= xe {
                return good;
            }
            d *= 2.0;
        } else {
            bad = x1;
            break;
        }
    }
    let mut lo = match good {
        Some(g) => g,
        None => loop {
            d /= 2.0;
            if d < min_step {
                return None;
            }
            if ok(x0 + d) {
                break x0 + d;
            }
            bad = x0 + d;
        },
    };
    // a rough farthest point is enough
    while bad - lo > 1e-3 * (bad - x0) {
        let mid = (lo + bad) / 2.0;
        if ok(mid) {
            lo = mid;
        } else {
            bad = mid;
        }
    }
    Some(lo)
}

/// Whether the hull of `{q, r}` stays above the k-level between them.
fn pair_edge_ok(arcs: &[UnitArc], q: &Point, r: &Point, k: usize) -> bool {
    let chain = ls_alpha_hull(&[Point::new(q.x, q.y, 0), Point::new(r.x, r.y, 1)]);
    for e in &chain.edges {
        let (el, er) = e.x_range();
        let (lo, hi) = (el.max(q.x), er.min(r.x));
        if hi <= lo {
            continue;
        }
        match e {
            ChainEdge::Floor { .. } => return false,
            ChainEdge::Wing(a) | ChainEdge::Connecting(a) => {
                if !arc_above_level(arcs, &a.center, lo, hi, k) {
                    return false;
                }
            }
        }
    }
    true
}

/// One (k, big_k) level from a coarser cutting that covers level `m`.
/// Inside every cell of the coarser cutting the chain follows the m-level,
/// taking the longest steps whose edges stay above the k-level; separator
/// segments are used where the chain sits on the separator.
fn greedy_refine(set: &ArcSet, input: &VertexSegmentCutting, k: usize, m: usize, big_k: usize) -> VertexSegmentCutting {
    let vd = input.decomposition();
    let (sl, sr) = input.slab;
    let mut q: Vec<Point> = Vec::new();
    let mut segs: Vec<(f64, f64)> = Vec::new();
    let mut step = (sr - sl) / 64.0;
    for cell in &vd.cells {
        let (xl, xr) = (cell.xl.max(sl), cell.xr.min(sr));
        if xr <= xl {
            continue;
        }
        let arcs: Vec<UnitArc> =
            set.near(xl - 1.0, xr + 1.0).iter().filter(|g| arc_meets(g, xl, xr, &cell.top, None)).copied().collect();
        let mut cur = match q.last() {
            Some(p) if p.x == xl => *p,
            _ => {
                let p = Point::xy(xl, set.level_y(xl, m));
                q.push(p);
                p
            }
        };
        let end_y = set.level_y(xr, m);
        let target = |x: f64| if x >= xr { end_y } else { level_y_in(&arcs, x, m) };
        while cur.x < xr {
            let by_arc = gallop(cur.x, xr, step, |x1| {
                let r = Point::xy(x1, target(x1));
                r != cur && pair_edge_ok(&arcs, &cur, &r, k)
            });
            let by_seg = if cur.y == 0.0 {
                gallop(cur.x, xr, step, |x1| {
                    set.separator_crossings(cur.x, x1, big_k).len() <= big_k && set.level(&Point::xy(x1, 0.0)) <= big_k
                })
            } else {
                None
            };
            let next = match (by_arc, by_seg) {
                (_, Some(s)) if by_arc.is_none_or(|a| s >= a) => {
                    segs.push((cur.x, s));
                    Point::xy(s, 0.0)
                }
                (Some(a), _) => Point::xy(a, target(a)),
                _ => {
                    log::warn!("no feasible step at x = {}; forcing one", cur.x);
                    let x1 = (cur.x + step.max(1e-9)).min(xr);
                    Point::xy(x1, target(x1))
                }
            };
            step = (next.x - cur.x).max(1e-9);
            cur = next;
            q.push(cur);
        }
    }
    VertexSegmentCutting::assemble(set, k, big_k, q, segs, input.slab)
}

/// Refines a cutting covering level `B k` into a (k, C k)-cutting, retrying
/// with a larger conflict constant when validation fails.
pub fn refine(
    gamma: &[UnitArc],
    input: &VertexSegmentCutting,
    k: usize,
    cfg: &CuttingConfig,
) -> Result<(VertexSegmentCutting, u32), CuttingError> {
    let set = ArcSet::new(gamma);
    let probe = CrossingProbe::new(&set, k);
    refine_with(&set, &probe, input, k, cfg)
}

fn refine_with(
    set: &ArcSet,
    probe: &CrossingProbe,
    input: &VertexSegmentCutting,
    k: usize,
    cfg: &CuttingConfig,
) -> Result<(VertexSegmentCutting, u32), CuttingError> {
    let m = (cfg.b * k).min(input.k).max(k);
    let mut c = cfg.c;
    let mut reason = String::new();
    for attempt in 0..=cfg.max_retries {
        let big_k = (c * k as f64).floor() as usize;
        let out = greedy_refine(set, input, k, m, big_k);
        let rep = verify_with(set, probe, &out, k, big_k, cfg, cfg.samples);
        if rep.ok() {
            return Ok((out, attempt));
        }
        reason = rep.violations.join("; ");
        log::warn!("level k = {k} failed validation with C = {c}: {reason}");
        c *= cfg.retry_growth;
    }
    Err(CuttingError::ValidationFailure { k, attempts: cfg.max_retries + 1, reason })
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    /// `levels[i]` covers level `B^i k`; the last one is the base cutting.
    pub levels: Vec<VertexSegmentCutting>,
    /// Validation retries summed over levels.
    pub retries: u32,
}

/// Cuttings for `k, B k, B^2 k, ...` up to the base, built top-down.
pub fn hierarchy(gamma: &[UnitArc], k: usize, cfg: &CuttingConfig) -> Result<Hierarchy, CuttingError> {
    assert!(cfg.b >= 2 && k >= 1);
    let set = ArcSet::new(gamma);
    let n = gamma.len();
    let mut ks = vec![k];
    while *ks.last().unwrap() < n {
        ks.push(ks.last().unwrap() * cfg.b);
    }
    let top = ks.len() - 1;
    let mut base = base_cutting(gamma);
    base.k = ks[top];
    let probe = if top > 0 { CrossingProbe::new(&set, ks[top - 1]) } else { CrossingProbe::default() };
    let mut levels = vec![base];
    let mut retries = 0;
    for i in (0..top).rev() {
        let (lvl, r) = refine_with(&set, &probe, levels.last().unwrap(), ks[i], cfg)?;
        retries += r;
        levels.push(lvl);
    }
    levels.reverse();
    Ok(Hierarchy { levels, retries })
}

/// Cells of VD(Q ∪ S) over the slab; wing-topped cells are extended up to
/// the separator and marked special.
pub fn to_trapezoids(gamma: &[UnitArc], vs: &VertexSegmentCutting) -> TrapezoidCutting {
    let set = ArcSet::new(gamma);
    let (sl, sr) = vs.slab;
    let mut cells = Vec::new();
    for c in vs.decomposition().cells {
        let (xl, xr) = (c.xl.max(sl), c.xr.min(sr));
        if xr <= xl {
            continue;
        }
        let (top, special) = match c.top {
            CellTop::Wing(_) => (CellTop::Separator, true),
            t => (t, false),
        };
        let conflicts = conflicts_of(&set, xl, xr, &top, None);
        cells.push(Trapezoid { xl, xr, top, bottom: None, conflicts, special });
    }
    TrapezoidCutting { cells, slab: vs.slab }
}

/// Vertex-segment form of a trapezoid cutting: all cell corners, with
/// bottom-open cells cornered at `y = -1`, and the separator tops as segments.
pub fn trapezoids_to_vs(gamma: &[UnitArc], t: &TrapezoidCutting, k: usize) -> VertexSegmentCutting {
    let set = ArcSet::new(gamma);
    let mut q: Vec<Point> = Vec::new();
    let mut segs = Vec::new();
    for c in &t.cells {
        for x in [c.xl, c.xr] {
            q.push(Point::xy(x, top_y(&c.top, x)));
            q.push(Point::xy(x, c.bottom.as_ref().map_or(-1.0, |b| top_y(b, x))));
        }
        if c.top == CellTop::Separator {
            segs.push((c.xl, c.xr));
        }
    }
    q.sort_by(|a, b| a.key_cmp(b));
    q.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    let big_k = k + t.max_conflicts();
    VertexSegmentCutting::assemble(&set, k, big_k, q, segs, t.slab)
}
