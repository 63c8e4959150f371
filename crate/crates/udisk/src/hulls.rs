//! Line-separated alpha-hulls (alpha = -1) of points below the separator,
//! their vertical decompositions, and the tree graph that peels lower
//! alpha-hull layers of points above the separator.

use crate::geometry::{
    concave_arc, connecting_arc, far_away, tolerance, wings, Point, UnitArc,
};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HullError {
    #[error("points {0} and {1} are more than 2 apart")]
    DiameterExceeded(u64, u64),
    #[error("points {0} and {1} coincide")]
    Coincident(u64, u64),
    #[error("separator segments [{0}, {1}] and [{2}, {3}] overlap")]
    OverlappingSegments(f64, f64, f64, f64),
}

/// One piece of a hull chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChainEdge {
    /// Horizontal piece at `y = -1`; the outer ones are unbounded.
    Floor { xl: f64, xr: f64 },
    Wing(UnitArc),
    Connecting(UnitArc),
}

impl ChainEdge {
    pub fn x_range(&self) -> (f64, f64) {
        match self {
            ChainEdge::Floor { xl, xr } => (*xl, *xr),
            ChainEdge::Wing(a) | ChainEdge::Connecting(a) => (a.xl, a.xr),
        }
    }

    pub fn y_at(&self, x: f64) -> f64 {
        match self {
            ChainEdge::Floor { .. } => -1.0,
            ChainEdge::Wing(a) | ChainEdge::Connecting(a) => a.y_unchecked(x),
        }
    }
}

/// Boundary of H(Q), left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct HullChain {
    pub vertices: Vec<Point>,
    pub edges: Vec<ChainEdge>,
}

impl HullChain {
    /// Height of the boundary above `x`.
    pub fn height_at(&self, x: f64) -> f64 {
        let i = self.edges.partition_point(|e| e.x_range().1 < x);
        match self.edges.get(i) {
            Some(e) => e.y_at(x),
            None => -1.0,
        }
    }

    /// Whether `u` lies in the hull, boundary included.
    pub fn contains(&self, u: &Point) -> bool {
        u.y <= self.height_at(u.x) + tolerance()
    }
}

fn push_bridge(edges: &mut Vec<ChainEdge>, q: &Point, r: &Point) {
    let (_, rq) = wings(q).expect("relevant point");
    let (lr, _) = wings(r).expect("relevant point");
    edges.push(ChainEdge::Wing(rq.arc));
    edges.push(ChainEdge::Floor { xl: rq.vertex.x, xr: lr.vertex.x });
    edges.push(ChainEdge::Wing(lr.arc));
}

/// Scans x-sorted points below the separator `y = 0` and returns the
/// boundary of their line-separated alpha-hull.
pub fn ls_alpha_hull(q: &[Point]) -> HullChain {
    let mut pts: Vec<Point> = q.iter().copied().filter(|p| p.y > -1.0).collect();
    if !pts.windows(2).all(|w| w[0].key_cmp(&w[1]).is_le()) {
        pts.sort_by(|a, b| a.key_cmp(b));
    }
    let tau = tolerance();
    let mut st: Vec<Point> = Vec::new();
    for p in pts {
        loop {
            let Some(top) = st.last().copied() else {
                st.push(p);
                break;
            };
            if top.x == p.x && top.y == p.y {
                break;
            }
            if far_away(&top, &p) {
                st.push(p);
                break;
            }
            let (_, rw) = wings(&top).expect("relevant point");
            if p.x <= rw.vertex.x && p.y <= rw.arc.y_unchecked(p.x.max(top.x)) + tau {
                break;
            }
            let g = connecting_arc(&top, &p).ok().flatten();
            let prune = match g {
                None => true,
                Some(g) => st.len() >= 2 && st[st.len() - 2].dist(&g.center) < 1.0 - tau,
            };
            if prune {
                st.pop();
                continue;
            }
            st.push(p);
            break;
        }
    }
    let mut edges = Vec::new();
    if st.is_empty() {
        edges.push(ChainEdge::Floor { xl: f64::NEG_INFINITY, xr: f64::INFINITY });
        return HullChain { vertices: st, edges };
    }
    let (lw, _) = wings(&st[0]).expect("relevant point");
    edges.push(ChainEdge::Floor { xl: f64::NEG_INFINITY, xr: lw.vertex.x });
    edges.push(ChainEdge::Wing(lw.arc));
    for w in st.windows(2) {
        if far_away(&w[0], &w[1]) {
            push_bridge(&mut edges, &w[0], &w[1]);
        } else {
            match connecting_arc(&w[0], &w[1]).ok().flatten() {
                Some(g) => edges.push(ChainEdge::Connecting(g)),
                // only reachable through rounding at the far-away threshold
                None => push_bridge(&mut edges, &w[0], &w[1]),
            }
        }
    }
    let last = st[st.len() - 1];
    let (_, rw) = wings(&last).expect("relevant point");
    edges.push(ChainEdge::Wing(rw.arc));
    edges.push(ChainEdge::Floor { xl: rw.vertex.x, xr: f64::INFINITY });
    HullChain { vertices: st, edges }
}

/// A segment of the separator `y = 0` between two points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SepSegment {
    pub left: Point,
    pub right: Point,
}

impl SepSegment {
    pub fn new(a: Point, b: Point) -> Self {
        if a.x <= b.x {
            SepSegment { left: a, right: b }
        } else {
            SepSegment { left: b, right: a }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellTop {
    Arc(UnitArc),
    /// A wing arc of a hull vertex, centered on the separator.
    Wing(UnitArc),
    Separator,
    /// The line `y = -1`; no arc centered above the separator reaches below it.
    Floor,
}

/// A bottom-open cell between two vertical walls.
#[derive(Clone, Debug, PartialEq)]
pub struct VCell {
    pub xl: f64,
    pub xr: f64,
    pub top: CellTop,
    pub conflicts: Vec<u64>,
}

impl VCell {
    pub fn top_y(&self, x: f64) -> f64 {
        match &self.top {
            CellTop::Arc(a) | CellTop::Wing(a) => a.y_unchecked(x),
            CellTop::Separator => 0.0,
            CellTop::Floor => -1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VDecomp {
    pub cells: Vec<VCell>,
}

impl VDecomp {
    /// Index of the cell whose half-open x-range `[xl, xr)` holds `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let i = self.cells.partition_point(|c| c.xr <= x);
        (i < self.cells.len() && self.cells[i].xl <= x).then_some(i)
    }

    pub fn top_at(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => self.cells[i].top_y(x),
            None => match self.cells.last() {
                Some(c) if x == c.xr => c.top_y(x),
                _ => f64::NEG_INFINITY,
            },
        }
    }

    /// Whether `u` lies in the decomposed region, boundary included.
    pub fn contains(&self, u: &Point) -> bool {
        let tau = tolerance();
        let mut best = self.top_at(u.x);
        // walls are shared, so take the higher top on either side of one
        for dx in [-tau, tau] {
            best = best.max(self.top_at(u.x + dx));
        }
        u.y <= best + tau
    }
}

/// Decomposition of the region below the upper envelope of H(Q) and S.
pub fn vertical_decomposition(q: &[Point], s: &[SepSegment]) -> Result<VDecomp, HullError> {
    let mut segs: Vec<(f64, f64)> = s.iter().map(|g| (g.left.x, g.right.x)).collect();
    segs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tau = tolerance();
    for w in segs.windows(2) {
        if w[1].0 < w[0].1 - tau {
            return Err(HullError::OverlappingSegments(w[0].0, w[0].1, w[1].0, w[1].1));
        }
    }
    let chain = ls_alpha_hull(q);
    let mut cells: Vec<VCell> = Vec::new();
    let mut push = |xl: f64, xr: f64, top: CellTop| {
        if xr > xl {
            cells.push(VCell { xl, xr, top, conflicts: Vec::new() });
        }
    };
    let mut si = 0;
    let mut x = f64::NEG_INFINITY;
    for e in &chain.edges {
        let (_, er) = e.x_range();
        while x < er {
            if si < segs.len() && segs[si].1 <= x {
                si += 1;
                continue;
            }
            if si < segs.len() && segs[si].0 <= x {
                push(x, segs[si].1, CellTop::Separator);
                x = segs[si].1;
                si += 1;
                continue;
            }
            let stop = if si < segs.len() { er.min(segs[si].0) } else { er };
            let top = match e {
                ChainEdge::Floor { .. } => CellTop::Floor,
                ChainEdge::Wing(a) => CellTop::Wing(*a),
                ChainEdge::Connecting(a) => CellTop::Arc(*a),
            };
            push(x, stop, top);
            x = stop;
        }
    }
    Ok(VDecomp { cells })
}

const NONE: usize = usize::MAX;

#[derive(Clone, Debug)]
struct Node {
    lo: usize,
    hi: usize,
    left: usize,
    right: usize,
    parent: usize,
    height: u32,
    bridge: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Adj {
    height: u32,
    other: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PeelCounters {
    pub promotions: u64,
    pub confirmations: u64,
    pub fallbacks: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Left,
    Right,
}

impl Dir {
    fn flip(self) -> Dir {
        match self {
            Dir::Left => Dir::Right,
            Dir::Right => Dir::Left,
        }
    }
}

fn concave_center(a: &Point, b: &Point) -> Option<Point> {
    concave_arc(a, b).map(|g| g.center)
}

/// Upper crossing of the vertical line at `x` with the unit circle around `c`.
fn upper_y(c: Option<Point>, x: f64) -> f64 {
    match c {
        Some(c) if (x - c.x).abs() <= 1.0 => c.y + (1.0 - (x - c.x).powi(2)).sqrt(),
        _ => f64::INFINITY,
    }
}

/// Height of the lower unit semicircle around `p` at `x`, clamped to its span.
fn lower_y(p: &Point, x: f64) -> f64 {
    p.y - (1.0 - (x - p.x).powi(2)).max(0.0).sqrt()
}

/// Abscissa where the lower envelope of the semicircles of `a` and `b`
/// switches from `a` to `b`, for `a` left of `b`. Semicircles end at their
/// center height, so the switch is either a crossing or a jump at an end.
pub fn breakpoint(a: &Point, b: &Point) -> f64 {
    let (s, e) = (b.x - 1.0, a.x + 1.0);
    if s >= e {
        return (s + e) / 2.0;
    }
    if lower_y(a, s) >= b.y {
        return s;
    }
    if lower_y(b, e) >= a.y {
        return e;
    }
    concave_center(a, b).map_or((s + e) / 2.0, |c| c.x.clamp(s, e))
}

/// Balanced tree over x-sorted points. Every internal node stores the common
/// tangent arc of its children's lower alpha-hulls; the arcs are the edges of
/// the graph and are indexed per endpoint by node height.
#[derive(Clone, Debug)]
pub struct TreeGraph {
    pts: Vec<Point>,
    nodes: Vec<Node>,
    leaf: Vec<usize>,
    root: usize,
    ll: Vec<Vec<Adj>>,
    lr: Vec<Vec<Adj>>,
    alive: BTreeSet<usize>,
    counters: PeelCounters,
}

impl TreeGraph {
    pub fn build(q: &[Point]) -> Result<Self, HullError> {
        let mut pts = q.to_vec();
        pts.sort_by(|a, b| a.key_cmp(b));
        for w in pts.windows(2) {
            if w[0].x == w[1].x && w[0].y == w[1].y {
                return Err(HullError::Coincident(w[0].id, w[1].id));
            }
        }
        check_diameter(&pts)?;
        let n = pts.len();
        let mut g = TreeGraph {
            pts,
            nodes: Vec::with_capacity(2 * n),
            leaf: vec![NONE; n],
            root: NONE,
            ll: vec![Vec::new(); n],
            lr: vec![Vec::new(); n],
            alive: (0..n).collect(),
            counters: PeelCounters::default(),
        };
        if n > 0 {
            g.root = g.build_node(0, n, NONE);
        }
        Ok(g)
    }

    fn build_node(&mut self, lo: usize, hi: usize, parent: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, left: NONE, right: NONE, parent, height: 0, bridge: None });
        if hi - lo == 1 {
            self.leaf[lo] = id;
            return id;
        }
        let mid = (lo + hi) / 2;
        let l = self.build_node(lo, mid, id);
        let r = self.build_node(mid, hi, id);
        let height = 1 + self.nodes[l].height.max(self.nodes[r].height);
        let n = &mut self.nodes[id];
        n.left = l;
        n.right = r;
        n.height = height;
        let b = self.walk_bridge(id);
        self.set_bridge(id, b);
        id
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.len()
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.alive.contains(&i)
    }

    pub fn point(&self, i: usize) -> Point {
        self.pts[i]
    }

    pub fn counters(&self) -> PeelCounters {
        self.counters
    }

    /// Number of tangent arcs currently stored.
    pub fn edge_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.bridge.is_some()).count()
    }

    /// The stored tangent arcs as (left, right) point pairs.
    pub fn edges(&self) -> Vec<(Point, Point)> {
        self.nodes
            .iter()
            .filter_map(|n| n.bridge.map(|(s, t)| (self.pts[s], self.pts[t])))
            .collect()
    }

    fn nb(&self, p: usize, dir: Dir, h: u32) -> Option<usize> {
        let list = match dir {
            Dir::Left => &self.ll[p],
            Dir::Right => &self.lr[p],
        };
        let i = list.partition_point(|a| a.height <= h);
        (i > 0).then(|| list[i - 1].other)
    }

    fn first_alive(&self, v: usize) -> Option<usize> {
        let n = &self.nodes[v];
        self.alive.range(n.lo..n.hi).next().copied()
    }

    fn last_alive(&self, v: usize) -> Option<usize> {
        let n = &self.nodes[v];
        self.alive.range(n.lo..n.hi).next_back().copied()
    }

    fn set_bridge(&mut self, v: usize, b: Option<(usize, usize)>) {
        let h = self.nodes[v].height;
        if let Some((s, t)) = self.nodes[v].bridge {
            self.lr[s].retain(|a| a.height != h);
            self.ll[t].retain(|a| a.height != h);
        }
        if let Some((s, t)) = b {
            let i = self.lr[s].partition_point(|a| a.height < h);
            self.lr[s].insert(i, Adj { height: h, other: t });
            let i = self.ll[t].partition_point(|a| a.height < h);
            self.ll[t].insert(i, Adj { height: h, other: s });
        }
        self.nodes[v].bridge = b;
    }

    /// Abscissa range of the envelope piece of `x` in the hull at height `h`.
    fn piece(&self, x: usize, h: u32) -> (f64, f64) {
        let p = &self.pts[x];
        let lo = self.nb(x, Dir::Left, h).map_or(p.x - 1.0, |a| breakpoint(&self.pts[a], p));
        let hi = self.nb(x, Dir::Right, h).map_or(p.x + 1.0, |b| breakpoint(p, &self.pts[b]));
        (lo, hi)
    }

    /// Whether `(s, t)` is the tangent pair of node `v`: their breakpoint
    /// must lie on the pieces of both in the children's lower envelopes.
    fn is_tangent(&self, v: usize, s: usize, t: usize) -> bool {
        let z = breakpoint(&self.pts[s], &self.pts[t]);
        let tau = tolerance();
        let (ls, rs) = self.piece(s, self.nodes[self.nodes[v].left].height);
        let (lt, rt) = self.piece(t, self.nodes[self.nodes[v].right].height);
        z >= ls.max(lt) - tau && z <= rs.min(rt) + tau
    }

    /// Finds the tangent pair of node `v` by sweeping the children's lower
    /// envelopes from the left end of the right one until they cross.
    fn walk_bridge(&self, v: usize) -> Option<(usize, usize)> {
        let (l, r) = (self.nodes[v].left, self.nodes[v].right);
        let (hl, hr) = (self.nodes[l].height, self.nodes[r].height);
        let mut u = self.last_alive(l)?;
        let mut w = self.first_alive(r)?;
        let start = self.pts[w].x - 1.0;
        while self.piece(u, hl).0 > start {
            match self.nb(u, Dir::Left, hl) {
                Some(a) => u = a,
                None => break,
            }
        }
        let mut prev_u: Option<usize> = None;
        let mut x0 = start;
        loop {
            let (pu, pw) = (&self.pts[u], &self.pts[w]);
            // the left envelope may jump up where the previous piece ended
            if let Some(a) = prev_u {
                if lower_y(pu, x0) >= lower_y(pw, x0) {
                    return Some((a, w));
                }
            }
            let ru = self.piece(u, hl).1;
            let rw = self.piece(w, hr).1;
            let x = ru.min(rw);
            if lower_y(pu, x) >= lower_y(pw, x) {
                return Some((u, w));
            }
            x0 = x;
            if ru < rw {
                match self.nb(u, Dir::Right, hl) {
                    Some(b) => {
                        prev_u = Some(u);
                        u = b;
                    }
                    None => return Some((u, w)),
                }
            } else {
                prev_u = None;
                match self.nb(w, Dir::Right, hr) {
                    Some(b) => w = b,
                    None => return Some((u, w)),
                }
            }
        }
    }

    /// Pulls `p` upward along its vertical line until it leaves the merged
    /// hull of node `v`. `far` and `near` are the old neighbors of `p` in its
    /// child hull (away from and toward `c`), `c` the other tangent endpoint.
    fn pull_up(
        &mut self,
        v: usize,
        p: usize,
        p_left: bool,
        mut far: Option<usize>,
        mut near: Option<usize>,
        mut c: usize,
    ) -> Option<(usize, usize)> {
        let (l, r) = (self.nodes[v].left, self.nodes[v].right);
        let (hc, hs) = if p_left {
            (self.nodes[l].height, self.nodes[r].height)
        } else {
            (self.nodes[r].height, self.nodes[l].height)
        };
        // `far` moves toward p, `near` toward p from the other side, `c` toward p
        let far_dir = if p_left { Dir::Right } else { Dir::Left };
        let near_dir = far_dir.flip();
        let c_dir = near_dir;
        let px = self.pts[p].x;
        let pt = |i: usize| self.pts[i];
        let cap = 2 * (self.nodes[v].hi - self.nodes[v].lo) + 4;
        for _ in 0..cap {
            let same = far.is_some() && far == near;
            let fa = if same { None } else { far.and_then(|x| self.nb(x, far_dir, hc).map(|y| (x, y))) };
            let nb_ = if same { None } else { near.and_then(|x| self.nb(x, near_dir, hc).map(|y| (x, y))) };
            let cc = self.nb(c, c_dir, hs);
            let a_star = fa.map_or(f64::INFINITY, |(x, y)| upper_y(concave_center(&pt(x), &pt(y)), px));
            let b_star = nb_.map_or(f64::INFINITY, |(x, y)| upper_y(concave_center(&pt(x), &pt(y)), px));
            let c_star = cc.map_or(f64::INFINITY, |y| upper_y(concave_center(&pt(c), &pt(y)), px));
            let e1 = far.map_or(f64::INFINITY, |x| upper_y(concave_center(&pt(x), &pt(c)), px));
            let e2 = near.map_or(f64::INFINITY, |x| upper_y(concave_center(&pt(x), &pt(c)), px));
            let m = a_star.min(b_star).min(c_star);
            let pick = |x: usize| if p_left { (x, c) } else { (c, x) };
            if e1.is_finite() && e1 <= m && e1 <= e2 {
                return Some(pick(far.unwrap()));
            }
            if e2.is_finite() && e2 <= m {
                return Some(pick(near.unwrap()));
            }
            if !m.is_finite() {
                return None;
            }
            if a_star == m {
                far = fa.map(|(_, y)| y);
                self.counters.promotions += 1;
            } else if c_star == m {
                c = cc.unwrap();
                self.counters.promotions += 1;
            } else {
                near = nb_.map(|(_, y)| y);
                self.counters.confirmations += 1;
            }
        }
        None
    }

    /// Deletes the point at sorted index `p`; returns false if it was not alive.
    pub fn delete(&mut self, p: usize) -> bool {
        if !self.alive.contains(&p) {
            return false;
        }
        // neighbors in the child hull are read before any level changes
        let mut plan = Vec::new();
        let mut child = self.leaf[p];
        let mut v = self.nodes[child].parent;
        while v != NONE {
            if let Some((s, t)) = self.nodes[v].bridge {
                if s == p || t == p {
                    let h = self.nodes[child].height;
                    let a = self.nb(p, Dir::Left, h);
                    let b = self.nb(p, Dir::Right, h);
                    plan.push((v, s == p, a, b, if s == p { t } else { s }));
                }
            }
            child = v;
            v = self.nodes[v].parent;
        }
        self.alive.remove(&p);
        for (v, p_left, a, b, c) in plan {
            let side = if p_left { self.nodes[v].left } else { self.nodes[v].right };
            if self.first_alive(side).is_none() {
                self.set_bridge(v, None);
                continue;
            }
            let (far, near) = if p_left { (a, b) } else { (b, a) };
            let got = self.pull_up(v, p, p_left, far, near, c);
            let nb = match got {
                Some((s, t)) if self.alive.contains(&s) && self.alive.contains(&t) && self.is_tangent(v, s, t) => {
                    Some((s, t))
                }
                _ => {
                    self.counters.fallbacks += 1;
                    log::debug!("pull-up at node {v} fell back to a tangent walk");
                    self.walk_bridge(v)
                }
            };
            self.set_bridge(v, nb);
        }
        debug_assert!(self.ll[p].is_empty() && self.lr[p].is_empty());
        true
    }

    /// Sorted indices of the vertices of the current lower alpha-hull.
    pub fn current_layer(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.alive.iter().next().copied();
        while let Some(x) = cur {
            out.push(x);
            cur = self.lr[x].last().map(|a| a.other);
        }
        out
    }

    /// Repeatedly extracts and deletes the current lower alpha-hull.
    pub fn peel(&mut self) -> Vec<Vec<Point>> {
        let mut layers = Vec::new();
        while !self.alive.is_empty() {
            let layer = self.current_layer();
            for &i in &layer {
                self.delete(i);
            }
            layers.push(layer.into_iter().map(|i| self.pts[i]).collect());
        }
        layers
    }
}

fn check_diameter(pts: &[Point]) -> Result<(), HullError> {
    if pts.len() < 2 {
        return Ok(());
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    if (x1 - x0).powi(2) + (y1 - y0).powi(2) <= 4.0 {
        return Ok(());
    }
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            if a.dist2(b) > 4.0 {
                return Err(HullError::DiameterExceeded(a.id, b.id));
            }
        }
    }
    Ok(())
}

pub fn build_tree_graph(q: &[Point]) -> Result<TreeGraph, HullError> {
    TreeGraph::build(q)
}

/// Lower alpha-hull layers, each in x-order.
pub fn peel_layers(mut g: TreeGraph) -> Vec<Vec<Point>> {
    g.peel()
}
