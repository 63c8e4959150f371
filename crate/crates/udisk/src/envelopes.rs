//! Lower-envelope layers of the unit semicircles hanging below a point set,
//! and the layered reporting structure built on them.
//!
//! Layer i is the lower envelope of the semicircles of the points that
//! survive after layers 1..i-1 are removed. Its pieces are read off the
//! matching hull layer: the vertices in x-order, switching at breakpoints.

use crate::geometry::{tolerance, Point};
use crate::hulls::{breakpoint, HullError, TreeGraph};

/// One envelope piece: the semicircle of `center` restricted to `[xl, xr]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub center: Point,
    pub xl: f64,
    pub xr: f64,
}

impl Piece {
    pub fn y_at(&self, x: f64) -> f64 {
        let d = x - self.center.x;
        self.center.y - (1.0 - d * d).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnvelopeLayer {
    /// Pieces in traversal order; centers ascend in x.
    pub pieces: Vec<Piece>,
}

impl EnvelopeLayer {
    /// Builds the envelope of one hull layer from its x-sorted vertices.
    pub fn from_vertices(vs: &[Point]) -> Self {
        let mut pieces: Vec<Piece> = vs.iter().map(|&c| Piece { center: c, xl: c.x - 1.0, xr: c.x + 1.0 }).collect();
        for i in 1..pieces.len() {
            let (a, b) = (pieces[i - 1].center, pieces[i].center);
            if b.x - 1.0 >= a.x + 1.0 {
                // spans are disjoint: the envelope has a gap here
                continue;
            }
            let z = breakpoint(&a, &b);
            pieces[i - 1].xr = z;
            pieces[i].xl = z;
        }
        EnvelopeLayer { pieces }
    }

    /// Boundary abscissae of the pieces, x-sorted. Gaps contribute both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.pieces.len() + 1);
        for p in &self.pieces {
            if out.last() != Some(&p.xl) {
                out.push(p.xl);
            }
            out.push(p.xr);
        }
        out
    }

    /// Index of the piece spanning `x`; on a shared breakpoint the right piece.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let r = self.pieces.partition_point(|p| p.xl <= x);
        self.check_span(r, x)
    }

    fn check_span(&self, r: usize, x: f64) -> Option<usize> {
        let j = r.checked_sub(1)?;
        (x <= self.pieces[j].xr).then_some(j)
    }

    /// Envelope height at `x`, or `None` outside every piece.
    pub fn y_at(&self, x: f64) -> Option<f64> {
        self.locate(x).map(|j| self.pieces[j].y_at(x))
    }

    /// Some point of the layer within unit distance of `q`, which must lie
    /// on or below every center.
    pub fn emptiness(&self, q: &Point) -> Option<Point> {
        let c = self.pieces[self.locate(q.x)?].center;
        within(&c, q).then_some(c)
    }
}

fn within(c: &Point, q: &Point) -> bool {
    c.dist(q) <= 1.0 + tolerance()
}

/// Envelope layers of `q`, outermost first.
pub fn build_layers(q: &[Point]) -> Result<Vec<EnvelopeLayer>, HullError> {
    if q.is_empty() {
        return Ok(Vec::new());
    }
    let mut g = TreeGraph::build(q)?;
    Ok(g.peel().iter().map(|l| EnvelopeLayer::from_vertices(l)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocateMode {
    Cascading,
    BinarySearch,
}

/// Comparison and layer counts of one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub comparisons: u64,
    pub layers: u64,
}

/// Fractional cascading over the piece left ends of every layer. Catalog i
/// merges layer i with every second entry of catalog i+1.
#[derive(Clone, Debug, Default)]
struct Cascade {
    merged: Vec<Vec<f64>>,
    /// own[i][k]: entries of layer i among the first k of catalog i
    own: Vec<Vec<u32>>,
    /// down[i][k]: entries taken from catalog i+1 among the first k
    down: Vec<Vec<u32>>,
}

impl Cascade {
    fn build(layers: &[EnvelopeLayer]) -> Self {
        let n = layers.len();
        let mut c = Cascade { merged: vec![Vec::new(); n], own: vec![Vec::new(); n], down: vec![Vec::new(); n] };
        for i in (0..n).rev() {
            let mine: Vec<f64> = layers[i].pieces.iter().map(|p| p.xl).collect();
            let promoted: Vec<f64> = if i + 1 < n { c.merged[i + 1].iter().skip(1).step_by(2).copied().collect() } else { Vec::new() };
            let (mut m, mut own, mut down) = (Vec::new(), vec![0u32], vec![0u32]);
            let (mut a, mut b) = (0, 0);
            while a < mine.len() || b < promoted.len() {
                let take_mine = b == promoted.len() || (a < mine.len() && mine[a] <= promoted[b]);
                let (o, d) = (*own.last().unwrap(), *down.last().unwrap());
                if take_mine {
                    m.push(mine[a]);
                    own.push(o + 1);
                    down.push(d);
                    a += 1;
                } else {
                    m.push(promoted[b]);
                    own.push(o);
                    down.push(d + 1);
                    b += 1;
                }
            }
            c.merged[i] = m;
            c.own[i] = own;
            c.down[i] = down;
        }
        c
    }
}

/// Number of entries of `v` that are `<= x`, counting probes.
fn upper_bound(v: &[f64], x: f64, cmp: &mut u64) -> usize {
    let (mut lo, mut hi) = (0, v.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        *cmp += 1;
        if v[mid] <= x {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Static reporting structure over the envelope layers of a point set that
/// fits in a unit disk and lies on or above the separator `y = 0`.
#[derive(Clone, Debug)]
pub struct LayeredStructure {
    pub layers: Vec<EnvelopeLayer>,
    pub mode: LocateMode,
    cascade: Cascade,
}

impl LayeredStructure {
    pub fn new(layers: Vec<EnvelopeLayer>) -> Self {
        let cascade = Cascade::build(&layers);
        LayeredStructure { layers, mode: LocateMode::Cascading, cascade }
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.pieces.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Calls `f(i, piece)` for layers 0, 1, ... while it returns true.
    fn walk_layers(&self, x: f64, st: &mut QueryStats, mut f: impl FnMut(usize, Option<usize>, &mut QueryStats) -> bool) {
        match self.mode {
            LocateMode::BinarySearch => {
                for (i, l) in self.layers.iter().enumerate() {
                    let r = l.pieces.partition_point(|p| {
                        st.comparisons += 1;
                        p.xl <= x
                    });
                    // one more for the span check
                    st.comparisons += 1;
                    if !f(i, l.check_span(r, x), st) {
                        return;
                    }
                }
            }
            LocateMode::Cascading => {
                if self.layers.is_empty() {
                    return;
                }
                let cs = &self.cascade;
                let mut pos = upper_bound(&cs.merged[0], x, &mut st.comparisons);
                for i in 0..self.layers.len() {
                    st.comparisons += 1;
                    let r = cs.own[i][pos] as usize;
                    if !f(i, self.layers[i].check_span(r, x), st) {
                        return;
                    }
                    if i + 1 < self.layers.len() {
                        let c = 2 * cs.down[i][pos] as usize;
                        let next = &cs.merged[i + 1];
                        st.comparisons += 1;
                        pos = if c < next.len() && next[c] <= x { c + 1 } else { c };
                    }
                }
            }
        }
    }

    /// Spanning piece index of `x` in every layer.
    pub fn locate_all(&self, x: f64) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(self.layers.len());
        self.walk_layers(x, &mut QueryStats::default(), |_, j, _| {
            out.push(j);
            true
        });
        out
    }

    /// Ids of all points within unit distance of `q` (with `q.y <= 0`), sorted.
    pub fn query_report(&self, q: &Point) -> Vec<u64> {
        self.query_report_stats(q).0
    }

    pub fn query_report_stats(&self, q: &Point) -> (Vec<u64>, QueryStats) {
        let mut st = QueryStats::default();
        let mut out = Vec::new();
        self.walk_layers(q.x, &mut st, |i, j, st| {
            st.layers += 1;
            let Some(j) = j else { return false };
            let ps = &self.layers[i].pieces;
            st.comparisons += 1;
            if !within(&ps[j].center, q) {
                return false;
            }
            out.push(ps[j].center.id);
            for k in (0..j).rev() {
                st.comparisons += 1;
                if !within(&ps[k].center, q) {
                    break;
                }
                out.push(ps[k].center.id);
            }
            for p in &ps[j + 1..] {
                st.comparisons += 1;
                if !within(&p.center, q) {
                    break;
                }
                out.push(p.center.id);
            }
            true
        });
        out.sort_unstable();
        (out, st)
    }

    /// Some point within unit distance of `q`, decided on the outer layer.
    pub fn query_emptiness(&self, q: &Point) -> Option<Point> {
        self.layers.first()?.emptiness(q)
    }
}

pub fn build_structure(q: &[Point]) -> Result<LayeredStructure, HullError> {
    Ok(LayeredStructure::new(build_layers(q)?))
}

pub fn query_report(s: &LayeredStructure, q: &Point) -> Vec<u64> {
    s.query_report(q)
}

pub fn query_emptiness(s: &LayeredStructure, q: &Point) -> Option<Point> {
    s.query_emptiness(q)
}
