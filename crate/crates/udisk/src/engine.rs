//! Static and dynamic unit-disk reporting and emptiness engines.
//!
//! A query locates its cell C in the conforming coverage and reports all of
//! P(C). For every other non-empty neighbor C' it queries the structure of
//! the edge of C' whose supporting line separates C' from C, in the frame
//! where that line is `y = 0` with the points of C' above it.

use crate::coverage::{Cell, CellKey, Coverage, CoverageError};
use crate::cuttings::CuttingConfig;
use crate::dynarcs::{DynError, DynamicArcSet};
use crate::envelopes::{build_structure, LayeredStructure};
use crate::geometry::{arc_below_point, arc_from_center, Point, UnitArc};
use crate::hulls::HullError;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("point {0} is not resident")]
    UnknownPoint(u64),
    #[error("point {0} is already resident")]
    DuplicatePoint(u64),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Arcs(#[from] DynError),
}

impl From<CoverageError> for EngineError {
    fn from(e: CoverageError) -> Self {
        match e {
            CoverageError::UnknownPoint(id) => EngineError::UnknownPoint(id),
        }
    }
}

/// Cell edges, indexed as stored per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    Bottom = 0,
    Top = 1,
    Left = 2,
    Right = 3,
}

pub const EDGES: [Edge; 4] = [Edge::Bottom, Edge::Top, Edge::Left, Edge::Right];

/// Translation, then an optional axis swap, then optional reflections.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameTransform {
    pub dx: f64,
    pub dy: f64,
    pub swap: bool,
    pub flip_x: bool,
    pub flip_y: bool,
}

impl FrameTransform {
    pub const IDENTITY: FrameTransform = FrameTransform { dx: 0.0, dy: 0.0, swap: false, flip_x: false, flip_y: false };

    /// Maps the supporting line of `edge` to `y = 0` with the cell above it.
    pub fn for_edge(cell: &Cell, edge: Edge) -> Self {
        let (x0, x1) = cell.x_range;
        let (y0, y1) = cell.y_range;
        let f = FrameTransform::IDENTITY;
        match edge {
            Edge::Bottom => FrameTransform { dy: -y0, ..f },
            Edge::Top => FrameTransform { dy: -y1, flip_y: true, ..f },
            Edge::Left => FrameTransform { dx: -x0, swap: true, ..f },
            Edge::Right => FrameTransform { dx: -x1, swap: true, flip_y: true, ..f },
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        let (mut u, mut v) = (p.x + self.dx, p.y + self.dy);
        if self.swap {
            std::mem::swap(&mut u, &mut v);
        }
        if self.flip_x {
            u = -u;
        }
        if self.flip_y {
            v = -v;
        }
        Point::new(u, v, p.id)
    }

    pub fn invert(&self, p: &Point) -> Point {
        let (mut u, mut v) = (p.x, p.y);
        if self.flip_x {
            u = -u;
        }
        if self.flip_y {
            v = -v;
        }
        if self.swap {
            std::mem::swap(&mut u, &mut v);
        }
        Point::new(u - self.dx, v - self.dy, p.id)
    }
}

/// The edge of `other` whose line separates it from `cell`; the nearer line
/// when both axes separate, the vertical one on ties.
pub fn separating_edge(other: &Cell, cell: &Cell) -> Option<Edge> {
    let vertical = if other.x_range.1 <= cell.x_range.0 {
        Some((Edge::Right, cell.x_range.0 - other.x_range.1))
    } else if other.x_range.0 >= cell.x_range.1 {
        Some((Edge::Left, other.x_range.0 - cell.x_range.1))
    } else {
        None
    };
    let horizontal = if other.y_range.1 <= cell.y_range.0 {
        Some((Edge::Top, cell.y_range.0 - other.y_range.1))
    } else if other.y_range.0 >= cell.y_range.1 {
        Some((Edge::Bottom, other.y_range.0 - cell.y_range.1))
    } else {
        None
    };
    match (vertical, horizontal) {
        (Some((v, gv)), Some((h, gh))) => Some(if gh < gv { h } else { v }),
        (Some((v, _)), None) => Some(v),
        (None, Some((h, _))) => Some(h),
        (None, None) => None,
    }
}

#[derive(Clone, Debug)]
struct StaticCell {
    cell: Cell,
    structures: [LayeredStructure; 4],
}

#[derive(Clone, Debug, Default)]
pub struct StaticUDRR {
    pub coverage: Coverage,
    cells: HashMap<CellKey, StaticCell>,
    points: HashMap<u64, Point>,
}

/// Work done by one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryCost {
    /// Points and envelope pieces examined plus search comparisons.
    pub touched: u64,
    pub structures: u64,
}

pub fn build_static(points: &[Point]) -> Result<StaticUDRR, EngineError> {
    StaticUDRR::build(points)
}

pub fn static_report(s: &StaticUDRR, q: &Point) -> Vec<u64> {
    s.report(q)
}

pub fn static_empty(s: &StaticUDRR, q: &Point) -> Option<Point> {
    s.empty(q)
}

impl StaticUDRR {
    pub fn build(points: &[Point]) -> Result<Self, EngineError> {
        let mut ids = HashMap::with_capacity(points.len());
        for p in points {
            if ids.insert(p.id, *p).is_some() {
                return Err(EngineError::DuplicatePoint(p.id));
            }
        }
        let coverage = Coverage::build(points);
        let mut cells = HashMap::new();
        for (key, rec) in coverage.nonempty_cells() {
            let pts: Vec<Point> = rec.points.values().copied().collect();
            let mut structures = Vec::with_capacity(4);
            for e in EDGES {
                let f = FrameTransform::for_edge(&rec.cell, e);
                let local: Vec<Point> = pts.iter().map(|p| f.apply(p)).collect();
                structures.push(build_structure(&local)?);
            }
            let structures: [LayeredStructure; 4] = structures.try_into().expect("four edges");
            cells.insert(*key, StaticCell { cell: rec.cell.clone(), structures });
        }
        Ok(StaticUDRR { coverage, cells, points: ids })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nonempty_cells(&self) -> usize {
        self.cells.len()
    }

    /// Envelope pieces summed over all layers of all structures.
    pub fn total_pieces(&self) -> usize {
        self.cells
            .values()
            .flat_map(|c| c.structures.iter())
            .flat_map(|s| s.layers.iter())
            .map(|l| l.pieces.len())
            .sum()
    }

    pub fn report(&self, q: &Point) -> Vec<u64> {
        self.report_cost(q).0
    }

    pub fn report_cost(&self, q: &Point) -> (Vec<u64>, QueryCost) {
        let mut cost = QueryCost { touched: self.coverage.locate_cost(), structures: 0 };
        let Some((key, rec)) = self.coverage.locate(q) else {
            return (Vec::new(), cost);
        };
        let mut out: Vec<u64> = rec.points.values().map(|p| p.id).collect();
        cost.touched += out.len() as u64;
        for nk in &rec.neighbors {
            if *nk == key {
                continue;
            }
            let Some(sc) = self.cells.get(nk) else { continue };
            let Some(e) = separating_edge(&sc.cell, &rec.cell) else { continue };
            let f = FrameTransform::for_edge(&sc.cell, e);
            let (ids, st) = sc.structures[e as usize].query_report_stats(&f.apply(q));
            cost.touched += st.comparisons + st.layers;
            cost.structures += 1;
            out.extend(ids);
        }
        out.sort_unstable();
        (out, cost)
    }

    pub fn empty(&self, q: &Point) -> Option<Point> {
        let (key, rec) = self.coverage.locate(q)?;
        if let Some(p) = rec.points.values().next() {
            return Some(*p);
        }
        for nk in &rec.neighbors {
            if *nk == key {
                continue;
            }
            let Some(sc) = self.cells.get(nk) else { continue };
            let Some(e) = separating_edge(&sc.cell, &rec.cell) else { continue };
            let f = FrameTransform::for_edge(&sc.cell, e);
            if let Some(w) = sc.structures[e as usize].query_emptiness(&f.apply(q)) {
                return Some(self.points[&w.id]);
            }
        }
        None
    }
}

#[derive(Debug)]
struct DynCell {
    cell: Cell,
    edges: [DynamicArcSet; 4],
}

impl DynCell {
    fn new(cell: Cell, cfg: &CuttingConfig) -> Self {
        let edges = std::array::from_fn(|_| DynamicArcSet::with_config(cfg.clone()));
        DynCell { cell, edges }
    }

    fn arc(&self, e: Edge, p: &Point) -> Option<UnitArc> {
        let local = FrameTransform::for_edge(&self.cell, e).apply(p);
        arc_from_center(local, 0.0).expect("cell points lie on the canonical side")
    }

    fn insert(&mut self, p: &Point) -> Result<(), DynError> {
        for e in EDGES {
            if let Some(a) = self.arc(e, p) {
                self.edges[e as usize].insert(a)?;
            }
        }
        Ok(())
    }

    fn delete(&mut self, id: u64) -> Result<(), DynError> {
        for s in &mut self.edges {
            if s.contains(id) {
                s.delete(id)?;
            }
        }
        Ok(())
    }

    fn work(&self) -> u64 {
        self.edges.iter().map(set_work).sum()
    }
}

fn set_work(s: &DynamicArcSet) -> u64 {
    let st = s.stats();
    st.touched + st.rebuilt_arcs
}

/// Dynamic engine; arcs of a point live in the four edge sets of its cell.
#[derive(Debug, Default)]
pub struct DynamicUDRR {
    pub coverage: Coverage,
    cells: HashMap<CellKey, DynCell>,
    points: HashMap<u64, Point>,
    cfg: CuttingConfig,
    rebuilds: u64,
    work: AtomicU64,
}

pub fn new_dynamic() -> DynamicUDRR {
    DynamicUDRR::new()
}

impl DynamicUDRR {
    pub fn new() -> Self {
        DynamicUDRR::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<Point> {
        self.points.get(&id).copied()
    }

    /// Full rebuilds caused by coverage reconstruction.
    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    /// Candidate arcs touched by queries plus arcs fed to rebuilds, so far.
    pub fn work(&self) -> u64 {
        self.work.load(Ordering::Relaxed)
    }

    fn add_work(&self, w: u64) {
        self.work.fetch_add(w, Ordering::Relaxed);
    }

    /// Arcs stored over all edge sets.
    pub fn arc_count(&self) -> usize {
        self.cells.values().flat_map(|c| c.edges.iter()).map(|s| s.len()).sum()
    }

    pub fn insert(&mut self, p: Point) -> Result<(), EngineError> {
        if self.points.contains_key(&p.id) {
            return Err(EngineError::DuplicatePoint(p.id));
        }
        let key = self.coverage.insert(p);
        let rec = self.coverage.record(&key).expect("cell of an inserted point");
        let cfg = &self.cfg;
        let dc = self.cells.entry(key).or_insert_with(|| DynCell::new(rec.cell.clone(), cfg));
        debug_assert_eq!(dc.cell.x_range, rec.cell.x_range, "resident cell changed shape");
        let before = dc.work();
        dc.insert(&p)?;
        let w = dc.work() - before;
        self.add_work(w);
        self.points.insert(p.id, p);
        Ok(())
    }

    pub fn delete(&mut self, id: u64) -> Result<(), EngineError> {
        let p = *self.points.get(&id).ok_or(EngineError::UnknownPoint(id))?;
        let key = self.coverage.locate(&p).map(|(k, _)| k).ok_or(EngineError::UnknownPoint(id))?;
        let rebuilt = self.coverage.delete(&p)?;
        self.points.remove(&id);
        if rebuilt {
            self.rebuild()?;
            return Ok(());
        }
        if let Some(dc) = self.cells.get_mut(&key) {
            let before = dc.work();
            dc.delete(id)?;
            let w = dc.work() - before;
            self.work.fetch_add(w, Ordering::Relaxed);
            if dc.edges.iter().all(|s| s.is_empty()) {
                self.cells.remove(&key);
            }
        }
        Ok(())
    }

    /// Rebuilds every cell's edge sets after the coverage was reconstructed.
    fn rebuild(&mut self) -> Result<(), EngineError> {
        self.rebuilds += 1;
        let mut cells = HashMap::new();
        for (key, rec) in self.coverage.nonempty_cells() {
            let mut dc = DynCell::new(rec.cell.clone(), &self.cfg);
            for e in EDGES {
                let arcs: Vec<UnitArc> = rec.points.values().filter_map(|p| dc.arc(e, p)).collect();
                dc.edges[e as usize] = DynamicArcSet::build(&arcs, &self.cfg)?;
            }
            cells.insert(*key, dc);
        }
        self.cells = cells;
        self.add_work(4 * self.points.len() as u64);
        Ok(())
    }

    pub fn report(&self, q: &Point) -> Vec<u64> {
        let Some((key, rec)) = self.coverage.locate(q) else {
            return Vec::new();
        };
        let mut out: Vec<u64> = rec.points.values().map(|p| p.id).collect();
        for nk in &rec.neighbors {
            if *nk == key {
                continue;
            }
            let Some(dc) = self.cells.get(nk) else { continue };
            let Some(e) = separating_edge(&dc.cell, &rec.cell) else { continue };
            let local = FrameTransform::for_edge(&dc.cell, e).apply(q);
            let set = &dc.edges[e as usize];
            let before = set_work(set);
            out.extend(set.arcs_below(&local));
            self.add_work(set_work(set) - before);
        }
        out.sort_unstable();
        out
    }

    pub fn empty(&self, q: &Point) -> Option<Point> {
        let (key, rec) = self.coverage.locate(q)?;
        if let Some(p) = rec.points.values().next() {
            return Some(*p);
        }
        for nk in &rec.neighbors {
            if *nk == key {
                continue;
            }
            let Some(dc) = self.cells.get(nk) else { continue };
            let Some(e) = separating_edge(&dc.cell, &rec.cell) else { continue };
            let local = FrameTransform::for_edge(&dc.cell, e).apply(q);
            let set = &dc.edges[e as usize];
            let before = set_work(set);
            let low = set.lowest_arc(local.x);
            self.add_work(set_work(set) - before);
            if let Some(g) = low {
                if arc_below_point(&local, &g) {
                    return Some(self.points[&g.source_id]);
                }
            }
        }
        None
    }
}
