//! Conforming coverage: a sparse grid of cells of side at most 1/2 such that
//! every unit disk centered in a cell only reaches points stored in that
//! cell's 7x7 neighborhood, and disks centered outside every cell are empty.
//!
//! Each axis keeps its partition lines and its point-zones. The grid is never
//! materialized; a cell is identified by its bottom-left corner.

use crate::geometry::Point;
use ordered_float::OrderedFloat;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound::{Excluded, Included, Unbounded};
use thiserror::Error;

type F = OrderedFloat<f64>;

const HALF: f64 = 0.5;
const MARGIN: f64 = 1.75;
const GAP: f64 = 5.0;
// widths below this are treated as zero when closing a gap
const EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverageError {
    #[error("point {0} is not resident")]
    UnknownPoint(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Vertical,
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZoneKind {
    Point,
    Gap,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Zone {
    pub orientation: Orientation,
    pub lo: f64,
    pub hi: f64,
    pub kind: ZoneKind,
}

/// Partition lines and point-zones along one axis.
#[derive(Clone, Debug, Default)]
pub struct Axis {
    lines: BTreeSet<F>,
    zones: BTreeMap<F, F>,
}

impl Axis {
    /// Sweeps sorted coordinates. With `descending` the sweep runs from the
    /// largest coordinate down, which is how horizontal zones are built.
    pub fn build(sorted: &[f64], descending: bool) -> Self {
        let coords: Vec<f64> = if descending {
            sorted.iter().rev().map(|c| -c).collect()
        } else {
            sorted.to_vec()
        };
        let mut axis = Axis::default();
        let n = coords.len();
        let mut i = 0;
        while i < n {
            let lo = coords[i] - MARGIN;
            while i + 1 < n && coords[i + 1] - coords[i] <= GAP {
                i += 1;
            }
            let m = ((coords[i] + 2.0 - lo) / HALF).ceil() as i64;
            let hi = lo + m as f64 * HALF;
            for k in 0..=m {
                let l = lo + k as f64 * HALF;
                axis.lines.insert(OrderedFloat(if descending { -l } else { l }));
            }
            if descending {
                axis.zones.insert(OrderedFloat(-hi), OrderedFloat(-lo));
            } else {
                axis.zones.insert(OrderedFloat(lo), OrderedFloat(hi));
            }
            i += 1;
        }
        axis
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn lines(&self) -> impl Iterator<Item = f64> + '_ {
        self.lines.iter().map(|l| l.0)
    }

    pub fn zones(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.zones.iter().map(|(a, b)| (a.0, b.0))
    }

    /// Point-zones and the bounded gap-zones between them, in order.
    pub fn zone_list(&self, orientation: Orientation) -> Vec<Zone> {
        let mut out = Vec::new();
        let mut prev: Option<f64> = None;
        for (lo, hi) in self.zones() {
            if let Some(p) = prev {
                out.push(Zone { orientation, lo: p, hi: lo, kind: ZoneKind::Gap });
            }
            out.push(Zone { orientation, lo, hi, kind: ZoneKind::Point });
            prev = Some(hi);
        }
        out
    }

    /// The half-open slab `[a, b)` between consecutive lines containing `c`.
    pub fn slab(&self, c: f64) -> Option<(f64, f64)> {
        let a = self.lines.range(..=OrderedFloat(c)).next_back()?;
        let b = self.lines.range((Excluded(OrderedFloat(c)), Unbounded)).next()?;
        Some((a.0, b.0))
    }

    pub fn zone_of(&self, c: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.zones.range(..=OrderedFloat(c)).next_back()?;
        if c < hi.0 {
            Some((lo.0, hi.0))
        } else {
            None
        }
    }

    fn lines_right(&self, b: f64, k: usize) -> Vec<f64> {
        self.lines
            .range((Excluded(OrderedFloat(b)), Unbounded))
            .take(k)
            .map(|l| l.0)
            .collect()
    }

    fn lines_left(&self, a: f64, k: usize) -> Vec<f64> {
        self.lines
            .range(..OrderedFloat(a))
            .rev()
            .take(k)
            .map(|l| l.0)
            .collect()
    }

    /// The seven slabs centered at the slab containing `c`.
    pub fn block(&self, c: f64) -> Option<Vec<(f64, f64)>> {
        let (a, b) = self.slab(c)?;
        let left = self.lines_left(a, 3);
        let right = self.lines_right(b, 3);
        if left.len() < 3 || right.len() < 3 {
            return None;
        }
        let mut edges: Vec<f64> = left.into_iter().rev().collect();
        edges.push(a);
        edges.push(b);
        edges.extend(right);
        Some(edges.windows(2).map(|w| (w[0], w[1])).collect())
    }

    /// Whether the block around `c` lies inside a single point-zone.
    pub fn block_is_regular(&self, c: f64) -> bool {
        match (self.block(c), self.zone_of(c)) {
            (Some(b), Some((lo, hi))) => b[0].0 >= lo && b[6].1 <= hi,
            _ => false,
        }
    }

    fn add_lines(&mut self, from: f64, to: f64) {
        // lines at from + k/2, k >= 1, up to and including `to`
        let m = ((to - from) / HALF + EPS).floor() as i64;
        for k in 1..=m {
            self.lines.insert(OrderedFloat(from + k as f64 * HALF));
        }
    }

    fn add_lines_down(&mut self, from: f64, to: f64) {
        let m = ((from - to) / HALF + EPS).floor() as i64;
        for k in 1..=m {
            self.lines.insert(OrderedFloat(from - k as f64 * HALF));
        }
    }

    fn next_zone(&self, hi: f64) -> Option<(f64, f64)> {
        self.zones
            .range((Included(OrderedFloat(hi)), Unbounded))
            .next()
            .map(|(a, b)| (a.0, b.0))
    }

    fn prev_zone(&self, lo: f64) -> Option<(f64, f64)> {
        self.zones
            .range(..=OrderedFloat(lo))
            .next_back()
            .map(|(a, b)| (a.0, b.0))
    }

    /// Adjusts lines and zones so the block around `c` is inside one point-zone.
    /// Only gap-zones receive new lines, so existing regular slabs never change.
    pub fn ensure(&mut self, c: f64) {
        if self.block_is_regular(c) {
            return;
        }
        match self.zone_of(c) {
            Some((zl, zh)) => {
                let (a, b) = self.slab(c).expect("slab inside a zone");
                if self.lines_right(b, 3).iter().filter(|l| **l <= zh).count() < 3 {
                    self.grow_right(zl, zh, b + 3.0 * HALF);
                }
                let (zl, zh) = self.zone_of(c).expect("zone survives growth");
                if self.lines_left(a, 3).iter().filter(|l| **l >= zl).count() < 3 {
                    self.grow_left(zl, zh, a - 3.0 * HALF);
                }
            }
            None => self.fill_gap(c),
        }
        debug_assert!(self.block_is_regular(c), "block around {c} not regular");
    }

    fn grow_right(&mut self, zl: f64, zh: f64, target: f64) {
        match self.next_zone(zh) {
            Some((nl, nh)) if target >= nl => {
                // stop at the last half step short of the next zone, then merge
                let steps = ((nl - zh) / HALF + EPS).floor();
                let x = zh + steps * HALF;
                self.add_lines(zh, x.min(nl));
                self.zones.remove(&OrderedFloat(nl));
                self.zones.insert(OrderedFloat(zl), OrderedFloat(nh));
            }
            _ => {
                self.add_lines(zh, target);
                self.zones.insert(OrderedFloat(zl), OrderedFloat(target));
            }
        }
    }

    fn grow_left(&mut self, zl: f64, zh: f64, target: f64) {
        let prev = self.prev_zone(zl - EPS).filter(|(pl, _)| *pl < zl);
        match prev {
            Some((pl, ph)) if target <= ph => {
                let steps = ((zl - ph) / HALF + EPS).floor();
                let x = zl - steps * HALF;
                self.add_lines_down(zl, x.max(ph));
                self.zones.remove(&OrderedFloat(zl));
                self.zones.insert(OrderedFloat(pl), OrderedFloat(zh));
            }
            _ => {
                self.add_lines_down(zl, target);
                self.zones.remove(&OrderedFloat(zl));
                self.zones.insert(OrderedFloat(target), OrderedFloat(zh));
            }
        }
    }

    fn fill_gap(&mut self, c: f64) {
        let left = self.prev_zone(c);
        let right = self
            .zones
            .range((Excluded(OrderedFloat(c)), Unbounded))
            .next()
            .map(|(a, b)| (a.0, b.0));
        let d1 = left.map(|(_, h)| c - h).unwrap_or(f64::INFINITY);
        let d2 = right.map(|(l, _)| l - c).unwrap_or(f64::INFINITY);
        if d1.min(d2) > MARGIN {
            let lo = c - MARGIN;
            let hi = lo + 7.0 * HALF;
            for k in 0..=7 {
                self.lines.insert(OrderedFloat(lo + k as f64 * HALF));
            }
            self.zones.insert(OrderedFloat(lo), OrderedFloat(hi));
            return;
        }
        if d1 <= d2 {
            let (zl, zh) = left.expect("finite distance");
            let mut past = 0;
            let mut k = 1;
            loop {
                let cur = zh + (k - 1) as f64 * HALF;
                if let Some((nl, nh)) = right {
                    if nl - cur < HALF {
                        self.zones.remove(&OrderedFloat(nl));
                        self.zones.insert(OrderedFloat(zl), OrderedFloat(nh));
                        return;
                    }
                }
                let l = zh + k as f64 * HALF;
                self.lines.insert(OrderedFloat(l));
                if l > c {
                    past += 1;
                }
                if past == 4 {
                    self.zones.insert(OrderedFloat(zl), OrderedFloat(l));
                    return;
                }
                k += 1;
            }
        } else {
            let (zl, zh) = right.expect("finite distance");
            let mut past = 0;
            let mut k = 1;
            loop {
                let cur = zl - (k - 1) as f64 * HALF;
                if let Some((pl, ph)) = left {
                    if cur - ph < HALF {
                        self.zones.remove(&OrderedFloat(zl));
                        self.zones.insert(OrderedFloat(pl), OrderedFloat(zh));
                        return;
                    }
                }
                let l = zl - k as f64 * HALF;
                self.lines.insert(OrderedFloat(l));
                // the slab containing c starts at or below c, so count lines at or below it
                if l <= c {
                    past += 1;
                }
                if past == 4 {
                    self.zones.remove(&OrderedFloat(zl));
                    self.zones.insert(OrderedFloat(l), OrderedFloat(zh));
                    return;
                }
                k += 1;
            }
        }
    }

    /// Narrow slabs inside point-zones and violations of the seven-slab spacing.
    pub fn spacing_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (lo, hi) in self.zones() {
            let ls: Vec<f64> = self
                .lines
                .range(OrderedFloat(lo)..=OrderedFloat(hi))
                .map(|l| l.0)
                .collect();
            let widths: Vec<f64> = ls.windows(2).map(|w| w[1] - w[0]).collect();
            if widths.iter().any(|w| *w > HALF + 1e-9) {
                out.push(format!("slab wider than 1/2 in zone [{lo}, {hi}]"));
            }
            let narrow: Vec<usize> = widths
                .iter()
                .enumerate()
                .filter(|(_, w)| **w < HALF - 1e-9)
                .map(|(i, _)| i)
                .collect();
            for &i in &narrow {
                if i < 7 || i + 7 >= widths.len() {
                    out.push(format!("narrow slab {i} within seven slabs of a bound of [{lo}, {hi}]"));
                }
            }
            for w in narrow.windows(2) {
                if w[1] - w[0] < 8 {
                    out.push(format!("narrow slabs {} and {} too close in [{lo}, {hi}]", w[0], w[1]));
                }
            }
        }
        out
    }
}

pub type CellKey = (F, F);

pub fn cell_key(x: f64, y: f64) -> CellKey {
    (OrderedFloat(x), OrderedFloat(y))
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Cell {
    pub fn key(&self) -> CellKey {
        cell_key(self.x_range.0, self.y_range.0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_range.0 && p.x < self.x_range.1 && p.y >= self.y_range.0 && p.y < self.y_range.1
    }
}

#[derive(Clone, Debug)]
pub struct CellRecord {
    pub cell: Cell,
    /// Non-empty cells whose 7x7 block contains this cell.
    pub neighbors: BTreeSet<CellKey>,
    pub points: BTreeMap<(F, F, u64), Point>,
}

#[derive(Clone, Debug, Default)]
pub struct Coverage {
    pub vertical: Axis,
    pub horizontal: Axis,
    registry: BTreeMap<CellKey, CellRecord>,
    pub deletion_counter: usize,
    pub total_points: usize,
    live: usize,
    /// Incremented on every full rebuild.
    pub generation: u64,
}

fn point_key(p: &Point) -> (F, F, u64) {
    (OrderedFloat(p.x), OrderedFloat(p.y), p.id)
}

impl Coverage {
    pub fn build(points: &[Point]) -> Self {
        let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let mut cov = Coverage {
            vertical: Axis::build(&xs, false),
            horizontal: Axis::build(&ys, true),
            ..Default::default()
        };
        for p in points {
            cov.place(*p);
        }
        cov.total_points = points.len();
        cov.live = points.len();
        cov
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn cell_count(&self) -> usize {
        self.registry.len()
    }

    fn grid_cell(&self, x: f64, y: f64) -> Option<Cell> {
        Some(Cell {
            x_range: self.vertical.slab(x)?,
            y_range: self.horizontal.slab(y)?,
        })
    }

    /// Registers the block of the cell containing `p` and stores `p`.
    fn place(&mut self, p: Point) -> CellKey {
        let cell = self.grid_cell(p.x, p.y).expect("point inside its zones");
        let key = cell.key();
        let fresh = self.registry.get(&key).is_none_or(|r| r.points.is_empty());
        if fresh {
            let xs = self.vertical.block(p.x).expect("regular block");
            let ys = self.horizontal.block(p.y).expect("regular block");
            for &xr in &xs {
                for &yr in &ys {
                    let rec = self.registry.entry(cell_key(xr.0, yr.0)).or_insert_with(|| CellRecord {
                        cell: Cell { x_range: xr, y_range: yr },
                        neighbors: BTreeSet::new(),
                        points: BTreeMap::new(),
                    });
                    rec.neighbors.insert(key);
                }
            }
        }
        self.registry
            .get_mut(&key)
            .expect("registered")
            .points
            .insert(point_key(&p), p);
        key
    }

    pub fn locate(&self, q: &Point) -> Option<(CellKey, &CellRecord)> {
        let cell = self.grid_cell(q.x, q.y)?;
        let key = cell.key();
        self.registry.get(&key).map(|r| (key, r))
    }

    /// Rough count of comparisons a locate performs; used for instrumentation.
    pub fn locate_cost(&self) -> u64 {
        let lg = |n: usize| (usize::BITS - n.max(1).leading_zeros()) as u64;
        lg(self.vertical.line_count()) + lg(self.horizontal.line_count()) + lg(self.registry.len())
    }

    pub fn record(&self, key: &CellKey) -> Option<&CellRecord> {
        self.registry.get(key)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &CellRecord)> {
        self.registry.iter()
    }

    pub fn nonempty_cells(&self) -> impl Iterator<Item = (&CellKey, &CellRecord)> {
        self.registry.iter().filter(|(_, r)| !r.points.is_empty())
    }

    pub fn live_points(&self) -> Vec<Point> {
        self.registry
            .values()
            .flat_map(|r| r.points.values().copied())
            .collect()
    }

    /// Inserts `p` and returns the key of the cell now holding it.
    pub fn insert(&mut self, p: Point) -> CellKey {
        let resident = self
            .locate(&p)
            .is_some_and(|(_, r)| !r.points.is_empty());
        if !resident {
            self.vertical.ensure(p.x);
            self.horizontal.ensure(p.y);
        }
        let key = self.place(p);
        self.total_points += 1;
        self.live += 1;
        key
    }

    /// Removes `p` (matched by coordinates and id). Returns true when the
    /// structure was rebuilt from the surviving points.
    pub fn delete(&mut self, p: &Point) -> Result<bool, CoverageError> {
        let Some((key, _)) = self.locate(p) else {
            return Err(CoverageError::UnknownPoint(p.id));
        };
        let rec = self.registry.get_mut(&key).expect("located");
        if rec.points.remove(&point_key(p)).is_none() {
            return Err(CoverageError::UnknownPoint(p.id));
        }
        self.live -= 1;
        self.deletion_counter += 1;
        if 2 * self.deletion_counter >= self.total_points {
            let live = self.live_points();
            let generation = self.generation + 1;
            *self = Coverage::build(&live);
            self.generation = generation;
            return Ok(true);
        }
        Ok(false)
    }

    /// Violations of the structural conditions; empty when consistent.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (key, rec) in &self.registry {
            let c = &rec.cell;
            if c.x_range.1 - c.x_range.0 > HALF + 1e-9 || c.y_range.1 - c.y_range.0 > HALF + 1e-9 {
                out.push(format!("cell {key:?} has a side longer than 1/2"));
            }
            if rec.neighbors.len() > 49 {
                out.push(format!("cell {key:?} has {} neighbors", rec.neighbors.len()));
            }
            if !rec.points.is_empty() {
                let (Some(xs), Some(ys)) = (
                    self.vertical.block(c.x_range.0),
                    self.horizontal.block(c.y_range.0),
                ) else {
                    out.push(format!("cell {key:?} has no full block"));
                    continue;
                };
                for xr in &xs {
                    for yr in &ys {
                        match self.registry.get(&cell_key(xr.0, yr.0)) {
                            Some(r) if r.neighbors.contains(key) => {}
                            _ => out.push(format!("block of {key:?} misses ({}, {})", xr.0, yr.0)),
                        }
                    }
                }
                for p in rec.points.values() {
                    if !c.contains(p) {
                        out.push(format!("point {} outside its cell", p.id));
                    }
                }
            }
        }
        out.extend(self.vertical.spacing_violations());
        out.extend(self.horizontal.spacing_violations());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let cov = Coverage::build(&[Point::xy(0.0, 0.0)]);
        assert_eq!(cov.vertical.zones().collect::<Vec<_>>(), vec![(-1.75, 2.25)]);
        assert_eq!(cov.horizontal.zones().collect::<Vec<_>>(), vec![(-2.25, 1.75)]);
        assert_eq!(cov.cell_count(), 49);
        let (_, rec) = cov.locate(&Point::xy(0.1, 0.1)).unwrap();
        assert_eq!(rec.cell.x_range, (-0.25, 0.25));
        assert_eq!(rec.cell.y_range, (-0.25, 0.25));
        assert_eq!(rec.neighbors.len(), 1);
        assert!(cov.locate(&Point::xy(100.0, 100.0)).is_none());
        assert!(cov.check_invariants().is_empty());
    }

    #[test]
    fn empty() {
        let cov = Coverage::build(&[]);
        assert!(cov.locate(&Point::xy(0.0, 0.0)).is_none());
        assert_eq!(cov.cell_count(), 0);
    }

    #[test]
    fn two_far_points() {
        let cov = Coverage::build(&[Point::new(0.0, 0.0, 1), Point::new(10.0, 0.0, 2)]);
        assert_eq!(cov.vertical.zones().count(), 2);
        for (_, r) in cov.nonempty_cells() {
            assert_eq!(r.points.len(), 1);
        }
        assert!(cov.check_invariants().is_empty());
    }

    #[test]
    fn insert_far_creates_zone() {
        let mut cov = Coverage::build(&[Point::new(0.0, 0.0, 1)]);
        cov.insert(Point::new(10.0, 0.0, 2));
        let zones: Vec<_> = cov.vertical.zones().collect();
        assert_eq!(zones, vec![(-1.75, 2.25), (8.25, 11.75)]);
        let kinds: Vec<_> = cov.vertical.zone_list(Orientation::Vertical).iter().map(|z| z.kind).collect();
        assert_eq!(kinds, vec![ZoneKind::Point, ZoneKind::Gap, ZoneKind::Point]);
        let interior = cov.vertical.lines().filter(|l| *l > 8.25 && *l < 11.75).count();
        assert_eq!(interior, 6);
        assert!(cov.check_invariants().is_empty());
    }

    #[test]
    fn insert_nearby_appends() {
        let mut cov = Coverage::build(&[Point::new(0.0, 0.0, 1)]);
        let before = cov.cell_count();
        let k = cov.insert(Point::new(0.1, 0.05, 2));
        assert_eq!(cov.cell_count(), before);
        assert_eq!(cov.record(&k).unwrap().points.len(), 2);
    }

    #[test]
    fn merge_creates_narrow_column() {
        // zones [-1.75, 2.25] and [4.55, 8.05] leave a 2.3 wide gap
        let mut cov = Coverage::build(&[Point::new(0.0, 0.0, 1)]);
        cov.insert(Point::new(6.3, 0.0, 2));
        assert_eq!(cov.vertical.zones().count(), 2);
        cov.insert(Point::new(3.4, 0.0, 3));
        assert_eq!(cov.vertical.zones().count(), 1);
        assert!(cov.check_invariants().is_empty(), "{:?}", cov.check_invariants());
    }

    #[test]
    fn delete_and_rebuild() {
        let base: Vec<Point> = (0..4).map(|i| Point::new(0.0, i as f64 * 0.1, 10 + i)).collect();
        let mut cov = Coverage::build(&base);
        let p = Point::new(0.3, 0.3, 2);
        cov.insert(p);
        assert!(!cov.delete(&p).unwrap());
        let (_, rec) = cov.locate(&p).unwrap();
        assert!(rec.points.values().all(|q| q.id != 2));
        assert_eq!(cov.delete(&p), Err(CoverageError::UnknownPoint(2)));

        let pts: Vec<Point> = (0..4).map(|i| Point::new(i as f64 * 20.0, 0.0, i)).collect();
        let mut cov = Coverage::build(&pts);
        assert_eq!(cov.cell_count(), 4 * 49);
        assert!(!cov.delete(&pts[0]).unwrap());
        assert!(cov.delete(&pts[1]).unwrap());
        assert_eq!(cov.cell_count(), 2 * 49);
        assert_eq!(cov.generation, 1);
    }
}
