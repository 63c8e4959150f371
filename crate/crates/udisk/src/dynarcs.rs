//! Dynamic k-lowest-arcs and arcs-below-point queries.
//!
//! A [`DeletionOnlyArcs`] keeps the k = 1 cutting hierarchy of its arcs in
//! trapezoid form with explicit conflict lists, and tombstones deletions
//! until half of the arcs are gone. [`DynamicArcSet`] adds insertions with
//! the logarithmic method over such buckets.

use crate::cuttings::{hierarchy, to_trapezoids, top_y, CutVertex, CuttingConfig, CuttingError, Trapezoid};
use crate::geometry::{arc_below_point, UnitArc};
use crate::hulls::CellTop;
use crate::{tolerance, Point};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("arc {0} is not in the set")]
    UnknownArc(u64),
    #[error("arc {0} is already in the set")]
    DuplicateArc(u64),
    #[error(transparent)]
    Cutting(#[from] CuttingError),
}

/// One hierarchy level in trapezoid form.
#[derive(Clone, Debug)]
struct Level {
    k: usize,
    cells: Vec<Trapezoid>,
    /// x-sorted cut vertices with the arcs below them
    vertices: Vec<CutVertex>,
}

impl Level {
    fn locate(&self, x: f64) -> Option<&Trapezoid> {
        let i = self.cells.partition_point(|c| c.xl <= x);
        let c = &self.cells[i.checked_sub(1)?];
        (x <= c.xr).then_some(c)
    }

    fn vertices_at(&self, x: f64) -> &[CutVertex] {
        let lo = self.vertices.partition_point(|v| v.p.x < x);
        let hi = self.vertices.partition_point(|v| v.p.x <= x);
        &self.vertices[lo..hi]
    }
}

fn by_height(x: f64) -> impl Fn(&UnitArc, &UnitArc) -> Ordering {
    move |a, b| a.y_unchecked(x).total_cmp(&b.y_unchecked(x)).then(a.source_id.cmp(&b.source_id))
}

/// Base `k` of the doubling search in `arcs_below`.
pub fn doubling_base(n: usize) -> usize {
    let lg = usize::BITS - n.saturating_sub(1).leading_zeros();
    (lg as usize).max(2)
}

#[derive(Debug)]
pub struct DeletionOnlyArcs {
    arcs: HashMap<u64, UnitArc>,
    levels: Vec<Level>,
    slab: (f64, f64),
    tombstones: HashSet<u64>,
    live_count: usize,
    initial_count: usize,
    cfg: CuttingConfig,
    touched: AtomicU64,
    rebuilds: u64,
}

impl Clone for DeletionOnlyArcs {
    fn clone(&self) -> Self {
        DeletionOnlyArcs {
            arcs: self.arcs.clone(),
            levels: self.levels.clone(),
            slab: self.slab,
            tombstones: self.tombstones.clone(),
            live_count: self.live_count,
            initial_count: self.initial_count,
            cfg: self.cfg.clone(),
            touched: AtomicU64::new(self.touched.load(AtomicOrdering::Relaxed)),
            rebuilds: self.rebuilds,
        }
    }
}

pub fn build_delonly(gamma: &[UnitArc]) -> Result<DeletionOnlyArcs, CuttingError> {
    DeletionOnlyArcs::build(gamma, &CuttingConfig::default())
}

impl DeletionOnlyArcs {
    pub fn build(gamma: &[UnitArc], cfg: &CuttingConfig) -> Result<Self, CuttingError> {
        let mut d = DeletionOnlyArcs {
            arcs: HashMap::new(),
            levels: Vec::new(),
            slab: (-1.0, 1.0),
            tombstones: HashSet::new(),
            live_count: 0,
            initial_count: 0,
            cfg: cfg.clone(),
            touched: AtomicU64::new(0),
            rebuilds: 0,
        };
        d.rebuild_from(gamma)?;
        Ok(d)
    }

    fn rebuild_from(&mut self, gamma: &[UnitArc]) -> Result<(), CuttingError> {
        let mut cfg = self.cfg.clone();
        // small sets need few coverage samples; the crossing check stays exhaustive
        cfg.samples = cfg.samples.min(64 * gamma.len().max(1));
        let levels = if gamma.is_empty() {
            Vec::new()
        } else {
            hierarchy(gamma, 1, &cfg)?
                .levels
                .iter()
                .map(|vs| {
                    let t = to_trapezoids(gamma, vs);
                    self.slab = t.slab;
                    Level { k: vs.k, cells: t.cells, vertices: vs.q.clone() }
                })
                .collect()
        };
        self.levels = levels;
        self.arcs = gamma.iter().map(|g| (g.source_id, *g)).collect();
        self.tombstones.clear();
        self.live_count = gamma.len();
        self.initial_count = gamma.len();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.live_count
    }

    pub fn is_empty(&self) -> bool {
        self.live_count == 0
    }

    pub fn initial_count(&self) -> usize {
        self.initial_count
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level_ks(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.k).collect()
    }

    /// Stored conflict-list entries over all levels, cells and vertices.
    pub fn conflict_entries(&self) -> usize {
        self.levels
            .iter()
            .map(|l| {
                l.cells.iter().map(|c| c.conflicts.len()).sum::<usize>()
                    + l.vertices.iter().map(|v| v.conflicts.len()).sum::<usize>()
            })
            .sum()
    }

    pub fn touched(&self) -> u64 {
        self.touched.load(AtomicOrdering::Relaxed)
    }

    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    pub fn contains(&self, id: u64) -> bool {
        self.arcs.contains_key(&id) && !self.tombstones.contains(&id)
    }

    pub fn live_arcs(&self) -> Vec<UnitArc> {
        let mut v: Vec<UnitArc> = self.arcs.values().filter(|g| !self.tombstones.contains(&g.source_id)).copied().collect();
        v.sort_by_key(|g| g.source_id);
        v
    }

    /// Tombstones `id`, rebuilding from the live arcs once half are gone.
    pub fn delete(&mut self, id: u64) -> Result<(), DynError> {
        if !self.contains(id) {
            return Err(DynError::UnknownArc(id));
        }
        self.tombstones.insert(id);
        self.live_count -= 1;
        if self.live_count <= self.initial_count / 2 {
            let live = self.live_arcs();
            self.rebuild_from(&live)?;
            self.rebuilds += 1;
        }
        Ok(())
    }

    /// The `min(k, crossing)` live arcs lowest at `x`, ordered by height then
    /// id when `sorted`.
    pub fn k_lowest(&self, x: f64, k: usize, sorted: bool) -> Vec<UnitArc> {
        assert!(k >= 1, "k must be positive");
        if self.live_count == 0 || x < self.slab.0 || x > self.slab.1 {
            return Vec::new();
        }
        let start = self.levels.iter().position(|l| l.k >= k).unwrap_or(self.levels.len() - 1);
        let cmp = by_height(x);
        let mut out = Vec::new();
        for l in &self.levels[start..] {
            let Some(cell) = l.locate(x) else { continue };
            let mut ids: Vec<u64> = cell.conflicts.clone();
            for v in l.vertices_at(cell.xl).iter().chain(l.vertices_at(cell.xr)) {
                ids.extend_from_slice(&v.conflicts);
            }
            self.touched.fetch_add(ids.len() as u64, AtomicOrdering::Relaxed);
            ids.sort_unstable();
            ids.dedup();
            out = ids
                .iter()
                .filter(|id| !self.tombstones.contains(id))
                .map(|id| self.arcs[id])
                .filter(|g| g.spans(x))
                .collect();
            if out.len() > k {
                out.select_nth_unstable_by(k - 1, &cmp);
                out.truncate(k);
            }
            // every live arc lower than the k-th candidate crosses this cell
            let complete = cell.top == CellTop::Separator
                || (out.len() == k
                    && out.iter().all(|g| g.y_unchecked(x) < top_y(&cell.top, x) - 10.0 * tolerance()));
            if complete {
                break;
            }
        }
        if sorted {
            out.sort_by(&cmp);
        }
        out
    }

    /// Live arcs below or through `q`, as sorted ids.
    pub fn arcs_below(&self, q: &Point) -> Vec<u64> {
        let mut k = doubling_base(self.live_count);
        loop {
            let low = self.k_lowest(q.x, k, false);
            let below: Vec<u64> = low.iter().filter(|g| arc_below_point(q, g)).map(|g| g.source_id).collect();
            if below.len() < k || k >= self.live_count {
                let mut v = below;
                v.sort_unstable();
                return v;
            }
            k *= 2;
        }
    }
}

/// Live arcs with logarithmic-method buckets: bucket `j` holds at most `2^j`
/// arcs and is rebuilt from the union of the smaller ones on a carry.
#[derive(Debug, Default)]
pub struct DynamicArcSet {
    buckets: Vec<Option<DeletionOnlyArcs>>,
    registry: HashMap<u64, usize>,
    cfg: CuttingConfig,
    rebuilt: u64,
    /// Touches counted by buckets that were merged away or emptied.
    retired_touched: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DynStats {
    pub touched: u64,
    pub rebuilds: u64,
    /// Arcs fed to bucket builds, including half-deletion rebuilds.
    pub rebuilt_arcs: u64,
    pub buckets: usize,
}

impl DynamicArcSet {
    pub fn new() -> Self {
        Self::with_config(CuttingConfig::default())
    }

    pub fn with_config(cfg: CuttingConfig) -> Self {
        DynamicArcSet { buckets: Vec::new(), registry: HashMap::new(), cfg, rebuilt: 0, retired_touched: 0 }
    }

    /// Buckets filled as `gamma.len()` inserts would leave them.
    pub fn build(gamma: &[UnitArc], cfg: &CuttingConfig) -> Result<Self, DynError> {
        let mut s = Self::with_config(cfg.clone());
        let n = gamma.len();
        let mut rest = gamma;
        for j in (0..usize::BITS - n.leading_zeros()).rev() {
            if n >> j & 1 == 1 {
                let (chunk, tail) = rest.split_at(1 << j);
                rest = tail;
                let mut seen = HashSet::new();
                if let Some(g) = chunk.iter().find(|g| !seen.insert(g.source_id) || s.registry.contains_key(&g.source_id)) {
                    return Err(DynError::DuplicateArc(g.source_id));
                }
                s.buckets.resize_with(s.buckets.len().max(j as usize + 1), || None);
                s.buckets[j as usize] = Some(DeletionOnlyArcs::build(chunk, cfg)?);
                for g in chunk {
                    s.registry.insert(g.source_id, j as usize);
                }
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.registry.contains_key(&id)
    }

    /// Live-arc count per bucket index.
    pub fn occupancy(&self) -> Vec<usize> {
        self.buckets.iter().map(|b| b.as_ref().map_or(0, |d| d.len())).collect()
    }

    pub fn stats(&self) -> DynStats {
        let live = self.buckets.iter().flatten();
        DynStats {
            touched: self.retired_touched + live.clone().map(|d| d.touched()).sum::<u64>(),
            rebuilds: live.map(|d| d.rebuilds()).sum(),
            rebuilt_arcs: self.rebuilt,
            buckets: self.buckets.iter().flatten().count(),
        }
    }

    pub fn insert(&mut self, g: UnitArc) -> Result<(), DynError> {
        if self.registry.contains_key(&g.source_id) {
            return Err(DynError::DuplicateArc(g.source_id));
        }
        let j = self.buckets.iter().position(Option::is_none).unwrap_or(self.buckets.len());
        if j == self.buckets.len() {
            self.buckets.push(None);
        }
        let mut union = vec![g];
        for b in &mut self.buckets[..j] {
            if let Some(d) = b.take() {
                self.retired_touched += d.touched();
                union.extend(d.live_arcs());
            }
        }
        let d = DeletionOnlyArcs::build(&union, &self.cfg)?;
        self.rebuilt += union.len() as u64;
        for a in &union {
            self.registry.insert(a.source_id, j);
        }
        self.buckets[j] = Some(d);
        Ok(())
    }

    pub fn delete(&mut self, id: u64) -> Result<(), DynError> {
        let j = *self.registry.get(&id).ok_or(DynError::UnknownArc(id))?;
        let d = self.buckets[j].as_mut().expect("registered bucket exists");
        let before = d.rebuilds();
        d.delete(id)?;
        if d.rebuilds() > before {
            self.rebuilt += d.len() as u64;
        }
        if d.is_empty() {
            self.retired_touched += d.touched();
            self.buckets[j] = None;
        }
        self.registry.remove(&id);
        Ok(())
    }

    /// k-way merge of the per-bucket answers, bounded at `k`.
    pub fn k_lowest(&self, x: f64, k: usize, sorted: bool) -> Vec<UnitArc> {
        let lists: Vec<Vec<UnitArc>> = self.buckets.iter().flatten().map(|d| d.k_lowest(x, k, true)).collect();
        if !sorted {
            let mut all: Vec<UnitArc> = lists.into_iter().flatten().collect();
            if all.len() > k {
                all.select_nth_unstable_by(k - 1, by_height(x));
                all.truncate(k);
            }
            return all;
        }
        struct Head(f64, u64, usize, usize);
        impl PartialEq for Head {
            fn eq(&self, o: &Self) -> bool {
                self.cmp(o) == Ordering::Equal
            }
        }
        impl Eq for Head {}
        impl PartialOrd for Head {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Head {
            // reversed for a min-heap
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let head = |l: usize, i: usize| Head(lists[l][i].y_unchecked(x), lists[l][i].source_id, l, i);
        let mut heap: BinaryHeap<Head> = (0..lists.len()).filter(|&l| !lists[l].is_empty()).map(|l| head(l, 0)).collect();
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let Some(Head(_, _, l, i)) = heap.pop() else { break };
            out.push(lists[l][i]);
            if i + 1 < lists[l].len() {
                heap.push(head(l, i + 1));
            }
        }
        out
    }

    pub fn arcs_below(&self, q: &Point) -> Vec<u64> {
        let mut v: Vec<u64> = self.buckets.iter().flatten().flat_map(|d| d.arcs_below(q)).collect();
        v.sort_unstable();
        v
    }

    pub fn lowest_arc(&self, x: f64) -> Option<UnitArc> {
        self.k_lowest(x, 1, true).into_iter().next()
    }
}
