//! Points, unit-radius arcs and the predicates built on them.
//!
//! Arcs on the `BelowSeparator` side are lower semicircle pieces whose
//! center lies on or above the separator. `AboveSeparator` arcs are the
//! upper pieces of a circle whose center lies below its chord (concave arcs).

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::sync::OnceLock;
use thiserror::Error;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

static TOLERANCE: OnceLock<f64> = OnceLock::new();

/// Global comparison slack. `UDISK_TOLERANCE` overrides the default once per process.
pub fn tolerance() -> f64 {
    *TOLERANCE.get_or_init(|| {
        std::env::var("UDISK_TOLERANCE")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
            .unwrap_or(DEFAULT_TOLERANCE)
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("coincident points")]
    Coincident,
    #[error("point at or below y = -1 has no wings")]
    IrrelevantPoint,
    #[error("center lies below the separator")]
    WrongSide,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub id: u64,
}

impl Point {
    /// Panics on non-finite input; use [`Point::try_new`] for fallible construction.
    pub fn new(x: f64, y: f64, id: u64) -> Self {
        Self::try_new(x, y, id).expect("finite coordinates")
    }

    pub fn try_new(x: f64, y: f64, id: u64) -> Result<Self, GeomError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeomError::NonFinite);
        }
        Ok(Point { x, y, id })
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self::new(x, y, 0)
    }

    pub fn dist2(&self, o: &Point) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, o: &Point) -> f64 {
        self.dist2(o).sqrt()
    }

    /// Lexicographic order on (x, y, id).
    pub fn key_cmp(&self, o: &Point) -> Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.id.cmp(&o.id))
    }

    pub fn in_unit_disk(&self, c: &Point) -> bool {
        self.dist(c) <= 1.0 + tolerance()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    BelowSeparator,
    AboveSeparator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitArc {
    pub center: Point,
    pub xl: f64,
    pub xr: f64,
    pub side: Side,
    pub source_id: u64,
}

impl UnitArc {
    pub fn spans(&self, x: f64) -> bool {
        x >= self.xl - tolerance() && x <= self.xr + tolerance()
    }

    /// Height at `x` without a span check; `x` is clamped to the circle.
    pub fn y_unchecked(&self, x: f64) -> f64 {
        let dx = x - self.center.x;
        let h = (1.0 - dx * dx).max(0.0).sqrt();
        match self.side {
            Side::BelowSeparator => self.center.y - h,
            Side::AboveSeparator => self.center.y + h,
        }
    }

    pub fn y_at(&self, x: f64) -> Option<f64> {
        if self.spans(x) {
            Some(self.y_unchecked(x))
        } else {
            None
        }
    }

    pub fn left_point(&self) -> Point {
        Point::new(self.xl, self.y_unchecked(self.xl), self.source_id)
    }

    pub fn right_point(&self) -> Point {
        Point::new(self.xr, self.y_unchecked(self.xr), self.source_id)
    }
}

/// The part of the unit circle around `p` below the line `y = separator_y`.
pub fn arc_from_center(p: Point, separator_y: f64) -> Result<Option<UnitArc>, GeomError> {
    if !p.x.is_finite() || !p.y.is_finite() || !separator_y.is_finite() {
        return Err(GeomError::NonFinite);
    }
    let h = p.y - separator_y;
    if h < -tolerance() {
        return Err(GeomError::WrongSide);
    }
    let h = h.max(0.0);
    if h >= 1.0 {
        return Ok(None);
    }
    let w = (1.0 - h * h).sqrt();
    Ok(Some(UnitArc {
        center: p,
        xl: p.x - w,
        xr: p.x + w,
        side: Side::BelowSeparator,
        source_id: p.id,
    }))
}

pub fn arc_y_at(g: &UnitArc, x: f64) -> Option<f64> {
    g.y_at(x)
}

/// Whether the downward ray from `q` meets `g`.
pub fn arc_below_point(q: &Point, g: &UnitArc) -> bool {
    let by_ray = match g.y_at(q.x) {
        Some(y) => y <= q.y + tolerance(),
        None => false,
    };
    if cfg!(debug_assertions) && g.side == Side::BelowSeparator && q.y < 0.0 {
        let d = q.dist(&g.center);
        if (d - 1.0).abs() > 10.0 * tolerance() && q.y < g.center.y - 10.0 * tolerance() {
            debug_assert_eq!(by_ray, d <= 1.0 + tolerance(), "ray and distance tests disagree");
        }
    }
    by_ray
}

/// Both intersection points of the unit circles around `a` and `b`.
pub fn circle_intersections(a: &Point, b: &Point) -> Option<(Point, Point)> {
    let d2 = a.dist2(b);
    if d2 == 0.0 || d2 > 4.0 {
        return None;
    }
    let d = d2.sqrt();
    let h = (1.0 - d2 / 4.0).max(0.0).sqrt();
    let mx = (a.x + b.x) / 2.0;
    let my = (a.y + b.y) / 2.0;
    let ux = (b.x - a.x) / d;
    let uy = (b.y - a.y) / d;
    // counter-clockwise normal first
    let p1 = Point::xy(mx - uy * h, my + ux * h);
    let p2 = Point::xy(mx + uy * h, my - ux * h);
    Some((p1, p2))
}

/// The crossing of two lower arcs, if any. Two such arcs cross at most once.
pub fn arc_arc_crossing(g1: &UnitArc, g2: &UnitArc) -> Option<Point> {
    let (p1, p2) = circle_intersections(&g1.center, &g2.center)?;
    let tau = tolerance();
    let lower_ok = |p: &Point| {
        g1.spans(p.x)
            && g2.spans(p.x)
            && (g1.side != Side::BelowSeparator || p.y <= g1.center.y + tau)
            && (g2.side != Side::BelowSeparator || p.y <= g2.center.y + tau)
    };
    match (lower_ok(&p1), lower_ok(&p2)) {
        (true, true) => Some(if p1.y <= p2.y { p1 } else { p2 }),
        (true, false) => Some(p1),
        (false, true) => Some(p2),
        _ => None,
    }
}

fn ordered(q: Point, r: Point) -> (Point, Point) {
    if q.key_cmp(&r) == Ordering::Greater {
        (r, q)
    } else {
        (q, r)
    }
}

/// The unit arc through `q` and `r` whose center lies on or above the separator.
pub fn connecting_arc(q: &Point, r: &Point) -> Result<Option<UnitArc>, GeomError> {
    if q.x == r.x && q.y == r.y {
        return Err(GeomError::Coincident);
    }
    let (a, b) = ordered(*q, *r);
    let Some((c, _)) = circle_intersections(&a, &b) else {
        return Ok(None);
    };
    if c.y < -tolerance() {
        return Ok(None);
    }
    Ok(Some(UnitArc {
        center: c,
        xl: a.x,
        xr: b.x,
        side: Side::BelowSeparator,
        source_id: a.id,
    }))
}

/// The unit arc through `p` and `r` whose center lies below their chord.
pub fn concave_arc(p: &Point, r: &Point) -> Option<UnitArc> {
    if p.x == r.x && p.y == r.y {
        return None;
    }
    let (a, b) = ordered(*p, *r);
    let (_, c) = circle_intersections(&a, &b)?;
    Some(UnitArc {
        center: c,
        xl: a.x,
        xr: b.x,
        side: Side::AboveSeparator,
        source_id: a.id,
    })
}

/// One wing of a point: an arc centered on the separator running from the
/// point down to `vertex`, then the half-line `y = -1` away from the point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WingChain {
    pub arc: UnitArc,
    pub vertex: Point,
}

pub fn wing_half_width(q: &Point) -> Result<f64, GeomError> {
    if q.y <= -1.0 {
        return Err(GeomError::IrrelevantPoint);
    }
    let y = q.y.min(0.0);
    Ok((1.0 - y * y).sqrt())
}

pub fn wings(q: &Point) -> Result<(WingChain, WingChain), GeomError> {
    let w = wing_half_width(q)?;
    let lc = Point::new(q.x - w, 0.0, q.id);
    let rc = Point::new(q.x + w, 0.0, q.id);
    let left = WingChain {
        arc: UnitArc { center: lc, xl: lc.x, xr: q.x, side: Side::BelowSeparator, source_id: q.id },
        vertex: Point::new(lc.x, -1.0, q.id),
    };
    let right = WingChain {
        arc: UnitArc { center: rc, xl: q.x, xr: rc.x, side: Side::BelowSeparator, source_id: q.id },
        vertex: Point::new(rc.x, -1.0, q.id),
    };
    Ok((left, right))
}

/// Whether the right wing vertex of `q` lies strictly left of the left wing vertex of `r`.
pub fn far_away(q: &Point, r: &Point) -> bool {
    match (wing_half_width(q), wing_half_width(r)) {
        (Ok(wq), Ok(wr)) => q.x + wq < r.x - wr - tolerance(),
        _ => false,
    }
}

/// Acute angle between the horizontal and the tangent of `g` at its endpoint `p`.
pub fn tangent_angle(g: &UnitArc, p: &Point) -> f64 {
    let rx = p.x - g.center.x;
    let ry = p.y - g.center.y;
    // the tangent is perpendicular to the radius
    let (tx, ty) = (-ry, rx);
    if tx == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    (ty.abs() / tx.abs()).atan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn arc_from_center_values() {
        let g = arc_from_center(Point::xy(0.0, 0.5), 0.0).unwrap().unwrap();
        assert_abs_diff_eq!(g.xl, -0.8660254, epsilon = 1e-7);
        assert_abs_diff_eq!(g.xr, 0.8660254, epsilon = 1e-7);
        assert_abs_diff_eq!(arc_y_at(&g, 0.0).unwrap(), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(arc_y_at(&g, 0.8660254).unwrap(), 0.0, epsilon = 1e-6);
        assert!(arc_y_at(&g, 2.0).is_none());
        assert!(arc_from_center(Point::xy(0.0, 1.0), 0.0).unwrap().is_none());
        let g = arc_from_center(Point::xy(2.0, 0.999), 0.0).unwrap().unwrap();
        assert_abs_diff_eq!(g.xr - g.xl, 0.0894, epsilon = 1e-4);
        assert_abs_diff_eq!((g.xl + g.xr) / 2.0, 2.0, epsilon = 1e-12);
        assert!(Point::try_new(f64::NAN, 0.0, 0).is_err());
    }

    #[test]
    fn below_point() {
        let g = arc_from_center(Point::xy(0.0, 0.5), 0.0).unwrap().unwrap();
        assert!(arc_below_point(&Point::xy(0.0, -0.4), &g));
        assert!(!arc_below_point(&Point::xy(0.0, -0.6), &g));
        assert!(!arc_below_point(&Point::xy(0.9, -0.1), &g));
    }

    #[test]
    fn crossing() {
        let a = arc_from_center(Point::xy(-0.3, 0.4), 0.0).unwrap().unwrap();
        let b = arc_from_center(Point::xy(0.3, 0.4), 0.0).unwrap().unwrap();
        let p = arc_arc_crossing(&a, &b).unwrap();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        // circle-circle oracle: 0.4 - sqrt(1 - 0.3^2)
        assert_abs_diff_eq!(p.y, 0.4 - 0.91f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(p.dist(&a.center), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.dist(&b.center), 1.0, epsilon = 1e-12);
        let c = arc_from_center(Point::xy(5.0, 0.5), 0.0).unwrap().unwrap();
        let d = arc_from_center(Point::xy(0.0, 0.5), 0.0).unwrap().unwrap();
        assert!(arc_arc_crossing(&d, &c).is_none());
        assert!(arc_arc_crossing(&a, &a).is_none());
    }

    #[test]
    fn connecting() {
        let g = connecting_arc(&Point::xy(-0.6, -0.2), &Point::xy(0.6, -0.2)).unwrap().unwrap();
        assert_abs_diff_eq!(g.center.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.center.y, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(g.y_at(0.0).unwrap(), -0.4, epsilon = 1e-12);
        assert!(connecting_arc(&Point::xy(-1.5, -0.1), &Point::xy(1.5, -0.1)).unwrap().is_none());
        let g = connecting_arc(&Point::xy(-0.5, -0.3), &Point::xy(0.5, -0.3)).unwrap().unwrap();
        assert_abs_diff_eq!(g.center.y, 0.5660254, epsilon = 1e-7);
        assert!(connecting_arc(&Point::xy(1.0, -0.3), &Point::xy(1.0, -0.3)).is_err());
    }

    #[test]
    fn concave() {
        let g = concave_arc(&Point::xy(-0.2, 0.6), &Point::xy(0.2, 0.6)).unwrap();
        assert_abs_diff_eq!(g.center.y, -0.3797959, epsilon = 1e-7);
        let g = concave_arc(&Point::xy(-0.5, 0.5), &Point::xy(0.5, 0.5)).unwrap();
        assert_abs_diff_eq!(g.center.y, -0.3660254, epsilon = 1e-7);
        assert!(concave_arc(&Point::xy(0.0, 0.5), &Point::xy(3.0, 0.5)).is_none());
    }

    #[test]
    fn wing_values() {
        let (l, r) = wings(&Point::xy(0.0, -0.3)).unwrap();
        assert_abs_diff_eq!(r.vertex.x, 0.9539392, epsilon = 1e-7);
        assert_abs_diff_eq!(l.vertex.x, -0.9539392, epsilon = 1e-7);
        assert_eq!(r.vertex.y, -1.0);
        let (l, r) = wings(&Point::xy(0.0, 0.0)).unwrap();
        assert_eq!((l.vertex.x, r.vertex.x), (-1.0, 1.0));
        let (l, r) = wings(&Point::xy(5.0, -0.999)).unwrap();
        assert_abs_diff_eq!(r.vertex.x, 5.0447, epsilon = 1e-4);
        assert_abs_diff_eq!(l.vertex.x, 4.9553, epsilon = 1e-4);
        assert_eq!(wings(&Point::xy(0.0, -1.0)), Err(GeomError::IrrelevantPoint));
    }

    #[test]
    fn far_away_values() {
        assert!(far_away(&Point::xy(-2.0, -0.1), &Point::xy(2.0, -0.1)));
        assert!(!far_away(&Point::xy(-0.5, -0.3), &Point::xy(0.5, -0.3)));
        assert!(!far_away(&Point::xy(-1.0, 0.0), &Point::xy(1.0, 0.0)));
    }

    #[test]
    fn tangent_angles() {
        let l = Point::xy(-0.2, 0.6);
        let r = Point::xy(0.2, 0.6);
        let g = concave_arc(&l, &r).unwrap();
        assert_abs_diff_eq!(tangent_angle(&g, &l), 0.2f64.asin(), epsilon = 1e-12);
        assert_abs_diff_eq!(tangent_angle(&g, &r), tangent_angle(&g, &l), epsilon = 1e-12);
        let apex = Point::xy(g.center.x, g.center.y + 1.0);
        assert_abs_diff_eq!(tangent_angle(&g, &apex), 0.0, epsilon = 1e-12);
    }
}
