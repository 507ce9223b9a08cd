//! Planar polygon primitives and predicates.
//!
//! Coordinates are treated as planar lon/lat; at city scale the great-circle
//! correction is negligible and no reprojection is performed. All containment
//! and intersection predicates are boundary-inclusive: a point on an edge is
//! contained, and two polygons touching at a single corner intersect.

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Axis-aligned bounding box, inclusive on all sides.
#[derive(Clone, Copy, Debug)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    fn of(points: &[Point]) -> BBox {
        let mut b = BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in points {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    fn union(self, other: BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Touching boxes count as intersecting, so the prefilter never produces
    /// a false negative for boundary-inclusive geometry predicates.
    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }
}

/// Signed area of the triangle (a, b, c), twice. Positive for counter-clockwise.
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// True when `p` is collinear with segment (a, b) and lies within its extent.
fn on_segment(a: Point, b: Point, p: Point) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Segment intersection, endpoints and collinear overlap included.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// A simple polygon with optional holes.
///
/// Rings are stored open (no closing duplicate vertex); edges run between
/// consecutive vertices and from the last back to the first.
#[derive(Clone, Debug)]
pub struct Polygon {
    exterior: Vec<Point>,
    holes: Vec<Vec<Point>>,
    bbox: BBox,
}

/// Normalizes a raw ring: drops the closing duplicate if present (closing an
/// unclosed ring is implicit), collapses consecutive duplicate vertices, and
/// rejects rings that are degenerate or self-intersecting.
fn normalize_ring(raw: &[Point]) -> Result<Vec<Point>, String> {
    let mut ring: Vec<Point> = Vec::with_capacity(raw.len());
    for &p in raw {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err("non-finite coordinate".into());
        }
        if ring.last() != Some(&p) {
            ring.push(p);
        }
    }
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(format!("ring has {} distinct vertices, need >= 3", ring.len()));
    }
    check_simple(&ring)?;
    Ok(ring)
}

fn check_simple(ring: &[Point]) -> Result<(), String> {
    let n = ring.len();
    let edge = |i: usize| (ring[i], ring[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        // Adjacent edges may meet only at their shared vertex.
        let (_, c) = edge((i + 1) % n);
        if on_segment(a, b, c) || on_segment(b, c, a) {
            return Err(format!("degenerate spike at vertex {}", (i + 1) % n));
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // first and last edge are adjacent
            }
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return Err(format!("edges {i} and {j} intersect"));
            }
        }
    }
    Ok(())
}

/// Even-odd crossing test. Only valid for points not on the ring boundary.
fn ray_crossings(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            let x = a.x + t * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_ring_boundary(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    (0..n).any(|i| on_segment(ring[i], ring[(i + 1) % n], p))
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Polygon, String> {
        let exterior = normalize_ring(&exterior)?;
        let holes = holes
            .iter()
            .map(|h| normalize_ring(h))
            .collect::<Result<Vec<_>, _>>()?;
        let bbox = BBox::of(&exterior);
        Ok(Polygon {
            exterior,
            holes,
            bbox,
        })
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(
            vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
            vec![],
        )
        .expect("rectangle is a valid polygon")
    }

    pub fn exterior(&self) -> &[Point] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.holes
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    /// Boundary-inclusive containment; hole boundaries count as contained,
    /// hole interiors do not.
    pub fn contains(&self, p: Point) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        for ring in self.rings() {
            if on_ring_boundary(ring, p) {
                return true;
            }
        }
        if !ray_crossings(&self.exterior, p) {
            return false;
        }
        !self.holes.iter().any(|h| ray_crossings(h, p))
    }

    /// Boundary-inclusive intersection: shared interior, shared edge, or a
    /// single shared corner all count.
    pub fn intersects(&self, other: &Polygon) -> bool {
        if !self.bbox.intersects(&other.bbox) {
            return false;
        }
        for ra in self.rings() {
            for rb in other.rings() {
                let na = ra.len();
                let nb = rb.len();
                for i in 0..na {
                    let (a1, a2) = (ra[i], ra[(i + 1) % na]);
                    for j in 0..nb {
                        let (b1, b2) = (rb[j], rb[(j + 1) % nb]);
                        if segments_intersect(a1, a2, b1, b2) {
                            return true;
                        }
                    }
                }
            }
        }
        // No edge contact: one polygon may still lie strictly inside the other.
        self.contains(other.exterior[0]) || other.contains(self.exterior[0])
    }
}

/// Region geometry: one or more polygons (GeoJSON Polygon or MultiPolygon).
#[derive(Clone, Debug)]
pub struct RegionGeometry {
    parts: Vec<Polygon>,
    bbox: BBox,
}

impl RegionGeometry {
    pub fn new(parts: Vec<Polygon>) -> Result<RegionGeometry, String> {
        if parts.is_empty() {
            return Err("geometry has no polygons".into());
        }
        let bbox = parts
            .iter()
            .map(|p| *p.bbox())
            .reduce(BBox::union)
            .unwrap();
        Ok(RegionGeometry { parts, bbox })
    }

    pub fn parts(&self) -> &[Polygon] {
        &self.parts
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn contains(&self, p: Point) -> bool {
        self.bbox.contains(p) && self.parts.iter().any(|poly| poly.contains(p))
    }

    pub fn intersects(&self, other: &RegionGeometry) -> bool {
        if !self.bbox.intersects(&other.bbox) {
            return false;
        }
        self.parts
            .iter()
            .any(|a| other.parts.iter().any(|b| a.intersects(b)))
    }
}
