//! Translation surfaces built from polygons glued along parallel edges.
//!
//! Polygons are given counterclockwise; edge `i` of a polygon runs from
//! vertex `i` to vertex `i + 1`. A gluing identifies two edges whose vectors
//! are opposite, so that crossing one edge re-enters the surface through the
//! other by a pure translation.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geom::{ccw_angle, point_segment_distance, segments_intersect, signed_area2, Vec2};

/// Relative tolerance for edge-vector agreement in gluings.
pub const GLUING_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonSpec {
    pub vertices: Vec<Vec2>,
}

impl PolygonSpec {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        PolygonSpec { vertices }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> Vec2 {
        self.vertices[i % self.vertices.len()]
    }

    /// Endpoints of edge `i`.
    #[inline]
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertex(i), self.vertex(i + 1))
    }

    #[inline]
    pub fn edge_vector(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        b - a
    }

    pub fn area(&self) -> f64 {
        0.5 * signed_area2(&self.vertices)
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }

    /// Whether `q` lies inside the polygon or within `tol` of its boundary.
    pub fn contains(&self, q: Vec2, tol: f64) -> bool {
        let n = self.len();
        for i in 0..n {
            let (a, b) = self.edge(i);
            if point_segment_distance(q, a, b) <= tol {
                return true;
            }
        }
        // crossing-number test
        let mut inside = false;
        for i in 0..n {
            let (a, b) = self.edge(i);
            if (a.y > q.y) != (b.y > q.y) {
                let x = a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if q.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn is_simple(&self) -> bool {
        let n = self.len();
        for i in 0..n {
            let (a, b) = self.edge(i);
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (c, d) = self.edge(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

/// Identification of edge `edge_a` of polygon `poly_a` with edge `edge_b` of
/// polygon `poly_b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeGluing {
    pub poly_a: usize,
    pub edge_a: usize,
    pub poly_b: usize,
    pub edge_b: usize,
}

impl EdgeGluing {
    pub const fn new(poly_a: usize, edge_a: usize, poly_b: usize, edge_b: usize) -> Self {
        EdgeGluing {
            poly_a,
            edge_a,
            poly_b,
            edge_b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRef {
    pub poly: usize,
    pub edge: usize,
}

/// The corner of polygon `poly` at vertex index `vertex`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Corner {
    pub poly: usize,
    pub vertex: usize,
}

/// An equivalence class of polygon vertices, i.e. one point of the surface.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexClass {
    /// Corners in counterclockwise order around the point.
    pub corners: Vec<Corner>,
    /// Total angle is `2*pi*cone_multiple`.
    pub cone_multiple: u32,
    pub marked: bool,
}

impl VertexClass {
    pub fn cone_angle(&self) -> f64 {
        2.0 * PI * f64::from(self.cone_multiple)
    }

    /// Order of the zero of the associated abelian differential; zero for
    /// regular and marked points.
    pub fn multiplicity(&self) -> u32 {
        self.cone_multiple.saturating_sub(1)
    }

    /// Cone points and marked points stop the flow.
    pub fn is_singular(&self) -> bool {
        self.cone_multiple != 1 || self.marked
    }
}

/// A point of the surface: a polygon and coordinates in that polygon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub polygon: usize,
    pub pos: Vec2,
}

impl SurfacePoint {
    pub const fn new(polygon: usize, pos: Vec2) -> Self {
        SurfacePoint { polygon, pos }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SurfaceError {
    #[error("polygon {poly} is invalid: {reason}")]
    BadPolygon { poly: usize, reason: &'static str },
    #[error("gluing {index} refers to a missing polygon or edge")]
    BadGluingIndex { index: usize },
    #[error("edge {edge} of polygon {poly} is glued more than once")]
    EdgeGluedTwice { poly: usize, edge: usize },
    #[error("edge {edge} of polygon {poly} is not glued")]
    UnpairedEdge { poly: usize, edge: usize },
    #[error("gluing {index}: edges differ in length or are not antiparallel")]
    MismatchedEdge { index: usize },
    #[error("marked point ({poly}, {vertex}) is not a polygon vertex")]
    BadMarkedPoint { poly: usize, vertex: usize },
    #[error("degenerate surface: {0}")]
    DegenerateSurface(&'static str),
    #[error("bad parameter: {0}")]
    BadParameter(&'static str),
}

/// Per-edge quantities the flow needs at every step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct EdgeData {
    pub a: Vec2,
    pub b: Vec2,
    pub e: Vec2,
    /// Outward normal (not normalized).
    pub normal: Vec2,
    pub inv_norm2: f64,
}

/// An immutable translation surface with its derived topological data.
#[derive(Clone, Debug)]
pub struct TranslationSurface {
    polygons: Vec<PolygonSpec>,
    gluings: Vec<EdgeGluing>,
    marked: Vec<Corner>,
    partner: Vec<Vec<EdgeRef>>,
    shift: Vec<Vec<Vec2>>,
    corner_class: Vec<Vec<usize>>,
    /// Per corner: bit 0 singular, bit 1 cone point.
    corner_flags: Vec<Vec<u8>>,
    convex: Vec<bool>,
    edge_data: Vec<Vec<EdgeData>>,
    corner_angle: Vec<Vec<f64>>,
    corner_offset: Vec<Vec<f64>>,
    classes: Vec<VertexClass>,
    total_area: f64,
    genus: u32,
    scale: f64,
    shortest_edge: f64,
}

impl TranslationSurface {
    /// Validates the gluing data and computes vertex classes, cone angles,
    /// genus and area. `marked` declares extra corners whose vertex classes
    /// should stop the flow even when their cone angle is `2*pi`.
    pub fn new(
        polygons: Vec<PolygonSpec>,
        gluings: Vec<EdgeGluing>,
        marked: &[Corner],
    ) -> Result<Self, SurfaceError> {
        if polygons.is_empty() {
            return Err(SurfaceError::DegenerateSurface("no polygons"));
        }
        for (i, p) in polygons.iter().enumerate() {
            if p.len() < 3 {
                return Err(SurfaceError::BadPolygon {
                    poly: i,
                    reason: "fewer than 3 vertices",
                });
            }
            if p.vertices.iter().any(|v| !v.is_finite()) {
                return Err(SurfaceError::BadPolygon {
                    poly: i,
                    reason: "non-finite coordinate",
                });
            }
            if (0..p.len()).any(|e| p.edge_vector(e).norm() == 0.0) {
                return Err(SurfaceError::BadPolygon {
                    poly: i,
                    reason: "zero-length edge",
                });
            }
            if p.area() <= 0.0 {
                return Err(SurfaceError::DegenerateSurface(
                    "polygon with non-positive signed area (vertices must be counterclockwise)",
                ));
            }
            if !p.is_simple() {
                return Err(SurfaceError::BadPolygon {
                    poly: i,
                    reason: "self-intersecting",
                });
            }
        }

        let mut partner: Vec<Vec<Option<EdgeRef>>> =
            polygons.iter().map(|p| vec![None; p.len()]).collect();
        for (index, g) in gluings.iter().enumerate() {
            let valid = |poly: usize, edge: usize| poly < polygons.len() && edge < polygons[poly].len();
            if !valid(g.poly_a, g.edge_a) || !valid(g.poly_b, g.edge_b) {
                return Err(SurfaceError::BadGluingIndex { index });
            }
            if g.poly_a == g.poly_b && g.edge_a == g.edge_b {
                return Err(SurfaceError::MismatchedEdge { index });
            }
            for (p, e) in [(g.poly_a, g.edge_a), (g.poly_b, g.edge_b)] {
                if partner[p][e].is_some() {
                    return Err(SurfaceError::EdgeGluedTwice { poly: p, edge: e });
                }
            }
            let va = polygons[g.poly_a].edge_vector(g.edge_a);
            let vb = polygons[g.poly_b].edge_vector(g.edge_b);
            if (va + vb).norm() > GLUING_TOLERANCE * va.norm().max(vb.norm()) {
                return Err(SurfaceError::MismatchedEdge { index });
            }
            partner[g.poly_a][g.edge_a] = Some(EdgeRef {
                poly: g.poly_b,
                edge: g.edge_b,
            });
            partner[g.poly_b][g.edge_b] = Some(EdgeRef {
                poly: g.poly_a,
                edge: g.edge_a,
            });
        }
        let mut full_partner = Vec::with_capacity(polygons.len());
        for (p, row) in partner.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (e, slot) in row.iter().enumerate() {
                match slot {
                    Some(r) => out.push(*r),
                    None => return Err(SurfaceError::UnpairedEdge { poly: p, edge: e }),
                }
            }
            full_partner.push(out);
        }
        let partner = full_partner;

        // Start of edge a is identified with the end of its partner edge b.
        let shift: Vec<Vec<Vec2>> = (0..polygons.len())
            .map(|p| {
                (0..polygons[p].len())
                    .map(|e| {
                        let r = partner[p][e];
                        polygons[r.poly].vertex(r.edge + 1) - polygons[p].vertex(e)
                    })
                    .collect()
            })
            .collect();

        let corner_angle: Vec<Vec<f64>> = polygons
            .iter()
            .map(|poly| {
                let n = poly.len();
                (0..n)
                    .map(|k| {
                        let out = poly.edge_vector(k);
                        let back = poly.vertex(k + n - 1) - poly.vertex(k);
                        ccw_angle(out, back)
                    })
                    .collect()
            })
            .collect();

        // Walk corners counterclockwise: after the corner at vertex k we cross
        // edge k-1 and land at the start of its partner edge.
        let mut corner_class: Vec<Vec<usize>> =
            polygons.iter().map(|p| vec![usize::MAX; p.len()]).collect();
        let mut corner_offset: Vec<Vec<f64>> = polygons.iter().map(|p| vec![0.0; p.len()]).collect();
        let mut classes = Vec::new();
        for p0 in 0..polygons.len() {
            for k0 in 0..polygons[p0].len() {
                if corner_class[p0][k0] != usize::MAX {
                    continue;
                }
                let id = classes.len();
                let mut corners = Vec::new();
                let mut total = 0.0;
                let (mut p, mut k) = (p0, k0);
                loop {
                    corner_class[p][k] = id;
                    corner_offset[p][k] = total;
                    corners.push(Corner { poly: p, vertex: k });
                    total += corner_angle[p][k];
                    let n = polygons[p].len();
                    let next = partner[p][(k + n - 1) % n];
                    p = next.poly;
                    k = next.edge;
                    if p == p0 && k == k0 {
                        break;
                    }
                    if corner_class[p][k] != usize::MAX {
                        return Err(SurfaceError::DegenerateSurface("inconsistent vertex identification"));
                    }
                }
                let multiple = libm::round(total / (2.0 * PI));
                if multiple < 1.0 || (total - 2.0 * PI * multiple).abs() > 1e-9 * multiple {
                    return Err(SurfaceError::DegenerateSurface(
                        "cone angle is not a multiple of 2*pi",
                    ));
                }
                classes.push(VertexClass {
                    corners,
                    cone_multiple: multiple as u32,
                    marked: false,
                });
            }
        }
        for m in marked {
            if m.poly >= polygons.len() || m.vertex >= polygons[m.poly].len() {
                return Err(SurfaceError::BadMarkedPoint {
                    poly: m.poly,
                    vertex: m.vertex,
                });
            }
            classes[corner_class[m.poly][m.vertex]].marked = true;
        }

        if !is_connected(&polygons, &partner) {
            return Err(SurfaceError::DegenerateSurface("polygons do not form a connected surface"));
        }

        let vertices = classes.len() as i64;
        let edges = polygons.iter().map(|p| p.len()).sum::<usize>() as i64 / 2;
        let faces = polygons.len() as i64;
        let chi = vertices - edges + faces;
        if chi > 0 || chi % 2 != 0 {
            return Err(SurfaceError::DegenerateSurface("Euler characteristic incompatible with a translation surface"));
        }
        let genus = ((2 - chi) / 2) as u32;
        let excess: i64 = classes.iter().map(|c| i64::from(c.cone_multiple) - 1).sum();
        if excess != 2 * i64::from(genus) - 2 {
            return Err(SurfaceError::DegenerateSurface("cone angles violate Gauss-Bonnet"));
        }

        let total_area: f64 = polygons.iter().map(|p| p.area()).sum();
        if total_area <= 0.0 {
            return Err(SurfaceError::DegenerateSurface("non-positive area"));
        }
        let scale = polygons.iter().map(|p| p.diameter()).fold(0.0, f64::max);
        let shortest_edge = polygons
            .iter()
            .flat_map(|p| (0..p.len()).map(move |e| p.edge_vector(e).norm()))
            .fold(f64::INFINITY, f64::min);

        let mut marked_sorted = marked.to_vec();
        marked_sorted.sort();
        marked_sorted.dedup();

        let corner_flags = corner_class
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&id| {
                        let c = &classes[id];
                        u8::from(c.is_singular()) | (u8::from(c.cone_multiple != 1) << 1)
                    })
                    .collect()
            })
            .collect();
        let convex = corner_angle
            .iter()
            .map(|row| row.iter().all(|&a| a <= PI + 1e-12))
            .collect();
        let edge_data = polygons
            .iter()
            .map(|p| {
                (0..p.len())
                    .map(|i| {
                        let (a, b) = p.edge(i);
                        let e = b - a;
                        EdgeData {
                            a,
                            b,
                            e,
                            normal: Vec2::new(e.y, -e.x),
                            inv_norm2: 1.0 / e.norm2(),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(TranslationSurface {
            polygons,
            gluings,
            marked: marked_sorted,
            partner,
            shift,
            corner_class,
            corner_flags,
            convex,
            edge_data,
            corner_angle,
            corner_offset,
            classes,
            total_area,
            genus,
            scale,
            shortest_edge,
        })
    }

    pub fn polygons(&self) -> &[PolygonSpec] {
        &self.polygons
    }

    #[inline]
    pub fn polygon(&self, i: usize) -> &PolygonSpec {
        &self.polygons[i]
    }

    pub fn gluings(&self) -> &[EdgeGluing] {
        &self.gluings
    }

    pub fn marked_corners(&self) -> &[Corner] {
        &self.marked
    }

    #[inline]
    pub fn partner(&self, e: EdgeRef) -> EdgeRef {
        self.partner[e.poly][e.edge]
    }

    /// Translation taking a point of edge `e` to the same point expressed in
    /// the coordinates of the partner polygon.
    #[inline]
    pub fn edge_shift(&self, e: EdgeRef) -> Vec2 {
        self.shift[e.poly][e.edge]
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }

    #[inline]
    pub fn class_of(&self, c: Corner) -> usize {
        self.corner_class[c.poly][c.vertex]
    }

    #[inline]
    pub fn is_singular_corner(&self, c: Corner) -> bool {
        self.corner_flags[c.poly][c.vertex] & 1 != 0
    }

    #[inline]
    pub(crate) fn edge_data(&self, poly: usize) -> &[EdgeData] {
        &self.edge_data[poly]
    }

    /// A straight segment inside a convex polygon can only meet a vertex
    /// at its ends.
    #[inline]
    pub(crate) fn is_convex(&self, poly: usize) -> bool {
        self.convex[poly]
    }

    #[inline]
    pub(crate) fn corner_flags(&self, poly: usize) -> &[u8] {
        &self.corner_flags[poly]
    }

    /// Interior angle of a polygon corner.
    #[inline]
    pub fn corner_angle(&self, c: Corner) -> f64 {
        self.corner_angle[c.poly][c.vertex]
    }

    /// Angular position where this corner starts inside its cone point.
    #[inline]
    pub fn corner_offset(&self, c: Corner) -> f64 {
        self.corner_offset[c.poly][c.vertex]
    }

    #[inline]
    pub fn corner_point(&self, c: Corner) -> Vec2 {
        self.polygons[c.poly].vertex(c.vertex)
    }

    /// Class ids of cone points and marked points.
    pub fn singular_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_singular())
            .map(|(i, _)| i)
    }

    pub fn genus(&self) -> u32 {
        self.genus
    }

    pub fn euler_characteristic(&self) -> i64 {
        2 - 2 * i64::from(self.genus)
    }

    /// `1/(2g-2)`; undefined on the torus.
    pub fn sigma(&self) -> Option<f64> {
        (self.genus >= 2).then(|| 1.0 / (2.0 * f64::from(self.genus) - 2.0))
    }

    /// Area-fraction threshold used for cylinder selection: `sigma` when
    /// `g >= 2`, and 1 on the torus where every periodic direction is a
    /// single cylinder.
    pub fn sigma_eff(&self) -> f64 {
        self.sigma().unwrap_or(1.0)
    }

    /// `1/sigma_eff` as an integer (`2g-2`, or 1 on the torus).
    pub fn sigma_inverse(&self) -> u32 {
        if self.genus >= 2 {
            2 * self.genus - 2
        } else {
            1
        }
    }

    /// Sum of multiplicities of the cone points; marked points contribute 0.
    pub fn multiplicity_sum(&self) -> u32 {
        self.classes.iter().map(VertexClass::multiplicity).sum()
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// Largest polygon diameter; the length scale for tolerances.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shortest_edge(&self) -> f64 {
        self.shortest_edge
    }

    /// Corners of `class` whose sector contains the outgoing direction `u`,
    /// in counterclockwise order, with the angle of `u` measured inside the
    /// cone point. Each ray from a cone point of angle `2*pi*k` appears once.
    pub fn corners_containing(&self, class: usize, u: Vec2) -> Vec<(Corner, f64)> {
        let tol = 1e-12;
        self.classes[class]
            .corners
            .iter()
            .filter_map(|&c| {
                let local = self.local_angle(c, u);
                let width = self.corner_angle(c);
                let local = if local > 2.0 * PI - tol { local - 2.0 * PI } else { local };
                (local >= -tol && local < width - tol).then(|| (c, self.corner_offset(c) + local.max(0.0)))
            })
            .collect()
    }

    /// Angle of `u` measured counterclockwise from the first edge of the corner.
    pub fn local_angle(&self, c: Corner, u: Vec2) -> f64 {
        ccw_angle(self.polygons[c.poly].edge_vector(c.vertex), u)
    }

    /// Whether `u` points into the polygon at corner `c`.
    pub fn corner_contains(&self, c: Corner, u: Vec2) -> bool {
        let tol = 1e-12;
        let local = self.local_angle(c, u);
        let local = if local > 2.0 * PI - tol { local - 2.0 * PI } else { local };
        local >= -tol && local < self.corner_angle(c) - tol
    }

    /// Moves boundary points to a unique representative: vertices go to the
    /// lowest corner of their class, edge points to the lowest of the two
    /// glued edges.
    pub fn canonicalize(&self, pt: SurfacePoint, tol: f64) -> SurfacePoint {
        let poly = &self.polygons[pt.polygon];
        for k in 0..poly.len() {
            if (pt.pos - poly.vertex(k)).norm() <= tol {
                let class = self.class_of(Corner {
                    poly: pt.polygon,
                    vertex: k,
                });
                let c = *self.classes[class].corners.iter().min().expect("non-empty class");
                return SurfacePoint::new(c.poly, self.corner_point(c));
            }
        }
        for e in 0..poly.len() {
            let (a, b) = poly.edge(e);
            if point_segment_distance(pt.pos, a, b) <= tol {
                let here = EdgeRef {
                    poly: pt.polygon,
                    edge: e,
                };
                let there = self.partner(here);
                let s = ((pt.pos - a).dot(b - a) / (b - a).norm2()).clamp(0.0, 1.0);
                return if here <= there {
                    SurfacePoint::new(pt.polygon, a + (b - a) * s)
                } else {
                    // point a + s(b-a) sits at parameter 1-s of the partner edge
                    let (pa, pb) = self.polygons[there.poly].edge(there.edge);
                    SurfacePoint::new(there.poly, pa + (pb - pa) * (1.0 - s))
                };
            }
        }
        pt
    }

    /// Whether two points coincide on the surface up to `tol`.
    pub fn same_point(&self, a: SurfacePoint, b: SurfacePoint, tol: f64) -> bool {
        let a = self.canonicalize(a, tol);
        let b = self.canonicalize(b, tol);
        a.polygon == b.polygon && (a.pos - b.pos).norm() <= tol
    }

    /// Whether `pt` names an actual point of its polygon (up to `tol`).
    pub fn contains(&self, pt: SurfacePoint, tol: f64) -> bool {
        pt.polygon < self.polygons.len() && self.polygons[pt.polygon].contains(pt.pos, tol)
    }

    /// Corner at which `pt` sits, if it is a polygon vertex.
    pub fn corner_at(&self, pt: SurfacePoint, tol: f64) -> Option<Corner> {
        let poly = &self.polygons[pt.polygon];
        (0..poly.len())
            .find(|&k| (pt.pos - poly.vertex(k)).norm() <= tol)
            .map(|k| Corner {
                poly: pt.polygon,
                vertex: k,
            })
    }
}

/// The covering constant `c = 2^(2^(4m)) * sqrt(s)` for a surface whose
/// multiplicities sum to `m` and whose shortest saddle connection has
/// length `s`. Only the base-2 logarithm is kept exactly; the value itself
/// overflows `f64` as soon as `m >= 16`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VorobetsConstant {
    pub multiplicity_sum: u32,
    pub shortest_saddle: f64,
    pub log2: f64,
}

impl VorobetsConstant {
    pub fn new(multiplicity_sum: u32, shortest_saddle: f64) -> Result<Self, SurfaceError> {
        if !(shortest_saddle > 0.0) || !shortest_saddle.is_finite() {
            return Err(SurfaceError::BadParameter("shortest saddle length must be positive"));
        }
        // 2^(4m) is exact in f64 up to m = 255
        if multiplicity_sum > 255 {
            return Err(SurfaceError::BadParameter("multiplicity sum too large to represent"));
        }
        let log2 = libm::exp2(4.0 * f64::from(multiplicity_sum)) + 0.5 * libm::log2(shortest_saddle);
        Ok(VorobetsConstant {
            multiplicity_sum,
            shortest_saddle,
            log2,
        })
    }

    /// The constant as an `f64`, or `None` when it overflows.
    pub fn value(&self) -> Option<f64> {
        let v = libm::exp2(self.log2);
        v.is_finite().then_some(v)
    }

    /// Whether `c` does not exceed the constant.
    pub fn bounds(&self, c: f64) -> bool {
        c <= 0.0 || libm::log2(c) <= self.log2
    }
}

fn is_connected(polygons: &[PolygonSpec], partner: &[Vec<EdgeRef>]) -> bool {
    let mut seen = vec![false; polygons.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(p) = stack.pop() {
        for r in &partner[p] {
            if !seen[r.poly] {
                seen[r.poly] = true;
                stack.push(r.poly);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> PolygonSpec {
        PolygonSpec::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
    }

    fn torus_gluings() -> Vec<EdgeGluing> {
        vec![EdgeGluing::new(0, 0, 0, 2), EdgeGluing::new(0, 1, 0, 3)]
    }

    #[test]
    fn square_torus_topology() {
        let s = TranslationSurface::new(vec![square()], torus_gluings(), &[]).unwrap();
        assert_eq!(s.genus(), 1);
        assert_eq!(s.classes().len(), 1);
        assert_eq!(s.classes()[0].cone_multiple, 1);
        assert!(!s.classes()[0].is_singular());
        assert_eq!(s.total_area(), 1.0);
        assert_eq!(s.sigma(), None);
        assert_eq!(s.sigma_eff(), 1.0);
        assert_eq!(s.multiplicity_sum(), 0);
    }

    #[test]
    fn marking_makes_the_vertex_singular() {
        let s = TranslationSurface::new(vec![square()], torus_gluings(), &[Corner { poly: 0, vertex: 2 }])
            .unwrap();
        assert!(s.classes()[0].is_singular());
        assert_eq!(s.singular_classes().count(), 1);
        assert_eq!(s.multiplicity_sum(), 0);
    }

    #[test]
    fn unpaired_edge() {
        let err = TranslationSurface::new(vec![square()], vec![EdgeGluing::new(0, 0, 0, 2)], &[]).unwrap_err();
        assert!(matches!(err, SurfaceError::UnpairedEdge { poly: 0, .. }));
    }

    #[test]
    fn mismatched_and_duplicate_gluings() {
        let rect = PolygonSpec::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]);
        let err = TranslationSurface::new(
            vec![rect],
            vec![EdgeGluing::new(0, 0, 0, 1), EdgeGluing::new(0, 2, 0, 3)],
            &[],
        )
        .unwrap_err();
        assert_eq!(err, SurfaceError::MismatchedEdge { index: 0 });

        let err = TranslationSurface::new(
            vec![square()],
            vec![EdgeGluing::new(0, 0, 0, 2), EdgeGluing::new(0, 2, 0, 0)],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, SurfaceError::EdgeGluedTwice { .. }));
    }

    #[test]
    fn clockwise_polygon_is_degenerate() {
        let mut p = square();
        p.vertices.reverse();
        let err = TranslationSurface::new(vec![p], torus_gluings(), &[]).unwrap_err();
        assert!(matches!(err, SurfaceError::DegenerateSurface(_)));
    }

    #[test]
    fn canonical_boundary_points() {
        let s = TranslationSurface::new(vec![square()], torus_gluings(), &[]).unwrap();
        let left = SurfacePoint::new(0, Vec2::new(0.0, 0.3));
        let right = SurfacePoint::new(0, Vec2::new(1.0, 0.3));
        assert!(s.same_point(left, right, 1e-12));
        let c = s.canonicalize(SurfacePoint::new(0, Vec2::new(1.0, 1.0)), 1e-12);
        assert_eq!(c.pos, Vec2::new(0.0, 0.0));
        assert!(!s.same_point(left, SurfacePoint::new(0, Vec2::new(0.0, 0.4)), 1e-12));
    }

    #[test]
    fn vorobets_constant_values() {
        let c = VorobetsConstant::new(1, 1.0).unwrap();
        assert_eq!(c.value(), Some(65536.0));
        let c = VorobetsConstant::new(2, 1.0).unwrap();
        assert_eq!(c.log2, 256.0);
        let c = VorobetsConstant::new(1, 4.0).unwrap();
        assert_eq!(c.value(), Some(131072.0));
        let c = VorobetsConstant::new(64, 1.0).unwrap();
        assert!(c.value().is_none());
        assert!(c.log2.is_finite());
        assert!(c.bounds(1e300));
        assert!(VorobetsConstant::new(1, 0.0).is_err());
    }

    #[test]
    fn corners_containing_a_direction() {
        let s = TranslationSurface::new(vec![square()], torus_gluings(), &[]).unwrap();
        let hits = s.corners_containing(0, Vec2::new(1.0, 1.0));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, Corner { poly: 0, vertex: 0 });
        // along an edge: exactly one corner claims it
        assert_eq!(s.corners_containing(0, Vec2::new(1.0, 0.0)).len(), 1);
        assert_eq!(s.corners_containing(0, Vec2::new(0.0, -1.0)).len(), 1);
    }
}
