//! Standard test surfaces.

use alloc::vec;

use crate::geom::Vec2;
use crate::surface::{Corner, EdgeGluing, PolygonSpec, SurfaceError, TranslationSurface};

/// Named fixture surfaces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    /// Unit square with opposite sides glued; the corner is marked.
    SquareTorus,
    /// L-shaped table: an `a x 1` bottom arm and a `1 x b` left column.
    LShape { a: f64, b: f64 },
    /// Regular octagon with unit sides and opposite sides glued.
    RegularOctagon,
}

impl Builtin {
    pub fn build(self) -> Result<TranslationSurface, SurfaceError> {
        match self {
            Builtin::SquareTorus => square_torus(),
            Builtin::LShape { a, b } => l_shape(a, b),
            Builtin::RegularOctagon => regular_octagon(),
        }
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonSpec {
    PolygonSpec::new(vec![
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
    ])
}

pub fn square_torus() -> Result<TranslationSurface, SurfaceError> {
    TranslationSurface::new(
        vec![rect(0.0, 0.0, 1.0, 1.0)],
        vec![EdgeGluing::new(0, 0, 0, 2), EdgeGluing::new(0, 1, 0, 3)],
        &[Corner { poly: 0, vertex: 0 }],
    )
}

/// Three rectangles: the unit square, the right arm `[1,a] x [0,1]` and the
/// top arm `[0,1] x [1,b]`. Edges are numbered bottom, right, top, left.
pub fn l_shape(a: f64, b: f64) -> Result<TranslationSurface, SurfaceError> {
    if !(a > 1.0 && b > 1.0 && a.is_finite() && b.is_finite()) {
        return Err(SurfaceError::BadParameter("L(a,b) needs finite a, b > 1"));
    }
    let polygons = vec![rect(0.0, 0.0, 1.0, 1.0), rect(1.0, 0.0, a, 1.0), rect(0.0, 1.0, 1.0, b)];
    let gluings = vec![
        EdgeGluing::new(0, 1, 1, 3),
        EdgeGluing::new(1, 1, 0, 3),
        EdgeGluing::new(0, 2, 2, 0),
        EdgeGluing::new(2, 2, 0, 0),
        EdgeGluing::new(1, 2, 1, 0),
        EdgeGluing::new(2, 1, 2, 3),
    ];
    TranslationSurface::new(polygons, gluings, &[])
}

pub fn regular_octagon() -> Result<TranslationSurface, SurfaceError> {
    let mut vertices = vec![Vec2::ZERO; 8];
    for k in 1..8 {
        let (s, c) = libm::sincos(core::f64::consts::FRAC_PI_4 * (k - 1) as f64);
        vertices[k] = vertices[k - 1] + Vec2::new(c, s);
    }
    let gluings = (0..4).map(|i| EdgeGluing::new(0, i, 0, i + 4)).collect();
    TranslationSurface::new(vec![PolygonSpec::new(vertices)], gluings, &[])
}
