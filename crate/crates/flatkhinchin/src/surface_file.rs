//! JSON surface descriptions and the `--surface` argument.
//!
//! ```json
//! {"polygons": [[[0,0],[1,0],[1,1],[0,1]]],
//!  "gluings": [[0,0,0,2],[0,1,0,3]],
//!  "marked_points": [[0,0]]}
//! ```
//!
//! Coordinates may be JSON numbers, decimal strings or `"p/q"` strings.

use std::fs;
use std::path::Path;

use flatkhinchin_core::{Builtin, Corner, EdgeGluing, PolygonSpec, SurfaceError, TranslationSurface, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SurfaceFileError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing surface JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad coordinate `{0}`")]
    Coordinate(String),
    #[error("unknown surface `{0}` (use torus, l-shape:A,B, octagon or a JSON file)")]
    Unknown(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coord {
    Number(f64),
    Text(String),
}

impl Coord {
    pub fn value(&self) -> Result<f64, SurfaceFileError> {
        match self {
            Coord::Number(x) => Ok(*x),
            Coord::Text(s) => parse_coordinate(s),
        }
    }
}

fn parse_coordinate(s: &str) -> Result<f64, SurfaceFileError> {
    let bad = || SurfaceFileError::Coordinate(s.to_string());
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            p / q
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub polygons: Vec<Vec<[Coord; 2]>>,
    pub gluings: Vec<[usize; 4]>,
    #[serde(default)]
    pub marked_points: Vec<[usize; 2]>,
}

impl SurfaceFile {
    pub fn build(&self) -> Result<TranslationSurface, SurfaceFileError> {
        let polygons = self
            .polygons
            .iter()
            .map(|p| {
                p.iter()
                    .map(|[x, y]| Ok(Vec2::new(x.value()?, y.value()?)))
                    .collect::<Result<Vec<_>, SurfaceFileError>>()
                    .map(PolygonSpec::new)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let gluings = self.gluings.iter().map(|g| EdgeGluing::new(g[0], g[1], g[2], g[3])).collect();
        let marked: Vec<Corner> = self
            .marked_points
            .iter()
            .map(|&[poly, vertex]| Corner { poly, vertex })
            .collect();
        Ok(TranslationSurface::new(polygons, gluings, &marked)?)
    }

    pub fn from_surface(surface: &TranslationSurface) -> Self {
        SurfaceFile {
            polygons: surface
                .polygons()
                .iter()
                .map(|p| (0..p.len()).map(|i| [Coord::Number(p.vertex(i).x), Coord::Number(p.vertex(i).y)]).collect())
                .collect(),
            gluings: surface
                .gluings()
                .iter()
                .map(|g| [g.poly_a, g.edge_a, g.poly_b, g.edge_b])
                .collect(),
            marked_points: surface.marked_corners().iter().map(|c| [c.poly, c.vertex]).collect(),
        }
    }
}

pub fn parse_surface_json(text: &str) -> Result<TranslationSurface, SurfaceFileError> {
    serde_json::from_str::<SurfaceFile>(text)?.build()
}

pub fn surface_to_json(surface: &TranslationSurface) -> String {
    serde_json::to_string_pretty(&SurfaceFile::from_surface(surface)).expect("plain data")
}

/// Builtin names (`torus`, `l-shape:A,B`, `octagon`) or a path to JSON.
pub fn parse_builtin(name: &str) -> Option<Builtin> {
    let lower = name.trim().to_ascii_lowercase();
    match lower.as_str() {
        "torus" | "square-torus" | "square_torus" => return Some(Builtin::SquareTorus),
        "octagon" | "regular-octagon" | "regular_octagon" => return Some(Builtin::RegularOctagon),
        "l" | "l-shape" | "l_shape" => return Some(Builtin::LShape { a: 2.0, b: 2.0 }),
        _ => {}
    }
    let args = lower
        .strip_prefix("l-shape:")
        .or_else(|| lower.strip_prefix("l_shape:"))
        .or_else(|| lower.strip_prefix("l(").and_then(|s| s.strip_suffix(')')))?;
    let (a, b) = args.split_once(',')?;
    Some(Builtin::LShape {
        a: parse_coordinate(a).ok()?,
        b: parse_coordinate(b).ok()?,
    })
}

pub fn resolve_surface(spec: &str) -> Result<TranslationSurface, SurfaceFileError> {
    if let Some(b) = parse_builtin(spec) {
        return Ok(b.build()?);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(SurfaceFileError::Unknown(spec.to_string()));
    }
    let text = fs::read_to_string(path).map_err(|source| SurfaceFileError::Io {
        path: spec.to_string(),
        source,
    })?;
    parse_surface_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_and_decimal_coordinates() {
        let text = r#"{"polygons":[[["0","0"],["1/1",0],[1,"1"],[0,"2/2"]]],
                       "gluings":[[0,0,0,2],[0,1,0,3]],"marked_points":[[0,0]]}"#;
        let s = parse_surface_json(text).unwrap();
        assert_eq!(s.genus(), 1);
        assert_eq!(s.marked_corners().len(), 1);
        assert!(matches!(parse_coordinate("1/0"), Err(SurfaceFileError::Coordinate(_))));
        assert!(parse_coordinate("abc").is_err());
    }

    #[test]
    fn builtin_names() {
        assert_eq!(parse_builtin("torus"), Some(Builtin::SquareTorus));
        assert_eq!(parse_builtin("L(2,3)"), Some(Builtin::LShape { a: 2.0, b: 3.0 }));
        assert_eq!(parse_builtin("l-shape:3/2,2"), Some(Builtin::LShape { a: 1.5, b: 2.0 }));
        assert_eq!(parse_builtin("pentagon"), None);
        assert!(matches!(resolve_surface("no/such/file.json"), Err(SurfaceFileError::Unknown(_))));
    }
}
