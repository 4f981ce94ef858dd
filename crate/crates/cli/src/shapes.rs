//! JSON shape model shared by all subcommands.
//!
//! ```json
//! {"type":"hbb","x":3,"y":4,"w":6,"h":12}
//! {"type":"obb","x":0,"y":0,"w":4,"h":2,"theta":0.3}
//! {"type":"gbb","x":0,"y":0,"a":1,"b":1,"c":0}
//! {"type":"ellipse","x":0,"y":0,"semi_major":2,"semi_minor":1,"theta":0}
//! {"type":"polygon","vertices":[[0,0],[1,0],[0,1]]}
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use gbbkit::{
    gbb_to_ellipse, gbb_to_obb, hbb_to_gbb, mask_to_gbb, mask_to_hbb, mask_to_obb, obb_to_gbb,
    Ellipse, GaussBox, GbbError, Hbb, Obb, PolygonMask, Shape, DEFAULT_LEVEL_RADIUS,
};
use serde::{Deserialize, Serialize};

/// Vertices used when an ellipse is written out as a polygon.
pub const ELLIPSE_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSpec {
    Hbb { x: f64, y: f64, w: f64, h: f64 },
    Obb { x: f64, y: f64, w: f64, h: f64, theta: f64 },
    Gbb { x: f64, y: f64, a: f64, b: f64, c: f64 },
    Ellipse { x: f64, y: f64, semi_major: f64, semi_minor: f64, theta: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Hbb,
    Obb,
    Gbb,
    Ellipse,
    Polygon,
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hbb" => Ok(Self::Hbb),
            "obb" => Ok(Self::Obb),
            "gbb" => Ok(Self::Gbb),
            "ellipse" => Ok(Self::Ellipse),
            "polygon" => Ok(Self::Polygon),
            other => Err(format!("unknown representation '{other}' (expected hbb, obb, gbb, ellipse or polygon)")),
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hbb => "hbb",
            Self::Obb => "obb",
            Self::Gbb => "gbb",
            Self::Ellipse => "ellipse",
            Self::Polygon => "polygon",
        })
    }
}

impl From<Hbb> for ShapeSpec {
    fn from(b: Hbb) -> Self {
        Self::Hbb { x: b.x0, y: b.y0, w: b.w, h: b.h }
    }
}

impl From<Obb> for ShapeSpec {
    fn from(o: Obb) -> Self {
        Self::Obb { x: o.x0, y: o.y0, w: o.w, h: o.h, theta: o.theta }
    }
}

impl From<GaussBox> for ShapeSpec {
    fn from(g: GaussBox) -> Self {
        Self::Gbb { x: g.x0, y: g.y0, a: g.a, b: g.b, c: g.c }
    }
}

impl From<Ellipse> for ShapeSpec {
    fn from(e: Ellipse) -> Self {
        Self::Ellipse {
            x: e.x0,
            y: e.y0,
            semi_major: e.semi_major,
            semi_minor: e.semi_minor,
            theta: e.theta,
        }
    }
}

impl From<&PolygonMask> for ShapeSpec {
    fn from(p: &PolygonMask) -> Self {
        Self::Polygon { vertices: p.vertices().to_vec() }
    }
}

impl ShapeSpec {
    pub fn representation(&self) -> Representation {
        match self {
            Self::Hbb { .. } => Representation::Hbb,
            Self::Obb { .. } => Representation::Obb,
            Self::Gbb { .. } => Representation::Gbb,
            Self::Ellipse { .. } => Representation::Ellipse,
            Self::Polygon { .. } => Representation::Polygon,
        }
    }

    /// Moment-matched Gaussian of the shape. Ellipses are read as the
    /// default-radius level set of their Gaussian.
    pub fn to_gbb(&self) -> Result<GaussBox, GbbError> {
        match self {
            Self::Hbb { x, y, w, h } => hbb_to_gbb(&Hbb::new(*x, *y, *w, *h)?),
            Self::Obb { x, y, w, h, theta } => obb_to_gbb(&Obb::new(*x, *y, *w, *h, *theta)?),
            Self::Gbb { x, y, a, b, c } => GaussBox::new(*x, *y, *a, *b, *c),
            Self::Ellipse { x, y, semi_major, semi_minor, theta } => {
                Ellipse::new(*x, *y, *semi_major, *semi_minor, *theta)?.to_gbb(DEFAULT_LEVEL_RADIUS)
            }
            Self::Polygon { vertices } => mask_to_gbb(&PolygonMask::new(vertices.clone())?),
        }
    }

    /// Region used for mask IoU. A GBB stands for its default-radius ellipse.
    pub fn to_region(&self) -> Result<Shape, GbbError> {
        Ok(match self {
            Self::Hbb { x, y, w, h } => Shape::Hbb(Hbb::new(*x, *y, *w, *h)?),
            Self::Obb { x, y, w, h, theta } => Shape::Obb(Obb::new(*x, *y, *w, *h, *theta)?),
            Self::Gbb { .. } => Shape::Ellipse(gbb_to_ellipse(&self.to_gbb()?, DEFAULT_LEVEL_RADIUS)?),
            Self::Ellipse { x, y, semi_major, semi_minor, theta } => {
                Shape::Ellipse(Ellipse::new(*x, *y, *semi_major, *semi_minor, *theta)?)
            }
            Self::Polygon { vertices } => Shape::Polygon(PolygonMask::new(vertices.clone())?),
        })
    }

    pub fn convert(&self, target: Representation) -> Result<ShapeSpec, GbbError> {
        let region = self.to_region()?;
        Ok(match target {
            Representation::Gbb => self.to_gbb()?.into(),
            Representation::Ellipse => match region {
                Shape::Ellipse(e) => e.into(),
                _ => gbb_to_ellipse(&self.to_gbb()?, DEFAULT_LEVEL_RADIUS)?.into(),
            },
            Representation::Hbb => match region {
                Shape::Hbb(b) => b.into(),
                Shape::Polygon(p) => mask_to_hbb(&p)?.into(),
                other => {
                    let (min, max) = other.bounds();
                    Hbb::from_bounds(min, max).into()
                }
            },
            Representation::Obb => match region {
                Shape::Hbb(b) => Obb::new(b.x0, b.y0, b.w, b.h, 0.0)?.into(),
                Shape::Obb(o) => o.into(),
                Shape::Polygon(p) => mask_to_obb(&p)?.into(),
                // the box whose Gaussian matches the ellipse's
                Shape::Ellipse(_) => gbb_to_obb(&self.to_gbb()?)?.into(),
            },
            Representation::Polygon => (&region_polygon(&region)?).into(),
        })
    }
}

/// Polygon outline of a region; ellipses become inscribed regular polygons.
pub fn region_polygon(region: &Shape) -> Result<PolygonMask, GbbError> {
    match region {
        Shape::Hbb(b) => b.to_polygon(),
        Shape::Obb(o) => o.to_polygon(),
        Shape::Polygon(p) => Ok(p.clone()),
        Shape::Ellipse(e) => ellipse_polygon(e, ELLIPSE_VERTICES),
    }
}

pub fn ellipse_polygon(e: &Ellipse, n: usize) -> Result<PolygonMask, GbbError> {
    let (s, c) = e.theta.sin_cos();
    let vs = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let (u, v) = (e.semi_major * t.cos(), e.semi_minor * t.sin());
            [e.x0 + c * u - s * v, e.y0 + s * u + c * v]
        })
        .collect();
    PolygonMask::new(vs)
}
