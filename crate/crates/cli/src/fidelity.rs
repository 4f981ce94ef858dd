//! `fidelity`: how well HBB, OBB and GBB-ellipse fits cover polygon masks.
//!
//! Each polygon is fitted three ways (bounding box, minimum-area rectangle,
//! default-radius ellipse of the moment-matched Gaussian) and every fit is
//! compared with the polygon by IoU. Medians are reported per category and
//! overall.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use gbbkit::{gbb_to_ellipse, mask_to_gbb, mask_to_hbb, mask_to_obb, GbbError, Hbb, Obb, PolygonMask, Shape, DEFAULT_LEVEL_RADIUS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coco::AnnotationRecord;
use crate::score::region_iou;
use crate::shapes::{ellipse_polygon, ELLIPSE_VERTICES};
use crate::stats::median;
use crate::{CliError, CliResult};

pub const HEADER: &str = "category,median_iou_hbb,median_iou_obb,median_iou_ellipse,count";
pub const OVERALL: &str = "overall";
pub const DEFAULT_PER_CATEGORY: usize = 1000;

/// Aspect-ratio bands of the rotated-ellipse corpus.
pub const ASPECT_BANDS: [(f64, f64); 3] = [(1.5, 2.5), (2.5, 4.0), (4.0, 8.0)];

const CAP_VERTICES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corpus {
    /// Rotated eccentric ellipses in three aspect bands.
    Ellipses,
    /// Axis-aligned rectangles in the same aspect bands.
    Rectangles,
    /// Rotated ellipses, rectangles and capsules.
    Mixed,
}

impl FromStr for Corpus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ellipses" => Ok(Self::Ellipses),
            "rectangles" => Ok(Self::Rectangles),
            "mixed" => Ok(Self::Mixed),
            other => Err(format!("unknown corpus '{other}' (expected ellipses, rectangles or mixed)")),
        }
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ellipses => "ellipses",
            Self::Rectangles => "rectangles",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityRow {
    pub category: String,
    pub median_iou_hbb: f64,
    pub median_iou_obb: f64,
    pub median_iou_ellipse: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitIous {
    pub hbb: f64,
    pub obb: f64,
    pub ellipse: f64,
}

fn band_label(kind: &str, (lo, hi): (f64, f64)) -> String {
    format!("{kind}_aspect_{lo}-{hi}")
}

fn rotated(vs: Vec<[f64; 2]>, center: [f64; 2], theta: f64) -> Vec<[f64; 2]> {
    let (s, c) = theta.sin_cos();
    vs.into_iter().map(|[u, v]| [center[0] + c * u - s * v, center[1] + s * u + c * v]).collect()
}

fn capsule(half_len: f64, radius: f64) -> Vec<[f64; 2]> {
    let mut vs = Vec::with_capacity(2 * CAP_VERTICES + 2);
    for (cx, start) in [(half_len, -0.5 * PI), (-half_len, 0.5 * PI)] {
        for k in 0..=CAP_VERTICES {
            let t = start + PI * k as f64 / CAP_VERTICES as f64;
            vs.push([cx + radius * t.cos(), radius * t.sin()]);
        }
    }
    vs
}

fn record(category: String, index: usize, ring: Vec<[f64; 2]>) -> AnnotationRecord {
    AnnotationRecord {
        image_id: format!("synthetic-{index}"),
        category,
        polygon: PolygonMask::new(ring).expect("generated polygon is valid"),
    }
}

fn random_ellipse(rng: &mut ChaCha8Rng, band: (f64, f64)) -> Vec<[f64; 2]> {
    let major = rng.gen_range(10.0..40.0);
    let aspect = rng.gen_range(band.0..band.1);
    let e = gbbkit::Ellipse::new(
        rng.gen_range(0.0..100.0),
        rng.gen_range(0.0..100.0),
        major,
        major / aspect,
        rng.gen_range(-PI..PI),
    )
    .expect("valid ellipse");
    ellipse_polygon(&e, ELLIPSE_VERTICES).expect("valid ellipse polygon").vertices().to_vec()
}

/// Axis-aligned rectangle on a quarter-unit lattice, so its bounding box
/// reproduces it exactly.
fn random_rectangle(rng: &mut ChaCha8Rng, band: (f64, f64)) -> Vec<[f64; 2]> {
    let lattice = |v: f64| (4.0 * v).round() / 4.0;
    let long = lattice(rng.gen_range(10.0..60.0));
    let short = lattice(long / rng.gen_range(band.0..band.1)).max(0.25);
    let (w, h) = if rng.gen_bool(0.5) { (long, short) } else { (short, long) };
    let (x, y) = (lattice(rng.gen_range(0.0..100.0)), lattice(rng.gen_range(0.0..100.0)));
    vec![[x, y], [x + w, y], [x + w, y + h], [x, y + h]]
}

/// Seeded synthetic corpus with `per_category` shapes in each of three
/// categories.
pub fn synthetic_corpus(corpus: Corpus, per_category: usize, seed: u64) -> Vec<AnnotationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * per_category);
    match corpus {
        Corpus::Ellipses | Corpus::Rectangles => {
            let kind = if corpus == Corpus::Ellipses { "ellipse" } else { "rectangle" };
            for band in ASPECT_BANDS {
                let label = band_label(kind, band);
                for _ in 0..per_category {
                    let ring = match corpus {
                        Corpus::Ellipses => random_ellipse(&mut rng, band),
                        _ => random_rectangle(&mut rng, band),
                    };
                    out.push(record(label.clone(), out.len(), ring));
                }
            }
        }
        Corpus::Mixed => {
            for kind in ["ellipse", "rectangle", "capsule"] {
                for _ in 0..per_category {
                    let band = ASPECT_BANDS[rng.gen_range(0..ASPECT_BANDS.len())];
                    let ring = match kind {
                        "ellipse" => random_ellipse(&mut rng, band),
                        "rectangle" => {
                            let long = rng.gen_range(10.0..60.0);
                            let short = long / rng.gen_range(band.0..band.1);
                            let obb = Obb::new(
                                rng.gen_range(0.0..100.0),
                                rng.gen_range(0.0..100.0),
                                long,
                                short,
                                rng.gen_range(-PI..PI),
                            )
                            .expect("valid box");
                            obb.corners().to_vec()
                        }
                        _ => {
                            let radius = rng.gen_range(3.0..15.0);
                            let half_len = radius * rng.gen_range(0.5..3.0);
                            let center = [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)];
                            rotated(capsule(half_len, radius), center, rng.gen_range(-PI..PI))
                        }
                    };
                    out.push(record(kind.to_string(), out.len(), ring));
                }
            }
        }
    }
    out
}

/// IoU of each fitted representation against the polygon.
pub fn fit_ious(poly: &PolygonMask, cell_size: Option<f64>) -> Result<FitIous, GbbError> {
    let mask = Shape::Polygon(poly.clone());
    let hbb = Shape::Hbb(mask_to_hbb(poly)?);
    let obb = Shape::Obb(mask_to_obb(poly)?);
    let ellipse = Shape::Ellipse(gbb_to_ellipse(&mask_to_gbb(poly)?, DEFAULT_LEVEL_RADIUS)?);
    Ok(FitIous {
        hbb: region_iou(&mask, &hbb, cell_size)?,
        obb: region_iou(&mask, &obb, cell_size)?,
        ellipse: region_iou(&mask, &ellipse, cell_size)?,
    })
}

/// True when every raster cell of the polygon is also a cell of the box.
pub fn hbb_contains_polygon(poly: &PolygonMask, hbb: &Hbb, cell_size: f64) -> Result<bool, GbbError> {
    let (p, b) = (Shape::Polygon(poly.clone()), Shape::Hbb(*hbb));
    let grid = gbbkit::RasterGrid::covering(&p, &b, cell_size)?;
    let (mp, mb) = (gbbkit::rasterize(&p, &grid)?, gbbkit::rasterize(&b, &grid)?);
    Ok((0..grid.height).all(|row| (0..grid.width).all(|col| !mp.get(col, row) || mb.get(col, row))))
}

fn summarize(category: &str, fits: &[FitIous]) -> FidelityRow {
    let col = |f: fn(&FitIous) -> f64| median(&fits.iter().map(f).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    FidelityRow {
        category: category.to_string(),
        median_iou_hbb: col(|f| f.hbb),
        median_iou_obb: col(|f| f.obb),
        median_iou_ellipse: col(|f| f.ellipse),
        count: fits.len(),
    }
}

/// Per-category rows in order of first appearance, then the overall row.
/// Annotations whose fits fail are reported and left out.
pub fn fidelity_rows(records: &[AnnotationRecord], cell_size: Option<f64>) -> CliResult<Vec<FidelityRow>> {
    let fits: Vec<Result<FitIous, GbbError>> = records.par_iter().map(|r| fit_ious(&r.polygon, cell_size)).collect();
    let mut categories: Vec<(&str, Vec<FitIous>)> = Vec::new();
    let mut all = Vec::new();
    for (r, fit) in records.iter().zip(fits) {
        let fit = match fit {
            Ok(f) => f,
            Err(e) => {
                eprintln!("annotation in image {}: {e}; skipped", r.image_id);
                continue;
            }
        };
        match categories.iter_mut().find(|(c, _)| *c == r.category) {
            Some((_, v)) => v.push(fit),
            None => categories.push((&r.category, vec![fit])),
        }
        all.push(fit);
    }
    if all.is_empty() {
        return Err(CliError::Runtime("no usable annotations".into()));
    }
    let mut rows: Vec<FidelityRow> = categories.iter().map(|(c, f)| summarize(c, f)).collect();
    rows.push(summarize(OVERALL, &all));
    Ok(rows)
}

pub fn write_rows<W: Write>(rows: &[FidelityRow], out: &mut W) -> CliResult<()> {
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.category, r.median_iou_hbb, r.median_iou_obb, r.median_iou_ellipse, r.count
        )?;
    }
    Ok(())
}
