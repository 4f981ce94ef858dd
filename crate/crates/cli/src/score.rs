//! `score`: similarity and IoU for each pair in a JSON-lines file.
//!
//! Each non-blank line is either `[shape, shape]` or `{"a": shape, "b": shape}`.

use std::io::{BufRead, Write};

use gbbkit::{iou_convex, iou_hbb, iou_raster, similarity, GbbError, Shape};
use serde::Deserialize;

use crate::shapes::ShapeSpec;
use crate::{CliError, CliResult};

pub const HEADER: &str = "b_d,b_c,h_d,prob_iou,iou";

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PairLine {
    Tuple([ShapeSpec; 2]),
    Named { a: ShapeSpec, b: ShapeSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoreSummary {
    pub scored: usize,
    pub skipped: usize,
}

/// IoU of two regions: closed form for box pairs, clipping for convex
/// pairs, rasterization otherwise. A shape smaller than one raster cell
/// scores zero.
pub fn region_iou(a: &Shape, b: &Shape, cell_size: Option<f64>) -> Result<f64, GbbError> {
    match (a, b) {
        (Shape::Hbb(p), Shape::Hbb(q)) => return Ok(iou_hbb(p, q)),
        (Shape::Hbb(_) | Shape::Obb(_) | Shape::Polygon(_), Shape::Hbb(_) | Shape::Obb(_) | Shape::Polygon(_)) => {
            let (pa, pb) = (crate::shapes::region_polygon(a)?, crate::shapes::region_polygon(b)?);
            if pa.is_convex() && pb.is_convex() {
                return iou_convex(&pa, &pb);
            }
        }
        _ => {}
    }
    match iou_raster(a, b, cell_size) {
        Err(GbbError::EmptyRaster { .. }) => Ok(0.0),
        other => other,
    }
}

fn score_pair(a: &ShapeSpec, b: &ShapeSpec, cell_size: Option<f64>) -> Result<String, GbbError> {
    let r = similarity(&a.to_gbb()?, &b.to_gbb()?)?;
    let iou = region_iou(&a.to_region()?, &b.to_region()?, cell_size)?;
    Ok(format!("{},{},{},{},{}", r.b_d, r.b_c, r.h_d, r.prob_iou, iou))
}

/// Scores every pair; unparsable or invalid lines are reported on stderr
/// and skipped.
pub fn run_score<R: BufRead, W: Write>(input: R, out: &mut W, cell_size: Option<f64>) -> CliResult<ScoreSummary> {
    let mut summary = ScoreSummary::default();
    writeln!(out, "{HEADER}")?;
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(format!("reading input: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let row = match serde_json::from_str::<PairLine>(&line) {
            Err(e) => Err(format!("parse error: {e}")),
            Ok(PairLine::Tuple([a, b]) | PairLine::Named { a, b }) => {
                score_pair(&a, &b, cell_size).map_err(|e| format!("invalid shape: {e}"))
            }
        };
        match row {
            Ok(row) => {
                writeln!(out, "{row}")?;
                summary.scored += 1;
            }
            Err(msg) => {
                eprintln!("line {lineno}: {msg}; skipped");
                summary.skipped += 1;
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str) -> (String, ScoreSummary) {
        let mut out = Vec::new();
        let s = run_score(input.as_bytes(), &mut out, None).unwrap();
        (String::from_utf8(out).unwrap(), s)
    }

    #[test]
    fn empty_input_gives_header() {
        let (csv, s) = run("");
        assert_eq!(csv, format!("{HEADER}\n"));
        assert_eq!(s, ScoreSummary::default());
    }

    #[test]
    fn identical_pairs_score_one() {
        let shapes = [
            r#"{"type":"hbb","x":1,"y":2,"w":3,"h":4}"#,
            r#"{"type":"obb","x":1,"y":2,"w":3,"h":4,"theta":0.4}"#,
            r#"{"type":"gbb","x":1,"y":2,"a":3,"b":4,"c":1}"#,
            r#"{"type":"ellipse","x":1,"y":2,"semi_major":3,"semi_minor":1,"theta":0.2}"#,
            r#"{"type":"polygon","vertices":[[0,0],[2,0],[2,2],[1,1],[0,2]]}"#,
        ];
        let input: String = shapes.iter().map(|s| format!("[{s},{s}]\n")).collect();
        let (csv, s) = run(&input);
        assert_eq!(s.scored, shapes.len());
        for row in csv.lines().skip(1) {
            let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(f[3], 1.0, "{row}");
            assert_eq!(f[4], 1.0, "{row}");
        }
    }

    #[test]
    fn translated_unit_gaussians() {
        let (csv, _) = run(
            r#"{"a":{"type":"gbb","x":0,"y":0,"a":1,"b":1,"c":0},"b":{"type":"gbb","x":2,"y":0,"a":1,"b":1,"c":0}}"#,
        );
        let f: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[0], 0.5);
        assert!((f[3] - 0.372730).abs() < 2e-6);
    }

    #[test]
    fn bad_lines_are_skipped() {
        let (csv, s) = run(concat!(
            "not json\n",
            "\n",
            r#"[{"type":"hbb","x":0,"y":0,"w":-1,"h":1},{"type":"hbb","x":0,"y":0,"w":1,"h":1}]"#,
            "\n",
            r#"[{"type":"hbb","x":0,"y":0,"w":1,"h":1},{"type":"hbb","x":0.5,"y":0,"w":1,"h":1}]"#,
            "\n",
        ));
        assert_eq!(s, ScoreSummary { scored: 1, skipped: 2 });
        assert_eq!(csv.lines().count(), 2);
        let iou: f64 = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
        assert!((iou - 1.0 / 3.0).abs() < 1e-15);
    }
}
