//! Minimal COCO-style annotation reader.
//!
//! Only `images[].id`, `categories[].id`/`name` and the `image_id`,
//! `category_id` and `segmentation` fields of each annotation are read.
//! A segmentation is either a flat `[x1, y1, x2, y2, ...]` list or a list
//! holding exactly one such list; more than one part means a multi-part
//! object, which is skipped. RLE masks are skipped as malformed.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use gbbkit::PolygonMask;
use serde::Deserialize;
use serde_json::Value;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub category: String,
    pub polygon: PolygonMask,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingest {
    pub records: Vec<AnnotationRecord>,
    pub skipped_multipart: usize,
    pub skipped_malformed: usize,
}

#[derive(Deserialize)]
struct IdOnly {
    id: Value,
}

#[derive(Deserialize)]
struct Category {
    id: Value,
    name: String,
}

#[derive(Deserialize)]
struct CocoFile {
    #[serde(default)]
    images: Vec<IdOnly>,
    #[serde(default)]
    categories: Vec<Category>,
    annotations: Vec<Value>,
}

/// Ids may be numbers or strings; both become strings.
fn id_key(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

enum Skip {
    Multipart,
    Malformed(String),
}

fn flat_ring(coords: &[Value]) -> Result<Vec<[f64; 2]>, Skip> {
    if !coords.len().is_multiple_of(2) || coords.len() < 6 {
        return Err(Skip::Malformed(format!("polygon has {} coordinates", coords.len())));
    }
    let xs: Option<Vec<f64>> = coords.iter().map(Value::as_f64).collect();
    let xs = xs.ok_or_else(|| Skip::Malformed("non-numeric coordinate".into()))?;
    Ok(xs.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

fn polygon_of(seg: Option<&Value>) -> Result<PolygonMask, Skip> {
    let ring = match seg {
        Some(Value::Array(items)) if items.iter().all(Value::is_number) => flat_ring(items)?,
        Some(Value::Array(parts)) => match parts.as_slice() {
            [Value::Array(only)] => flat_ring(only)?,
            [] => return Err(Skip::Malformed("empty segmentation".into())),
            ps if ps.iter().all(Value::is_array) => return Err(Skip::Multipart),
            _ => return Err(Skip::Malformed("mixed segmentation list".into())),
        },
        Some(Value::Object(_)) => return Err(Skip::Malformed("RLE segmentation".into())),
        _ => return Err(Skip::Malformed("missing segmentation".into())),
    };
    let poly = PolygonMask::new(ring).map_err(|e| Skip::Malformed(e.to_string()))?;
    if !poly.is_simple() {
        return Err(Skip::Malformed("self-intersecting polygon".into()));
    }
    Ok(poly)
}

/// Parses annotation JSON. Malformed JSON is an error; individual bad
/// annotations are skipped and counted.
pub fn parse_annotations(text: &str) -> Result<Ingest, serde_json::Error> {
    let file: CocoFile = serde_json::from_str(text)?;
    let images: HashSet<String> = file.images.iter().filter_map(|i| id_key(&i.id)).collect();
    let categories: HashMap<String, String> =
        file.categories.into_iter().filter_map(|c| Some((id_key(&c.id)?, c.name))).collect();

    let mut out = Ingest::default();
    for (idx, ann) in file.annotations.iter().enumerate() {
        let record = (|| {
            let image_id = ann.get("image_id").and_then(id_key).ok_or(Skip::Malformed("missing image_id".into()))?;
            if !images.contains(&image_id) {
                return Err(Skip::Malformed(format!("unknown image {image_id}")));
            }
            let cat_id = ann.get("category_id").and_then(id_key).ok_or(Skip::Malformed("missing category_id".into()))?;
            let category = categories.get(&cat_id).ok_or(Skip::Malformed(format!("unknown category {cat_id}")))?.clone();
            let polygon = polygon_of(ann.get("segmentation"))?;
            Ok(AnnotationRecord { image_id, category, polygon })
        })();
        match record {
            Ok(r) => out.records.push(r),
            Err(Skip::Multipart) => out.skipped_multipart += 1,
            Err(Skip::Malformed(why)) => {
                eprintln!("annotation {idx}: {why}; skipped");
                out.skipped_malformed += 1;
            }
        }
    }
    Ok(out)
}

pub fn ingest_annotations(path: &Path) -> CliResult<Ingest> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    parse_annotations(&text).map_err(|e| CliError::Usage(format!("{}: malformed JSON: {e}", path.display())))
}
