//! `scatter`: IoU against ProbIoU over random box pairs.
//!
//! Centers are uniform on [0,1] and sides uniform on (1e-6, 1]. Pairs are
//! drawn sequentially from the seed and scored in parallel; rows come out
//! in draw order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use gbbkit::{hbb_to_gbb, hbb_uniform_probiou, iou_hbb, similarity, GbbError, Hbb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::CliResult;

pub const HEADER: &str = "iou,prob_iou,mode";

pub const MIN_SIDE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterMode {
    /// ProbIoU of the moment-matched Gaussians.
    Gbb,
    /// ProbIoU of the boxes as uniform densities.
    UniformMask,
}

impl FromStr for ScatterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gbb" => Ok(Self::Gbb),
            "uniform_mask" => Ok(Self::UniformMask),
            other => Err(format!("unknown scatter mode '{other}' (expected gbb or uniform_mask)")),
        }
    }
}

impl fmt::Display for ScatterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gbb => "gbb",
            Self::UniformMask => "uniform_mask",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRow {
    pub iou: f64,
    pub prob_iou: f64,
}

fn random_box(rng: &mut ChaCha8Rng) -> Hbb {
    let x = rng.gen_range(0.0..=1.0);
    let y = rng.gen_range(0.0..=1.0);
    let w = rng.gen_range(MIN_SIDE..=1.0);
    let h = rng.gen_range(MIN_SIDE..=1.0);
    Hbb::new(x, y, w, h).expect("sampled box is valid")
}

pub fn sample_pairs(n: usize, seed: u64) -> Vec<(Hbb, Hbb)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (random_box(&mut rng), random_box(&mut rng))).collect()
}

/// Moves `p` to the origin and scales the pair so the shortest side is 1.
/// The similarity is unchanged, and sides down to 1e-6 stay clear of the
/// absolute validity threshold on the covariance determinant.
fn normalized(p: &Hbb, q: &Hbb) -> Result<(Hbb, Hbb), GbbError> {
    let k = 1.0 / p.w.min(p.h).min(q.w).min(q.h);
    let map = |b: &Hbb| Hbb::new(k * (b.x0 - p.x0), k * (b.y0 - p.y0), k * b.w, k * b.h);
    Ok((map(p)?, map(q)?))
}

pub fn score_pair(p: &Hbb, q: &Hbb, mode: ScatterMode) -> Result<ScatterRow, GbbError> {
    let prob_iou = match mode {
        ScatterMode::Gbb => {
            let (np, nq) = normalized(p, q)?;
            similarity(&hbb_to_gbb(&np)?, &hbb_to_gbb(&nq)?)?.prob_iou
        }
        ScatterMode::UniformMask => hbb_uniform_probiou(p, q)?,
    };
    Ok(ScatterRow { iou: iou_hbb(p, q), prob_iou })
}

pub fn scatter_rows(n: usize, seed: u64, mode: ScatterMode) -> Result<Vec<ScatterRow>, GbbError> {
    sample_pairs(n, seed).par_iter().map(|(p, q)| score_pair(p, q, mode)).collect()
}

pub fn run_scatter<W: Write>(n: usize, seed: u64, mode: ScatterMode, out: &mut W) -> CliResult<()> {
    let rows = scatter_rows(n, seed, mode).map_err(|e| crate::CliError::Runtime(e.to_string()))?;
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(out, "{},{},{mode}", r.iou, r.prob_iou)?;
    }
    Ok(())
}
