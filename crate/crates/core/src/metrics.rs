//! Bhattacharyya/Hellinger similarity between GBBs and the ProbIoU losses.
//!
//! For `p = N(mu1, S1)` and `q = N(mu2, S2)` the Bhattacharyya distance splits
//! into a mean term and a shape term, `B_D = B1 + B2`:
//!
//! ```text
//! B1 = 1/4 * [A dy^2 + B dx^2 - 2 C dx dy] / D
//! B2 = 1/2 * ln( D / (4 sqrt(det S1 det S2)) )
//! ```
//!
//! with `A = a1 + a2`, `B = b1 + b2`, `C = c1 + c2`, `D = A B - C^2`,
//! `dx = x1 - x2`, `dy = y1 - y2`. From it, `B_C = exp(-B_D)`,
//! `H_D = sqrt(1 - B_C)` and `ProbIoU = 1 - H_D`. The two regression losses
//! are `L1 = H_D` and `L2 = B_D`.

use crate::error::{GbbError, Result};
use crate::gauss::{GaussBox, Hbb};
use crate::polygon::PolygonMask;
use crate::raster::{hbb_extent_area, hbb_intersection_area, iou_raster_cells, Shape};

/// Mean term `b1` and shape term `b2` of the Bhattacharyya distance.
///
/// The two terms are exposed separately so callers can weigh center
/// adherence against shape agreement; the library itself only uses the sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BhattacharyyaTerms {
    pub b1: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityReport {
    pub b_d: f64,
    pub b_c: f64,
    pub h_d: f64,
    pub prob_iou: f64,
}

impl SimilarityReport {
    pub fn loss_l1(&self) -> f64 {
        self.h_d
    }

    pub fn loss_l2(&self) -> f64 {
        self.b_d
    }

    fn from_distance(b_d: f64) -> Self {
        let b_d = b_d.max(0.0);
        // 1 - exp(-b_d) without cancellation near zero
        let one_minus_bc = (-(-b_d).exp_m1()).max(0.0);
        let h_d = one_minus_bc.sqrt();
        Self {
            b_d,
            b_c: (-b_d).exp(),
            h_d,
            prob_iou: 1.0 - h_d,
        }
    }
}

/// Selects the regression loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Hellinger distance, `1 - ProbIoU`.
    L1,
    /// Bhattacharyya distance.
    L2,
}

/// Partial derivatives w.r.t. the HBB parameters `(x, y, w, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HbbGradient {
    pub d_x: f64,
    pub d_y: f64,
    pub d_w: f64,
    pub d_h: f64,
}

impl HbbGradient {
    pub fn as_array(&self) -> [f64; 4] {
        [self.d_x, self.d_y, self.d_w, self.d_h]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.as_array())
    }

    fn scaled(&self, k: f64) -> Self {
        Self {
            d_x: k * self.d_x,
            d_y: k * self.d_y,
            d_w: k * self.d_w,
            d_h: k * self.d_h,
        }
    }
}

/// Partial derivatives w.r.t. `(x0, y0, a, b, c)` of the first argument.
pub type GaussGradient = [f64; 5];

/// A gradient together with a flag raised at the singular point of `L1`
/// (`p == q`), where the gradient is reported as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradOutcome<G> {
    pub grad: G,
    pub singular: bool,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `dL1/dB_D = exp(-B_D) / (2 sqrt(1 - exp(-B_D)))`; `None` at `B_D = 0`.
pub fn l1_chain_factor(b_d: f64) -> Option<f64> {
    if b_d <= 0.0 {
        return None;
    }
    let one_minus_bc = -(-b_d).exp_m1();
    Some((-b_d).exp() / (2.0 * one_minus_bc.sqrt()))
}

struct PairSums {
    dx: f64,
    dy: f64,
    sa: f64,
    sb: f64,
    sc: f64,
    det_sum: f64,
    det1: f64,
    det2: f64,
}

fn pair_sums(p: &GaussBox, q: &GaussBox) -> PairSums {
    let sa = p.a + q.a;
    let sb = p.b + q.b;
    let sc = p.c + q.c;
    PairSums {
        dx: p.x0 - q.x0,
        dy: p.y0 - q.y0,
        sa,
        sb,
        sc,
        det_sum: sa * sb - sc * sc,
        det1: p.det(),
        det2: q.det(),
    }
}

pub fn bhattacharyya_terms(p: &GaussBox, q: &GaussBox) -> Result<BhattacharyyaTerms> {
    p.check()?;
    q.check()?;
    let s = pair_sums(p, q);
    let num = s.sa * s.dy * s.dy + s.sb * s.dx * s.dx - 2.0 * s.sc * s.dx * s.dy;
    let b1 = 0.25 * num / s.det_sum;
    let b2 = 0.5 * (s.det_sum / (4.0 * (s.det1 * s.det2).sqrt())).ln();
    // both are non-negative in exact arithmetic
    Ok(BhattacharyyaTerms {
        b1: b1.max(0.0),
        b2: b2.max(0.0),
    })
}

pub fn similarity(p: &GaussBox, q: &GaussBox) -> Result<SimilarityReport> {
    let t = bhattacharyya_terms(p, q)?;
    Ok(SimilarityReport::from_distance(t.b1 + t.b2))
}

/// Axis-aligned Bhattacharyya distance with the constant `-ln 2` dropped,
/// so the value is `B_D + ln 2`.
pub fn loss_l2_axis_aligned(p: &GaussBox, q: &GaussBox) -> Result<f64> {
    for g in [p, q] {
        if g.c != 0.0 {
            return Err(GbbError::NotAxisAligned { c: g.c });
        }
        g.check()?;
    }
    let sa = p.a + q.a;
    let sb = p.b + q.b;
    let dx = p.x0 - q.x0;
    let dy = p.y0 - q.y0;
    Ok(0.25 * (dx * dx / sa + dy * dy / sb) + 0.5 * (sa * sb).ln()
        - 0.25 * (p.a * q.a * p.b * q.b).ln())
}

fn check_hbb(b: &Hbb) -> Result<()> {
    if b.w > 0.0 && b.h > 0.0 && b.w.is_finite() && b.h.is_finite() {
        Ok(())
    } else {
        Err(GbbError::InvalidDimensions { w: b.w, h: b.h })
    }
}

/// Closed-form gradient of `L2` w.r.t. the predicted box `p`, through the
/// map `(x, y, w, h) -> (x, y, w^2/12, h^2/12)`.
pub fn grad_l2_hbb(p: &Hbb, q: &Hbb) -> Result<HbbGradient> {
    check_hbb(p)?;
    check_hbb(q)?;
    let dx = p.x0 - q.x0;
    let dy = p.y0 - q.y0;
    let (w1s, w2s) = (p.w * p.w, q.w * q.w);
    let (h1s, h2s) = (p.h * p.h, q.h * q.h);
    let sw = w1s + w2s;
    let sh = h1s + h2s;
    Ok(HbbGradient {
        d_x: 6.0 * dx / sw,
        d_y: 6.0 * dy / sh,
        d_w: (w1s - w2s) / (2.0 * p.w * sw) - 6.0 * p.w * dx * dx / (sw * sw),
        d_h: (h1s - h2s) / (2.0 * p.h * sh) - 6.0 * p.h * dy * dy / (sh * sh),
    })
}

/// Gradient of `L1 = sqrt(1 - exp(-L2))` w.r.t. the predicted box.
pub fn grad_l1_hbb(p: &Hbb, q: &Hbb) -> Result<GradOutcome<HbbGradient>> {
    let g2 = grad_l2_hbb(p, q)?;
    let b_d = similarity(&hbb_gauss(p), &hbb_gauss(q))?.b_d;
    Ok(match l1_chain_factor(b_d) {
        Some(k) => GradOutcome {
            grad: g2.scaled(k),
            singular: false,
        },
        None => GradOutcome {
            grad: HbbGradient::default(),
            singular: true,
        },
    })
}

fn hbb_gauss(b: &Hbb) -> GaussBox {
    GaussBox {
        x0: b.x0,
        y0: b.y0,
        a: b.w * b.w / 12.0,
        b: b.h * b.h / 12.0,
        c: 0.0,
    }
}

/// Gradient of `B_D` w.r.t. `(x0, y0, a, b, c)` of `p`.
fn grad_bd(p: &GaussBox, q: &GaussBox) -> GaussGradient {
    let PairSums {
        dx,
        dy,
        sa,
        sb,
        sc,
        det_sum,
        det1,
        ..
    } = pair_sums(p, q);
    let num = sa * dy * dy + sb * dx * dx - 2.0 * sc * dx * dy;
    let d2 = det_sum * det_sum;
    // B1 = num / (4 D): quotient rule per parameter
    let b1 = |dnum: f64, dden: f64| (dnum * det_sum - num * dden) / (4.0 * d2);
    let dx_b1 = (2.0 * sb * dx - 2.0 * sc * dy) / (4.0 * det_sum);
    let dy_b1 = (2.0 * sa * dy - 2.0 * sc * dx) / (4.0 * det_sum);
    let da_b1 = b1(dy * dy, sb);
    let db_b1 = b1(dx * dx, sa);
    let dc_b1 = b1(-2.0 * dx * dy, -2.0 * sc);
    // B2 = 1/2 ln D - ln 2 - 1/4 ln det1 - 1/4 ln det2
    let da_b2 = sb / (2.0 * det_sum) - p.b / (4.0 * det1);
    let db_b2 = sa / (2.0 * det_sum) - p.a / (4.0 * det1);
    let dc_b2 = -sc / det_sum + p.c / (2.0 * det1);
    [dx_b1, dy_b1, da_b1 + da_b2, db_b1 + db_b2, dc_b1 + dc_b2]
}

/// Analytic gradient of the selected loss w.r.t. `(x0, y0, a, b, c)` of `p`.
///
/// For [`LossKind::L1`] at `p == q` the gradient is undefined; zeros are
/// returned with `singular` set.
pub fn grad_general(p: &GaussBox, q: &GaussBox, which: LossKind) -> Result<GradOutcome<GaussGradient>> {
    let report = similarity(p, q)?;
    let g = grad_bd(p, q);
    Ok(match which {
        LossKind::L2 => GradOutcome { grad: g, singular: false },
        LossKind::L1 => match l1_chain_factor(report.b_d) {
            Some(k) => GradOutcome {
                grad: g.map(|v| k * v),
                singular: false,
            },
            None => GradOutcome {
                grad: [0.0; 5],
                singular: true,
            },
        },
    })
}

/// Bhattacharyya coefficient of the uniform densities over two polygons:
/// `area(m1 ∩ m2) / sqrt(area(m1) area(m2))`.
///
/// The intersection is exact for simple polygons; rings that are not simple
/// fall back to a rasterized intersection.
pub fn mask_bc(m1: &PolygonMask, m2: &PolygonMask) -> Result<f64> {
    let (a1, a2) = (m1.area(), m2.area());
    let inter = if m1.is_simple() && m2.is_simple() {
        m1.intersection_area(m2)
    } else {
        None
    };
    let bc = match inter {
        Some(i) => i / (a1 * a2).sqrt(),
        None => {
            let s1 = Shape::Polygon(m1.clone());
            let s2 = Shape::Polygon(m2.clone());
            let cells = iou_raster_cells(&s1, &s2, None)?;
            cells.intersection as f64 / ((cells.count_a as f64) * (cells.count_b as f64)).sqrt()
        }
    };
    Ok(bc.clamp(0.0, 1.0))
}

/// Uniform-density ProbIoU, `1 - sqrt(1 - mask_bc)`.
pub fn mask_probiou(m1: &PolygonMask, m2: &PolygonMask) -> Result<f64> {
    let bc = mask_bc(m1, m2)?;
    Ok(1.0 - (1.0 - bc).max(0.0).sqrt())
}

/// Uniform-density Bhattacharyya coefficient of two axis-aligned boxes.
pub fn hbb_uniform_bc(p: &Hbb, q: &Hbb) -> Result<f64> {
    check_hbb(p)?;
    check_hbb(q)?;
    let inter = hbb_intersection_area(p, q);
    Ok((inter / (hbb_extent_area(p) * hbb_extent_area(q)).sqrt()).clamp(0.0, 1.0))
}

pub fn hbb_uniform_probiou(p: &Hbb, q: &Hbb) -> Result<f64> {
    let bc = hbb_uniform_bc(p, q)?;
    Ok(1.0 - (1.0 - bc).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;
    use approx::assert_relative_eq;

    fn g(x0: f64, y0: f64, a: f64, b: f64, c: f64) -> GaussBox {
        GaussBox { x0, y0, a, b, c }
    }

    fn unit_square(x: f64) -> PolygonMask {
        PolygonMask::new(vec![[x, 0.0], [x + 1.0, 0.0], [x + 1.0, 1.0], [x, 1.0]]).unwrap()
    }

    #[test]
    fn terms_examples() {
        let p = g(0.0, 0.0, 1.0, 1.0, 0.0);
        assert_eq!(bhattacharyya_terms(&p, &p).unwrap(), BhattacharyyaTerms { b1: 0.0, b2: 0.0 });
        let t = bhattacharyya_terms(&p, &g(2.0, 0.0, 1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(t.b1, 0.5, max_relative = 1e-15);
        assert!(t.b2.abs() < 1e-15);
        let t = bhattacharyya_terms(&p, &g(0.0, 0.0, 4.0, 4.0, 0.0)).unwrap();
        assert_eq!(t.b1, 0.0);
        assert_relative_eq!(t.b2, (5.0f64 / 4.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_invalid() {
        let p = g(0.0, 0.0, 1.0, 1.0, 0.0);
        let bad = g(0.0, 0.0, 1.0, 1.0, 1.0);
        assert!(bhattacharyya_terms(&p, &bad).is_err());
        assert!(similarity(&bad, &p).is_err());
        assert!(grad_general(&bad, &p, LossKind::L2).is_err());
    }

    #[test]
    fn similarity_examples() {
        let p = g(0.0, 0.0, 1.0, 1.0, 0.0);
        let r = similarity(&p, &p).unwrap();
        assert_eq!((r.b_d, r.b_c, r.h_d, r.prob_iou), (0.0, 1.0, 0.0, 1.0));

        let r = similarity(&p, &g(2.0, 0.0, 1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(r.b_d, 0.5, max_relative = 1e-15);
        assert!((r.b_c - 0.606531).abs() < 1e-6);
        assert_relative_eq!(r.h_d, (1.0 - (-0.5f64).exp()).sqrt(), max_relative = 1e-14);
        assert!((r.h_d - 0.627270).abs() < 2e-6);
        assert!((r.prob_iou - 0.372730).abs() < 2e-6);
        assert_eq!(r.loss_l1(), r.h_d);
        assert_eq!(r.loss_l2(), r.b_d);

        let r = similarity(&p, &g(100.0, 0.0, 1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(r.b_d, 1250.0, max_relative = 1e-15);
        assert_eq!((r.b_c, r.h_d, r.prob_iou), (0.0, 1.0, 0.0));
    }

    #[test]
    fn axis_aligned_offset() {
        let p = g(0.0, 0.0, 1.0, 1.0, 0.0);
        let q = g(2.0, 0.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(loss_l2_axis_aligned(&p, &p).unwrap(), LN_2, max_relative = 1e-15);
        assert_relative_eq!(loss_l2_axis_aligned(&p, &q).unwrap(), 0.5 + LN_2, max_relative = 1e-15);
        assert!(matches!(
            loss_l2_axis_aligned(&p, &g(0.0, 0.0, 2.0, 2.0, 0.5)),
            Err(GbbError::NotAxisAligned { .. })
        ));
    }

    #[test]
    fn hbb_gradient_examples() {
        let p = Hbb { x0: 0.0, y0: 0.0, w: 2.0, h: 2.0 };
        let q = Hbb { x0: 1.0, ..p };
        let gr = grad_l2_hbb(&p, &q).unwrap();
        assert_relative_eq!(gr.d_x, -0.75, max_relative = 1e-15);
        assert_eq!(gr.d_y, 0.0);
        assert_eq!(grad_l2_hbb(&p, &p).unwrap(), HbbGradient::default());
        assert!(grad_l2_hbb(&Hbb { w: 0.0, ..p }, &q).is_err());

        let s = grad_l1_hbb(&p, &p).unwrap();
        assert!(s.singular);
        assert_eq!(s.grad, HbbGradient::default());
    }

    #[test]
    fn l1_gradient_regimes() {
        let p = Hbb { x0: 0.0, y0: 0.0, w: 1.0, h: 1.0 };
        let far = Hbb { x0: 100.0, ..p };
        assert!(grad_l1_hbb(&p, &far).unwrap().grad.norm() < 1e-8);
        assert!(grad_l2_hbb(&p, &far).unwrap().norm() > 1.0);

        let near = Hbb { x0: 0.01, ..p };
        let l1 = grad_l1_hbb(&p, &near).unwrap();
        assert!(!l1.singular);
        assert!(l1.grad.norm() > grad_l2_hbb(&p, &near).unwrap().norm());
    }

    #[test]
    fn chain_factor() {
        assert_eq!(l1_chain_factor(0.0), None);
        // crossover where the factor equals one: exp(-b) = 2 sqrt(2) - 2
        let b = -(2.0 * 2f64.sqrt() - 2.0).ln();
        assert_relative_eq!(l1_chain_factor(b).unwrap(), 1.0, max_relative = 1e-12);
        assert!(l1_chain_factor(1e-20).unwrap() > 1e9);
    }

    #[test]
    fn general_gradient_at_optimum() {
        let p = g(1.0, 2.0, 3.0, 2.0, 0.7);
        let r = grad_general(&p, &p, LossKind::L2).unwrap();
        assert_eq!(r.grad, [0.0; 5]);
        assert!(!r.singular);
        let r = grad_general(&p, &p, LossKind::L1).unwrap();
        assert!(r.singular);
        assert_eq!(r.grad, [0.0; 5]);
    }

    #[test]
    fn mask_examples() {
        let a = unit_square(0.0);
        let b = unit_square(0.5);
        let far = unit_square(5.0);
        assert_relative_eq!(mask_bc(&a, &a).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(mask_bc(&a, &far).unwrap(), 0.0);
        assert_relative_eq!(mask_bc(&a, &b).unwrap(), 0.5, max_relative = 1e-14);
        assert!(mask_bc(&a, &b).unwrap() >= 1.0 / 3.0);
        assert_relative_eq!(mask_probiou(&a, &a).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(mask_probiou(&a, &far).unwrap(), 0.0);
        assert!((mask_probiou(&a, &b).unwrap() - 0.292893).abs() < 1e-6);
    }

    #[test]
    fn non_simple_mask_uses_raster() {
        let bow = PolygonMask::new(vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 1.9]]).unwrap();
        let bc = mask_bc(&bow, &bow).unwrap();
        assert_relative_eq!(bc, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn hbb_uniform_identity() {
        let p = Hbb { x0: 0.3, y0: 0.7, w: 0.37, h: 0.11 };
        assert_eq!(hbb_uniform_probiou(&p, &p).unwrap(), 1.0);
        let q = Hbb { x0: 0.8, ..p };
        assert_eq!(hbb_uniform_bc(&p, &q).unwrap(), 0.0);
    }
}
