//! Gaussian bounding boxes and conversions between box, mask and ellipse
//! representations.
//!
//! A [`GaussBox`] stores the mean `(x0, y0)` and the covariance entries
//! `[[a, c], [c, b]]`. The same covariance can be written as
//! `R(theta) diag(a', b') R(theta)^T` ([`AngleCov`]); that factorization is
//! unique once `theta` is folded into `[-pi/4, pi/4]`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{GbbError, Result};
use crate::polygon::PolygonMask;

/// Absolute threshold used by [`validate_gbb`] for the leading principal
/// minors. Assumes coordinates of order 1 to 1e4.
pub const VALIDITY_EPS: f64 = 1e-12;

/// Below this spread (in `|a - b|` and `|c|`) the covariance is treated as
/// isotropic and the orientation is reported as zero.
pub const ISOTROPIC_EPS: f64 = 1e-12;

/// Mahalanobis radius whose level set has the same area as the box that
/// produced the covariance: `sqrt(12 / pi)`.
pub const DEFAULT_LEVEL_RADIUS: f64 = 1.954_410_047_611_679_7;

/// Clamp applied to the exponents of [`constrained_to_cov`].
pub const EXPONENT_CLAMP: f64 = 30.0;

/// Mean and covariance of a 2D Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussBox {
    pub x0: f64,
    pub y0: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GaussBox {
    /// Builds a GBB, rejecting covariances that fail [`validate_gbb`].
    pub fn new(x0: f64, y0: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        let g = Self { x0, y0, a, b, c };
        g.check()?;
        Ok(g)
    }

    pub fn det(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.c == 0.0
    }

    pub(crate) fn check(&self) -> Result<()> {
        match validate_gbb(self).diagnostic {
            None => Ok(()),
            Some(msg) => Err(GbbError::NotPositiveDefinite(msg)),
        }
    }

    /// Covariance eigenvalues, largest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a + self.b);
        let half_gap = (0.5 * (self.a - self.b)).hypot(self.c);
        let major = mean + half_gap;
        // det / major avoids cancellation in the small eigenvalue
        let minor = if major > 0.0 { self.det() / major } else { mean - half_gap };
        (major, minor)
    }

    /// Applies `x -> scale * R(rotation) x + translation` to the distribution.
    pub fn transformed(&self, t: &Similarity) -> Self {
        let (s, c) = t.rotation.sin_cos();
        let k = t.scale;
        let x0 = k * (c * self.x0 - s * self.y0) + t.tx;
        let y0 = k * (s * self.x0 + c * self.y0) + t.ty;
        // R Sigma R^T, then scaled by k^2
        let a = c * c * self.a - 2.0 * s * c * self.c + s * s * self.b;
        let b = s * s * self.a + 2.0 * s * c * self.c + c * c * self.b;
        let cc = s * c * (self.a - self.b) + (c * c - s * s) * self.c;
        let k2 = k * k;
        Self { x0, y0, a: k2 * a, b: k2 * b, c: k2 * cc }
    }
}

/// A planar similarity transform: rotate about the origin, scale, translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: f64,
    pub scale: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Similarity {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        [
            self.scale * (c * p[0] - s * p[1]) + self.tx,
            self.scale * (s * p[0] + c * p[1]) + self.ty,
        ]
    }
}

/// Principal variances `a'`, `b'` and the rotation `theta` of a covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleCov {
    pub a_prime: f64,
    pub b_prime: f64,
    pub theta: f64,
}

/// Axis-aligned box given by its center, width and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hbb {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
}

impl Hbb {
    pub fn new(x0: f64, y0: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x0, y0, w, h };
        check_dims(w, h)?;
        Ok(b)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn min(&self) -> [f64; 2] {
        [self.x0 - 0.5 * self.w, self.y0 - 0.5 * self.h]
    }

    pub fn max(&self) -> [f64; 2] {
        [self.x0 + 0.5 * self.w, self.y0 + 0.5 * self.h]
    }

    pub fn from_bounds(min: [f64; 2], max: [f64; 2]) -> Self {
        Self {
            x0: 0.5 * (min[0] + max[0]),
            y0: 0.5 * (min[1] + max[1]),
            w: max[0] - min[0],
            h: max[1] - min[1],
        }
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [x0, y0] = self.min();
        let [x1, y1] = self.max();
        [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }

    pub fn to_polygon(&self) -> Result<PolygonMask> {
        check_dims(self.w, self.h)?;
        PolygonMask::new(self.corners().to_vec())
    }
}

/// Oriented box: center, side lengths, and the rotation of the `w` side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Obb {
    pub fn new(x0: f64, y0: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        check_dims(w, h)?;
        if !theta.is_finite() {
            return Err(GbbError::OutOfRange {
                name: "theta",
                value: theta,
                expected: "a finite angle",
            });
        }
        Ok(Self { x0, y0, w, h, theta })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.theta.sin_cos();
        let (hw, hh) = (0.5 * self.w, 0.5 * self.h);
        [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
            .map(|(u, v)| [self.x0 + c * u - s * v, self.y0 + s * u + c * v])
    }

    pub fn to_polygon(&self) -> Result<PolygonMask> {
        check_dims(self.w, self.h)?;
        PolygonMask::new(self.corners().to_vec())
    }

    /// The same rectangle with `theta` folded into `[-pi/4, pi/4)`, swapping
    /// the sides when the fold crosses a quarter turn.
    pub fn canonical(&self) -> Self {
        // a rectangle is invariant under half turns
        let mut theta = (self.theta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
        let (mut w, mut h) = (self.w, self.h);
        if theta >= FRAC_PI_4 {
            theta -= FRAC_PI_2;
            std::mem::swap(&mut w, &mut h);
        } else if theta < -FRAC_PI_4 {
            theta += FRAC_PI_2;
            std::mem::swap(&mut w, &mut h);
        }
        Self { theta, w, h, ..*self }
    }
}

/// Ellipse with the major semi-axis along direction `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub x0: f64,
    pub y0: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub theta: f64,
}

impl Ellipse {
    pub fn new(x0: f64, y0: f64, semi_major: f64, semi_minor: f64, theta: f64) -> Result<Self> {
        let e = Self { x0, y0, semi_major, semi_minor, theta };
        e.check()?;
        Ok(e)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.semi_minor > 0.0 && self.semi_major >= self.semi_minor)
            || !self.semi_major.is_finite()
        {
            return Err(GbbError::OutOfRange {
                name: "semi-axes",
                value: self.semi_minor,
                expected: "semi_major >= semi_minor > 0",
            });
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_major * self.semi_minor
    }

    /// Inside test in the ellipse's own frame (boundary included).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.local().contains(p)
    }

    pub(crate) fn local(&self) -> EllipseLocal {
        let (sin, cos) = self.theta.sin_cos();
        EllipseLocal { e: *self, sin, cos }
    }

    /// Half extents of the axis-aligned bounding box.
    pub fn half_extents(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (ma, mi) = (self.semi_major, self.semi_minor);
        ((ma * c).hypot(mi * s), (ma * s).hypot(mi * c))
    }

    /// Gaussian whose `r`-level Mahalanobis set is this ellipse.
    pub fn to_gbb(&self, r: f64) -> Result<GaussBox> {
        self.check()?;
        check_radius(r)?;
        let major = (self.semi_major / r).powi(2);
        let minor = (self.semi_minor / r).powi(2);
        let (a, b, c) = cov_from_angles(AngleCov {
            a_prime: major,
            b_prime: minor,
            theta: self.theta,
        })?;
        GaussBox::new(self.x0, self.y0, a, b, c)
    }
}

/// An ellipse with its rotation evaluated once, for repeated point tests.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EllipseLocal {
    pub e: Ellipse,
    pub sin: f64,
    pub cos: f64,
}

impl EllipseLocal {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (s, c) = (self.sin, self.cos);
        let dx = p[0] - self.e.x0;
        let dy = p[1] - self.e.y0;
        let u = (c * dx + s * dy) / self.e.semi_major;
        let v = (c * dy - s * dx) / self.e.semi_minor;
        u * u + v * v <= 1.0
    }
}

/// Unconstrained regression targets for a covariance:
/// `a = exp(alpha)`, `b = exp(-alpha) c^2 + exp(beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedCovParams {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
}

impl ConstrainedCovParams {
    /// Inverse of [`constrained_to_cov`] for a positive-definite covariance.
    pub fn from_cov(a: f64, b: f64, c: f64) -> Result<Self> {
        let det = a * b - c * c;
        if !(a > 0.0 && det > 0.0) {
            return Err(GbbError::NotPositiveDefinite(format!(
                "a={a}, det={det}"
            )));
        }
        Ok(Self { alpha: a.ln(), beta: (det / a).ln(), c })
    }
}

/// Result of [`validate_gbb`].
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub valid: bool,
    pub diagnostic: Option<String>,
}

fn check_dims(w: f64, h: f64) -> Result<()> {
    if w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite() {
        Ok(())
    } else {
        Err(GbbError::InvalidDimensions { w, h })
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(GbbError::OutOfRange {
            name: "r",
            value: r,
            expected: "r > 0",
        })
    }
}

/// Sylvester check on the covariance with threshold [`VALIDITY_EPS`].
pub fn validate_gbb(g: &GaussBox) -> Validation {
    validate_gbb_with_eps(g, VALIDITY_EPS)
}

pub fn validate_gbb_with_eps(g: &GaussBox, eps: f64) -> Validation {
    let fields = [g.x0, g.y0, g.a, g.b, g.c];
    let diagnostic = if fields.iter().any(|v| !v.is_finite()) {
        Some(format!("non-finite parameter in {fields:?}"))
    } else if g.a <= eps {
        Some(format!("a={} must exceed {eps}", g.a))
    } else if g.det() <= eps {
        Some(format!("a*b - c^2 = {} must exceed {eps}", g.det()))
    } else {
        None
    };
    Validation {
        valid: diagnostic.is_none(),
        diagnostic,
    }
}

pub fn hbb_to_gbb(hbb: &Hbb) -> Result<GaussBox> {
    check_dims(hbb.w, hbb.h)?;
    GaussBox::new(hbb.x0, hbb.y0, hbb.w * hbb.w / 12.0, hbb.h * hbb.h / 12.0, 0.0)
}

pub fn obb_to_gbb(obb: &Obb) -> Result<GaussBox> {
    check_dims(obb.w, obb.h)?;
    let (a, b, c) = cov_from_angles(AngleCov {
        a_prime: obb.w * obb.w / 12.0,
        b_prime: obb.h * obb.h / 12.0,
        theta: obb.theta,
    })?;
    GaussBox::new(obb.x0, obb.y0, a, b, c)
}

/// Expands `R(theta) diag(a', b') R(theta)^T` into `(a, b, c)`.
pub fn cov_from_angles(ac: AngleCov) -> Result<(f64, f64, f64)> {
    if !(ac.a_prime > 0.0 && ac.b_prime > 0.0) || !ac.theta.is_finite() {
        return Err(GbbError::NonPositiveVariance {
            a_prime: ac.a_prime,
            b_prime: ac.b_prime,
        });
    }
    let (s, c) = ac.theta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let a = ac.a_prime * c2 + ac.b_prime * s2;
    let b = ac.a_prime * s2 + ac.b_prime * c2;
    let cc = (ac.a_prime - ac.b_prime) * s * c;
    Ok((a, b, cc))
}

/// Canonical `(a', b', theta)` factorization with `theta` in `[-pi/4, pi/4]`.
pub fn gbb_to_angle_cov(g: &GaussBox) -> Result<AngleCov> {
    g.check()?;
    if (g.a - g.b).abs() < ISOTROPIC_EPS && g.c.abs() < ISOTROPIC_EPS {
        return Ok(AngleCov {
            a_prime: g.a,
            b_prime: g.b,
            theta: 0.0,
        });
    }
    let (major, minor) = g.eigenvalues();
    let mut theta = 0.5 * (2.0 * g.c).atan2(g.a - g.b);
    let (mut a_prime, mut b_prime) = (major, minor);
    if theta > FRAC_PI_4 {
        theta -= FRAC_PI_2;
        std::mem::swap(&mut a_prime, &mut b_prime);
    } else if theta < -FRAC_PI_4 {
        theta += FRAC_PI_2;
        std::mem::swap(&mut a_prime, &mut b_prime);
    }
    Ok(AngleCov { a_prime, b_prime, theta })
}

pub fn gbb_to_obb(g: &GaussBox) -> Result<Obb> {
    let ac = gbb_to_angle_cov(g)?;
    Ok(Obb {
        x0: g.x0,
        y0: g.y0,
        w: (12.0 * ac.a_prime).sqrt(),
        h: (12.0 * ac.b_prime).sqrt(),
        theta: ac.theta,
    })
}

/// Mean and covariance of the uniform density over the polygon interior.
pub fn mask_to_gbb(mask: &PolygonMask) -> Result<GaussBox> {
    let m = mask.moments();
    GaussBox::new(m.centroid[0], m.centroid[1], m.cov[0], m.cov[1], m.cov[2])
}

pub fn mask_to_hbb(mask: &PolygonMask) -> Result<Hbb> {
    let (min, max) = mask.bounds();
    let hbb = Hbb::from_bounds(min, max);
    check_dims(hbb.w, hbb.h)?;
    Ok(hbb)
}

/// Minimum-area enclosing rectangle, with the angle in canonical range.
pub fn mask_to_obb(mask: &PolygonMask) -> Result<Obb> {
    let obb = mask.min_area_rect()?;
    check_dims(obb.w, obb.h)?;
    Ok(obb.canonical())
}

/// Level set `d^2(x) = r^2` of the Mahalanobis distance.
///
/// Semi-axes are `r * sqrt(lambda_i)` for the covariance eigenvalues, i.e.
/// `r / sqrt(lambda_i)` in terms of the precision matrix. With
/// [`DEFAULT_LEVEL_RADIUS`] the area equals `W * H` of the box that produced
/// the covariance.
pub fn gbb_to_ellipse(g: &GaussBox, r: f64) -> Result<Ellipse> {
    check_radius(r)?;
    let ac = gbb_to_angle_cov(g)?;
    let (major, minor, theta) = if ac.a_prime >= ac.b_prime {
        (ac.a_prime, ac.b_prime, ac.theta)
    } else {
        (ac.b_prime, ac.a_prime, ac.theta + FRAC_PI_2)
    };
    Ellipse::new(g.x0, g.y0, r * major.sqrt(), r * minor.sqrt(), theta)
}

/// Radius whose level set holds a fraction `tau` of the Gaussian mass.
///
/// The squared Mahalanobis distance is chi-squared with two degrees of
/// freedom, whose CDF is `1 - exp(-x / 2)`.
pub fn r_from_tau(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(GbbError::OutOfRange {
            name: "tau",
            value: tau,
            expected: "0 < tau < 1",
        });
    }
    Ok((-2.0 * (-tau).ln_1p()).sqrt())
}

/// Mass fraction inside the level set of radius `r`.
pub fn tau_from_r(r: f64) -> f64 {
    -(-0.5 * r * r).exp_m1()
}

/// Maps unconstrained `(alpha, beta, c)` to a positive-definite covariance.
pub fn constrained_to_cov(p: ConstrainedCovParams) -> (f64, f64, f64) {
    let alpha = clamp_exponent(p.alpha);
    let beta = clamp_exponent(p.beta);
    let a = alpha.exp();
    let b = (-alpha).exp() * p.c * p.c + beta.exp();
    (a, b, p.c)
}

fn clamp_exponent(v: f64) -> f64 {
    // NaN maps to zero so the function stays total
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
    }
}
