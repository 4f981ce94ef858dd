//! Gaussian bounding boxes (GBBs) and the ProbIoU family of similarity
//! measures.
//!
//! A GBB encodes an object region as a 2D Gaussian `N(mu, Sigma)`. Boxes,
//! oriented boxes and polygon masks all map onto GBBs through their first
//! and second moments, and two GBBs are compared through the Bhattacharyya
//! distance, the Hellinger distance, and `ProbIoU = 1 - Hellinger`.
//!
//! Module map:
//!
//! * [`gauss`]: the data model, representation conversions and covariance
//!   parametrizations.
//! * [`polygon`]: polygon moments, convex hull, minimum-area rectangles and
//!   exact polygon intersection areas.
//! * [`metrics`]: Bhattacharyya terms, ProbIoU, the L1/L2 losses and their
//!   analytic gradients.
//! * [`raster`]: IoU oracles (analytic, clipping-based and rasterized).
//! * [`regress`]: a toy gradient-descent harness for the two-stage loss
//!   schedule.

pub mod error;
pub mod gauss;
pub mod metrics;
pub mod polygon;
pub mod raster;
pub mod regress;

pub use error::{GbbError, Result};
pub use gauss::{
    cov_from_angles, constrained_to_cov, gbb_to_angle_cov, gbb_to_ellipse, gbb_to_obb,
    hbb_to_gbb, mask_to_gbb, mask_to_hbb, mask_to_obb, obb_to_gbb, r_from_tau, tau_from_r, validate_gbb,
    AngleCov, ConstrainedCovParams, Ellipse, GaussBox, Hbb, Obb, Similarity, Validation,
    DEFAULT_LEVEL_RADIUS,
};
pub use metrics::{
    bhattacharyya_terms, grad_general, grad_l1_hbb, grad_l2_hbb, hbb_uniform_bc, hbb_uniform_probiou,
    loss_l2_axis_aligned, mask_bc, mask_probiou, similarity, BhattacharyyaTerms, GaussGradient, GradOutcome, HbbGradient,
    LossKind, SimilarityReport,
};
pub use polygon::PolygonMask;
pub use raster::{iou_convex, iou_hbb, iou_raster, rasterize, RasterGrid, Shape};
pub use regress::{
    fit_gbb, gradient_probe, schedule_loss, FitError, FitTrajectory, GradientProbe, LossSchedule,
    OptimizerConfig, Parametrization, TrajectoryStep,
};
