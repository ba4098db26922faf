//! Closure-guided visual attention.
//!
//! The pipeline turns a line drawing into a spatial prior and uses it to
//! re-weight a bottom-up saliency map:
//!
//! 1. [`contour`]: edge detection and edge linking produce a contour mask
//!    (or a human-marked mask is used directly).
//! 2. [`closure`]: every pixel casts rays in `D` directions; the number of
//!    rays that hit a contour and the spread of the hit radii give a per-pixel
//!    closure degree.
//! 3. [`gmm`] and [`prior`]: a weighted mixture of Gaussians is fitted to the
//!    closure map and its components are re-weighted by proportion, roundness
//!    and distance to the image center.
//! 4. [`saliency`]: the prior multiplies a bottom-up map (feature-pyramid
//!    contrast or DCT image signature).
//!
//! [`analytics`] and [`eval`] hold the fixation-side measurements: blurred
//! fixation densities, correlation and MAE, per-segment saliency and shape
//! features, contour/closed-region co-location metrics and ROC scoring.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod closure;
pub mod contour;
pub mod error;
pub mod eval;
pub mod fixation;
pub mod gmm;
pub mod io;
pub mod par;
pub mod prior;
pub mod raster;
pub mod saliency;

pub use error::{Error, Result};
pub use fixation::{FixationRecord, FixationSet};
pub use raster::{
    dilate, gaussian_blur, normalize01, ColorImage, ContourMask, FloatMap, GrayImage, Grid, Image,
    LabelMap,
};
