//! Spatial prior: a weighted sum of mixture components fitted to the closure map.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, GmmComponent, GmmFit, PriorParams};
use crate::io::write_bytes;
use crate::par;
use crate::raster::FloatMap;

/// Factors of a component's weight. `omega` is their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentWeight {
    pub proportion: f64,
    /// Ratio of the smaller to the larger covariance eigenvalue.
    pub roundness: f64,
    /// Linear falloff with distance of the mean from the image center.
    pub centrality: f64,
    pub omega: f64,
}

/// Weights each component by proportion, roundness and closeness to the image
/// center.
///
/// Distance is measured from the center of the pixel grid,
/// `((W-1)/2, (H-1)/2)`, and normalized by the distance from there to a
/// corner pixel, so a mean on a corner pixel gets zero.
pub fn component_weights(
    components: &[GmmComponent],
    width: usize,
    height: usize,
) -> Vec<ComponentWeight> {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let d_max = cx.hypot(cy);
    components
        .iter()
        .map(|c| {
            let (l_max, l_min) = c.covariance.eigenvalues();
            let roundness = if l_max > 0.0 {
                (l_min / l_max).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let centrality = if d_max > 0.0 {
                (1.0 - (c.mean.0 - cx).hypot(c.mean.1 - cy) / d_max).max(0.0)
            } else {
                1.0
            };
            ComponentWeight {
                proportion: c.proportion,
                roundness,
                centrality,
                omega: c.proportion * roundness * centrality,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorMap {
    /// Max-normalized prior, or all ones when `degenerate`.
    pub map: FloatMap,
    /// Set when every weight was zero and the map fell back to ones.
    pub degenerate: bool,
}

/// Evaluates `Σ ω_i · N_i(x, y)` at every pixel and scales the maximum to 1.
pub fn prior_map(
    components: &[GmmComponent],
    omegas: &[f64],
    width: usize,
    height: usize,
) -> Result<PriorMap> {
    if components.len() != omegas.len() {
        return Err(Error::argument(format!(
            "{} components but {} weights",
            components.len(),
            omegas.len()
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::argument("prior map must have non-zero size"));
    }
    let active: Vec<(&GmmComponent, f64)> = components
        .iter()
        .zip(omegas)
        .filter(|(_, &w)| w > 0.0)
        .map(|(c, &w)| (c, w))
        .collect();
    let ones = || PriorMap {
        map: FloatMap::filled(width, height, 1.0),
        degenerate: true,
    };
    if active.is_empty() {
        log::warn!("every prior component has zero weight; using a uniform prior");
        return Ok(ones());
    }
    let mut map = FloatMap::zeros(width, height);
    par::for_each_row(map.as_mut_slice(), width, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            *v = active
                .iter()
                .map(|(c, w)| w * c.density(x as f64, y as f64))
                .sum();
        }
    });
    let (_, max) = map.min_max();
    if !(max > 0.0) || !max.is_finite() {
        log::warn!("prior underflowed everywhere; using a uniform prior");
        return Ok(ones());
    }
    for v in map.as_mut_slice() {
        *v /= max;
    }
    Ok(PriorMap {
        map,
        degenerate: false,
    })
}

/// Mixture fit, component weights and resulting prior for one closure map.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPrior {
    pub fit: GmmFit,
    pub weights: Vec<ComponentWeight>,
    pub prior: PriorMap,
}

pub fn spatial_prior(closure: &FloatMap, params: &PriorParams) -> Result<SpatialPrior> {
    let fit = fit_gmm(closure, params)?;
    let (w, h) = closure.dims();
    let weights = component_weights(&fit.components, w, h);
    let omegas: Vec<f64> = weights.iter().map(|c| c.omega).collect();
    let prior = prior_map(&fit.components, &omegas, w, h)?;
    Ok(SpatialPrior {
        fit,
        weights,
        prior,
    })
}

pub const COMPONENT_HEADER: &str =
    "component_id,mean_x,mean_y,cov_xx,cov_xy,cov_yy,proportion,omega";

pub fn components_csv(components: &[GmmComponent], omegas: &[f64]) -> String {
    let mut out = String::from(COMPONENT_HEADER);
    out.push('\n');
    for (i, (c, w)) in components.iter().zip(omegas).enumerate() {
        let cov = &c.covariance;
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{}\n",
            c.mean.0, c.mean.1, cov.xx, cov.xy, cov.yy, c.proportion, w
        ));
    }
    out
}

pub fn write_components_csv(
    components: &[GmmComponent],
    omegas: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_bytes(path, components_csv(components, omegas).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::Covariance;

    fn comp(mean: (f64, f64), cov: Covariance, proportion: f64) -> GmmComponent {
        GmmComponent {
            mean,
            covariance: cov,
            proportion,
        }
    }

    #[test]
    fn centered_round_component_has_unit_weight() {
        let c = comp((49.5, 29.5), Covariance::isotropic(25.0), 1.0);
        let w = component_weights(&[c], 100, 60);
        assert_eq!(w[0].omega, 1.0);
    }

    #[test]
    fn corner_component_has_zero_weight() {
        for mean in [(0.0, 0.0), (99.0, 0.0), (0.0, 59.0), (99.0, 59.0)] {
            let w = component_weights(&[comp(mean, Covariance::isotropic(4.0), 0.5)], 100, 60);
            assert!(w[0].centrality.abs() < 1e-12);
            assert!(w[0].omega.abs() < 1e-12);
        }
    }

    #[test]
    fn roundness_is_eigenvalue_ratio() {
        let c = comp(
            (10.0, 10.0),
            Covariance {
                xx: 4.0,
                xy: 0.0,
                yy: 16.0,
            },
            1.0,
        );
        assert_eq!(component_weights(&[c], 21, 21)[0].roundness, 0.25);
        // rotated version of the same ellipse
        let (a, b) = (10.0, 6.0);
        let rotated = comp(
            (10.0, 10.0),
            Covariance {
                xx: a,
                xy: b,
                yy: a,
            },
            1.0,
        );
        let r = component_weights(&[rotated], 21, 21)[0].roundness;
        assert!((r - 4.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_image_is_fully_central() {
        let w = component_weights(&[comp((0.0, 0.0), Covariance::isotropic(1.0), 1.0)], 1, 1);
        assert_eq!(w[0].centrality, 1.0);
    }

    #[test]
    fn centered_component_peaks_at_center() {
        let c = comp((32.0, 20.0), Covariance::isotropic(30.0), 1.0);
        let p = prior_map(&[c], &[1.0], 65, 41).unwrap();
        assert!(!p.degenerate);
        assert_eq!(p.map.argmax(), (32, 20, 1.0));
        assert_eq!(p.map.min_max().1, 1.0);
        assert!(p.map.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn prior_is_linear_in_components() {
        let a = comp(
            (10.0, 12.0),
            Covariance {
                xx: 9.0,
                xy: 2.0,
                yy: 4.0,
            },
            0.5,
        );
        let b = comp((30.0, 20.0), Covariance::isotropic(16.0), 0.5);
        let both = prior_map(&[a, b], &[0.3, 0.3], 40, 30).unwrap().map;
        // unnormalized sums from direct pdf evaluation
        let raw = FloatMap::from_fn(40, 30, |x, y| {
            0.3 * a.density(x as f64, y as f64) + 0.3 * b.density(x as f64, y as f64)
        });
        let max = raw.min_max().1;
        for (u, v) in both.as_slice().iter().zip(raw.as_slice()) {
            assert!((u - v / max).abs() < 1e-12);
        }
    }

    #[test]
    fn density_matches_direct_formula_at_sampled_pixels() {
        let c = comp(
            (20.5, 14.0),
            Covariance {
                xx: 30.0,
                xy: -6.0,
                yy: 12.0,
            },
            1.0,
        );
        let p = prior_map(&[c], &[1.0], 41, 29).unwrap().map;
        let pdf = |x: f64, y: f64| {
            let det: f64 = 30.0 * 12.0 - 36.0;
            let (dx, dy) = (x - 20.5, y - 14.0);
            let q = (12.0 * dx * dx + 2.0 * 6.0 * dx * dy + 30.0 * dy * dy) / det;
            (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        let peak = (0..29)
            .flat_map(|y| (0..41).map(move |x| pdf(x as f64, y as f64)))
            .fold(0.0, f64::max);
        for (x, y) in [
            (0, 0),
            (3, 7),
            (20, 14),
            (21, 14),
            (40, 28),
            (11, 2),
            (33, 19),
            (5, 25),
            (27, 9),
            (16, 16),
        ] {
            assert!((p.get(x, y) - pdf(x as f64, y as f64) / peak).abs() < 1e-9);
        }
    }

    #[test]
    fn all_zero_weights_give_uniform_flagged_prior() {
        let c = comp((0.0, 0.0), Covariance::isotropic(1.0), 1.0);
        let p = prior_map(&[c], &[0.0], 8, 6).unwrap();
        assert!(p.degenerate);
        assert!(p.map.as_slice().iter().all(|&v| v == 1.0));
        assert!(prior_map(&[c], &[], 8, 6).is_err());
    }

    #[test]
    fn components_csv_layout() {
        let c = comp(
            (1.5, 2.0),
            Covariance {
                xx: 3.0,
                xy: 0.5,
                yy: 4.0,
            },
            1.0,
        );
        let csv = components_csv(&[c], &[0.25]);
        assert_eq!(
            csv,
            "component_id,mean_x,mean_y,cov_xx,cov_xy,cov_yy,proportion,omega\n0,1.5,2,3,0.5,4,1,0.25\n"
        );
    }
}
