//! Weighted EM for a 2-D Gaussian mixture over pixel coordinates.
//!
//! Every pixel with positive map value is a sample at `(x, y)` whose weight is
//! the map value. Weights enter the responsibilities directly, so no sampling
//! noise is introduced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::raster::FloatMap;

/// Symmetric 2x2 covariance in pixels².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance {
    pub fn isotropic(variance: f64) -> Self {
        Covariance {
            xx: variance,
            xy: 0.0,
            yy: variance,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues `(larger, smaller)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mid = 0.5 * (self.xx + self.yy);
        let half_gap = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        (mid + half_gap, mid - half_gap)
    }

    /// Unit eigenvector of the larger eigenvalue.
    pub fn major_axis(&self) -> (f64, f64) {
        let (l1, _) = self.eigenvalues();
        let (vx, vy) = if self.xy.abs() > 0.0 {
            (self.xy, l1 - self.xx)
        } else if self.xx >= self.yy {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let n = vx.hypot(vy);
        (vx / n, vy / n)
    }

    /// Raises every eigenvalue below `floor` to `floor`.
    pub fn floored(&self, floor: f64) -> Covariance {
        let (l1, l2) = self.eigenvalues();
        if l2 >= floor {
            return *self;
        }
        let (ux, uy) = self.major_axis();
        let (l1, l2) = (l1.max(floor), l2.max(floor));
        // minor axis is (-uy, ux)
        Covariance {
            xx: l1 * ux * ux + l2 * uy * uy,
            xy: (l1 - l2) * ux * uy,
            yy: l1 * uy * uy + l2 * ux * ux,
        }
    }
}

/// One weighted 2-D Gaussian of the mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmComponent {
    pub mean: (f64, f64),
    pub covariance: Covariance,
    /// Mixing proportion; proportions of a fit sum to 1.
    pub proportion: f64,
}

impl GmmComponent {
    pub fn log_density(&self, x: f64, y: f64) -> f64 {
        let c = &self.covariance;
        let det = c.det();
        let (dx, dy) = (x - self.mean.0, y - self.mean.1);
        let maha = (c.yy * dx * dx - 2.0 * c.xy * dx * dy + c.xx * dy * dy) / det;
        -(std::f64::consts::TAU).ln() - 0.5 * det.ln() - 0.5 * maha
    }

    /// Bivariate normal density at `(x, y)`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        self.log_density(x, y).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    /// Number of components `K`.
    pub components: usize,
    pub max_em_iters: usize,
    pub loglik_rel_tol: f64,
    pub covariance_floor: f64,
    pub rng_seed: u64,
}

impl Default for PriorParams {
    fn default() -> Self {
        PriorParams {
            components: 5,
            max_em_iters: 100,
            loglik_rel_tol: 1e-6,
            covariance_floor: 1.0,
            rng_seed: 0,
        }
    }
}

impl PriorParams {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::argument("component count must be at least 1"));
        }
        if !(self.loglik_rel_tol > 0.0) || !(self.covariance_floor > 0.0) {
            return Err(Error::argument(
                "log-likelihood tolerance and covariance floor must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub components: Vec<GmmComponent>,
    /// Weighted log-likelihood (weights normalized to unit sum) before the
    /// first M-step and after each one.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy)]
struct Sample {
    x: f64,
    y: f64,
    w: f64,
}

fn initial_means(samples: &[Sample], k: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    // heaviest first; raster order breaks ties
    order.sort_by(|&a, &b| samples[b].w.total_cmp(&samples[a].w).then(a.cmp(&b)));
    let top = (samples.len() as f64 * 0.01).ceil() as usize;
    let candidates = &order[..top.max(k).min(samples.len())];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = candidates[rng.gen_range(0..candidates.len())];
    let mut means = vec![(samples[first].x, samples[first].y)];
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|&i| (samples[i].x - means[0].0).powi(2) + (samples[i].y - means[0].1).powi(2))
        .collect();
    while means.len() < k {
        let (best, _) = nearest
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc },
            );
        let s = samples[candidates[best]];
        means.push((s.x, s.y));
        for (d, &i) in nearest.iter_mut().zip(candidates) {
            *d = d.min((samples[i].x - s.x).powi(2) + (samples[i].y - s.y).powi(2));
        }
    }
    means
}

/// E-step: fills `resp` (row per sample) and returns the weighted log-likelihood.
fn expectation(samples: &[Sample], comps: &[GmmComponent], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    // (mean, inverse covariance entries, log of proportion times normalizer)
    let terms: Vec<((f64, f64), [f64; 3], f64)> = comps
        .iter()
        .map(|c| {
            let cov = &c.covariance;
            let det = cov.det();
            let inv = [cov.yy / det, -2.0 * cov.xy / det, cov.xx / det];
            let offset = c.proportion.ln() - std::f64::consts::TAU.ln() - 0.5 * det.ln();
            (c.mean, inv, offset)
        })
        .collect();
    let partials: Vec<(Vec<f64>, f64)> = par::map_chunks(samples, |chunk| {
        let mut out = Vec::with_capacity(chunk.len() * k);
        let mut ll = 0.0;
        let mut logp = vec![0.0; k];
        for s in chunk {
            for (l, (mean, inv, offset)) in logp.iter_mut().zip(&terms) {
                let (dx, dy) = (s.x - mean.0, s.y - mean.1);
                *l = offset - 0.5 * (inv[0] * dx * dx + inv[1] * dx * dy + inv[2] * dy * dy);
            }
            let m = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for l in logp.iter_mut() {
                *l = (*l - m).exp();
            }
            let sum: f64 = logp.iter().sum();
            ll += s.w * (m + sum.ln());
            out.extend(logp.iter().map(|e| e / sum));
        }
        (out, ll)
    });
    let mut ll = 0.0;
    let mut offset = 0;
    for (chunk_resp, chunk_ll) in partials {
        resp[offset..offset + chunk_resp.len()].copy_from_slice(&chunk_resp);
        offset += chunk_resp.len();
        ll += chunk_ll;
    }
    ll
}

fn maximization(
    samples: &[Sample],
    resp: &[f64],
    prev: &[GmmComponent],
    floor: f64,
) -> Vec<GmmComponent> {
    let k = prev.len();
    let chunk_resp = |ci: usize| &resp[ci * par::REDUCE_CHUNK * k..];

    let chunk_ids: Vec<usize> = (0..samples.len().div_ceil(par::REDUCE_CHUNK)).collect();
    let first: Vec<Vec<[f64; 3]>> = par::map_slice(&chunk_ids, |&ci| {
        let start = ci * par::REDUCE_CHUNK;
        let chunk = &samples[start..(start + par::REDUCE_CHUNK).min(samples.len())];
        let r = chunk_resp(ci);
        let mut acc = vec![[0.0; 3]; k];
        for (i, s) in chunk.iter().enumerate() {
            for (j, a) in acc.iter_mut().enumerate() {
                let wr = s.w * r[i * k + j];
                a[0] += wr;
                a[1] += wr * s.x;
                a[2] += wr * s.y;
            }
        }
        acc
    });
    let mut mass = vec![0.0; k];
    let mut sx = vec![0.0; k];
    let mut sy = vec![0.0; k];
    for acc in &first {
        for j in 0..k {
            mass[j] += acc[j][0];
            sx[j] += acc[j][1];
            sy[j] += acc[j][2];
        }
    }
    let means: Vec<(f64, f64)> = (0..k)
        .map(|j| {
            if mass[j] > 0.0 {
                (sx[j] / mass[j], sy[j] / mass[j])
            } else {
                prev[j].mean
            }
        })
        .collect();

    let second: Vec<Vec<[f64; 3]>> = par::map_slice(&chunk_ids, |&ci| {
        let start = ci * par::REDUCE_CHUNK;
        let chunk = &samples[start..(start + par::REDUCE_CHUNK).min(samples.len())];
        let r = chunk_resp(ci);
        let mut acc = vec![[0.0; 3]; k];
        for (i, s) in chunk.iter().enumerate() {
            for (j, a) in acc.iter_mut().enumerate() {
                let wr = s.w * r[i * k + j];
                let (dx, dy) = (s.x - means[j].0, s.y - means[j].1);
                a[0] += wr * dx * dx;
                a[1] += wr * dx * dy;
                a[2] += wr * dy * dy;
            }
        }
        acc
    });
    let mut scatter = vec![[0.0; 3]; k];
    for acc in &second {
        for j in 0..k {
            for t in 0..3 {
                scatter[j][t] += acc[j][t];
            }
        }
    }

    const MIN_PROPORTION: f64 = 1e-12;
    let total: f64 = mass.iter().map(|m| m.max(MIN_PROPORTION)).sum();
    (0..k)
        .map(|j| {
            let covariance = if mass[j] > 0.0 {
                Covariance {
                    xx: scatter[j][0] / mass[j],
                    xy: scatter[j][1] / mass[j],
                    yy: scatter[j][2] / mass[j],
                }
                .floored(floor)
            } else {
                prev[j].covariance
            };
            GmmComponent {
                mean: means[j],
                covariance,
                proportion: mass[j].max(MIN_PROPORTION) / total,
            }
        })
        .collect()
}

/// Fits a `K`-component mixture to pixel coordinates weighted by `weights`.
///
/// Initial means are picked greedily by max-min distance among the heaviest
/// 1% of positive pixels, starting from a seeded random pick. Initial
/// covariances are isotropic with standard deviation `min(W, H) / 8`.
/// Covariance eigenvalues are floored after every M-step. Iteration stops
/// when the relative log-likelihood change drops below the tolerance.
pub fn fit_gmm(weights: &FloatMap, params: &PriorParams) -> Result<GmmFit> {
    params.validate()?;
    if let Some(v) = weights
        .as_slice()
        .iter()
        .find(|v| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::argument(format!(
            "mixture weights must be finite and non-negative, found {v}"
        )));
    }
    let total: f64 = weights.sum();
    if !(total > 0.0) {
        return Err(Error::argument("no mass to fit"));
    }
    let (w, h) = weights.dims();
    let samples: Vec<Sample> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter_map(|(x, y)| {
            let v = weights.get(x, y);
            (v > 0.0).then(|| Sample {
                x: x as f64,
                y: y as f64,
                w: v / total,
            })
        })
        .collect();

    let k = params.components;
    let spread = (w.min(h) as f64 / 8.0).powi(2).max(params.covariance_floor);
    let mut comps: Vec<GmmComponent> = initial_means(&samples, k, params.rng_seed)
        .into_iter()
        .map(|mean| GmmComponent {
            mean,
            covariance: Covariance::isotropic(spread),
            proportion: 1.0 / k as f64,
        })
        .collect();

    let mut resp = vec![0.0; samples.len() * k];
    let mut trace = vec![expectation(&samples, &comps, &mut resp)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_em_iters {
        comps = maximization(&samples, &resp, &comps, params.covariance_floor);
        iterations += 1;
        let ll = expectation(&samples, &comps, &mut resp);
        let prev = *trace.last().expect("non-empty");
        trace.push(ll);
        if (ll - prev).abs() <= params.loglik_rel_tol * prev.abs() {
            converged = true;
            break;
        }
    }
    Ok(GmmFit {
        components: comps,
        log_likelihood: trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_map(w: usize, h: usize, blobs: &[(f64, f64, f64, f64)]) -> FloatMap {
        // (cx, cy, sigma, mass)
        FloatMap::from_fn(w, h, |x, y| {
            blobs
                .iter()
                .map(|&(cx, cy, s, m)| {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    m * (-d2 / (2.0 * s * s)).exp() / (std::f64::consts::TAU * s * s)
                })
                .sum()
        })
    }

    #[test]
    fn single_component_mean_is_weighted_centroid() {
        let map = FloatMap::from_fn(31, 17, |x, y| ((x * 7 + y * 3) % 5) as f64 * 0.3);
        let fit = fit_gmm(
            &map,
            &PriorParams {
                components: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let total = map.sum();
        let (mut cx, mut cy) = (0.0, 0.0);
        for y in 0..17 {
            for x in 0..31 {
                cx += x as f64 * map.get(x, y);
                cy += y as f64 * map.get(x, y);
            }
        }
        let m = fit.components[0].mean;
        assert!((m.0 - cx / total).abs() < 1e-9 && (m.1 - cy / total).abs() < 1e-9);
        assert_eq!(fit.components[0].proportion, 1.0);
    }

    #[test]
    fn recovers_two_blobs() {
        let map = blob_map(300, 80, &[(50.0, 40.0, 5.0, 0.5), (250.0, 40.0, 5.0, 0.5)]);
        let fit = fit_gmm(
            &map,
            &PriorParams {
                components: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let mut means: Vec<_> = fit.components.iter().map(|c| c.mean).collect();
        means.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(
            (means[0].0 - 50.0).hypot(means[0].1 - 40.0) < 2.0,
            "{means:?}"
        );
        assert!(
            (means[1].0 - 250.0).hypot(means[1].1 - 40.0) < 2.0,
            "{means:?}"
        );
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let map = blob_map(
            120,
            90,
            &[
                (30.0, 30.0, 6.0, 0.4),
                (80.0, 60.0, 10.0, 0.4),
                (100.0, 20.0, 3.0, 0.2),
            ],
        );
        let fit = fit_gmm(
            &map,
            &PriorParams {
                components: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.log_likelihood.len() >= 2);
        for pair in fit.log_likelihood.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12 * pair[0].abs(), "{pair:?}");
        }
        let total: f64 = fit.components.iter().map(|c| c.proportion).sum();
        assert!((total - 1.0).abs() < 1e-6);
        for c in &fit.components {
            assert!(c.covariance.eigenvalues().1 >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn all_zero_weights_rejected() {
        let err = fit_gmm(&FloatMap::zeros(5, 5), &PriorParams::default()).unwrap_err();
        assert!(err.to_string().contains("no mass to fit"));
        let mut neg = FloatMap::zeros(3, 3);
        neg.set(1, 1, -1.0);
        assert!(fit_gmm(&neg, &PriorParams::default()).is_err());
    }

    #[test]
    fn fit_is_deterministic_and_path_independent() {
        let map = blob_map(
            200,
            150,
            &[(50.0, 50.0, 8.0, 0.6), (150.0, 100.0, 12.0, 0.4)],
        );
        let p = PriorParams::default();
        let a = fit_gmm(&map, &p).unwrap();
        let b = fit_gmm(&map, &p).unwrap();
        let c = par::sequential(|| fit_gmm(&map, &p).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn more_components_than_pixels_still_fits() {
        let mut map = FloatMap::zeros(10, 10);
        map.set(2, 3, 1.0);
        map.set(7, 7, 2.0);
        let fit = fit_gmm(&map, &PriorParams::default()).unwrap();
        assert_eq!(fit.components.len(), 5);
        assert!(fit.components.iter().all(|c| c.proportion > 0.0));
    }

    #[test]
    fn covariance_floor_and_eigen_helpers() {
        let c = Covariance {
            xx: 4.0,
            xy: 0.0,
            yy: 16.0,
        };
        assert_eq!(c.eigenvalues(), (16.0, 4.0));
        assert_eq!(c.major_axis(), (0.0, 1.0));
        let thin = Covariance {
            xx: 9.0,
            xy: 2.99,
            yy: 1.0,
        };
        let f = thin.floored(2.0);
        let (l1, l2) = f.eigenvalues();
        assert!((l2 - 2.0).abs() < 1e-9);
        assert!((l1 - thin.eigenvalues().0).abs() < 1e-9);
        assert_eq!(c.floored(1.0), c);
    }

    #[test]
    fn density_matches_closed_form() {
        let comp = GmmComponent {
            mean: (3.0, -1.0),
            covariance: Covariance {
                xx: 2.0,
                xy: 0.5,
                yy: 1.0,
            },
            proportion: 1.0,
        };
        let (x, y) = (4.0, 0.5);
        let det: f64 = 2.0 * 1.0 - 0.25;
        let (dx, dy) = (1.0, 1.5);
        let q = (1.0 * dx * dx - 2.0 * 0.5 * dx * dy + 2.0 * dy * dy) / det;
        let expected = (-0.5 * q).exp() / (std::f64::consts::TAU * det.sqrt());
        assert!((comp.density(x, y) - expected).abs() < 1e-15);
    }
}
