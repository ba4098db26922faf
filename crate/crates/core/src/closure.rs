//! Per-pixel closure degree by directional ray casting.
//!
//! From each pixel, rays are cast in `D` directions. A ray that meets a
//! contour pixel before leaving the image (or exceeding the maximum length)
//! is a hit and contributes its Euclidean length as a radius. With `N` hits
//! out of `D` rays and hit radii of mean `R` and population standard
//! deviation `S`, the closure degree is
//!
//! ```text
//! exp(N - D) / (R + S)        (0 when N = 0)
//! ```
//!
//! so enclosed, small and round regions score highest.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{ContourMask, FloatMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureParams {
    /// Number of ray directions `D`.
    pub directions: usize,
    /// Longest radius that still counts as a hit. `None` means the image diagonal.
    pub max_ray_length: Option<f64>,
    /// Sampling step for [`closure_map`]; skipped pixels are filled bilinearly.
    pub stride: usize,
}

impl Default for ClosureParams {
    fn default() -> Self {
        ClosureParams {
            directions: 8,
            max_ray_length: None,
            stride: 1,
        }
    }
}

impl ClosureParams {
    pub fn validate(&self) -> Result<()> {
        if self.directions < 4 || !self.directions.is_multiple_of(2) {
            return Err(Error::argument(format!(
                "direction count must be even and at least 4, got {}",
                self.directions
            )));
        }
        if let Some(len) = self.max_ray_length {
            if !(len >= 1.0) {
                return Err(Error::argument(format!(
                    "max_ray_length must be at least 1, got {len}"
                )));
            }
        }
        if self.stride == 0 {
            return Err(Error::argument("stride must be at least 1"));
        }
        Ok(())
    }

    fn max_length(&self, width: usize, height: usize) -> f64 {
        self.max_ray_length
            .unwrap_or_else(|| (width as f64).hypot(height as f64))
    }
}

/// Hits of one pixel's ray fan.
#[derive(Debug, Clone, PartialEq)]
pub struct RayScan {
    /// `D`.
    pub directions: usize,
    /// Radii of the directions that hit, in direction order.
    pub radii: Vec<f64>,
}

impl RayScan {
    /// `N_d`: number of directions that met a contour pixel.
    pub fn hits(&self) -> usize {
        self.radii.len()
    }
}

/// One ray direction: per-step pixel offset and the length of one step.
#[derive(Debug, Clone, Copy)]
struct Direction {
    dx: f64,
    dy: f64,
    step_length: f64,
    /// Integer step for compass directions.
    compass: Option<(i64, i64)>,
}

const COMPASS_8: [(i64, i64); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Directions counterclockwise from east (as displayed, `y` down).
fn directions(count: usize) -> Vec<Direction> {
    let compass = |&(dx, dy): &(i64, i64)| Direction {
        dx: dx as f64,
        dy: dy as f64,
        step_length: if dx != 0 && dy != 0 { SQRT_2 } else { 1.0 },
        compass: Some((dx, dy)),
    };
    match count {
        8 => COMPASS_8.iter().map(compass).collect(),
        4 => COMPASS_8.iter().step_by(2).map(compass).collect(),
        _ => (0..count)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / count as f64;
                let (c, s) = (theta.cos(), -theta.sin());
                let scale = c.abs().max(s.abs());
                let (dx, dy) = (c / scale, s / scale);
                Direction {
                    dx,
                    dy,
                    step_length: dx.hypot(dy),
                    compass: None,
                }
            })
            .collect(),
    }
}

impl Direction {
    /// Euclidean length of `k` steps; exact-offset `sqrt` for compass rays.
    fn radius(&self, k: u64) -> f64 {
        match self.compass {
            Some((dx, dy)) => {
                let (ox, oy) = (k as i64 * dx, k as i64 * dy);
                ((ox * ox + oy * oy) as f64).sqrt()
            }
            None => k as f64 * self.step_length,
        }
    }
}

fn cast(contour: &ContourMask, x: usize, y: usize, dir: &Direction, max_len: f64) -> Option<f64> {
    let mut k = 1u64;
    loop {
        let (px, py) = match dir.compass {
            Some((dx, dy)) => (x as i64 + k as i64 * dx, y as i64 + k as i64 * dy),
            None => (
                (x as f64 + k as f64 * dir.dx).round() as i64,
                (y as f64 + k as f64 * dir.dy).round() as i64,
            ),
        };
        if !contour.contains(px, py) {
            return None;
        }
        let radius = dir.radius(k);
        if radius > max_len {
            return None;
        }
        if contour.get(px as usize, py as usize) {
            return Some(radius);
        }
        k += 1;
    }
}

/// Casts the ray fan from `(x, y)`. The start pixel itself is never a hit.
pub fn ray_scan(
    contour: &ContourMask,
    x: usize,
    y: usize,
    params: &ClosureParams,
) -> Result<RayScan> {
    params.validate()?;
    if x >= contour.width() || y >= contour.height() {
        return Err(Error::argument(format!(
            "ray start ({x}, {y}) outside {}x{} image",
            contour.width(),
            contour.height()
        )));
    }
    let max_len = params.max_length(contour.width(), contour.height());
    let radii = directions(params.directions)
        .iter()
        .filter_map(|d| cast(contour, x, y, d, max_len))
        .collect();
    Ok(RayScan {
        directions: params.directions,
        radii,
    })
}

/// Closure degree from hit radii listed in direction order.
pub fn closure_from_radii(radii: &[f64], directions: usize) -> f64 {
    if radii.is_empty() {
        return 0.0;
    }
    let n = radii.len() as f64;
    let mean = radii.iter().sum::<f64>() / n;
    let var = radii.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    (n - directions as f64).exp() / (mean + var.sqrt())
}

/// `exp(N - D) / (R + S)` for one scan; 0 when no ray hit.
pub fn closure_degree(scan: &RayScan) -> f64 {
    closure_from_radii(&scan.radii, scan.directions)
}

/// Distance in steps to the first contour pixel along `(dx, dy)` for every
/// pixel, 0 meaning no hit. One linear sweep per direction.
fn compass_steps(contour: &ContourMask, (dx, dy): (i64, i64)) -> Vec<u32> {
    let (w, h) = contour.dims();
    let mut steps = vec![0u32; w * h];
    let ys: Vec<usize> = if dy > 0 {
        (0..h).rev().collect()
    } else {
        (0..h).collect()
    };
    let xs: Vec<usize> = if dx > 0 {
        (0..w).rev().collect()
    } else {
        (0..w).collect()
    };
    for &y in &ys {
        for &x in &xs {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !contour.contains(nx, ny) {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            steps[y * w + x] = if contour.get(nx, ny) {
                1
            } else {
                match steps[ny * w + nx] {
                    0 => 0,
                    s => s + 1,
                }
            };
        }
    }
    steps
}

/// Sample positions along one axis: every `stride`-th pixel plus the last.
fn stride_samples(len: usize, stride: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..len).step_by(stride).collect();
    if *s.last().expect("len >= 1") != len - 1 {
        s.push(len - 1);
    }
    s
}

/// Closure degree at every pixel (or at stride samples, bilinearly filled).
pub fn closure_map(contour: &ContourMask, params: &ClosureParams) -> Result<FloatMap> {
    params.validate()?;
    let (w, h) = contour.dims();
    if !contour.any() {
        return Ok(FloatMap::zeros(w, h));
    }
    let dirs = directions(params.directions);
    let max_len = params.max_length(w, h);
    let xs = stride_samples(w, params.stride);
    let ys = stride_samples(h, params.stride);

    let sweeps: Option<Vec<Vec<u32>>> = dirs
        .iter()
        .map(|d| d.compass)
        .collect::<Option<Vec<_>>>()
        .map(|steps| {
            steps
                .into_iter()
                .map(|s| compass_steps(contour, s))
                .collect()
        });

    let degree_at = |x: usize, y: usize| -> f64 {
        let mut radii = Vec::with_capacity(dirs.len());
        match &sweeps {
            Some(sweeps) => {
                for (dir, steps) in dirs.iter().zip(sweeps) {
                    let k = steps[y * w + x];
                    if k > 0 {
                        let r = dir.radius(k as u64);
                        if r <= max_len {
                            radii.push(r);
                        }
                    }
                }
            }
            None => radii.extend(dirs.iter().filter_map(|d| cast(contour, x, y, d, max_len))),
        }
        closure_from_radii(&radii, dirs.len())
    };

    let sw = xs.len();
    let mut samples = vec![0.0; sw * ys.len()];
    par::for_each_row(&mut samples, sw, |j, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = degree_at(xs[i], ys[j]);
        }
    });
    if params.stride == 1 {
        return FloatMap::from_vec(w, h, samples);
    }

    // bracket index and weight per output coordinate
    let brackets = |samples_at: &[usize], len: usize| -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(len);
        let mut k = 0;
        for p in 0..len {
            while k + 1 < samples_at.len() - 1 && samples_at[k + 1] <= p {
                k += 1;
            }
            if samples_at.len() == 1 {
                out.push((0, 0.0));
                continue;
            }
            let (a, b) = (samples_at[k], samples_at[k + 1]);
            out.push((k, (p as f64 - a as f64) / (b - a) as f64));
        }
        out
    };
    let bx = brackets(&xs, w);
    let by = brackets(&ys, h);
    let at = |i: usize, j: usize| samples[j.min(ys.len() - 1) * sw + i.min(sw - 1)];
    let mut out = vec![0.0; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        let (j, ty) = by[y];
        for (x, v) in row.iter_mut().enumerate() {
            let (i, tx) = bx[x];
            let top = at(i, j) * (1.0 - tx) + at(i + 1, j) * tx;
            let bottom = at(i, j + 1) * (1.0 - tx) + at(i + 1, j + 1) * tx;
            *v = top * (1.0 - ty) + bottom * ty;
        }
    });
    FloatMap::from_vec(w, h, out)
}
