//! Bottom-up saliency models and the prior-guided combination.
//!
//! [`itti_saliency`] is a center-surround feature pyramid model over intensity,
//! color opponency and orientation. [`signature_saliency`] reconstructs each
//! channel from the signs of its DCT. [`combine`] multiplies a bottom-up map
//! by a spatial prior.

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{
    convolve_separable, gaussian_blur, normalize01, reflect, resize, zip_with, ColorImage,
    FloatMap, Image,
};

#[derive(Debug, Clone, PartialEq)]
pub struct IttiParams {
    /// Requested pyramid depth, level 0 being the input. Reduced so the
    /// coarsest level is at least 8 pixels on each side.
    pub pyramid_levels: usize,
    pub center_levels: Vec<usize>,
    pub surround_deltas: Vec<usize>,
    pub orientation_count: usize,
    /// Pyramid level at which feature maps are accumulated.
    pub output_level: usize,
}

impl Default for IttiParams {
    fn default() -> Self {
        IttiParams {
            pyramid_levels: 9,
            center_levels: vec![2, 3, 4],
            surround_deltas: vec![3, 4],
            orientation_count: 4,
            output_level: 4,
        }
    }
}

impl IttiParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels == 0 {
            return Err(Error::argument("pyramid needs at least one level"));
        }
        if self.orientation_count == 0 {
            return Err(Error::argument("orientation count must be at least 1"));
        }
        if self.center_levels.is_empty() || self.surround_deltas.is_empty() {
            return Err(Error::argument(
                "center levels and surround deltas must be non-empty",
            ));
        }
        if self.surround_deltas.contains(&0) {
            return Err(Error::argument("surround deltas must be positive"));
        }
        Ok(())
    }
}

const MIN_LEVEL_SIZE: usize = 8;
const PYRAMID_TAPS: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Number of usable pyramid levels for an image of this size.
pub fn pyramid_depth(width: usize, height: usize, requested: usize) -> usize {
    let (mut w, mut h) = (width, height);
    let mut levels = 1;
    while levels < requested && w.div_ceil(2) >= MIN_LEVEL_SIZE && h.div_ceil(2) >= MIN_LEVEL_SIZE {
        w = w.div_ceil(2);
        h = h.div_ceil(2);
        levels += 1;
    }
    levels
}

fn downsample(map: &FloatMap) -> FloatMap {
    let blurred = convolve_separable(map, &PYRAMID_TAPS);
    let (w, h) = map.dims();
    FloatMap::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
        blurred.get(2 * x, 2 * y)
    })
}

fn gaussian_pyramid(base: &FloatMap, levels: usize) -> Vec<FloatMap> {
    let mut pyramid = vec![base.clone()];
    for _ in 1..levels {
        let next = downsample(pyramid.last().expect("non-empty"));
        pyramid.push(next);
    }
    pyramid
}

/// Max-based map normalization: scale to `[0, 1]`, then multiply by
/// `(1 - m)^2` where `m` is the mean of the positive local maxima other than
/// the global one. A map with one dominant peak keeps its scale and a map with
/// many comparable peaks is suppressed.
pub fn max_normalize(map: &FloatMap) -> FloatMap {
    let scaled = normalize01(map);
    let (w, h) = scaled.dims();
    let (gx, gy, top) = scaled.argmax();
    if !(top > 0.0) {
        return scaled;
    }
    let (mut total, mut count) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let v = scaled.get(x, y);
            if v <= 0.0 || (x, y) == (gx, gy) {
                continue;
            }
            let is_peak = (y.saturating_sub(1)..=(y + 1).min(h - 1)).all(|ny| {
                (x.saturating_sub(1)..=(x + 1).min(w - 1)).all(|nx| scaled.get(nx, ny) <= v)
            });
            if is_peak {
                total += v;
                count += 1;
            }
        }
    }
    let mean = if count > 0 { total / count as f64 } else { 0.0 };
    let factor = (1.0 - mean).powi(2);
    scaled.map(|&v| v * factor)
}

fn convolve2d(map: &FloatMap, kernel: &FloatMap) -> FloatMap {
    let (w, h) = map.dims();
    let (kw, kh) = kernel.dims();
    let (rx, ry) = ((kw / 2) as i64, (kh / 2) as i64);
    let mut out = FloatMap::zeros(w, h);
    par::for_each_row(out.as_mut_slice(), w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ky in 0..kh {
                let sy = reflect(y as i64 + ky as i64 - ry, h);
                for kx in 0..kw {
                    let sx = reflect(x as i64 + kx as i64 - rx, w);
                    acc += kernel.get(kx, ky) * map.get(sx, sy);
                }
            }
            *o = acc;
        }
    });
    out
}

const ORIENT_SIGMA: f64 = 1.0;
const ORIENT_OFFSET: f64 = 1.0;

/// Even and odd difference-of-offset-Gaussian kernels for a structure at
/// `angle` radians (0 = horizontal).
///
/// With `g(p)` an isotropic Gaussian of sigma 1 and `n` the unit normal to the
/// orientation, the odd kernel is `g(p - n) - g(p + n)` and the even kernel is
/// `g(p) - (g(p - 2n) + g(p + 2n)) / 2`. Both sum to zero, so flat regions give
/// no response.
pub fn orientation_kernels(angle: f64) -> (FloatMap, FloatMap) {
    let radius = (3.0 * ORIENT_SIGMA + 2.0 * ORIENT_OFFSET).ceil() as usize;
    let size = 2 * radius + 1;
    let (nx, ny) = (-angle.sin(), angle.cos());
    let g = |x: f64, y: f64| (-(x * x + y * y) / (2.0 * ORIENT_SIGMA * ORIENT_SIGMA)).exp();
    let at = |i: usize| i as f64 - radius as f64;
    let shifted = |x: usize, y: usize, s: f64| g(at(x) - s * nx, at(y) - s * ny);
    let d = ORIENT_OFFSET;
    let mut even = FloatMap::from_fn(size, size, |x, y| {
        shifted(x, y, 0.0) - 0.5 * (shifted(x, y, 2.0 * d) + shifted(x, y, -2.0 * d))
    });
    let mut odd = FloatMap::from_fn(size, size, |x, y| shifted(x, y, d) - shifted(x, y, -d));
    for k in [&mut even, &mut odd] {
        // remove truncation residue so the kernel is exactly zero-mean
        let mean = k.sum() / k.len() as f64;
        let scale: f64 = k.as_slice().iter().map(|v| (v - mean).abs()).sum();
        for v in k.as_mut_slice() {
            *v = (*v - mean) / scale;
        }
    }
    (even, odd)
}

fn orientation_energy(map: &FloatMap, kernels: &(FloatMap, FloatMap)) -> FloatMap {
    let even = convolve2d(map, &kernels.0);
    let odd = convolve2d(map, &kernels.1);
    zip_with(&even, &odd, |e, o| e.hypot(o)).expect("same dims")
}

/// Differences below this are filter roundoff on flat input, not contrast.
const CONTRAST_FLOOR: f64 = 1e-10;

/// Sum over center/surround pairs of normalized `|C - upsample(S)|`, at the
/// output level's size.
fn feature_conspicuity(
    pyramid: &[Option<FloatMap>],
    pairs: &[(usize, usize)],
    out_dims: (usize, usize),
) -> FloatMap {
    let mut acc = FloatMap::zeros(out_dims.0, out_dims.1);
    for &(c, s) in pairs {
        let center = pyramid[c].as_ref().expect("level computed");
        let surround = pyramid[s].as_ref().expect("level computed");
        let up = resize(surround, center.width(), center.height());
        let diff = zip_with(center, &up, |a, b| {
            let d = (a - b).abs();
            if d < CONTRAST_FLOOR {
                0.0
            } else {
                d
            }
        })
        .expect("same dims");
        let feature = resize(&max_normalize(&diff), out_dims.0, out_dims.1);
        for (a, f) in acc.as_mut_slice().iter_mut().zip(feature.as_slice()) {
            *a += f;
        }
    }
    acc
}

fn opponency(image: &ColorImage, intensity: &FloatMap) -> (FloatMap, FloatMap) {
    let threshold = 0.1 * intensity.min_max().1;
    let (r, g, b) = (image.red(), image.green(), image.blue());
    let (w, h) = intensity.dims();
    let rg = FloatMap::from_fn(w, h, |x, y| {
        let i = intensity.get(x, y);
        if i > threshold {
            (r.get(x, y) - g.get(x, y)) / i
        } else {
            0.0
        }
    });
    let by = FloatMap::from_fn(w, h, |x, y| {
        let i = intensity.get(x, y);
        if i > threshold {
            (b.get(x, y) - 0.5 * (r.get(x, y) + g.get(x, y))) / i
        } else {
            0.0
        }
    });
    (rg, by)
}

fn sparse_pyramid(base: &FloatMap, levels: usize, from: usize) -> Vec<Option<FloatMap>> {
    gaussian_pyramid(base, levels)
        .into_iter()
        .enumerate()
        .map(|(i, m)| (i >= from).then_some(m))
        .collect()
}

/// Feature-pyramid saliency from intensity, color opponency and orientation
/// contrast. Output has the input's size and lies in `[0, 1]`.
pub fn itti_saliency(image: &ColorImage, params: &IttiParams) -> Result<FloatMap> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    if w < MIN_LEVEL_SIZE || h < MIN_LEVEL_SIZE {
        return Err(Error::argument(format!(
            "image {w}x{h} is too small for a saliency pyramid (minimum {MIN_LEVEL_SIZE}x{MIN_LEVEL_SIZE})"
        )));
    }
    let levels = pyramid_depth(w, h, params.pyramid_levels);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &c in &params.center_levels {
        for &d in &params.surround_deltas {
            if c + d < levels {
                pairs.push((c, c + d));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::argument(format!(
            "image {w}x{h} supports {levels} pyramid levels, too few for any center/surround pair"
        )));
    }
    let lowest = pairs.iter().map(|p| p.0).min().expect("non-empty");
    let out_level = params.output_level.min(levels - 1);

    let intensity = FloatMap::from_fn(w, h, |x, y| {
        (image.red().get(x, y) + image.green().get(x, y) + image.blue().get(x, y)) / 3.0
    });
    let (rg, by) = opponency(image, &intensity);
    let intensity_pyr = gaussian_pyramid(&intensity, levels);
    let out_dims = intensity_pyr[out_level].dims();

    let angles: Vec<f64> = (0..params.orientation_count)
        .map(|k| k as f64 * std::f64::consts::PI / params.orientation_count as f64)
        .collect();
    let jobs: Vec<usize> = (0..3 + angles.len()).collect();
    let maps: Vec<FloatMap> = par::map_slice(&jobs, |&job| match job {
        0 => {
            let pyr: Vec<Option<FloatMap>> = intensity_pyr.iter().cloned().map(Some).collect();
            feature_conspicuity(&pyr, &pairs, out_dims)
        }
        1 => feature_conspicuity(&sparse_pyramid(&rg, levels, lowest), &pairs, out_dims),
        2 => feature_conspicuity(&sparse_pyramid(&by, levels, lowest), &pairs, out_dims),
        _ => {
            let kernels = orientation_kernels(angles[job - 3]);
            let pyr: Vec<Option<FloatMap>> = intensity_pyr
                .iter()
                .enumerate()
                .map(|(i, m)| (i >= lowest).then(|| orientation_energy(m, &kernels)))
                .collect();
            max_normalize(&feature_conspicuity(&pyr, &pairs, out_dims))
        }
    });

    let intensity_c = max_normalize(&maps[0]);
    let color_sum = zip_with(&maps[1], &maps[2], |a, b| a + b).expect("same dims");
    let color_c = max_normalize(&color_sum);
    let mut orient_sum = FloatMap::zeros(out_dims.0, out_dims.1);
    for m in &maps[3..] {
        for (a, v) in orient_sum.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *a += v;
        }
    }
    let orient_c = max_normalize(&orient_sum);
    let mean = FloatMap::from_fn(out_dims.0, out_dims.1, |x, y| {
        (intensity_c.get(x, y) + color_c.get(x, y) + orient_c.get(x, y)) / 3.0
    });
    Ok(normalize01(&resize(&mean, w, h)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigParams {
    pub working_width: usize,
    pub working_height: usize,
    /// Blur applied at working size.
    pub blur_sigma: f64,
}

impl Default for SigParams {
    fn default() -> Self {
        SigParams {
            working_width: 64,
            working_height: 48,
            blur_sigma: 2.5,
        }
    }
}

impl SigParams {
    pub fn validate(&self) -> Result<()> {
        if self.working_width < 16 || self.working_height < 16 {
            return Err(Error::argument(format!(
                "working size must be at least 16x16, got {}x{}",
                self.working_width, self.working_height
            )));
        }
        if !(self.blur_sigma > 0.0) {
            return Err(Error::argument("signature blur sigma must be positive"));
        }
        Ok(())
    }
}

/// Orthonormal DCT-II matrix: row `k` holds basis function `k`.
fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            m[k * n + i] = scale
                * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
        }
    }
    m
}

/// `A (rows x inner) * B (inner x cols)`; `transpose_a`/`transpose_b` read the
/// operand transposed.
fn matmul(
    a: &[f64],
    b: &[f64],
    rows: usize,
    inner: usize,
    cols: usize,
    transpose_a: bool,
    transpose_b: bool,
) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for k in 0..inner {
            let av = if transpose_a {
                a[k * rows + r]
            } else {
                a[r * inner + k]
            };
            for c in 0..cols {
                let bv = if transpose_b {
                    b[c * inner + k]
                } else {
                    b[k * cols + c]
                };
                out[r * cols + c] += av * bv;
            }
        }
    }
    out
}

/// Squared reconstruction of one channel from the signs of its DCT.
fn signature_channel(channel: &FloatMap, rows_dct: &[f64], cols_dct: &[f64]) -> FloatMap {
    let (w, h) = channel.dims();
    let x = channel.as_slice();
    // X = C_h x C_w^T
    let tmp = matmul(rows_dct, x, h, h, w, false, false);
    let mut coeffs = matmul(&tmp, cols_dct, h, w, w, false, true);
    // coefficients this far below the largest one (DC included) are roundoff
    let tiny = 1e-12 * coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // DC carries only the mean, which the signature ignores
    coeffs[0] = 0.0;
    for v in coeffs.iter_mut() {
        *v = if v.abs() <= tiny { 0.0 } else { v.signum() };
    }
    // x' = C_h^T X C_w
    let tmp = matmul(rows_dct, &coeffs, h, h, w, true, false);
    let recon = matmul(&tmp, cols_dct, h, w, w, false, false);
    FloatMap::from_vec(w, h, recon.into_iter().map(|v| v * v).collect()).expect("same dims")
}

/// Saliency from the sign of each channel's DCT ("image signature"), computed
/// at the working size and resized back to the input.
pub fn signature_saliency(image: &Image, params: &SigParams) -> Result<FloatMap> {
    params.validate()?;
    let (ww, wh) = (params.working_width, params.working_height);
    let channels: Vec<FloatMap> = match image {
        Image::Gray(g) => vec![resize(g.as_map(), ww, wh)],
        Image::Color(c) => c.planes().iter().map(|p| resize(p, ww, wh)).collect(),
    };
    let rows_dct = dct_matrix(wh);
    let cols_dct = dct_matrix(ww);
    let parts = par::map_slice(&channels, |c| signature_channel(c, &rows_dct, &cols_dct));
    let mut total = FloatMap::zeros(ww, wh);
    for p in &parts {
        for (t, v) in total.as_mut_slice().iter_mut().zip(p.as_slice()) {
            *t += v;
        }
    }
    let blurred = gaussian_blur(&total, params.blur_sigma)?;
    Ok(normalize01(&resize(
        &blurred,
        image.width(),
        image.height(),
    )))
}

/// Pointwise product of a bottom-up map and a spatial prior, rescaled to `[0, 1]`.
pub fn combine(bottom_up: &FloatMap, prior: &FloatMap) -> Result<FloatMap> {
    for (name, map) in [("saliency", bottom_up), ("prior", prior)] {
        if map
            .as_slice()
            .iter()
            .any(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(Error::argument(format!(
                "{name} map must be finite and non-negative"
            )));
        }
    }
    Ok(normalize01(&zip_with(bottom_up, prior, |a, b| a * b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GrayImage;

    fn disk_scene(
        w: usize,
        h: usize,
        disks: &[(f64, f64, f64, [f64; 3])],
        background: [f64; 3],
    ) -> ColorImage {
        ColorImage::from_fn(w, h, |x, y| {
            for &(cx, cy, r, color) in disks {
                if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                    return color;
                }
            }
            background
        })
        .unwrap()
    }

    fn inside(map: &FloatMap, cx: f64, cy: f64, r: f64) -> bool {
        let (x, y, _) = map.argmax();
        (x as f64 - cx).hypot(y as f64 - cy) <= r
    }

    #[test]
    fn pyramid_depth_respects_minimum_size() {
        assert_eq!(pyramid_depth(256, 256, 9), 6);
        assert_eq!(pyramid_depth(640, 480, 9), 7);
        assert_eq!(pyramid_depth(4096, 4096, 9), 9);
        assert_eq!(pyramid_depth(8, 8, 9), 1);
    }

    #[test]
    fn uniform_image_has_no_saliency() {
        let img = disk_scene(256, 256, &[], [0.5, 0.5, 0.5]);
        let s = itti_saliency(&img, &IttiParams::default()).unwrap();
        assert!(s.as_slice().iter().all(|&v| v == 0.0));
        let s = signature_saliency(&Image::Color(img), &SigParams::default()).unwrap();
        assert!(s.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn red_disk_attracts_itti_peak() {
        let img = disk_scene(
            256,
            256,
            &[(160.0, 70.0, 14.0, [1.0, 0.0, 0.0])],
            [0.5, 0.5, 0.5],
        );
        let s = itti_saliency(&img, &IttiParams::default()).unwrap();
        assert!(inside(&s, 160.0, 70.0, 14.0), "{:?}", s.argmax());
        assert!(s.all_finite());
        assert_eq!(s.min_max().1, 1.0);
    }

    #[test]
    fn red_disk_peak_stable_under_one_pixel_shift() {
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let (cx, cy) = (160.0 + dx, 70.0 + dy);
            let img = disk_scene(
                256,
                256,
                &[(cx, cy, 14.0, [1.0, 0.0, 0.0])],
                [0.5, 0.5, 0.5],
            );
            let s = itti_saliency(&img, &IttiParams::default()).unwrap();
            assert!(inside(&s, cx, cy, 14.0));
        }
    }

    #[test]
    fn stronger_contrast_disk_wins() {
        let bg = [0.3, 0.3, 0.3];
        let img = disk_scene(
            256,
            256,
            &[
                (64.0, 128.0, 12.0, [0.5, 0.5, 0.5]),
                (192.0, 128.0, 12.0, [0.7, 0.7, 0.7]),
            ],
            bg,
        );
        let s = itti_saliency(&img, &IttiParams::default()).unwrap();
        assert!(
            s.get(192, 128) > s.get(64, 128),
            "{} vs {}",
            s.get(192, 128),
            s.get(64, 128)
        );
    }

    #[test]
    fn tiny_images_are_rejected() {
        let img = disk_scene(6, 20, &[], [0.1, 0.2, 0.3]);
        assert!(itti_saliency(&img, &IttiParams::default()).is_err());
        // deep enough for several levels but not for any pair
        let img = disk_scene(128, 96, &[], [0.1, 0.2, 0.3]);
        let err = itti_saliency(&img, &IttiParams::default()).unwrap_err();
        assert!(err.to_string().contains("center/surround"));
    }

    #[test]
    fn max_normalize_prefers_single_peak() {
        let one = FloatMap::from_fn(20, 20, |x, y| if (x, y) == (5, 5) { 1.0 } else { 0.0 });
        assert_eq!(max_normalize(&one), one);
        let two = FloatMap::from_fn(20, 20, |x, y| match (x, y) {
            (5, 5) => 1.0,
            (15, 15) => 0.5,
            _ => 0.0,
        });
        let n = max_normalize(&two);
        assert!((n.get(5, 5) - 0.25).abs() < 1e-12);
        assert!(max_normalize(&FloatMap::filled(4, 4, 3.0))
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn orientation_kernels_are_zero_mean_and_rotate() {
        let (e0, o0) = orientation_kernels(0.0);
        let (e90, _) = orientation_kernels(std::f64::consts::FRAC_PI_2);
        assert!(e0.sum().abs() < 1e-12 && o0.sum().abs() < 1e-12);
        let n = e0.width();
        for y in 0..n {
            for x in 0..n {
                assert!((e0.get(x, y) - e90.get(y, x)).abs() < 1e-12);
            }
        }
        // horizontal bar responds more to the 0 rad filter than the vertical one
        let bar = FloatMap::from_fn(21, 21, |_, y| if y == 10 { 1.0 } else { 0.0 });
        let k0 = orientation_kernels(0.0);
        let k90 = orientation_kernels(std::f64::consts::FRAC_PI_2);
        assert!(
            orientation_energy(&bar, &k0).get(10, 10) > orientation_energy(&bar, &k90).get(10, 10)
        );
    }

    #[test]
    fn dct_matrix_is_orthonormal() {
        let n = 12;
        let m = dct_matrix(n);
        let prod = matmul(&m, &m, n, n, n, false, true);
        for r in 0..n {
            for c in 0..n {
                let expected = if r == c { 1.0 } else { 0.0 };
                assert!((prod[r * n + c] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dct_matches_direct_sum() {
        let (w, h) = (5, 4);
        let x: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64 / 7.0).collect();
        let coeffs = matmul(
            &matmul(&dct_matrix(h), &x, h, h, w, false, false),
            &dct_matrix(w),
            h,
            w,
            w,
            false,
            true,
        );
        let alpha = |k: usize, n: usize| {
            if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            }
        };
        for v in 0..h {
            for u in 0..w {
                let mut s = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        s += x[y * w + xx]
                            * (std::f64::consts::PI * (2 * xx + 1) as f64 * u as f64
                                / (2 * w) as f64)
                                .cos()
                            * (std::f64::consts::PI * (2 * y + 1) as f64 * v as f64
                                / (2 * h) as f64)
                                .cos();
                    }
                }
                assert!((coeffs[v * w + u] - alpha(u, w) * alpha(v, h) * s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn signature_finds_small_square() {
        let img = GrayImage::from_fn(128, 96, |x, y| {
            if (80..88).contains(&x) && (30..38).contains(&y) {
                0.9
            } else {
                0.2
            }
        })
        .unwrap();
        let s = signature_saliency(&Image::Gray(img), &SigParams::default()).unwrap();
        let (x, y, _) = s.argmax();
        assert!((80..88).contains(&x) && (30..38).contains(&y), "{x},{y}");
    }

    #[test]
    fn signature_ignores_affine_intensity_change() {
        let base = GrayImage::from_fn(100, 80, |x, y| {
            let v = ((x * 13 + y * 7) % 17) as f64 / 17.0;
            if (40..55).contains(&x) && (20..30).contains(&y) {
                0.9
            } else {
                0.4 * v
            }
        })
        .unwrap();
        let shifted = GrayImage::new(base.as_map().map(|&v| 0.5 * v + 0.3)).unwrap();
        let p = SigParams::default();
        let a = signature_saliency(&Image::Gray(base), &p).unwrap();
        let b = signature_saliency(&Image::Gray(shifted), &p).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn signature_rejects_small_working_size() {
        let p = SigParams {
            working_width: 8,
            ..Default::default()
        };
        let img = Image::Gray(GrayImage::from_fn(20, 20, |_, _| 0.5).unwrap());
        assert!(signature_saliency(&img, &p).is_err());
    }

    #[test]
    fn combine_examples() {
        let a = FloatMap::from_fn(6, 4, |x, y| (x * y) as f64 + 0.5);
        let ones = FloatMap::filled(6, 4, 1.0);
        assert_eq!(combine(&a, &ones).unwrap(), normalize01(&a));
        let half = FloatMap::from_fn(6, 4, |x, _| if x < 3 { 0.0 } else { 0.7 });
        let c = combine(&a, &half).unwrap();
        assert!((0..4).all(|y| (0..3).all(|x| c.get(x, y) == 0.0)));
        assert_eq!(combine(&a, &half).unwrap(), combine(&half, &a).unwrap());
        assert!(combine(&a, &FloatMap::zeros(3, 3)).is_err());
        assert!(combine(&a.map(|v| -v), &ones).is_err());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let img = disk_scene(
            256,
            256,
            &[(60.0, 50.0, 10.0, [0.9, 0.2, 0.1])],
            [0.4, 0.5, 0.4],
        );
        let p = IttiParams::default();
        let a = itti_saliency(&img, &p).unwrap();
        let b = par::sequential(|| itti_saliency(&img, &p).unwrap());
        assert_eq!(a, b);
    }
}
