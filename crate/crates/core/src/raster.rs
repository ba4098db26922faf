//! Raster containers and the pixel primitives shared by every stage:
//! min-max normalization, separable Gaussian blur, square dilation and
//! resampling.
//!
//! All rasters are row-major with `(x, y)` addressing, `x` running along a
//! row. Pixel `(x, y)` is treated as sitting at coordinate `(x, y)`.

use crate::error::{Error, Result};
use crate::par;

/// Row-major 2-D raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Real-valued raster (saliency, closure, density, prior maps).
pub type FloatMap = Grid<f64>;

/// Binary raster of line-drawing pixels.
pub type ContourMask = Grid<bool>;

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::argument(format!(
                "raster {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(
            width > 0 && height > 0,
            "raster dimensions must be positive"
        );
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Copy> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(
            width > 0 && height > 0,
            "raster dimensions must be positive"
        );
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }
}

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }
}

impl Grid<f64> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Position and value of the first maximum in raster order.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width, self.data[best])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Binarizes at `> 0`.
    pub fn to_mask(&self) -> ContourMask {
        self.map(|&v| v > 0.0)
    }
}

/// Luminance image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(FloatMap);

impl GrayImage {
    pub fn new(map: FloatMap) -> Result<Self> {
        check_unit_range(&map, "gray image")?;
        Ok(GrayImage(map))
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        Self::new(FloatMap::from_fn(width, height, f))
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn as_map(&self) -> &FloatMap {
        &self.0
    }

    pub fn into_map(self) -> FloatMap {
        self.0
    }

    /// Replicates the luminance into three identical planes.
    pub fn to_color(&self) -> ColorImage {
        ColorImage {
            r: self.0.clone(),
            g: self.0.clone(),
            b: self.0.clone(),
        }
    }
}

/// RGB image, each plane in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    r: FloatMap,
    g: FloatMap,
    b: FloatMap,
}

impl ColorImage {
    pub fn new(r: FloatMap, g: FloatMap, b: FloatMap) -> Result<Self> {
        if !r.same_dims(&g) || !r.same_dims(&b) {
            return Err(Error::argument("color planes differ in size"));
        }
        for (plane, name) in [(&r, "red"), (&g, "green"), (&b, "blue")] {
            check_unit_range(plane, name)?;
        }
        Ok(ColorImage { r, g, b })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let px: Grid<[f64; 3]> = Grid::from_fn(width, height, &mut f);
        Self::new(px.map(|p| p[0]), px.map(|p| p[1]), px.map(|p| p[2]))
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn red(&self) -> &FloatMap {
        &self.r
    }

    pub fn green(&self) -> &FloatMap {
        &self.g
    }

    pub fn blue(&self) -> &FloatMap {
        &self.b
    }

    pub fn planes(&self) -> [&FloatMap; 3] {
        [&self.r, &self.g, &self.b]
    }

    /// Mean of the three planes.
    pub fn luminance(&self) -> GrayImage {
        let data = self
            .r
            .as_slice()
            .iter()
            .zip(self.g.as_slice())
            .zip(self.b.as_slice())
            .map(|((r, g), b)| (r + g + b) / 3.0)
            .collect();
        GrayImage(FloatMap::from_vec(self.width(), self.height(), data).expect("same dims"))
    }
}

/// Either kind of decoded image.
#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Gray(GrayImage),
    Color(ColorImage),
}

impl Image {
    pub fn width(&self) -> usize {
        match self {
            Image::Gray(g) => g.width(),
            Image::Color(c) => c.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Image::Gray(g) => g.height(),
            Image::Color(c) => c.height(),
        }
    }

    pub fn to_color(&self) -> ColorImage {
        match self {
            Image::Gray(g) => g.to_color(),
            Image::Color(c) => c.clone(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        match self {
            Image::Gray(g) => g.clone(),
            Image::Color(c) => c.luminance(),
        }
    }
}

fn check_unit_range(map: &FloatMap, what: &str) -> Result<()> {
    match map.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(Error::argument(format!(
            "{what} value {} at ({}, {}) outside [0, 1]",
            map.as_slice()[i],
            i % map.width(),
            i / map.width()
        ))),
        None => Ok(()),
    }
}

/// Segmentation raster with labels forming the contiguous range `0..S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    grid: Grid<u32>,
    segments: usize,
}

impl LabelMap {
    pub fn new(grid: Grid<u32>) -> Result<Self> {
        let max = *grid.as_slice().iter().max().expect("non-empty raster") as usize;
        let mut seen = vec![false; max + 1];
        for &l in grid.as_slice() {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::argument(format!(
                "labels must be contiguous from 0; label {missing} is unused but {max} is present"
            )));
        }
        Ok(LabelMap {
            grid,
            segments: max + 1,
        })
    }

    /// Renumbers arbitrary label values to `0..S` in ascending value order.
    pub fn relabel(grid: Grid<u32>) -> Self {
        let mut values: Vec<u32> = grid.as_slice().to_vec();
        values.sort_unstable();
        values.dedup();
        let relabeled = grid.map(|l| values.binary_search(l).expect("present") as u32);
        LabelMap {
            grid: relabeled,
            segments: values.len(),
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl FnMut(usize, usize) -> u32,
    ) -> Result<Self> {
        Self::new(Grid::from_fn(width, height, f))
    }

    pub fn segment_count(&self) -> usize {
        self.segments
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.grid.get(x, y)
    }

    pub fn grid(&self) -> &Grid<u32> {
        &self.grid
    }

    pub fn check_segment(&self, segment: u32) -> Result<()> {
        if (segment as usize) < self.segments {
            Ok(())
        } else {
            Err(Error::argument(format!(
                "unknown segment {segment}; labels span 0..{}",
                self.segments
            )))
        }
    }

    /// Pixel count per segment.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.segments];
        for &l in self.grid.as_slice() {
            areas[l as usize] += 1;
        }
        areas
    }
}

/// Rescales to `[0, 1]` by `(v - min) / (max - min)`. A constant map becomes all zeros.
pub fn normalize01(map: &FloatMap) -> FloatMap {
    let (lo, hi) = map.min_max();
    let range = hi - lo;
    if !(range > 0.0) {
        return FloatMap::zeros(map.width(), map.height());
    }
    map.map(|&v| (v - lo) / range)
}

/// Symmetric (edge-repeating) reflection of `i` into `0..n`.
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Normalized 1-D Gaussian taps, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::argument(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Ok(taps)
}

/// Separable convolution with a symmetric odd-length kernel and reflect padding.
pub(crate) fn convolve_separable(map: &FloatMap, taps: &[f64]) -> FloatMap {
    let (w, h) = map.dims();
    let radius = (taps.len() / 2) as i64;
    let src = map.as_slice();

    let mut horizontal = vec![0.0; w * h];
    par::for_each_row(&mut horizontal, w, |y, out| {
        let row = &src[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * row[reflect(x as i64 + k as i64 - radius, w)];
            }
            *o = acc;
        }
    });

    let mut out = vec![0.0; w * h];
    par::for_each_row(&mut out, w, |y, out_row| {
        for (k, &t) in taps.iter().enumerate() {
            let sy = reflect(y as i64 + k as i64 - radius, h);
            let src_row = &horizontal[sy * w..(sy + 1) * w];
            for (o, &s) in out_row.iter_mut().zip(src_row) {
                *o += t * s;
            }
        }
    });
    FloatMap::from_vec(w, h, out).expect("same dims")
}

/// Gaussian blur with kernel radius `ceil(3 sigma)` and reflect padding.
pub fn gaussian_blur(map: &FloatMap, sigma: f64) -> Result<FloatMap> {
    let taps = gaussian_kernel(sigma)?;
    Ok(convolve_separable(map, &taps))
}

/// Sets every pixel within the `n x n` square window of a set pixel (clipped at borders).
pub fn dilate(mask: &ContourMask, n: usize) -> Result<ContourMask> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::argument(format!(
            "dilation size must be odd and positive, got {n}"
        )));
    }
    let r = n / 2;
    let (w, h) = mask.dims();
    let dilate_line = |line: &[bool], out: &mut [bool]| {
        // prefix counts give O(1) window occupancy
        let mut prefix = vec![0u32; line.len() + 1];
        for (i, &b) in line.iter().enumerate() {
            prefix[i + 1] = prefix[i] + b as u32;
        }
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(line.len());
            *o = prefix[hi] > prefix[lo];
        }
    };

    let src = mask.as_slice();
    let mut rows = vec![false; w * h];
    par::for_each_row(&mut rows, w, |y, out| {
        dilate_line(&src[y * w..(y + 1) * w], out)
    });

    let cols: Vec<Vec<bool>> = par::map_range(w, |x| {
        let column: Vec<bool> = (0..h).map(|y| rows[y * w + x]).collect();
        let mut out = vec![false; h];
        dilate_line(&column, &mut out);
        out
    });
    Ok(Grid::from_fn(w, h, |x, y| cols[x][y]))
}

/// Per-axis resampling weights: area coverage when shrinking, linear
/// interpolation between pixel centers when enlarging.
fn resample_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            if scale > 1.0 {
                let lo = i as f64 * scale;
                let hi = lo + scale;
                let mut taps = Vec::new();
                let mut j = lo.floor() as usize;
                while (j as f64) < hi && j < src {
                    let cover = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                    if cover > 0.0 {
                        taps.push((j, cover / scale));
                    }
                    j += 1;
                }
                taps
            } else {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let j0 = pos.floor() as usize;
                let j1 = (j0 + 1).min(src - 1);
                let t = pos - j0 as f64;
                if j1 == j0 || t == 0.0 {
                    vec![(j0, 1.0)]
                } else {
                    vec![(j0, 1.0 - t), (j1, t)]
                }
            }
        })
        .collect()
}

/// Resizes to `width x height`. Box-filters axes that shrink and linearly
/// interpolates axes that grow.
pub fn resize(map: &FloatMap, width: usize, height: usize) -> FloatMap {
    assert!(
        width > 0 && height > 0,
        "raster dimensions must be positive"
    );
    if map.dims() == (width, height) {
        return map.clone();
    }
    let (sw, sh) = map.dims();
    let wx = resample_weights(sw, width);
    let wy = resample_weights(sh, height);
    let src = map.as_slice();

    let mut horizontal = vec![0.0; width * sh];
    par::for_each_row(&mut horizontal, width, |y, out| {
        let row = &src[y * sw..(y + 1) * sw];
        for (o, taps) in out.iter_mut().zip(&wx) {
            *o = taps.iter().map(|&(j, t)| t * row[j]).sum();
        }
    });

    let mut out = vec![0.0; width * height];
    par::for_each_row(&mut out, width, |y, out_row| {
        for &(j, t) in &wy[y] {
            let src_row = &horizontal[j * width..(j + 1) * width];
            for (o, &s) in out_row.iter_mut().zip(src_row) {
                *o += t * s;
            }
        }
    });
    FloatMap::from_vec(width, height, out).expect("same dims")
}

/// Bilinear sample at fractional coordinates, clamped to the raster.
pub fn sample_bilinear(map: &FloatMap, x: f64, y: f64) -> f64 {
    let (w, h) = map.dims();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = x - x0 as f64;
    let ty = y - y0 as f64;
    let top = map.get(x0, y0) * (1.0 - tx) + map.get(x1, y0) * tx;
    let bottom = map.get(x0, y1) * (1.0 - tx) + map.get(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Elementwise binary operation on equally sized maps.
pub fn zip_with(a: &FloatMap, b: &FloatMap, f: impl Fn(f64, f64) -> f64) -> Result<FloatMap> {
    if !a.same_dims(b) {
        return Err(Error::argument(format!(
            "map sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| f(x, y))
        .collect();
    FloatMap::from_vec(a.width(), a.height(), data)
}
