//! Fixation statistics: density maps, map agreement, per-segment saliency,
//! closure scores, contour guidance metrics and region shape features.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fixation::FixationSet;
use crate::raster::{dilate, gaussian_blur, normalize01, ContourMask, FloatMap, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    /// Blur sigma in pixels.
    pub sigma: f64,
    /// Ignore each subject's earliest fixation.
    pub drop_first_fixation: bool,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            sigma: 10.0,
            drop_first_fixation: true,
        }
    }
}

impl DensityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::argument(format!(
                "density sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub map: FloatMap,
    /// No fixation survived the first-fixation rule; `map` is all zeros.
    pub empty: bool,
}

/// Unit impulse per retained fixation at its floor-binned pixel, blurred.
pub fn density_map(
    fixations: &FixationSet,
    width: usize,
    height: usize,
    params: &DensityParams,
) -> Result<DensityMap> {
    params.validate()?;
    fixations.validate(width, height)?;
    let mut impulses = FloatMap::zeros(width, height);
    let pixels = fixations.retained_pixels(params.drop_first_fixation);
    if pixels.is_empty() {
        log::warn!(
            "{}: no retained fixations, density is empty",
            fixations.image_id()
        );
        return Ok(DensityMap {
            map: impulses,
            empty: true,
        });
    }
    for (x, y) in pixels {
        impulses.set(x, y, impulses.get(x, y) + 1.0);
    }
    Ok(DensityMap {
        map: gaussian_blur(&impulses, params.sigma)?,
        empty: false,
    })
}

fn same_dims(f: &FloatMap, g: &FloatMap) -> Result<()> {
    if !f.same_dims(g) {
        return Err(Error::argument(format!(
            "map sizes differ: {}x{} vs {}x{}",
            f.width(),
            f.height(),
            g.width(),
            g.height()
        )));
    }
    Ok(())
}

/// Pearson correlation of two paired samples. `None` if either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0 && sbb > 0.0) {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation over all pixels.
pub fn cc(f: &FloatMap, g: &FloatMap) -> Result<f64> {
    same_dims(f, g)?;
    pearson(f.as_slice(), g.as_slice())
        .ok_or_else(|| Error::undefined("correlation of a constant map"))
}

/// Mean absolute difference. A map with values outside `[0, 1]` is first
/// min-max normalized; maps already in range are compared as given.
pub fn mae(f: &FloatMap, g: &FloatMap) -> Result<f64> {
    same_dims(f, g)?;
    let prepare = |m: &FloatMap| {
        let (lo, hi) = m.min_max();
        if lo < 0.0 || hi > 1.0 {
            normalize01(m)
        } else {
            m.clone()
        }
    };
    let (f, g) = (prepare(f), prepare(g));
    let total: f64 = f
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / f.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSaliency {
    pub segment_id: u32,
    pub fixation_count: usize,
    pub area: usize,
    /// Fixations per pixel.
    pub density: f64,
    /// Density divided by the image's largest segment density.
    pub saliency_score: f64,
}

/// Fixation density of every segment, scored relative to the densest one.
pub fn segment_saliency(
    labels: &LabelMap,
    fixations: &FixationSet,
    params: &DensityParams,
) -> Result<Vec<SegmentSaliency>> {
    fixations.validate(labels.width(), labels.height())?;
    let areas = labels.areas();
    let mut counts = vec![0usize; areas.len()];
    for (x, y) in fixations.retained_pixels(params.drop_first_fixation) {
        counts[labels.get(x, y) as usize] += 1;
    }
    let densities: Vec<f64> = counts
        .iter()
        .zip(&areas)
        .map(|(&c, &a)| c as f64 / a as f64)
        .collect();
    let top = densities.iter().copied().fold(0.0, f64::max);
    Ok((0..areas.len())
        .map(|i| SegmentSaliency {
            segment_id: i as u32,
            fixation_count: counts[i],
            area: areas[i],
            density: densities[i],
            saliency_score: if top > 0.0 { densities[i] / top } else { 0.0 },
        })
        .collect())
}

/// Paints each segment with its saliency score.
pub fn segment_saliency_map(labels: &LabelMap, segments: &[SegmentSaliency]) -> Result<FloatMap> {
    if segments.len() != labels.segment_count() {
        return Err(Error::argument(format!(
            "{} scores for {} segments",
            segments.len(),
            labels.segment_count()
        )));
    }
    Ok(labels.grid().map(|&l| segments[l as usize].saliency_score))
}

/// Equal-weight sum of two salient-object maps, rescaled to `[0, 1]`.
pub fn hierarchical_objects(map_a: &FloatMap, map_b: &FloatMap) -> Result<FloatMap> {
    same_dims(map_a, map_b)?;
    let sum = map_a
        .as_slice()
        .iter()
        .zip(map_b.as_slice())
        .map(|(a, b)| a + b)
        .collect();
    Ok(normalize01(&FloatMap::from_vec(
        map_a.width(),
        map_a.height(),
        sum,
    )?))
}

const NEIGHBORS_4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

fn is_boundary(labels: &LabelMap, x: usize, y: usize) -> bool {
    let l = labels.get(x, y);
    NEIGHBORS_4.iter().any(|&(dx, dy)| {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        !labels.grid().contains(nx, ny) || labels.get(nx as usize, ny as usize) != l
    })
}

fn on_image_border(labels: &LabelMap, x: usize, y: usize) -> bool {
    x == 0 || y == 0 || x + 1 == labels.width() || y + 1 == labels.height()
}

/// `(on_border, boundary)` pixel counts of a segment. Boundary pixels are
/// 4-adjacent to another segment or to the outside of the image.
pub fn boundary_counts(labels: &LabelMap, segment: u32) -> Result<(usize, usize)> {
    labels.check_segment(segment)?;
    let (mut border, mut boundary) = (0, 0);
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            if labels.get(x, y) == segment && is_boundary(labels, x, y) {
                boundary += 1;
                if on_image_border(labels, x, y) {
                    border += 1;
                }
            }
        }
    }
    Ok((border, boundary))
}

/// Share of a segment's boundary that lies away from the image border.
pub fn closure_score(labels: &LabelMap, segment: u32) -> Result<f64> {
    let (border, boundary) = boundary_counts(labels, segment)?;
    Ok(1.0 - border as f64 / boundary as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedRegionSet {
    pub members: Vec<u32>,
    /// Union of the member segments' pixels.
    pub pixels: ContourMask,
}

/// Segments whose closure score exceeds `threshold`. Segments that do not
/// touch the border at all (score exactly 1) always qualify.
pub fn closed_regions(labels: &LabelMap, threshold: f64) -> ClosedRegionSet {
    let n = labels.segment_count();
    let mut border = vec![0usize; n];
    let mut boundary = vec![0usize; n];
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            if is_boundary(labels, x, y) {
                let l = labels.get(x, y) as usize;
                boundary[l] += 1;
                if on_image_border(labels, x, y) {
                    border[l] += 1;
                }
            }
        }
    }
    let members: Vec<u32> = (0..n)
        .filter(|&i| border[i] == 0 || 1.0 - border[i] as f64 / boundary[i] as f64 > threshold)
        .map(|i| i as u32)
        .collect();
    let mut keep = vec![false; n];
    for &m in &members {
        keep[m as usize] = true;
    }
    ClosedRegionSet {
        pixels: labels.grid().map(|&l| keep[l as usize]),
        members,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceMetrics {
    /// Fixations near a contour, over all fixations.
    pub pof: f64,
    /// Contour pixels near a fixation, over all contour pixels. `None` when
    /// there are no contour pixels.
    pub poc: Option<f64>,
    /// Fixations inside or near closed regions, over all fixations.
    pub pofc: f64,
    /// Share of the image inside or near closed regions.
    pub pocc: f64,
}

/// Co-location of retained fixations with contours and closed regions under
/// an `n x n` dilation. Fixations count with multiplicity; pixels count once.
pub fn guidance_metrics(
    fixations: &FixationSet,
    contours: &ContourMask,
    closed: &ClosedRegionSet,
    n: usize,
) -> Result<GuidanceMetrics> {
    if !contours.same_dims(&closed.pixels) {
        return Err(Error::argument("contour and region rasters differ in size"));
    }
    let (w, h) = contours.dims();
    fixations.validate(w, h)?;
    let fix = fixations.retained_pixels(true);
    if fix.is_empty() {
        return Err(Error::undefined(format!(
            "{}: no retained fixations for guidance ratios",
            fixations.image_id()
        )));
    }
    let near_contour = dilate(contours, n)?;
    let near_closed = dilate(&closed.pixels, n)?;
    let share = |mask: &ContourMask| {
        fix.iter().filter(|&&(x, y)| mask.get(x, y)).count() as f64 / fix.len() as f64
    };

    let mut fixated = ContourMask::filled(w, h, false);
    for &(x, y) in &fix {
        fixated.set(x, y, true);
    }
    let near_fix = dilate(&fixated, n)?;
    let contour_pixels = contours.count();
    let poc = (contour_pixels > 0).then(|| {
        let hit = contours
            .as_slice()
            .iter()
            .zip(near_fix.as_slice())
            .filter(|(&c, &f)| c && f)
            .count();
        hit as f64 / contour_pixels as f64
    });
    Ok(GuidanceMetrics {
        pof: share(&near_contour),
        poc,
        pofc: share(&near_closed),
        pocc: near_closed.count() as f64 / (w * h) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFeatureVector {
    pub area_ratio: f64,
    pub centralization: f64,
    pub perimeter_ratio: f64,
    pub axis_ratio: f64,
    pub eccentricity: f64,
    /// Major-axis angle in `(-pi/2, pi/2]`, counterclockwise as displayed.
    pub orientation: f64,
    pub equiv_diameter: f64,
    pub solidity: f64,
    pub extent: f64,
    pub closure_score: f64,
}

impl ShapeFeatureVector {
    pub const NAMES: [&'static str; 10] = [
        "area_ratio",
        "centralization",
        "perimeter_ratio",
        "axis_ratio",
        "eccentricity",
        "orientation",
        "equiv_diameter",
        "solidity",
        "extent",
        "closure_score",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.area_ratio,
            self.centralization,
            self.perimeter_ratio,
            self.axis_ratio,
            self.eccentricity,
            self.orientation,
            self.equiv_diameter,
            self.solidity,
            self.extent,
            self.closure_score,
        ]
    }
}

/// Area of the convex hull of `points` (monotone chain, shoelace).
fn convex_hull_area(mut points: Vec<(i64, i64)>) -> f64 {
    points.sort_unstable();
    points.dedup();
    if points.len() < 3 {
        return 0.0;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * points.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> = if pass == 0 {
            Box::new(points.iter())
        } else {
            Box::new(points.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let twice: i64 = (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() as f64 / 2.0
}

/// Shape descriptors of one segment. Pixels are treated as unit squares, so
/// second moments include the `1/12` per-pixel term and the hull is taken
/// over pixel corners.
pub fn shape_features(labels: &LabelMap, segment: u32) -> Result<ShapeFeatureVector> {
    let (border, boundary) = boundary_counts(labels, segment)?;
    let (w, h) = (labels.width(), labels.height());
    let mut pixels = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if labels.get(x, y) == segment {
                pixels.push((x, y));
            }
        }
    }
    let area = pixels.len() as f64;

    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let half_diagonal = cx.hypot(cy);
    let centralization = if half_diagonal > 0.0 {
        pixels
            .iter()
            .map(|&(x, y)| (x as f64 - cx).hypot(y as f64 - cy))
            .sum::<f64>()
            / area
            / half_diagonal
    } else {
        0.0
    };

    // crack-edge perimeter: pixel sides facing another segment or the outside
    let mut edges = 0usize;
    let mut corners = Vec::new();
    for &(x, y) in &pixels {
        let mut on_boundary = false;
        for &(dx, dy) in &NEIGHBORS_4 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if !labels.grid().contains(nx, ny) || labels.get(nx as usize, ny as usize) != segment {
                edges += 1;
                on_boundary = true;
            }
        }
        if on_boundary {
            let (x, y) = (x as i64, y as i64);
            corners.extend([(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]);
        }
    }

    let mx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / area;
    let my = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / area;
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for &(x, y) in &pixels {
        let (dx, dy) = (x as f64 - mx, y as f64 - my);
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
    }
    let (m20, m02, m11) = (m20 / area + 1.0 / 12.0, m02 / area + 1.0 / 12.0, m11 / area);
    let mid = 0.5 * (m20 + m02);
    let half_gap = (0.5 * (m20 - m02)).hypot(m11);
    let (major, minor) = (mid + half_gap, (mid - half_gap).max(0.0));
    let ratio = minor / major;
    // image y points down, so the displayed counterclockwise angle negates m11
    let mut orientation = 0.5 * (-2.0 * m11).atan2(m20 - m02);
    if orientation <= -std::f64::consts::FRAC_PI_2 {
        orientation += std::f64::consts::PI;
    }

    let (x0, x1) = pixels
        .iter()
        .fold((usize::MAX, 0), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pixels
        .iter()
        .fold((usize::MAX, 0), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let bbox = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
    let hull = convex_hull_area(corners);

    Ok(ShapeFeatureVector {
        area_ratio: area / (w * h) as f64,
        centralization,
        perimeter_ratio: edges as f64 / (2 * (w + h)) as f64,
        axis_ratio: ratio.sqrt(),
        eccentricity: (1.0 - ratio).max(0.0).sqrt(),
        orientation,
        equiv_diameter: (4.0 * area / std::f64::consts::PI).sqrt() / (w as f64).hypot(h as f64),
        solidity: (area / hull).min(1.0),
        extent: area / bbox,
        closure_score: 1.0 - border as f64 / boundary as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCorrelation {
    pub feature: &'static str,
    /// Pearson r against log saliency; 0 when `degenerate`.
    pub r: f64,
    /// Feature or saliency was constant across segments.
    pub degenerate: bool,
}

/// Floor added to segment scores before taking logs.
pub const LOG_SALIENCY_EPSILON: f64 = 1e-6;

/// Correlation of each shape feature with `ln(score + 1e-6)` across segments.
pub fn feature_correlation(
    features: &[ShapeFeatureVector],
    scores: &[f64],
) -> Result<Vec<FeatureCorrelation>> {
    if features.len() != scores.len() {
        return Err(Error::argument(format!(
            "{} feature vectors but {} scores",
            features.len(),
            scores.len()
        )));
    }
    if features.len() < 3 {
        return Err(Error::argument(format!(
            "feature correlation needs at least 3 segments, got {}",
            features.len()
        )));
    }
    let log_scores: Vec<f64> = scores
        .iter()
        .map(|s| (s + LOG_SALIENCY_EPSILON).ln())
        .collect();
    Ok(ShapeFeatureVector::NAMES
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let column: Vec<f64> = features.iter().map(|f| f.values()[i]).collect();
            match pearson(&column, &log_scores) {
                Some(r) => FeatureCorrelation {
                    feature: name,
                    r,
                    degenerate: false,
                },
                None => FeatureCorrelation {
                    feature: name,
                    r: 0.0,
                    degenerate: true,
                },
            }
        })
        .collect())
}

/// One row of the per-segment table.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub image_id: String,
    pub features: ShapeFeatureVector,
    pub saliency: SegmentSaliency,
}

pub fn write_segments_csv(rows: &[SegmentRecord], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["image_id", "segment_id"];
    header.extend(ShapeFeatureVector::NAMES);
    header.extend(["fixation_count", "area", "density", "score"]);
    writer.write_record(&header).map_err(csv_error)?;
    for row in rows {
        let mut record = vec![row.image_id.clone(), row.saliency.segment_id.to_string()];
        record.extend(row.features.values().iter().map(|v| v.to_string()));
        record.extend([
            row.saliency.fixation_count.to_string(),
            row.saliency.area.to_string(),
            row.saliency.density.to_string(),
            row.saliency.saliency_score.to_string(),
        ]);
        writer.write_record(&record).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Guidance metrics of one image at one dilation size.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub image_id: String,
    pub n: usize,
    pub metrics: GuidanceMetrics,
}

/// Writes `image_id,n,pof,poc,pofc,pocc`; an undefined PoC is left empty.
pub fn write_metrics_csv(rows: &[MetricsRecord], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["image_id", "n", "pof", "poc", "pofc", "pocc"])
        .map_err(csv_error)?;
    for row in rows {
        let m = &row.metrics;
        writer
            .write_record([
                row.image_id.clone(),
                row.n.to_string(),
                m.pof.to_string(),
                m.poc.map(|v| v.to_string()).unwrap_or_default(),
                m.pofc.to_string(),
                m.pocc.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::argument(format!("csv output failed: {other:?}")),
    }
}
