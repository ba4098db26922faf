//! Synthetic line-drawing scenes shared by the integration suites.

#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::Path;

use lineguide::{io, ColorImage, ContourMask, FixationSet, Grid, Image, LabelMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SCENE_SIZE: usize = 256;

/// Draws a 4-connected polyline through `points`, so that no diagonal ray
/// can slip between two of its pixels.
pub fn draw_polyline(mask: &mut ContourMask, points: &[(f64, f64)]) {
    let (w, h) = mask.dims();
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            mask.set(x as usize, y as usize, true);
        }
    };
    let mut prev: Option<(i64, i64)> = None;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let steps = ((b.0 - a.0).hypot(b.1 - a.1) * 4.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let p = (
                (a.0 + t * (b.0 - a.0)).round() as i64,
                (a.1 + t * (b.1 - a.1)).round() as i64,
            );
            if let Some(q) = prev {
                if q != p && q.0 != p.0 && q.1 != p.1 {
                    put(p.0, q.1);
                }
            }
            put(p.0, p.1);
            prev = Some(p);
        }
    }
}

/// Outline of an ellipse as a closed polyline.
pub fn ellipse_points(
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    start: f64,
    span: f64,
) -> Vec<(f64, f64)> {
    let n = ((rx.max(ry) * span).ceil() as usize).max(16);
    (0..=n)
        .map(|i| {
            let t = start + span * i as f64 / n as f64;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

pub fn circle_mask(size: usize, cx: f64, cy: f64, r: f64) -> ContourMask {
    let mut mask = ContourMask::filled(size, size, false);
    draw_polyline(&mut mask, &ellipse_points(cx, cy, r, r, 0.0, TAU));
    mask
}

/// One closed shape among open-curve clutter, with its fixations.
pub struct Scene {
    pub image: ColorImage,
    pub contours: ContourMask,
    /// Pixels strictly inside the closed shape.
    pub inside: Grid<bool>,
    /// The shape (outline included) and the four background quadrants.
    pub labels: LabelMap,
    /// Ten fixations inside the shape, then three uniform distractors, each
    /// from its own subject at ordinal 1.
    pub fixations: FixationSet,
}

/// Normalized distance from the shape center: below 1 inside.
type ShapeRadius = Box<dyn Fn(f64, f64) -> f64>;

fn shape_outline(rng: &mut ChaCha8Rng) -> (Vec<(f64, f64)>, ShapeRadius) {
    let cx = rng.gen_range(70.0..186.0);
    let cy = rng.gen_range(70.0..186.0);
    let rx = rng.gen_range(22.0..42.0);
    let ry = rng.gen_range(22.0..42.0);
    if rng.gen_bool(0.5) {
        let outline = ellipse_points(cx, cy, rx, ry, 0.0, TAU);
        let inside = move |x: f64, y: f64| ((x - cx) / rx).hypot((y - cy) / ry);
        (outline, Box::new(inside))
    } else {
        let outline = vec![
            (cx - rx, cy - ry),
            (cx + rx, cy - ry),
            (cx + rx, cy + ry),
            (cx - rx, cy + ry),
            (cx - rx, cy - ry),
        ];
        let inside = move |x: f64, y: f64| ((x - cx) / rx).abs().max(((y - cy) / ry).abs());
        (outline, Box::new(inside))
    }
}

fn clutter_curve(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let s = SCENE_SIZE as f64;
    if rng.gen_bool(0.5) {
        let r = rng.gen_range(15.0..45.0);
        let span = rng.gen_range(0.6..1.4) * std::f64::consts::PI;
        ellipse_points(
            rng.gen_range(0.0..s),
            rng.gen_range(0.0..s),
            r,
            r,
            rng.gen_range(0.0..TAU),
            span,
        )
    } else {
        let mut p = (rng.gen_range(0.0..s), rng.gen_range(0.0..s));
        let mut heading = rng.gen_range(0.0..TAU);
        let mut pts = vec![p];
        for _ in 0..rng.gen_range(1..4) {
            let len = rng.gen_range(20.0..60.0);
            p = (p.0 + len * heading.cos(), p.1 + len * heading.sin());
            pts.push(p);
            heading += rng.gen_range(-1.0..1.0);
        }
        pts
    }
}

pub fn synthetic_scene(seed: u64, image_id: &str) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SCENE_SIZE;
    let (outline, radius_of) = shape_outline(&mut rng);
    let mut shape = ContourMask::filled(n, n, false);
    draw_polyline(&mut shape, &outline);
    let inside = Grid::from_fn(n, n, |x, y| {
        radius_of(x as f64 + 0.5, y as f64 + 0.5) < 0.85
    });
    let labels = LabelMap::relabel(Grid::from_fn(n, n, |x, y| {
        if shape.get(x, y) || radius_of(x as f64 + 0.5, y as f64 + 0.5) < 1.0 {
            4
        } else {
            u32::from(x >= n / 2) + 2 * u32::from(y >= n / 2)
        }
    }));

    let mut contours = shape.clone();
    let mut strokes: Vec<(ContourMask, [f64; 3])> = Vec::new();
    let colour = |rng: &mut ChaCha8Rng| {
        [
            rng.gen_range(0.0..0.6),
            rng.gen_range(0.0..0.6),
            rng.gen_range(0.0..0.6),
        ]
    };
    strokes.push((shape, colour(&mut rng)));
    for _ in 0..6 {
        let mut m = ContourMask::filled(n, n, false);
        draw_polyline(&mut m, &clutter_curve(&mut rng));
        for (i, &v) in m.as_slice().iter().enumerate() {
            if v {
                contours.as_mut_slice()[i] = true;
            }
        }
        strokes.push((m, colour(&mut rng)));
    }
    let plane = |c: usize| {
        Grid::from_fn(n, n, |x, y| {
            strokes
                .iter()
                .rev()
                .find(|(m, _)| m.get(x, y))
                .map_or(0.92, |(_, rgb)| rgb[c])
        })
    };
    let image = ColorImage::new(plane(0), plane(1), plane(2)).expect("equal planes");

    let interior: Vec<(usize, usize)> = (0..n * n)
        .map(|i| (i % n, i / n))
        .filter(|&(x, y)| inside.get(x, y))
        .collect();
    let mut points = Vec::with_capacity(13);
    for _ in 0..10 {
        let (x, y) = interior[rng.gen_range(0..interior.len())];
        points.push((x as f64 + rng.gen::<f64>(), y as f64 + rng.gen::<f64>()));
    }
    for _ in 0..3 {
        points.push((rng.gen_range(0.0..n as f64), rng.gen_range(0.0..n as f64)));
    }
    let fixations = FixationSet::from_points(image_id, &points, 1).expect("valid points");
    Scene {
        image,
        contours,
        inside,
        labels,
        fixations,
    }
}

/// Fixations of `subjects` viewers, each a scanpath of `per_subject` points
/// drawn from `pick`.
pub fn scanpaths(
    image_id: &str,
    subjects: usize,
    per_subject: u32,
    mut pick: impl FnMut() -> (f64, f64),
) -> FixationSet {
    let mut records = Vec::new();
    for s in 0..subjects {
        for ordinal in 1..=per_subject {
            let (x, y) = pick();
            records.push(lineguide::FixationRecord {
                image_id: image_id.to_string(),
                subject_id: format!("s{s}"),
                ordinal,
                x,
                y,
                duration_ms: 250.0,
            });
        }
    }
    FixationSet::new(image_id, records).expect("valid scanpaths")
}

/// Writes scenes as image, contour, label and fixation files plus a manifest.
/// Returns the manifest path.
pub fn write_dataset(
    dir: &Path,
    scenes: &[(String, Scene)],
    with_contours: bool,
) -> std::path::PathBuf {
    let mut manifest = String::from("image_id,image_path,contour_path,labels_path,fixations\n");
    let mut sets = Vec::new();
    for (id, scene) in scenes {
        io::write_pnm(
            &Image::Color(scene.image.clone()),
            dir.join(format!("{id}.ppm")),
        )
        .unwrap();
        let contour = if with_contours {
            io::write_mask(&scene.contours, dir.join(format!("{id}_edges.pgm"))).unwrap();
            format!("{id}_edges.pgm")
        } else {
            String::new()
        };
        io::write_labels(&scene.labels, dir.join(format!("{id}_labels.pgm"))).unwrap();
        manifest.push_str(&format!("{id},{id}.ppm,{contour},{id}_labels.pgm,true\n"));
        sets.push(scene.fixations.clone());
    }
    io::write_fixation_csv(&sets, dir.join("fixations.csv")).unwrap();
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}
