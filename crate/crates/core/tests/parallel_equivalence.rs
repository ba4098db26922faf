//! The data-parallel and sequential paths must agree to the bit.

use lineguide::analytics::{density_map, DensityParams};
use lineguide::closure::{closure_map, ClosureParams};
use lineguide::contour::{extract_contours, EdgeParams};
use lineguide::eval::roc_judd;
use lineguide::gmm::PriorParams;
use lineguide::prior::spatial_prior;
use lineguide::saliency::{combine, itti_saliency, signature_saliency, IttiParams, SigParams};
use lineguide::{gaussian_blur, par, ColorImage, FixationSet, FloatMap, Image};

fn bits(map: &FloatMap) -> Vec<u64> {
    map.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn scene() -> ColorImage {
    ColorImage::from_fn(256, 256, |x, y| {
        let (dx, dy) = (x as f64 - 100.0, y as f64 - 140.0);
        let ring = ((dx.hypot(dy) - 40.0).abs() < 1.5) as u8 as f64;
        let bar = (x > 180 && x < 184 && y > 20 && y < 200) as u8 as f64;
        [0.9 - 0.8 * ring, 0.9 - 0.5 * bar, 0.9 - 0.8 * ring.max(bar)]
    })
    .unwrap()
}

/// Runs every stage and returns the intermediate rasters and the AUC.
fn run_all() -> (Vec<Vec<u64>>, u64) {
    let image = scene();
    let edges = extract_contours(&image.luminance(), &EdgeParams::default()).unwrap();
    let closure = closure_map(&edges.mask, &ClosureParams::default()).unwrap();
    let prior = spatial_prior(&closure, &PriorParams::default()).unwrap();
    let it = itti_saliency(&image, &IttiParams::default()).unwrap();
    let sig = signature_saliency(&Image::Color(image.clone()), &SigParams::default()).unwrap();
    let guided = combine(&it, &prior.prior.map).unwrap();
    let blurred = gaussian_blur(&closure, 7.5).unwrap();
    let points: Vec<(f64, f64)> = (0..30)
        .map(|i| (70.0 + i as f64 * 2.0, 120.0 + (i % 5) as f64 * 8.0))
        .collect();
    let fix = FixationSet::from_points("p", &points, 1).unwrap();
    let params = DensityParams {
        drop_first_fixation: false,
        ..DensityParams::default()
    };
    let density = density_map(&fix, 256, 256, &params).unwrap().map;
    let auc = roc_judd(&guided, &fix, &params).unwrap().auc;
    let maps = [
        &closure,
        &prior.prior.map,
        &it,
        &sig,
        &guided,
        &blurred,
        &density,
    ];
    (maps.iter().map(|m| bits(m)).collect(), auc.to_bits())
}

#[test]
fn every_stage_is_identical_with_and_without_threads() {
    let parallel = run_all();
    let sequential = par::sequential(run_all);
    assert_eq!(parallel.0.len(), sequential.0.len());
    for (i, (a, b)) in parallel.0.iter().zip(&sequential.0).enumerate() {
        assert!(a == b, "stage {i} differs");
    }
    assert_eq!(parallel.1, sequential.1);
}

#[test]
fn repeated_runs_are_identical() {
    assert_eq!(run_all(), run_all());
}
