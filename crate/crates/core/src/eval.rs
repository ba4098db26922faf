//! Fixation-prediction scoring with the hit-rate ROC variant and model
//! comparison across images.

use std::collections::BTreeMap;
use std::io::Write;

use crate::analytics::{csv_error, DensityParams};
use crate::error::{Error, Result};
use crate::fixation::FixationSet;
use crate::raster::FloatMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of fixations on pixels with saliency ≥ threshold.
    pub tpr: f64,
    /// Fraction of all pixels with saliency ≥ threshold.
    pub salient_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub image_id: String,
    /// Descending thresholds, starting at `(+inf, 0, 0)` and ending at `(-inf, 1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve of a saliency map against the retained fixations of one image.
///
/// Thresholds are the distinct saliency values under the fixations, so
/// fixations sharing a value enter the curve together. A constant map gives
/// the diagonal and an AUC of exactly 0.5.
pub fn roc_judd(
    saliency: &FloatMap,
    fixations: &FixationSet,
    params: &DensityParams,
) -> Result<RocCurve> {
    if !saliency.all_finite() {
        return Err(Error::argument("saliency map has non-finite values"));
    }
    fixations.validate(saliency.width(), saliency.height())?;
    let pixels = fixations.retained_pixels(params.drop_first_fixation);
    if pixels.is_empty() {
        return Err(Error::argument(format!(
            "{}: no retained fixations to score",
            fixations.image_id()
        )));
    }
    let mut at_fix: Vec<f64> = pixels.iter().map(|&(x, y)| saliency.get(x, y)).collect();
    at_fix.sort_by(|a, b| b.total_cmp(a));
    let mut sorted = saliency.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let (n_fix, n_pix) = (at_fix.len() as f64, sorted.len() as f64);

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        salient_fraction: 0.0,
    }];
    let mut i = 0;
    while i < at_fix.len() {
        let t = at_fix[i];
        while i < at_fix.len() && at_fix[i] == t {
            i += 1;
        }
        let above = sorted.len() - sorted.partition_point(|&v| v < t);
        points.push(RocPoint {
            threshold: t,
            tpr: i as f64 / n_fix,
            salient_fraction: above as f64 / n_pix,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        tpr: 1.0,
        salient_fraction: 1.0,
    });
    let auc = points
        .windows(2)
        .map(|w| (w[1].salient_fraction - w[0].salient_fraction) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum();
    Ok(RocCurve {
        image_id: fixations.image_id().to_string(),
        points,
        auc,
    })
}

/// Number of points on the shared salient-fraction grid used for averaging.
pub const CURVE_GRID_POINTS: usize = 101;

/// TPR at `fraction`, linearly interpolated; at a vertical step the upper
/// value is taken.
pub fn tpr_at(curve: &RocCurve, fraction: f64) -> f64 {
    let pts = &curve.points;
    let mut best = 0.0f64;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if fraction < a.salient_fraction || fraction > b.salient_fraction {
            continue;
        }
        let span = b.salient_fraction - a.salient_fraction;
        let v = if span > 0.0 {
            a.tpr + (b.tpr - a.tpr) * (fraction - a.salient_fraction) / span
        } else {
            b.tpr
        };
        best = best.max(v);
    }
    best
}

/// Mean TPR of several curves at evenly spaced salient fractions `0, 0.01, ..., 1`.
pub fn average_curve(curves: &[RocCurve]) -> Vec<(f64, f64)> {
    (0..CURVE_GRID_POINTS)
        .map(|k| {
            let f = k as f64 / (CURVE_GRID_POINTS - 1) as f64;
            let mean = if curves.is_empty() {
                0.0
            } else {
                curves.iter().map(|c| tpr_at(c, f)).sum::<f64>() / curves.len() as f64
            };
            (f, mean)
        })
        .collect()
}

/// Mean with a normal-approximation 95% interval from the sample standard
/// deviation. The interval is `None` for fewer than two values.
pub fn mean_ci95(values: &[f64]) -> (f64, Option<(f64, f64)>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.959963984540054 * (var / n).sqrt();
    (mean, Some((mean - half, mean + half)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model: String,
    pub images: usize,
    pub mean_auc: f64,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedDifference {
    pub baseline: String,
    pub guided: String,
    /// Mean over images of `auc(guided) - auc(baseline)`.
    pub mean_difference: f64,
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub models: Vec<ModelSummary>,
    pub differences: Vec<PairedDifference>,
    /// Per-model averaged curves on the shared grid.
    pub mean_curves: Vec<(String, Vec<(f64, f64)>)>,
}

/// Summarizes per-image curves of several models scored on the same images.
///
/// `runs` lists `(model, curve)` pairs in any order; models are reported in
/// first-appearance order and images are aggregated in `image_id` order.
/// `pairs` names `(baseline, guided)` models whose per-image AUC differences
/// are summarized.
pub fn compare_models(
    runs: &[(String, RocCurve)],
    pairs: &[(String, String)],
) -> Result<Comparison> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_model: BTreeMap<&str, BTreeMap<&str, &RocCurve>> = BTreeMap::new();
    for (model, curve) in runs {
        if !by_model.contains_key(model.as_str()) {
            order.push(model);
        }
        let images = by_model.entry(model).or_default();
        if images.insert(&curve.image_id, curve).is_some() {
            return Err(Error::argument(format!(
                "model {model} scored image {} twice",
                curve.image_id
            )));
        }
    }
    if order.len() < 2 {
        return Err(Error::argument("comparison needs at least two models"));
    }
    let reference: Vec<&str> = by_model[order[0]].keys().copied().collect();
    for model in &order[1..] {
        let images: Vec<&str> = by_model[model].keys().copied().collect();
        if images != reference {
            return Err(Error::argument(format!(
                "models {} and {model} were scored on different image sets",
                order[0]
            )));
        }
    }

    let aucs = |model: &str| -> Vec<f64> { by_model[model].values().map(|c| c.auc).collect() };
    let models = order
        .iter()
        .map(|&m| {
            let (mean_auc, ci) = mean_ci95(&aucs(m));
            ModelSummary {
                model: m.to_string(),
                images: reference.len(),
                mean_auc,
                ci,
            }
        })
        .collect();
    let mut differences = Vec::new();
    for (baseline, guided) in pairs {
        for name in [baseline, guided] {
            if !by_model.contains_key(name.as_str()) {
                return Err(Error::argument(format!(
                    "unknown model {name} in comparison pair"
                )));
            }
        }
        let diffs: Vec<f64> = aucs(guided)
            .iter()
            .zip(aucs(baseline))
            .map(|(g, b)| g - b)
            .collect();
        let (mean_difference, ci) = mean_ci95(&diffs);
        differences.push(PairedDifference {
            baseline: baseline.clone(),
            guided: guided.clone(),
            mean_difference,
            ci,
        });
    }
    let mean_curves = order
        .iter()
        .map(|&m| {
            let curves: Vec<RocCurve> = by_model[m].values().map(|&c| c.clone()).collect();
            (m.to_string(), average_curve(&curves))
        })
        .collect();
    Ok(Comparison {
        models,
        differences,
        mean_curves,
    })
}

/// Writes `model,image_id,threshold,tpr,salient_fraction`, one row per point.
pub fn write_curves_csv(runs: &[(String, RocCurve)], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "image_id", "threshold", "tpr", "salient_fraction"])
        .map_err(csv_error)?;
    for (model, curve) in runs {
        for p in &curve.points {
            w.write_record([
                model.clone(),
                curve.image_id.clone(),
                p.threshold.to_string(),
                p.tpr.to_string(),
                p.salient_fraction.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn ci_fields(ci: Option<(f64, f64)>) -> [String; 2] {
    match ci {
        Some((lo, hi)) => [lo.to_string(), hi.to_string()],
        None => [String::new(), String::new()],
    }
}

/// Writes `model,mean_auc,ci_low,ci_high`; an undefined interval is left empty.
pub fn write_summary_csv(models: &[ModelSummary], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "mean_auc", "ci_low", "ci_high"])
        .map_err(csv_error)?;
    for m in models {
        let [lo, hi] = ci_fields(m.ci);
        w.write_record([m.model.clone(), m.mean_auc.to_string(), lo, hi])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `baseline,guided,mean_difference,ci_low,ci_high`.
pub fn write_differences_csv(diffs: &[PairedDifference], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["baseline", "guided", "mean_difference", "ci_low", "ci_high"])
        .map_err(csv_error)?;
    for d in diffs {
        let [lo, hi] = ci_fields(d.ci);
        w.write_record([
            d.baseline.clone(),
            d.guided.clone(),
            d.mean_difference.to_string(),
            lo,
            hi,
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `model,salient_fraction,tpr` for averaged curves.
pub fn write_mean_curves_csv(curves: &[(String, Vec<(f64, f64)>)], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "salient_fraction", "tpr"])
        .map_err(csv_error)?;
    for (model, points) in curves {
        for (f, t) in points {
            w.write_record([model.clone(), f.to_string(), t.to_string()])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}
