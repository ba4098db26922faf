//! Subcommand implementations. Every subcommand maps a per-image task over the
//! manifest rows, writes per-image outputs atomically, then reduces summaries
//! sequentially in manifest order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lineguide::analytics::{
    cc, closed_regions, density_map, feature_correlation, guidance_metrics, hierarchical_objects,
    mae, segment_saliency, segment_saliency_map, shape_features, write_metrics_csv,
    write_segments_csv, GuidanceMetrics, MetricsRecord, SegmentRecord,
};
use lineguide::closure::closure_map;
use lineguide::contour::{extract_contours, link_edges, write_chains_csv};
use lineguide::eval::{
    compare_models, mean_ci95, roc_judd, write_curves_csv, write_differences_csv,
    write_mean_curves_csv, write_summary_csv, RocCurve,
};
use lineguide::io;
use lineguide::prior::{spatial_prior, write_components_csv, SpatialPrior};
use lineguide::saliency::{combine, itti_saliency, signature_saliency};
use lineguide::{gaussian_blur, normalize01, ContourMask, FixationSet, FloatMap, Image, LabelMap};

use crate::config::RunConfig;
use crate::error::{input_error, CliError};
use crate::manifest::ManifestRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Model {
    It,
    Sig,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::It => "it",
            Model::Sig => "sig",
        }
    }

    pub fn guided_name(self) -> String {
        format!("guided_{}", self.name())
    }
}

/// Fixation sets of one viewing condition, by image id.
#[derive(Debug, Clone)]
pub struct Condition {
    pub name: String,
    pub sets: BTreeMap<String, FixationSet>,
}

impl Condition {
    /// Loads `[NAME=]PATH`; the name defaults to the file stem.
    pub fn load(spec: &str) -> Result<Condition, CliError> {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) if !n.is_empty() => (n.to_string(), PathBuf::from(p)),
            _ => {
                let path = PathBuf::from(spec);
                let stem = path.file_stem().map_or("fixations".to_string(), |s| {
                    s.to_string_lossy().into_owned()
                });
                (stem, path)
            }
        };
        let sets = io::read_fixation_csv(&path).map_err(|e| input_error(&path, e))?;
        let condition = Condition {
            name,
            sets: sets
                .into_iter()
                .map(|s| (s.image_id().to_string(), s))
                .collect(),
        };
        Ok(condition)
    }

    /// Fails with `no fixations retained` when the rule drops every fixation.
    pub fn require_retained(&self, drop_first: bool) -> Result<(), CliError> {
        if self
            .sets
            .values()
            .all(|s| s.retained(drop_first).is_empty())
        {
            return Err(CliError::Input(format!(
                "{}: no fixations retained",
                self.name
            )));
        }
        Ok(())
    }

    fn for_row(&self, row: &ManifestRow) -> Result<Option<&FixationSet>, CliError> {
        if !row.has_fixations {
            return Ok(None);
        }
        self.sets
            .get(&row.image_id)
            .map(Some)
            .ok_or_else(|| CliError::Input(format!("no fixations in {} for this image", self.name)))
    }
}

pub struct Context {
    pub config: RunConfig,
    pub rows: Vec<ManifestRow>,
}

/// Outcome of a batch: per-image failures in manifest order.
#[derive(Debug, Default)]
pub struct Report {
    pub failures: Vec<(String, CliError)>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.failures
            .iter()
            .map(|(_, e)| e.exit_code())
            .max_by_key(|&c| (c == 2, c))
            .unwrap_or(0)
    }
}

fn out_dir(ctx: &Context, parts: &[&str]) -> Result<PathBuf, CliError> {
    let mut dir = ctx.config.output_dir.clone();
    for p in parts {
        dir.push(p);
    }
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_err(path: &Path, e: lineguide::Error) -> CliError {
    CliError::Internal(format!("writing {}: {e}", path.display()))
}

/// The values a map has once stored as FMAP.
fn stored(map: &FloatMap) -> FloatMap {
    map.map(|&v| v as f32 as f64)
}

fn save_map(map: &FloatMap, dir: &Path, stem: &str) -> Result<(), CliError> {
    let fmap = dir.join(format!("{stem}.fmap"));
    io::write_fmap(map, &fmap).map_err(|e| write_err(&fmap, e))?;
    let preview = dir.join(format!("{stem}.pgm"));
    io::write_pgm8(&normalize01(map), &preview).map_err(|e| write_err(&preview, e))
}

fn save_text(bytes: Vec<u8>, path: &Path) -> Result<(), CliError> {
    io::write_bytes(path, &bytes).map_err(|e| write_err(path, e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> lineguide::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(buf)
}

/// Runs `task` on every row with the configured worker count. Results keep
/// manifest order.
fn map_rows<T: Send>(
    ctx: &Context,
    task: impl Fn(&ManifestRow) -> Result<T, CliError> + Send + Sync,
) -> Vec<(String, Result<T, CliError>)> {
    let guarded = |row: &ManifestRow| {
        let result = match row.missing_input() {
            Some(path) => {
                log::debug!("{}: {} not found", row.image_id, path.display());
                Err(CliError::Input("input missing".into()))
            }
            None => task(row),
        };
        match &result {
            Ok(_) => log::info!("{}: done", row.image_id),
            Err(e) => eprintln!("{}: {e}", row.image_id),
        }
        (row.image_id.clone(), result)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.config.threads)
            .build();
        if let Ok(pool) = pool {
            return pool.install(|| ctx.rows.par_iter().map(guarded).collect());
        }
    }
    ctx.rows.iter().map(guarded).collect()
}

fn split<T>(results: Vec<(String, Result<T, CliError>)>) -> (Vec<(String, T)>, Report) {
    let mut ok = Vec::new();
    let mut report = Report::default();
    for (id, r) in results {
        match r {
            Ok(v) => ok.push((id, v)),
            Err(e) => report.failures.push((id, e)),
        }
    }
    (ok, report)
}

fn load_image(row: &ManifestRow) -> Result<Image, CliError> {
    io::read_pnm(&row.image_path).map_err(|e| input_error(&row.image_path, e))
}

fn load_labels(path: &Path) -> Result<LabelMap, CliError> {
    io::read_labels(path).map_err(|e| input_error(path, e))
}

struct Contours {
    mask: ContourMask,
    chains: Vec<lineguide::contour::EdgeChain>,
}

/// The manifest's contour mask when given, otherwise detected edges.
fn contours_for(
    row: &ManifestRow,
    image: &Image,
    config: &RunConfig,
) -> Result<Contours, CliError> {
    match &row.contour_path {
        Some(path) => {
            let mask = io::read_mask(path).map_err(|e| input_error(path, e))?;
            if (mask.width(), mask.height()) != (image.width(), image.height()) {
                return Err(CliError::Input(format!(
                    "contour mask is {}x{} but image is {}x{}",
                    mask.width(),
                    mask.height(),
                    image.width(),
                    image.height()
                )));
            }
            let chains = link_edges(&mask, 1).chains;
            Ok(Contours { mask, chains })
        }
        None => {
            let linked = extract_contours(&image.to_gray(), &config.edges)?;
            Ok(Contours {
                mask: linked.mask,
                chains: linked.chains,
            })
        }
    }
}

fn prior_for(closure: &FloatMap, config: &RunConfig) -> Result<Option<SpatialPrior>, CliError> {
    if !(closure.sum() > 0.0) {
        return Ok(None);
    }
    Ok(Some(spatial_prior(closure, &config.prior)?))
}

/// Prior raster; uniform when the image has no contours to fit.
fn prior_raster(prior: &Option<SpatialPrior>, width: usize, height: usize, id: &str) -> FloatMap {
    match prior {
        Some(p) => p.prior.map.clone(),
        None => {
            log::warn!("{id}: closure map is empty; using a uniform prior");
            FloatMap::filled(width, height, 1.0)
        }
    }
}

fn saliency_for(image: &Image, model: Model, config: &RunConfig) -> Result<FloatMap, CliError> {
    Ok(match model {
        Model::It => itti_saliency(&image.to_color(), &config.itti)?,
        Model::Sig => signature_saliency(image, &config.sig)?,
    })
}

fn report_only(results: Vec<(String, Result<(), CliError>)>) -> Report {
    split(results).1
}

pub fn cmd_contours(ctx: &Context) -> Result<Report, CliError> {
    let dir = out_dir(ctx, &["contours"])?;
    Ok(report_only(map_rows(ctx, |row| {
        let image = load_image(row)?;
        let contours = contours_for(row, &image, &ctx.config)?;
        let mask_path = dir.join(format!("{}.pgm", row.image_id));
        match &row.contour_path {
            // pass the provided file through byte for byte
            Some(src) => {
                let bytes = fs::read(src).map_err(|e| input_error(src, e.into()))?;
                save_text(bytes, &mask_path)?;
            }
            None => {
                io::write_mask(&contours.mask, &mask_path).map_err(|e| write_err(&mask_path, e))?
            }
        }
        let chains = csv_bytes(|b| write_chains_csv(&contours.chains, b))?;
        save_text(chains, &dir.join(format!("{}_chains.csv", row.image_id)))
    })))
}

pub fn cmd_closure(ctx: &Context) -> Result<Report, CliError> {
    let dir = out_dir(ctx, &["closure"])?;
    Ok(report_only(map_rows(ctx, |row| {
        let image = load_image(row)?;
        let contours = contours_for(row, &image, &ctx.config)?;
        let closure = closure_map(&contours.mask, &ctx.config.closure)?;
        save_map(&closure, &dir, &row.image_id)
    })))
}

fn save_prior(
    prior: &Option<SpatialPrior>,
    raster: &FloatMap,
    dir: &Path,
    id: &str,
) -> Result<(), CliError> {
    save_map(raster, dir, id)?;
    let path = dir.join(format!("{id}_components.csv"));
    let (components, omegas) = match prior {
        Some(p) => (
            p.fit.components.clone(),
            p.weights.iter().map(|w| w.omega).collect::<Vec<_>>(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    write_components_csv(&components, &omegas, &path).map_err(|e| write_err(&path, e))
}

pub fn cmd_prior(ctx: &Context) -> Result<Report, CliError> {
    let dir = out_dir(ctx, &["prior"])?;
    Ok(report_only(map_rows(ctx, |row| {
        let image = load_image(row)?;
        let contours = contours_for(row, &image, &ctx.config)?;
        let closure = closure_map(&contours.mask, &ctx.config.closure)?;
        let prior = prior_for(&closure, &ctx.config)?;
        let raster = prior_raster(&prior, image.width(), image.height(), &row.image_id);
        save_prior(&prior, &raster, &dir, &row.image_id)
    })))
}

pub fn cmd_saliency(ctx: &Context, models: &[Model]) -> Result<Report, CliError> {
    let dirs = models
        .iter()
        .map(|m| out_dir(ctx, &["saliency", m.name()]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(report_only(map_rows(ctx, |row| {
        let image = load_image(row)?;
        for (m, dir) in models.iter().zip(&dirs) {
            save_map(&saliency_for(&image, *m, &ctx.config)?, dir, &row.image_id)?;
        }
        Ok(())
    })))
}

fn read_stage_map(path: &Path) -> Result<FloatMap, CliError> {
    io::read_fmap(path).map_err(|e| match e {
        lineguide::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::Input(format!(
                "input missing: {} (run the earlier stage first)",
                path.display()
            ))
        }
        other => input_error(path, other),
    })
}

/// Multiplies maps written by `saliency` with maps written by `prior`.
pub fn cmd_combine(ctx: &Context, models: &[Model]) -> Result<Report, CliError> {
    let root = ctx.config.output_dir.clone();
    let dirs = models
        .iter()
        .map(|m| out_dir(ctx, &["guided", m.name()]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(report_only(map_rows(ctx, |row| {
        let prior = read_stage_map(&root.join("prior").join(format!("{}.fmap", row.image_id)))?;
        for (m, dir) in models.iter().zip(&dirs) {
            let path = root
                .join("saliency")
                .join(m.name())
                .join(format!("{}.fmap", row.image_id));
            let bottom_up = read_stage_map(&path)?;
            save_map(&combine(&bottom_up, &prior)?, dir, &row.image_id)?;
        }
        Ok(())
    })))
}

pub fn cmd_density(ctx: &Context, conditions: &[Condition]) -> Result<Report, CliError> {
    if conditions.is_empty() {
        return Err(CliError::Input(
            "density needs at least one --fixations file".into(),
        ));
    }
    for c in conditions {
        c.require_retained(ctx.config.density.drop_first_fixation)?;
    }
    let dirs = conditions
        .iter()
        .map(|c| out_dir(ctx, &["density", &c.name]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(report_only(map_rows(ctx, |row| {
        let image = load_image(row)?;
        for (c, dir) in conditions.iter().zip(&dirs) {
            if let Some(set) = c.for_row(row)? {
                let d = density_map(set, image.width(), image.height(), &ctx.config.density)?;
                save_map(&d.map, dir, &row.image_id)?;
            }
        }
        Ok(())
    })))
}

fn score(map: &FloatMap, set: &FixationSet, config: &RunConfig) -> Result<RocCurve, CliError> {
    let map = if config.eval_blur_sigma > 0.0 {
        gaussian_blur(map, config.eval_blur_sigma)?
    } else {
        map.clone()
    };
    Ok(roc_judd(&map, set, &config.density)?)
}

/// Writes curves, per-model summary, paired differences and averaged curves.
fn write_comparison(
    dir: &Path,
    runs: &[(String, RocCurve)],
    pairs: &[(String, String)],
) -> Result<(), CliError> {
    save_text(
        csv_bytes(|b| write_curves_csv(runs, b))?,
        &dir.join("curves.csv"),
    )?;
    let models: std::collections::BTreeSet<&str> = runs.iter().map(|(m, _)| m.as_str()).collect();
    if models.len() < 2 {
        log::warn!("fewer than two scored models; skipping comparison tables");
        return Ok(());
    }
    let cmp = compare_models(runs, pairs)?;
    save_text(
        csv_bytes(|b| write_summary_csv(&cmp.models, b))?,
        &dir.join("summary.csv"),
    )?;
    save_text(
        csv_bytes(|b| write_differences_csv(&cmp.differences, b))?,
        &dir.join("differences.csv"),
    )?;
    save_text(
        csv_bytes(|b| write_mean_curves_csv(&cmp.mean_curves, b))?,
        &dir.join("mean_curves.csv"),
    )
}

/// Scores saved maps. Each `(name, dir)` holds `<image_id>.fmap` files.
pub fn cmd_eval(
    ctx: &Context,
    fixations: &Condition,
    maps: &[(String, PathBuf)],
    pairs: &[(String, String)],
) -> Result<Report, CliError> {
    fixations.require_retained(ctx.config.density.drop_first_fixation)?;
    let dir = out_dir(ctx, &["eval"])?;
    let results = map_rows(ctx, |row| {
        let Some(set) = fixations.for_row(row)? else {
            return Ok(Vec::new());
        };
        maps.iter()
            .map(|(name, map_dir)| {
                let map = read_stage_map(&map_dir.join(format!("{}.fmap", row.image_id)))?;
                Ok((name.clone(), score(&map, set, &ctx.config)?))
            })
            .collect::<Result<Vec<_>, CliError>>()
    });
    let (ok, report) = split(results);
    let runs: Vec<(String, RocCurve)> = ok.into_iter().flat_map(|(_, r)| r).collect();
    write_comparison(&dir, &runs, pairs)?;
    Ok(report)
}

/// AUCs of one image under one model.
#[derive(Debug, Clone)]
struct PipelineScore {
    model: Model,
    baseline: Option<RocCurve>,
    guided: Option<RocCurve>,
}

/// Contours through guided saliency and scoring, writing every stage.
pub fn cmd_pipeline(
    ctx: &Context,
    models: &[Model],
    fixations: Option<&Condition>,
) -> Result<Report, CliError> {
    if let Some(f) = fixations {
        f.require_retained(ctx.config.density.drop_first_fixation)?;
    }
    let contour_dir = out_dir(ctx, &["contours"])?;
    let closure_dir = out_dir(ctx, &["closure"])?;
    let prior_dir = out_dir(ctx, &["prior"])?;
    let mut model_dirs = Vec::new();
    for m in models {
        model_dirs.push((
            out_dir(ctx, &["saliency", m.name()])?,
            out_dir(ctx, &["guided", m.name()])?,
        ));
    }
    let pipeline_dir = out_dir(ctx, &["pipeline"])?;

    let results = map_rows(ctx, |row| {
        let image = load_image(row)?;
        let (w, h) = (image.width(), image.height());
        let contours = contours_for(row, &image, &ctx.config)?;
        let mask_path = contour_dir.join(format!("{}.pgm", row.image_id));
        io::write_mask(&contours.mask, &mask_path).map_err(|e| write_err(&mask_path, e))?;
        let closure = closure_map(&contours.mask, &ctx.config.closure)?;
        save_map(&closure, &closure_dir, &row.image_id)?;
        let prior = prior_for(&closure, &ctx.config)?;
        let prior_map = stored(&prior_raster(&prior, w, h, &row.image_id));
        save_prior(&prior, &prior_map, &prior_dir, &row.image_id)?;

        let set = match fixations {
            Some(f) => f.for_row(row)?,
            None => None,
        };
        let mut scores = Vec::new();
        for (m, (sal_dir, guided_dir)) in models.iter().zip(&model_dirs) {
            // staged runs combine and score the stored maps; do the same here
            let bottom_up = stored(&saliency_for(&image, *m, &ctx.config)?);
            let guided = stored(&combine(&bottom_up, &prior_map)?);
            save_map(&bottom_up, sal_dir, &row.image_id)?;
            save_map(&guided, guided_dir, &row.image_id)?;
            let (baseline, guided) = match set {
                Some(s) => (
                    Some(score(&bottom_up, s, &ctx.config)?),
                    Some(score(&guided, s, &ctx.config)?),
                ),
                None => (None, None),
            };
            scores.push(PipelineScore {
                model: *m,
                baseline,
                guided,
            });
        }
        Ok(scores)
    });

    let mut table = String::from("image_id,model,baseline_auc,guided_auc,status\n");
    let mut runs = Vec::new();
    for (id, result) in &results {
        match result {
            Ok(scores) => {
                for s in scores {
                    let auc = |c: &Option<RocCurve>| {
                        c.as_ref().map_or(String::new(), |c| c.auc.to_string())
                    };
                    let status = if s.baseline.is_some() {
                        "ok"
                    } else {
                        "unscored"
                    };
                    table.push_str(&format!(
                        "{id},{},{},{},{status}\n",
                        s.model.name(),
                        auc(&s.baseline),
                        auc(&s.guided)
                    ));
                    if let (Some(b), Some(g)) = (&s.baseline, &s.guided) {
                        runs.push((s.model.name().to_string(), b.clone()));
                        runs.push((s.model.guided_name(), g.clone()));
                    }
                }
            }
            Err(_) => {
                for m in models {
                    table.push_str(&format!("{id},{},,,failed\n", m.name()));
                }
            }
        }
    }
    save_text(table.into_bytes(), &pipeline_dir.join("auc.csv"))?;
    if !runs.is_empty() {
        let pairs: Vec<(String, String)> = models
            .iter()
            .map(|m| (m.name().to_string(), m.guided_name()))
            .collect();
        write_comparison(&pipeline_dir, &runs, &pairs)?;
    }
    Ok(split(results).1)
}

/// Per-image analysis results for one condition.
#[derive(Debug, Clone, Default)]
struct ConditionAnalysis {
    cc: Vec<Option<f64>>,
    mae: Vec<f64>,
    metrics: Vec<(usize, GuidanceMetrics)>,
    segments: Vec<SegmentRecord>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn ci_cells(values: &[f64]) -> [String; 3] {
    if values.is_empty() {
        return [String::new(), String::new(), String::new()];
    }
    let (mean, ci) = mean_ci95(values);
    [
        mean.to_string(),
        fmt_opt(ci.map(|c| c.0)),
        fmt_opt(ci.map(|c| c.1)),
    ]
}

/// Density agreement, guidance metrics, segment features and their
/// correlations for every fixation condition.
pub fn cmd_analyze(
    ctx: &Context,
    conditions: &[Condition],
    reference: Option<&Condition>,
) -> Result<Report, CliError> {
    if conditions.is_empty() {
        return Err(CliError::Input(
            "analyze needs at least one --fixations file".into(),
        ));
    }
    let drop_first = ctx.config.density.drop_first_fixation;
    for c in conditions.iter().chain(reference) {
        c.require_retained(drop_first)?;
    }
    let dir = out_dir(ctx, &["analyze"])?;
    let objects_dir = out_dir(ctx, &["analyze", "objects"])?;
    let cfg = &ctx.config;

    let results = map_rows(ctx, |row| {
        let image = load_image(row)?;
        let (w, h) = (image.width(), image.height());
        let labels = match &row.labels_path {
            Some(p) => {
                let l = load_labels(p)?;
                if (l.width(), l.height()) != (w, h) {
                    return Err(CliError::Input("labels and image differ in size".into()));
                }
                Some(l)
            }
            None => {
                log::warn!(
                    "{}: no labels; excluded from segment and metric tables",
                    row.image_id
                );
                None
            }
        };
        let contours = contours_for(row, &image, cfg)?;
        let closed = labels
            .as_ref()
            .map(|l| closed_regions(l, cfg.closed_threshold));
        let reference_set = match reference {
            Some(r) => r.for_row(row)?,
            None => None,
        };

        let mut per_condition = Vec::new();
        let mut object_maps = Vec::new();
        for c in conditions {
            let mut out = ConditionAnalysis::default();
            let Some(set) = c.for_row(row)? else {
                per_condition.push(None);
                continue;
            };
            set.validate(w, h)?;
            if let Some(r) = reference_set {
                for &sigma in &cfg.cc_sigmas {
                    let params = lineguide::analytics::DensityParams {
                        sigma,
                        ..cfg.density
                    };
                    let a = density_map(set, w, h, &params)?.map;
                    let b = density_map(r, w, h, &params)?.map;
                    out.cc.push(cc(&a, &b).ok());
                    out.mae.push(mae(&normalize01(&a), &normalize01(&b))?);
                }
            }
            if let (Some(labels), Some(closed)) = (&labels, &closed) {
                if !set.retained(true).is_empty() {
                    for &n in &cfg.n_values {
                        out.metrics
                            .push((n, guidance_metrics(set, &contours.mask, closed, n)?));
                    }
                }
                let saliency = segment_saliency(labels, set, &cfg.density)?;
                object_maps.push(segment_saliency_map(labels, &saliency)?);
                for s in saliency {
                    out.segments.push(SegmentRecord {
                        image_id: row.image_id.clone(),
                        features: shape_features(labels, s.segment_id)?,
                        saliency: s,
                    });
                }
            }
            per_condition.push(Some(out));
        }
        if object_maps.len() >= 2 {
            let objects = hierarchical_objects(&object_maps[0], &object_maps[1])?;
            save_map(&objects, &objects_dir, &row.image_id)?;
        }
        Ok(per_condition)
    });
    let (ok, report) = split(results);

    // density agreement, one row per (image, condition)
    if reference.is_some() {
        let mut text = String::from("image_id,condition");
        for s in &cfg.cc_sigmas {
            text.push_str(&format!(",cc_sigma_{s}"));
        }
        for s in &cfg.cc_sigmas {
            text.push_str(&format!(",mae_sigma_{s}"));
        }
        text.push('\n');
        for (id, per) in &ok {
            for (c, a) in conditions.iter().zip(per) {
                let Some(a) = a else { continue };
                if a.cc.is_empty() {
                    continue;
                }
                text.push_str(&format!("{id},{}", c.name));
                for v in &a.cc {
                    text.push_str(&format!(",{}", fmt_opt(*v)));
                }
                for v in &a.mae {
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
        }
        save_text(text.into_bytes(), &dir.join("cc.csv"))?;
    }

    let mut metric_summary =
        String::from("condition,n,images,pof_mean,pof_ci_low,pof_ci_high,poc_mean,poc_ci_low,poc_ci_high,pofc_mean,pofc_ci_low,pofc_ci_high,pocc_mean,pocc_ci_low,pocc_ci_high\n");
    let mut correlations = String::from("condition,feature,r,degenerate,segments\n");
    for (ci, c) in conditions.iter().enumerate() {
        let rows: Vec<(&String, &ConditionAnalysis)> = ok
            .iter()
            .filter_map(|(id, per)| per[ci].as_ref().map(|a| (id, a)))
            .collect();

        let records: Vec<MetricsRecord> = rows
            .iter()
            .flat_map(|(id, a)| {
                a.metrics.iter().map(|(n, m)| MetricsRecord {
                    image_id: id.to_string(),
                    n: *n,
                    metrics: *m,
                })
            })
            .collect();
        save_text(
            csv_bytes(|b| write_metrics_csv(&records, b))?,
            &dir.join(format!("metrics_{}.csv", c.name)),
        )?;
        for &n in &cfg.n_values {
            let at_n: Vec<&GuidanceMetrics> = rows
                .iter()
                .flat_map(|(_, a)| a.metrics.iter().filter(|(k, _)| *k == n).map(|(_, m)| m))
                .collect();
            if at_n.is_empty() {
                continue;
            }
            let pof: Vec<f64> = at_n.iter().map(|m| m.pof).collect();
            let poc: Vec<f64> = at_n.iter().filter_map(|m| m.poc).collect();
            let pofc: Vec<f64> = at_n.iter().map(|m| m.pofc).collect();
            let pocc: Vec<f64> = at_n.iter().map(|m| m.pocc).collect();
            let mut line = format!("{},{n},{}", c.name, at_n.len());
            for values in [&pof, &poc, &pofc, &pocc] {
                for cell in ci_cells(values) {
                    line.push(',');
                    line.push_str(&cell);
                }
            }
            metric_summary.push_str(&line);
            metric_summary.push('\n');
        }

        let segments: Vec<SegmentRecord> = rows
            .iter()
            .flat_map(|(_, a)| a.segments.iter().cloned())
            .collect();
        save_text(
            csv_bytes(|b| write_segments_csv(&segments, b))?,
            &dir.join(format!("segments_{}.csv", c.name)),
        )?;
        if segments.len() >= 3 {
            let features: Vec<_> = segments.iter().map(|s| s.features).collect();
            let scores: Vec<f64> = segments.iter().map(|s| s.saliency.saliency_score).collect();
            for r in feature_correlation(&features, &scores)? {
                correlations.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.name,
                    r.feature,
                    r.r,
                    r.degenerate,
                    segments.len()
                ));
            }
        } else {
            eprintln!(
                "{}: fewer than 3 labelled segments; no feature correlations",
                c.name
            );
        }
    }
    save_text(
        metric_summary.into_bytes(),
        &dir.join("metrics_summary.csv"),
    )?;
    save_text(
        correlations.into_bytes(),
        &dir.join("feature_correlation.csv"),
    )?;
    Ok(report)
}
