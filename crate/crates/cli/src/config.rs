//! Flat `section.key=value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lineguide::analytics::DensityParams;
use lineguide::closure::ClosureParams;
use lineguide::contour::EdgeParams;
use lineguide::gmm::PriorParams;
use lineguide::saliency::{IttiParams, SigParams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub edges: EdgeParams,
    pub closure: ClosureParams,
    pub prior: PriorParams,
    pub itti: IttiParams,
    pub sig: SigParams,
    pub density: DensityParams,
    /// Dilation sizes for the guidance-metric sweep.
    pub n_values: Vec<usize>,
    /// Blur sigmas for the density correlation sweep.
    pub cc_sigmas: Vec<f64>,
    pub closed_threshold: f64,
    /// Blur applied to every map before ROC scoring; 0 disables it.
    pub eval_blur_sigma: f64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses one per core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            edges: EdgeParams::default(),
            closure: ClosureParams::default(),
            prior: PriorParams::default(),
            itti: IttiParams::default(),
            sig: SigParams::default(),
            density: DensityParams::default(),
            n_values: (3..=21).step_by(2).collect(),
            cc_sigmas: vec![8.0, 16.0, 32.0],
            closed_threshold: 0.9,
            eval_blur_sigma: 0.0,
            output_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("config {key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Input(format!(
            "config {key}: expected true or false, got {value:?}"
        ))),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "edges.high_threshold" => self.edges.high_threshold = parse(key, v)?,
            "edges.low_threshold" => self.edges.low_threshold = parse(key, v)?,
            "edges.min_chain_length" => self.edges.min_chain_length = parse(key, v)?,
            "closure.directions" => self.closure.directions = parse(key, v)?,
            "closure.max_ray_length" => {
                self.closure.max_ray_length = if v == "diagonal" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "closure.stride" => self.closure.stride = parse(key, v)?,
            "prior.components" => self.prior.components = parse(key, v)?,
            "prior.max_em_iters" => self.prior.max_em_iters = parse(key, v)?,
            "prior.loglik_rel_tol" => self.prior.loglik_rel_tol = parse(key, v)?,
            "prior.covariance_floor" => self.prior.covariance_floor = parse(key, v)?,
            "prior.rng_seed" => self.prior.rng_seed = parse(key, v)?,
            "itti.pyramid_levels" => self.itti.pyramid_levels = parse(key, v)?,
            "itti.center_levels" => self.itti.center_levels = parse_list(key, v)?,
            "itti.surround_deltas" => self.itti.surround_deltas = parse_list(key, v)?,
            "itti.orientation_count" => self.itti.orientation_count = parse(key, v)?,
            "itti.output_level" => self.itti.output_level = parse(key, v)?,
            "sig.working_width" => self.sig.working_width = parse(key, v)?,
            "sig.working_height" => self.sig.working_height = parse(key, v)?,
            "sig.blur_sigma" => self.sig.blur_sigma = parse(key, v)?,
            "density.sigma" => self.density.sigma = parse(key, v)?,
            "density.drop_first_fixation" => self.density.drop_first_fixation = parse_bool(key, v)?,
            "analysis.n_values" => self.n_values = parse_list(key, v)?,
            "analysis.cc_sigmas" => self.cc_sigmas = parse_list(key, v)?,
            "analysis.closed_threshold" => self.closed_threshold = parse(key, v)?,
            "eval.blur_sigma" => self.eval_blur_sigma = parse(key, v)?,
            "run.output_dir" => self.output_dir = PathBuf::from(v),
            "run.threads" => self.threads = parse(key, v)?,
            other => return Err(CliError::Input(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` line, as given to `--set`.
    pub fn assign(&mut self, line: &str) -> Result<(), CliError> {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("expected key=value, got {line:?}")))?;
        self.set(key, value)
    }

    /// Reads a config file: one `key=value` per line, `#` starts a comment.
    pub fn load(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line)
                .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    /// Every key with its current value, in a form [`RunConfig::load`] accepts.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        line(
            "edges.high_threshold",
            self.edges.high_threshold.to_string(),
        );
        line("edges.low_threshold", self.edges.low_threshold.to_string());
        line(
            "edges.min_chain_length",
            self.edges.min_chain_length.to_string(),
        );
        line("closure.directions", self.closure.directions.to_string());
        line(
            "closure.max_ray_length",
            self.closure
                .max_ray_length
                .map_or("diagonal".to_string(), |v| v.to_string()),
        );
        line("closure.stride", self.closure.stride.to_string());
        line("prior.components", self.prior.components.to_string());
        line("prior.max_em_iters", self.prior.max_em_iters.to_string());
        line(
            "prior.loglik_rel_tol",
            self.prior.loglik_rel_tol.to_string(),
        );
        line(
            "prior.covariance_floor",
            self.prior.covariance_floor.to_string(),
        );
        line("prior.rng_seed", self.prior.rng_seed.to_string());
        line("itti.pyramid_levels", self.itti.pyramid_levels.to_string());
        line("itti.center_levels", join(&self.itti.center_levels));
        line("itti.surround_deltas", join(&self.itti.surround_deltas));
        line(
            "itti.orientation_count",
            self.itti.orientation_count.to_string(),
        );
        line("itti.output_level", self.itti.output_level.to_string());
        line("sig.working_width", self.sig.working_width.to_string());
        line("sig.working_height", self.sig.working_height.to_string());
        line("sig.blur_sigma", self.sig.blur_sigma.to_string());
        line("density.sigma", self.density.sigma.to_string());
        line(
            "density.drop_first_fixation",
            self.density.drop_first_fixation.to_string(),
        );
        line("analysis.n_values", join(&self.n_values));
        line("analysis.cc_sigmas", join(&self.cc_sigmas));
        line(
            "analysis.closed_threshold",
            self.closed_threshold.to_string(),
        );
        line("eval.blur_sigma", self.eval_blur_sigma.to_string());
        line("run.output_dir", self.output_dir.display().to_string());
        line("run.threads", self.threads.to_string());
        out
    }

    /// Checks every parameter record before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.edges.validate()?;
        self.closure.validate()?;
        self.prior.validate()?;
        self.itti.validate()?;
        self.sig.validate()?;
        self.density.validate()?;
        if let Some(n) = self.n_values.iter().find(|&&n| n == 0 || n % 2 == 0) {
            return Err(CliError::Input(format!(
                "analysis.n_values: {n} is not a positive odd size"
            )));
        }
        if let Some(s) = self.cc_sigmas.iter().find(|&&s| !(s > 0.0)) {
            return Err(CliError::Input(format!(
                "analysis.cc_sigmas: {s} is not positive"
            )));
        }
        if !(0.0..=1.0).contains(&self.closed_threshold) {
            return Err(CliError::Input(
                "analysis.closed_threshold must lie in [0, 1]".into(),
            ));
        }
        if !(self.eval_blur_sigma >= 0.0) {
            return Err(CliError::Input(
                "eval.blur_sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }
}
