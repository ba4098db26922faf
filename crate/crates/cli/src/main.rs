#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Condition, Context, Model, Report};
use config::RunConfig;
use error::CliError;

/// Closure-guided saliency: contours, closure maps, spatial priors, saliency
/// models, fixation analytics and ROC evaluation.
#[derive(Debug, Parser)]
#[command(name = "lineguide", version)]
struct Cli {
    /// Configuration file of `key=value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory; overrides run.output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides run.threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct ManifestArg {
    /// Image manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    It,
    Sig,
    Both,
}

impl ModelArg {
    fn models(self) -> Vec<Model> {
        match self {
            ModelArg::It => vec![Model::It],
            ModelArg::Sig => vec![Model::Sig],
            ModelArg::Both => vec![Model::It, Model::Sig],
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Contour masks and edge chains.
    Contours(ManifestArg),
    /// Closure-degree maps.
    Closure(ManifestArg),
    /// Spatial priors fitted to closure maps.
    Prior(ManifestArg),
    /// Bottom-up saliency maps.
    Saliency {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long, value_enum, default_value = "both")]
        model: ModelArg,
    },
    /// Guided maps from saved saliency and prior maps.
    Combine {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long, value_enum, default_value = "both")]
        model: ModelArg,
    },
    /// Fixation density maps.
    Density {
        #[command(flatten)]
        manifest: ManifestArg,
        /// Fixation CSV as `[NAME=]PATH`; repeatable.
        #[arg(long, required = true)]
        fixations: Vec<String>,
    },
    /// Density agreement, guidance metrics and segment shape analysis.
    Analyze {
        #[command(flatten)]
        manifest: ManifestArg,
        /// Fixation CSV per viewing condition as `[NAME=]PATH`; repeatable.
        #[arg(long, required = true)]
        fixations: Vec<String>,
        /// Fixations every condition is compared against.
        #[arg(long)]
        reference_fixations: Option<String>,
    },
    /// ROC scoring of saved maps.
    Eval {
        #[command(flatten)]
        manifest: ManifestArg,
        /// Ground-truth fixation CSV.
        #[arg(long)]
        fixations: String,
        /// Map directory as `NAME=DIR`; repeatable. Defaults to every
        /// saliency and guided directory under the output directory.
        #[arg(long = "map-dir", value_name = "NAME=DIR")]
        map_dirs: Vec<String>,
        /// Paired comparison as `BASELINE,GUIDED`; repeatable.
        #[arg(long = "pair", value_name = "BASELINE,GUIDED")]
        pairs: Vec<String>,
    },
    /// Every stage end to end, with scoring when fixations are given.
    Pipeline {
        #[command(flatten)]
        manifest: ManifestArg,
        #[arg(long, value_enum, default_value = "both")]
        model: ModelArg,
        /// Fixation CSV; when given, baseline and guided maps are scored.
        #[arg(long)]
        fixations: Option<String>,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        config.load(path)?;
    }
    for line in &cli.set {
        config.assign(line)?;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(t) = cli.threads {
        config.threads = t;
    }
    config.validate()?;
    Ok(config)
}

fn parse_map_dir(spec: &str) -> Result<(String, PathBuf), CliError> {
    match spec.split_once('=') {
        Some((name, dir)) if !name.is_empty() && !dir.is_empty() => {
            Ok((name.to_string(), PathBuf::from(dir)))
        }
        _ => Err(CliError::Input(format!(
            "--map-dir expects NAME=DIR, got {spec:?}"
        ))),
    }
}

fn parse_pair(spec: &str) -> Result<(String, String), CliError> {
    match spec.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(CliError::Input(format!(
            "--pair expects BASELINE,GUIDED, got {spec:?}"
        ))),
    }
}

type MapDirs = Vec<(String, PathBuf)>;
type Pairs = Vec<(String, String)>;

/// Saliency and guided directories already present under the output root.
fn default_map_dirs(config: &RunConfig) -> (MapDirs, Pairs) {
    let mut dirs = Vec::new();
    let mut pairs = Vec::new();
    for model in [Model::It, Model::Sig] {
        let base = config.output_dir.join("saliency").join(model.name());
        let guided = config.output_dir.join("guided").join(model.name());
        if base.is_dir() {
            dirs.push((model.name().to_string(), base.clone()));
        }
        if guided.is_dir() {
            dirs.push((model.guided_name(), guided.clone()));
        }
        if base.is_dir() && guided.is_dir() {
            pairs.push((model.name().to_string(), model.guided_name()));
        }
    }
    (dirs, pairs)
}

fn run(cli: Cli) -> Result<Report, CliError> {
    let config = build_config(&cli)?;
    if cli.dump_config {
        print!("{}", config.dump());
        return Ok(Report::default());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Input("no subcommand given; see --help".into()));
    };
    let manifest = match &command {
        Command::Contours(m) | Command::Closure(m) | Command::Prior(m) => m,
        Command::Saliency { manifest, .. }
        | Command::Combine { manifest, .. }
        | Command::Density { manifest, .. }
        | Command::Analyze { manifest, .. }
        | Command::Eval { manifest, .. }
        | Command::Pipeline { manifest, .. } => manifest,
    };
    let rows = manifest::read_manifest(&manifest.manifest)?;
    let ctx = Context { config, rows };
    let load_all = |specs: &[String]| {
        specs
            .iter()
            .map(|s| Condition::load(s))
            .collect::<Result<Vec<_>, _>>()
    };
    match command {
        Command::Contours(_) => commands::cmd_contours(&ctx),
        Command::Closure(_) => commands::cmd_closure(&ctx),
        Command::Prior(_) => commands::cmd_prior(&ctx),
        Command::Saliency { model, .. } => commands::cmd_saliency(&ctx, &model.models()),
        Command::Combine { model, .. } => commands::cmd_combine(&ctx, &model.models()),
        Command::Density { fixations, .. } => commands::cmd_density(&ctx, &load_all(&fixations)?),
        Command::Analyze {
            fixations,
            reference_fixations,
            ..
        } => {
            let conditions = load_all(&fixations)?;
            let reference = reference_fixations
                .as_deref()
                .map(Condition::load)
                .transpose()?;
            commands::cmd_analyze(&ctx, &conditions, reference.as_ref())
        }
        Command::Eval {
            fixations,
            map_dirs,
            pairs,
            ..
        } => {
            let fixations = Condition::load(&fixations)?;
            let (maps, pairs) = if map_dirs.is_empty() {
                let (maps, auto_pairs) = default_map_dirs(&ctx.config);
                let pairs = if pairs.is_empty() {
                    auto_pairs
                } else {
                    pairs
                        .iter()
                        .map(|p| parse_pair(p))
                        .collect::<Result<_, _>>()?
                };
                (maps, pairs)
            } else {
                (
                    map_dirs
                        .iter()
                        .map(|m| parse_map_dir(m))
                        .collect::<Result<_, _>>()?,
                    pairs
                        .iter()
                        .map(|p| parse_pair(p))
                        .collect::<Result<_, _>>()?,
                )
            };
            if maps.is_empty() {
                return Err(CliError::Input("no map directories to score".into()));
            }
            commands::cmd_eval(&ctx, &fixations, &maps, &pairs)
        }
        Command::Pipeline {
            model, fixations, ..
        } => {
            let fixations = fixations.as_deref().map(Condition::load).transpose()?;
            commands::cmd_pipeline(&ctx, &model.models(), fixations.as_ref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            if !report.failures.is_empty() {
                eprintln!("{} image(s) failed", report.failures.len());
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
