use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use vividmap_core::geo::{parse_feature_collection_all, parse_region};
use vividmap_core::{
    ingest, load_ontology, render_view, scene_view, Bbox, Dataset, IconRegistry, Mode, Ontology,
    Region, ViewState, Viewport,
};
use vividmap_service::{Config, DEFAULT_MAX_BODY_BYTES};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Category maps with per-category opacity: validate, count, render and serve.
///
/// Exit codes: 0 success, 1 validation error, 2 I/O error, 64 usage error.
/// Errors are written to stderr as one JSON object per line.
#[derive(Debug, Parser)]
#[command(name = "vividmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a GeoJSON file against the ontology and report every error.
    Validate {
        geojson: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
    },
    /// Print how many features of a category intersect a region.
    Count {
        geojson: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        category: String,
        /// JSON ring `[[lon,lat],...]` or GeoJSON Polygon.
        #[arg(long)]
        region: PathBuf,
    },
    /// Render the 2D map as SVG.
    Render(ViewArgs),
    /// Export the 3D scene as JSON.
    Scene(ViewArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "VIVIDMAP_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "VIVIDMAP_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "VIVIDMAP_ONTOLOGY")]
        ontology: PathBuf,
        /// Directory served under /icons/.
        #[arg(long, env = "VIVIDMAP_ICONS")]
        icons: Option<PathBuf>,
        /// JSON file restored on startup and written on shutdown.
        #[arg(long, env = "VIVIDMAP_SNAPSHOT")]
        snapshot: Option<PathBuf>,
        #[arg(long, env = "VIVIDMAP_MAX_BODY_MB")]
        max_body_mb: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct ViewArgs {
    geojson: PathBuf,
    #[arg(long)]
    ontology: PathBuf,
    /// West,south,east,north in degrees.
    #[arg(long, allow_hyphen_values = true)]
    bbox: Bbox,
    /// Viewport as WIDTHxHEIGHT pixels.
    #[arg(long)]
    size: Viewport,
    /// Category slider as `category=alpha`, alpha in [0, 1]. Repeatable.
    #[arg(long, value_parser = parse_opacity)]
    opacity: Vec<(String, f64)>,
    /// Uncheck a category. Repeatable.
    #[arg(long)]
    hide: Vec<String>,
    /// Annotation ring drawn on top of the map. Repeatable.
    #[arg(long)]
    region: Vec<PathBuf>,
    /// Icon reference prefix used in scene exports.
    #[arg(long, default_value = "/icons")]
    icon_base: String,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

fn parse_opacity(s: &str) -> Result<(String, f64), String> {
    let (cat, alpha) = s
        .split_once('=')
        .ok_or_else(|| format!("expected category=alpha, got `{s}`"))?;
    let alpha: f64 = alpha
        .trim()
        .parse()
        .map_err(|_| format!("alpha `{alpha}` is not a number"))?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(format!("alpha {alpha} outside [0, 1]"));
    }
    Ok((cat.trim().to_string(), alpha))
}

/// A failure reported as JSON lines on stderr.
struct Failure {
    exit: u8,
    errors: Vec<Value>,
}

impl Failure {
    fn one(exit: u8, code: &str, message: impl std::fmt::Display) -> Self {
        Self {
            exit,
            errors: vec![json!({ "code": code, "message": message.to_string() })],
        }
    }

    fn usage(code: &str, message: impl std::fmt::Display) -> Self {
        Self::one(EXIT_USAGE, code, message)
    }

    fn validation(code: &str, message: impl std::fmt::Display) -> Self {
        Self::one(EXIT_VALIDATION, code, message)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::one(EXIT_IO, "io_error", format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::one(EXIT_IO, "io_error", format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ontology(path: &Path) -> Result<Arc<Ontology>, Failure> {
    load_ontology(&read(path)?)
        .map(Arc::new)
        .map_err(|e| Failure::validation(e.code(), e))
}

fn dataset(path: &Path, ontology: Arc<Ontology>) -> Result<Dataset, Failure> {
    let features = parse_feature_collection_all(&read(path)?).map_err(|errs| Failure {
        exit: EXIT_VALIDATION,
        errors: errs
            .iter()
            .map(|e| json!({ "code": e.code(), "feature_index": e.feature_index(), "message": e.to_string() }))
            .collect(),
    })?;
    ingest(features, ontology, None).map_err(|e| Failure::validation(e.code(), e))
}

fn region(path: &Path) -> Result<Region, Failure> {
    parse_region(&read(path)?).map_err(|e| Failure::validation("bad_region", e))
}

fn view_state(args: &ViewArgs, mode: Mode, ontology: &Ontology) -> Result<ViewState, Failure> {
    let mut view = ViewState::new(mode, args.bbox, args.size, ontology);
    for (cat, alpha) in &args.opacity {
        view = view
            .set_opacity(ontology, cat, *alpha)
            .map_err(|e| Failure::usage("bad_opacity", e))?;
    }
    for cat in &args.hide {
        view = view
            .set_visibility(ontology, cat, false)
            .map_err(|e| Failure::usage("bad_hide", e))?;
    }
    view.annotations = args
        .region
        .iter()
        .map(|p| region(p))
        .collect::<Result<_, _>>()?;
    Ok(view)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate {
            geojson,
            ontology: cfg,
        } => {
            let d = dataset(&geojson, ontology(&cfg)?)?;
            let report = json!({
                "valid": true,
                "feature_count": d.len(),
                "categories_present": d.categories_present(),
            });
            println!("{report}");
        }
        Command::Count {
            geojson,
            ontology: cfg,
            category,
            region: ring,
        } => {
            let d = dataset(&geojson, ontology(&cfg)?)?;
            let region = region(&ring)?;
            let n = d
                .count_in_region(&region, &category)
                .map_err(|e| Failure::usage(e.code(), e))?;
            println!("{n}");
        }
        Command::Render(args) => {
            let d = dataset(&args.geojson, ontology(&args.ontology)?)?;
            let view = view_state(&args, Mode::TwoD, d.ontology())?;
            let svg = render_view(&d, &view).map_err(|e| Failure::validation("render_error", e))?;
            write(args.output.as_deref(), &svg)?;
        }
        Command::Scene(args) => {
            let d = dataset(&args.geojson, ontology(&args.ontology)?)?;
            let view = view_state(&args, Mode::ThreeD, d.ontology())?;
            let icons = IconRegistry::new(args.icon_base.clone());
            let scene =
                scene_view(&d, &view, &icons).map_err(|e| Failure::validation("scene_error", e))?;
            write(args.output.as_deref(), &scene.to_json())?;
        }
        Command::Serve {
            port,
            host,
            ontology,
            icons,
            snapshot,
            max_body_mb,
        } => {
            let mut config = Config::new(ontology);
            config.port = port;
            config.host = host;
            config.icon_dir = icons;
            config.snapshot_path = snapshot;
            config.max_body_bytes =
                max_body_mb.map_or(DEFAULT_MAX_BODY_BYTES, |mb| mb * 1024 * 1024);
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| Failure::one(EXIT_IO, "io_error", e))?;
            runtime
                .block_on(vividmap_service::serve(config))
                .map_err(|e| Failure::one(EXIT_IO, "serve_error", e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let message = message
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!("{}", json!({ "code": "usage", "message": message }));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            for e in f.errors {
                eprintln!("{e}");
            }
            ExitCode::from(f.exit)
        }
    }
}
