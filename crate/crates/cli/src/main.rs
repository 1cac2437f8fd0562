mod check;
mod commands;
mod config;
mod error;
mod render;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thetaforge::cluster::{ClusterFlavor, Seed};
use thetaforge::lattice::{LatticeVec, Point};

use crate::config::{Format, JobConfig, Jseq, Source};
use crate::error::{CliError, CliResult};

/// Exact quantum scattering diagrams, theta functions and cluster mutations.
#[derive(Parser, Debug)]
#[command(name = "thetaforge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Truncation order k (1 <= k <= THETAFORGE_ORDER_CAP, default cap 12).
    #[arg(long, global = true)]
    order: Option<u32>,

    /// Seed JSON: {rank, frozen, D, B_numerators, basis?, lambda?}.
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "init")]
    seed: Option<PathBuf>,

    /// Initial data JSON: {omega | lattice, walls: [{direction, p?}]}.
    #[arg(long, global = true, value_name = "FILE")]
    init: Option<PathBuf>,

    /// Cluster flavor built from --seed.
    #[arg(long, global = true, value_parser = config::parse_flavor, default_value = "a")]
    flavor: ClusterFlavor,

    /// Endpoint of broken lines, "num/den,num/den" in chart coordinates.
    #[arg(long = "Q", global = true, value_parser = config::parse_point, allow_hyphen_values = true)]
    q: Option<Point>,

    /// Mutation sequence, 1-based: "1,2,1".
    #[arg(long, global = true, value_parser = config::parse_jseq)]
    jseq: Option<Jseq>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the main output here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// SVG viewport "x0,y0,x1,y1".
    #[arg(long, global = true, value_parser = config::parse_window, allow_hyphen_values = true)]
    window: Option<[f64; 4]>,

    /// Accepted for compatibility; arithmetic is always exact.
    #[arg(long, global = true, hide = true)]
    exact: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complete initial walls to a consistent diagram.
    Scatter {
        /// Also write an SVG drawing to this path.
        #[arg(long, value_name = "PATH")]
        svg: Option<PathBuf>,
    },
    /// Expand a theta function at Q by broken lines.
    Theta {
        #[arg(long, value_parser = config::parse_vec, allow_hyphen_values = true)]
        p: LatticeVec,
        /// Include the broken lines in JSON output.
        #[arg(long)]
        lines: bool,
    },
    /// Structure constants of theta_p1 * theta_p2.
    Product {
        #[arg(long, value_parser = config::parse_vec, allow_hyphen_values = true)]
        p1: LatticeVec,
        #[arg(long, value_parser = config::parse_vec, allow_hyphen_values = true)]
        p2: LatticeVec,
    },
    /// Mutate a seed along --jseq; report its chamber and cluster variables.
    Mutate {
        /// Also push the monomial z^p through the mutation sequence.
        #[arg(long, value_parser = config::parse_vec, allow_hyphen_values = true)]
        p: Option<LatticeVec>,
    },
    /// Refined DT invariants of a two-wall diagram.
    Dt {
        /// Kronecker parameter: walls on v1, v2 with omega(v1, v2) = n.
        #[arg(long, allow_hyphen_values = true)]
        n: Option<i64>,
        /// Input shifts "m1,m2": the inputs are EE(-t^m1 z^v1), EE(-t^m2 z^v2).
        #[arg(long, value_parser = config::parse_pair, default_value = "0,0", allow_hyphen_values = true)]
        shifts: [i64; 2],
    },
    /// Run the property matrix on a seed (default: A2).
    Check {
        /// Random samples per sampled property.
        #[arg(long, default_value_t = 6)]
        samples: usize,
    },
    /// Convert a completed diagram to another format.
    Export {
        /// Export the t = 1 limit instead.
        #[arg(long)]
        classical: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scatter { .. } => "scatter",
            Command::Theta { .. } => "theta",
            Command::Product { .. } => "product",
            Command::Mutate { .. } => "mutate",
            Command::Dt { .. } => "dt",
            Command::Check { .. } => "check",
            Command::Export { .. } => "export",
        }
    }

    fn default_order(&self) -> u32 {
        match self {
            Command::Check { .. } => 8,
            _ => 6,
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Check { .. } => Format::Text,
            _ => Format::Json,
        }
    }
}

fn job_config(cli: &Cli) -> CliResult<JobConfig> {
    let c = &cli.common;
    let cap = config::order_cap()?;
    let order = config::check_order(c.order.unwrap_or_else(|| cli.command.default_order().min(cap)), cap)?;
    let source = match (&c.seed, &c.init) {
        (Some(s), None) => Source::Seed(s.clone()),
        (None, Some(i)) => Source::Init(i.clone()),
        (None, None) => Source::None,
        (Some(_), Some(_)) => return Err(CliError::Usage("--seed and --init are mutually exclusive".into())),
    };
    Ok(JobConfig {
        command: cli.command.name(),
        source,
        order,
        flavor: c.flavor,
        format: c.format.unwrap_or_else(|| cli.command.default_format()),
        q: c.q.clone(),
        jseq: c.jseq.clone().unwrap_or_default().0,
        exact: true,
        out: c.out.clone(),
        window: c.window,
    })
}

fn run_check(cfg: &JobConfig, samples: usize) -> CliResult<commands::Output> {
    let ctx = match &cfg.source {
        Source::Init(_) => check::Context::from_diagram(commands::load_diagram(cfg)?, cfg.order, samples),
        Source::Seed(_) => check::Context::from_seed(commands::load_seed(cfg)?, cfg.order, samples)?,
        Source::None => check::Context::from_seed(Seed::a2(), cfg.order, samples)?,
    };
    let results = check::run_all(&ctx);
    let body = match cfg.format {
        Format::Text => check::table(&results),
        Format::Json => render::json_text(&json!({ "order": cfg.order, "exact": cfg.exact, "results": check::results_json(&results) })),
        _ => return Err(CliError::Usage(format!("`check` does not support --format {}", cfg.format.name()))),
    };
    let failed: Vec<&check::PropertyResult> = results.iter().filter(|r| r.status == check::Status::Fail).collect();
    let mut out = commands::Output { body, ..Default::default() };
    if !failed.is_empty() {
        out.failure = Some(format!("{} properties failed: {}", failed.len(), failed.iter().map(|r| r.name).collect::<Vec<_>>().join(", ")));
        out.reproducer = Some(json!({
            "order": cfg.order,
            "seed": ctx.seed.as_ref().map(Seed::to_json),
            "failures": failed.iter().map(|r| json!({
                "property": r.name,
                "detail": r.detail,
                "case": r.reproducer,
            })).collect::<Vec<_>>(),
        }));
    }
    Ok(out)
}

fn dispatch(cli: &Cli, cfg: &JobConfig) -> CliResult<commands::Output> {
    match &cli.command {
        Command::Scatter { svg } => commands::scatter(cfg, svg.clone()),
        Command::Theta { p, lines } => commands::theta(cfg, p, *lines),
        Command::Product { p1, p2 } => commands::product(cfg, p1, p2),
        Command::Mutate { p } => commands::mutate(cfg, p.as_ref()),
        Command::Dt { n, shifts } => commands::dt(cfg, *n, *shifts),
        Command::Check { samples } => run_check(cfg, *samples),
        Command::Export { classical } => commands::export(cfg, *classical),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn run(cli: &Cli) -> CliResult<bool> {
    let cfg = job_config(cli)?;
    let out = dispatch(cli, &cfg)?;
    match &cfg.out {
        Some(path) => write_file(path, &out.body)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
        }
    }
    for (path, text) in &out.extra {
        write_file(path, text)?;
    }
    if let Some(why) = &out.failure {
        eprintln!("thetaforge {}: {why}", cfg.command);
        if let Some(r) = &out.reproducer {
            eprint!("{}", render::json_text(r));
        }
        return Ok(false);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("thetaforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
