mod commands;
mod config;
mod error;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use commands::Run;
use config::Settings;
use error::{CliError, CliResult};
use output::{Manifest, OutDir};

#[derive(Parser)]
#[command(name = "mvtorus", version, about = "McKean-Vlasov dynamics on the circle: experiments and plot data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical inverse temperature of the uniform state (and growth rates at --beta).
    Critical(Common),
    /// Enumerate stationary states by solving the self-consistency equations.
    Branches(Common),
    /// Integrate the PDE from an initial density.
    Evolve(Common),
    /// Run the interacting particle system.
    Particles(Common),
    /// Linear-stability spectra (growth, second-variation or schroedinger).
    Spectrum(Common),
    /// Perturbative vs numerical Schroedinger eigenvalues.
    Perturb(Common),
    /// Design a confinement V that makes a target density stationary.
    #[command(name = "design-v")]
    DesignV(Common),
    /// Regenerate a figure or table data set.
    Reproduce {
        /// fig1, fig2, fig2b, fig3, fig3b, fig4a, fig4b, fig5..fig10, hkb, table1..table3
        #[arg(value_name = "TARGET")]
        figure: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest.json to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: a fresh directory under $MVTORUS_OUT or ./mvtorus-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    settings: Settings,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, target, common) = match cli.command {
        Command::Critical(c) => ("critical", None, c),
        Command::Branches(c) => ("branches", None, c),
        Command::Evolve(c) => ("evolve", None, c),
        Command::Particles(c) => ("particles", None, c),
        Command::Spectrum(c) => ("spectrum", None, c),
        Command::Perturb(c) => ("perturb", None, c),
        Command::DesignV(c) => ("design-v", None, c),
        Command::Reproduce { figure, common } => ("reproduce", Some(figure), common),
    };

    let requested = common.out.clone();
    let mut out_path = None;
    let result = execute(name, target.as_deref(), common, &mut out_path);
    match result {
        Ok(dir) => {
            println!("output: {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = e.record(name);
            let text = serde_json::to_string_pretty(&record).unwrap_or_else(|_| e.to_string());
            let fallback = requested.filter(|d| is_empty_or_missing(d));
            if let Some(dir) = out_path.or(fallback) {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), &text);
                }
            }
            eprintln!("{text}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn is_empty_or_missing(dir: &std::path::Path) -> bool {
    std::fs::read_dir(dir).map_or(true, |mut it| it.next().is_none())
}

fn execute(name: &str, target: Option<&str>, common: Common, out_path: &mut Option<PathBuf>) -> CliResult<PathBuf> {
    let settings = match &common.config {
        Some(path) => Settings::load(path)?.overlay(&common.settings)?,
        None => common.settings,
    };
    if let Some(t) = target {
        if !reproduce::TARGETS.contains(&t) {
            return Err(CliError::UnknownTarget(t.to_owned()));
        }
    }
    let label = target.map_or_else(|| name.to_owned(), |t| format!("{name}-{t}"));
    let out = OutDir::create(common.out.as_deref(), &label, common.force)?;
    *out_path = Some(out.path().to_path_buf());

    let started = Instant::now();
    let mut run = Run::new(settings, out);
    match (name, target) {
        ("critical", _) => commands::critical(&mut run)?,
        ("branches", _) => commands::branches(&mut run)?,
        ("evolve", _) => commands::evolve_cmd(&mut run)?,
        ("particles", _) => commands::particles_cmd(&mut run)?,
        ("spectrum", _) => commands::spectrum(&mut run)?,
        ("perturb", _) => commands::perturb(&mut run)?,
        ("design-v", _) => commands::design_v(&mut run)?,
        (_, Some(t)) => reproduce::reproduce(t, &mut run)?,
        _ => unreachable!("reproduce always carries a target"),
    }

    let mut manifest = Manifest::new(name, run.settings.clone());
    manifest.target = target.map(str::to_owned);
    manifest.seeds = run.seeds;
    manifest.wall_time = started.elapsed().as_secs_f64();
    manifest.summary = run.summary;
    manifest.notes = run.notes;
    run.out.finish(manifest)
}
