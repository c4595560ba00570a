use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use hodgelab::error::Error;
use hodgelab::family::CATALOG;
use hodgelab::harness::{convergence_sweep, parse_config, plot, run_suite, Pipeline, RunConfig, SweepParam};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hodgelab", version, about = "Curvature of Hodge bundles over families of complex tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Identities,
    Curvature,
    Finsler,
    Degeneration,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    #[value(name = "N")]
    N,
    #[value(name = "h")]
    H,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline and write summary.json and CSV tables
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        pipeline: PipelineArg,
        /// output directory (overrides `out` in the config)
        #[arg(long)]
        out: Option<PathBuf>,
        /// also write SVG figures
        #[arg(long)]
        plots: bool,
    },
    /// Refine N or h and fit the order of convergence
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// refinement levels, at least 3
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(3..))]
        levels: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the scenario catalog
    Catalog {
        /// print JSON instead of a table
        #[arg(long)]
        json: bool,
    },
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn catalog(json: bool) -> anyhow::Result<()> {
    if json {
        let rows: Vec<_> = CATALOG
            .iter()
            .map(|e| {
                serde_json::json!({
                    "id": e.id, "kind": e.kind, "regime": e.regime, "period_map": e.period_map,
                    "weight": e.weight, "degree": e.degree, "description": e.description,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    println!("{:<22} {:<13} {:<9} {:>3}  {}", "id", "kind", "regime", "d", "description");
    for e in CATALOG {
        let kind = serde_json::to_value(e.kind)?;
        println!("{:<22} {:<13} {:<9} {:>3}  {}", e.id, kind.as_str().unwrap_or(""), e.regime, e.degree, e.description);
        println!("{:<22} τ: {}   φ: {}", "", e.period_map, e.weight);
    }
    Ok(())
}

fn run(config: &Path, pipeline: PipelineArg, out: Option<PathBuf>, plots: bool) -> ExitCode {
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(o) = out {
        cfg.out = o;
    }
    cfg.plots |= plots;
    let pipeline = match pipeline {
        PipelineArg::Identities => Pipeline::Identities,
        PipelineArg::Curvature => Pipeline::Curvature,
        PipelineArg::Finsler => Pipeline::Finsler,
        PipelineArg::Degeneration => Pipeline::Degeneration,
        PipelineArg::All => Pipeline::All,
    };
    let outcome = match run_suite(&cfg, pipeline) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let s = &outcome.summary;
    for (sc, (_, dt)) in s.scenarios.iter().zip(&outcome.timings) {
        let failed = sc.checks.iter().filter(|c| !c.pass).count();
        let status = if sc.error.is_some() {
            "ERROR"
        } else if failed > 0 {
            "FAIL"
        } else {
            "PASS"
        };
        println!("{status:<5} {:<22} {} checks, {failed} failed, {:.1} s", sc.scenario, sc.checks.len(), dt.as_secs_f64());
        for c in sc.checks.iter().filter(|c| !c.pass) {
            println!("      {}: {:.6e} {} {:.3e}", c.name, c.value, c.relation, c.bound);
        }
        if let Some(e) = &sc.error {
            println!("      {}: {}", e.kind, e.message);
        }
        for w in &sc.warnings {
            println!("      warning: {w}");
        }
    }
    println!("summary written to {}", cfg.out.join("summary.json").display());
    ExitCode::from(s.exit_code as u8)
}

fn sweep(config: &Path, param: ParamArg, levels: usize, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(o) = out {
        cfg.out = o;
    }
    let param = match param {
        ParamArg::N => SweepParam::N,
        ParamArg::H => SweepParam::H,
    };
    let table = match convergence_sweep(&cfg, param, levels) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let name = match param {
        SweepParam::N => "N",
        SweepParam::H => "h",
    };
    println!("{} sweep of {} on {}", name, table.metric, table.scenario);
    println!("{:>12} {:>14}", name, "residual");
    for l in &table.levels {
        println!("{:>12.4e} {:>14.6e}", l.value, l.residual);
    }
    match (table.order, table.r2) {
        (Some(o), Some(r2)) => println!("order {o:.3} (R² = {r2:.4})"),
        _ if table.at_floor => println!("all residuals at the rounding floor"),
        _ => println!("order not available"),
    }
    if !table.monotone {
        println!("warning: residuals are not monotone");
    }
    let written = (|| -> anyhow::Result<()> {
        std::fs::create_dir_all(&cfg.out)?;
        let path = cfg.out.join(format!("sweep-{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&table)? + "\n").with_context(|| path.display().to_string())?;
        if cfg.plots {
            let pts: Vec<(f64, f64)> = table.levels.iter().map(|l| (l.value, l.residual)).collect();
            let svg = plot::line_plot(&format!("{} sweep, {}", name, table.scenario), name, "residual", &[(table.metric, pts)], true);
            std::fs::write(cfg.out.join(format!("sweep-{name}.svg")), svg)?;
        }
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, pipeline, out, plots } => run(&config, pipeline, out, plots),
        Command::Sweep { config, param, levels, out } => sweep(&config, param, levels as usize, out),
        Command::Catalog { json } => match catalog(json) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
