use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use splitlab::experiment::{
    csv_out, figures_header, run_check, run_config, run_figures, run_table, table_header, CheckKind, ExperimentConfig, ProblemKind, ReactionFlow,
    RunOutput, Status,
};
use splitlab::{Error, Method, OperatorKind, OrderKind};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "splitlab", version, about = "Operator splitting convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce an order table (1-5).
    Table { id: u8 },
    /// Order-ratio series for the three-operator split.
    Figures,
    /// Numerical sanity checks: commutation, wave, exponential.
    Check { kind: String },
    /// Run a single configuration.
    Run,
}

#[derive(Args)]
struct Opts {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    problem: Option<String>,
    /// seq, strang (ms), sw or weighted(w).
    #[arg(long, global = true)]
    scheme: Option<String>,
    #[arg(long, global = true)]
    integrator: Option<String>,
    /// Comma-separated operators, first applied first.
    #[arg(long, global = true)]
    sequence: Option<String>,
    #[arg(long, global = true)]
    substep_ratio: Option<f64>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, global = true)]
    tau_ladder: Option<String>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    grid_cells: Option<usize>,
    /// exact or numerical.
    #[arg(long, global = true)]
    reaction_flow: Option<String>,
    /// local or global.
    #[arg(long, global = true)]
    order: Option<String>,
    #[arg(long, global = true)]
    reference_step: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

impl Opts {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
                ExperimentConfig::from_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.problem {
            c.problem = ProblemKind::parse(p)?;
            if self.sequence.is_none() && c.problem != ProblemKind::Bench {
                c.sequence = c.problem.operators();
            }
        }
        if let Some(s) = &self.scheme {
            c.scheme = s.clone();
        }
        if let Some(m) = &self.integrator {
            c.integrator = m.parse::<Method>()?;
        }
        if let Some(s) = &self.sequence {
            c.sequence = s
                .split(',')
                .map(|x| x.trim().parse::<OperatorKind>())
                .collect::<Result<_, _>>()?;
        }
        if let Some(r) = self.substep_ratio {
            c.substep_ratio = r;
        }
        if let Some(l) = &self.tau_ladder {
            c.tau_ladder = splitlab::TauLadder::parse(l)?.taus().to_vec();
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        if let Some(n) = self.grid_cells {
            c.grid_cells = n;
        }
        if let Some(f) = &self.reaction_flow {
            c.reaction_flow = ReactionFlow::parse(f)?;
        }
        if let Some(o) = &self.order {
            c.order = match o.as_str() {
                "local" => OrderKind::Local,
                "global" => OrderKind::Global,
                other => return Err(Error::config("order", format!("unknown order kind `{other}`"))),
            };
        }
        if let Some(r) = self.reference_step {
            c.reference_step = r;
        }
        if let Some(o) = &self.out {
            c.out = Some(o.display().to_string());
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_out(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

fn status_mark(s: Status) -> &'static str {
    match s {
        Status::Pass => "ok",
        Status::Fail => "FAIL",
        Status::Info => "",
    }
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let config = cli.opts.config()?;
    let out = PathBuf::from(config.out.clone().unwrap_or_else(|| "results".into()));
    let header = config.to_json();
    let io = |r: anyhow::Result<()>| r.map_err(|e| Error::config("out", format!("{e:#}")));
    match &cli.command {
        Command::Table { id } => {
            let report = run_table(*id, config.workers)?;
            let header = table_header(*id, config.workers)?;
            io(write_out(&out, &format!("table{id}.csv"), &csv_out::table_data(&report, &header)))?;
            io(write_out(&out, &format!("table{id}_summary.csv"), &csv_out::table_summary(&report, &header)))?;
            println!("table {id}: {}", report.description);
            println!("{:<34} {:<9} {:>9} {:>9} {:>8}  status", "scheme", "method", "measured", "published", "delta");
            for c in &report.cells {
                println!(
                    "{:<34} {:<9} {:>9.3} {:>9} {:>8}  {}",
                    c.label,
                    c.integrator.to_string(),
                    c.estimate.order,
                    fmt_opt(c.published),
                    fmt_opt(c.published.map(|p| c.estimate.order - p)),
                    status_mark(c.status)
                );
            }
            for x in &report.extras {
                println!("{:<44} {:>9.4} {:>9.3} {:>8}  {}", x.name, x.measured, x.expected, "", status_mark(x.status));
            }
            Ok(true)
        }
        Command::Figures => {
            let report = run_figures(config.workers)?;
            let header = figures_header(config.workers);
            io(write_out(&out, "figures.csv", &csv_out::figures(&report, &header)))?;
            for s in &report.series {
                let rhos: Vec<String> = s.estimate.pairwise.iter().map(|r| fmt_opt(*r)).collect();
                println!(
                    "{:<18} {:<40} {:<6} order {:.3}  rho [{}] {}",
                    s.figure,
                    s.label,
                    s.integrator.to_string(),
                    s.estimate.order,
                    rhos.join(", "),
                    status_mark(s.status)
                );
            }
            Ok(true)
        }
        Command::Check { kind } => {
            let kind = CheckKind::parse(kind)?;
            let report = run_check(kind)?;
            let header = format!("{{\"check\":\"{kind:?}\"}}").to_lowercase();
            let name = format!("check_{kind:?}.csv").to_lowercase();
            io(write_out(&out, &name, &csv_out::check(&report, &header)))?;
            if let Some(w) = &report.wave {
                for (n, e) in &w.levels {
                    println!("N = {n:<4} max error {e:.3e}");
                }
            }
            for l in &report.lines {
                println!("{:<52} {:>12.4e}  {}", l.name, l.measured, status_mark(l.status));
            }
            Ok(report.passed())
        }
        Command::Run => {
            let output = run_config(&config)?;
            io(write_out(&out, "run.csv", &csv_out::run(&output, &header)))?;
            match &output {
                RunOutput::Order(c) => {
                    println!("{} {} order {:.4}", c.label, c.integrator, c.estimate.order);
                    for (i, (t, e)) in c.estimate.taus.iter().zip(&c.estimate.errors).enumerate() {
                        let rho = c.estimate.pairwise.get(i).copied().flatten();
                        println!("  tau {t:<8} error {e:.4e}  rho {}", fmt_opt(rho));
                    }
                }
                RunOutput::Wave(w) => {
                    for (n, e) in &w.levels {
                        println!("N = {n:<4} max error {e:.3e}");
                    }
                    println!("spatial order {:.3}", w.spatial_order);
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
    }
}
