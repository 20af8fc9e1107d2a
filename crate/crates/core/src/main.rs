use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jetvar::frontend::pipeline::{self, is_refusal, run_scoped, Options, Scope};
use jetvar::frontend::{fixtures, load, Model, Report, Status};

#[derive(Parser)]
#[command(
    name = "jetvar",
    version,
    about = "Symbolic jet-bundle calculus for variational problems"
)]
struct Cli {
    /// Write a JSON report to this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Jet order for integrability checks and spatial towers.
    #[arg(long, global = true, default_value_t = 4)]
    max_order: u32,
    /// Print details of passing checks too.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and compare against the file's expectations.
    Check { file: PathBuf },
    /// Print the Euler derivatives of the Lagrangian.
    Euler { file: PathBuf },
    /// Print the normal forms of all principal coordinates up to an order.
    Prolong {
        file: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: u32,
    },
    /// Print the presymplectic potential current and the internal Lagrangian.
    InternalLagrangian { file: PathBuf },
    /// Print d(l) and, with a spatial frame, its S-reduction.
    Presymplectic { file: PathBuf },
    /// Classify the file's candidates as gauge symmetries.
    GaugeCheck { file: PathBuf },
    /// Run a bundled reference problem: laplace, wave, pkdv, maxwell or all.
    Reproduce { name: String },
}

fn read_model(file: &PathBuf) -> Result<(String, Model), String> {
    let src = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    let model = load(&src).map_err(|e| format!("{}:{e}", file.display()))?;
    Ok((file.display().to_string(), model))
}

fn write_out(path: &Option<PathBuf>, json: &str) -> Result<(), String> {
    if let Some(p) = path {
        std::fs::write(p, json).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}

fn code(status: Status) -> u8 {
    match status {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::Refused => 2,
    }
}

fn finish_reports(cli: &Cli, reports: &[Report]) -> Result<u8, String> {
    for r in reports {
        print!("{}", r.to_text(cli.verbose));
    }
    let json = if reports.len() == 1 {
        reports[0].to_json()
    } else {
        serde_json::to_string_pretty(reports).expect("reports serialize")
    };
    write_out(&cli.out, &json)?;
    let worst = reports.iter().map(|r| r.exit_code()).max().unwrap_or(0);
    Ok(worst as u8)
}

fn text_command(
    cli: &Cli,
    command: &str,
    file: &PathBuf,
    f: impl Fn(&Model) -> Result<String, jetvar::Error>,
) -> Result<u8, String> {
    let (source, model) = read_model(file)?;
    let (status, output) = match f(&model) {
        Ok(text) => (Status::Pass, text),
        Err(e) => (
            if is_refusal(&e) { Status::Refused } else { Status::Fail },
            format!("error: {e}\n"),
        ),
    };
    print!("{output}");
    let json = serde_json::json!({
        "command": command,
        "source": source,
        "status": status,
        "output": output,
    });
    write_out(&cli.out, &serde_json::to_string_pretty(&json).expect("json"))?;
    Ok(code(status))
}

fn run(cli: &Cli) -> Result<u8, String> {
    let opts = Options {
        max_order: cli.max_order,
    };
    match &cli.command {
        Command::Check { file } => {
            let (source, model) = read_model(file)?;
            finish_reports(cli, &[pipeline::run_check(&source, &model, opts)])
        }
        Command::GaugeCheck { file } => {
            let (source, model) = read_model(file)?;
            finish_reports(cli, &[run_scoped(&source, &model, opts, Scope::Gauge)])
        }
        Command::Euler { file } => text_command(cli, "euler", file, pipeline::euler_text),
        Command::Prolong { file, order } => text_command(cli, "prolong", file, |m| pipeline::prolong_text(m, *order)),
        Command::InternalLagrangian { file } => {
            text_command(cli, "internal-lagrangian", file, pipeline::internal_lagrangian_text)
        }
        Command::Presymplectic { file } => text_command(cli, "presymplectic", file, pipeline::presymplectic_text),
        Command::Reproduce { name } => {
            let selected: Vec<&str> = if name == "all" {
                fixtures::names().collect()
            } else if fixtures::fixture(name).is_some() {
                vec![name.as_str()]
            } else {
                let known: Vec<&str> = fixtures::names().collect();
                return Err(format!("unknown fixture '{name}'; known: {}, all", known.join(", ")));
            };
            let reports: Vec<Result<Report, String>> = std::thread::scope(|s| {
                let handles: Vec<_> = selected
                    .iter()
                    .map(|n| {
                        s.spawn(move || {
                            let src = fixtures::fixture(n).expect("known fixture");
                            let model = load(src).map_err(|e| format!("{n}.jv:{e}"))?;
                            Ok(pipeline::run_check(&format!("{n}.jv"), &model, opts))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("fixture thread")).collect()
            });
            let reports: Result<Vec<Report>, String> = reports.into_iter().collect();
            finish_reports(cli, &reports?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
