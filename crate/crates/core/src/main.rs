use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beamseek::validate::{run_suite, Suite};
use beamseek::{load_config, run, Config, Table};

#[derive(Parser)]
#[command(name = "beamseek", version, about = "Extremum seeking boundary control of an Euler-Bernoulli beam")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the closed-loop simulation described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the kernel table to this CSV file.
        #[arg(long)]
        kernel_table: Option<PathBuf>,
    },
    /// Run a self-check suite: kernels, spectrum, fem or averaging.
    Validate { kind: Suite },
    /// Compare the discrete target-system spectrum with the closed forms.
    Spectrum {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        kbar: f64,
        #[arg(long, default_value_t = 200)]
        elems: usize,
        #[arg(long, default_value_t = 4)]
        modes: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> beamseek::Result<ExitCode> {
    match cli.cmd {
        Cmd::Run { config, out, kernel_table } => {
            let mut cfg: Config = load_config(&config)?;
            if out.is_some() {
                cfg.out_dir = out;
            }
            if let Some(path) = kernel_table {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                Table::build(cfg.gains.c, cfg.quad_order)?.write_csv(&path)?;
            }
            let result = run(&cfg)?;
            print!("{}", result.summary.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { kind } => {
            let checks = run_suite(kind)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("{} checks, {} failed", checks.len(), failed);
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Spectrum { c, kbar, elems, modes, csv } => {
            let rep = beamseek::spectrum::target_spectrum(c, kbar, elems, modes)?;
            print!("{}", rep.to_text());
            if let Some(path) = csv {
                rep.write_csv(&path)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
