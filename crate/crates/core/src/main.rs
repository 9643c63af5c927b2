use clap::{Parser, Subcommand};
use ledlink::experiments::output::{FIG3_PLOT, FIG4_PLOT};
use ledlink::experiments::{
    run_bitload, run_design_waveform, run_fig3_sweep, run_fig4_sweep, validate, write_outputs, ExperimentConfig,
};
use std::path::PathBuf;
use std::process::ExitCode;

/// Throughput optimization and Monte Carlo validation of DCO-OFDM and
/// M-PAM over peak-limited, bandlimited LEDs.
#[derive(Parser)]
#[command(name = "ledlink", version)]
struct Cli {
    /// TOML experiment file; defaults are used for absent keys.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set noise.n0=1e-9`. Repeatable.
    #[arg(long = "set", value_name = "GROUP.KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// OFDM throughput against modulation index for each N.
    Fig3,
    /// Optimized throughput of every scheme against peak power.
    Fig4,
    /// Run the invariant suite and print one line per check.
    Validate,
    /// Dump the JOW-optimal transmit waveform.
    DesignWaveform,
    /// Dump the optimized per-subcarrier loading table.
    Bitload,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match ExperimentConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run(cmd: &Command, cfg: &ExperimentConfig) -> Result<bool, Box<dyn std::error::Error>> {
    let dir = cfg.output_dir();
    let f3 = cfg.channel.f3db_hz;
    match cmd {
        Command::Fig3 => {
            let t = run_fig3_sweep(cfg)?;
            let path = write_outputs(&dir, "fig3", &t, Some(FIG3_PLOT))?;
            println!("wrote {} rows to {}", t.rows.len(), path.display());
        }
        Command::Fig4 => {
            let t = run_fig4_sweep(cfg)?;
            let path = write_outputs(&dir, "fig4", &t, Some(FIG4_PLOT))?;
            println!("wrote {} rows to {}", t.rows.len(), path.display());
        }
        Command::Validate => {
            let report = validate(cfg)?;
            println!("{report}");
            return Ok(report.passed());
        }
        Command::DesignWaveform => {
            let (opt, t) = run_design_waveform(cfg)?;
            match opt.config {
                Some(c) => println!(
                    "M = {}, R_c = {:.4e} Hz, rate = {:.4} f3dB, SINR = {:.4e}, BER = {:.3e}, KKT residual = {:.2e}",
                    c.m,
                    c.r_c,
                    opt.rate / f3,
                    opt.sinr,
                    opt.ber,
                    opt.kkt_residual
                ),
                None => println!("{}", opt.diagnostic.unwrap_or_default()),
            }
            let path = write_outputs(&dir, "waveform", &t, None)?;
            println!("wrote {}", path.display());
        }
        Command::Bitload => {
            let (plan, t) = run_bitload(cfg)?;
            println!(
                "N = {}, beta = {:.4e}, T = {:.4e} s, cp = {}, rate = {:.4} f3dB",
                plan.n(),
                plan.beta(),
                plan.symbol_time(),
                plan.cp_len(),
                plan.throughput() / f3
            );
            let path = write_outputs(&dir, "bitload", &t, None)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(true)
}
