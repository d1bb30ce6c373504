use clap::{Parser, Subcommand};
use congesta::cli::{self, exit_code, LoadedConfig};
use congesta::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "congesta", version, about = "Congested non-Newtonian flow runs, sweeps and verdicts")]
struct Args {
    /// Worker threads for sweeps, overriding `sweep.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the config and the environment.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single run with all audits.
    Run { config: PathBuf },
    /// Parameter sweep over the configured ladders.
    Sweep { config: PathBuf },
    /// Recompute verdicts from a run directory.
    Verify { dir: PathBuf },
}

fn out_dir(args_out: &Option<PathBuf>, lc: &LoadedConfig) -> PathBuf {
    args_out
        .clone()
        .or_else(|| std::env::var_os(cli::OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| lc.config.output.dir.clone())
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e) as u8)
}

fn load(path: &Path) -> Result<LoadedConfig, ExitCode> {
    cli::load_config(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match &args.cmd {
        Cmd::Run { config } => {
            let lc = match load(config) {
                Ok(lc) => lc,
                Err(c) => return c,
            };
            let dir = out_dir(&args.out, &lc);
            match cli::execute_run(&lc, &dir) {
                Ok(s) => {
                    println!("run: {} steps to t = {}, artifacts in {}", s.steps, s.t_end, dir.display());
                    println!(
                        "max principle: sup rho {:.6e} <= bound {:.6e}: {}",
                        s.max_principle.sup_rho, s.max_principle.bound, s.max_principle.pass
                    );
                    println!("energy: {}/{} steps pass", s.energy.steps_passed, s.energy.steps);
                    println!("mass ledger: cumulative residual {:.3e}", s.mass_cumulative_residual);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Cmd::Sweep { config } => {
            let lc = match load(config) {
                Ok(lc) => lc,
                Err(c) => return c,
            };
            let dir = out_dir(&args.out, &lc);
            match cli::execute_sweep(&lc, &dir, args.workers) {
                Ok(out) => {
                    for p in &out.report.points {
                        match &p.summary {
                            Some(s) => println!("{} = {}: {}", p.axis.name(), p.value, s.verdict.label),
                            None => println!("{} = {}: {}", p.axis.name(), p.value, p.error.as_deref().unwrap_or("failed")),
                        }
                    }
                    for f in &out.report.fits {
                        match f.slope {
                            Some(s) => println!("rate {} vs {}: {s:.4}", f.quantity, f.axis.name()),
                            None => println!("rate {} vs {}: not enough points", f.quantity, f.axis.name()),
                        }
                    }
                    ExitCode::from(cli::sweep_exit_code(&out) as u8)
                }
                Err(e) => fail(&e),
            }
        }
        Cmd::Verify { dir } => {
            let report = match cli::verify(dir) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let target = args.out.clone().unwrap_or_else(|| dir.clone());
            if let Err(e) = std::fs::create_dir_all(&target).map_err(Error::from).and_then(|_| cli::write_verify(&target, &report)) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            let label = |v: &serde_json::Value, k: &str| v.get(k).and_then(|x| x.as_str()).unwrap_or("?").to_string();
            println!("dissipative: {}", label(&report.verdicts.dissipative, "label"));
            println!("compatibility: {}", label(&report.verdicts.compatibility, "label"));
            println!("matches run summary: {}", report.matches_run_summary);
            ExitCode::SUCCESS
        }
    }
}
