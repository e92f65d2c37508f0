use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ritm_sim::experiments::{absent_status_sizes, quiet_window, storage_bytes};
use ritm_sim::metrics::Stats;
use ritm_sim::trace::DAY;
use ritm_sim::{generate_trace, measure_overheads, run_scenario, Profile, Scenario, TraceParams};

#[derive(Parser)]
#[command(name = "ritm-sim", about = "Deterministic revocation scenarios and measurements")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and write metrics.csv, events.log and series files.
    Run {
        scenario: PathBuf,
        /// Overrides the seed in the file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic revocation trace as CSV.
    Trace(TraceArgs),
    /// Desk-scale measurements.
    Measure {
        #[command(subcommand)]
        what: Measure,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Steady,
    Heartbleed,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, value_enum, default_value = "steady")]
    profile: ProfileArg,
    #[arg(long, default_value_t = 254)]
    cas: usize,
    #[arg(long, default_value_t = 5440.0)]
    per_ca_mean: f64,
    /// Exact number of events instead of Poisson counts.
    #[arg(long)]
    total: Option<u64>,
    #[arg(long, default_value_t = 120)]
    days: u64,
    #[arg(long, default_value_t = 10.0)]
    peak_multiple: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-day counts for plotting.
    #[arg(long)]
    daily: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Measure {
    /// Status sizes for random absent serials.
    ProofSize {
        #[arg(long, default_value_t = 339_557)]
        leaves: usize,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Replica storage for a steady trace.
    Storage {
        #[arg(long, default_value_t = 1_381_992)]
        total: u64,
        #[arg(long, default_value_t = 254)]
        cas: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Per-Δ download of one RA when no CA revokes.
    Quiet {
        #[arg(long, default_value_t = 254)]
        cas: usize,
        #[arg(long, default_value_t = 60)]
        delta: u64,
    },
}

fn print_stats(name: &str, s: &Stats) {
    println!("{name}: n={} min={} mean={:.1} max={}", s.count, s.min, s.mean, s.max);
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.cmd {
        Cmd::Run { scenario, seed, out } => {
            let mut s = Scenario::load(&scenario).map_err(|e| e.to_string())?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let report = run_scenario(&s).map_err(|e| e.to_string())?;
            fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let overheads = measure_overheads(&report);
            let files = [
                ("metrics.csv", report.to_csv()),
                ("events.log", report.events_log()),
                ("summary.csv", overheads.to_csv()),
                ("bandwidth.dat", report.bandwidth_series()),
                ("trace_daily.dat", report.daily_series()),
            ];
            for (name, body) in files {
                fs::write(out.join(name), body).map_err(|e| format!("{name}: {e}"))?;
            }
            print!("{}", overheads.summary());
            for c in &report.connections {
                println!("connection {}: {}", c.id, ritm_sim::metrics::state_label(c.state));
            }
            Ok(())
        }
        Cmd::Trace(a) => {
            let params = TraceParams {
                cas: a.cas,
                per_ca_mean: a.per_ca_mean,
                total: a.total,
                start: 0,
                span: a.days * DAY,
                peak_multiple: a.peak_multiple,
                ..Default::default()
            };
            let profile = match a.profile {
                ProfileArg::Steady => Profile::Steady,
                ProfileArg::Heartbleed => Profile::Heartbleed,
            };
            let trace = generate_trace(profile, &params, a.seed);
            match a.out {
                Some(p) => fs::write(&p, trace.to_csv()).map_err(|e| e.to_string())?,
                None => print!("{}", trace.to_csv()),
            }
            if let Some(p) = a.daily {
                let mut body = String::from("# day revocations\n");
                for (d, n) in trace.daily_counts(0).iter().enumerate() {
                    body.push_str(&format!("{d} {n}\n"));
                }
                fs::write(&p, body).map_err(|e| e.to_string())?;
            }
            eprintln!("{} events", trace.len());
            Ok(())
        }
        Cmd::Measure { what } => {
            match what {
                Measure::ProofSize { leaves, queries, seed } => {
                    let sizes = absent_status_sizes(leaves, queries, seed);
                    print_stats("status bytes", &Stats::of(sizes.iter().map(|&x| x as u64)));
                }
                Measure::Storage { total, cas, seed } => {
                    let b = storage_bytes(total, cas, seed);
                    println!("storage bytes: {b} ({:.2} MB)", b as f64 / 1e6);
                }
                Measure::Quiet { cas, delta } => {
                    let (m, a) = quiet_window(cas, delta, 5);
                    print_stats("measured per-delta bytes", &m);
                    print_stats("accounted per-delta bytes", &a);
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
