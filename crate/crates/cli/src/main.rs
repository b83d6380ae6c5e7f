//! `skg`: capacity sweeps, protocol runs and map export.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use skg_core::experiment::{build_scenario, evaluate_capacity, run_capacity_sweep, FieldCache};
use skg_core::export;
use skg_core::protocol::run_protocol_reps;
use skg_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "skg", version, about = "Secret key generation with a mobile drone")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Secret-key capacity over a parameter sweep, one row per value and repetition.
    CapacitySweep {
        #[command(flatten)]
        common: Common,
    },
    /// Full protocol: training, trajectory, transmissions, disagreement and leakage.
    RunProtocol {
        #[command(flatten)]
        common: Common,
        /// Also write both parties' raw key bits here.
        #[arg(long, value_name = "PATH")]
        keys: Option<PathBuf>,
    },
    /// Bob and Eve gain maps and the isohypse partition of repetition 0.
    GenMaps {
        #[command(flatten)]
        common: Common,
        /// Also optimize the largest classes and write capacity.csv and distribution.csv.
        #[arg(long)]
        with_capacity: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file (directory for gen-maps). Defaults to stdout (`maps/` for gen-maps).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<String>,
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<String>>,
    #[arg(long, value_name = "F")]
    area_m: Option<String>,
    #[arg(long, value_name = "F")]
    altitude_m: Option<String>,
    #[arg(long, value_name = "F")]
    fc_mhz: Option<String>,
    /// Transmit antenna gain.
    #[arg(long, value_name = "F")]
    atx_db: Option<String>,
    /// Receive antenna gain.
    #[arg(long, value_name = "F")]
    arx_db: Option<String>,
    #[arg(long, value_name = "F")]
    snr_min_db: Option<String>,
    #[arg(long, value_name = "F")]
    rho_db: Option<String>,
    /// Pilot symbols per estimate.
    #[arg(long, value_name = "K")]
    pilots: Option<String>,
    /// Quantization levels.
    #[arg(long, value_name = "Q")]
    levels: Option<String>,
    /// Isohypse bin width at Eve, or `auto`.
    #[arg(long, value_name = "F|auto")]
    delta_e: Option<String>,
    #[arg(long, value_name = "F")]
    sigma_sh_a_db: Option<String>,
    #[arg(long, value_name = "F")]
    sigma_sh_e_db: Option<String>,
    #[arg(long, value_name = "F")]
    dref_m: Option<String>,
    #[arg(long, value_name = "F")]
    eve_dist_m: Option<String>,
    #[arg(long, value_name = "N")]
    reps: Option<String>,
    /// Number of key-generation transmissions per repetition.
    #[arg(long = "transmissions", visible_alias = "n", value_name = "N")]
    transmissions: Option<String>,
    /// Number of largest isohypses to optimize.
    #[arg(long, value_name = "N")]
    class_limit: Option<String>,
    /// Nearest-neighbour shadowing sampler with this many neighbours, or `exact`.
    #[arg(long, value_name = "N|exact")]
    field_neighbors: Option<String>,
    /// Learn the maps from noisy estimates with this many pilots, or `none`.
    #[arg(long, value_name = "K|none")]
    training_pilots: Option<String>,
    /// Solver tolerance on the capacity bracket.
    #[arg(long, value_name = "F")]
    tol_bits: Option<String>,
    #[arg(long, value_name = "N")]
    max_iter: Option<String>,
    /// Axis (Q, M, SNR_min, rho_dB, K, sigma_sh_A, d) and comma-separated values.
    #[arg(long, num_args = 2, value_names = ["AXIS", "VALUES"])]
    sweep: Option<Vec<String>>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags: [(&str, Option<String>); 22] = [
            ("seed", self.seed.clone()),
            ("grid", self.grid.as_ref().map(|g| g.join(" "))),
            ("area_m", self.area_m.clone()),
            ("altitude_m", self.altitude_m.clone()),
            ("fc_mhz", self.fc_mhz.clone()),
            ("atx_db", self.atx_db.clone()),
            ("arx_db", self.arx_db.clone()),
            ("snr_min_db", self.snr_min_db.clone()),
            ("rho_db", self.rho_db.clone()),
            ("pilots", self.pilots.clone()),
            ("levels", self.levels.clone()),
            ("delta_e", self.delta_e.clone()),
            ("sigma_sh_a_db", self.sigma_sh_a_db.clone()),
            ("sigma_sh_e_db", self.sigma_sh_e_db.clone()),
            ("dref_m", self.dref_m.clone()),
            ("eve_dist_m", self.eve_dist_m.clone()),
            ("reps", self.reps.clone()),
            ("transmissions", self.transmissions.clone()),
            ("class_limit", self.class_limit.clone()),
            ("field_neighbors", self.field_neighbors.clone()),
            ("training_pilots", self.training_pilots.clone()),
            ("tol_bits", self.tol_bits.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        if let Some(v) = &self.max_iter {
            cfg.set("max_iter", v).context("--max-iter")?;
        }
        if let Some(s) = &self.sweep {
            cfg.set("sweep", &s.join(" "))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => export::write_file(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn manifest(cmd: &str, cfg: &ExperimentConfig) -> String {
    format!("skg {cmd} {}", cfg.manifest())
}

fn run(cli: Cli) -> Result<()> {
    let cache = FieldCache::new();
    match cli.command {
        Command::CapacitySweep { common } => {
            let cfg = common.resolve()?;
            let points = run_capacity_sweep(&cfg, &cache)?;
            emit(common.out.as_deref(), &export::sweep_csv(&manifest("capacity-sweep", &cfg), &points))
        }
        Command::RunProtocol { common, keys } => {
            let cfg = common.resolve()?;
            let runs = run_protocol_reps(&cfg, &cache)?;
            let m = manifest("run-protocol", &cfg);
            let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
            emit(common.out.as_deref(), &export::protocol_csv(&m, &reports))?;
            if let Some(path) = keys {
                let material: Vec<_> = runs.iter().map(|r| (r.report.seed, &r.keys)).collect();
                export::write_file(&path, &export::keys_csv(&m, &material))?;
            }
            Ok(())
        }
        Command::GenMaps { common, with_capacity } => {
            let cfg = common.resolve()?;
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("maps"));
            let sc = build_scenario(&cfg, 0, &cache)?;
            let m = manifest("gen-maps", &cfg);
            export::write_file(&dir.join("bob_map.csv"), &export::gain_map_csv(&m, &sc.bob_map))?;
            export::write_file(&dir.join("eve_map.csv"), &export::gain_map_csv(&m, &sc.eve_map))?;
            export::write_file(&dir.join("partition.csv"), &export::partition_csv(&m, &sc.partition))?;
            let max = sc.partition.max_class_size();
            println!("classes L = {}", sc.partition.len());
            println!("max |I_l| = {max}");
            println!("C_bar_key = {:.6} bits", skg_core::capacity::upper_bound(&sc.partition));
            if with_capacity {
                let res = evaluate_capacity(&cfg, &sc)?;
                export::write_file(&dir.join("capacity.csv"), &export::capacity_csv(&m, &res))?;
                export::write_file(&dir.join("distribution.csv"), &export::distribution_csv(&m, &res.distribution))?;
                println!("C_key = {:.6} bits (class {})", res.capacity_bits, res.best_class);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("SKG_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("skg: {e}");
                }
            }
            _ => {
                eprintln!("skg: SKG_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(Error::UnknownAxis(_)) = e.downcast_ref::<Error>() {
                Cli::command()
                    .error(clap::error::ErrorKind::InvalidValue, e.to_string())
                    .exit();
            }
            eprintln!("skg: {e:#}");
            ExitCode::FAILURE
        }
    }
}
