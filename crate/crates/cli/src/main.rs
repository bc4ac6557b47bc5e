use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fpia_cli::campaign::{self, write_atomic, Campaign};
use fpia_cli::commands::{self, CliError, COST_HEADER, EXIT_OTHER};
use fpia_cli::corpus::{load, parse_problem_arg, Problem};
use fpia_core::cluster::{ClusterParams, InputAccounting};
use fpia_core::cost::{TechParams, TechPreset};
use fpia_core::pipeline::EmbedConfig;
use fpia_core::place_route::DEFAULT_WIDTH_CAP;
use fpia_core::sat::DEFAULT_PENALTY;
use fpia_core::search::ArchParams;
use fpia_core::sim::AnnealSchedule;

#[derive(Parser)]
#[command(
    name = "fpia",
    version,
    about = "Map QUBO problems onto field-programmable in-memory Ising machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Size, sparsity and fan-in statistics as CSV.
    Analyze {
        /// DIMACS or QUBO JSON files, or `uf:V:C:SEED` / `r3sat:V:RATIO:SEED`.
        inputs: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_PENALTY)]
        penalty: i64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// CNF to QUBO JSON, plus the auxiliary-variable map.
    Quadratize {
        problem: String,
        #[arg(long, default_value_t = DEFAULT_PENALTY)]
        penalty: i64,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// First-fit-decreasing clustering into IMC blocks.
    Pack {
        problem: String,
        #[command(flatten)]
        arch: ArchArgs,
        /// Count only inputs from other clusters against `I`.
        #[arg(long)]
        external_only: bool,
        #[arg(long, default_value_t = DEFAULT_PENALTY)]
        penalty: i64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Pack, place, route and cost one problem, then verify the mapping.
    Embed {
        problem: String,
        #[command(flatten)]
        arch: ArchArgs,
        #[command(flatten)]
        tech: TechArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_WIDTH_CAP)]
        width_cap: usize,
        /// Grid side; sized for the cluster count when omitted.
        #[arg(long = "M")]
        grid: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_PENALTY)]
        penalty: i64,
        /// Directory for design.json, cost.csv and verification.json.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Simulated annealing on the QUBO.
    Solve {
        problem: String,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        /// Proposal budget per restart; sets a mild schedule that stops at energy 0.
        #[arg(long, conflicts_with_all = ["sweeps", "t_start", "t_end"])]
        max_flips: Option<u64>,
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_PENALTY)]
        penalty: i64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a TOML or JSON campaign and write its CSVs and manifest.
    Campaign {
        file: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ArchArgs {
    #[arg(long = "I", default_value_t = 140)]
    inputs: usize,
    #[arg(long = "O", default_value_t = 40)]
    outputs: usize,
    #[arg(long = "F_I", default_value_t = 0.15)]
    f_in: f64,
    #[arg(long = "F_O", default_value_t = 0.2)]
    f_out: f64,
    #[arg(long, default_value_t = 1.0)]
    occupancy: f64,
}

impl ArchArgs {
    fn params(&self) -> ArchParams {
        ArchParams {
            inputs: self.inputs,
            outputs: self.outputs,
            f_in: self.f_in,
            f_out: self.f_out,
            occupancy: self.occupancy,
        }
    }
}

#[derive(Args)]
struct TechArgs {
    #[arg(long, default_value = "eflash_optimistic")]
    tech: String,
    #[arg(long = "A_ADC")]
    a_adc: Option<u64>,
    #[arg(long = "A_cell")]
    a_cell: Option<u64>,
}

impl TechArgs {
    fn params(&self) -> anyhow::Result<TechParams> {
        let mut t = TechPreset::from_name(&self.tech)?.params();
        if let Some(a) = self.a_adc {
            t = t.with_adc(a);
        }
        if let Some(c) = self.a_cell {
            t = t.with_cell(c);
        }
        Ok(t)
    }
}

fn load_arg(arg: &str, penalty: i64) -> anyhow::Result<Problem> {
    load(&parse_problem_arg(arg)?, penalty)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            inputs,
            penalty,
            out,
        } => {
            let specs = inputs
                .iter()
                .map(|a| parse_problem_arg(a))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let (csv, errors) = commands::analyze(&specs, penalty);
            emit(out.as_deref(), &csv)?;
            for e in &errors {
                eprintln!("error: {e}");
            }
            if !errors.is_empty() {
                return Err(CliError::new(
                    EXIT_OTHER,
                    anyhow::anyhow!("{} of {} inputs failed", errors.len(), inputs.len()),
                ));
            }
        }
        Command::Quadratize {
            problem,
            penalty,
            out,
            map,
        } => {
            let p = load_arg(&problem, penalty)?;
            emit(out.as_deref(), &(p.qubo.to_json() + "\n"))?;
            if let (Some(path), Some(m)) = (map, &p.map) {
                let json = serde_json::to_string_pretty(m).context("serializing map")? + "\n";
                write_atomic(&path, json.as_bytes())?;
            }
        }
        Command::Pack {
            problem,
            arch,
            external_only,
            penalty,
            out,
        } => {
            let p = load_arg(&problem, penalty)?;
            let mut cp =
                ClusterParams::new(arch.inputs, arch.outputs).with_occupancy(arch.occupancy);
            if external_only {
                cp.accounting = InputAccounting::ExternalOnly;
            }
            let packed = commands::pack(&p.qubo, &cp)?;
            emit(out.as_deref(), &(packed.clustering.to_json() + "\n"))?;
            eprintln!(
                "{}: {} clusters, improvement {}",
                p.name,
                packed.clustering.len(),
                packed.report.improvement
            );
        }
        Command::Embed {
            problem,
            arch,
            tech,
            seed,
            width_cap,
            grid,
            penalty,
            out,
        } => {
            let p = load_arg(&problem, penalty)?;
            let cfg = EmbedConfig {
                width_cap,
                grid,
                ..EmbedConfig::default()
            };
            let a = arch.params();
            let e = commands::embed_problem(&p, &a, &tech.params()?, seed, &cfg)?;
            let row = commands::cost_row(&p.name, &a, seed, &e.embedding, &e.cost);
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).context("creating output directory")?;
                    write_atomic(
                        &dir.join("design.json"),
                        e.embedding.design.to_json().as_bytes(),
                    )?;
                    write_atomic(
                        &dir.join("cost.csv"),
                        format!("{COST_HEADER}\n{row}\n").as_bytes(),
                    )?;
                    let v = serde_json::to_string_pretty(&e.verification)
                        .context("serializing verdict")?;
                    write_atomic(&dir.join("verification.json"), (v + "\n").as_bytes())?;
                }
                None => println!("{COST_HEADER}\n{row}"),
            }
            eprintln!("verified on {} random states", e.verification.states);
        }
        Command::Solve {
            problem,
            seeds,
            max_flips,
            sweeps,
            t_start,
            t_end,
            penalty,
            out,
        } => {
            let p = load_arg(&problem, penalty)?;
            let schedule = match max_flips {
                Some(f) => AnnealSchedule::satisfiability(p.qubo.n(), f),
                None => {
                    let d = AnnealSchedule::default();
                    AnnealSchedule {
                        sweeps: sweeps.unwrap_or(d.sweeps),
                        t_start: t_start.unwrap_or(d.t_start),
                        t_end: t_end.unwrap_or(d.t_end),
                        target_energy: None,
                    }
                }
            };
            let r = commands::solve(&p, &schedule, &seeds)?;
            let json = serde_json::to_string_pretty(&r).context("serializing report")? + "\n";
            emit(out.as_deref(), &json)?;
        }
        Command::Campaign { file, out } => {
            let c = Campaign::from_file(&file)?;
            let base = file.parent().unwrap_or(Path::new("."));
            let o = campaign::run(&c, base, out.as_deref())?;
            for a in &o.manifest.artifacts {
                eprintln!("{} ({} rows)", o.dir.join(&a.file).display(), a.rows);
            }
            if o.failed() {
                for f in &o.manifest.failures {
                    eprintln!("failure in {} / {}: {}", f.study, f.item, f.reason);
                }
                return Err(CliError::new(
                    EXIT_OTHER,
                    anyhow::anyhow!(
                        "{} failures recorded in manifest",
                        o.manifest.failures.len()
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
