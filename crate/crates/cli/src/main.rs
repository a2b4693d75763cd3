//! `subspace`: command-line front end for the precoding experiments.

mod compare;
mod failure;
mod plan;
mod provenance;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use subspace_core::optimizer::{DirectGain, GammaAggregate};
use subspace_core::precoding::{BdOptions, BdShortfall, InnerKind};
use subspace_core::ScenarioConfig;

use failure::{Failure, Outcome};
use stages::{EstimateOptions, EvaluateOptions, OptimizeOptions, OverheadOptions, RefineStageOptions};

#[derive(Parser)]
#[command(name = "subspace", version, about = "Subspace-constrained precoding experiments")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for outputs when no explicit path is given.
    #[arg(long, global = true, env = "SUBSPACE_OUT_ROOT", default_value = "out")]
    out_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Estimate every link covariance from fresh samples.
    Estimate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 20)]
        tp: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Baseline precoders.
    #[command(subcommand)]
    Precode(PrecodeCmd),
    /// Solve the QoS problem by bisection.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        epsilon_bisect: f64,
        #[arg(long, value_enum, default_value_t = GainArg::Included)]
        direct_gain: GainArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the restriction against a BD run, then re-optimize.
    Refine {
        #[arg(long)]
        scenario: PathBuf,
        /// BD precoder container.
        #[arg(long)]
        bd: PathBuf,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = AggregateArg::Min)]
        aggregate: AggregateArg,
        #[arg(long, default_value_t = 1e-3)]
        epsilon_bisect: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo outage statistics of a precoder.
    Evaluate(EvaluateArgs),
    /// Signaling overhead ledger for a precoder's dimensions.
    Overhead {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        precoder: PathBuf,
        /// Effective covariance rank R (default: largest link rank).
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Side-by-side table of evaluation reports.
    Compare {
        /// Evaluation directories or report.json files.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment plan.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Use the desk-scale preset (7 cells, M = 16, 2000 draws).
        #[arg(long)]
        desk_scale: bool,
        /// Output directory (default: the plan's, else <out-root>/<plan name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Generate a scenario from a JSON configuration.
    Generate {
        /// Configuration overrides (JSON); missing fields take the basic defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from the desk-scale preset.
        #[arg(long)]
        desk_scale: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PrecodeCmd {
    /// Approximate block diagonalization.
    Bd {
        #[arg(long)]
        scenario: PathBuf,
        /// Subspace dimension for every cluster.
        #[arg(long, conflicts_with = "dims")]
        dim: Option<usize>,
        /// Per-cluster dimensions.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long, default_value_t = 2)]
        extra_dims: usize,
        #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
        eig_threshold_db: f64,
        /// Protect only the strongest interference directions that fit.
        #[arg(long)]
        truncate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    precoder: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma_e: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = InnerArg::Zf)]
    inner: InnerArg,
    /// RZF regularization (default: K0 / (S0 P) per cell).
    #[arg(long)]
    rzf_alpha: Option<f64>,
    /// Target QoS level (default: the precoder's design level).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    scheme: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GainArg {
    Included,
    Omitted,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregateArg {
    Min,
    PerUser,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    Zf,
    Rzf,
}

fn gain(g: GainArg) -> DirectGain {
    match g {
        GainArg::Included => DirectGain::Included,
        GainArg::Omitted => DirectGain::Omitted,
    }
}

fn read_config(path: Option<&Path>, desk: bool) -> Outcome<ScenarioConfig> {
    let base = if desk { ScenarioConfig::desk_scale() } else { ScenarioConfig::default() };
    let Some(path) = path else { return Ok(base) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let overrides: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let mut v = serde_json::to_value(base)?;
    v.as_object_mut().expect("object").extend(overrides);
    serde_json::from_value(v).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Outcome<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let root = cli.out_root.as_path();
    let out_or = |explicit: Option<PathBuf>, name: &str| stages::output_path(explicit, root, name);
    match cli.command {
        Command::Scenario(ScenarioCmd::Generate {
            config,
            desk_scale,
            seed,
            out,
        }) => {
            let mut cfg = read_config(config.as_deref(), desk_scale)?;
            if let Some(s) = seed {
                cfg.rng_seed = s;
            }
            let out = out_or(out, "scenario.bin");
            let sc = stages::generate(&cfg, &out, None)?;
            println!(
                "scenario: {} BSs, {} users, {} clusters -> {}",
                sc.value.topology.num_bs,
                sc.value.topology.num_users(),
                sc.value.topology.num_clusters(),
                out.display()
            );
        }
        Command::Estimate { scenario, tp, seed, out } => {
            let sc = stages::read_scenario(&scenario)?;
            let out = out_or(out, "estimated.bin");
            stages::estimate(&sc, &EstimateOptions { tp, seed }, &out, None)?;
            println!("estimate: Tp = {tp} -> {}", out.display());
        }
        Command::Precode(PrecodeCmd::Bd {
            scenario,
            dim,
            dims,
            extra_dims,
            eig_threshold_db,
            truncate,
            out,
        }) => {
            let sc = stages::read_scenario(&scenario)?;
            let dims = dims.or_else(|| dim.map(|s| vec![s; sc.value.topology.num_clusters()]));
            let opts = BdOptions {
                eig_threshold_db,
                dims,
                extra_dims,
                shortfall: if truncate { BdShortfall::Truncate } else { BdShortfall::Error },
            };
            let out = out_or(out, "bd.bin");
            let d = stages::precode_bd(&sc, &opts, &out, None)?;
            println!("bd: dims {:?}, gamma {:?} -> {}", d.value.control.dims(), d.value.gamma, out.display());
        }
        Command::Optimize {
            scenario,
            epsilon_bisect,
            direct_gain,
            out,
        } => {
            let sc = stages::read_scenario(&scenario)?;
            let opts = OptimizeOptions {
                epsilon_bisect,
                direct_gain: gain(direct_gain),
                ..Default::default()
            };
            let out = out_or(out, "optimized.bin");
            let d = stages::optimize(&sc, &opts, &out, None)?;
            println!(
                "optimize: gamma* = {:.6e}, dims {:?} -> {}",
                d.value.gamma.unwrap_or(f64::NAN),
                d.value.control.dims(),
                out.display()
            );
        }
        Command::Refine {
            scenario,
            bd,
            draws,
            seed,
            aggregate,
            epsilon_bisect,
            out,
        } => {
            let sc = stages::read_scenario(&scenario)?;
            let bd = stages::read_design(&bd)?;
            let opts = RefineStageOptions {
                draws,
                seed,
                aggregate: match aggregate {
                    AggregateArg::Min => GammaAggregate::Min,
                    AggregateArg::PerUser => GammaAggregate::PerUser,
                },
                epsilon_bisect,
                ..Default::default()
            };
            let out = out_or(out, "refined.bin");
            let d = stages::refine(&sc, &bd, &opts, &out, None)?;
            println!("refine: gamma* = {:.6e} -> {}", d.value.gamma.unwrap_or(f64::NAN), out.display());
        }
        Command::Evaluate(a) => {
            let sc = stages::read_scenario(&a.scenario)?;
            let design = stages::read_design(&a.precoder)?;
            let opts = EvaluateOptions {
                draws: a.draws,
                seed: a.seed,
                sigma_e: a.sigma_e,
                inner: match a.inner {
                    InnerArg::Zf => InnerKind::Zf,
                    InnerArg::Rzf => InnerKind::Rzf(a.rzf_alpha),
                },
                gamma: a.gamma,
                rank: a.rank,
                scheme: a.scheme,
            };
            let dir = out_or(a.out, &format!("eval-{}", design.value.scheme));
            let e = stages::evaluate(&sc, &design, &opts, &dir, None)?;
            println!(
                "evaluate: {} at gamma {:.6e}: min satisfaction {:.4}, achieved gamma {:.6e} -> {}",
                e.scheme,
                e.target_gamma,
                e.report.outage.min_satisfaction,
                e.achieved_gamma,
                dir.display()
            );
        }
        Command::Overhead {
            scenario,
            precoder,
            rank,
            out,
        } => {
            let sc = stages::read_scenario(&scenario)?;
            let design = stages::read_design(&precoder)?;
            let out = out_or(out, "overhead.json");
            let l = stages::overhead(&sc, &design, &OverheadOptions { rank }, &out, None)?;
            println!("real-time: {}", l.real_time.label);
            println!("statistical: {}", l.statistical.label);
            println!("backhaul: {}", l.backhaul.label);
            println!("conventional: {}", l.conventional.label);
        }
        Command::Compare { reports, out } => {
            let evals = reports.iter().map(|p| stages::read_evaluation(p)).collect::<Outcome<Vec<_>>>()?;
            let table = compare::compare_report(&evals, None)?;
            let out = out_or(out, "compare.json");
            provenance::write_json(&out, &table)?;
            provenance::write_bytes(&out.with_extension("csv"), table.to_csv()?.as_bytes())?;
            print!("{}", table.render());
        }
        Command::Run { plan, desk_scale, out } => {
            let p = plan::load_plan(&plan, desk_scale)?;
            let name = plan.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plan".into());
            let dir = out.or_else(|| p.output_dir.clone()).unwrap_or_else(|| root.join(name));
            let dir = plan::run_plan(&p, &dir)?;
            println!("plan complete -> {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
