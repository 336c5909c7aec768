//! `ergm`: sample ERGM networks, estimate parameters, run Monte Carlo
//! designs and hyperparameter sweeps, query the exact small-graph oracle.
//!
//! Exit codes: 0 success, 2 usage/configuration, 3 numeric failure (partial
//! outputs are still written).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    parse_stats_list, parse_theta_list, DesignFile, EstimateResolved, ExactResolved, Manifest,
    McResolved, McmcSection, MpleSection, MzSection, SampleResolved, VrbeaSection,
};
use ergm_core::{io, Error, Result};

#[derive(Parser)]
#[command(name = "ergm", version, about = "ERGM estimation toolkit")]
struct Cli {
    /// Output directory; falls back to $ERGM_OUT_DIR, then the current dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample networks by Metropolis dyad toggling.
    Sample(SampleArgs),
    /// Run one estimator on one graph file.
    Estimate(EstimateArgs),
    /// Execute a Monte Carlo design from a TOML config.
    Mc(McArgs),
    /// Sweep the design over a regularization or barrier-speed grid.
    Sweep(SweepArgs),
    /// Exact scaled log-normalizing constant for tiny n.
    Exact(ExactArgs),
    /// Re-run any command from its emitted manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    /// Comma-separated parameter values, e.g. "-1,1".
    #[arg(long, allow_hyphen_values = true)]
    theta: String,
    /// Comma-separated statistics, e.g. "edges,triangles".
    #[arg(long, default_value = "edges,triangles")]
    stats: String,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Proposals to discard first; default 10^5·n.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Proposals between retained samples; default 10·n.
    #[arg(long)]
    thinning: Option<u64>,
    /// Initialization density; default exp(θ₁)/(1+exp(θ₁)).
    #[arg(long)]
    init_p: Option<f64>,
    /// Resample dyads from their full conditional instead of Metropolis.
    #[arg(long, default_value_t = false)]
    gibbs: bool,
    /// Also write one packed bitmap file with all samples.
    #[arg(long, default_value_t = false)]
    packed: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Graph file: adjacency CSV or edge-list CSV (header `i,j`).
    #[arg(long)]
    graph: PathBuf,
    /// vrbea | mz | mple | mcmc_mle | exact
    #[arg(long)]
    method: String,
    /// Node count override (edge lists cannot encode trailing isolates).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    theta0: String,
    #[arg(long, default_value = "edges,triangles")]
    stats: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,

    // bilevel knobs
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = 0.8)]
    eta: f64,
    #[arg(long, default_value_t = 0.03)]
    xi: f64,
    #[arg(long = "K", default_value_t = 10)]
    k_inner: usize,
    #[arg(long = "T", default_value_t = 20_000)]
    t_outer: usize,
    /// Inner step size: a number, or "auto" for 0.002·n².
    #[arg(long, default_value = "auto")]
    alpha: String,
    #[arg(long, default_value_t = 1e-6)]
    zeta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// constant | inv_sqrt_t
    #[arg(long, default_value = "constant")]
    xi_schedule: String,
    /// gradient | value: normalization of the barrier multiplier
    #[arg(long, default_value = "gradient")]
    barrier: String,
    /// feed_forward | joint_step: where the joint step moves the tracked mu from
    #[arg(long, default_value = "feed_forward")]
    mu_update: String,

    // fixed-point baseline knobs
    #[arg(long, default_value_t = 1e-8)]
    eps_tol: f64,
    #[arg(long, default_value_t = 5)]
    k_starts: usize,
    #[arg(long, default_value_t = 200)]
    outer_max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    outer_tol: f64,
    /// signed | absolute
    #[arg(long, default_value = "signed")]
    stop_rule: String,

    // pseudo-likelihood knobs
    #[arg(long, default_value_t = 100)]
    newton_max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    newton_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    ridge: f64,

    // moment-matching knobs
    #[arg(long, default_value_t = 50_000)]
    mcmc_burn_in: u64,
    #[arg(long, default_value_t = 1_000)]
    mcmc_thinning: u64,
    #[arg(long, default_value_t = 300)]
    mcmc_samples: usize,
    #[arg(long, default_value_t = 0.5)]
    mcmc_step: f64,
    #[arg(long, default_value_t = 1e-4)]
    mcmc_tol: f64,
    #[arg(long, default_value_t = 30)]
    mcmc_max_iter: usize,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for replications; 1 by default.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated ε grid, e.g. "0,1e-4,1e-2,1".
    #[arg(long)]
    eps_grid: Option<String>,
    /// Comma-separated η grid, e.g. "0.2,0.5,1.0".
    #[arg(long)]
    eta_grid: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    theta: String,
    #[arg(long, default_value = "edges,triangles")]
    stats: String,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn out_dir(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("ERGM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn init_pool(jobs: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
}

fn split_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad grid value `{tok}`: {e}")))
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<u8> {
    let out = out_dir(cli.out);
    match cli.command {
        Command::Sample(args) => {
            let theta = parse_theta_list(&args.theta)?;
            let stats: Vec<String> = parse_stats_list(&args.stats)?
                .iter()
                .map(|k| k.name().to_string())
                .collect();
            let init_p = args
                .init_p
                .unwrap_or_else(|| ergm_core::sampler::sigmoid(theta[0]));
            let resolved = SampleResolved {
                n: args.n,
                theta,
                stats,
                count: args.count,
                seed: args.seed,
                burn_in: args.burn_in.unwrap_or(100_000 * args.n as u64),
                thinning: args.thinning.unwrap_or(10 * args.n as u64),
                init_p,
                gibbs: args.gibbs,
                packed: args.packed,
            };
            commands::run_sample(&resolved, &out)
        }
        Command::Estimate(args) => {
            let theta0 = parse_theta_list(&args.theta0)?;
            let kinds = parse_stats_list(&args.stats)?;
            let stats: Vec<String> = kinds.iter().map(|k| k.name().to_string()).collect();
            if args.method == "exact" {
                let resolved = ExactResolved {
                    n: args.n.ok_or_else(|| {
                        Error::Config("--method exact requires --n".into())
                    })?,
                    theta: theta0,
                    stats,
                };
                return commands::run_exact(&resolved, &out);
            }
            let g = io::read_graph_auto(&args.graph, args.n)?;
            let mut edges = Vec::new();
            for i in 0..g.n() {
                for j in (i + 1)..g.n() {
                    if g.has_edge(i, j) {
                        edges.push((i, j));
                    }
                }
            }
            let alpha = match args.alpha.as_str() {
                "auto" => None,
                v => Some(v.parse::<f64>().map_err(|e| {
                    Error::Parse(format!("--alpha expects a number or `auto`: {e}"))
                })?),
            };
            let resolved = EstimateResolved {
                method: args.method,
                n: g.n(),
                graph_edges: edges,
                theta0,
                stats,
                vrbea: VrbeaSection {
                    xi: args.xi,
                    eta: args.eta,
                    t_outer: args.t_outer,
                    k_inner: args.k_inner,
                    epsilon: args.eps,
                    alpha: alpha.or(Some(0.002 * (g.n() * g.n()) as f64)),
                    zeta: args.zeta,
                    gamma: args.gamma,
                    xi_schedule: args.xi_schedule,
                    barrier: args.barrier,
                    mu_update: args.mu_update,
                },
                mz: MzSection {
                    eps_tol: args.eps_tol,
                    k_starts: args.k_starts,
                    outer_max_iter: args.outer_max_iter,
                    outer_tol: args.outer_tol,
                    stop_rule: args.stop_rule,
                    ..MzSection::default()
                },
                mple: MpleSection {
                    newton_max_iter: args.newton_max_iter,
                    newton_tol: args.newton_tol,
                    ridge: args.ridge,
                },
                mcmc_mle: McmcSection {
                    burn_in: args.mcmc_burn_in,
                    thinning: args.mcmc_thinning,
                    samples_m: args.mcmc_samples,
                    step_a: args.mcmc_step,
                    tol: args.mcmc_tol,
                    max_iter: args.mcmc_max_iter,
                    ridge: args.ridge,
                },
                seed: args.seed,
            };
            commands::run_estimate(&resolved, &out)
        }
        Command::Mc(args) => {
            init_pool(args.jobs);
            let design = DesignFile::load(&args.config)?;
            design.to_design()?; // validate before writing anything
            let resolved = McResolved {
                design: design.resolved(),
                sweep: "none".into(),
                grid: vec![],
                jobs: args.jobs,
            };
            commands::run_mc(&resolved, &out)
        }
        Command::Sweep(args) => {
            init_pool(args.jobs);
            let design = DesignFile::load(&args.config)?;
            design.to_design()?;
            let (sweep, grid) = match (&args.eps_grid, &args.eta_grid) {
                (Some(g), None) => ("eps".to_string(), split_grid(g)?),
                (None, Some(g)) => ("eta".to_string(), split_grid(g)?),
                _ => {
                    return Err(Error::Config(
                        "sweep needs exactly one of --eps-grid / --eta-grid".into(),
                    ))
                }
            };
            let resolved =
                McResolved { design: design.resolved(), sweep, grid, jobs: args.jobs };
            commands::run_sweep(&resolved, &out)
        }
        Command::Exact(args) => {
            let stats: Vec<String> = parse_stats_list(&args.stats)?
                .iter()
                .map(|k| k.name().to_string())
                .collect();
            let resolved =
                ExactResolved { n: args.n, theta: parse_theta_list(&args.theta)?, stats };
            commands::run_exact(&resolved, &out)
        }
        Command::Rerun(args) => {
            init_pool(args.jobs);
            let manifest = Manifest::load(&args.manifest)?;
            commands::run_manifest(&manifest, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => {
            eprintln!("run finished with a numeric failure; partial outputs were written");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Numeric(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
