//! Command-line front end. Exit codes: 0 success, 1 other failure,
//! 2 validation failure, 3 resource guard, 4 parse error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beliefmdp::diagnostics::Agreement;
use beliefmdp::measures::Dist;
use beliefmdp::models::MdpiiModel;
use beliefmdp::reduction::{expand_reachable, initial_nodes, parse_weights, DEFAULT_NODE_CAP};
use beliefmdp::runtime::{
    lift_policy, load_family_spec, load_model, monte_carlo_value, BeliefPolicy, DiagnosticSuite, Model, ModelFile,
};
use beliefmdp::solver::{
    brute_force_optimal, finite_horizon_solve, finite_mdp_solve, infinite_horizon_grid_solve, PolicyTree,
    StationaryGridPolicy,
};
use beliefmdp::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "beliefmdp", version, about = "Belief-state reduction and dynamic programming for partially observed MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Prior {
    /// Prior over unobservable states: `uniform`, `prior` (the file's) or
    /// comma-separated weights. Defaults to the file's prior, else uniform.
    #[arg(long)]
    belief: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Validate { model: PathBuf },
    /// Expand the reachable belief nodes and write nodes.csv and edges.csv.
    Reduce {
        model: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[command(flatten)]
        prior: Prior,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Finite-horizon solve; writes values.csv and policy.csv.
    Solve {
        model: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Discount; defaults to the file's.
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        prior: Prior,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Discounted infinite-horizon solve on a belief grid (value iteration
    /// on states for `mdp` files); writes grid.csv or mdp.csv.
    SolveInf {
        model: PathBuf,
        /// Lattice resolution.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Monte Carlo value of a policy file (policy.csv or grid.csv), or of the
    /// finite-horizon optimum with `--policy optimal`.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        prior: Prior,
    },
    /// Continuity moduli of a family spec, as CSV on stdout or to `--out`.
    Diagnose {
        spec: PathBuf,
        #[arg(long)]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force optimum over observation-history policies.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        prior: Prior,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) | Error::InvalidDistribution(_) => 2,
        Error::ResourceGuard(_) => 3,
        Error::Parse(_) => 4,
        _ => 1,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn prior(file: &ModelFile, m: &MdpiiModel, arg: &Prior) -> Result<Dist> {
    let n = m.num_states();
    let w = match arg.belief.as_deref() {
        None if matches!(file.model, Model::Mdp { .. }) => vec![1.0],
        None | Some("prior") => file.prior_or_uniform(n),
        Some("uniform") => vec![1.0 / n as f64; n],
        Some(s) => parse_weights(&s.replace(',', ";")).map_err(|e| Error::Parse(format!("--belief: {e}")))?,
    };
    if w.len() != n {
        return Err(Error::Parse(format!("--belief: expected {n} weights, found {}", w.len())));
    }
    Dist::new(m.states.clone(), w)
}

fn load(path: &Path) -> Result<(ModelFile, MdpiiModel)> {
    let file = load_model(path)?;
    let m = file.model.to_mdpii()?;
    Ok((file, m))
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Validate { model } => {
            let file = load_model(&model)?;
            let m = file.model.to_mdpii()?;
            writeln!(
                out,
                "valid {} model: {} states, {} observations, {} actions",
                file.model.kind(),
                m.num_states(),
                m.num_observations(),
                m.num_actions()
            )?;
        }
        Command::Reduce { model, horizon, prior: pa, out_dir } => {
            let (file, m) = load(&model)?;
            let p = prior(&file, &m, &pa)?;
            let roots: Vec<_> = initial_nodes(&m, &p)?.into_iter().map(|(n, _)| n).collect();
            let r = expand_reachable(&m, &roots, horizon, DEFAULT_NODE_CAP)?;
            r.write_nodes_csv(create(&out_dir, "nodes.csv")?, &m.observations)?;
            r.write_edges_csv(create(&out_dir, "edges.csv")?, &m.actions)?;
            writeln!(out, "nodes {}", r.node_count())?;
        }
        Command::Solve { model, horizon, alpha, prior: pa, out_dir } => {
            let (file, m) = load(&model)?;
            let p = prior(&file, &m, &pa)?;
            let sol = finite_horizon_solve(&m, &p, horizon, alpha.unwrap_or(m.discount))?;
            sol.write_values_csv(create(&out_dir, "values.csv")?)?;
            sol.policy.write_csv(create(&out_dir, "policy.csv")?, &m, &sol.reachable)?;
            writeln!(out, "value {}", sol.value)?;
        }
        Command::SolveInf { model, grid, alpha, tol, out_dir } => {
            let file = load_model(&model)?;
            if let Model::Mdp { model: mdp, .. } = &file.model {
                let sol = finite_mdp_solve(mdp, alpha.unwrap_or(mdp.discount), tol)?;
                let mut w = csv::Writer::from_writer(create(&out_dir, "mdp.csv")?);
                w.write_record(["state", "value", "action"]).map_err(|e| Error::Parse(e.to_string()))?;
                for (x, v) in sol.values.iter().enumerate() {
                    w.write_record([mdp.states.label(x), &v.to_string(), mdp.actions.label(sol.policy[x])])
                        .map_err(|e| Error::Parse(e.to_string()))?;
                }
                w.flush()?;
                writeln!(out, "iterations {}\nresidual {}", sol.iterations, sol.residual)?;
            } else {
                let pm = file.model.to_platzman()?.ok_or_else(|| {
                    Error::InvalidArgument("the grid solver needs a model whose kernel ignores the current observation".into())
                })?;
                let sol = infinite_horizon_grid_solve(&pm, grid, alpha.unwrap_or(pm.discount), tol)?;
                sol.write_csv(create(&out_dir, "grid.csv")?, &pm.actions)?;
                writeln!(
                    out,
                    "vertices {}\niterations {}\nlast_step {}\nerror_bound {}",
                    sol.values.len(),
                    sol.iterations,
                    sol.last_step,
                    sol.error_bound
                )?;
            }
        }
        Command::Simulate { model, policy, runs, seed, horizon, alpha, prior: pa } => {
            let (file, m) = load(&model)?;
            let p = prior(&file, &m, &pa)?;
            let alpha = alpha.unwrap_or(m.discount);
            let bp = if policy == "optimal" {
                BeliefPolicy::Tree(finite_horizon_solve(&m, &p, horizon, alpha)?.policy)
            } else {
                let text = std::fs::read_to_string(&policy)?;
                if text.lines().next().is_some_and(|h| h.split(',').any(|c| c == "vertex")) {
                    BeliefPolicy::Grid(StationaryGridPolicy::read_csv(text.as_bytes(), &m.actions)?)
                } else {
                    BeliefPolicy::Tree(PolicyTree::read_csv(text.as_bytes(), &m)?)
                }
            };
            let h = lift_policy(&m, &bp, &p)?;
            let est = monte_carlo_value(&m, &h, &p, horizon, alpha, runs, seed)?;
            writeln!(out, "mean {}\nstderr {}\nruns {}", est.mean, est.stderr, est.runs)?;
        }
        Command::Diagnose { spec, suite, out: path } => {
            let suite: DiagnosticSuite = suite.parse()?;
            let report = load_family_spec(&spec)?.run(suite)?;
            match path {
                Some(p) => report.write_csv(BufWriter::new(File::create(p)?))?,
                None => report.write_csv(&mut out)?,
            }
            let agreement = match report.agreement() {
                Agreement::AllVanish => "all vanish",
                Agreement::AllFail => "all fail",
                Agreement::Disagree => "disagree",
            };
            eprintln!("{agreement}");
            for r in &report.reports {
                eprintln!("{}: {}", r.name, r.verdict());
            }
        }
        Command::Oracle { model, horizon, alpha, prior: pa } => {
            let (file, m) = load(&model)?;
            let p = prior(&file, &m, &pa)?;
            let v = brute_force_optimal(&m, &p, horizon, alpha.unwrap_or(m.discount))?;
            writeln!(out, "value {v}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Invalid(v) = &e {
                for x in v {
                    eprintln!("  {x}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
