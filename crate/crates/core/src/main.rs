//! Command-line entry point: synthetic network generation, single-shot
//! estimation at a query pair, Monte Carlo verification of the finite-sample
//! bounds, and rate-of-convergence sweeps.
//!
//! `verify` exits 0 only when every acceptance check requested by the plan
//! passes; all other commands exit 0 on success and nonzero on error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use covariate_sbm::estimators::{estimate_at, EstimateSettings};
use covariate_sbm::model::ModelSpec;
use covariate_sbm::montecarlo::{self, ExperimentPlan};
use covariate_sbm::network::{self, Network};
use covariate_sbm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "covariate-sbm",
    version,
    about = "Block models with covariates: generation, localized spectral estimation, and bound verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a network and write edges.csv, covariates.csv, labels.csv, and
    /// a model.json echo into a directory.
    Generate {
        /// Model description (JSON).
        #[arg(long)]
        model: PathBuf,
        /// Number of nodes.
        #[arg(long)]
        n: usize,
        /// Generator seed.
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full estimation pipeline at one query pair on saved data and
    /// write the result as JSON.
    Estimate {
        /// Adjacency CSV written by `generate`.
        #[arg(long)]
        edges: PathBuf,
        /// Covariate CSV written by `generate`.
        #[arg(long)]
        covariates: PathBuf,
        /// First query point: comma-separated coordinates, e.g. "0.3" or "0.3,0.4".
        #[arg(long)]
        x: String,
        /// Second query point, same format as --x.
        #[arg(long)]
        xp: String,
        /// Neighbourhood size.
        #[arg(long)]
        k: usize,
        /// Regularizer; omit for the data-driven default (mean block degree).
        #[arg(long)]
        tau: Option<f64>,
        /// Number of communities.
        #[arg(long)]
        groups: usize,
        /// Seed for the clustering restarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment plan; writes records.csv and summary.json.
    /// Exits 0 only when all the plan's coverage checks pass.
    Verify {
        /// Experiment plan (JSON).
        #[arg(long)]
        plan: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit log-log rate slopes of a metric's medians over the plan's sample
    /// sizes, with k pinned to the rate-optimal choice.
    Sweep {
        /// Experiment plan (JSON).
        #[arg(long)]
        plan: PathBuf,
        /// Metric to sweep: deviation, misclustering, B_err, pi_err, ...
        #[arg(long)]
        metric: String,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_point(flag: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|e| Error::Parse {
                file: flag.to_string(),
                message: format!("bad coordinate {t:?}: {e}"),
            })
        })
        .collect()
}

fn read_model(path: &PathBuf) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

/// `Ok(true)` means every requested acceptance property passed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Generate { model, n, seed, out } => {
            let spec = read_model(&model)?;
            let network = Network::generate(&spec, n, seed)?;
            network::write_network(&out, &network, &spec)?;
            println!(
                "generated {} nodes ({} communities, dim {}) into {}",
                n,
                spec.groups,
                spec.dim,
                out.display()
            );
            Ok(true)
        }
        Command::Estimate {
            edges,
            covariates,
            x,
            xp,
            k,
            tau,
            groups,
            seed,
            out,
        } => {
            let covariates = network::read_covariates(&covariates)?;
            let adjacency = network::read_edges(&edges, covariates.nrows())?;
            let x = parse_point("--x", &x)?;
            let xp = parse_point("--xp", &xp)?;
            let mut settings = EstimateSettings::new(k, groups, seed);
            settings.tau = tau;
            let result = estimate_at(&adjacency, &covariates, &x, &xp, &settings)?;
            let mut json = serde_json::to_string_pretty(&result)?;
            json.push('\n');
            fs::write(&out, json)?;
            println!(
                "estimated at ({x:?}, {xp:?}) with k = {k}, tau = {}: wrote {}",
                result.tau,
                out.display()
            );
            Ok(true)
        }
        Command::Verify { plan, out } => {
            let plan = ExperimentPlan::load(&plan)?;
            let summary = montecarlo::verify(&plan, &out)?;
            println!(
                "{} records across {} cells x {} replications ({} failures)",
                summary.records, summary.cells, summary.replications, summary.failures
            );
            for check in &summary.checks {
                println!(
                    "check {} <= {} [{}]: {} ({} cells, {} failing, {} vacuous)",
                    check.metric,
                    check.bound,
                    match check.stratum {
                        montecarlo::Stratum::All => "all",
                        montecarlo::Stratum::ConditionsPass => "conditions_pass",
                        montecarlo::Stratum::ConditionsFail => "conditions_fail",
                    },
                    if check.pass { "PASS" } else { "FAIL" },
                    check.cells,
                    check.failing_cells,
                    check.vacuous_cells
                );
            }
            println!("wrote {}", out.join("records.csv").display());
            println!("wrote {}", out.join("summary.json").display());
            Ok(summary.all_checks_pass)
        }
        Command::Sweep { plan, metric, out } => {
            let plan = ExperimentPlan::load(&plan)?;
            let report = montecarlo::sweep(&plan, &metric)?;
            fs::write(&out, report.to_csv())?;
            let mut seen = std::collections::BTreeSet::new();
            for row in &report.rows {
                if seen.insert((row.query, row.tau_index, row.delta.to_bits())) {
                    println!(
                        "slope[{}] query {} tau_index {} delta {}: {:.4} (se {:.4})",
                        report.metric, row.query, row.tau_index, row.delta, row.slope, row.slope_se
                    );
                }
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more acceptance checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
