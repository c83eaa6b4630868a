//! Scaling benchmark on random networks.

use std::fs::OpenOptions;
use std::process::ExitCode;

use clap::ValueEnum;
use contract_synth::contracts::default_template;
use contract_synth::synthesis::{
    centralized_dense, centralized_synthesize, compositional_synthesize, CentralizedConfig, DescentConfig, SynthesisResult,
    TIME_OUT_HINT,
};
use contract_synth::sysmodel::{random_network_with, Network};
use serde::Serialize;

use crate::{load_random_params, subsystem_count, BenchArgs, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    /// One viable set for the aggregated network.
    CentralizedDense,
    /// One program over all local tubes and contract parameters.
    CentralizedDecentralized,
    /// Gradient descent on the contract potential.
    Compositional,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub dimension: usize,
    pub lambda: f64,
    pub method: BenchMethod,
    pub solver_seconds: f64,
    pub wall_seconds: f64,
    /// `success`, `failed` or `time out`.
    pub status: String,
    pub iterations: usize,
    pub seed: u64,
}

fn status(ok: bool, timed_out: bool) -> String {
    match (ok, timed_out) {
        (true, _) => "success".into(),
        (false, true) => "time out".into(),
        (false, false) => "failed".into(),
    }
}

fn timed_out(r: &SynthesisResult) -> bool {
    r.report.hint.as_deref() == Some(TIME_OUT_HINT)
}

fn run_method(network: &Network, method: BenchMethod, args: &BenchArgs) -> Result<(f64, f64, String, usize), CliError> {
    let budget = Some(args.timeout);
    let run_err = |e: contract_synth::synthesis::SynthesisError| CliError::Run(e.to_string());
    Ok(match method {
        BenchMethod::CentralizedDense => {
            let r = centralized_dense(network, args.k, budget).map_err(run_err)?;
            (r.solver_seconds, r.wall_seconds, status(r.feasible, r.timed_out), 1)
        }
        BenchMethod::CentralizedDecentralized => {
            let template = default_template(network);
            let r = centralized_synthesize(network, &template, &CentralizedConfig { k: args.k, time_limit: budget })
                .map_err(run_err)?;
            let t = &r.report.timings;
            (t.solver_seconds, t.wall_seconds, status(r.is_correct(), timed_out(&r)), 1)
        }
        BenchMethod::Compositional => {
            let template = default_template(network);
            let cfg = DescentConfig { k: args.k, time_limit: budget, ..DescentConfig::default() };
            let r = compositional_synthesize(network, &template, &cfg).map_err(run_err)?;
            let t = &r.report.timings;
            (t.solver_seconds, t.wall_seconds, status(r.is_correct(), timed_out(&r)), r.report.iterations)
        }
    })
}

pub fn run(args: &BenchArgs) -> CliResult {
    let params = load_random_params(args.params.as_ref())?;
    if let Some(l) = &args.lambda_schedule {
        if l.len() != args.sizes.len() {
            return Err(CliError::Usage(format!("{} sizes but {} λ values", args.sizes.len(), l.len())));
        }
    }
    let mut plan = Vec::with_capacity(args.sizes.len());
    for (pos, &size) in args.sizes.iter().enumerate() {
        let count = subsystem_count(size, &params)?;
        let lambda = match &args.lambda_schedule {
            Some(l) => l[pos],
            None => params
                .lambda_for(size)
                .ok_or_else(|| CliError::Usage(format!("size {size} has no λ in the schedule; pass --lambda-schedule")))?,
        };
        plan.push((size, count, lambda));
    }

    let mut writer = match &args.out {
        Some(path) => {
            let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            Some(csv::WriterBuilder::new().has_headers(fresh).from_writer(file))
        }
        None => None,
    };

    println!("{:>9} {:>8} {:>26} {:>12} {:>10} {:>9}", "dimension", "lambda", "method", "solver [s]", "status", "iters");
    for (size, count, lambda) in plan {
        let network = random_network_with(count, lambda, args.seed, &params).map_err(|e| CliError::Usage(e.to_string()))?;
        for &method in &args.methods {
            let (solver_seconds, wall_seconds, status, iterations) = run_method(&network, method, args)?;
            let row = BenchmarkRow { dimension: size, lambda, method, solver_seconds, wall_seconds, status, iterations, seed: args.seed };
            let name = method.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            println!(
                "{:>9} {:>8} {:>26} {:>12.4} {:>10} {:>9}",
                row.dimension, row.lambda, name, row.solver_seconds, row.status, row.iterations
            );
            if let Some(w) = writer.as_mut() {
                w.serialize(&row).map_err(|e| CliError::Usage(e.to_string()))?;
                w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
