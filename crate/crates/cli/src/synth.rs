use std::process::ExitCode;

use contract_synth::contracts::ContractTemplate;
use contract_synth::synthesis::{
    centralized_synthesize, compositional_synthesize, write_result_dir, CentralizedConfig, DescentConfig, SynthesisError,
};
use contract_synth::sysmodel::{load_network, Mode, Network};

use crate::{CliError, CliResult, MethodArg, SynthArgs};

/// Configuration mistakes exit with 2; everything else is a failed run.
pub fn classify(e: SynthesisError) -> CliError {
    match e {
        SynthesisError::Config(_) | SynthesisError::Model(_) | SynthesisError::Io { .. } | SynthesisError::Format { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Run(other.to_string()),
    }
}

fn network_for(args: &SynthArgs) -> Result<Network, CliError> {
    let network = load_network(&args.config).map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let Some(mode) = args.mode else {
        if args.horizon.is_some() {
            return Err(CliError::Usage("--horizon needs --mode finite".into()));
        }
        return Ok(network);
    };
    let mode = Mode::from(mode);
    let horizon = match mode {
        Mode::Infinite => 0,
        Mode::Finite => args.horizon.or((network.horizon > 0).then_some(network.horizon)).ok_or_else(|| {
            CliError::Usage("finite mode needs --horizon for a network without one".into())
        })?,
    };
    network.with_mode(mode, horizon).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(args: &SynthArgs) -> CliResult {
    if !(0.0..1.0).contains(&args.beta) {
        return Err(CliError::Usage(format!("--beta must lie in [0, 1), got {}", args.beta)));
    }
    if args.beta != 0.0 {
        // With the guarantee scalings as variables, Z(0, E) ⊆ β Z(0, G^d) is bilinear.
        return Err(CliError::Usage(
            "contract synthesis uses invariant sets with E = 0, so only --beta 0 is supported".into(),
        ));
    }
    let network = network_for(args)?;
    let template = ContractTemplate::from_network(&network).map_err(|e| CliError::Usage(e.to_string()))?;
    let result = match args.method {
        MethodArg::Compositional => {
            let cfg = DescentConfig {
                delta: args.step,
                max_iters: args.max_iter,
                tol_v: args.tol,
                k: args.k,
                reduction_order: (args.reduce_order > 0).then_some(args.reduce_order),
                line_search: !args.no_line_search,
                seed: args.seed,
                time_limit: args.time_limit,
            };
            compositional_synthesize(&network, &template, &cfg)
        }
        MethodArg::Centralized => {
            centralized_synthesize(&network, &template, &CentralizedConfig { k: args.k, time_limit: args.time_limit })
        }
    }
    .map_err(classify)?;
    write_result_dir(&args.out, &network, &result).map_err(classify)?;

    let r = &result.report;
    println!(
        "{} {} ({} mode, k = {}): {} after {} iterations, V = {:e}, solver {:.3} s, wall {:.3} s",
        r.method,
        network.subsystems.len(),
        r.mode,
        r.k,
        r.status,
        r.iterations,
        r.potential,
        r.timings.solver_seconds,
        r.timings.wall_seconds
    );
    println!("results in {}", args.out.display());
    if result.is_correct() {
        Ok(ExitCode::SUCCESS)
    } else {
        if let Some(hint) = &r.hint {
            eprintln!("synthesis failed: {hint}");
        }
        Ok(ExitCode::from(1))
    }
}
