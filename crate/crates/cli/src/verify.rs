use std::process::ExitCode;

use contract_synth::runtime::{simulate, verify_invariance, ControllerBank};
use contract_synth::synthesis::load_result_dir;

use crate::synth::classify;
use crate::{CliError, CliResult, VerifyArgs};

pub fn run(args: &VerifyArgs) -> CliResult {
    let stored = load_result_dir(&args.result).map_err(classify)?;
    if stored.solutions.is_empty() {
        return Err(CliError::Run(format!("{} holds no solutions (status {})", args.result.display(), stored.report.status)));
    }
    let report = verify_invariance(&stored.network, &stored.solutions, args.samples, args.steps, args.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let path = args.result.join("verification.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;

    if let Some(traj_path) = &args.trajectory {
        let mut bank = ControllerBank::new(&stored.network, &stored.solutions).map_err(|e| CliError::Usage(e.to_string()))?;
        let initial = (0..bank.len()).map(|i| bank.omega(i, 0).center().clone()).collect();
        let steps = bank.horizon().unwrap_or(args.steps);
        let network = &stored.network;
        let traj = simulate(network, &mut bank, initial, steps, |i, t| network.subsystems[i].d_at(t).center().clone());
        std::fs::write(traj_path, traj.to_csv()).map_err(|e| CliError::Usage(format!("{}: {e}", traj_path.display())))?;
    }

    println!(
        "{} trajectories x {} steps: {} violations{}",
        report.samples,
        report.steps,
        report.violations,
        if report.vacuous { " (vacuous: no samples)" } else { "" }
    );
    if let Some((j, v)) = &report.first_violation {
        println!(
            "first violation: trajectory {j}, subsystem {}, t = {}, {:?}, residual {:e}",
            stored.network.subsystems[v.subsystem].id, v.t, v.kind, v.residual
        );
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
