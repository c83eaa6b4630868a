//! CSV data for viable-set polygons and two-parameter slices of the potential.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use contract_synth::contracts::{potential, Channel, ContractError};
use contract_synth::geom::{linear_map, polygon_vertices_2d, vertices_csv, Zonotope};
use contract_synth::synthesis::{load_result_dir, StoredResult};
use ndarray::Array2;

use crate::synth::classify;
use crate::{CliError, CliResult, PlotArgs, PlotWhat};

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn project(z: &Zonotope, dims: [usize; 2]) -> Result<Zonotope, CliError> {
    let mut sel = Array2::zeros((2, z.dim()));
    for (r, &d) in dims.iter().enumerate() {
        if d >= z.dim() {
            return Err(CliError::Usage(format!("coordinate {d} out of range for a {}-dimensional set", z.dim())));
        }
        sel[[r, d]] = 1.0;
    }
    linear_map(sel.view(), z).map_err(|e| CliError::Run(e.to_string()))
}

fn polygon_csv(z: &Zonotope) -> Result<String, CliError> {
    polygon_vertices_2d(z).map(|v| vertices_csv(&v)).map_err(|e| CliError::Run(e.to_string()))
}

fn parse_state_dims(spec: Option<&str>, dim: usize) -> Result<[usize; 2], CliError> {
    let Some(spec) = spec else {
        if dim == 2 {
            return Ok([0, 1]);
        }
        return Err(CliError::Usage(format!("states are {dim}-dimensional; pick two coordinates with --dims a,b")));
    };
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let parsed: Vec<usize> = parts.iter().filter_map(|p| p.parse().ok()).collect();
    match parsed.as_slice() {
        [a, b] if parts.len() == 2 && a != b => Ok([*a, *b]),
        _ => Err(CliError::Usage(format!("--dims expects two distinct coordinates `a,b`, got `{spec}`"))),
    }
}

/// Per subsystem and step: `omega_<id>_t<t>.csv` and the matching `bound_<id>_t<t>.csv`.
fn viable_sets(stored: &StoredResult, dims: Option<&str>, out: &Path) -> Result<usize, CliError> {
    if stored.solutions.is_empty() {
        return Err(CliError::Run("the result holds no solutions".into()));
    }
    let net = &stored.network;
    let mut files = 0;
    let mut index = String::from("subsystem,t,omega_file,bound_file\n");
    for (s, sol) in net.subsystems.iter().zip(&stored.solutions) {
        let dims = parse_state_dims(dims, s.state_dim())?;
        let times = match net.mode {
            contract_synth::sysmodel::Mode::Finite => 0..=net.horizon,
            contract_synth::sysmodel::Mode::Infinite => 0..=0,
        };
        for t in times {
            let omega = format!("omega_{}_t{t}.csv", s.id);
            let bound = format!("bound_{}_t{t}.csv", s.id);
            write(&out.join(&omega), &polygon_csv(&project(&sol.omega(t), dims)?)?)?;
            write(&out.join(&bound), &polygon_csv(&project(s.x_at(t), dims)?)?)?;
            let _ = writeln!(index, "{},{t},{omega},{bound}", s.id);
            files += 1;
        }
    }
    write(&out.join("index.csv"), &index)?;
    Ok(files)
}

/// Parses `i:r[:t]` into an index of the state parameter vector.
fn parse_param(stored: &StoredResult, token: &str) -> Result<usize, CliError> {
    let bad = || CliError::Usage(format!("bad parameter `{token}`; expected subsystem:entry[:t]"));
    let parts: Vec<&str> = token.trim().split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let net = &stored.network;
    let i = net.index_of(parts[0]).or_else(|| parts[0].parse().ok().filter(|i| *i < net.len())).ok_or_else(bad)?;
    let r: usize = parts[1].parse().map_err(|_| bad())?;
    let t: usize = parts.get(2).map_or(Ok(0), |p| p.parse()).map_err(|_| bad())?;
    if t >= stored.params.steps {
        return Err(CliError::Usage(format!("step {t} out of range in `{token}`")));
    }
    let block = stored.params.block(i, t, Channel::State);
    if r >= block.len {
        return Err(CliError::Usage(format!("entry {r} out of range in `{token}` ({} entries)", block.len)));
    }
    Ok(block.offset + r)
}

fn axis(hi: f64, at: f64, grid: usize) -> Vec<f64> {
    if grid == 1 {
        return vec![at];
    }
    (0..grid).map(|g| hi * g as f64 / (grid - 1) as f64).collect()
}

/// Grid of `V` over two state parameters, the rest held at the stored values.
fn potential_slice(stored: &StoredResult, dims: Option<&str>, grid: usize, out: &Path) -> Result<usize, CliError> {
    let spec = dims.ok_or_else(|| CliError::Usage("potential-slice needs --dims i:r,j:s".into()))?;
    let tokens: Vec<&str> = spec.split(',').collect();
    let [ta, tb] = tokens.as_slice() else {
        return Err(CliError::Usage(format!("--dims expects two parameters, got `{spec}`")));
    };
    let (ra, rb) = (parse_param(stored, ta)?, parse_param(stored, tb)?);
    if ra == rb {
        return Err(CliError::Usage("--dims names the same parameter twice".into()));
    }
    if grid == 0 {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    let p = &stored.params;
    let k = stored.report.k;
    let reduction = stored.report.reduction_order;
    let mut csv = String::from("a1,a2,V\n");
    let mut points = 0;
    for a1 in axis(p.alpha_max[ra], p.alpha[ra], grid) {
        for a2 in axis(p.alpha_max[rb], p.alpha[rb], grid) {
            let mut alpha = p.alpha.clone();
            alpha[ra] = a1;
            alpha[rb] = a2;
            let v = match potential(&stored.network, &stored.template, &p.with_alpha(alpha), k, reduction) {
                Ok(pot) => pot.value,
                Err(ContractError::Infeasible { .. }) => f64::INFINITY,
                Err(e) => return Err(CliError::Run(e.to_string())),
            };
            let _ = writeln!(csv, "{a1},{a2},{v}");
            points += 1;
        }
    }
    write(&out.join("potential_slice.csv"), &csv)?;
    Ok(points)
}

pub fn run(args: &PlotArgs) -> CliResult {
    let stored = load_result_dir(&args.result).map_err(classify)?;
    let out: PathBuf = args.out.clone().unwrap_or_else(|| args.result.join("plot"));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    match args.what {
        PlotWhat::ViableSets => {
            let n = viable_sets(&stored, args.dims.as_deref(), &out)?;
            println!("wrote {n} viable-set polygons to {}", out.display());
        }
        PlotWhat::PotentialSlice => {
            let n = potential_slice(&stored, args.dims.as_deref(), args.grid, &out)?;
            println!("wrote {n} potential values to {}", out.join("potential_slice.csv").display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
