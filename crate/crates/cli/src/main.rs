//! `oflp`: scenario-driven pipeline for servicing depot placement.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use oflp_core::cost::CostMatrix;
use oflp_core::elements::KeplerianElements;
use oflp_core::launch::{write_z_contour_csv, z_contour};
use oflp_core::oflp::SolveStatus;
use oflp_core::pipeline::{prepare, run_sweep, write_sweep_csv, Prepared, SolutionDocument};
use oflp_core::qlaw::{propagate_transfer, propagate_transfer_traced, write_trace_csv, Spacecraft};
use oflp_core::scenario::Scenario;
use oflp_core::slots::write_grid_csv;
use oflp_core::Error;

#[derive(Parser)]
#[command(name = "oflp", version, about = "Optimal placement of on-orbit servicing depots")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Q-law transfer between two orbits.
    Transfer {
        /// Start orbit `a_du,e,i_deg,raan_deg,argp_deg[,ta_deg]`.
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        /// Target orbit in the same format.
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Start mass in kg (defaults to the servicer dry mass).
        #[arg(long)]
        mass: Option<f64>,
        /// Write the state history to this CSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Build (or load from cache) the client × slot cost matrix.
    Costmatrix {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Worker threads (defaults to the scenario setting).
        /// Worker threads (defaults to the scenario setting).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve the facility location program and write the solution JSON.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Worker threads (defaults to the scenario setting).
        #[arg(long)]
        workers: Option<usize>,
        /// Also write the model in LP format.
        #[arg(long)]
        lp: bool,
    },
    /// Solve over combinations of architecture parameters.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Comma-separated axes: D, m_s_dry, m_d_dry, lambda, rho.
        #[arg(long, value_delimiter = ',', required = true)]
        over: Vec<String>,
        /// Worker threads (defaults to the scenario setting).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Refine every facility of a solution in continuous element space.
    Refine {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Solution JSON written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Random seed (defaults to the scenario setting).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the scenario setting).
        #[arg(long)]
        workers: Option<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) | Error::UnservableClients(_) => 2,
        Error::Propagation(_) | Error::Singular(_) => 3,
        _ => 1,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Transfer { from, to, scenario, mass, trace } => transfer(&from, &to, &scenario.scenario, mass, trace),
        Command::Costmatrix { scenario, workers } => costmatrix(&scenario.scenario, workers),
        Command::Solve { scenario, workers, lp } => solve(&scenario.scenario, workers, lp),
        Command::Sweep { scenario, over, workers } => sweep(&scenario.scenario, &over, workers),
        Command::Refine { scenario, solution, seed, workers } => refine(&scenario.scenario, &solution, seed, workers),
    }
}

fn parse_elements(text: &str) -> Result<KeplerianElements, Failure> {
    let usage = |m: String| Failure { code: 1, message: m };
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("bad number `{t}` in `{text}`"))))
        .collect::<Result<_, _>>()?;
    if !(5..=6).contains(&v.len()) {
        return Err(usage(format!("expected a_du,e,i_deg,raan_deg,argp_deg[,ta_deg], got `{text}`")));
    }
    Ok(KeplerianElements::from_degrees(v[0], v[1], v[2], v[3], v[4], v.get(5).copied().unwrap_or(0.0))?)
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Ok(Scenario::load(path)?)
}

fn transfer(from: &str, to: &str, scn: &Path, mass: Option<f64>, trace: Option<PathBuf>) -> CliResult {
    let s = load(scn)?;
    let (a, b) = (parse_elements(from)?, parse_elements(to)?);
    let sc = Spacecraft::new(s.servicer.thrust_n, s.servicer.isp_s, mass.unwrap_or(s.servicer.dry_kg))?;
    let (q, units) = (s.qlaw_params()?, s.unit_system()?);
    let res = match &trace {
        Some(path) => {
            let (res, rows) = propagate_transfer_traced(&a, &b, &sc, &q, &units)?;
            write_trace_csv(fs::File::create(path)?, &rows)?;
            res
        }
        None => propagate_transfer(&a, &b, &sc, &q, &units)?,
    };
    println!("tof={} dm={} converged={}", res.tof_days, res.dm_kg, res.converged);
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> CliResult {
    fs::write(path, serde_json::to_string_pretty(value).map_err(Error::from)? + "\n")?;
    Ok(())
}

fn write_common(prep: &Prepared) -> CliResult {
    let dir = prep.output_dir();
    fs::create_dir_all(&dir)?;
    write_grid_csv(fs::File::create(dir.join("grid.csv"))?, &prep.slots)?;
    let lp = prep.scenario.launch_params();
    let (a, e) = (prep.scenario.grid.a_du.values(), prep.scenario.grid.e.values());
    let rows = z_contour(&a, &e, prep.scenario.units.du_km, &lp);
    write_z_contour_csv(fs::File::create(dir.join("z_contour.csv"))?, &rows)?;
    Ok(())
}

fn cost_for(prep: &Prepared, workers: usize) -> Result<CostMatrix, Failure> {
    let start = Instant::now();
    let (cost, hit) = prep.cost_matrix(workers)?;
    if hit {
        println!("cache hit {}", cost.scenario_hash);
    }
    info!("cost matrix ready in {:.1} s", start.elapsed().as_secs_f64());
    Ok(cost)
}

fn costmatrix(scn: &Path, workers: Option<usize>) -> CliResult {
    let s = load(scn)?;
    let prep = prepare(&s)?;
    write_common(&prep)?;
    let cost = cost_for(&prep, workers.unwrap_or(s.workers))?;
    let out = prep.output_dir().join("costmatrix.csv");
    cost.write_csv(fs::File::create(&out)?)?;
    let meta = serde_json::json!({
        "scenario_hash": prep.scenario_hash,
        "cost_hash": cost.scenario_hash,
        "n_clients": cost.n_clients,
        "n_slots": cost.n_slots,
        "feasible_pairs": cost.feasible_count(),
    });
    write_json(&out.with_extension("json"), &meta)?;
    println!(
        "scenario_hash={} cost_hash={} clients={} slots={} feasible_pairs={} file={}",
        prep.scenario_hash,
        cost.scenario_hash,
        cost.n_clients,
        cost.n_slots,
        cost.feasible_count(),
        out.display()
    );
    Ok(())
}

fn solve(scn: &Path, workers: Option<usize>, lp: bool) -> CliResult {
    let s = load(scn)?;
    let prep = prepare(&s)?;
    write_common(&prep)?;
    let cost = cost_for(&prep, workers.unwrap_or(s.workers))?;
    let model = prep
        .model(&cost, s.multipliers)
        .map_err(|e| Failure { code: exit_code(&e), message: prep.describe_error(&e) })?;
    let dir = prep.output_dir();
    if lp {
        fs::write(dir.join("model.lp"), model.to_lp_string())?;
    }
    let sol = prep.solve(&model);
    if sol.status == SolveStatus::Infeasible {
        return Err(Failure { code: 2, message: "no allocation satisfies the launch-mass limit".into() });
    }
    let doc = prep.solution_document(&cost, &sol);
    let path = dir.join("solution.json");
    write_json(&path, &serde_json::to_value(&doc).map_err(Error::from)?)?;
    println!(
        "status={:?} objective_kg={} facilities={} gap={} nodes={} scenario_hash={}",
        sol.status, sol.objective, doc.n_facilities, sol.gap, sol.nodes, prep.scenario_hash
    );
    println!("{:>6} {:>8} {:>8} {:>8} {:>9} {:>12} {:>8}", "slot", "a_DU", "e", "i_deg", "raan_deg", "m_wet_kg", "clients");
    for f in &doc.facilities {
        println!(
            "{:>6} {:>8.3} {:>8.3} {:>8.2} {:>9.2} {:>12.1} {:>8}",
            f.slot_idx, f.a_du, f.e, f.i_deg, f.raan_deg, f.wet_mass_kg, f.n_clients
        );
    }
    println!("solution written to {}", path.display());
    Ok(())
}

fn sweep(scn: &Path, over: &[String], workers: Option<usize>) -> CliResult {
    let s = load(scn)?;
    let rows = run_sweep(&s, over, workers.unwrap_or(s.workers))?;
    fs::create_dir_all(&s.output_dir)?;
    let path = s.output_dir.join("sweep.csv");
    write_sweep_csv(fs::File::create(&path)?, &rows)?;
    write_json(&path.with_extension("json"), &serde_json::json!({ "scenario_hash": s.scenario_hash()?, "over": over }))?;
    write_sweep_csv(std::io::stdout(), &rows)?;
    println!("scenario_hash={} rows={} file={}", s.scenario_hash()?, rows.len(), path.display());
    Ok(())
}

fn refine(scn: &Path, solution: &Path, seed: Option<u64>, workers: Option<usize>) -> CliResult {
    let s = load(scn)?;
    let prep = prepare(&s)?;
    let doc = SolutionDocument::load(solution)?;
    let seed = seed.unwrap_or(s.refine.seed);
    let results = prep.refine_solution(&doc, seed, workers.unwrap_or(s.workers))?;
    let dir = prep.output_dir();
    fs::create_dir_all(&dir)?;
    println!(
        "{:>6} {:>8} {:>8} {:>8} {:>9} {:>14} {:>14} {:>12} {:>10}",
        "slot", "a_DU", "e", "i_deg", "raan_deg", "seed_emleo_kg", "best_emleo_kg", "m_wet_kg", "wet_red_%"
    );
    let mut summary = Vec::new();
    for r in &results {
        let path = dir.join(format!("refine_slot{}.csv", r.slot_idx));
        r.report.write_csv(fs::File::create(&path)?)?;
        let x = r.report.best_x;
        println!(
            "{:>6} {:>8.4} {:>8.4} {:>8.3} {:>9.3} {:>14.1} {:>14.1} {:>12.1} {:>10.2}",
            r.slot_idx,
            x[0],
            x[1],
            x[2].to_degrees(),
            x[3].to_degrees(),
            r.report.seed.emleo_kg,
            r.report.best.emleo_kg,
            r.report.best.wet_kg,
            100.0 * r.report.wet_reduction()
        );
        if r.report.best.emleo_kg > r.report.seed.emleo_kg {
            return Err(Failure { code: 3, message: format!("refinement of slot {} worsened the objective", r.slot_idx) });
        }
        summary.push(serde_json::json!({
            "slot_idx": r.slot_idx,
            "seed_x": r.report.seed_x,
            "best_x": r.report.best_x,
            "seed": r.report.seed,
            "best": r.report.best,
            "wet_reduction": r.report.wet_reduction(),
            "evaluations": r.report.evaluations,
            "report_csv": path.file_name().map(|n| n.to_string_lossy().into_owned()),
        }));
    }
    let doc = serde_json::json!({
        "scenario_hash": prep.scenario_hash,
        "seed": seed,
        "facilities": summary,
    });
    write_json(&dir.join("refine.json"), &doc)?;
    println!("scenario_hash={} seed={}", prep.scenario_hash, seed);
    Ok(())
}
