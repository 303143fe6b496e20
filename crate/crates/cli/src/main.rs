use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use relaybf::model::{rate_pair, relay_powers, snr_pair};
use relaybf::nonrecip::{individual_power_point, sum_power_point, BisectionConfig, RateProfile};
use relaybf::recip::{broadcast_params_indiv, broadcast_params_sum, wsismin_individual, wsismin_sum_power};
use relaybf::region::{build_region, sample_channels, Grid, Pipeline, RegionResult, Scenario};
use relaybf::{Beamformer, ChannelSet, PowerBudget, SystemParams};
use serde::Serialize;

mod validate;

/// Exit codes shared by every subcommand.
pub mod exit {
    pub const VIOLATION: u8 = 1;
    pub const BAD_INPUT: u8 = 2;
    pub const SOLVER: u8 = 3;
    pub const IO: u8 = 4;
}

/// Largest tolerated fraction of failed samples in a region run.
const FAILURE_BUDGET: f64 = 0.01;

#[derive(Parser, Debug)]
#[command(name = "relaybf", version, about = "Beamforming and rate regions for two-way relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the averaged rate region of a scenario and write CSV/JSON.
    Region(RegionArgs),
    /// Solve one boundary point for one channel realization.
    Solve(SolveArgs),
    /// Run an oracle/property suite.
    Validate(validate::ValidateArgs),
}

#[derive(Args, Debug)]
struct Overrides {
    /// Replace the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the grid with `0, step, …, 1`.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Replace the number of channel realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Bisection tolerance in bits.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Randomization candidates per rank-one recovery.
    #[arg(long)]
    rand_candidates: Option<usize>,
}

impl Overrides {
    fn apply(&self, sc: &mut Scenario) {
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(s) = self.grid_step {
            sc.grid = Grid::Step(s);
        }
        if let Some(n) = self.realizations {
            sc.realizations = n;
        }
        if let Some(e) = self.epsilon {
            sc.epsilon = e;
        }
        if let Some(n) = self.rand_candidates {
            sc.rand_candidates = n;
        }
    }
}

#[derive(Args, Debug)]
struct RegionArgs {
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write each realization's own hull to `hulls.csv`.
    #[arg(long)]
    per_realization: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("weight").required(true).args(["mu", "kappa"])))]
struct SolveArgs {
    scenario: PathBuf,
    /// WSISMin weight (reciprocal scenarios).
    #[arg(long)]
    mu: Option<f64>,
    /// Rate-profile share of source 1 (non-reciprocal scenarios).
    #[arg(long)]
    kappa: Option<f64>,
    /// Channel seed; defaults to the scenario seed.
    #[arg(long)]
    realization_seed: Option<u64>,
    /// Realization index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    realization_index: u64,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    overrides: Overrides,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<relaybf::Error> for Failure {
    fn from(e: relaybf::Error) -> Self {
        use relaybf::Error as E;
        let code = match &e {
            E::Solver(_) | E::Sdp(_) | E::Degenerate(_) => exit::SOLVER,
            E::Io(_) | E::Csv(_) => exit::IO,
            _ => exit::BAD_INPUT,
        };
        Failure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(exit::IO, format!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(exit::BAD_INPUT, format!("cannot read scenario {}: {e}", path.display())))?;
    let mut sc: Scenario = serde_json::from_str(&text)
        .map_err(|e| Failure::new(exit::BAD_INPUT, format!("malformed scenario {}: {e}", path.display())))?;
    overrides.apply(&mut sc);
    sc.validate()
        .map_err(|e| Failure::new(exit::BAD_INPUT, format!("invalid scenario {}: {e}", path.display())))?;
    Ok(sc)
}

fn cmd_region(args: &RegionArgs) -> Result<(), Failure> {
    let sc = load_scenario(&args.scenario, &args.overrides)?;
    log::info!(
        "building region: {} realizations, {} grid values, pipeline {:?}",
        sc.realizations,
        sc.grid.values().len(),
        sc.pipeline()
    );
    let res = build_region(&sc)?;
    if res.failure_rate() > FAILURE_BUDGET {
        return Err(Failure::new(
            exit::SOLVER,
            format!(
                "{} of {} samples failed ({:.2}%), above the {:.0}% budget",
                res.failures,
                res.tasks,
                100.0 * res.failure_rate(),
                100.0 * FAILURE_BUDGET
            ),
        ));
    }
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let csv = args.out.join("region.csv");
    let json = args.out.join("region.json");
    res.write_csv(&csv)?;
    res.write_json(&json)?;
    if let Some(relaxed) = &res.relaxed {
        relaybf::region::write_points_csv(&relaxed.points, &args.out.join("region_relaxed.csv"))?;
    }
    if args.per_realization {
        write_hulls(&res, &args.out.join("hulls.csv"))?;
    }
    // Round-trip through our own readers before reporting success.
    let back = RegionResult::read_json(&json)?;
    if back != res || relaybf::region::read_points_csv(&csv)? != res.region.points {
        return Err(Failure::new(exit::IO, "written files do not re-parse to the same data"));
    }
    print_region_summary(&res, &args.out);
    Ok(())
}

fn write_hulls(res: &RegionResult, path: &Path) -> Result<(), Failure> {
    let mut f = fs::File::create(path).map_err(|e| io_failure(path, e))?;
    let mut text = String::from("realization,vertex,r1,r2\n");
    for s in &res.samples {
        for (i, v) in s.hull().iter().enumerate() {
            text.push_str(&format!("{},{},{},{}\n", s.index, i, v.r1, v.r2));
        }
    }
    f.write_all(text.as_bytes()).map_err(|e| io_failure(path, e))
}

fn print_region_summary(res: &RegionResult, out: &Path) {
    println!("pipeline      {:?} (sweep over {})", res.provenance.pipeline, res.provenance.parameter);
    println!("realizations  {}", res.scenario.realizations);
    println!("grid points   {}", res.region.points.len());
    println!("hull vertices {}", res.region.hull.len());
    println!(
        "endpoints     r1_max {:.6}  r2_max {:.6}",
        res.region.endpoints.r1, res.region.endpoints.r2
    );
    if let Some(p) = res.max_sum_rate_point() {
        println!("max sum rate  {:.6} at ({:.6}, {:.6})", p.sum(), p.r1, p.r2);
    }
    if let Some(b) = &res.baseline {
        println!("baseline      {} ({:.6}, {:.6})", b.method, b.rates.r1, b.rates.r2);
    }
    println!("failures      {} of {} samples", res.failures, res.tasks);
    if res.sdp_unresolved > 0 {
        println!("sdp unresolved {}", res.sdp_unresolved);
    }
    println!("wrote         {}", out.display());
}

#[derive(Serialize)]
struct WeightRow {
    relay: usize,
    re: f64,
    im: f64,
    magnitude: f64,
    phase: f64,
    power: f64,
    cap: Option<f64>,
}

#[derive(Serialize)]
struct SolveReport {
    pipeline: Pipeline,
    mu: Option<f64>,
    kappa: Option<f64>,
    realization_seed: u64,
    realization_index: u64,
    r1: f64,
    r2: f64,
    snr1: f64,
    snr2: f64,
    total_power: f64,
    budget: PowerBudget,
    within_budget: bool,
    weights: Vec<WeightRow>,
    /// Values broadcast to relays by the partially distributed rule.
    broadcast: Option<serde_json::Value>,
    /// Relaxed bound and rank-one details for the SDP pipelines.
    relaxation: Option<serde_json::Value>,
}

fn solve_report(
    sc: &Scenario,
    ch: &ChannelSet,
    sp: &SystemParams,
    args: &SolveArgs,
    seed: u64,
) -> Result<SolveReport, Failure> {
    let pipeline = sc.pipeline();
    let (w, broadcast, relaxation): (Beamformer, _, _) = match (pipeline, args.mu, args.kappa) {
        (Pipeline::ClosedForm, Some(mu), None) => match &sc.budget {
            PowerBudget::Sum(p_r) => {
                let sol = wsismin_sum_power(ch, sp, *p_r, mu)?;
                let (m, s) = broadcast_params_sum(&sol);
                let b = serde_json::json!({"mu": m, "xi_over_norm": s});
                (sol.beamformer(ch)?, Some(b), None)
            }
            PowerBudget::Individual(p) => {
                let sol = wsismin_individual(ch, sp, p, mu)?;
                let (m, l) = broadcast_params_indiv(&sol);
                let b = serde_json::json!({"mu": m, "lambda_kstar": l, "k_star": sol.k_star});
                (sol.beamformer(ch, sp, p)?, Some(b), None)
            }
        },
        (Pipeline::SdpSum | Pipeline::SdpIndividual, None, Some(kappa)) => {
            let cfg = BisectionConfig::default().with_epsilon(sc.epsilon);
            let pt = match &sc.budget {
                PowerBudget::Sum(p_r) => sum_power_point(ch, sp, *p_r, kappa, &cfg)?,
                PowerBudget::Individual(p) => individual_power_point(ch, sp, p, kappa, &cfg, sc.rand_candidates, seed)?,
            };
            let profile = RateProfile::new(kappa)?;
            let r = serde_json::json!({
                "r_sum": pt.outcome.r_sum,
                "r_up": pt.outcome.r_up,
                "bisection_iterations": pt.outcome.iterations,
                "status": pt.outcome.status,
                "rank_one_source": pt.rank_one.source,
                "profile_rate": profile.sum_rate_of(pt.rank_one.rates),
            });
            (pt.rank_one.w, None, Some(r))
        }
        (Pipeline::ClosedForm, _, _) => {
            return Err(Failure::new(exit::BAD_INPUT, "reciprocal scenario takes --mu, not --kappa"));
        }
        _ => {
            return Err(Failure::new(exit::BAD_INPUT, "non-reciprocal scenario takes --kappa, not --mu"));
        }
    };
    let rates = rate_pair(ch, sp, &w)?;
    let snr = snr_pair(ch, sp, &w)?;
    let powers = relay_powers(ch, sp, &w)?;
    let caps: Vec<Option<f64>> = match &sc.budget {
        PowerBudget::Individual(p) => p.iter().copied().map(Some).collect(),
        PowerBudget::Sum(_) => vec![None; powers.len()],
    };
    let weights = w
        .weights()
        .iter()
        .zip(&powers)
        .zip(caps)
        .enumerate()
        .map(|(i, ((z, &p), cap))| WeightRow {
            relay: i,
            re: z.re,
            im: z.im,
            magnitude: z.norm(),
            phase: z.arg(),
            power: p,
            cap,
        })
        .collect();
    Ok(SolveReport {
        pipeline,
        mu: args.mu,
        kappa: args.kappa,
        realization_seed: seed,
        realization_index: args.realization_index,
        r1: rates.r1,
        r2: rates.r2,
        snr1: snr.snr1,
        snr2: snr.snr2,
        total_power: powers.iter().sum(),
        within_budget: sc.budget.admits(&powers, 1e-6),
        budget: sc.budget.clone(),
        weights,
        broadcast,
        relaxation,
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let sc = load_scenario(&args.scenario, &args.overrides)?;
    let seed = args.realization_seed.unwrap_or(sc.seed);
    let ch = sample_channels(&sc.channel_spec(), seed, args.realization_index)?;
    let sp = sc.system_params()?;
    let report = solve_report(&sc, &ch, &sp, args, seed)?;
    if args.json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::new(exit::IO, e.to_string()))?;
        println!("{text}");
    } else {
        print_solve(&report);
    }
    if !report.within_budget {
        return Err(Failure::new(exit::SOLVER, "beamformer exceeds the power budget"));
    }
    Ok(())
}

fn print_solve(r: &SolveReport) {
    match (r.mu, r.kappa) {
        (Some(mu), _) => println!("pipeline {:?}, mu = {mu}", r.pipeline),
        (_, Some(k)) => println!("pipeline {:?}, kappa = {k}", r.pipeline),
        _ => {}
    }
    println!("channels: seed {}, index {}", r.realization_seed, r.realization_index);
    println!("relay        re            im     |w|     phase     power       cap");
    for w in &r.weights {
        let cap = w.cap.map_or("-".to_string(), |c| format!("{c:.4}"));
        println!(
            "{:>5} {:>12.6} {:>12.6} {:>8.5} {:>8.4} {:>9.5} {:>9}",
            w.relay, w.re, w.im, w.magnitude, w.phase, w.power, cap
        );
    }
    println!("rates  r1 = {:.8}  r2 = {:.8}  (bits/channel use)", r.r1, r.r2);
    println!("snr    snr1 = {:.6}  snr2 = {:.6}", r.snr1, r.snr2);
    println!(
        "power  total = {:.6}  budget {:?}  within budget: {}",
        r.total_power,
        r.budget,
        if r.within_budget { "yes" } else { "NO" }
    );
    if let Some(b) = &r.broadcast {
        println!("broadcast {b}");
    }
    if let Some(x) = &r.relaxation {
        println!("relaxation {x}");
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Region(a) => cmd_region(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Validate(a) => validate::cmd_validate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
