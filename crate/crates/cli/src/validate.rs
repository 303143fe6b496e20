//! `validate` suites: oracle and property checks on seeded instances.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaybf::heuristics::{equal_power_bf, max_power_bf};
use relaybf::linalg::CMat;
use relaybf::model::{rate_pair, relay_powers, snr_pair};
use relaybf::nonrecip::{individual_power_point, sum_power_point, BisectionConfig, RateProfile};
use relaybf::oracle::{
    best_wsis_grid, brute_force_hull, factorization_feasible, factorization_solve, random_beamformer_cloud,
    CloudPhases, FactorizedSdp,
};
use relaybf::recip::{
    broadcast_params_indiv, broadcast_params_sum, local_weight_indiv, local_weight_sum, wsis_objective, wsismin,
    wsismin_individual, wsismin_rates, wsismin_sum_power, RelayLocal,
};
use relaybf::region::{
    build_region, convex_hull, hull_contains, read_points_csv, sample_channels, Grid, RegionResult, RelayNoise,
    Scenario, SolverChoice, SCHEMA_VERSION,
};
use relaybf::sdp::{solve_feasibility, solve_min_trace, Constraint, SdpProblem, SdpStatus};
use relaybf::{ChannelSet, Complex64, PowerBudget, RatePair, SystemParams};
use serde::Serialize;

use crate::{exit, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Recip,
    Nonrecip,
    Region,
    Sdp,
    All,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for the report and any counterexample.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Everything needed to reproduce a failing instance.
#[derive(Debug, Clone, Serialize)]
struct Counterexample {
    scenario: Option<Scenario>,
    seed: u64,
    realization_index: Option<u64>,
    detail: String,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    suite: Suite,
    name: &'static str,
    passed: bool,
    detail: String,
    seconds: f64,
    counterexample: Option<Counterexample>,
}

type Outcome = Result<String, Box<Counterexample>>;

const K: usize = 5;
const CAPS: [f64; K] = [2.5, 3.0, 0.5, 1.0, 3.0];

fn scenario(reciprocal: bool, budget: PowerBudget, seed: u64) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        relays: K,
        p_s1: 1.0,
        p_s2: 1.0,
        sigma_relay: RelayNoise::Uniform(1.0),
        sigma_s1_sq: 1.0,
        sigma_s2_sq: 1.0,
        budget,
        reciprocal,
        channel_variance: 1.0,
        grid: Grid::Step(0.1),
        realizations: 5,
        seed,
        epsilon: 1e-6,
        rand_candidates: 1000,
        solver: SolverChoice::Auto,
    }
}

struct Instance {
    sc: Scenario,
    ch: ChannelSet,
    sp: SystemParams,
    index: u64,
}

impl Instance {
    fn new(sc: &Scenario, index: u64) -> Self {
        Self {
            ch: sample_channels(&sc.channel_spec(), sc.seed, index).expect("valid spec"),
            sp: sc.system_params().expect("valid scenario"),
            sc: sc.clone(),
            index,
        }
    }

    fn fail(&self, detail: String) -> Box<Counterexample> {
        Box::new(Counterexample {
            scenario: Some(self.sc.clone()),
            seed: self.sc.seed,
            realization_index: Some(self.index),
            detail,
        })
    }
}

fn bare(seed: u64, detail: String) -> Box<Counterexample> {
    Box::new(Counterexample {
        scenario: None,
        seed,
        realization_index: None,
        detail,
    })
}

fn sweep_hull(inst: &Instance, step: f64) -> Vec<RatePair> {
    let n = (1.0 / step).round() as usize;
    let mut pts: Vec<RatePair> = (0..=n)
        .map(|i| wsismin_rates(&inst.ch, &inst.sp, &inst.sc.budget, i as f64 / n as f64).unwrap())
        .collect();
    let (lo, hi) = (pts[0], pts[n]);
    pts.push(RatePair::new(0.0, lo.r2));
    pts.push(RatePair::new(hi.r1, 0.0));
    convex_hull(&pts)
}

fn recip_containment(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    for budget in [PowerBudget::Sum(10.0), PowerBudget::Individual(CAPS.to_vec())] {
        let sc = scenario(true, budget, seed);
        for i in 0..5 {
            let inst = Instance::new(&sc, i);
            let hull = sweep_hull(&inst, 0.02);
            let cloud = random_beamformer_cloud(&inst.ch, &inst.sp, &sc.budget, 10_000, seed ^ i, CloudPhases::Matched)
                .map_err(|e| inst.fail(e.to_string()))?;
            let pts: Vec<RatePair> = cloud.iter().map(|s| s.rates).collect();
            let c = hull_contains(&hull, &pts, 1e-6);
            worst = worst.max(c.max_violation);
            if !c.contained {
                return Err(inst.fail(format!("random beamformer outside the sweep hull by {:.3e}", c.max_violation)));
            }
        }
    }
    Ok(format!("10 realizations × 10⁴ samples, worst excess {worst:.2e}"))
}

fn recip_reassembly(seed: u64) -> Outcome {
    let mut worst = 0.0f64;
    for budget in [PowerBudget::Sum(10.0), PowerBudget::Individual(CAPS.to_vec())] {
        let sc = scenario(true, budget, seed);
        for i in 0..100 {
            let inst = Instance::new(&sc, i);
            let mu = i as f64 / 99.0;
            let relays = RelayLocal::all(&inst.ch, &inst.sp);
            let (central, local): (_, Vec<Complex64>) = match &sc.budget {
                PowerBudget::Sum(p_r) => {
                    let sol = wsismin_sum_power(&inst.ch, &inst.sp, *p_r, mu).map_err(|e| inst.fail(e.to_string()))?;
                    let (m, s) = broadcast_params_sum(&sol);
                    let local = relays.iter().map(|r| local_weight_sum(r, &inst.sp, *p_r, m, s)).collect();
                    (sol.beamformer(&inst.ch).unwrap(), local)
                }
                PowerBudget::Individual(p) => {
                    let sol = wsismin_individual(&inst.ch, &inst.sp, p, mu).map_err(|e| inst.fail(e.to_string()))?;
                    let (m, l) = broadcast_params_indiv(&sol);
                    let local = relays
                        .iter()
                        .zip(p)
                        .map(|(r, &pi)| local_weight_indiv(r, &inst.sp, pi, m, l))
                        .collect();
                    (sol.beamformer(&inst.ch, &inst.sp, p).unwrap(), local)
                }
            };
            let e = central
                .weights()
                .iter()
                .zip(&local)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            worst = worst.max(e);
            if e > 1e-12 {
                return Err(inst.fail(format!("local rule differs by {e:.3e} at mu = {mu}")));
            }
        }
    }
    Ok(format!("200 instances, max elementwise error {worst:.2e}"))
}

fn recip_grid(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in 0..10u64 {
        let k = 2 + (n % 2) as usize;
        let budget = if k == 2 {
            PowerBudget::Sum(10.0)
        } else {
            PowerBudget::Individual(CAPS[..3].to_vec())
        };
        let sc = Scenario {
            relays: k,
            ..scenario(true, budget.clone(), seed)
        };
        let inst = Instance::new(&sc, n);
        let mu: f64 = rng.random();
        let f = wsis_objective(
            snr_pair(&inst.ch, &inst.sp, &wsismin(&inst.ch, &inst.sp, &budget, mu).unwrap()).unwrap(),
            mu,
        );
        let res = if k == 2 { 1e-4 } else { 0.01 };
        let g = best_wsis_grid(&inst.ch, &inst.sp, &budget, mu, res).map_err(|e| inst.fail(e.to_string()))?;
        worst = worst.max(g.objective - f);
        if f > g.objective * (1.0 + 1e-12) || g.objective - f > g.lipschitz_gap + 1e-15 {
            return Err(inst.fail(format!(
                "mu = {mu}: closed form {f}, grid {} (bound {})",
                g.objective, g.lipschitz_gap
            )));
        }
    }
    Ok(format!("10 instances, largest grid gap {worst:.2e}"))
}

fn nonrecip_exactness(seed: u64) -> Outcome {
    let sc = scenario(false, PowerBudget::Sum(10.0), seed);
    let cfg = BisectionConfig::default().with_epsilon(1e-6);
    let mut worst = 0.0f64;
    for i in 0..5 {
        let inst = Instance::new(&sc, i);
        for kappa in [0.25, 0.5, 0.75] {
            let pt = sum_power_point(&inst.ch, &inst.sp, 10.0, kappa, &cfg).map_err(|e| inst.fail(e.to_string()))?;
            let got = RateProfile::new(kappa).unwrap().sum_rate_of(pt.rank_one.rates);
            let short = pt.outcome.r_sum - got;
            worst = worst.max(short);
            let p: f64 = relay_powers(&inst.ch, &inst.sp, &pt.rank_one.w).unwrap().iter().sum();
            if short > 1e-4 || p > 10.0 * (1.0 + 1e-6) {
                return Err(inst.fail(format!(
                    "kappa = {kappa}: rank-one rate {got} vs relaxed {}, power {p}",
                    pt.outcome.r_sum
                )));
            }
        }
    }
    Ok(format!("15 profile points, worst shortfall {worst:.2e} bits"))
}

fn nonrecip_endpoints(seed: u64) -> Outcome {
    let sc = scenario(true, PowerBudget::Sum(10.0), seed);
    let cfg = BisectionConfig::default().with_epsilon(1e-6);
    let mut worst = 0.0f64;
    for i in 0..5 {
        let inst = Instance::new(&sc, i);
        for (mu, kappa) in [(1.0, 1.0), (0.0, 0.0)] {
            let closed = wsismin_rates(&inst.ch, &inst.sp, &sc.budget, mu).unwrap();
            let pt = sum_power_point(&inst.ch, &inst.sp, 10.0, kappa, &cfg).map_err(|e| inst.fail(e.to_string()))?;
            let (a, b) = if kappa == 1.0 {
                (closed.r1, pt.outcome.r_sum)
            } else {
                (closed.r2, pt.outcome.r_sum)
            };
            worst = worst.max((a - b).abs());
            if (a - b).abs() > 1e-3 {
                return Err(inst.fail(format!("one-way endpoint: closed form {a}, bisection {b}")));
            }
        }
    }
    Ok(format!("5 reciprocal realizations, max endpoint deviation {worst:.2e} bits"))
}

fn nonrecip_randomization(seed: u64) -> Outcome {
    let sc = scenario(false, PowerBudget::Individual(CAPS.to_vec()), seed);
    let cfg = BisectionConfig::default().with_epsilon(1e-5);
    let mut worst = 0.0f64;
    for i in 0..3 {
        let inst = Instance::new(&sc, i);
        let pt = individual_power_point(&inst.ch, &inst.sp, &CAPS, 0.5, &cfg, 500, seed ^ i)
            .map_err(|e| inst.fail(e.to_string()))?;
        let powers = relay_powers(&inst.ch, &inst.sp, &pt.rank_one.w).unwrap();
        let got = RateProfile::new(0.5).unwrap().sum_rate_of(pt.rank_one.rates);
        worst = worst.max(pt.outcome.r_sum - got);
        if !sc.budget.admits(&powers, 1e-9) || got > pt.outcome.r_up + 1e-6 {
            return Err(inst.fail(format!(
                "randomized beamformer infeasible or above the relaxed bound: powers {powers:?}, rate {got}, bound {}",
                pt.outcome.r_up
            )));
        }
    }
    Ok(format!("3 realizations, worst gap to relaxed bound {worst:.3} bits"))
}

fn region_hull(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..5 {
        let pts: Vec<RatePair> = (0..1000).map(|_| RatePair::new(rng.random(), rng.random())).collect();
        let (a, b) = (convex_hull(&pts), brute_force_hull(&pts));
        if a != b || convex_hull(&a) != a {
            return Err(bare(seed, format!("trial {trial}: monotone chain {a:?} vs gift wrapping {b:?}")));
        }
    }
    Ok("5 × 1000 random points match the quadratic hull".into())
}

fn region_chain(seed: u64) -> Outcome {
    let sum = scenario(true, PowerBudget::Sum(10.0), seed);
    let ind = scenario(true, PowerBudget::Individual(CAPS.to_vec()), seed);
    let mut worst = 0.0f64;
    for i in 0..5 {
        let s = Instance::new(&sum, i);
        let d = Instance::new(&ind, i);
        let sum_hull = sweep_hull(&s, 0.001);
        let ind_hull = sweep_hull(&d, 0.001);
        let eq = rate_pair(&s.ch, &s.sp, &equal_power_bf(&s.ch, &s.sp, 10.0).unwrap()).unwrap();
        let mx = rate_pair(&d.ch, &d.sp, &max_power_bf(&d.ch, &d.sp, &CAPS).unwrap()).unwrap();
        for (what, hull, pts) in [
            ("individual region", &sum_hull, ind_hull.clone()),
            ("equal-power point", &sum_hull, vec![eq]),
            ("max-power point", &ind_hull, vec![mx]),
        ] {
            let c = hull_contains(hull, &pts, 1e-6);
            worst = worst.max(c.max_violation);
            if !c.contained {
                return Err(s.fail(format!("{what} leaves its outer region by {:.3e}", c.max_violation)));
            }
        }
    }
    Ok(format!("5 realizations, worst excess {worst:.2e}"))
}

fn region_round_trip(seed: u64, out: &std::path::Path) -> Outcome {
    let sc = Scenario {
        realizations: 3,
        ..scenario(true, PowerBudget::Sum(10.0), seed)
    };
    let fail = |d: String| {
        Box::new(Counterexample {
            scenario: Some(sc.clone()),
            seed,
            realization_index: None,
            detail: d,
        })
    };
    let res = build_region(&sc).map_err(|e| fail(e.to_string()))?;
    let dir = out.join("round_trip");
    fs::create_dir_all(&dir).map_err(|e| fail(e.to_string()))?;
    let (csv, json) = (dir.join("region.csv"), dir.join("region.json"));
    res.write_csv(&csv).map_err(|e| fail(e.to_string()))?;
    res.write_json(&json).map_err(|e| fail(e.to_string()))?;
    let back = RegionResult::read_json(&json).map_err(|e| fail(e.to_string()))?;
    let pts = read_points_csv(&csv).map_err(|e| fail(e.to_string()))?;
    if back != res || pts != res.region.points {
        return Err(fail("written region does not re-parse to the same data".into()));
    }
    if build_region(&sc).map_err(|e| fail(e.to_string()))? != res {
        return Err(fail("same seed produced a different region".into()));
    }
    Ok("CSV and JSON re-parse exactly; rerun is identical".into())
}

fn psd(rng: &mut ChaCha8Rng, k: usize, rank: usize) -> CMat {
    let g = CMat::from_fn(k, rank, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &g * g.adjoint()
}

fn sdp_random(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut gap, mut dev) = (0.0f64, 0.0f64);
    for n in 0..20 {
        let k = 3;
        let c = psd(&mut rng, k, k) + CMat::identity(k, k);
        let cons: Vec<Constraint> = (0..2)
            .map(|_| {
                let a = psd(&mut rng, k, 2);
                Constraint::new(a, rng.random_range(0.5..2.0))
            })
            .collect();
        let prob = SdpProblem::min_trace(c.clone(), cons.clone(), None).map_err(|e| bare(seed, e.to_string()))?;
        let sol = solve_min_trace(&prob).map_err(|e| bare(seed, e.to_string()))?;
        if sol.status != SdpStatus::Optimal || sol.duality_gap > 1e-7 || sol.max_violation > 1e-8 {
            return Err(bare(seed, format!(
                "instance {n}: status {:?}, gap {:.2e}, violation {:.2e}",
                sol.status, sol.duality_gap, sol.max_violation
            )));
        }
        gap = gap.max(sol.duality_gap);
        let fp = FactorizedSdp {
            k,
            objective: Some(c),
            constraints: cons.iter().map(|c| (c.a.clone(), c.b)).collect(),
            caps: vec![None; k],
        };
        let o = factorization_solve(&fp, 3, seed + n).map_err(|e| bare(seed, e.to_string()))?;
        let rel = (o.objective - sol.objective).abs() / sol.objective.abs().max(1e-12);
        dev = dev.max(rel);
        if rel > 1e-4 {
            return Err(bare(seed, format!("instance {n}: objective {} vs oracle {}", sol.objective, o.objective)));
        }
    }
    Ok(format!("20 K=3 problems, worst gap {gap:.1e}, oracle deviation {dev:.1e}"))
}

fn sdp_boundary(seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5d);
    let mut cases = 0;
    for n in 0..6u64 {
        let k = 3;
        let cons: Vec<(CMat, f64)> = (0..2).map(|_| (psd(&mut rng, k, 1), rng.random_range(1.0..3.0))).collect();
        let caps: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        let build = |scale: f64| {
            let c = cons
                .iter()
                .map(|(a, b)| Constraint::new(a.clone(), b * scale).with_slack_scale(b * scale))
                .collect();
            SdpProblem::feasibility(k, c, Some(caps.clone()))
        };
        let probe = build(1.0).map_err(|e| bare(seed, e.to_string()))?;
        let edge = 1.0 + solve_feasibility(&probe).map_err(|e| bare(seed, e.to_string()))?.objective;
        if edge <= 0.05 {
            continue;
        }
        for (scale, expect) in [(0.99 * edge, true), (1.01 * edge, false)] {
            let p = build(scale).map_err(|e| bare(seed, e.to_string()))?;
            let prod = solve_feasibility(&p).map_err(|e| bare(seed, e.to_string()))?.status == SdpStatus::Optimal;
            let fp = FactorizedSdp {
                k,
                objective: None,
                constraints: cons.iter().map(|(a, b)| (a.clone(), b * scale)).collect(),
                caps: caps.iter().copied().map(Some).collect(),
            };
            let (orc, _) = factorization_feasible(&fp, 3, seed + n, 1e-6).map_err(|e| bare(seed, e.to_string()))?;
            if prod != expect || orc != expect {
                return Err(bare(seed, format!(
                    "boundary case {n} at scale {scale:.4}: solver {prod}, oracle {orc}, expected {expect}"
                )));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} boundary verdicts agree"))
}

type CheckFn = fn(u64, &std::path::Path) -> Outcome;

fn checks(suite: Suite) -> Vec<(Suite, &'static str, CheckFn)> {
    let recip: Vec<(Suite, &'static str, CheckFn)> = vec![
        (Suite::Recip, "sweep_contains_random_beamformers", |s, _| recip_containment(s)),
        (Suite::Recip, "distributed_reassembly", |s, _| recip_reassembly(s)),
        (Suite::Recip, "grid_oracle", |s, _| recip_grid(s)),
    ];
    let nonrecip: Vec<(Suite, &'static str, CheckFn)> = vec![
        (Suite::Nonrecip, "sum_power_rank_one_exact", |s, _| nonrecip_exactness(s)),
        (Suite::Nonrecip, "one_way_endpoints_match", |s, _| nonrecip_endpoints(s)),
        (Suite::Nonrecip, "randomized_beamformer_feasible", |s, _| nonrecip_randomization(s)),
    ];
    let region: Vec<(Suite, &'static str, CheckFn)> = vec![
        (Suite::Region, "hull_matches_quadratic_oracle", |s, _| region_hull(s)),
        (Suite::Region, "containment_chain", |s, _| region_chain(s)),
        (Suite::Region, "files_round_trip", region_round_trip),
    ];
    let sdp: Vec<(Suite, &'static str, CheckFn)> = vec![
        (Suite::Sdp, "random_instances", |s, _| sdp_random(s)),
        (Suite::Sdp, "boundary_verdicts", |s, _| sdp_boundary(s)),
    ];
    match suite {
        Suite::Recip => recip,
        Suite::Nonrecip => nonrecip,
        Suite::Region => region,
        Suite::Sdp => sdp,
        Suite::All => [recip, nonrecip, region, sdp].concat(),
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    fs::create_dir_all(&args.out).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", args.out.display())))?;
    let mut reports = Vec::new();
    for (suite, name, run) in checks(args.suite) {
        let start = Instant::now();
        let outcome = run(args.seed, &args.out);
        let seconds = start.elapsed().as_secs_f64();
        let (passed, detail, counterexample) = match outcome {
            Ok(d) => (true, d, None),
            Err(c) => (false, c.detail.clone(), Some(*c)),
        };
        println!("{:<4} {:?}/{name}: {detail} [{seconds:.1}s]", if passed { "ok" } else { "FAIL" }, suite);
        reports.push(CheckReport {
            suite,
            name,
            passed,
            detail,
            seconds,
            counterexample,
        });
    }
    let failed: Vec<&CheckReport> = reports.iter().filter(|r| !r.passed).collect();
    let report = serde_json::json!({
        "suite": args.suite,
        "seed": args.seed,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "passed": failed.is_empty(),
        "checks": reports,
    });
    let path = args.out.join("validate_report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&path, text + "\n").map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))?;
    if let Some(first) = failed.first() {
        let dump = serde_json::to_string_pretty(&first.counterexample).expect("counterexample serializes");
        let cpath = args.out.join("counterexample.json");
        fs::write(&cpath, dump.clone() + "\n").map_err(|e| Failure::new(exit::IO, format!("{}: {e}", cpath.display())))?;
        eprintln!("counterexample ({}):\n{dump}", cpath.display());
        return Err(Failure::new(
            exit::VIOLATION,
            format!("{} of {} checks failed; report in {}", failed.len(), reports.len(), path.display()),
        ));
    }
    println!("all {} checks passed; report in {}", reports.len(), path.display());
    Ok(())
}
