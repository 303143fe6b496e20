//! Monte Carlo rate-region construction, hulls and region comparison.
//!
//! A [`Scenario`] fixes the system, the budget and the sweep. For every
//! channel realization the sweep produces one rate pair per grid value (a
//! WSISMin weight `μ` for reciprocal channels, a rate-profile `κ` otherwise);
//! the pairs are averaged per grid value across realizations and the
//! averages are hulled together with the averaged one-way endpoints on the
//! axes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heuristics::{baseline_bf, equal_power_bf, greedy_phase_bf, max_power_bf};
use crate::model::{rate_pair, ChannelSet, PowerBudget, RatePair, SystemParams};
use crate::nonrecip::{individual_power_point, sum_power_point, BisectionConfig, RateProfile};
use crate::recip::wsismin_rates;
use crate::Complex64;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_RAND_CANDIDATES: usize = 1000;

/// Relay noise variance: one value for every relay or one per relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RelayNoise {
    Uniform(f64),
    PerRelay(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Grid {
    /// `0, step, 2·step, …, 1`; 1 is always included.
    Step(f64),
    Values(Vec<f64>),
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Step(DEFAULT_GRID_STEP)
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Step(step) => {
                let n = (1.0 / step).round();
                if (n * step - 1.0).abs() < 1e-9 {
                    let n = n as usize;
                    (0..=n).map(|i| i as f64 / n as f64).collect()
                } else {
                    let mut v: Vec<f64> = (0..)
                        .map(|i| i as f64 * step)
                        .take_while(|&x| x < 1.0)
                        .collect();
                    v.push(1.0);
                    v
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Closed form on reciprocal channels, SDP pipeline otherwise.
    #[default]
    Auto,
    /// SDP pipeline regardless of reciprocity.
    Sdp,
}

fn default_variance() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_candidates() -> usize {
    DEFAULT_RAND_CANDIDATES
}

/// Input description of a region run. Powers in watts, noise as linear
/// variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub relays: usize,
    pub p_s1: f64,
    pub p_s2: f64,
    pub sigma_relay: RelayNoise,
    pub sigma_s1_sq: f64,
    pub sigma_s2_sq: f64,
    pub budget: PowerBudget,
    pub reciprocal: bool,
    #[serde(default = "default_variance")]
    pub channel_variance: f64,
    #[serde(default)]
    pub grid: Grid,
    pub realizations: usize,
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_candidates")]
    pub rand_candidates: usize,
    #[serde(default)]
    pub solver: SolverChoice,
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let mut s = String::new();
        File::open(path)?.read_to_string(&mut s)?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.relays == 0 {
            return Err(invalid("relays", "need at least one relay"));
        }
        if self.realizations == 0 {
            return Err(invalid("realizations", "must be at least 1"));
        }
        if !(self.channel_variance > 0.0 && self.channel_variance.is_finite()) {
            return Err(invalid("channel_variance", "must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if self.rand_candidates == 0 {
            return Err(invalid("rand_candidates", "must be at least 1"));
        }
        match &self.grid {
            Grid::Step(s) if !(*s > 0.0 && *s <= 1.0) => {
                return Err(invalid("grid", format!("step must lie in (0, 1], got {s}")));
            }
            Grid::Values(v) if v.is_empty() || v.iter().any(|x| !(0.0..=1.0).contains(x)) => {
                return Err(invalid("grid", "values must be nonempty and lie in [0, 1]"));
            }
            _ => {}
        }
        if let RelayNoise::PerRelay(v) = &self.sigma_relay {
            if v.len() != self.relays {
                return Err(invalid(
                    "sigma_relay",
                    format!("{} entries for {} relays", v.len(), self.relays),
                ));
            }
        }
        if let PowerBudget::Individual(p) = &self.budget {
            if p.len() != self.relays {
                return Err(invalid("budget", format!("{} caps for {} relays", p.len(), self.relays)));
            }
        }
        self.budget
            .validate(self.relays)
            .map_err(|e| invalid("budget", e.to_string()))?;
        self.system_params()?;
        Ok(())
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        let sigma = match &self.sigma_relay {
            RelayNoise::Uniform(s) => vec![*s; self.relays],
            RelayNoise::PerRelay(v) => v.clone(),
        };
        SystemParams::new(self.p_s1, self.p_s2, sigma, self.sigma_s1_sq, self.sigma_s2_sq)
    }

    pub fn channel_spec(&self) -> ChannelSpec {
        ChannelSpec {
            relays: self.relays,
            variance: self.channel_variance,
            reciprocal: self.reciprocal,
        }
    }

    pub fn pipeline(&self) -> Pipeline {
        match (self.reciprocal && self.solver == SolverChoice::Auto, &self.budget) {
            (true, _) => Pipeline::ClosedForm,
            (false, PowerBudget::Sum(_)) => Pipeline::SdpSum,
            (false, PowerBudget::Individual(_)) => Pipeline::SdpIndividual,
        }
    }

    /// Channels of realization `index`.
    pub fn realization(&self, index: usize) -> Result<ChannelSet> {
        sample_channels(&self.channel_spec(), self.seed, index as u64)
    }

    fn bisection(&self) -> BisectionConfig {
        BisectionConfig::default().with_epsilon(self.epsilon)
    }
}

/// i.i.d. circularly-symmetric complex Gaussian channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub relays: usize,
    pub variance: f64,
    pub reciprocal: bool,
}

/// Draws one channel set from stream `stream` of the seeded generator, so
/// realizations are reproducible independently of evaluation order.
pub fn sample_channels(spec: &ChannelSpec, seed: u64, stream: u64) -> Result<ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = Normal::new(0.0, (spec.variance / 2.0).sqrt()).map_err(|e| invalid("channel_variance", e.to_string()))?;
    let mut draw = || -> Vec<Complex64> {
        (0..spec.relays)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect()
    };
    let h1 = draw();
    let h2 = draw();
    if spec.reciprocal {
        ChannelSet::reciprocal(h1, h2)
    } else {
        let h1r = draw();
        let h2r = draw();
        ChannelSet::new(h1, h2, h1r, h2r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Reciprocal closed-form WSISMin sweep over `μ`.
    ClosedForm,
    /// Sum-power SDP bisection with exact rank-one recovery, over `κ`.
    SdpSum,
    /// Per-relay-cap SDP bisection with randomized rank-one recovery.
    SdpIndividual,
}

impl Pipeline {
    pub fn parameter(&self) -> &'static str {
        match self {
            Pipeline::ClosedForm => "mu",
            _ => "kappa",
        }
    }
}

/// Rates of one sweep evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub rates: RatePair,
    /// Relaxed (SDP) bound on the profile ray; present for the per-relay-cap
    /// SDP pipeline only.
    pub relaxed: Option<RatePair>,
    /// SDP solves without a verdict during this evaluation.
    pub sdp_unresolved: usize,
}

/// Evaluates the pipeline at one grid value.
#[allow(clippy::too_many_arguments)]
pub fn solve_point(
    pipeline: Pipeline,
    ch: &ChannelSet,
    sp: &SystemParams,
    budget: &PowerBudget,
    value: f64,
    cfg: &BisectionConfig,
    candidates: usize,
    seed: u64,
) -> Result<PointSample> {
    match pipeline {
        Pipeline::ClosedForm => Ok(PointSample {
            rates: wsismin_rates(ch, sp, budget, value)?,
            relaxed: None,
            sdp_unresolved: 0,
        }),
        Pipeline::SdpSum => {
            let p_r = budget.total();
            let pt = sum_power_point(ch, sp, p_r, value, cfg)?;
            if pt.outcome.status != crate::sdp::SdpStatus::Optimal {
                return Err(Error::Solver(format!("bisection did not converge at kappa = {value}")));
            }
            Ok(PointSample {
                rates: pt.rank_one.rates,
                relaxed: None,
                sdp_unresolved: pt.outcome.solver_failures,
            })
        }
        Pipeline::SdpIndividual => {
            let PowerBudget::Individual(p) = budget else {
                return Err(invalid("budget", "per-relay pipeline needs individual caps"));
            };
            let pt = individual_power_point(ch, sp, p, value, cfg, candidates, seed)?;
            if pt.outcome.status != crate::sdp::SdpStatus::Optimal {
                return Err(Error::Solver(format!("bisection did not converge at kappa = {value}")));
            }
            let profile = RateProfile::new(value)?;
            let r = pt.outcome.r_sum;
            Ok(PointSample {
                rates: pt.rank_one.rates,
                relaxed: Some(RatePair::new(profile.kappa() * r, profile.kappa_bar() * r)),
                sdp_unresolved: pt.outcome.solver_failures,
            })
        }
    }
}

/// Everything computed for one channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationSamples {
    pub index: usize,
    /// One entry per grid value; `None` marks a failed evaluation.
    pub points: Vec<Option<PointSample>>,
    /// One-way optima `(r1_max, r2_max)`.
    pub endpoints: Option<RatePair>,
    pub relaxed_endpoints: Option<RatePair>,
    pub baseline: Option<RatePair>,
    pub failures: usize,
}

impl RealizationSamples {
    pub fn rates(&self) -> Vec<RatePair> {
        self.points.iter().flatten().map(|p| p.rates).collect()
    }

    pub fn relaxed_rates(&self) -> Vec<RatePair> {
        self.points.iter().flatten().filter_map(|p| p.relaxed).collect()
    }

    /// Hull of this realization's own sweep and endpoints.
    pub fn hull(&self) -> Vec<RatePair> {
        let mut pts = self.rates();
        if let Some(e) = self.endpoints {
            pts.push(RatePair::new(0.0, e.r2));
            pts.push(RatePair::new(e.r1, 0.0));
        }
        convex_hull(&pts)
    }

    pub fn relaxed_hull(&self) -> Vec<RatePair> {
        let mut pts = self.relaxed_rates();
        if let Some(e) = self.relaxed_endpoints {
            pts.push(RatePair::new(0.0, e.r2));
            pts.push(RatePair::new(e.r1, 0.0));
        }
        convex_hull(&pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub grid_value: f64,
    pub r1_mean: f64,
    pub r2_mean: f64,
    pub n_success: usize,
}

impl GridPoint {
    pub fn rates(&self) -> RatePair {
        RatePair::new(self.r1_mean, self.r2_mean)
    }
}

/// Averaged sweep with its hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCurve {
    pub points: Vec<GridPoint>,
    /// Averaged one-way optima `(r̄1_max, r̄2_max)`.
    pub endpoints: RatePair,
    /// Upper-right hull, from the highest `r2` to the highest `r1`.
    pub hull: Vec<RatePair>,
}

impl RegionCurve {
    pub fn polygon(&self) -> Vec<RatePair> {
        down_closed_polygon(&self.hull)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub method: String,
    pub rates: RatePair,
    pub n_success: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub pipeline: Pipeline,
    pub parameter: String,
    pub solver: String,
    pub seed: u64,
    pub epsilon: f64,
    pub rand_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub provenance: Provenance,
    pub region: RegionCurve,
    /// Relaxed bound region of the per-relay-cap SDP pipeline.
    pub relaxed: Option<RegionCurve>,
    pub baseline: Option<BaselinePoint>,
    pub tasks: usize,
    pub failures: usize,
    pub sdp_unresolved: usize,
    pub samples: Vec<RealizationSamples>,
}

impl RegionResult {
    pub fn failure_rate(&self) -> f64 {
        if self.tasks == 0 {
            0.0
        } else {
            self.failures as f64 / self.tasks as f64
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_points_csv(&self.region.points, path)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    /// Largest `r1 + r2` on the hull.
    pub fn max_sum_rate_point(&self) -> Option<RatePair> {
        self.region
            .hull
            .iter()
            .copied()
            .max_by(|a, b| a.sum().total_cmp(&b.sum()))
    }
}

pub fn write_points_csv(points: &[GridPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv(path: &Path) -> Result<Vec<GridPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the combined inputs
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn baseline_name(ch_reciprocal: bool, budget: &PowerBudget) -> &'static str {
    match (ch_reciprocal, budget) {
        (false, _) => "greedy_phase",
        (true, PowerBudget::Sum(_)) => "equal_power",
        (true, PowerBudget::Individual(_)) => "max_power",
    }
}

fn run_realization(sc: &Scenario, sp: &SystemParams, grid: &[f64], index: usize) -> Result<RealizationSamples> {
    let ch = sc.realization(index)?;
    let pipeline = sc.pipeline();
    let cfg = sc.bisection();
    let eval = |g_idx: usize, value: f64| {
        let seed = mix_seed(sc.seed, index as u64, g_idx as u64);
        match solve_point(pipeline, &ch, sp, &sc.budget, value, &cfg, sc.rand_candidates, seed) {
            Ok(p) if p.rates.r1.is_finite() && p.rates.r2.is_finite() => Some(p),
            Ok(_) => {
                log::warn!("realization {index}: non-finite rates at {value}");
                None
            }
            Err(e) => {
                log::warn!("realization {index}: evaluation at {value} failed: {e}");
                None
            }
        }
    };
    let points: Vec<Option<PointSample>> = grid.iter().enumerate().map(|(i, &g)| eval(i, g)).collect();
    let mut failures = points.iter().filter(|p| p.is_none()).count();

    // One-way optima come from the extreme grid values, reused when present.
    let mut extreme = |value: f64, slot: usize| match grid.iter().position(|&g| g == value) {
        Some(i) => points[i],
        None => {
            let p = eval(grid.len() + slot, value);
            if p.is_none() {
                failures += 1;
            }
            p
        }
    };
    let top = extreme(1.0, 0);
    let bottom = extreme(0.0, 1);
    let endpoints = match (top, bottom) {
        (Some(t), Some(b)) => Some(RatePair::new(t.rates.r1, b.rates.r2)),
        _ => None,
    };
    let relaxed_endpoints = match (top.and_then(|t| t.relaxed), bottom.and_then(|b| b.relaxed)) {
        (Some(t), Some(b)) => Some(RatePair::new(t.r1, b.r2)),
        _ => None,
    };
    let baseline = baseline_bf(&ch, sp, &sc.budget)
        .and_then(|w| rate_pair(&ch, sp, &w))
        .map_err(|e| log::warn!("realization {index}: baseline failed: {e}"))
        .ok();
    Ok(RealizationSamples {
        index,
        points,
        endpoints,
        relaxed_endpoints,
        baseline,
        failures,
    })
}

fn average_curve(
    grid: &[f64],
    samples: &[RealizationSamples],
    pick: impl Fn(&PointSample) -> Option<RatePair>,
    endpoints: impl Fn(&RealizationSamples) -> Option<RatePair>,
) -> Result<RegionCurve> {
    let mean = |it: &mut dyn Iterator<Item = RatePair>| -> (RatePair, usize) {
        let (mut a, mut b, mut n) = (0.0, 0.0, 0usize);
        for r in it {
            a += r.r1;
            b += r.r2;
            n += 1;
        }
        if n == 0 {
            (RatePair::new(f64::NAN, f64::NAN), 0)
        } else {
            (RatePair::new(a / n as f64, b / n as f64), n)
        }
    };
    let mut points = Vec::with_capacity(grid.len());
    for (i, &g) in grid.iter().enumerate() {
        let (m, n) = mean(&mut samples.iter().filter_map(|s| s.points[i].as_ref().and_then(&pick)));
        if n == 0 {
            return Err(Error::Solver(format!("no realization succeeded at grid value {g}")));
        }
        if n < samples.len() {
            log::warn!("grid value {g}: averaged over {n} of {} realizations", samples.len());
        }
        points.push(GridPoint {
            grid_value: g,
            r1_mean: m.r1,
            r2_mean: m.r2,
            n_success: n,
        });
    }
    let (e, n) = mean(&mut samples.iter().filter_map(&endpoints));
    if n == 0 {
        return Err(Error::Solver("no realization produced one-way endpoints".into()));
    }
    let mut all: Vec<RatePair> = points.iter().map(GridPoint::rates).collect();
    all.push(RatePair::new(0.0, e.r2));
    all.push(RatePair::new(e.r1, 0.0));
    Ok(RegionCurve {
        points,
        endpoints: e,
        hull: convex_hull(&all),
    })
}

/// Runs the scenario over all realizations (in parallel) and assembles the
/// averaged region.
pub fn build_region(sc: &Scenario) -> Result<RegionResult> {
    sc.validate()?;
    let sp = sc.system_params()?;
    let grid = sc.grid.values();
    let pipeline = sc.pipeline();

    let samples: Vec<RealizationSamples> = (0..sc.realizations)
        .into_par_iter()
        .map(|i| run_realization(sc, &sp, &grid, i))
        .collect::<Result<_>>()?;

    let region = average_curve(&grid, &samples, |p| Some(p.rates), |s| s.endpoints)?;
    let relaxed = if pipeline == Pipeline::SdpIndividual {
        Some(average_curve(&grid, &samples, |p| p.relaxed, |s| s.relaxed_endpoints)?)
    } else {
        None
    };
    let base: Vec<RatePair> = samples.iter().filter_map(|s| s.baseline).collect();
    let baseline = (!base.is_empty()).then(|| {
        let n = base.len() as f64;
        BaselinePoint {
            method: baseline_name(sc.reciprocal, &sc.budget).to_string(),
            rates: RatePair::new(
                base.iter().map(|r| r.r1).sum::<f64>() / n,
                base.iter().map(|r| r.r2).sum::<f64>() / n,
            ),
            n_success: base.len(),
        }
    });
    let extra = [1.0, 0.0].iter().filter(|v| !grid.contains(v)).count();
    let tasks = sc.realizations * (grid.len() + extra);
    let failures = samples.iter().map(|s| s.failures).sum();
    let sdp_unresolved = samples
        .iter()
        .flat_map(|s| s.points.iter().flatten())
        .map(|p| p.sdp_unresolved)
        .sum();
    let solver = match pipeline {
        Pipeline::ClosedForm => match sc.budget {
            PowerBudget::Sum(_) => "recip::wsismin_sum_power",
            PowerBudget::Individual(_) => "recip::wsismin_individual",
        },
        Pipeline::SdpSum => "nonrecip::algorithm1_sum_power+rank_one_reduce",
        Pipeline::SdpIndividual => "nonrecip::algorithm2_individual+randomize_rank_one",
    };
    Ok(RegionResult {
        schema_version: SCHEMA_VERSION,
        scenario: sc.clone(),
        provenance: Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            pipeline,
            parameter: pipeline.parameter().to_string(),
            solver: solver.to_string(),
            seed: sc.seed,
            epsilon: sc.epsilon,
            rand_candidates: sc.rand_candidates,
        },
        region,
        relaxed,
        baseline,
        tasks,
        failures,
        sdp_unresolved,
        samples,
    })
}

/// Heuristic rate pairs for one realization, by name.
pub fn heuristic_points(ch: &ChannelSet, sp: &SystemParams, budget: &PowerBudget) -> Result<Vec<(&'static str, RatePair)>> {
    let mut out = Vec::new();
    if ch.is_reciprocal() {
        match budget {
            PowerBudget::Sum(p_r) => out.push(("equal_power", rate_pair(ch, sp, &equal_power_bf(ch, sp, *p_r)?)?)),
            PowerBudget::Individual(p) => out.push(("max_power", rate_pair(ch, sp, &max_power_bf(ch, sp, p)?)?)),
        }
    }
    out.push(("greedy_phase", rate_pair(ch, sp, &greedy_phase_bf(ch, sp, budget)?)?));
    Ok(out)
}

fn cross(o: RatePair, a: RatePair, b: RatePair) -> f64 {
    (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1)
}

/// Upper-right Pareto hull: the vertices of the convex hull's boundary that
/// run from the point with the largest `r2` (ties: largest `r1`) to the
/// point with the largest `r1` (ties: largest `r2`), in order of increasing
/// `r1`. Dominated and collinear points are dropped. Non-finite points are
/// ignored.
pub fn convex_hull(points: &[RatePair]) -> Vec<RatePair> {
    let mut pts: Vec<RatePair> = points
        .iter()
        .copied()
        .filter(|p| p.r1.is_finite() && p.r2.is_finite())
        .collect();
    pts.sort_by(|a, b| a.r1.total_cmp(&b.r1).then(a.r2.total_cmp(&b.r2)));
    pts.dedup();
    let mut upper: Vec<RatePair> = Vec::with_capacity(pts.len());
    for p in pts {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) >= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    let Some(top) = upper
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.r2.total_cmp(&b.r2).then(i.cmp(j)))
        .map(|(i, _)| i)
    else {
        return upper;
    };
    upper.split_off(top)
}

/// Down-closure of a Pareto hull as a counterclockwise convex polygon
/// through the origin.
pub fn down_closed_polygon(hull: &[RatePair]) -> Vec<RatePair> {
    let origin = RatePair::new(0.0, 0.0);
    let Some(first) = hull.first() else {
        return vec![origin];
    };
    let last = hull[hull.len() - 1];
    let mut poly = vec![origin, RatePair::new(last.r1.max(0.0), 0.0)];
    poly.extend(hull.iter().rev().copied());
    poly.push(RatePair::new(0.0, first.r2.max(0.0)));
    poly.dedup();
    if poly.len() > 1 && poly[0] == poly[poly.len() - 1] {
        poly.pop();
    }
    poly
}

fn segment_distance(p: RatePair, a: RatePair, b: RatePair) -> f64 {
    let (dx, dy) = (b.r1 - a.r1, b.r2 - a.r2);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.r1 - a.r1) * dx + (p.r2 - a.r2) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a.r1 + t * dx - p.r1, a.r2 + t * dy - p.r2);
    (ex * ex + ey * ey).sqrt()
}

/// Euclidean distance from `p` to a convex counterclockwise polygon; zero
/// inside.
pub fn distance_to_polygon(poly: &[RatePair], p: RatePair) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => segment_distance(p, poly[0], poly[0]),
        n => {
            let inside = (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], p) >= 0.0);
            if inside && n > 2 {
                return 0.0;
            }
            (0..n)
                .map(|i| segment_distance(p, poly[i], poly[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub contained: bool,
    pub max_violation: f64,
}

/// Whether every point lies within `tol` of the down-closure of `hull`.
pub fn hull_contains(hull: &[RatePair], points: &[RatePair], tol: f64) -> Containment {
    let poly = down_closed_polygon(hull);
    let max_violation = points
        .iter()
        .map(|&p| distance_to_polygon(&poly, p))
        .fold(0.0, f64::max);
    Containment {
        contained: max_violation <= tol,
        max_violation,
    }
}

/// Whether every hull vertex of `inner` lies within `tol` of `outer`.
pub fn region_contains(outer: &RegionCurve, inner: &RegionCurve, tol: f64) -> Containment {
    hull_contains(&outer.hull, &inner.hull, tol)
}

fn boundary_samples(poly: &[RatePair], per_edge: usize) -> Vec<RatePair> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n * per_edge);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for s in 0..per_edge {
            let t = s as f64 / per_edge as f64;
            out.push(RatePair::new(a.r1 + t * (b.r1 - a.r1), a.r2 + t * (b.r2 - a.r2)));
        }
    }
    out
}

/// Hausdorff distance between the down-closures of two hulls, estimated on
/// densely sampled boundaries.
pub fn hausdorff(a: &[RatePair], b: &[RatePair]) -> f64 {
    let (pa, pb) = (down_closed_polygon(a), down_closed_polygon(b));
    let one_way = |from: &[RatePair], to: &[RatePair]| {
        boundary_samples(from, 200)
            .into_iter()
            .map(|p| distance_to_polygon(to, p))
            .fold(0.0, f64::max)
    };
    one_way(&pa, &pb).max(one_way(&pb, &pa))
}

/// Hausdorff distance between a region and its mirror image across
/// `r1 = r2`, relative to the larger axis endpoint.
pub fn symmetry_defect(curve: &RegionCurve) -> f64 {
    let mirrored: Vec<RatePair> = curve.hull.iter().rev().map(|p| RatePair::new(p.r2, p.r1)).collect();
    let scale = curve.endpoints.r1.max(curve.endpoints.r2);
    if scale <= 0.0 {
        return 0.0;
    }
    hausdorff(&curve.hull, &mirrored) / scale
}
