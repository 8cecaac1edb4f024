//! Sample average approximation driver: M replications of an N-scenario
//! L-shaped solve, candidate evaluation on a shared N′-scenario sample,
//! and the L/U bound estimators.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lshaped::{self, Forced, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS};
use crate::model::{validate_design, Design, Instance};
use crate::recourse::solve_with_flags;
use crate::rng::{derive_seed, ROLE_EVALUATE, ROLE_OPTIMIZE};
use crate::scenario::{sample_batch, RiskOverrides, Scenario};
use crate::stats::critical_values;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaaConfig {
    /// M
    #[serde(alias = "M")]
    pub replications: usize,
    /// N
    #[serde(alias = "N")]
    pub scenarios: usize,
    /// N′
    #[serde(alias = "N_eval")]
    pub eval_scenarios: usize,
    pub alpha: f64,
    /// ε₀ on the statistical gap
    pub epsilon0: f64,
    /// ε of each L-shaped solve
    pub inner_epsilon: f64,
    pub base_seed: u64,
    pub optimize: RiskOverrides,
    pub evaluate: RiskOverrides,
    pub forced: Forced,
    pub max_passes: usize,
    pub max_iterations: usize,
}

impl Default for SaaConfig {
    fn default() -> Self {
        SaaConfig {
            replications: 30,
            scenarios: 100,
            eval_scenarios: 1000,
            alpha: 0.01,
            epsilon0: 0.05,
            inner_epsilon: DEFAULT_EPSILON,
            base_seed: 0,
            optimize: RiskOverrides::default(),
            evaluate: RiskOverrides::default(),
            forced: Forced::new(),
            max_passes: 5,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SaaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications < 2 {
            return bad(format!(
                "replications must be >= 2, got {}",
                self.replications
            ));
        }
        if self.scenarios < 1 {
            return bad("scenarios must be >= 1".into());
        }
        if self.eval_scenarios < self.scenarios {
            return bad(format!(
                "eval_scenarios ({}) must be >= scenarios ({})",
                self.eval_scenarios, self.scenarios
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad(format!("alpha must lie in (0, 0.5), got {}", self.alpha));
        }
        if !(self.epsilon0 > 0.0) || !(self.inner_epsilon > 0.0) {
            return bad("tolerances must be > 0".into());
        }
        if self.max_passes < 1 || self.max_iterations < 1 {
            return bad("pass and iteration caps must be >= 1".into());
        }
        self.optimize.validate()?;
        self.evaluate.validate()
    }

    /// Optimize-time and evaluate-time risk settings differ (a misspecified plan).
    pub fn configs_differ(&self) -> bool {
        self.optimize != self.evaluate
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub fixed: f64,
    /// raw material plus first-leg transport
    pub supply: f64,
    /// production plus second-leg transport
    pub production: f64,
    /// c^s·S
    pub shortage: f64,
    /// c^o·S′
    pub escalation: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.fixed + self.supply + self.production + self.shortage + self.escalation
    }
}

/// A design evaluated on a scenario sample. Per-country vectors follow the
/// instance's country order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_objective: f64,
    pub std_error: f64,
    pub num_scenarios: usize,
    pub breakdown: CostBreakdown,
    /// E[Σ V]
    pub sales: f64,
    pub expected_demand: Vec<f64>,
    pub expected_shortage: Vec<f64>,
    /// E[U], `[supplier][plant]`
    pub expected_raw_flow: Vec<Vec<f64>>,
    /// E[V], `[plant][country]`
    pub expected_drug_flow: Vec<Vec<f64>>,
}

/// Sample mean and σ̂ with σ̂² = Σ(x − x̄)² / ((n−1)n); σ̂ = 0 for n = 1.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    // shifted by the first value so a constant sample gives exactly (x, 0)
    let shift = values.first().copied().unwrap_or(0.0);
    let dbar = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let mean = shift + dbar;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values
        .iter()
        .map(|v| (v - shift - dbar) * (v - shift - dbar))
        .sum();
    (mean, (ss / ((n - 1.0) * n)).sqrt())
}

/// Mean objective, σ̂, shortage expectations and cost breakdown of a fixed
/// design over `scenarios` (equal weights).
pub fn evaluate_design(
    instance: &Instance,
    design: &Design,
    scenarios: &[Scenario],
) -> Result<Evaluation> {
    validate_design(instance, design)?;
    if scenarios.is_empty() {
        return Err(Error::Config(
            "evaluation needs at least one scenario".into(),
        ));
    }
    for s in scenarios {
        s.check(instance)?;
    }
    let open = design.flags(instance);
    let sols = scenarios
        .par_iter()
        .map(|s| solve_with_flags(instance, &open, s))
        .collect::<Result<Vec<_>>>()?;

    let fixed = design.fixed_cost(instance);
    let n = scenarios.len() as f64;
    let (ni, nj, nk) = (
        instance.num_suppliers(),
        instance.num_plants(),
        instance.num_countries(),
    );
    let mut breakdown = CostBreakdown {
        fixed,
        ..CostBreakdown::default()
    };
    let mut sales = 0.0;
    let mut demand = vec![0.0; nk];
    let mut shortage = vec![0.0; nk];
    let mut raw = vec![vec![0.0; nj]; ni];
    let mut drug = vec![vec![0.0; nk]; nj];
    let mut objectives = Vec::with_capacity(sols.len());
    for (s, sol) in scenarios.iter().zip(&sols) {
        objectives.push(fixed + sol.objective);
        breakdown.supply += sol.supply_cost;
        breakdown.production += sol.production_cost;
        breakdown.shortage += sol.shortage_cost;
        breakdown.escalation += sol.escalation_cost;
        sales += sol.sales();
        for k in 0..nk {
            demand[k] += s.demand[k];
            shortage[k] += sol.shortage[k];
        }
        for (acc, row) in raw.iter_mut().zip(&sol.raw_flow) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        for (acc, row) in drug.iter_mut().zip(&sol.drug_flow) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    breakdown.supply /= n;
    breakdown.production /= n;
    breakdown.shortage /= n;
    breakdown.escalation /= n;
    let scale = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x /= n);
    scale(&mut demand);
    scale(&mut shortage);
    raw.iter_mut().for_each(scale);
    drug.iter_mut().for_each(scale);
    let (mean_objective, std_error) = mean_and_std_error(&objectives);
    Ok(Evaluation {
        mean_objective,
        std_error,
        num_scenarios: scenarios.len(),
        breakdown,
        sales: sales / n,
        expected_demand: demand,
        expected_shortage: shortage,
        expected_raw_flow: raw,
        expected_drug_flow: drug,
    })
}

/// L_{N,M} = z̄ − t_{α,M−1}·σ̂_{z̄}. Returns `(L, z̄, σ̂_{z̄}, t)`.
pub fn lower_bound(replication_objectives: &[f64], alpha: f64) -> Result<(f64, f64, f64, f64)> {
    let m = replication_objectives.len();
    if m < 2 {
        return Err(Error::Config(
            "the lower bound needs at least two replications".into(),
        ));
    }
    let (t, _) = critical_values(alpha, m - 1)?;
    let (zbar, se) = mean_and_std_error(replication_objectives);
    Ok((zbar - t * se, zbar, se, t))
}

/// U_{N′} = z_{N′} + z_α·σ̂_{z_{N′}}. Returns `(U, z_α)`.
pub fn upper_bound(eval_objective: f64, eval_std_error: f64, alpha: f64) -> Result<(f64, f64)> {
    let (_, z) = critical_values(alpha, 1)?;
    Ok((eval_objective + z * eval_std_error, z))
}

/// (U − L)/U, or 0 when U ≤ 0.
pub fn statistical_gap(lower: f64, upper: f64) -> f64 {
    if upper > 0.0 {
        (upper - lower) / upper
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaaReport {
    /// Passes run (1-based count); the report describes the last one.
    pub passes: usize,
    pub converged: bool,
    pub warning: Option<String>,
    pub configs_differ: bool,
    /// z_N^m
    pub replication_objectives: Vec<f64>,
    pub replication_iterations: Vec<usize>,
    pub candidate_designs: Vec<Design>,
    /// z_{N′}(Ŷ^m)
    pub candidate_eval_objectives: Vec<f64>,
    pub incumbent_index: usize,
    pub incumbent: Design,
    pub zbar: f64,
    pub zbar_std_error: f64,
    pub t_value: f64,
    pub z_value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub eval_objective: f64,
    pub eval_std_error: f64,
    pub evaluation: Evaluation,
}

/// Seed of the optimization batch of replication `m` in pass `pass`.
pub fn optimize_seed(base: u64, pass: usize, m: usize) -> u64 {
    derive_seed(base, &[pass as u64, m as u64, ROLE_OPTIMIZE])
}

/// Seed of the evaluation batch shared by all candidates of a pass.
pub fn evaluate_seed(base: u64, pass: usize) -> u64 {
    derive_seed(base, &[pass as u64, ROLE_EVALUATE])
}

pub fn run_saa(instance: &Instance, config: &SaaConfig) -> Result<SaaReport> {
    config.validate()?;
    let forced = (!config.forced.is_empty()).then_some(&config.forced);
    let mut last = None;
    for pass in 0..config.max_passes {
        let report = run_pass(instance, config, pass, forced)?;
        let done = report.gap <= config.epsilon0;
        last = Some(report);
        if done {
            break;
        }
    }
    let mut report = last.expect("max_passes >= 1");
    report.converged = report.gap <= config.epsilon0;
    if !report.converged {
        report.warning = Some(format!(
            "gap {} above epsilon0 {} after {} passes",
            report.gap, config.epsilon0, report.passes
        ));
    }
    Ok(report)
}

fn run_pass(
    instance: &Instance,
    config: &SaaConfig,
    pass: usize,
    forced: Option<&Forced>,
) -> Result<SaaReport> {
    let reps = (0..config.replications)
        .into_par_iter()
        .map(|m| {
            let scen = sample_batch(
                instance,
                optimize_seed(config.base_seed, pass, m),
                config.scenarios,
                &config.optimize,
            );
            lshaped::run_lshaped_capped(
                instance,
                &scen,
                config.inner_epsilon,
                forced,
                config.max_iterations,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let eval_scen = sample_batch(
        instance,
        evaluate_seed(config.base_seed, pass),
        config.eval_scenarios,
        &config.evaluate,
    );
    // each distinct candidate is evaluated once, in replication order
    let mut cache: BTreeMap<u64, Evaluation> = BTreeMap::new();
    for r in &reps {
        let mask = r.design.mask(instance);
        if let Entry::Vacant(slot) = cache.entry(mask) {
            slot.insert(evaluate_design(instance, &r.design, &eval_scen)?);
        }
    }
    let evals: Vec<&Evaluation> = reps
        .iter()
        .map(|r| &cache[&r.design.mask(instance)])
        .collect();
    let mut best = 0;
    for (m, e) in evals.iter().enumerate() {
        if e.mean_objective < evals[best].mean_objective {
            best = m;
        }
    }

    let objectives: Vec<f64> = reps.iter().map(|r| r.objective).collect();
    let (lower, zbar, zbar_se, t) = lower_bound(&objectives, config.alpha)?;
    let ev = evals[best].clone();
    let (upper, z) = upper_bound(ev.mean_objective, ev.std_error, config.alpha)?;
    Ok(SaaReport {
        passes: pass + 1,
        converged: false,
        warning: None,
        configs_differ: config.configs_differ(),
        replication_objectives: objectives,
        replication_iterations: reps.iter().map(|r| r.iterations).collect(),
        candidate_designs: reps.iter().map(|r| r.design.clone()).collect(),
        candidate_eval_objectives: evals.iter().map(|e| e.mean_objective).collect(),
        incumbent_index: best,
        incumbent: reps[best].design.clone(),
        zbar,
        zbar_std_error: zbar_se,
        t_value: t,
        z_value: z,
        lower_bound: lower,
        upper_bound: upper,
        gap: statistical_gap(lower, upper),
        eval_objective: ev.mean_objective,
        eval_std_error: ev.std_error,
        evaluation: ev,
    })
}
