//! L-shaped loop over a fixed scenario sample: master over binary Y with
//! aggregated optimality cuts, subproblems solved in parallel.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CountryId, Design, Instance};
use crate::recourse::{cut_terms_data, solve_data, Data};
use crate::scenario::Scenario;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
/// Largest candidate count solved by full enumeration.
pub const ENUMERATION_LIMIT: usize = 20;

/// θ ≥ constant + Σ_p coeff[p]·Y_p, coefficients in plant order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCut {
    pub constant: f64,
    pub coeff: Vec<f64>,
}

impl OptimalityCut {
    pub fn value(&self, open: &[bool]) -> f64 {
        self.constant
            + self
                .coeff
                .iter()
                .zip(open)
                .filter(|(_, &o)| o)
                .map(|(c, _)| c)
                .sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LShapedResult {
    pub design: Design,
    /// z_N: fixed cost plus sample-average recourse at `design`.
    pub objective: f64,
    pub lower_bound: f64,
    pub iterations: usize,
    pub lb_trace: Vec<f64>,
    pub ub_trace: Vec<f64>,
    pub cuts: Vec<OptimalityCut>,
}

/// Forced open/closed plants, keyed by plant candidate.
pub type Forced = BTreeMap<CountryId, bool>;

fn forced_flags(instance: &Instance, forced: Option<&Forced>) -> Result<Vec<Option<bool>>> {
    let mut out = vec![None; instance.num_plants()];
    if let Some(forced) = forced {
        for (id, &v) in forced {
            let p = instance
                .country_index(id.as_str())
                .and_then(|k| instance.plant_position(k))
                .ok_or_else(|| {
                    Error::DesignMismatch(format!("forced plant `{id}` is not a candidate"))
                })?;
            out[p] = Some(v);
        }
    }
    if out.iter().all(|f| *f == Some(false)) {
        return Err(Error::MasterInfeasible(
            "every plant is forced closed".into(),
        ));
    }
    Ok(out)
}

fn master_value(instance: &Instance, cuts: &[OptimalityCut], open: &[bool]) -> f64 {
    let fixed: f64 = (0..instance.num_plants())
        .filter(|&p| open[p])
        .map(|p| instance.fixed_cost(p))
        .sum();
    let theta = cuts.iter().map(|c| c.value(open)).fold(0.0, f64::max);
    fixed + theta
}

fn flags_of(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|p| mask >> p & 1 == 1).collect()
}

fn better(v: f64, mask: u64, best: f64, best_mask: u64) -> bool {
    let tie = 1e-12 * (1.0 + best.abs());
    v < best - tie || (v <= best + tie && mask < best_mask)
}

/// Minimize Σ c^fi Y + θ over binary Y with Σ Y ≥ 1, θ ≥ 0 and θ above
/// every cut. Ties go to the smallest plant bitmask.
pub fn solve_master(
    instance: &Instance,
    cuts: &[OptimalityCut],
    forced: Option<&Forced>,
) -> Result<(Design, f64)> {
    let fixed = forced_flags(instance, forced)?;
    let n = instance.num_plants();
    let mask = if n <= ENUMERATION_LIMIT {
        enumerate(instance, cuts, &fixed)
    } else {
        branch_and_bound(instance, cuts, &fixed)
    }
    .ok_or_else(|| Error::MasterInfeasible("no design satisfies the forced assignments".into()))?;
    let open = flags_of(mask, n);
    Ok((
        Design::from_mask(instance, mask),
        master_value(instance, cuts, &open),
    ))
}

/// Gray-code walk over the free plants with incremental cut values.
fn enumerate(instance: &Instance, cuts: &[OptimalityCut], fixed: &[Option<bool>]) -> Option<u64> {
    let n = instance.num_plants();
    let free: Vec<usize> = (0..n).filter(|&p| fixed[p].is_none()).collect();
    let base: u64 = (0..n)
        .filter(|&p| fixed[p] == Some(true))
        .fold(0, |m, p| m | 1 << p);
    let mut mask = base;
    let mut fixed_cost: f64 = (0..n)
        .filter(|&p| mask >> p & 1 == 1)
        .map(|p| instance.fixed_cost(p))
        .sum();
    let mut vals: Vec<f64> = cuts.iter().map(|c| c.value(&flags_of(mask, n))).collect();
    let mut best: Option<(f64, u64)> = None;
    let total: u64 = 1 << free.len();
    for step in 0..total {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            let p = free[bit];
            let sign = if mask >> p & 1 == 1 { -1.0 } else { 1.0 };
            mask ^= 1 << p;
            fixed_cost += sign * instance.fixed_cost(p);
            for (v, c) in vals.iter_mut().zip(cuts) {
                *v += sign * c.coeff[p];
            }
        }
        if mask == 0 {
            continue;
        }
        let v = fixed_cost + vals.iter().copied().fold(0.0, f64::max);
        if best.is_none_or(|(bv, bm)| better(v, mask, bv, bm)) {
            best = Some((v, mask));
        }
    }
    best.map(|(_, m)| m)
}

fn branch_and_bound(
    instance: &Instance,
    cuts: &[OptimalityCut],
    fixed: &[Option<bool>],
) -> Option<u64> {
    let n = instance.num_plants();
    let mut best: Option<(f64, u64)> = None;
    let mut open = vec![false; n];
    bb(instance, cuts, fixed, 0, &mut open, &mut best);
    best.map(|(_, m)| m)
}

fn bb(
    instance: &Instance,
    cuts: &[OptimalityCut],
    fixed: &[Option<bool>],
    depth: usize,
    open: &mut Vec<bool>,
    best: &mut Option<(f64, u64)>,
) {
    let n = instance.num_plants();
    let any_open = open[..depth].iter().any(|&o| o);
    if depth == n {
        if any_open {
            let mask = open
                .iter()
                .enumerate()
                .fold(0u64, |m, (p, &o)| if o { m | 1 << p } else { m });
            let v = master_value(instance, cuts, open);
            if best.is_none_or(|(bv, bm)| better(v, mask, bv, bm)) {
                *best = Some((v, mask));
            }
        }
        return;
    }
    // bound: decided fixed costs plus each cut minimized over the free tail
    let fixed_cost: f64 = (0..depth)
        .filter(|&p| open[p])
        .map(|p| instance.fixed_cost(p))
        .sum();
    let theta = cuts
        .iter()
        .map(|c| {
            let head: f64 = (0..depth).filter(|&p| open[p]).map(|p| c.coeff[p]).sum();
            let tail: f64 = (depth..n).map(|p| c.coeff[p].min(0.0)).sum();
            c.constant + head + tail
        })
        .fold(0.0, f64::max);
    let mut bound = fixed_cost + theta;
    if !any_open {
        bound += (depth..n)
            .filter(|&p| fixed[p] != Some(false))
            .map(|p| instance.fixed_cost(p))
            .fold(f64::INFINITY, f64::min)
            .min(f64::MAX);
    }
    if let Some((bv, _)) = best {
        if bound > *bv + 1e-12 * (1.0 + bv.abs()) {
            return;
        }
    }
    let choices: &[bool] = match fixed[depth] {
        Some(true) => &[true],
        Some(false) => &[false],
        None => &[true, false],
    };
    for &c in choices {
        open[depth] = c;
        bb(instance, cuts, fixed, depth + 1, open, best);
    }
    open[depth] = false;
}

/// Sample-average recourse and the aggregated cut at `open`.
pub(crate) fn evaluate_with_cut(
    instance: &Instance,
    scenarios: &[Scenario],
    open: &[bool],
) -> Result<(f64, OptimalityCut)> {
    let parts: Vec<(f64, f64, Vec<f64>)> = scenarios
        .par_iter()
        .map(|s| {
            let data = Data::new(instance, s);
            let sol = solve_data(instance, open, s, &data)?;
            let (c, coeff) = cut_terms_data(instance, &data, &sol.duals);
            Ok((sol.objective, c, coeff))
        })
        .collect::<Result<_>>()?;
    let n = scenarios.len() as f64;
    let mut q = 0.0;
    let mut constant = 0.0;
    let mut coeff = vec![0.0; instance.num_plants()];
    for (obj, c, cf) in &parts {
        q += obj;
        constant += c;
        for (a, b) in coeff.iter_mut().zip(cf) {
            *a += b;
        }
    }
    for a in &mut coeff {
        *a /= n;
    }
    Ok((
        q / n,
        OptimalityCut {
            constant: constant / n,
            coeff,
        },
    ))
}

/// Relative gap (ub − lb)/ub, or 0 when ub ≤ 0.
pub fn relative_gap(lb: f64, ub: f64) -> f64 {
    if ub <= 0.0 {
        0.0
    } else {
        ((ub - lb) / ub).max(0.0)
    }
}

pub fn run_lshaped(
    instance: &Instance,
    scenarios: &[Scenario],
    epsilon: f64,
    forced: Option<&Forced>,
) -> Result<LShapedResult> {
    run_lshaped_capped(instance, scenarios, epsilon, forced, DEFAULT_MAX_ITERATIONS)
}

/// The L-shaped loop. The incumbent changes only on a strict improvement of
/// the upper bound, so among equal designs the first one visited is kept.
pub fn run_lshaped_capped(
    instance: &Instance,
    scenarios: &[Scenario],
    epsilon: f64,
    forced: Option<&Forced>,
    max_iterations: usize,
) -> Result<LShapedResult> {
    if scenarios.is_empty() {
        return Err(Error::Config("L-shaped needs at least one scenario".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    for s in scenarios {
        s.check(instance)?;
    }
    let mut cuts: Vec<OptimalityCut> = Vec::new();
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    let mut incumbent: Option<Design> = None;
    let mut lb_trace = Vec::new();
    let mut ub_trace = Vec::new();
    let mut visited = BTreeSet::new();

    for iteration in 1..=max_iterations {
        let (design, master_lb) = solve_master(instance, &cuts, forced)?;
        lb = lb.max(master_lb);
        let open = design.flags(instance);
        let revisit = !visited.insert(design.mask(instance));
        let (q, cut) = evaluate_with_cut(instance, scenarios, &open)?;
        let z = design.fixed_cost(instance) + q;
        if !z.is_finite() {
            return Err(Error::NonFinite("sample-average objective".into()));
        }
        if z < ub {
            ub = z;
            incumbent = Some(design);
        }
        // a master bound above ub can only come from rounding
        lb = lb.min(ub);
        lb_trace.push(lb);
        ub_trace.push(ub);
        if relative_gap(lb, ub) <= epsilon || revisit {
            return Ok(LShapedResult {
                design: incumbent.expect("set on the first iteration"),
                objective: ub,
                lower_bound: lb,
                iterations: iteration,
                lb_trace,
                ub_trace,
                cuts,
            });
        }
        cuts.push(cut);
    }
    Err(Error::IterationCap {
        cap: max_iterations,
        lb,
        ub,
        lb_trace,
        ub_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_synthetic_instance, InstanceFile, RiskProfile, SyntheticSpec};

    fn two_plants(fixed: [f64; 2]) -> Instance {
        let base = generate_synthetic_instance(&SyntheticSpec {
            suppliers: 1,
            plants: 2,
            countries: 2,
            seed: 1,
            risk: RiskProfile::Low,
        })
        .unwrap();
        let mut f: InstanceFile = base.to_file();
        for (id, v) in f.plant_candidates.clone().iter().zip(fixed) {
            f.fixed_cost.insert(id.clone(), v);
        }
        Instance::from_file(f).unwrap()
    }

    #[test]
    fn no_cuts_picks_cheapest_plant() {
        let inst = two_plants([5.0, 7.0]);
        let (d, lb) = solve_master(&inst, &[], None).unwrap();
        assert_eq!(d.flags(&inst), vec![true, false]);
        assert_eq!(lb, 5.0);
    }

    #[test]
    fn single_cut_enumeration() {
        let inst = two_plants([5.0, 7.0]);
        let cut = OptimalityCut {
            constant: 10.0,
            coeff: vec![-3.0, -2.0],
        };
        let (d, lb) = solve_master(&inst, std::slice::from_ref(&cut), None).unwrap();
        assert_eq!(d.flags(&inst), vec![true, false]);
        assert_eq!(lb, 12.0);

        let b = inst.plant_id(1).clone();
        let forced = Forced::from([(b, true)]);
        let (d, lb) = solve_master(&inst, &[cut], Some(&forced)).unwrap();
        assert_eq!(d.flags(&inst), vec![false, true]);
        assert_eq!(lb, 15.0);
    }

    #[test]
    fn forcing_everything_closed_is_infeasible() {
        let inst = two_plants([5.0, 7.0]);
        let forced: Forced = (0..2).map(|p| (inst.plant_id(p).clone(), false)).collect();
        assert!(matches!(
            solve_master(&inst, &[], Some(&forced)),
            Err(Error::MasterInfeasible(_))
        ));
    }

    #[test]
    fn branch_and_bound_agrees_with_enumeration() {
        let inst = generate_synthetic_instance(&SyntheticSpec {
            suppliers: 2,
            plants: 8,
            countries: 9,
            seed: 4,
            risk: RiskProfile::Low,
        })
        .unwrap();
        let cuts: Vec<OptimalityCut> = (0..6)
            .map(|c| OptimalityCut {
                constant: 500.0 + 40.0 * c as f64,
                coeff: (0..8)
                    .map(|p| -((p * 37 + c * 11) % 23) as f64 * 9.0)
                    .collect(),
            })
            .collect();
        let free = vec![None; 8];
        assert_eq!(
            enumerate(&inst, &cuts, &free),
            branch_and_bound(&inst, &cuts, &free)
        );
        let mut some = free.clone();
        some[3] = Some(true);
        some[5] = Some(false);
        assert_eq!(
            enumerate(&inst, &cuts, &some),
            branch_and_bound(&inst, &cuts, &some)
        );
    }

    #[test]
    fn infinite_epsilon_stops_after_one_iteration() {
        let inst = two_plants([5.0, 7.0]);
        let scen = vec![Scenario::nominal(&inst)];
        let r = run_lshaped(&inst, &scen, f64::INFINITY, None).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.design.flags(&inst), vec![true, false]);
        assert!(r.cuts.is_empty());
    }
}
