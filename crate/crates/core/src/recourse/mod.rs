//! Second-stage problem: for a fixed design and scenario, buy raw material,
//! produce, ship, and pay for shortages.
//!
//! The LP is solved as a min-cost transshipment network. Node 0 is a hub
//! that feeds supplier capacity and both shortage tiers and absorbs excess.
//! Each plant is split into an inbound and an outbound node joined by the
//! plant-capacity arc. Shortage at a country is two parallel hub arcs: the
//! first ξ^d(1−ξ^g)Y_k units at c^s, the rest at c^s + c^o, which is exactly
//! the S′ linearization. LP duals are read off residual shortest-path
//! potentials.

mod theorems;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Network;
use crate::model::{validate_design, Design, Instance};
use crate::scenario::Scenario;

pub use theorems::{check_structural_theorems, TheoremViolation};

/// Relative tolerance for the primal/dual objective comparison.
pub const DUALITY_TOL: f64 = 1e-6;

/// One multiplier per constraint instance. Matrices are `[supplier][plant]`
/// and `[plant][country]`; entries for self-arcs, which carry no arc
/// constraint, are 0. Inequalities of sense ≤ have multipliers ≤ 0, the
/// shortage-aux rows (written as S′ − S ≥ −ξ^d(1−ξ^g)Y) have multipliers
/// ≥ 0, and the equality rows are free.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub supplier_capacity: Vec<f64>,
    /// Supply-arc bounds; the alliance arcs are the ally-gated family and
    /// the rest the general family.
    pub supply_arc: Vec<Vec<f64>>,
    pub plant_capacity: Vec<f64>,
    pub distribution_arc: Vec<Vec<f64>>,
    /// Demand balance per country (ally form for F ∪ {c1}, general otherwise).
    pub demand: Vec<f64>,
    pub flow_balance: Vec<f64>,
    /// Shortage-aux lower bound per country (plant-country form for k ∈ J).
    pub shortage_aux: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecourseSolution {
    /// U, `[supplier][plant]`.
    pub raw_flow: Vec<Vec<f64>>,
    /// V, `[plant][country]`.
    pub drug_flow: Vec<Vec<f64>>,
    pub shortage: Vec<f64>,
    pub shortage_aux: Vec<f64>,
    pub excess: Vec<f64>,
    pub objective: f64,
    /// Σ (c^rm + c^t1) U
    pub supply_cost: f64,
    /// Σ (c^pr + c^t2) V
    pub production_cost: f64,
    /// Σ c^s S
    pub shortage_cost: f64,
    /// c^o Σ S′
    pub escalation_cost: f64,
    pub duals: DualVector,
}

/// Scenario quantities shared by the network build, duals and cut terms.
pub(crate) struct Data {
    /// a_i = q^sc ξ^sc
    pub supply: Vec<f64>,
    /// b_j = q^pc ξ^pc
    pub capacity: Vec<f64>,
    /// ξ^d minus retained exports
    pub net_demand: Vec<f64>,
    /// export gate of supply arc (s, p); self-arcs are 1
    pub gate1: Vec<Vec<bool>>,
    pub gate2: Vec<Vec<bool>>,
    /// ξ^d(1−ξ^g) for countries that host a plant candidate, else 0
    pub banned_demand: Vec<f64>,
    pub cost1: Vec<Vec<f64>>,
    pub cost2: Vec<Vec<f64>>,
}

impl Data {
    pub fn new(instance: &Instance, scenario: &Scenario) -> Data {
        let ni = instance.num_suppliers();
        let nj = instance.num_plants();
        let nk = instance.num_countries();
        let supply = (0..ni)
            .map(|s| instance.supplier_capacity(s) * scenario.supplier_avail[s])
            .collect();
        let capacity = (0..nj)
            .map(|p| instance.plant_capacity(p) * scenario.plant_avail[p])
            .collect();
        let net_demand = (0..nk)
            .map(|k| {
                let mut retained = 0.0;
                if !scenario.ban_general[k] {
                    retained += instance.exports_general(k);
                }
                let to_c1_closed = if instance.in_alliance(k) {
                    !scenario.ban_ally[k]
                } else {
                    !scenario.ban_general[k]
                };
                if to_c1_closed {
                    retained += instance.exports_to_c1(k);
                }
                scenario.demand[k] - retained
            })
            .collect();
        let gate1 = (0..ni)
            .map(|s| {
                let i = instance.suppliers()[s];
                (0..nj)
                    .map(|p| {
                        if i == instance.plants()[p] {
                            true
                        } else if instance.is_ally_supply_arc(s, p) {
                            scenario.ban_ally[i]
                        } else {
                            scenario.ban_general[i]
                        }
                    })
                    .collect()
            })
            .collect();
        let gate2 = (0..nj)
            .map(|p| {
                let j = instance.plants()[p];
                (0..nk)
                    .map(|k| {
                        if j == k {
                            true
                        } else if instance.is_ally_distribution_arc(p, k) {
                            scenario.ban_ally[j]
                        } else {
                            scenario.ban_general[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let banned_demand = (0..nk)
            .map(|k| {
                if instance.plant_position(k).is_some() && !scenario.ban_general[k] {
                    scenario.demand[k]
                } else {
                    0.0
                }
            })
            .collect();
        let cost1 = (0..ni)
            .map(|s| {
                (0..nj)
                    .map(|p| instance.raw_cost(s) + instance.transport1(s, p))
                    .collect()
            })
            .collect();
        let cost2 = (0..nj)
            .map(|p| {
                (0..nk)
                    .map(|k| instance.production_cost(p) + instance.transport2(p, k))
                    .collect()
            })
            .collect();
        Data {
            supply,
            capacity,
            net_demand,
            gate1,
            gate2,
            banned_demand,
            cost1,
            cost2,
        }
    }

    /// Capacity of supply arc (s, p) under open flag `open`; `None` for
    /// the uncapacitated self-arc.
    pub fn cap1(&self, instance: &Instance, s: usize, p: usize, open: bool) -> Option<f64> {
        if instance.suppliers()[s] == instance.plants()[p] {
            None
        } else if self.gate1[s][p] && open {
            Some(self.supply[s])
        } else {
            Some(0.0)
        }
    }

    pub fn cap2(&self, instance: &Instance, p: usize, k: usize, open: bool) -> Option<f64> {
        if instance.plants()[p] == k {
            None
        } else if self.gate2[p][k] && open {
            Some(self.capacity[p])
        } else {
            Some(0.0)
        }
    }
}

struct Layout {
    ni: usize,
    nj: usize,
}

impl Layout {
    const HUB: usize = 0;
    fn supplier(&self, s: usize) -> usize {
        1 + s
    }
    fn plant_in(&self, p: usize) -> usize {
        1 + self.ni + p
    }
    fn plant_out(&self, p: usize) -> usize {
        1 + self.ni + self.nj + p
    }
    fn country(&self, k: usize) -> usize {
        1 + self.ni + 2 * self.nj + k
    }
    fn nodes(&self, nk: usize) -> usize {
        1 + self.ni + 2 * self.nj + nk
    }
}

/// Solve Q(Y, ξ) for a validated design.
pub fn solve_recourse(
    instance: &Instance,
    design: &Design,
    scenario: &Scenario,
) -> Result<RecourseSolution> {
    validate_design(instance, design)?;
    scenario.check(instance)?;
    solve_with_flags(instance, &design.flags(instance), scenario)
}

/// Solve Q(Y, ξ) for open flags in plant order. Skips design validation.
pub fn solve_with_flags(
    instance: &Instance,
    open: &[bool],
    scenario: &Scenario,
) -> Result<RecourseSolution> {
    let data = Data::new(instance, scenario);
    solve_data(instance, open, scenario, &data)
}

pub(crate) fn solve_data(
    instance: &Instance,
    open: &[bool],
    scenario: &Scenario,
    data: &Data,
) -> Result<RecourseSolution> {
    let ni = instance.num_suppliers();
    let nj = instance.num_plants();
    let nk = instance.num_countries();
    let lay = Layout { ni, nj };
    let c_o = scenario.price_increase;
    let mut g = Network::new(lay.nodes(nk));

    let mut arc_supply = vec![None; ni];
    for s in 0..ni {
        if data.supply[s] > 0.0 {
            arc_supply[s] = Some(g.add_arc(Layout::HUB, lay.supplier(s), data.supply[s], 0.0));
        }
    }
    let mut arc_u = vec![vec![None; nj]; ni];
    for s in 0..ni {
        for p in 0..nj {
            let cap = data.cap1(instance, s, p, open[p]).unwrap_or(f64::INFINITY);
            if cap > 0.0 {
                arc_u[s][p] =
                    Some(g.add_arc(lay.supplier(s), lay.plant_in(p), cap, data.cost1[s][p]));
            }
        }
    }
    let mut arc_plant = vec![None; nj];
    for p in 0..nj {
        if open[p] && data.capacity[p] > 0.0 {
            arc_plant[p] =
                Some(g.add_arc(lay.plant_in(p), lay.plant_out(p), data.capacity[p], 0.0));
        }
    }
    let mut arc_v = vec![vec![None; nk]; nj];
    for p in 0..nj {
        for k in 0..nk {
            let cap = data.cap2(instance, p, k, open[p]).unwrap_or(f64::INFINITY);
            if cap > 0.0 {
                arc_v[p][k] =
                    Some(g.add_arc(lay.plant_out(p), lay.country(k), cap, data.cost2[p][k]));
            }
        }
    }
    let mut tier1 = vec![None; nk];
    let mut tier2 = Vec::with_capacity(nk);
    let mut arc_e = Vec::with_capacity(nk);
    for k in 0..nk {
        let m = tier1_cap(instance, data, open, k);
        if m > 0.0 {
            tier1[k] = Some(g.add_arc(Layout::HUB, lay.country(k), m, instance.shortage_price(k)));
        }
        tier2.push(g.add_arc(
            Layout::HUB,
            lay.country(k),
            f64::INFINITY,
            instance.shortage_price(k) + c_o,
        ));
        arc_e.push(g.add_arc(lay.country(k), Layout::HUB, f64::INFINITY, 0.0));
    }

    let mut supply = vec![0.0; g.num_nodes()];
    for k in 0..nk {
        supply[lay.country(k)] = -data.net_demand[k];
    }
    supply[Layout::HUB] = data.net_demand.iter().sum();
    g.solve(&supply)?;

    let flow = |a: Option<usize>| a.map_or(0.0, |a| g.flow(a));
    let raw_flow: Vec<Vec<f64>> = arc_u
        .iter()
        .map(|r| r.iter().map(|&a| flow(a)).collect())
        .collect();
    let drug_flow: Vec<Vec<f64>> = arc_v
        .iter()
        .map(|r| r.iter().map(|&a| flow(a)).collect())
        .collect();
    let aux: Vec<f64> = tier2.iter().map(|&a| g.flow(a)).collect();
    let shortage: Vec<f64> = (0..nk).map(|k| flow(tier1[k]) + aux[k]).collect();
    let excess: Vec<f64> = arc_e.iter().map(|&a| g.flow(a)).collect();

    let mut supply_cost = 0.0;
    for s in 0..ni {
        for p in 0..nj {
            supply_cost += data.cost1[s][p] * raw_flow[s][p];
        }
    }
    let mut production_cost = 0.0;
    for p in 0..nj {
        for k in 0..nk {
            production_cost += data.cost2[p][k] * drug_flow[p][k];
        }
    }
    let shortage_cost: f64 = (0..nk)
        .map(|k| instance.shortage_price(k) * shortage[k])
        .sum();
    let escalation_cost = c_o * aux.iter().sum::<f64>();
    let objective = supply_cost + production_cost + shortage_cost + escalation_cost;

    // Any path cost is below this, so isolated nodes get a harmless label.
    let ceiling = 1.0
        + (0..g.num_arcs()).map(|a| g.cost(a)).sum::<f64>()
        + (0..nk)
            .map(|k| instance.shortage_price(k))
            .fold(0.0, f64::max)
        + c_o;
    let pot = g.residual_potentials(Layout::HUB, ceiling)?;
    let duals = build_duals(instance, open, data, &pot, &lay, ceiling);

    let solution = RecourseSolution {
        raw_flow,
        drug_flow,
        shortage,
        shortage_aux: aux,
        excess,
        objective,
        supply_cost,
        production_cost,
        shortage_cost,
        escalation_cost,
        duals,
    };
    if !solution.objective.is_finite() {
        return Err(Error::NonFinite("recourse objective".into()));
    }
    let (constant, coeff) = cut_terms_data(instance, data, &solution.duals);
    let dual_obj = constant
        + coeff
            .iter()
            .zip(open)
            .filter(|(_, &o)| o)
            .map(|(c, _)| c)
            .sum::<f64>();
    if (dual_obj - objective).abs() > DUALITY_TOL * objective.abs().max(1.0) {
        return Err(Error::DualityViolation {
            primal: objective,
            dual: dual_obj,
        });
    }
    Ok(solution)
}

fn tier1_cap(instance: &Instance, data: &Data, open: &[bool], k: usize) -> f64 {
    match instance.plant_position(k) {
        Some(p) if open[p] => data.banned_demand[k],
        _ => 0.0,
    }
}

fn build_duals(
    instance: &Instance,
    open: &[bool],
    data: &Data,
    pot: &[f64],
    lay: &Layout,
    ceiling: f64,
) -> DualVector {
    let ni = instance.num_suppliers();
    let nj = instance.num_plants();
    let nk = instance.num_countries();
    let p_sup: Vec<f64> = (0..ni).map(|s| pot[lay.supplier(s)]).collect();
    let p_cty: Vec<f64> = (0..nk).map(|k| pot[lay.country(k)]).collect();
    let mut p_in: Vec<f64> = (0..nj).map(|p| pot[lay.plant_in(p)]).collect();
    let mut p_out: Vec<f64> = (0..nj).map(|p| pot[lay.plant_out(p)]).collect();

    for p in 0..nj {
        if !open[p] {
            let (x, y) = strengthen_closed(instance, data, &p_sup, &p_cty, p, ceiling);
            p_in[p] = x;
            p_out[p] = y;
        }
    }

    let supplier_capacity = p_sup.iter().map(|&v| (-v).min(0.0)).collect();
    let supply_arc = (0..ni)
        .map(|s| {
            (0..nj)
                .map(|p| {
                    if instance.suppliers()[s] == instance.plants()[p] {
                        0.0
                    } else {
                        (data.cost1[s][p] + p_sup[s] - p_in[p]).min(0.0)
                    }
                })
                .collect()
        })
        .collect();
    let plant_capacity = (0..nj).map(|p| (p_in[p] - p_out[p]).min(0.0)).collect();
    let distribution_arc = (0..nj)
        .map(|p| {
            (0..nk)
                .map(|k| {
                    if instance.plants()[p] == k {
                        0.0
                    } else {
                        (data.cost2[p][k] + p_out[p] - p_cty[k]).min(0.0)
                    }
                })
                .collect()
        })
        .collect();
    let shortage_aux = (0..nk)
        .map(|k| (p_cty[k] - instance.shortage_price(k)).max(0.0))
        .collect();
    DualVector {
        supplier_capacity,
        supply_arc,
        plant_capacity,
        distribution_arc,
        demand: p_cty,
        flow_balance: p_in,
        shortage_aux,
    }
}

/// Choose inbound/outbound potentials of a closed plant to maximize its
/// cut coefficient while keeping every dual constraint satisfied. With
/// outbound potential y = max(x, hi) the coefficient is
/// A(x) − b·max(0, hi − x), concave piecewise linear in x, so the best x is
/// a breakpoint or the self-arc bound.
fn strengthen_closed(
    instance: &Instance,
    data: &Data,
    p_sup: &[f64],
    p_cty: &[f64],
    p: usize,
    ceiling: f64,
) -> (f64, f64) {
    let j = instance.plants()[p];
    let b = data.capacity[p];
    let mut hi = p_cty[j] - data.cost2[p][j];
    for k in 0..instance.num_countries() {
        if k != j && data.gate2[p][k] {
            hi = hi.max(p_cty[k] - data.cost2[p][k]);
        }
    }
    let ub = match instance.supplier_position(j) {
        Some(s) => p_sup[s] + data.cost1[s][p],
        None => f64::INFINITY,
    };
    let inbound: Vec<(f64, f64)> = (0..instance.num_suppliers())
        .filter(|&s| instance.suppliers()[s] != j && data.gate1[s][p] && data.supply[s] > 0.0)
        .map(|s| (data.supply[s], data.cost1[s][p] + p_sup[s]))
        .collect();
    let f = |x: f64| -> f64 {
        let a: f64 = inbound.iter().map(|&(w, c)| w * (c - x).min(0.0)).sum();
        a - b * (hi - x).max(0.0)
    };
    let mut candidates: Vec<f64> = inbound.iter().map(|&(_, c)| c).collect();
    candidates.push(hi);
    if ub.is_finite() {
        candidates.push(ub);
    }
    let mut best = (f64::NEG_INFINITY, ub.min(ceiling));
    for x in candidates {
        if x <= ub {
            let v = f(x);
            if v > best.0 {
                best = (v, x);
            }
        }
    }
    let x = best.1;
    (x, x.max(hi))
}

/// Scenario affine minorant of Q(·, ξ): `constant + Σ_p coeff[p]·Y_p`.
pub fn recourse_cut_terms(
    instance: &Instance,
    scenario: &Scenario,
    solution: &RecourseSolution,
) -> (f64, Vec<f64>) {
    let data = Data::new(instance, scenario);
    cut_terms_data(instance, &data, &solution.duals)
}

pub(crate) fn cut_terms_data(
    instance: &Instance,
    data: &Data,
    duals: &DualVector,
) -> (f64, Vec<f64>) {
    let ni = instance.num_suppliers();
    let nj = instance.num_plants();
    let nk = instance.num_countries();
    let mut constant = 0.0;
    for s in 0..ni {
        constant += data.supply[s] * duals.supplier_capacity[s];
    }
    for k in 0..nk {
        constant += data.net_demand[k] * duals.demand[k];
    }
    let mut coeff = vec![0.0; nj];
    for p in 0..nj {
        let mut c = 0.0;
        for s in 0..ni {
            if let Some(cap) = data.cap1(instance, s, p, true) {
                c += cap * duals.supply_arc[s][p];
            }
        }
        c += data.capacity[p] * duals.plant_capacity[p];
        for k in 0..nk {
            if let Some(cap) = data.cap2(instance, p, k, true) {
                c += cap * duals.distribution_arc[p][k];
            }
        }
        let j = instance.plants()[p];
        c -= data.banned_demand[j] * duals.shortage_aux[j];
        coeff[p] = c;
    }
    (constant, coeff)
}

impl RecourseSolution {
    /// Total drug shipped, Σ V.
    pub fn sales(&self) -> f64 {
        self.drug_flow.iter().flatten().sum()
    }
}
