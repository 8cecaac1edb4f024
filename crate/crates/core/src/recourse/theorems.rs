//! Structural optimality checks on a recourse solution:
//!
//! * T1: a country whose retained exports cover its demand receives
//!   nothing and has no shortage.
//! * T2: every positive plant-to-country flow satisfies the economic and
//!   trade-availability conditions of its row in the necessary-conditions
//!   table (plant in an allied country, in c1, or in a non-allied country).
//! * T3: one unit of capacity never serves a destination with a smaller
//!   marginal penalty while a reachable destination with a larger one is
//!   short.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Data, RecourseSolution};
use crate::model::{Design, Instance};
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremViolation {
    pub theorem: u8,
    pub message: String,
}

impl fmt::Display for TheoremViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}: {}", self.theorem, self.message)
    }
}

/// Conditions attached to a (plant, destination, supplier) triple.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Conditions {
    /// (ii)a: ξ^g of the plant country
    pub general_out: bool,
    /// (ii)b: ξ^g of the supplier country
    pub general_in: bool,
    /// (iii)a: ξ^ġ of the plant country
    pub ally_out: bool,
    /// (iii)b: ξ^ġ of the supplier country
    pub ally_in: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Place {
    Interest,
    Ally,
    Other,
}

fn place(instance: &Instance, k: usize) -> Place {
    if k == instance.interest_country() {
        Place::Interest
    } else if instance.is_ally(k) {
        Place::Ally
    } else {
        Place::Other
    }
}

/// Trade conditions from the necessary-conditions table, one row per
/// (plant class, destination class, supplier class). Condition (i) applies
/// to every row.
pub(crate) fn table_row(instance: &Instance, j: usize, k: usize, i: usize) -> Conditions {
    let c = |general_out, general_in, ally_out, ally_in| Conditions {
        general_out,
        general_in,
        ally_out,
        ally_in,
    };
    let c1 = instance.interest_country();
    match place(instance, j) {
        Place::Ally => {
            let out = if k == c1 {
                (false, true) // (iii)a
            } else if k == j {
                (false, false)
            } else {
                (true, false) // (ii)a
            };
            let inn = if i == c1 {
                (false, true) // (iii)b
            } else if i == j {
                (false, false)
            } else {
                (true, false) // (ii)b
            };
            c(out.0, inn.0, out.1, inn.1)
        }
        Place::Interest => {
            let out = match place(instance, k) {
                Place::Ally => (false, true),
                Place::Interest => (false, false),
                Place::Other => (true, false),
            };
            let inn = match place(instance, i) {
                Place::Other => (true, false),
                Place::Ally => (false, true),
                Place::Interest => (false, false),
            };
            c(out.0, inn.0, out.1, inn.1)
        }
        Place::Other => c(k != j, i != j, false, false),
    }
}

fn holds(cond: Conditions, scenario: &Scenario, j: usize, i: usize) -> Vec<&'static str> {
    let mut failed = Vec::new();
    if cond.general_out && !scenario.ban_general[j] {
        failed.push("(ii)a");
    }
    if cond.general_in && !scenario.ban_general[i] {
        failed.push("(ii)b");
    }
    if cond.ally_out && !scenario.ban_ally[j] {
        failed.push("(iii)a");
    }
    if cond.ally_in && !scenario.ban_ally[i] {
        failed.push("(iii)b");
    }
    failed
}

/// Run T1–T3 and return every violation found; empty for an optimal
/// solution.
pub fn check_structural_theorems(
    instance: &Instance,
    design: &Design,
    scenario: &Scenario,
    solution: &RecourseSolution,
) -> Vec<TheoremViolation> {
    let data = Data::new(instance, scenario);
    let open = design.flags(instance);
    let nk = instance.num_countries();
    let ni = instance.num_suppliers();
    let nj = instance.num_plants();
    let scale = 1.0 + scenario.demand.iter().fold(0.0_f64, |a, &d| a.max(d));
    let tol = 1e-7 * scale;
    let cost_tol = 1e-9 * (1.0 + scenario.price_increase);
    let c_o = scenario.price_increase;
    let name = |k: usize| instance.country_id(k).as_str();
    let mut out = Vec::new();

    // T1
    for k in 0..nk {
        let d = scenario.demand[k];
        let (e, e1) = (instance.exports_general(k), instance.exports_to_c1(k));
        let (g, gd) = (scenario.ban_general[k], scenario.ban_ally[k]);
        let (applies, excess) = if instance.in_alliance(k) {
            if !g && !gd && e + e1 >= d {
                (true, Some(e + e1 - d))
            } else {
                ((!g && e >= d) || (!gd && e1 >= d), None)
            }
        } else if !g && e + e1 >= d {
            (true, Some(e + e1 - d))
        } else {
            (false, None)
        };
        if !applies {
            continue;
        }
        if solution.shortage[k] > tol && instance.shortage_price(k) > 0.0 {
            out.push(TheoremViolation {
                theorem: 1,
                message: format!(
                    "{} covers demand from retained exports but has shortage {}",
                    name(k),
                    solution.shortage[k]
                ),
            });
        }
        for p in 0..nj {
            let v = solution.drug_flow[p][k];
            let cheapest_in = (0..ni)
                .filter(|&s| solution.raw_flow[s][p] > 0.0)
                .map(|s| data.cost1[s][p])
                .fold(f64::INFINITY, f64::min);
            let upstream = if cheapest_in.is_finite() {
                cheapest_in
            } else {
                0.0
            };
            if v > tol && data.cost2[p][k] + upstream > 0.0 {
                out.push(TheoremViolation {
                    theorem: 1,
                    message: format!(
                        "{} covers demand from retained exports but receives {v} from {}",
                        name(k),
                        instance.plant_id(p)
                    ),
                });
            }
        }
        if let Some(expected) = excess {
            if (solution.excess[k] - expected).abs() > tol && solution.shortage[k] <= tol {
                out.push(TheoremViolation {
                    theorem: 1,
                    message: format!(
                        "{} excess {} differs from {expected}",
                        name(k),
                        solution.excess[k]
                    ),
                });
            }
        }
    }

    // T2
    for p in 0..nj {
        let j = instance.plants()[p];
        if !open[p] {
            continue;
        }
        let feeders: Vec<usize> = (0..ni).filter(|&s| solution.raw_flow[s][p] > tol).collect();
        for k in 0..nk {
            let v = solution.drug_flow[p][k];
            if v <= tol {
                continue;
            }
            if data.capacity[p] <= 0.0 {
                out.push(TheoremViolation {
                    theorem: 2,
                    message: format!(
                        "{} ships {v} to {} without available capacity",
                        name(j),
                        name(k)
                    ),
                });
                continue;
            }
            if feeders.is_empty() {
                out.push(TheoremViolation {
                    theorem: 2,
                    message: format!(
                        "{} ships {v} to {} with no raw-material inflow",
                        name(j),
                        name(k)
                    ),
                });
                continue;
            }
            for &s in &feeders {
                let i = instance.suppliers()[s];
                let chain = data.cost1[s][p] + data.cost2[p][k];
                if instance.shortage_price(k) + c_o < chain - cost_tol {
                    out.push(TheoremViolation {
                        theorem: 2,
                        message: format!(
                            "(i) fails for {} -> {} -> {}: penalty {} below chain cost {chain}",
                            name(i),
                            name(j),
                            name(k),
                            instance.shortage_price(k) + c_o
                        ),
                    });
                }
                let failed = holds(table_row(instance, j, k, i), scenario, j, i);
                if !failed.is_empty() || data.supply[s] <= 0.0 {
                    out.push(TheoremViolation {
                        theorem: 2,
                        message: format!(
                            "trade conditions {failed:?} fail for {} -> {} -> {}",
                            name(i),
                            name(j),
                            name(k)
                        ),
                    });
                }
            }
        }
    }

    // T3
    for p in 0..nj {
        if !open[p] {
            continue;
        }
        let j = instance.plants()[p];
        for k2 in 0..nk {
            if solution.drug_flow[p][k2] <= tol || !scenario.ban_general[k2] {
                continue;
            }
            let pen2 = instance.shortage_price(k2) + c_o - data.cost2[p][k2];
            for k1 in 0..nk {
                if k1 == k2 || solution.shortage[k1] <= tol || !scenario.ban_general[k1] {
                    continue;
                }
                if !data.gate2[p][k1] {
                    continue;
                }
                let pen1 = instance.shortage_price(k1) + c_o - data.cost2[p][k1];
                if pen1 > pen2 + cost_tol {
                    out.push(TheoremViolation {
                        theorem: 3,
                        message: format!(
                            "{} serves {} (penalty {pen2}) while {} (penalty {pen1}) is short",
                            name(j),
                            name(k2),
                            name(k1)
                        ),
                    });
                }
            }
        }
    }
    out
}
