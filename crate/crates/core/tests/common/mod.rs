//! Independent oracles and fixtures shared by the integration tests.
//!
//! `solve_lp` is a dense two-phase simplex with Bland's rule. `recourse_lp`
//! writes the second-stage LP row by row from the model definition and
//! shares no code with the network solver.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strainchain::{
    generate_synthetic_instance, CountryId, DualVector, IncomeLevel, Instance, InstanceFile, Pmf,
    RiskProfile, Scenario, SyntheticSpec,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

pub struct Lp {
    pub c: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

const EPS: f64 = 1e-9;

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        for i in 0..self.t.len() {
            if i != r {
                let f = self.t[i][c];
                if f != 0.0 {
                    for j in 0..=self.cols {
                        self.t[i][j] -= f * self.t[r][j];
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimize `cost`; columns with `allowed[j] == false` never enter.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) {
        let m = self.t.len();
        for _ in 0..100_000 {
            let mut enter = None;
            for j in 0..self.cols {
                if !allowed[j] || self.basis.contains(&j) {
                    continue;
                }
                let rc = cost[j]
                    - (0..m)
                        .map(|i| cost[self.basis[i]] * self.t[i][j])
                        .sum::<f64>();
                if rc < -EPS {
                    enter = Some(j);
                    break;
                }
            }
            let Some(c) = enter else { return };
            let mut leave: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > EPS {
                    let ratio = self.t[i][self.cols] / a;
                    let better = match leave {
                        None => true,
                        Some((r, _, b)) => {
                            ratio < r - 1e-12 || (ratio <= r + 1e-12 && self.basis[i] < b)
                        }
                    };
                    if better {
                        leave = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let (_, r, _) = leave.expect("unbounded LP");
            self.pivot(r, c);
        }
        panic!("simplex iteration limit");
    }
}

/// min c·x subject to `rows`, x ≥ 0. `None` when infeasible.
pub fn solve_lp(lp: &Lp) -> Option<(f64, Vec<f64>)> {
    let n = lp.c.len();
    let m = lp.rows.len();
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = lp.rows.clone();
    for (a, s, b) in rows.iter_mut() {
        if *b < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
            *s = match *s {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let ns = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let na = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + ns + na;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut si, mut ai) = (n, n + ns);
    for (i, (a, s, b)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        t[i][cols] = *b;
        match s {
            Sense::Le => {
                t[i][si] = 1.0;
                basis[i] = si;
                si += 1;
            }
            Sense::Ge => {
                t[i][si] = -1.0;
                si += 1;
                t[i][ai] = 1.0;
                basis[i] = ai;
                ai += 1;
            }
            Sense::Eq => {
                t[i][ai] = 1.0;
                basis[i] = ai;
                ai += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };
    let is_art = |j: usize| j >= n + ns;
    let phase1: Vec<f64> = (0..cols)
        .map(|j| if is_art(j) { 1.0 } else { 0.0 })
        .collect();
    tab.optimize(&phase1, &vec![true; cols]);
    let infeas: f64 = (0..m)
        .filter(|&i| is_art(tab.basis[i]))
        .map(|i| tab.t[i][cols])
        .sum();
    let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
    if infeas > 1e-7 * scale {
        return None;
    }
    for i in 0..m {
        if is_art(tab.basis[i]) {
            if let Some(j) = (0..n + ns).find(|&j| tab.t[i][j].abs() > EPS) {
                tab.pivot(i, j);
            }
        }
    }
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.c);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    tab.optimize(&cost, &allowed);
    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[i][cols];
        }
    }
    let obj = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    Some((obj, x))
}

/// Ally status of the supply or distribution arc from country `a` to `b`.
fn ally_arc(inst: &Instance, a: usize, b: usize) -> bool {
    let c1 = inst.interest_country();
    a != b && ((b == c1 && inst.is_ally(a)) || (a == c1 && inst.is_ally(b)))
}

fn in_alliance(inst: &Instance, k: usize) -> bool {
    k == inst.interest_country() || inst.is_ally(k)
}

/// Q(Y, ξ) from the row-by-row LP.
pub fn recourse_lp(inst: &Instance, open: &[bool], sc: &Scenario) -> f64 {
    let (ni, nj, nk) = (
        inst.num_suppliers(),
        inst.num_plants(),
        inst.num_countries(),
    );
    let u = |s: usize, p: usize| s * nj + p;
    let v = |p: usize, k: usize| ni * nj + p * nk + k;
    let sh = |k: usize| ni * nj + nj * nk + k;
    let aux = |k: usize| ni * nj + nj * nk + nk + k;
    let ex = |k: usize| ni * nj + nj * nk + 2 * nk + k;
    let n = ni * nj + nj * nk + 3 * nk;
    let y = |p: usize| if open[p] { 1.0 } else { 0.0 };
    let g = |k: usize| if sc.ban_general[k] { 1.0 } else { 0.0 };
    let gd = |k: usize| if sc.ban_ally[k] { 1.0 } else { 0.0 };

    let mut c = vec![0.0; n];
    for s in 0..ni {
        for p in 0..nj {
            c[u(s, p)] = inst.raw_cost(s) + inst.transport1(s, p);
        }
    }
    for p in 0..nj {
        for k in 0..nk {
            c[v(p, k)] = inst.production_cost(p) + inst.transport2(p, k);
        }
    }
    for k in 0..nk {
        c[sh(k)] = inst.shortage_price(k);
        c[aux(k)] = sc.price_increase;
    }

    let mut rows = Vec::new();
    let row = || vec![0.0; n];
    for s in 0..ni {
        let i = inst.suppliers()[s];
        let a = inst.supplier_capacity(s) * sc.supplier_avail[s];
        let mut r = row();
        for p in 0..nj {
            r[u(s, p)] = 1.0;
        }
        rows.push((r, Sense::Le, a));
        for p in 0..nj {
            let j = inst.plants()[p];
            let gate = if i == j {
                1.0
            } else if ally_arc(inst, i, j) {
                gd(i)
            } else {
                g(i)
            };
            let mut r = row();
            r[u(s, p)] = 1.0;
            rows.push((r, Sense::Le, a * gate * y(p)));
        }
    }
    for p in 0..nj {
        let j = inst.plants()[p];
        let b = inst.plant_capacity(p) * sc.plant_avail[p];
        let mut r = row();
        for k in 0..nk {
            r[v(p, k)] = 1.0;
        }
        rows.push((r, Sense::Le, b * y(p)));
        for k in 0..nk {
            if k == j {
                continue;
            }
            let gate = if ally_arc(inst, j, k) { gd(j) } else { g(j) };
            let mut r = row();
            r[v(p, k)] = 1.0;
            rows.push((r, Sense::Le, b * gate * y(p)));
        }
        let mut r = row();
        for s in 0..ni {
            r[u(s, p)] = 1.0;
        }
        for k in 0..nk {
            r[v(p, k)] = -1.0;
        }
        rows.push((r, Sense::Eq, 0.0));
    }
    for k in 0..nk {
        let d = sc.demand[k];
        let to_c1_open = if in_alliance(inst, k) { gd(k) } else { g(k) };
        let retained =
            (1.0 - g(k)) * inst.exports_general(k) + (1.0 - to_c1_open) * inst.exports_to_c1(k);
        let mut r = row();
        for p in 0..nj {
            r[v(p, k)] = 1.0;
        }
        r[sh(k)] = 1.0;
        r[ex(k)] = -1.0;
        rows.push((r, Sense::Eq, d - retained));
        // S' − S ≥ −ξ^d(1−ξ^g)Y_k on plant countries, S' ≥ S elsewhere
        let mut r = row();
        r[aux(k)] = 1.0;
        r[sh(k)] = -1.0;
        let rhs = match inst.plant_position(k) {
            Some(p) => -d * (1.0 - g(k)) * y(p),
            None => 0.0,
        };
        rows.push((r, Sense::Ge, rhs));
    }
    solve_lp(&Lp { c, rows })
        .expect("recourse LP has complete recourse")
        .0
}

/// Sample-average objective of every feasible design: `(mask, value)`.
pub fn enumerate_designs(inst: &Instance, scenarios: &[Scenario]) -> Vec<(u64, f64)> {
    let nj = inst.num_plants();
    (1u64..1 << nj)
        .map(|mask| {
            let open: Vec<bool> = (0..nj).map(|p| mask >> p & 1 == 1).collect();
            let fixed: f64 = (0..nj)
                .filter(|&p| open[p])
                .map(|p| inst.fixed_cost(p))
                .sum();
            let q: f64 = scenarios
                .iter()
                .map(|s| recourse_lp(inst, &open, s))
                .sum::<f64>()
                / scenarios.len() as f64;
            (mask, fixed + q)
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn synth(suppliers: usize, plants: usize, countries: usize, seed: u64) -> Instance {
    generate_synthetic_instance(&SyntheticSpec {
        suppliers,
        plants,
        countries,
        seed,
        risk: RiskProfile::Low,
    })
    .unwrap()
}

/// Edit a synthetic instance through its file form.
pub fn edit(inst: &Instance, f: impl FnOnce(&mut InstanceFile)) -> Instance {
    let mut file = inst.to_file();
    f(&mut file);
    Instance::from_file(file).unwrap()
}

/// Bans are likely: gate always open, low export probabilities.
pub fn stressed(suppliers: usize, plants: usize, countries: usize, seed: u64) -> Instance {
    edit(&synth(suppliers, plants, countries, seed), |f| {
        f.ban_threshold = 1.0;
        for v in f.export_prob.values_mut() {
            *v = 0.5;
        }
        for v in f.ally_export_prob.values_mut() {
            *v = 0.75;
        }
        for v in f.supplier_avail_prob.values_mut() {
            *v = v.min(0.95);
        }
    })
}

/// Arbitrary consistent scenario: any capacities, demands and ban flags
/// (with ξ^g ⇒ ξ^ġ), G and c^o recomputed from the flags.
pub fn random_scenario(inst: &Instance, rng: &mut impl Rng) -> Scenario {
    let nk = inst.num_countries();
    let mut sc = Scenario::nominal(inst);
    for a in sc.supplier_avail.iter_mut() {
        *a = if rng.random::<f64>() < 0.15 {
            0.0
        } else {
            rng.random_range(0.3..=1.0)
        };
    }
    for a in sc.plant_avail.iter_mut() {
        *a = if rng.random::<f64>() < 0.15 {
            0.0
        } else {
            rng.random_range(0.3..=1.0)
        };
    }
    for k in 0..nk {
        sc.demand[k] = inst.demand_mean(k) * rng.random_range(0.0..1.6);
        let g = rng.random::<f64>() < 0.55;
        sc.ban_general[k] = g;
        // ξ^ġ exists only on F ∪ {c1}; elsewhere the slot stays 1
        sc.ban_ally[k] = !in_alliance(inst, k) || g || rng.random::<f64>() < 0.6;
    }
    sc.refresh(inst);
    sc
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn id(s: &str) -> CountryId {
    CountryId::from(s)
}

/// Six countries c1..c6: c1 is the country of interest with allies c2 and
/// c4; suppliers c3, c5; plant candidates c1, c2, c6.
pub fn six_country() -> Instance {
    let names = ["c1", "c2", "c3", "c4", "c5", "c6"];
    let all = |f: &dyn Fn(usize) -> f64| -> BTreeMap<CountryId, f64> {
        names
            .iter()
            .enumerate()
            .map(|(k, n)| (id(n), f(k)))
            .collect()
    };
    let suppliers = ["c3", "c5"];
    let plants = ["c1", "c2", "c6"];
    let over = |list: &[&str], f: &dyn Fn(usize) -> f64| -> BTreeMap<CountryId, f64> {
        list.iter()
            .enumerate()
            .map(|(k, n)| (id(n), f(k)))
            .collect()
    };
    let transport1 = suppliers
        .iter()
        .map(|s| {
            (
                id(s),
                plants
                    .iter()
                    .map(|p| (id(p), if s == p { 0.0 } else { 1.0 }))
                    .collect(),
            )
        })
        .collect();
    let transport2 = plants
        .iter()
        .map(|p| {
            (
                id(p),
                names
                    .iter()
                    .map(|k| (id(k), if p == k { 0.0 } else { 0.5 }))
                    .collect(),
            )
        })
        .collect();
    let file = InstanceFile {
        countries: names.iter().map(|n| id(n)).collect(),
        suppliers: suppliers.iter().map(|n| id(n)).collect(),
        plant_candidates: plants.iter().map(|n| id(n)).collect(),
        interest_country: id("c1"),
        allies: vec![id("c2"), id("c4")],
        income_level: names
            .iter()
            .enumerate()
            .map(|(k, n)| (id(n), IncomeLevel::ALL[k % 4]))
            .collect(),
        raw_cost: over(&suppliers, &|_| 1.0),
        production_cost: over(&plants, &|_| 2.0),
        fixed_cost: over(&plants, &|p| 50.0 + 10.0 * p as f64),
        transport1,
        transport2,
        shortage_price: all(&|k| [12.0, 8.0, 3.0, 12.0, 8.0, 3.0][k]),
        supplier_capacity: over(&suppliers, &|_| 200.0),
        plant_capacity: over(&plants, &|_| 150.0),
        exports_general: all(&|k| [10.0, 5.0, 8.0, 2.0, 1.0, 3.0][k]),
        exports_to_c1: all(&|k| [0.0, 3.0, 6.0, 4.0, 2.0, 1.0][k]),
        beta: 0.01,
        ban_threshold: 0.8,
        export_prob: all(&|_| 0.9),
        ally_export_prob: [("c1", 0.95), ("c2", 0.95), ("c4", 0.95)]
            .iter()
            .map(|(n, v)| (id(n), *v))
            .collect(),
        demand_mean: all(&|k| [100.0, 60.0, 40.0, 50.0, 30.0, 20.0][k]),
        demand_sd: all(&|_| 5.0),
        supplier_avail_prob: over(&suppliers, &|_| 0.97),
        plant_avail_prob: over(&plants, &|_| 0.97),
        supplier_strain_pmf: suppliers
            .iter()
            .map(|n| (id(n), Pmf::degenerate(1.0)))
            .collect(),
        plant_strain_pmf: plants
            .iter()
            .map(|n| (id(n), Pmf::degenerate(1.0)))
            .collect(),
    };
    Instance::from_file(file).unwrap()
}

/// Deterministic instance: degenerate PMFs, no disruptions, zero demand
/// spread, no bans.
pub fn deterministic(suppliers: usize, plants: usize, countries: usize, seed: u64) -> Instance {
    edit(&synth(suppliers, plants, countries, seed), |f| {
        for v in f.supplier_avail_prob.values_mut() {
            *v = 1.0;
        }
        for v in f.plant_avail_prob.values_mut() {
            *v = 1.0;
        }
        for v in f.demand_sd.values_mut() {
            *v = 0.0;
        }
        for v in f.supplier_strain_pmf.values_mut() {
            *v = Pmf::degenerate(1.0);
        }
        for v in f.plant_strain_pmf.values_mut() {
            *v = Pmf::degenerate(1.0);
        }
        f.ban_threshold = 0.0;
    })
}

/// Plain instance file: unit costs, no risk, every map filled. Tests edit
/// the fields they care about.
pub fn blank(
    countries: &[&str],
    suppliers: &[&str],
    plants: &[&str],
    interest: &str,
    allies: &[&str],
) -> InstanceFile {
    let over = |list: &[&str], v: f64| -> BTreeMap<CountryId, f64> {
        list.iter().map(|n| (id(n), v)).collect()
    };
    InstanceFile {
        countries: countries.iter().map(|n| id(n)).collect(),
        suppliers: suppliers.iter().map(|n| id(n)).collect(),
        plant_candidates: plants.iter().map(|n| id(n)).collect(),
        interest_country: id(interest),
        allies: allies.iter().map(|n| id(n)).collect(),
        income_level: countries
            .iter()
            .map(|n| (id(n), IncomeLevel::High))
            .collect(),
        raw_cost: over(suppliers, 1.0),
        production_cost: over(plants, 2.0),
        fixed_cost: over(plants, 10.0),
        transport1: suppliers
            .iter()
            .map(|s| (id(s), over(plants, 0.0)))
            .collect(),
        transport2: plants
            .iter()
            .map(|p| (id(p), over(countries, 0.0)))
            .collect(),
        shortage_price: over(countries, 10.0),
        supplier_capacity: over(suppliers, 100.0),
        plant_capacity: over(plants, 100.0),
        exports_general: over(countries, 0.0),
        exports_to_c1: over(countries, 0.0),
        beta: 0.0,
        ban_threshold: 0.8,
        export_prob: over(countries, 1.0),
        ally_export_prob: allies
            .iter()
            .chain([&interest])
            .map(|n| (id(n), 1.0))
            .collect(),
        demand_mean: over(countries, 50.0),
        demand_sd: over(countries, 0.0),
        supplier_avail_prob: over(suppliers, 1.0),
        plant_avail_prob: over(plants, 1.0),
        supplier_strain_pmf: suppliers
            .iter()
            .map(|n| (id(n), Pmf::degenerate(1.0)))
            .collect(),
        plant_strain_pmf: plants
            .iter()
            .map(|n| (id(n), Pmf::degenerate(1.0)))
            .collect(),
    }
}

pub fn set(map: &mut BTreeMap<CountryId, f64>, key: &str, v: f64) {
    *map.get_mut(&id(key))
        .unwrap_or_else(|| panic!("no key {key}")) = v;
}

/// Dual objective of the recourse LP at the multipliers `d`, after checking
/// sign restrictions and reduced costs. Rows follow `recourse_lp`; self arcs
/// carry no gate row, and flow balance is written ΣU − ΣV = 0.
pub fn dual_certificate(
    inst: &Instance,
    open: &[bool],
    sc: &Scenario,
    d: &DualVector,
) -> Result<f64, String> {
    let (ni, nj, nk) = (
        inst.num_suppliers(),
        inst.num_plants(),
        inst.num_countries(),
    );
    let y = |p: usize| if open[p] { 1.0 } else { 0.0 };
    let g = |k: usize| if sc.ban_general[k] { 1.0 } else { 0.0 };
    let gd = |k: usize| if sc.ban_ally[k] { 1.0 } else { 0.0 };
    let big = (0..nk)
        .map(|k| inst.shortage_price(k))
        .fold(sc.price_increase, f64::max);
    let tol = 1e-9 * (1.0 + big);
    let mut bad = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            bad.push(what);
        }
    };
    let mut obj = 0.0;

    for s in 0..ni {
        let i = inst.suppliers()[s];
        let a = inst.supplier_capacity(s) * sc.supplier_avail[s];
        check(
            d.supplier_capacity[s] <= tol,
            format!("supplier_capacity[{s}] > 0"),
        );
        obj += a * d.supplier_capacity[s];
        for p in 0..nj {
            let j = inst.plants()[p];
            let arc = d.supply_arc[s][p];
            check(arc <= tol, format!("supply_arc[{s}][{p}] > 0"));
            if i == j {
                check(arc == 0.0, format!("self supply arc {s},{p} priced"));
            } else {
                let gate = if ally_arc(inst, i, j) { gd(i) } else { g(i) };
                obj += a * gate * y(p) * arc;
            }
            let rc = inst.raw_cost(s) + inst.transport1(s, p)
                - d.supplier_capacity[s]
                - arc
                - d.flow_balance[p];
            check(rc >= -tol, format!("U[{s}][{p}] reduced cost {rc}"));
        }
    }
    for p in 0..nj {
        let j = inst.plants()[p];
        let b = inst.plant_capacity(p) * sc.plant_avail[p];
        check(
            d.plant_capacity[p] <= tol,
            format!("plant_capacity[{p}] > 0"),
        );
        obj += b * y(p) * d.plant_capacity[p];
        for k in 0..nk {
            let arc = d.distribution_arc[p][k];
            check(arc <= tol, format!("distribution_arc[{p}][{k}] > 0"));
            if k == j {
                check(arc == 0.0, format!("self distribution arc {p},{k} priced"));
            } else {
                let gate = if ally_arc(inst, j, k) { gd(j) } else { g(j) };
                obj += b * gate * y(p) * arc;
            }
            let rc = inst.production_cost(p) + inst.transport2(p, k)
                - d.plant_capacity[p]
                - arc
                - d.demand[k]
                + d.flow_balance[p];
            check(rc >= -tol, format!("V[{p}][{k}] reduced cost {rc}"));
        }
    }
    for k in 0..nk {
        let dem = sc.demand[k];
        let to_c1_open = if in_alliance(inst, k) { gd(k) } else { g(k) };
        let retained =
            (1.0 - g(k)) * inst.exports_general(k) + (1.0 - to_c1_open) * inst.exports_to_c1(k);
        obj += (dem - retained) * d.demand[k];
        let aux = d.shortage_aux[k];
        check(aux >= -tol, format!("shortage_aux[{k}] < 0"));
        if let Some(p) = inst.plant_position(k) {
            obj += -dem * (1.0 - g(k)) * y(p) * aux;
        }
        check(
            d.demand[k] >= -tol,
            format!("E[{k}] reduced cost {}", d.demand[k]),
        );
        let rc = inst.shortage_price(k) - d.demand[k] + aux;
        check(rc >= -tol, format!("S[{k}] reduced cost {rc}"));
        let rc = sc.price_increase - aux;
        check(rc >= -tol, format!("S'[{k}] reduced cost {rc}"));
    }
    if bad.is_empty() {
        Ok(obj)
    } else {
        Err(bad.join("; "))
    }
}
