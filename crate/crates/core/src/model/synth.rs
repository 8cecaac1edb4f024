//! Seeded synthetic instances: price tiers by income class, normal demand, strain PMFs on 70–100 %,
//! Bernoulli disruptions near 0.97 and export-ban probabilities averaging
//! about 0.977.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CountryId, IncomeLevel, Instance, Pmf};
use crate::error::{Error, Result};
use crate::rng;

/// Facility availability probability used for every supplier and plant.
pub const BASE_AVAIL_PROB: f64 = 0.9722;
/// Strain level below which export bans become possible.
pub const BASE_BAN_THRESHOLD: f64 = 0.8;
/// Multiplier applied to every ρ_k by the high-risk profile.
pub const HIGH_RISK_SCALE: f64 = 0.8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskProfile {
    #[default]
    Low,
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub suppliers: usize,
    pub plants: usize,
    pub countries: usize,
    pub seed: u64,
    #[serde(default)]
    pub risk: RiskProfile,
}

fn strain_pmf(r: &mut impl Rng) -> Pmf {
    let levels = Pmf::default_levels();
    let weights: Vec<f64> = (0..levels.len())
        .map(|n| r.random_range(0.2..1.0) * ((n + 1) * (n + 1)) as f64)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let head: f64 = probs[..probs.len() - 1].iter().sum();
    let last = probs.len() - 1;
    probs[last] = 1.0 - head;
    Pmf { levels, probs }
}

/// Generate a valid instance. Country `k00` is the country of interest and
/// is always a plant candidate.
pub fn generate_synthetic_instance(spec: &SyntheticSpec) -> Result<Instance> {
    let (ni, nj, nk) = (spec.suppliers, spec.plants, spec.countries);
    if ni == 0 || nj == 0 {
        return Err(Error::Config(
            "synthetic instance needs at least one supplier and one plant".into(),
        ));
    }
    if nk < ni.max(nj) {
        return Err(Error::Config(format!(
            "synthetic instance needs countries >= max(suppliers, plants), got {nk} < {}",
            ni.max(nj)
        )));
    }
    let mut r = rng::stream(spec.seed, &[rng::ROLE_INSTANCE]);
    let width = format!("{}", nk - 1).len().max(2);
    let countries: Vec<CountryId> = (0..nk)
        .map(|k| CountryId(format!("k{k:0width$}")))
        .collect();

    let income: Vec<IncomeLevel> = (0..nk).map(|k| IncomeLevel::ALL[k % 4]).collect();
    let allies: Vec<usize> = (1..nk).filter(|k| k % 3 == 1).collect();

    let mut suppliers: Vec<usize> = sample(&mut r, nk, ni).into_vec();
    suppliers.sort_unstable();
    let mut plants: Vec<usize> = sample(&mut r, nk - 1, nj - 1)
        .into_iter()
        .map(|k| k + 1)
        .collect();
    plants.push(0);
    plants.sort_unstable();

    let mut shortage_price = Vec::with_capacity(nk);
    let mut demand_mean = Vec::with_capacity(nk);
    let mut demand_sd = Vec::with_capacity(nk);
    for level in &income {
        let (price, lo, hi, cv) = match level {
            IncomeLevel::High => (12.0, 80.0, 120.0, 0.10),
            IncomeLevel::UpperMiddle => (8.0, 60.0, 100.0, 0.10),
            IncomeLevel::LowerMiddle => (3.0, 40.0, 80.0, 0.25),
            IncomeLevel::Low => (2.0, 20.0, 60.0, 0.25),
        };
        shortage_price.push(price * r.random_range(0.9..1.1));
        let mu: f64 = r.random_range(lo..hi);
        demand_mean.push(mu);
        demand_sd.push(cv * mu);
    }
    let total_demand: f64 = demand_mean.iter().sum();

    let exports_general: Vec<f64> = demand_mean
        .iter()
        .map(|m| m * r.random_range(0.0..0.3))
        .collect();
    let exports_to_c1: Vec<f64> = demand_mean
        .iter()
        .map(|m| m * r.random_range(0.0..0.1))
        .collect();

    // Roughly 15 % of countries are markedly riskier than the rest.
    let mut export_prob = Vec::with_capacity(nk);
    let mut ally_export_prob = Vec::with_capacity(nk);
    for _ in 0..nk {
        if r.random_bool(0.15) {
            export_prob.push(r.random_range(0.85..0.95));
            ally_export_prob.push(0.85);
        } else {
            export_prob.push(0.99);
            ally_export_prob.push(0.9);
        }
    }
    if spec.risk == RiskProfile::High {
        for p in &mut export_prob {
            *p *= HIGH_RISK_SCALE;
        }
    }
    for k in 0..nk {
        if k != 0 && !allies.contains(&k) {
            ally_export_prob[k] = 1.0;
        }
    }

    let points: Vec<(f64, f64)> = (0..nk)
        .map(|_| (r.random_range(0.0..10.0), r.random_range(0.0..10.0)))
        .collect();
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
        0.1 * (dx * dx + dy * dy).sqrt()
    };

    let raw_cost: Vec<f64> = suppliers.iter().map(|_| r.random_range(0.8..1.2)).collect();
    let supplier_capacity: Vec<f64> = suppliers
        .iter()
        .map(|_| total_demand * r.random_range(0.8..1.4) / ni as f64)
        .collect();
    let supplier_strain: Vec<Pmf> = suppliers.iter().map(|_| strain_pmf(&mut r)).collect();

    let production_cost: Vec<f64> = plants.iter().map(|_| r.random_range(1.5..4.0)).collect();
    let plant_capacity: Vec<f64> = plants
        .iter()
        .map(|_| total_demand * r.random_range(0.25..0.6))
        .collect();
    let fixed_cost: Vec<f64> = plant_capacity
        .iter()
        .map(|q| q * r.random_range(1.0..3.0))
        .collect();
    let plant_strain: Vec<Pmf> = plants.iter().map(|_| strain_pmf(&mut r)).collect();

    let transport1 = suppliers
        .iter()
        .map(|&i| plants.iter().map(|&j| dist(i, j)).collect())
        .collect();
    let transport2 = plants
        .iter()
        .map(|&j| (0..nk).map(|k| dist(j, k)).collect())
        .collect();

    let beta = 0.5 * shortage_price[0] / demand_mean[0];

    let mut supplier_pos = vec![None; nk];
    for (s, &k) in suppliers.iter().enumerate() {
        supplier_pos[k] = Some(s);
    }
    let mut plant_pos = vec![None; nk];
    for (p, &k) in plants.iter().enumerate() {
        plant_pos[k] = Some(p);
    }
    let mut is_ally = vec![false; nk];
    for &k in &allies {
        is_ally[k] = true;
    }

    let instance = Instance {
        countries,
        supplier_avail_prob: vec![BASE_AVAIL_PROB; suppliers.len()],
        plant_avail_prob: vec![BASE_AVAIL_PROB; plants.len()],
        suppliers,
        plants,
        interest: 0,
        allies,
        income,
        shortage_price,
        exports_general,
        exports_to_c1,
        export_prob,
        ally_export_prob,
        demand_mean,
        demand_sd,
        raw_cost,
        supplier_capacity,
        supplier_strain,
        production_cost,
        fixed_cost,
        plant_capacity,
        plant_strain,
        transport1,
        transport2,
        beta,
        ban_threshold: BASE_BAN_THRESHOLD,
        supplier_pos,
        plant_pos,
        is_ally,
    };
    instance.revalidate()
}
