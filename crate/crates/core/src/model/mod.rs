//! Problem data: countries, facilities, costs, capacities, exogenous
//! exports, alliances and risk parameters.
//!
//! An [`Instance`] is immutable once built and every constructor path goes
//! through validation, so downstream code may index freely. Countries are
//! stored in lexicographic order; suppliers, plant candidates and allies are
//! kept as sorted index lists into that order. Per-facility data is aligned
//! with the facility list (`raw_cost[s]` belongs to `suppliers[s]`).

mod design;
mod file;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use design::{validate_design, Design};
pub use file::{load_instance, parse_instance, write_instance, InstanceFile};
pub use synth::{generate_synthetic_instance, RiskProfile, SyntheticSpec};

/// Country identifier; non-empty and unique within an instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountryId(pub String);

impl CountryId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CountryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CountryId {
    fn from(s: &str) -> Self {
        CountryId(s.to_string())
    }
}

/// World Bank income class. Only reporting reads this.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IncomeLevel {
    #[serde(rename = "HIC")]
    High,
    #[serde(rename = "UMIC")]
    UpperMiddle,
    #[serde(rename = "LMIC")]
    LowerMiddle,
    #[serde(rename = "LIC")]
    Low,
}

impl IncomeLevel {
    pub const ALL: [IncomeLevel; 4] = [
        IncomeLevel::High,
        IncomeLevel::UpperMiddle,
        IncomeLevel::LowerMiddle,
        IncomeLevel::Low,
    ];

    pub fn code(self) -> &'static str {
        match self {
            IncomeLevel::High => "HIC",
            IncomeLevel::UpperMiddle => "UMIC",
            IncomeLevel::LowerMiddle => "LMIC",
            IncomeLevel::Low => "LIC",
        }
    }
}

impl fmt::Display for IncomeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Discrete distribution over capacity fractions, stored as parallel arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pmf {
    pub levels: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Pmf {
    /// Support {0.70, 0.75, ..., 1.00}.
    pub fn default_levels() -> Vec<f64> {
        (0..7).map(|n| (70 + 5 * n) as f64 / 100.0).collect()
    }

    pub fn degenerate(level: f64) -> Self {
        Pmf {
            levels: vec![level],
            probs: vec![1.0],
        }
    }

    pub fn mean(&self) -> f64 {
        self.levels
            .iter()
            .zip(&self.probs)
            .map(|(l, p)| l * p)
            .sum()
    }

    /// Inverse-CDF draw from a uniform `u` in [0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (level, p) in self.levels.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return *level;
            }
        }
        // u within rounding of 1: take the last level with positive mass
        self.levels
            .iter()
            .zip(&self.probs)
            .rev()
            .find(|(_, p)| **p > 0.0)
            .map(|(l, _)| *l)
            .unwrap_or(self.levels[self.levels.len() - 1])
    }

    fn check(&self, field: &str, key: &CountryId) -> crate::Result<()> {
        if self.levels.is_empty() || self.levels.len() != self.probs.len() {
            return Err(crate::Error::invalid(
                field,
                format!("for `{key}` needs non-empty levels/probs of equal length"),
            ));
        }
        for (l, p) in self.levels.iter().zip(&self.probs) {
            if !(l.is_finite() && (0.0..=1.0).contains(l)) {
                return Err(crate::Error::invalid(
                    field,
                    format!("level out of [0,1] for `{key}` ({l})"),
                ));
            }
            if !(p.is_finite() && (0.0..=1.0).contains(p)) {
                return Err(crate::Error::invalid(
                    field,
                    format!("probability out of [0,1] for `{key}` ({p})"),
                ));
            }
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(crate::Error::invalid(
                field,
                format!("probabilities for `{key}` sum to {total}, not 1"),
            ));
        }
        Ok(())
    }
}

/// Validated problem data. Construct with [`Instance::from_file`],
/// [`load_instance`] or [`generate_synthetic_instance`].
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub(crate) countries: Vec<CountryId>,
    pub(crate) suppliers: Vec<usize>,
    pub(crate) plants: Vec<usize>,
    pub(crate) interest: usize,
    pub(crate) allies: Vec<usize>,

    pub(crate) income: Vec<IncomeLevel>,
    pub(crate) shortage_price: Vec<f64>,
    pub(crate) exports_general: Vec<f64>,
    pub(crate) exports_to_c1: Vec<f64>,
    pub(crate) export_prob: Vec<f64>,
    /// Only meaningful for countries in F ∪ {c1}; 1.0 elsewhere.
    pub(crate) ally_export_prob: Vec<f64>,
    pub(crate) demand_mean: Vec<f64>,
    pub(crate) demand_sd: Vec<f64>,

    pub(crate) raw_cost: Vec<f64>,
    pub(crate) supplier_capacity: Vec<f64>,
    pub(crate) supplier_avail_prob: Vec<f64>,
    pub(crate) supplier_strain: Vec<Pmf>,

    pub(crate) production_cost: Vec<f64>,
    pub(crate) fixed_cost: Vec<f64>,
    pub(crate) plant_capacity: Vec<f64>,
    pub(crate) plant_avail_prob: Vec<f64>,
    pub(crate) plant_strain: Vec<Pmf>,

    /// `[supplier][plant]`
    pub(crate) transport1: Vec<Vec<f64>>,
    /// `[plant][country]`
    pub(crate) transport2: Vec<Vec<f64>>,

    pub(crate) beta: f64,
    pub(crate) ban_threshold: f64,

    pub(crate) supplier_pos: Vec<Option<usize>>,
    pub(crate) plant_pos: Vec<Option<usize>>,
    pub(crate) is_ally: Vec<bool>,
}

impl Instance {
    pub fn countries(&self) -> &[CountryId] {
        &self.countries
    }

    pub fn num_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn num_suppliers(&self) -> usize {
        self.suppliers.len()
    }

    pub fn num_plants(&self) -> usize {
        self.plants.len()
    }

    /// Country index of each supplier, in supplier order.
    pub fn suppliers(&self) -> &[usize] {
        &self.suppliers
    }

    /// Country index of each plant candidate, in plant order.
    pub fn plants(&self) -> &[usize] {
        &self.plants
    }

    pub fn interest_country(&self) -> usize {
        self.interest
    }

    pub fn allies(&self) -> &[usize] {
        &self.allies
    }

    pub fn country_id(&self, k: usize) -> &CountryId {
        &self.countries[k]
    }

    pub fn country_index(&self, id: &str) -> Option<usize> {
        self.countries.binary_search_by(|c| c.as_str().cmp(id)).ok()
    }

    pub fn supplier_position(&self, k: usize) -> Option<usize> {
        self.supplier_pos[k]
    }

    pub fn plant_position(&self, k: usize) -> Option<usize> {
        self.plant_pos[k]
    }

    pub fn plant_id(&self, p: usize) -> &CountryId {
        &self.countries[self.plants[p]]
    }

    pub fn supplier_id(&self, s: usize) -> &CountryId {
        &self.countries[self.suppliers[s]]
    }

    /// Membership in F (allies of c1, excluding c1).
    pub fn is_ally(&self, k: usize) -> bool {
        self.is_ally[k]
    }

    /// Membership in F ∪ {c1}.
    pub fn in_alliance(&self, k: usize) -> bool {
        self.is_ally[k] || k == self.interest
    }

    pub fn income(&self, k: usize) -> IncomeLevel {
        self.income[k]
    }

    pub fn shortage_price(&self, k: usize) -> f64 {
        self.shortage_price[k]
    }

    pub fn exports_general(&self, k: usize) -> f64 {
        self.exports_general[k]
    }

    pub fn exports_to_c1(&self, k: usize) -> f64 {
        self.exports_to_c1[k]
    }

    pub fn export_prob(&self, k: usize) -> f64 {
        self.export_prob[k]
    }

    pub fn ally_export_prob(&self, k: usize) -> f64 {
        self.ally_export_prob[k]
    }

    pub fn demand_mean(&self, k: usize) -> f64 {
        self.demand_mean[k]
    }

    pub fn demand_sd(&self, k: usize) -> f64 {
        self.demand_sd[k]
    }

    pub fn raw_cost(&self, s: usize) -> f64 {
        self.raw_cost[s]
    }

    pub fn supplier_capacity(&self, s: usize) -> f64 {
        self.supplier_capacity[s]
    }

    pub fn supplier_avail_prob(&self, s: usize) -> f64 {
        self.supplier_avail_prob[s]
    }

    pub fn supplier_strain(&self, s: usize) -> &Pmf {
        &self.supplier_strain[s]
    }

    pub fn production_cost(&self, p: usize) -> f64 {
        self.production_cost[p]
    }

    pub fn fixed_cost(&self, p: usize) -> f64 {
        self.fixed_cost[p]
    }

    pub fn plant_capacity(&self, p: usize) -> f64 {
        self.plant_capacity[p]
    }

    pub fn plant_avail_prob(&self, p: usize) -> f64 {
        self.plant_avail_prob[p]
    }

    pub fn plant_strain(&self, p: usize) -> &Pmf {
        &self.plant_strain[p]
    }

    pub fn transport1(&self, s: usize, p: usize) -> f64 {
        self.transport1[s][p]
    }

    pub fn transport2(&self, p: usize, k: usize) -> f64 {
        self.transport2[p][k]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ban_threshold(&self) -> f64 {
        self.ban_threshold
    }

    /// Whether the raw-material arc from supplier `s` to plant `p` is an
    /// alliance arc through c1 (the set Ṙ). Self-arcs never are.
    pub fn is_ally_supply_arc(&self, s: usize, p: usize) -> bool {
        let (i, j) = (self.suppliers[s], self.plants[p]);
        i != j
            && ((j == self.interest && self.is_ally[i]) || (i == self.interest && self.is_ally[j]))
    }

    /// Whether the distribution arc from plant `p` to country `k` is an
    /// alliance arc through c1 (the set Ṗ).
    pub fn is_ally_distribution_arc(&self, p: usize, k: usize) -> bool {
        let j = self.plants[p];
        j != k
            && ((k == self.interest && self.is_ally[j]) || (j == self.interest && self.is_ally[k]))
    }

    /// The arc set R: every supplier/plant pair in different countries.
    pub fn supply_arcs(&self) -> Vec<(CountryId, CountryId)> {
        let mut arcs = Vec::new();
        for (s, &i) in self.suppliers.iter().enumerate() {
            for (p, &j) in self.plants.iter().enumerate() {
                let _ = (s, p);
                if i != j {
                    arcs.push((self.countries[i].clone(), self.countries[j].clone()));
                }
            }
        }
        arcs
    }

    /// The arc set Ṙ ⊆ R.
    pub fn ally_supply_arcs(&self) -> Vec<(CountryId, CountryId)> {
        let mut arcs = Vec::new();
        for s in 0..self.suppliers.len() {
            for p in 0..self.plants.len() {
                if self.is_ally_supply_arc(s, p) {
                    arcs.push((
                        self.countries[self.suppliers[s]].clone(),
                        self.countries[self.plants[p]].clone(),
                    ));
                }
            }
        }
        arcs
    }

    /// The arc set P: every plant/country pair in different countries.
    pub fn distribution_arcs(&self) -> Vec<(CountryId, CountryId)> {
        let mut arcs = Vec::new();
        for &j in &self.plants {
            for k in 0..self.countries.len() {
                if j != k {
                    arcs.push((self.countries[j].clone(), self.countries[k].clone()));
                }
            }
        }
        arcs
    }

    /// The arc set Ṗ ⊆ P.
    pub fn ally_distribution_arcs(&self) -> Vec<(CountryId, CountryId)> {
        let mut arcs = Vec::new();
        for p in 0..self.plants.len() {
            for k in 0..self.countries.len() {
                if self.is_ally_distribution_arc(p, k) {
                    arcs.push((
                        self.countries[self.plants[p]].clone(),
                        self.countries[k].clone(),
                    ));
                }
            }
        }
        arcs
    }

    /// Index of the plant candidate located in c1, if any.
    pub fn interest_plant(&self) -> Option<usize> {
        self.plant_pos[self.interest]
    }
}
