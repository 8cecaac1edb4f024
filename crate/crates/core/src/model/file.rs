//! JSON instance format.
//!
//! The canonical form is what [`write_instance`] emits: lists sorted by
//! country id, maps in key order, shortest round-trip float formatting,
//! two-space indentation and a trailing newline.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CountryId, IncomeLevel, Instance, Pmf};
use crate::error::{Error, Result};

type Map<V> = BTreeMap<CountryId, V>;

/// Serialized form of an [`Instance`]. Field names match the JSON keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub countries: Vec<CountryId>,
    pub suppliers: Vec<CountryId>,
    pub plant_candidates: Vec<CountryId>,
    pub interest_country: CountryId,
    pub allies: Vec<CountryId>,
    pub income_level: Map<IncomeLevel>,
    pub raw_cost: Map<f64>,
    pub production_cost: Map<f64>,
    pub fixed_cost: Map<f64>,
    pub transport1: Map<Map<f64>>,
    pub transport2: Map<Map<f64>>,
    pub shortage_price: Map<f64>,
    pub supplier_capacity: Map<f64>,
    pub plant_capacity: Map<f64>,
    pub exports_general: Map<f64>,
    pub exports_to_c1: Map<f64>,
    pub beta: f64,
    pub ban_threshold: f64,
    pub export_prob: Map<f64>,
    pub ally_export_prob: Map<f64>,
    pub demand_mean: Map<f64>,
    pub demand_sd: Map<f64>,
    pub supplier_avail_prob: Map<f64>,
    pub plant_avail_prob: Map<f64>,
    pub supplier_strain_pmf: Map<Pmf>,
    pub plant_strain_pmf: Map<Pmf>,
}

/// Read and validate an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text, &path.display().to_string())
}

/// Parse and validate instance JSON; `what` labels parse diagnostics.
pub fn parse_instance(text: &str, what: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::json(what, e))?;
    Instance::from_file(file)
}

/// Write the canonical JSON form of `instance`.
pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, instance.to_json()).map_err(|e| Error::io(path, e))
}

fn check_set(
    field: &str,
    ids: &[CountryId],
    universe: &BTreeSet<&CountryId>,
) -> Result<Vec<CountryId>> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !universe.contains(id) {
            return Err(Error::invalid(
                field,
                format!("contains `{id}` which is not a country"),
            ));
        }
        if !seen.insert(id) {
            return Err(Error::invalid(field, format!("lists `{id}` twice")));
        }
    }
    Ok(seen.into_iter().cloned().collect())
}

fn check_keys<V>(field: &str, map: &Map<V>, expected: &[CountryId]) -> Result<()> {
    for id in expected {
        if !map.contains_key(id) {
            return Err(Error::invalid(field, format!("missing entry for `{id}`")));
        }
    }
    if map.len() != expected.len() {
        let extra = map
            .keys()
            .find(|k| expected.binary_search(k).is_err())
            .expect("length mismatch implies an extra key");
        return Err(Error::invalid(
            field,
            format!("has unexpected key `{extra}`"),
        ));
    }
    Ok(())
}

fn nonneg(field: &str, key: &CountryId, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and >= 0 (`{key}` = {v})"),
        ))
    }
}

fn prob(field: &str, key: &CountryId, v: f64) -> Result<f64> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::invalid(
            field,
            format!("out of [0,1] (`{key}` = {v})"),
        ))
    }
}

fn values(
    field: &str,
    map: &Map<f64>,
    order: &[CountryId],
    check: fn(&str, &CountryId, f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    check_keys(field, map, order)?;
    order.iter().map(|k| check(field, k, map[k])).collect()
}

impl Instance {
    /// Validate a parsed file and build the indexed representation.
    pub fn from_file(file: InstanceFile) -> Result<Instance> {
        let mut countries = file.countries.clone();
        for id in &countries {
            if id.0.is_empty() {
                return Err(Error::invalid("countries", "contains an empty id"));
            }
        }
        countries.sort();
        if let Some(w) = countries.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(
                "countries",
                format!("lists `{}` twice", w[0]),
            ));
        }
        if countries.is_empty() {
            return Err(Error::invalid("countries", "is empty"));
        }
        let universe: BTreeSet<&CountryId> = countries.iter().collect();
        let suppliers = check_set("suppliers", &file.suppliers, &universe)?;
        let plants = check_set("plant_candidates", &file.plant_candidates, &universe)?;
        let allies = check_set("allies", &file.allies, &universe)?;
        if suppliers.is_empty() {
            return Err(Error::invalid("suppliers", "is empty"));
        }
        if plants.is_empty() {
            return Err(Error::invalid("plant_candidates", "is empty"));
        }
        if !universe.contains(&file.interest_country) {
            return Err(Error::invalid(
                "interest_country",
                format!("`{}` is not a country", file.interest_country),
            ));
        }
        if allies.contains(&file.interest_country) {
            return Err(Error::invalid(
                "allies",
                "must not contain the interest country",
            ));
        }

        let idx = |id: &CountryId| countries.binary_search(id).expect("validated membership");
        let interest = idx(&file.interest_country);
        let mut alliance = allies.clone();
        alliance.push(file.interest_country.clone());
        alliance.sort();

        check_keys("income_level", &file.income_level, &countries)?;
        let income = countries.iter().map(|k| file.income_level[k]).collect();

        let shortage_price = values("shortage_price", &file.shortage_price, &countries, nonneg)?;
        let exports_general = values("exports_general", &file.exports_general, &countries, nonneg)?;
        let exports_to_c1 = values("exports_to_c1", &file.exports_to_c1, &countries, nonneg)?;
        let export_prob = values("export_prob", &file.export_prob, &countries, prob)?;
        let demand_mean = values("demand_mean", &file.demand_mean, &countries, nonneg)?;
        let demand_sd = values("demand_sd", &file.demand_sd, &countries, nonneg)?;

        check_keys("ally_export_prob", &file.ally_export_prob, &alliance)?;
        let mut ally_export_prob = vec![1.0; countries.len()];
        for k in &alliance {
            ally_export_prob[idx(k)] = prob("ally_export_prob", k, file.ally_export_prob[k])?;
        }

        let raw_cost = values("raw_cost", &file.raw_cost, &suppliers, nonneg)?;
        let supplier_capacity = values(
            "supplier_capacity",
            &file.supplier_capacity,
            &suppliers,
            nonneg,
        )?;
        let supplier_avail_prob = values(
            "supplier_avail_prob",
            &file.supplier_avail_prob,
            &suppliers,
            prob,
        )?;
        check_keys("supplier_strain_pmf", &file.supplier_strain_pmf, &suppliers)?;
        let supplier_strain = suppliers
            .iter()
            .map(|k| {
                let pmf = &file.supplier_strain_pmf[k];
                pmf.check("supplier_strain_pmf", k).map(|_| pmf.clone())
            })
            .collect::<Result<Vec<_>>>()?;

        let production_cost = values("production_cost", &file.production_cost, &plants, nonneg)?;
        let fixed_cost = values("fixed_cost", &file.fixed_cost, &plants, nonneg)?;
        let plant_capacity = values("plant_capacity", &file.plant_capacity, &plants, nonneg)?;
        let plant_avail_prob = values("plant_avail_prob", &file.plant_avail_prob, &plants, prob)?;
        check_keys("plant_strain_pmf", &file.plant_strain_pmf, &plants)?;
        let plant_strain = plants
            .iter()
            .map(|k| {
                let pmf = &file.plant_strain_pmf[k];
                pmf.check("plant_strain_pmf", k).map(|_| pmf.clone())
            })
            .collect::<Result<Vec<_>>>()?;

        check_keys("transport1", &file.transport1, &suppliers)?;
        let mut transport1 = Vec::with_capacity(suppliers.len());
        for i in &suppliers {
            let row = &file.transport1[i];
            let field = format!("transport1[{i}]");
            check_keys(&field, row, &plants)?;
            let mut out = Vec::with_capacity(plants.len());
            for j in &plants {
                let v = nonneg(&field, j, row[j])?;
                if i == j && v != 0.0 {
                    return Err(Error::invalid(
                        "transport1",
                        format!("must be 0 on the diagonal (`{i}` -> `{j}` = {v})"),
                    ));
                }
                out.push(v);
            }
            transport1.push(out);
        }
        check_keys("transport2", &file.transport2, &plants)?;
        let mut transport2 = Vec::with_capacity(plants.len());
        for j in &plants {
            let field = format!("transport2[{j}]");
            transport2.push(values(&field, &file.transport2[j], &countries, nonneg)?);
        }

        if !(file.beta.is_finite() && file.beta >= 0.0) {
            return Err(Error::invalid(
                "beta",
                format!("must be finite and >= 0 ({})", file.beta),
            ));
        }
        if !(file.ban_threshold.is_finite() && (0.0..=1.0).contains(&file.ban_threshold)) {
            return Err(Error::invalid(
                "ban_threshold",
                format!("out of [0,1] ({})", file.ban_threshold),
            ));
        }

        let n = countries.len();
        let suppliers: Vec<usize> = suppliers.iter().map(idx).collect();
        let plants: Vec<usize> = plants.iter().map(idx).collect();
        let allies: Vec<usize> = allies.iter().map(idx).collect();
        let mut supplier_pos = vec![None; n];
        for (s, &k) in suppliers.iter().enumerate() {
            supplier_pos[k] = Some(s);
        }
        let mut plant_pos = vec![None; n];
        for (p, &k) in plants.iter().enumerate() {
            plant_pos[k] = Some(p);
        }
        let mut is_ally = vec![false; n];
        for &k in &allies {
            is_ally[k] = true;
        }

        Ok(Instance {
            countries,
            suppliers,
            plants,
            interest,
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
            supplier_avail_prob,
            supplier_strain,
            production_cost,
            fixed_cost,
            plant_capacity,
            plant_avail_prob,
            plant_strain,
            transport1,
            transport2,
            beta: file.beta,
            ban_threshold: file.ban_threshold,
            supplier_pos,
            plant_pos,
            is_ally,
        })
    }

    /// Re-check every invariant; used after in-crate perturbations.
    pub(crate) fn revalidate(self) -> Result<Instance> {
        Instance::from_file(self.to_file())
    }

    pub fn to_file(&self) -> InstanceFile {
        let id = |k: usize| self.countries[k].clone();
        let per_country = |v: &[f64]| -> Map<f64> {
            self.countries
                .iter()
                .cloned()
                .zip(v.iter().copied())
                .collect()
        };
        let per = |ix: &[usize], v: &[f64]| -> Map<f64> {
            ix.iter().map(|&k| id(k)).zip(v.iter().copied()).collect()
        };
        let mut ally_export_prob: Map<f64> = self
            .allies
            .iter()
            .map(|&k| (id(k), self.ally_export_prob[k]))
            .collect();
        ally_export_prob.insert(id(self.interest), self.ally_export_prob[self.interest]);

        InstanceFile {
            countries: self.countries.clone(),
            suppliers: self.suppliers.iter().map(|&k| id(k)).collect(),
            plant_candidates: self.plants.iter().map(|&k| id(k)).collect(),
            interest_country: id(self.interest),
            allies: self.allies.iter().map(|&k| id(k)).collect(),
            income_level: self
                .countries
                .iter()
                .cloned()
                .zip(self.income.iter().copied())
                .collect(),
            raw_cost: per(&self.suppliers, &self.raw_cost),
            production_cost: per(&self.plants, &self.production_cost),
            fixed_cost: per(&self.plants, &self.fixed_cost),
            transport1: self
                .suppliers
                .iter()
                .zip(&self.transport1)
                .map(|(&i, row)| (id(i), per(&self.plants, row)))
                .collect(),
            transport2: self
                .plants
                .iter()
                .zip(&self.transport2)
                .map(|(&j, row)| (id(j), per_country(row)))
                .collect(),
            shortage_price: per_country(&self.shortage_price),
            supplier_capacity: per(&self.suppliers, &self.supplier_capacity),
            plant_capacity: per(&self.plants, &self.plant_capacity),
            exports_general: per_country(&self.exports_general),
            exports_to_c1: per_country(&self.exports_to_c1),
            beta: self.beta,
            ban_threshold: self.ban_threshold,
            export_prob: per_country(&self.export_prob),
            ally_export_prob,
            demand_mean: per_country(&self.demand_mean),
            demand_sd: per_country(&self.demand_sd),
            supplier_avail_prob: per(&self.suppliers, &self.supplier_avail_prob),
            plant_avail_prob: per(&self.plants, &self.plant_avail_prob),
            supplier_strain_pmf: self
                .suppliers
                .iter()
                .zip(&self.supplier_strain)
                .map(|(&i, p)| (id(i), p.clone()))
                .collect(),
            plant_strain_pmf: self
                .plants
                .iter()
                .zip(&self.plant_strain)
                .map(|(&j, p)| (id(j), p.clone()))
                .collect(),
        }
    }

    /// Canonical JSON text.
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.to_file()).expect("instance serializes to JSON");
        text.push('\n');
        text
    }
}
