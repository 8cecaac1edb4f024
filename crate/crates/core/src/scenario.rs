//! Scenario sampling, retained exports and price escalation.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::rng;

/// One realization of the random parameters. Vectors follow instance order:
/// `supplier_avail` per supplier, `plant_avail` per plant, the rest per
/// country. `ban_ally[k]` is only meaningful for k ∈ F ∪ {c1} and is 1
/// (`true`) elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub supplier_avail: Vec<f64>,
    pub plant_avail: Vec<f64>,
    pub demand: Vec<f64>,
    /// ξ^g; `true` means exports allowed.
    pub ban_general: Vec<bool>,
    /// ξ^ġ; `true` means exports to allies allowed.
    pub ban_ally: Vec<bool>,
    pub retained_exports: f64,
    pub price_increase: f64,
    pub probability: f64,
}

/// Adjustments to the risk parameters applied at sampling time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskOverrides {
    /// ρ_k := 1 for every country.
    pub force_rho_one: bool,
    /// ρ_k := min(1, scale · ρ_k).
    pub rho_scale: f64,
    /// Replacement for the instance's r̃.
    pub ban_threshold: Option<f64>,
    /// ξ^ġ := ξ^g.
    pub alliances_off: bool,
}

impl Default for RiskOverrides {
    fn default() -> Self {
        RiskOverrides {
            force_rho_one: false,
            rho_scale: 1.0,
            ban_threshold: None,
            alliances_off: false,
        }
    }
}

impl RiskOverrides {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_scale.is_finite() && self.rho_scale >= 0.0) {
            return Err(Error::Config(format!(
                "rho_scale must be >= 0, got {}",
                self.rho_scale
            )));
        }
        if let Some(t) = self.ban_threshold {
            if !(t.is_finite() && (0.0..=1.0).contains(&t)) {
                return Err(Error::Config(format!("ban_threshold out of [0,1]: {t}")));
            }
        }
        Ok(())
    }

    /// Effective probability that country `k` allows exports.
    pub fn export_prob(&self, instance: &Instance, k: usize) -> f64 {
        if self.force_rho_one {
            1.0
        } else {
            (instance.export_prob(k) * self.rho_scale).min(1.0)
        }
    }

    pub fn ban_threshold(&self, instance: &Instance) -> f64 {
        self.ban_threshold.unwrap_or(instance.ban_threshold())
    }
}

/// G: exogenous exports kept at home by the bans in force.
pub fn retained_exports(instance: &Instance, ban_general: &[bool], ban_ally: &[bool]) -> f64 {
    let mut g = 0.0;
    for k in 0..instance.num_countries() {
        let closed = !ban_general[k];
        if closed {
            g += instance.exports_general(k);
        }
        let closed_to_c1 = if instance.in_alliance(k) {
            !ban_ally[k]
        } else {
            closed
        };
        if closed_to_c1 {
            g += instance.exports_to_c1(k);
        }
    }
    g
}

/// c^o = β·G.
pub fn price_increase(instance: &Instance, retained: f64) -> f64 {
    instance.beta() * retained
}

fn bernoulli(r: &mut impl Rng, p: f64) -> bool {
    r.random::<f64>() < p
}

/// Draw one scenario with default risk parameters.
pub fn sample_scenario(instance: &Instance, r: &mut impl Rng) -> Scenario {
    sample_scenario_with(instance, &RiskOverrides::default(), r)
}

/// Draw one scenario. The sequence is: supplier capacities, plant
/// capacities, demand, then export-ban flags if the average supplier
/// availability falls below the threshold. Ban uniforms are drawn for every
/// country whether or not the gate opens, so arms that differ only in risk
/// overrides see the same capacity and demand draws and coupled ban draws.
pub fn sample_scenario_with(
    instance: &Instance,
    overrides: &RiskOverrides,
    r: &mut impl Rng,
) -> Scenario {
    let ni = instance.num_suppliers();
    let nj = instance.num_plants();
    let nk = instance.num_countries();

    let supplier_avail: Vec<f64> = (0..ni)
        .map(|s| {
            let strain = instance.supplier_strain(s).quantile(r.random());
            let up = bernoulli(r, instance.supplier_avail_prob(s));
            if up {
                strain
            } else {
                0.0
            }
        })
        .collect();
    let plant_avail: Vec<f64> = (0..nj)
        .map(|p| {
            let strain = instance.plant_strain(p).quantile(r.random());
            let up = bernoulli(r, instance.plant_avail_prob(p));
            if up {
                strain
            } else {
                0.0
            }
        })
        .collect();
    let demand: Vec<f64> = (0..nk)
        .map(|k| {
            let normal = Normal::new(instance.demand_mean(k), instance.demand_sd(k))
                .expect("validated demand parameters");
            normal.sample(r).max(0.0)
        })
        .collect();

    let u_general: Vec<f64> = (0..nk).map(|_| r.random()).collect();
    let u_ally: Vec<f64> = (0..nk).map(|_| r.random()).collect();

    let mean_avail = supplier_avail.iter().sum::<f64>() / ni as f64;
    let mut ban_general = vec![true; nk];
    let mut ban_ally = vec![true; nk];
    if mean_avail < overrides.ban_threshold(instance) {
        let no_allies = instance.allies().is_empty();
        for k in 0..nk {
            ban_general[k] = u_general[k] < overrides.export_prob(instance, k);
            if instance.in_alliance(k) && !ban_general[k] {
                ban_ally[k] = if overrides.alliances_off || no_allies {
                    false
                } else {
                    u_ally[k] < instance.ally_export_prob(k)
                };
            }
        }
    }

    let retained = retained_exports(instance, &ban_general, &ban_ally);
    Scenario {
        supplier_avail,
        plant_avail,
        demand,
        ban_general,
        ban_ally,
        retained_exports: retained,
        price_increase: price_increase(instance, retained),
        probability: 1.0,
    }
}

/// `n` scenarios of weight 1/n; scenario `w` draws from its own stream keyed
/// by `(seed, w)`.
pub fn sample_batch(
    instance: &Instance,
    seed: u64,
    n: usize,
    overrides: &RiskOverrides,
) -> Vec<Scenario> {
    (0..n)
        .map(|w| {
            let mut r = rng::stream(seed, &[w as u64]);
            let mut s = sample_scenario_with(instance, overrides, &mut r);
            s.probability = 1.0 / n as f64;
            s
        })
        .collect()
}

impl Scenario {
    /// A scenario with full capacity, mean demand and no bans.
    pub fn nominal(instance: &Instance) -> Scenario {
        let nk = instance.num_countries();
        Scenario {
            supplier_avail: vec![1.0; instance.num_suppliers()],
            plant_avail: vec![1.0; instance.num_plants()],
            demand: (0..nk).map(|k| instance.demand_mean(k)).collect(),
            ban_general: vec![true; nk],
            ban_ally: vec![true; nk],
            retained_exports: 0.0,
            price_increase: 0.0,
            probability: 1.0,
        }
    }

    /// Recompute G and c^o from the flags.
    pub fn refresh(&mut self, instance: &Instance) {
        self.retained_exports = retained_exports(instance, &self.ban_general, &self.ban_ally);
        self.price_increase = price_increase(instance, self.retained_exports);
    }

    /// Dimension and range checks against `instance`.
    pub fn check(&self, instance: &Instance) -> Result<()> {
        let nk = instance.num_countries();
        let bad = |what: &str| {
            Err(Error::Config(format!(
                "scenario inconsistent with instance: {what}"
            )))
        };
        if self.supplier_avail.len() != instance.num_suppliers()
            || self.plant_avail.len() != instance.num_plants()
            || self.demand.len() != nk
            || self.ban_general.len() != nk
            || self.ban_ally.len() != nk
        {
            return bad("dimension mismatch");
        }
        let frac = |v: &f64| v.is_finite() && (0.0..=1.0).contains(v);
        if !self.supplier_avail.iter().all(frac) || !self.plant_avail.iter().all(frac) {
            return bad("availability outside [0,1]");
        }
        if !self.demand.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return bad("negative or non-finite demand");
        }
        for k in 0..nk {
            if self.ban_general[k] && !self.ban_ally[k] {
                return bad("exports allowed to non-allies but not to allies");
            }
        }
        if !(self.price_increase.is_finite() && self.price_increase >= 0.0) {
            return bad("price increase");
        }
        Ok(())
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn header(instance: &Instance) -> Vec<String> {
    let mut h = vec!["scenario".to_string(), "probability".to_string()];
    h.extend(
        instance
            .suppliers()
            .iter()
            .map(|&k| format!("sc:{}", instance.country_id(k))),
    );
    h.extend(
        instance
            .plants()
            .iter()
            .map(|&k| format!("pc:{}", instance.country_id(k))),
    );
    h.extend(instance.countries().iter().map(|k| format!("d:{k}")));
    h.extend(instance.countries().iter().map(|k| format!("g:{k}")));
    h.extend(
        (0..instance.num_countries())
            .filter(|&k| instance.in_alliance(k))
            .map(|k| format!("gdot:{}", instance.country_id(k))),
    );
    h.push("G".to_string());
    h.push("c_o".to_string());
    h
}

/// Write one CSV row per scenario with every ξ component, G and c^o.
pub fn write_scenarios_csv(instance: &Instance, scenarios: &[Scenario], path: &Path) -> Result<()> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header(instance)).map_err(csv_err)?;
    for (n, s) in scenarios.iter().enumerate() {
        let mut row = vec![n.to_string(), s.probability.to_string()];
        row.extend(s.supplier_avail.iter().map(f64::to_string));
        row.extend(s.plant_avail.iter().map(f64::to_string));
        row.extend(s.demand.iter().map(f64::to_string));
        row.extend(s.ban_general.iter().map(|&b| flag(b).to_string()));
        row.extend(
            (0..instance.num_countries())
                .filter(|&k| instance.in_alliance(k))
                .map(|k| flag(s.ban_ally[k]).to_string()),
        );
        row.push(s.retained_exports.to_string());
        row.push(s.price_increase.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a file produced by [`write_scenarios_csv`] for the same instance.
pub fn read_scenarios_csv(instance: &Instance, path: &Path) -> Result<Vec<Scenario>> {
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let expected = header(instance);
    let got: Vec<String> = rd
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if got != expected {
        return Err(Error::Config(format!(
            "{}: scenario columns do not match the instance",
            path.display()
        )));
    }
    let ni = instance.num_suppliers();
    let nj = instance.num_plants();
    let nk = instance.num_countries();
    let alliance: Vec<usize> = (0..nk).filter(|&k| instance.in_alliance(k)).collect();
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse_err = |col: usize, msg: String| Error::Parse {
            what: path.display().to_string(),
            line: line + 2,
            column: col + 1,
            message: msg,
        };
        let num = |col: usize| -> Result<f64> {
            rec[col]
                .parse::<f64>()
                .map_err(|e| parse_err(col, format!("`{}`: {e}", &rec[col])))
        };
        let bit = |col: usize| -> Result<bool> {
            match &rec[col] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_err(col, format!("expected 0 or 1, got `{other}`"))),
            }
        };
        let mut col = 1;
        let probability = num(col)?;
        col += 1;
        let supplier_avail = (col..col + ni).map(num).collect::<Result<Vec<_>>>()?;
        col += ni;
        let plant_avail = (col..col + nj).map(num).collect::<Result<Vec<_>>>()?;
        col += nj;
        let demand = (col..col + nk).map(num).collect::<Result<Vec<_>>>()?;
        col += nk;
        let ban_general = (col..col + nk).map(bit).collect::<Result<Vec<_>>>()?;
        col += nk;
        let mut ban_ally = vec![true; nk];
        for &k in &alliance {
            ban_ally[k] = bit(col)?;
            col += 1;
        }
        let retained_exports = num(col)?;
        let price_increase = num(col + 1)?;
        let s = Scenario {
            supplier_avail,
            plant_avail,
            demand,
            ban_general,
            ban_ally,
            retained_exports,
            price_increase,
            probability,
        };
        s.check(instance)?;
        out.push(s);
    }
    Ok(out)
}
