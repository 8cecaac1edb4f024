//! Run artifacts and their files: `report.json`, `shortage_by_country.csv`,
//! `shortage_by_income.csv`, `flows.csv`, `bounds.csv`.
//!
//! Wall-clock timings are kept out of the artifact and written to
//! `timings.json`, so `report.json` depends only on the inputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CountryId, Design, IncomeLevel, Instance};
use crate::saa::{CostBreakdown, Evaluation, SaaConfig, SaaReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountryRow {
    pub country: CountryId,
    pub income_level: IncomeLevel,
    pub ally: bool,
    pub plant_open: bool,
    pub expected_demand: f64,
    pub expected_shortage: f64,
    pub shortage_fraction: f64,
}

/// One income class (or `ALL`). `demand_weighted` is ΣE[S]/ΣE[ξ^d] over
/// the class; `country_average` is the plain mean of country fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncomeRow {
    pub income_level: String,
    pub countries: usize,
    pub expected_demand: f64,
    pub expected_shortage: f64,
    pub demand_weighted: f64,
    pub country_average: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    /// `raw` (supplier to plant) or `drug` (plant to country)
    pub stage: String,
    pub from: CountryId,
    pub to: CountryId,
    pub expected_flow: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: SaaConfig,
    pub report: SaaReport,
    pub countries: Vec<CountryRow>,
    pub income: Vec<IncomeRow>,
    pub flows: Vec<FlowRow>,
    pub breakdown: CostBreakdown,
    pub global_shortage_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub threads: usize,
}

fn fraction(short: f64, demand: f64) -> f64 {
    if demand > 0.0 {
        short / demand
    } else {
        0.0
    }
}

pub fn country_rows(instance: &Instance, design: &Design, eval: &Evaluation) -> Vec<CountryRow> {
    (0..instance.num_countries())
        .map(|k| {
            let id = instance.country_id(k);
            CountryRow {
                country: id.clone(),
                income_level: instance.income(k),
                ally: instance.is_ally(k),
                plant_open: design.is_open(id.as_str()),
                expected_demand: eval.expected_demand[k],
                expected_shortage: eval.expected_shortage[k],
                shortage_fraction: fraction(eval.expected_shortage[k], eval.expected_demand[k]),
            }
        })
        .collect()
}

/// One row per income class present, in HIC, UMIC, LMIC, LIC order, then `ALL`.
pub fn income_rows(countries: &[CountryRow]) -> Vec<IncomeRow> {
    let row = |label: &str, members: Vec<&CountryRow>| {
        let demand: f64 = members.iter().map(|c| c.expected_demand).sum();
        let short: f64 = members.iter().map(|c| c.expected_shortage).sum();
        let avg = members.iter().map(|c| c.shortage_fraction).sum::<f64>() / members.len() as f64;
        IncomeRow {
            income_level: label.to_string(),
            countries: members.len(),
            expected_demand: demand,
            expected_shortage: short,
            demand_weighted: fraction(short, demand),
            country_average: avg,
        }
    };
    let mut out = Vec::new();
    for level in IncomeLevel::ALL {
        let members: Vec<&CountryRow> = countries
            .iter()
            .filter(|c| c.income_level == level)
            .collect();
        if !members.is_empty() {
            out.push(row(level.code(), members));
        }
    }
    if !countries.is_empty() {
        out.push(row("ALL", countries.iter().collect()));
    }
    out
}

pub fn flow_rows(instance: &Instance, eval: &Evaluation) -> Vec<FlowRow> {
    let mut out = Vec::new();
    for s in 0..instance.num_suppliers() {
        for p in 0..instance.num_plants() {
            out.push(FlowRow {
                stage: "raw".into(),
                from: instance.supplier_id(s).clone(),
                to: instance.plant_id(p).clone(),
                expected_flow: eval.expected_raw_flow[s][p],
            });
        }
    }
    for p in 0..instance.num_plants() {
        for k in 0..instance.num_countries() {
            out.push(FlowRow {
                stage: "drug".into(),
                from: instance.plant_id(p).clone(),
                to: instance.country_id(k).clone(),
                expected_flow: eval.expected_drug_flow[p][k],
            });
        }
    }
    out
}

impl RunArtifact {
    pub fn new(instance: &Instance, config: &SaaConfig, report: SaaReport) -> RunArtifact {
        let countries = country_rows(instance, &report.incumbent, &report.evaluation);
        let income = income_rows(&countries);
        let global = income.last().map_or(0.0, |r| r.demand_weighted);
        RunArtifact {
            config: config.clone(),
            flows: flow_rows(instance, &report.evaluation),
            breakdown: report.evaluation.breakdown.clone(),
            countries,
            income,
            global_shortage_fraction: global,
            report,
        }
    }

    /// Every number in the artifact, for the finiteness check.
    fn numbers(&self) -> Vec<(&'static str, f64)> {
        let r = &self.report;
        let e = &r.evaluation;
        let mut v = vec![
            ("zbar", r.zbar),
            ("zbar_std_error", r.zbar_std_error),
            ("t_value", r.t_value),
            ("z_value", r.z_value),
            ("lower_bound", r.lower_bound),
            ("upper_bound", r.upper_bound),
            ("gap", r.gap),
            ("eval_objective", r.eval_objective),
            ("eval_std_error", r.eval_std_error),
            ("sales", e.sales),
            ("mean_objective", e.mean_objective),
            ("global_shortage_fraction", self.global_shortage_fraction),
        ];
        let b = &self.breakdown;
        v.extend([
            ("breakdown", b.fixed),
            ("breakdown", b.supply),
            ("breakdown", b.production),
            ("breakdown", b.shortage),
            ("breakdown", b.escalation),
        ]);
        v.extend(
            r.replication_objectives
                .iter()
                .map(|&x| ("replication_objectives", x)),
        );
        v.extend(
            r.candidate_eval_objectives
                .iter()
                .map(|&x| ("candidate_eval_objectives", x)),
        );
        v.extend(e.expected_demand.iter().map(|&x| ("expected_demand", x)));
        v.extend(
            e.expected_shortage
                .iter()
                .map(|&x| ("expected_shortage", x)),
        );
        v.extend(
            e.expected_raw_flow
                .iter()
                .flatten()
                .map(|&x| ("expected_raw_flow", x)),
        );
        v.extend(
            e.expected_drug_flow
                .iter()
                .flatten()
                .map(|&x| ("expected_drug_flow", x)),
        );
        for c in &self.countries {
            v.extend([
                ("country", c.expected_demand),
                ("country", c.expected_shortage),
                ("country", c.shortage_fraction),
            ]);
        }
        for i in &self.income {
            v.extend([
                ("income", i.expected_demand),
                ("income", i.expected_shortage),
                ("income", i.demand_weighted),
                ("income", i.country_average),
            ]);
        }
        v.extend(self.flows.iter().map(|f| ("flows", f.expected_flow)));
        v
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.numbers().into_iter().find(|(_, x)| !x.is_finite()) {
            Some((field, _)) => Err(Error::NonFinite(format!("report field `{field}`"))),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| Error::NonFinite(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<RunArtifact> {
        serde_json::from_str(text).map_err(|e| Error::json("report.json", e))
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct BoundRow<'a> {
    quantity: &'a str,
    replication: Option<usize>,
    value: f64,
}

pub fn write_report(artifact: &RunArtifact, dir: &Path) -> Result<()> {
    let json = artifact.to_json()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join("report.json");
    fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
    write_csv(&dir.join("shortage_by_country.csv"), &artifact.countries)?;
    write_csv(&dir.join("shortage_by_income.csv"), &artifact.income)?;
    write_csv(&dir.join("flows.csv"), &artifact.flows)?;
    let r = &artifact.report;
    let mut bounds = vec![
        BoundRow {
            quantity: "lower_bound",
            replication: None,
            value: r.lower_bound,
        },
        BoundRow {
            quantity: "upper_bound",
            replication: None,
            value: r.upper_bound,
        },
        BoundRow {
            quantity: "gap",
            replication: None,
            value: r.gap,
        },
    ];
    for (m, &z) in r.replication_objectives.iter().enumerate() {
        bounds.push(BoundRow {
            quantity: "replication_objective",
            replication: Some(m + 1),
            value: z,
        });
    }
    write_csv(&dir.join("bounds.csv"), &bounds)
}

pub fn write_timings(timings: &Timings, dir: &Path) -> Result<()> {
    let p = dir.join("timings.json");
    let text =
        serde_json::to_string_pretty(timings).map_err(|e| Error::NonFinite(e.to_string()))?;
    fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
}

pub fn read_report(dir: &Path) -> Result<RunArtifact> {
    let p = dir.join("report.json");
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    RunArtifact::from_json(&text)
}
