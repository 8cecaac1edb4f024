//! Experiment families run as multi-arm studies over one instance.
//!
//! Every arm reuses the template's base seed, so arms see common random
//! numbers and their differences reflect the policy rather than sampling.
//! Arms work on private copies of the instance.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CountryId, Design, IncomeLevel, Instance};
use crate::report::{country_rows, income_rows, IncomeRow};
use crate::saa::{run_saa, SaaConfig, SaaReport};
use crate::scenario::RiskOverrides;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum PricingScheme {
    /// Every country pays c1's price.
    UniformToC1Price,
    /// LMIC and LIC prices raised by `percent`.
    LiftLmicLic { percent: f64 },
}

impl PricingScheme {
    pub fn label(&self) -> String {
        match self {
            PricingScheme::UniformToC1Price => "uniform_to_c1_price".into(),
            PricingScheme::LiftLmicLic { percent } => format!("lift_lmic_lic_{percent}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantQuality {
    Base,
    Moderate,
    High,
}

impl PlantQuality {
    /// Fraction of c1's plant disruption rate that remains.
    pub fn disruption_factor(self) -> f64 {
        match self {
            PlantQuality::Base => 1.0,
            PlantQuality::Moderate => 0.5,
            PlantQuality::High => 0.25,
        }
    }

    fn label(self) -> &'static str {
        match self {
            PlantQuality::Base => "base",
            PlantQuality::Moderate => "moderate",
            PlantQuality::High => "high",
        }
    }
}

fn default_schemes() -> Vec<PricingScheme> {
    vec![
        PricingScheme::UniformToC1Price,
        PricingScheme::LiftLmicLic { percent: 50.0 },
        PricingScheme::LiftLmicLic { percent: 100.0 },
    ]
}

fn default_qualities() -> Vec<PlantQuality> {
    vec![
        PlantQuality::Base,
        PlantQuality::Moderate,
        PlantQuality::High,
    ]
}

fn default_factor() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StudySpec {
    ExportBanCases,
    AlliancesOff,
    Pricing {
        #[serde(default = "default_schemes")]
        schemes: Vec<PricingScheme>,
    },
    Backshoring {
        #[serde(default = "default_qualities")]
        qualities: Vec<PlantQuality>,
    },
    TransportSensitivity {
        #[serde(default = "default_factor")]
        factor: f64,
    },
    RhoSwap {
        pairs: Vec<(CountryId, CountryId)>,
    },
}

impl StudySpec {
    pub fn kind(&self) -> &'static str {
        match self {
            StudySpec::ExportBanCases => "export_ban_cases",
            StudySpec::AlliancesOff => "alliances_off",
            StudySpec::Pricing { .. } => "pricing",
            StudySpec::Backshoring { .. } => "backshoring",
            StudySpec::TransportSensitivity { .. } => "transport_sensitivity",
            StudySpec::RhoSwap { .. } => "rho_swap",
        }
    }
}

pub struct StudyArm {
    pub name: String,
    pub instance: Instance,
    pub config: SaaConfig,
    pub report: SaaReport,
}

pub struct StudyOutcome {
    pub kind: String,
    pub arms: Vec<StudyArm>,
}

/// Metrics about the country of interest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterestMetrics {
    pub shortage_fraction: f64,
    /// Σ_k E[V_{c1,k}] over c1's nominal capacity; absent when c1 is not a candidate.
    pub plant_utilization: Option<f64>,
    /// Share of drug received by c1 that was made in c1.
    pub domestic_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub design: Design,
    pub configs_differ: bool,
    pub zbar: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub eval_objective: f64,
    pub fixed_cost: f64,
    pub shortage_cost: f64,
    pub sales: f64,
    pub global_shortage: f64,
    pub income: Vec<IncomeRow>,
    pub country_shortage: BTreeMap<CountryId, f64>,
    /// eval objective minus the first arm's
    pub delta_objective: f64,
    /// 100 × (fraction − first arm's fraction)
    pub country_shortage_delta_ppt: BTreeMap<CountryId, f64>,
    pub interest: InterestMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub kind: String,
    pub arms: Vec<ArmSummary>,
}

fn interest_metrics(arm: &StudyArm) -> InterestMetrics {
    let inst = &arm.instance;
    let ev = &arm.report.evaluation;
    let c1 = inst.interest_country();
    let frac = |s: f64, d: f64| if d > 0.0 { s / d } else { 0.0 };
    let received: f64 = ev.expected_drug_flow.iter().map(|row| row[c1]).sum();
    let (utilization, domestic) = match inst.interest_plant() {
        Some(p) => {
            let out: f64 = ev.expected_drug_flow[p].iter().sum();
            (
                Some(frac(out, inst.plant_capacity(p))),
                ev.expected_drug_flow[p][c1],
            )
        }
        None => (None, 0.0),
    };
    InterestMetrics {
        shortage_fraction: frac(ev.expected_shortage[c1], ev.expected_demand[c1]),
        plant_utilization: utilization,
        domestic_share: frac(domestic, received),
    }
}

impl StudyOutcome {
    pub fn summary(&self) -> StudySummary {
        let mut arms: Vec<ArmSummary> = Vec::new();
        for arm in &self.arms {
            let r = &arm.report;
            let rows = country_rows(&arm.instance, &r.incumbent, &r.evaluation);
            let country_shortage: BTreeMap<CountryId, f64> = rows
                .iter()
                .map(|c| (c.country.clone(), c.shortage_fraction))
                .collect();
            let income = income_rows(&rows);
            let (delta_objective, deltas) = match arms.first() {
                Some(base) => (
                    r.eval_objective - base.eval_objective,
                    country_shortage
                        .iter()
                        .map(|(k, v)| {
                            (
                                k.clone(),
                                100.0 * (v - base.country_shortage.get(k).copied().unwrap_or(0.0)),
                            )
                        })
                        .collect(),
                ),
                None => (
                    0.0,
                    country_shortage.keys().map(|k| (k.clone(), 0.0)).collect(),
                ),
            };
            let b = &r.evaluation.breakdown;
            arms.push(ArmSummary {
                name: arm.name.clone(),
                design: r.incumbent.clone(),
                configs_differ: r.configs_differ,
                zbar: r.zbar,
                lower_bound: r.lower_bound,
                upper_bound: r.upper_bound,
                gap: r.gap,
                eval_objective: r.eval_objective,
                fixed_cost: b.fixed,
                shortage_cost: b.shortage + b.escalation,
                sales: r.evaluation.sales,
                global_shortage: income.last().map_or(0.0, |i| i.demand_weighted),
                income,
                country_shortage,
                delta_objective,
                country_shortage_delta_ppt: deltas,
                interest: interest_metrics(arm),
            });
        }
        StudySummary {
            kind: self.kind.clone(),
            arms,
        }
    }
}

fn run_arms(kind: &str, arms: Vec<(String, Instance, SaaConfig)>) -> Result<StudyOutcome> {
    let arms = arms
        .into_par_iter()
        .map(|(name, instance, config)| {
            let report = run_saa(&instance, &config)?;
            Ok(StudyArm {
                name,
                instance,
                config,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyOutcome {
        kind: kind.to_string(),
        arms,
    })
}

/// (optimize, evaluate) risk overrides of export-ban case 0–5.
pub fn export_ban_case_overrides(
    case: usize,
    alliances_off: bool,
) -> Result<(RiskOverrides, RiskOverrides)> {
    let base = RiskOverrides {
        alliances_off,
        ..RiskOverrides::default()
    };
    let no_risk = RiskOverrides {
        force_rho_one: true,
        ..base.clone()
    };
    let high = RiskOverrides {
        rho_scale: 0.8,
        ..base.clone()
    };
    Ok(match case {
        0 => (no_risk.clone(), no_risk),
        1 => (base.clone(), base),
        2 => {
            let moderate = RiskOverrides {
                ban_threshold: Some(0.9),
                ..base
            };
            (moderate.clone(), moderate)
        }
        3 => (high.clone(), high),
        4 => (no_risk, base),
        5 => (no_risk, high),
        _ => return Err(Error::Config(format!("unknown export-ban case {case}"))),
    })
}

pub fn run_export_ban_cases(instance: &Instance, template: &SaaConfig) -> Result<StudyOutcome> {
    let arms = (0..6)
        .map(|case| {
            let (optimize, evaluate) =
                export_ban_case_overrides(case, template.optimize.alliances_off)?;
            let config = SaaConfig {
                optimize,
                evaluate,
                ..template.clone()
            };
            Ok((format!("case{case}"), instance.clone(), config))
        })
        .collect::<Result<Vec<_>>>()?;
    run_arms("export_ban_cases", arms)
}

pub fn run_alliances_off(instance: &Instance, template: &SaaConfig) -> Result<StudyOutcome> {
    let mut off = template.clone();
    off.optimize.alliances_off = true;
    off.evaluate.alliances_off = true;
    run_arms(
        "alliances_off",
        vec![
            ("alliances_on".into(), instance.clone(), template.clone()),
            ("alliances_off".into(), instance.clone(), off),
        ],
    )
}

/// Copy of `instance` with shortage prices rewritten by `scheme`.
pub fn apply_pricing(instance: &Instance, scheme: &PricingScheme) -> Result<Instance> {
    let mut out = instance.clone();
    match *scheme {
        PricingScheme::UniformToC1Price => {
            let price = instance.shortage_price(instance.interest_country());
            out.shortage_price.iter_mut().for_each(|c| *c = price);
        }
        PricingScheme::LiftLmicLic { percent } => {
            if !(percent.is_finite() && percent >= -100.0) {
                return Err(Error::Config(format!(
                    "price lift must be >= -100%, got {percent}"
                )));
            }
            for k in 0..out.num_countries() {
                if matches!(out.income(k), IncomeLevel::LowerMiddle | IncomeLevel::Low) {
                    out.shortage_price[k] *= 1.0 + percent / 100.0;
                }
            }
        }
    }
    out.revalidate()
}

pub fn run_pricing(
    instance: &Instance,
    template: &SaaConfig,
    schemes: &[PricingScheme],
) -> Result<StudyOutcome> {
    let mut arms = vec![("base".to_string(), instance.clone(), template.clone())];
    for s in schemes {
        arms.push((s.label(), apply_pricing(instance, s)?, template.clone()));
    }
    run_arms("pricing", arms)
}

/// Copy of `instance` whose c1 plant has its disruption rate scaled by the
/// quality factor and, above base quality, the best plant strain PMF.
pub fn apply_plant_quality(instance: &Instance, quality: PlantQuality) -> Result<Instance> {
    let p = instance
        .interest_plant()
        .ok_or_else(|| Error::Config("the country of interest is not a plant candidate".into()))?;
    let mut out = instance.clone();
    if quality == PlantQuality::Base {
        return Ok(out);
    }
    let f = quality.disruption_factor();
    out.plant_avail_prob[p] = 1.0 - f * (1.0 - instance.plant_avail_prob(p));
    let mut best = 0;
    for q in 1..instance.num_plants() {
        if instance.plant_strain(q).mean() > instance.plant_strain(best).mean() {
            best = q;
        }
    }
    out.plant_strain[p] = instance.plant_strain(best).clone();
    out.revalidate()
}

pub fn run_backshoring(
    instance: &Instance,
    template: &SaaConfig,
    qualities: &[PlantQuality],
) -> Result<StudyOutcome> {
    let p = instance.interest_plant().ok_or_else(|| {
        Error::Config(
            "back-shoring needs the country of interest among the plant candidates".into(),
        )
    })?;
    let mut forced = template.clone();
    forced.forced.insert(instance.plant_id(p).clone(), true);
    let mut arms = vec![("unforced".to_string(), instance.clone(), template.clone())];
    for &q in qualities {
        arms.push((
            format!("forced_{}", q.label()),
            apply_plant_quality(instance, q)?,
            forced.clone(),
        ));
    }
    run_arms("backshoring", arms)
}

/// Copy of `instance` with both transport cost matrices multiplied by `factor`.
pub fn apply_transport_scale(instance: &Instance, factor: f64) -> Result<Instance> {
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(Error::Config(format!(
            "transport factor must be >= 0, got {factor}"
        )));
    }
    let mut out = instance.clone();
    out.transport1
        .iter_mut()
        .flatten()
        .for_each(|c| *c *= factor);
    out.transport2
        .iter_mut()
        .flatten()
        .for_each(|c| *c *= factor);
    out.revalidate()
}

/// Copy of `instance` with ρ exchanged within each pair. A country may
/// appear in at most one pair.
pub fn apply_rho_swap(instance: &Instance, pairs: &[(CountryId, CountryId)]) -> Result<Instance> {
    let mut seen = Vec::new();
    let mut out = instance.clone();
    for (a, b) in pairs {
        let idx = |c: &CountryId| {
            instance
                .country_index(c.as_str())
                .ok_or_else(|| Error::Config(format!("rho_swap: unknown country `{c}`")))
        };
        let (i, j) = (idx(a)?, idx(b)?);
        if i == j || seen.contains(&i) || seen.contains(&j) {
            return Err(Error::Config(format!(
                "rho_swap: pair ({a}, {b}) repeats a country"
            )));
        }
        seen.extend([i, j]);
        out.export_prob.swap(i, j);
    }
    out.revalidate()
}

pub fn run_sensitivity(
    instance: &Instance,
    template: &SaaConfig,
    spec: &StudySpec,
) -> Result<StudyOutcome> {
    let (name, perturbed) = match spec {
        StudySpec::TransportSensitivity { factor } => (
            format!("transport_x{factor}"),
            apply_transport_scale(instance, *factor)?,
        ),
        StudySpec::RhoSwap { pairs } => ("rho_swap".to_string(), apply_rho_swap(instance, pairs)?),
        other => {
            return Err(Error::Config(format!(
                "{} is not a sensitivity study",
                other.kind()
            )))
        }
    };
    run_arms(
        spec.kind(),
        vec![
            ("base".into(), instance.clone(), template.clone()),
            (name, perturbed, template.clone()),
        ],
    )
}

pub fn run_study(
    instance: &Instance,
    template: &SaaConfig,
    spec: &StudySpec,
) -> Result<StudyOutcome> {
    template.validate()?;
    match spec {
        StudySpec::ExportBanCases => run_export_ban_cases(instance, template),
        StudySpec::AlliancesOff => run_alliances_off(instance, template),
        StudySpec::Pricing { schemes } => run_pricing(instance, template, schemes),
        StudySpec::Backshoring { qualities } => run_backshoring(instance, template, qualities),
        StudySpec::TransportSensitivity { .. } | StudySpec::RhoSwap { .. } => {
            run_sensitivity(instance, template, spec)
        }
    }
}
