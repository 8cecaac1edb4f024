use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CountryId, Instance};
use crate::error::{Error, Result};

/// First-stage plant-location decision Y. Serialized as `{"id": 0|1}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Design {
    pub open: BTreeMap<CountryId, bool>,
}

impl Design {
    /// Bit `p` of `mask` opens plant `p` (plant order of the instance).
    pub fn from_mask(instance: &Instance, mask: u64) -> Design {
        let open = (0..instance.num_plants())
            .map(|p| (instance.plant_id(p).clone(), mask >> p & 1 == 1))
            .collect();
        Design { open }
    }

    /// Plants listed in `open_ids` are open, every other candidate closed.
    pub fn with_open(instance: &Instance, open_ids: &[&str]) -> Design {
        let open = (0..instance.num_plants())
            .map(|p| {
                let id = instance.plant_id(p);
                (id.clone(), open_ids.contains(&id.as_str()))
            })
            .collect();
        Design { open }
    }

    pub fn all_open(instance: &Instance) -> Design {
        Design::from_mask(instance, u64::MAX)
    }

    /// Open flags in plant order. Caller must have validated the design.
    pub fn flags(&self, instance: &Instance) -> Vec<bool> {
        (0..instance.num_plants())
            .map(|p| {
                self.open
                    .get(instance.plant_id(p))
                    .copied()
                    .unwrap_or(false)
            })
            .collect()
    }

    pub fn mask(&self, instance: &Instance) -> u64 {
        self.flags(instance)
            .iter()
            .enumerate()
            .fold(0, |m, (p, &o)| if o { m | 1 << p } else { m })
    }

    pub fn num_open(&self) -> usize {
        self.open.values().filter(|&&o| o).count()
    }

    pub fn is_open(&self, id: &str) -> bool {
        self.open.iter().any(|(k, &o)| o && k.as_str() == id)
    }

    pub fn fixed_cost(&self, instance: &Instance) -> f64 {
        self.flags(instance)
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(p, _)| instance.fixed_cost(p))
            .sum()
    }

    /// Space-free label such as `a+c`; `-` when nothing is open.
    pub fn label(&self) -> String {
        let open: Vec<&str> = self
            .open
            .iter()
            .filter(|(_, &o)| o)
            .map(|(k, _)| k.as_str())
            .collect();
        if open.is_empty() {
            "-".to_string()
        } else {
            open.join("+")
        }
    }

    /// Build from a user-supplied 0/1 map. Missing candidates are closed,
    /// unknown keys and non-binary values are rejected.
    pub fn from_partial(instance: &Instance, values: &BTreeMap<String, f64>) -> Result<Design> {
        let mut open = BTreeMap::new();
        for p in 0..instance.num_plants() {
            open.insert(instance.plant_id(p).clone(), false);
        }
        for (k, &v) in values {
            let slot = open
                .get_mut(&CountryId(k.clone()))
                .ok_or_else(|| Error::DesignMismatch(format!("`{k}` is not a plant candidate")))?;
            *slot = binary(k, v)?;
        }
        Ok(Design { open })
    }
}

fn binary(key: &str, v: f64) -> Result<bool> {
    if v == 0.0 {
        Ok(false)
    } else if v == 1.0 {
        Ok(true)
    } else {
        Err(Error::DesignMismatch(format!(
            "value for `{key}` is {v}, expected 0 or 1"
        )))
    }
}

impl Serialize for Design {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<&CountryId, u8> = self.open.iter().map(|(k, &v)| (k, v as u8)).collect();
        m.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Design {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = BTreeMap::<CountryId, u8>::deserialize(d)?;
        let mut open = BTreeMap::new();
        for (k, v) in m {
            match v {
                0 => open.insert(k, false),
                1 => open.insert(k, true),
                _ => return Err(serde::de::Error::custom(format!("`{k}` must be 0 or 1"))),
            };
        }
        Ok(Design { open })
    }
}

/// Check that `design` is keyed exactly by the plant candidates and opens
/// at least one plant.
pub fn validate_design(instance: &Instance, design: &Design) -> Result<()> {
    if design.open.len() != instance.num_plants()
        || (0..instance.num_plants()).any(|p| !design.open.contains_key(instance.plant_id(p)))
    {
        let expected: Vec<&str> = (0..instance.num_plants())
            .map(|p| instance.plant_id(p).as_str())
            .collect();
        let got: Vec<&str> = design.open.keys().map(|k| k.as_str()).collect();
        return Err(Error::DesignMismatch(format!(
            "design keys [{}] differ from plant candidates [{}]",
            got.join(", "),
            expected.join(", ")
        )));
    }
    if design.num_open() == 0 {
        return Err(Error::NoPlantOpen);
    }
    Ok(())
}
