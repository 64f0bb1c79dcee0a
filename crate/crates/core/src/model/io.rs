use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Instance;
use crate::error::{NrmError, Result};

/// Arrival probabilities as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalProbs {
    Stationary(Vec<f64>),
    PerPeriod(Vec<Vec<f64>>),
}

/// On-disk JSON layout of an [`Instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub num_legs: usize,
    pub num_products: usize,
    pub horizon: usize,
    pub capacities: Vec<u32>,
    pub fares: Vec<f64>,
    /// 0-based leg indices consumed by each product.
    pub consumption: Vec<Vec<usize>>,
    pub arrival_probs: ArrivalProbs,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let arrival_probs = if inst.is_stationary() {
            ArrivalProbs::Stationary(inst.probs(1).to_vec())
        } else {
            ArrivalProbs::PerPeriod((1..=inst.horizon()).map(|t| inst.probs(t).to_vec()).collect())
        };
        InstanceFile {
            num_legs: inst.num_legs(),
            num_products: inst.num_products(),
            horizon: inst.horizon(),
            capacities: inst.capacities().to_vec(),
            fares: inst.fares().to_vec(),
            consumption: (0..inst.num_products()).map(|j| inst.legs_of(j).to_vec()).collect(),
            arrival_probs,
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance> {
        if self.capacities.len() != self.num_legs {
            return Err(NrmError::Validation(format!(
                "num_legs is {} but capacities has {} entries",
                self.num_legs,
                self.capacities.len()
            )));
        }
        if self.fares.len() != self.num_products {
            return Err(NrmError::Validation(format!(
                "num_products is {} but fares has {} entries",
                self.num_products,
                self.fares.len()
            )));
        }
        let probs = match self.arrival_probs {
            ArrivalProbs::Stationary(p) => vec![p; self.horizon],
            ArrivalProbs::PerPeriod(rows) => {
                if rows.len() != self.horizon {
                    return Err(NrmError::Validation(format!(
                        "horizon is {} but per_period has {} rows",
                        self.horizon,
                        rows.len()
                    )));
                }
                rows
            }
        };
        Instance::new(self.capacities, self.fares, self.consumption, probs)
    }
}

pub(crate) fn parse_instance(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| NrmError::Parse(e.to_string()))?;
    file.into_instance()
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_instance(&text).map_err(|e| match e {
        NrmError::Parse(m) => NrmError::Parse(format!("{}: {m}", path.as_ref().display())),
        other => other,
    })
}

/// Writes an instance as pretty-printed JSON.
pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(inst))?;
    Ok(())
}

pub fn to_json(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from(inst)).expect("instance serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_round_trip() {
        let toy = Instance::toy2leg();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.json");
        save_instance(&toy, &path).unwrap();
        assert_eq!(load_instance(&path).unwrap(), toy);
    }

    #[test]
    fn per_period_round_trip() {
        let inst = Instance::new(
            vec![2, 1],
            vec![1.5, 0.1 + 0.2],
            vec![vec![0, 1], vec![1]],
            vec![vec![0.1, 0.3], vec![0.7, 0.2]],
        )
        .unwrap();
        let back = parse_instance(&to_json(&inst)).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn oversubscribed_period_is_a_validation_error() {
        let text = r#"{"num_legs":1,"num_products":2,"horizon":2,"capacities":[1],
            "fares":[1.0,2.0],"consumption":[[0],[0]],
            "arrival_probs":{"stationary":[0.6,0.6]}}"#;
        let err = parse_instance(text).unwrap_err();
        assert!(matches!(err, NrmError::Validation(ref m) if m.contains("at most one arrival")), "{err}");
    }

    #[test]
    fn missing_capacities_is_a_parse_error() {
        let text = r#"{"num_legs":1,"num_products":1,"horizon":2,
            "fares":[1.0],"consumption":[[0]],
            "arrival_probs":{"stationary":[0.5]}}"#;
        let err = parse_instance(text).unwrap_err();
        assert!(matches!(err, NrmError::Parse(ref m) if m.contains("capacities") && m.contains("line")), "{err}");
    }
}
