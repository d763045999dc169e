//! JSON run manifest. Every section and field is optional; command-line flags
//! override scalar values.

use std::path::Path;

use anyhow::{Context, Result};
use dispatchq::Threshold;
use serde::{Deserialize, Deserializer};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub params: ParamsSection,
    pub policy: Option<PolicySection>,
    #[serde(default)]
    pub improve: ImproveSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub mu: Option<f64>,
    pub cap_lambda: Option<f64>,
    pub t_star: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub rates: Option<Vec<f64>>,
    pub tail_rate: Option<f64>,
    pub buffer: Option<u32>,
    #[serde(default, deserialize_with = "threshold_opt")]
    pub threshold: Option<Threshold>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImproveSection {
    pub m: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub events: Option<u64>,
    pub warmup: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub lambda0_grid: Option<Vec<f64>>,
    pub grid_points: Option<usize>,
    pub grid_eps: Option<f64>,
    pub t_star_list: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "threshold_list_opt")]
    pub thresholds: Option<Vec<Threshold>>,
    pub buffers: Option<Vec<u32>>,
}

/// Either a nonnegative integer or the string `"inf"`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ThresholdRepr {
    Finite(u32),
    Text(String),
}

impl ThresholdRepr {
    fn resolve<E: serde::de::Error>(self) -> std::result::Result<Threshold, E> {
        match self {
            ThresholdRepr::Finite(m) => Ok(Threshold::Finite(m)),
            ThresholdRepr::Text(s) => s.parse().map_err(E::custom),
        }
    }
}

fn threshold_opt<'de, D: Deserializer<'de>>(
    de: D,
) -> std::result::Result<Option<Threshold>, D::Error> {
    Option::<ThresholdRepr>::deserialize(de)?
        .map(ThresholdRepr::resolve)
        .transpose()
}

fn threshold_list_opt<'de, D: Deserializer<'de>>(
    de: D,
) -> std::result::Result<Option<Vec<Threshold>>, D::Error> {
    Option::<Vec<ThresholdRepr>>::deserialize(de)?
        .map(|v| v.into_iter().map(ThresholdRepr::resolve).collect())
        .transpose()
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn parse(text: &str) -> Result<Config> {
    Ok(serde_json::from_str(text)?)
}
