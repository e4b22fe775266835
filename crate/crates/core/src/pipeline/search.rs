//! Seeded random hyperparameter search.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Distribution of a single hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    /// Integers in `low..=high`.
    IntUniform {
        low: i64,
        high: i64,
    },
    /// Reals in `[low, high)`.
    Uniform {
        low: f64,
        high: f64,
    },
    /// Reals whose logarithm is uniform on `[ln low, ln high)`.
    LogUniform {
        low: f64,
        high: f64,
    },
    Categorical {
        values: Vec<Value>,
    },
}

impl Distribution {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Distribution::IntUniform { low, high } => low <= high,
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Distribution::LogUniform { low, high } => *low > 0.0 && high.is_finite() && low <= high,
            Distribution::Categorical { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!(
                "invalid range for hyperparameter {name}: {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Value {
        match self {
            Distribution::IntUniform { low, high } => Value::from(rng.random_range(*low..=*high)),
            Distribution::Uniform { low, high } => Value::from(uniform(rng, *low, *high)),
            Distribution::LogUniform { low, high } => Value::from(uniform(rng, low.ln(), high.ln()).exp()),
            Distribution::Categorical { values } => values[rng.random_range(0..values.len())].clone(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.random::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    #[serde(flatten)]
    pub distribution: Distribution,
}

impl Parameter {
    pub fn new(name: &str, distribution: Distribution) -> Self {
        Parameter {
            name: name.to_owned(),
            distribution,
        }
    }
}

pub type SearchSpace = Vec<Parameter>;

/// One sampled configuration, keyed by parameter name.
pub type Point = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub point: Point,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Trial,
    pub trials: Vec<Trial>,
}

impl SearchOutcome {
    /// One line per trial: index, score, then the parameters as JSON.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("case\tscore\tparameters\n");
        for t in &self.trials {
            let params = serde_json::to_string(&t.point).expect("points serialize");
            out.push_str(&format!("{}\t{:.10}\t{}\n", t.index, t.score, params));
        }
        out
    }
}

/// Samples `n_cases` points from `space` in order, evaluates them in
/// parallel and returns the one with the highest objective. Ties and NaN
/// scores resolve to the earlier case.
pub fn random_search<F>(space: &[Parameter], n_cases: usize, objective: F, seed: u64) -> Result<SearchOutcome>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    if n_cases == 0 {
        return Err(Error::ConfigInvalid("search needs at least one case".into()));
    }
    for p in space {
        p.distribution.validate(&p.name)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..n_cases)
        .map(|_| {
            space
                .iter()
                .map(|p| (p.name.clone(), p.distribution.sample(&mut rng)))
                .collect()
        })
        .collect();
    let scores: Vec<f64> = points.par_iter().map(&objective).collect::<Result<_>>()?;
    let trials: Vec<Trial> = points
        .into_iter()
        .zip(scores)
        .enumerate()
        .map(|(index, (point, score))| Trial { index, point, score })
        .collect();
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score > trials[best].score || (trials[best].score.is_nan() && !t.score.is_nan()) {
            best = i;
        }
    }
    Ok(SearchOutcome {
        best: trials[best].clone(),
        trials,
    })
}

/// Reads an integer parameter; floats are rounded.
pub fn get_usize(point: &Point, name: &str) -> Result<usize> {
    let v = point.get(name).ok_or_else(|| missing(name))?;
    v.as_u64()
        .map(|x| x as usize)
        .or_else(|| v.as_f64().filter(|x| *x >= 0.0).map(|x| x.round() as usize))
        .ok_or_else(|| wrong_type(name, v))
}

pub fn get_f64(point: &Point, name: &str) -> Result<f64> {
    let v = point.get(name).ok_or_else(|| missing(name))?;
    v.as_f64().ok_or_else(|| wrong_type(name, v))
}

pub fn get_bool(point: &Point, name: &str) -> Result<bool> {
    let v = point.get(name).ok_or_else(|| missing(name))?;
    v.as_bool().ok_or_else(|| wrong_type(name, v))
}

pub fn get_as<T: serde::de::DeserializeOwned>(point: &Point, name: &str) -> Result<T> {
    let v = point.get(name).ok_or_else(|| missing(name))?;
    serde_json::from_value(v.clone()).map_err(|_| wrong_type(name, v))
}

fn missing(name: &str) -> Error {
    Error::ConfigInvalid(format!("search point lacks hyperparameter {name}"))
}

fn wrong_type(name: &str, v: &Value) -> Error {
    Error::ConfigInvalid(format!("hyperparameter {name} has unexpected value {v}"))
}
