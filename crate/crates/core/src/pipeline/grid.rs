//! Cartesian grid search scored on the validation split.

use rayon::prelude::*;
use toml::Value;

use super::config::{display_value, ExperimentConfig, GridAxis};
use super::experiment::{run_trials, TrialResult, Utterance};
use crate::error::{Error, Result};

/// One grid point and how it fared. Failures are kept as messages so a
/// single bad point does not void the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub settings: Vec<(String, String)>,
    pub outcome: std::result::Result<TrialResult, String>,
}

impl GridRow {
    pub fn mean(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.mean)
    }
}

/// Every combination of axis values, first axis varying slowest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(String, Value)>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect()
    })
}

/// Runs [`run_trials`] at every point of `base.grid`, training on `train`
/// and scoring on `validation`. Rows come back sorted by mean rate,
/// best first, with failed points last; ties keep grid order.
pub fn grid_search(base: &ExperimentConfig, train: &[Utterance], validation: &[Utterance]) -> Result<Vec<GridRow>> {
    if base.grid.is_empty() {
        return Err(Error::config("grid search needs at least one grid.<key> axis"));
    }
    let points = grid_points(&base.grid);
    log::info!("grid search over {} points", points.len());
    let mut rows: Vec<GridRow> = points
        .par_iter()
        .map(|point| {
            let settings = point.iter().map(|(k, v)| (k.clone(), display_value(v))).collect();
            let run = || -> Result<TrialResult> {
                let mut cfg = base.clone();
                cfg.grid.clear();
                for (k, v) in point {
                    cfg.set(k, v)?;
                }
                run_trials(&cfg, train, validation)
            };
            let outcome = run().map_err(|e| {
                log::warn!("grid point {point:?} failed: {e}");
                e.to_string()
            });
            GridRow { settings, outcome }
        })
        .collect();
    rows.sort_by(|a, b| match (a.mean(), b.mean()) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}
