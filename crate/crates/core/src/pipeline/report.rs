//! Result tables as CSV.

use std::io::Write;
use std::path::Path;

use super::config::ExperimentConfig;
use super::experiment::{TrainedModel, TrialResult};
use super::grid::GridRow;
use crate::error::{Error, Result};

/// The settings that identify a single experiment in a result row.
pub fn config_columns(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let delays = cfg.resolved_delays().iter().map(ToString::to_string).collect::<Vec<_>>().join(";");
    [
        ("model.variant", cfg.variant.to_string()),
        ("model.layers", cfg.n_layers.to_string()),
        ("model.delays", delays),
        ("layer.size", cfg.layer.size.to_string()),
        ("layer.rho", cfg.layer.spectral_radius.to_string()),
        ("layer.leak", cfg.layer.leak_rate.to_string()),
        ("layer.input_scale", cfg.layer.input_scale.to_string()),
        ("layer.bias_scale", cfg.resolved_bias_scale().to_string()),
        ("layer.connectivity", cfg.layer.connectivity.to_string()),
        ("features.context_width", cfg.context_width.to_string()),
        ("train.washout", cfg.washout.to_string()),
        ("ridge.gamma", cfg.gamma.to_string()),
        ("trials.master_seed", cfg.master_seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// The same columns as [`config_columns`], read back from a trained model.
pub fn model_columns(model: &TrainedModel) -> Vec<(String, String)> {
    let layers = model.reservoir.layers();
    let l = &layers[0].config;
    let delays: Vec<String> = match model.reservoir.partition() {
        Some(p) => p.delays().iter().map(ToString::to_string).collect(),
        None if model.reservoir.variant() == crate::reservoir::Variant::HeteroDeep => {
            layers.iter().map(|l| l.config.delay.to_string()).collect()
        }
        None => Vec::new(),
    };
    let meta = |k: &str| model.meta.get(k).cloned().unwrap_or_default();
    [
        ("model.variant", model.reservoir.variant().to_string()),
        ("model.layers", layers.len().to_string()),
        ("model.delays", delays.join(";")),
        ("layer.size", l.size.to_string()),
        ("layer.rho", l.spectral_radius.to_string()),
        ("layer.leak", l.leak_rate.to_string()),
        ("layer.input_scale", l.input_scale.to_string()),
        ("layer.bias_scale", l.bias_scale.to_string()),
        ("layer.connectivity", l.connectivity.to_string()),
        ("features.context_width", model.context_width.to_string()),
        ("train.washout", model.washout.to_string()),
        ("ridge.gamma", meta("ridge.gamma")),
        ("trials.master_seed", meta("trial.seed")),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// One-row result table for an evaluated saved model.
pub fn write_model_csv(path: &Path, model: &TrainedModel, result: &TrialResult) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(file, &[(model_columns(model), Ok(result.clone()))], false).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format { kind: "CSV", msg: format!("{other:?}") },
    }
}

/// Config columns and the outcome of one configuration.
pub type ResultRow = (Vec<(String, String)>, std::result::Result<TrialResult, String>);

/// Writes a header and one row per entry: config columns, `rate_1..rate_n`,
/// `mean`, `std`, `train_seconds` (blank when unknown) and `n_params`. With
/// `error_column`, a trailing `error` column holds failure messages.
pub fn write_results<W: Write>(out: W, rows: &[ResultRow], error_column: bool) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let n_rates = rows.iter().filter_map(|(_, r)| r.as_ref().ok()).map(|r| r.rates.len()).max().unwrap_or(0);
    let Some((first, _)) = rows.first() else {
        return Ok(());
    };
    let mut header: Vec<String> = first.iter().map(|(k, _)| k.clone()).collect();
    header.extend((1..=n_rates).map(|k| format!("rate_{k}")));
    header.extend(["mean", "std", "train_seconds", "n_params"].map(String::from));
    if error_column {
        header.push("error".into());
    }
    w.write_record(&header)?;
    for (settings, outcome) in rows {
        let mut rec: Vec<String> = settings.iter().map(|(_, v)| v.clone()).collect();
        match outcome {
            Ok(r) => {
                rec.extend((0..n_rates).map(|k| r.rates.get(k).map(|v| format!("{v:.6}")).unwrap_or_default()));
                rec.push(format!("{:.6}", r.mean));
                rec.push(format!("{:.6}", r.std));
                rec.push(r.train_seconds.map(|s| format!("{s:.3}")).unwrap_or_default());
                rec.push(r.n_params.to_string());
                if error_column {
                    rec.push(String::new());
                }
            }
            Err(msg) => {
                rec.extend(std::iter::repeat_n(String::new(), n_rates + 4));
                if error_column {
                    rec.push(msg.clone());
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One-row result table for a single experiment.
pub fn write_trial_csv(path: &Path, cfg: &ExperimentConfig, result: &TrialResult) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(file, &[(config_columns(cfg), Ok(result.clone()))], false).map_err(|e| csv_err(path, e))
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<_> = rows.iter().map(|r| (r.settings.clone(), r.outcome.clone())).collect();
    write_results(file, &rows, true).map_err(|e| csv_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_rows_and_blank_timing() {
        let r = TrialResult::from_rates(vec![0, 1], vec![50.0, 75.0], None, 12);
        let mut buf = Vec::new();
        write_results(&mut buf, &[(vec![("layer.size".into(), "10".into())], Ok(r))], false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "layer.size,rate_1,rate_2,mean,std,train_seconds,n_params\n10,50.000000,75.000000,62.500000,17.677670,,12\n"
        );
    }

    #[test]
    fn failed_rows_keep_their_message() {
        let ok = TrialResult::from_rates(vec![0], vec![90.0], Some(1.5), 4);
        let rows = vec![
            (vec![("k".to_string(), "a".to_string())], Ok(ok)),
            (vec![("k".to_string(), "b".to_string())], Err("boom".to_string())),
        ];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,rate_1,mean,std,train_seconds,n_params,error");
        assert_eq!(lines[1], "a,90.000000,90.000000,0.000000,1.500,4,");
        assert_eq!(lines[2], "b,,,,,,boom");
    }
}
