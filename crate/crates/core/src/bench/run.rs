use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::config::{DatasetSource, DatasetSpec, ExperimentConfig, ModelKind};
use super::synth::generate_synthetic;
use super::table::ResultsTable;
use crate::data::{load_csv, make_split, preprocess, ColumnKind, Dataset, LabelColumn};
use crate::forest::{fit_forest, predict_forest, ForestConfig};
use crate::metrics::accuracy;
use crate::oof::compute_oof;
use crate::optimizer::WeightVector;
use crate::seed::{derive_seed, par_map, seed_from_str};
use crate::stacking::{fit_meta_learner, predict_stacked};
use crate::weighting::{
    fit_optimal_accuracy, fit_optimal_auc, fit_performance_weights, oof_accuracy, oof_auc,
    predict_weighted, WeightedForest,
};
use crate::Result;

/// Which base forest and out-of-fold matrix a fitted variant consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariantAudit {
    pub model: ModelKind,
    pub forest_fingerprint: u64,
    pub oof_fingerprint: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionAudit {
    pub forest_fingerprint: u64,
    pub oof_fingerprint: Option<u64>,
    pub variants: Vec<VariantAudit>,
    /// Out-of-fold accuracy of the fitted and of the uniform weights.
    pub accuracy_fitted_vs_uniform: Option<(f64, f64)>,
    /// Out-of-fold AUC of the fitted and of the uniform weights.
    pub auc_fitted_vs_uniform: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionResult {
    /// Test accuracy per model in table order.
    pub accuracies: Vec<(ModelKind, f64)>,
    pub audit: RepetitionAudit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetError {
    pub dataset: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub table: ResultsTable,
    /// Per successful dataset, one audit per repetition.
    pub audits: Vec<(String, Vec<RepetitionAudit>)>,
    pub errors: Vec<DatasetError>,
}

/// Runs every dataset; a failing dataset is reported and skipped.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let models = config.ordered_models();
    let mut table = ResultsTable::new(models.clone());
    let mut audits = Vec::new();
    let mut errors = Vec::new();
    for spec in &config.datasets {
        let name = spec.display_name();
        match run_dataset(spec, &name, config, &models) {
            Ok((values, rep_audits)) => {
                table.push_row(name.clone(), values)?;
                audits.push((name, rep_audits));
            }
            Err(e) => errors.push(DatasetError {
                dataset: name,
                message: e.to_string(),
            }),
        }
    }
    Ok(ExperimentOutcome {
        table,
        audits,
        errors,
    })
}

type DatasetValues = (Vec<Vec<f64>>, Vec<RepetitionAudit>);

fn run_dataset(
    spec: &DatasetSpec,
    name: &str,
    config: &ExperimentConfig,
    models: &[ModelKind],
) -> Result<DatasetValues> {
    let data = load_dataset(spec, name, config.seed)?;
    let reps = par_map(config.repetitions, |r| {
        run_repetition(&data, name, r, config)
    });
    let mut values = vec![Vec::with_capacity(config.repetitions); models.len()];
    let mut rep_audits = Vec::with_capacity(config.repetitions);
    for rep in reps {
        let rep = rep?;
        for (m, (_, acc)) in rep.accuracies.iter().enumerate() {
            values[m].push(*acc);
        }
        rep_audits.push(rep.audit);
    }
    Ok((values, rep_audits))
}

pub fn load_dataset(spec: &DatasetSpec, name: &str, master_seed: u64) -> Result<Dataset> {
    match spec.source()? {
        DatasetSource::Csv {
            path,
            label,
            categorical,
        } => {
            let hints: HashMap<String, ColumnKind> = categorical
                .into_iter()
                .map(|c| (c, ColumnKind::Categorical))
                .collect();
            preprocess(&load_csv(path, &LabelColumn::Name(label), &hints)?)
        }
        DatasetSource::Synthetic { spec, seed } => generate_synthetic(
            &spec,
            seed.unwrap_or_else(|| seed_from_str(master_seed, name)),
        ),
    }
}

/// One split of the protocol: a shared base forest and out-of-fold matrix
/// feed every requested variant. Debug exports are written for `r == 0`.
pub fn run_repetition(
    data: &Dataset,
    name: &str,
    r: usize,
    config: &ExperimentConfig,
) -> Result<RepetitionResult> {
    let models = config.ordered_models();
    let seed_r = derive_seed(seed_from_str(config.seed, name), r as u64);
    let split = make_split(
        data,
        config.test_fraction,
        config.folds,
        derive_seed(seed_r, 0),
    )?;
    let forest_config =
        ForestConfig::for_features(data.n_features(), config.n_trees, derive_seed(seed_r, 1));
    let optimizer = config.optimizer.with_seed(derive_seed(seed_r, 2));
    let mut stacking = config.stacking;
    stacking.seed = derive_seed(seed_r, 3);

    let forest = Arc::new(fit_forest(data, &split.train_indices, &forest_config)?);
    let needs_oof = models.iter().any(|&m| m != ModelKind::RegularRf);
    let oof = if needs_oof || config.dump_oof.is_some() {
        Some(compute_oof(data, &split, &forest_config)?)
    } else {
        None
    };
    let oof_fp = oof.as_ref().map(|o| o.fingerprint());
    let dumps = r == 0;
    if dumps {
        if let (Some(dir), Some(oof)) = (&config.dump_oof, &oof) {
            std::fs::create_dir_all(dir)?;
            oof.write_csv(create(dir, &format!("{name}_oof_binary.csv"))?, false)?;
            oof.write_csv(create(dir, &format!("{name}_oof_prob.csv"))?, true)?;
        }
        if let Some(dir) = &config.dump_model {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}_forest.json")), forest.to_json()?)?;
        }
    }

    let test_labels: Vec<u8> = split.test_indices.iter().map(|&i| data.label(i)).collect();
    let test_accuracy = |predict: &dyn Fn(&[f64]) -> u8| -> Result<f64> {
        let yhat: Vec<u8> = split
            .test_indices
            .iter()
            .map(|&i| predict(data.row(i)))
            .collect();
        accuracy(&test_labels, &yhat)
    };

    let mut accuracies = Vec::with_capacity(models.len());
    let mut variants = Vec::new();
    let mut accuracy_check = None;
    let mut auc_check = None;
    for &model in &models {
        let acc = match (model, &oof) {
            (ModelKind::RegularRf, _) => test_accuracy(&|x| predict_forest(&forest, x).class)?,
            (_, None) => {
                unreachable!("out-of-fold matrix is computed whenever a variant is requested")
            }
            (_, Some(oof)) => {
                let uniform = WeightVector::uniform(oof.n_trees());
                let (forest_fp, acc) = if let Some((learner, mode)) = model.stacking() {
                    let stacked =
                        fit_meta_learner(Arc::clone(&forest), oof, learner, mode, &stacking)?;
                    let acc = test_accuracy(&|x| predict_stacked(&stacked, x).class)?;
                    (stacked.base_forest.fingerprint(), acc)
                } else {
                    let weighted = match model {
                        ModelKind::OptAcc => {
                            let w = fit_optimal_accuracy(Arc::clone(&forest), oof, &optimizer)?;
                            accuracy_check = Some((
                                oof_accuracy(oof, w.weights.as_slice()),
                                oof_accuracy(oof, uniform.as_slice()),
                            ));
                            w
                        }
                        ModelKind::OptAuc => {
                            let w = fit_optimal_auc(Arc::clone(&forest), oof, &optimizer)?;
                            auc_check = Some((
                                oof_auc(oof, w.weights.as_slice())?,
                                oof_auc(oof, uniform.as_slice())?,
                            ));
                            w
                        }
                        _ => fit_performance_weights(Arc::clone(&forest), oof)?,
                    };
                    if dumps {
                        dump_weights(config.dump_weights.as_deref(), name, model, &weighted)?;
                    }
                    let acc = test_accuracy(&|x| predict_weighted(&weighted, x).class)?;
                    (weighted.forest.fingerprint(), acc)
                };
                variants.push(VariantAudit {
                    model,
                    forest_fingerprint: forest_fp,
                    oof_fingerprint: Some(oof.fingerprint()),
                });
                acc
            }
        };
        accuracies.push((model, acc));
    }

    Ok(RepetitionResult {
        accuracies,
        audit: RepetitionAudit {
            forest_fingerprint: forest.fingerprint(),
            oof_fingerprint: oof_fp,
            variants,
            accuracy_fitted_vs_uniform: accuracy_check,
            auc_fitted_vs_uniform: auc_check,
        },
    })
}

fn create(dir: &Path, file: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(
        dir.join(file),
    )?))
}

fn dump_weights(
    dir: Option<&Path>,
    name: &str,
    model: ModelKind,
    weighted: &WeightedForest,
) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    weighted.write_weights_csv(create(dir, &format!("{name}_{}_weights.csv", model.id()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::SyntheticSpec;

    fn small_config(models: Vec<ModelKind>) -> ExperimentConfig {
        ExperimentConfig {
            datasets: vec![DatasetSpec::synthetic(
                "blobs",
                SyntheticSpec {
                    n: 120,
                    p: 4,
                    separation: 2.0,
                    ..Default::default()
                },
            )],
            n_trees: 12,
            repetitions: 2,
            seed: 7,
            models,
            ..Default::default()
        }
    }

    #[test]
    fn smoke_single_model() {
        let mut c = small_config(vec![ModelKind::RegularRf]);
        c.repetitions = 1;
        let out = run_experiment(&c).unwrap();
        assert!(out.errors.is_empty());
        assert_eq!(out.table.rows.len(), 1);
        assert_eq!(out.table.rows[0].cells[0].values.len(), 1);
        assert_eq!(out.audits[0].1[0].oof_fingerprint, None);
    }

    #[test]
    fn deterministic_and_shared() {
        let c = small_config(ModelKind::ALL.to_vec());
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a, b);
        for audit in &a.audits[0].1 {
            assert_eq!(audit.variants.len(), 9);
            for v in &audit.variants {
                assert_eq!(v.forest_fingerprint, audit.forest_fingerprint);
                assert_eq!(v.oof_fingerprint, audit.oof_fingerprint);
            }
            let (fit, uni) = audit.accuracy_fitted_vs_uniform.unwrap();
            assert!(fit >= uni);
            let (fit, uni) = audit.auc_fitted_vs_uniform.unwrap();
            assert!(fit >= uni);
        }
    }

    #[test]
    fn removing_a_model_leaves_others_unchanged() {
        let full = run_experiment(&small_config(ModelKind::ALL.to_vec())).unwrap();
        let subset = vec![
            ModelKind::RegularRf,
            ModelKind::LogStackProb,
            ModelKind::PerfWrf,
        ];
        let part = run_experiment(&small_config(subset.clone())).unwrap();
        for m in subset {
            let i = full.table.models.iter().position(|&x| x == m).unwrap();
            let j = part.table.models.iter().position(|&x| x == m).unwrap();
            assert_eq!(
                full.table.rows[0].cells[i].values, part.table.rows[0].cells[j].values,
                "{m}"
            );
        }
    }

    #[test]
    fn failing_dataset_does_not_abort_others() {
        let mut c = small_config(vec![ModelKind::RegularRf]);
        c.datasets
            .insert(0, DatasetSpec::csv("/nonexistent/file.csv", "y"));
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].dataset, "file");
        assert_eq!(out.table.rows.len(), 1);
        assert_eq!(out.table.rows[0].dataset, "blobs");
    }

    #[test]
    fn dumps_first_repetition() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(vec![ModelKind::RegularRf, ModelKind::OptAcc]);
        c.dump_oof = Some(dir.path().join("oof"));
        c.dump_weights = Some(dir.path().join("w"));
        c.dump_model = Some(dir.path().join("m"));
        run_experiment(&c).unwrap();
        assert!(dir.path().join("oof/blobs_oof_prob.csv").exists());
        assert!(dir.path().join("w/blobs_opt_acc_weights.csv").exists());
        assert!(dir.path().join("m/blobs_forest.json").exists());
    }
}
