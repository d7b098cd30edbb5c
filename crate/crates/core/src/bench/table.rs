use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::{ModelKind, TableFormat};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelResult {
    pub model: ModelKind,
    pub mean: f64,
    /// Sample standard deviation; zero for a single repetition.
    pub sd: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub dataset: String,
    /// Aligned with [`ResultsTable::models`].
    pub cells: Vec<ModelResult>,
}

/// Per-dataset test accuracies for every requested model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsTable {
    pub models: Vec<ModelKind>,
    pub rows: Vec<TableRow>,
}

impl ResultsTable {
    pub fn new(models: Vec<ModelKind>) -> Self {
        Self {
            models,
            rows: Vec::new(),
        }
    }

    /// `values[m]` holds the per-repetition accuracies of `self.models[m]`.
    pub fn push_row(&mut self, dataset: impl Into<String>, values: Vec<Vec<f64>>) -> Result<()> {
        if values.len() != self.models.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.models.len(),
            });
        }
        let mut cells = Vec::with_capacity(values.len());
        for (model, v) in self.models.iter().zip(values) {
            if v.is_empty() {
                return Err(Error::EmptyInput);
            }
            if v.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::InvalidParameter(format!(
                    "accuracy outside [0, 1] for {model}"
                )));
            }
            let (mean, sd) = mean_sd(&v);
            cells.push(ModelResult {
                model: *model,
                mean,
                sd,
                values: v,
            });
        }
        self.rows.push(TableRow {
            dataset: dataset.into(),
            cells,
        });
        Ok(())
    }

    pub fn mean(&self, dataset: &str, model: ModelKind) -> Option<f64> {
        let m = self.models.iter().position(|&x| x == model)?;
        self.rows
            .iter()
            .find(|r| r.dataset == dataset)
            .map(|r| r.cells[m].mean)
    }

    /// Per-model mean of the dataset means.
    pub fn grand_means(&self) -> Vec<f64> {
        (0..self.models.len())
            .map(|m| {
                self.rows.iter().map(|r| r.cells[m].mean).sum::<f64>() / self.rows.len() as f64
            })
            .collect()
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Indices of every exact maximum.
fn argmax_all(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

pub fn emit_table<W: Write>(
    results: &ResultsTable,
    format: TableFormat,
    mut writer: W,
) -> Result<()> {
    if results.rows.is_empty() || results.models.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut lines: Vec<(String, Vec<f64>, Option<Vec<f64>>)> = results
        .rows
        .iter()
        .map(|r| {
            (
                r.dataset.clone(),
                r.cells.iter().map(|c| c.mean).collect(),
                Some(r.cells.iter().map(|c| c.sd).collect()),
            )
        })
        .collect();
    lines.push(("Ave.".to_string(), results.grand_means(), None));

    match format {
        TableFormat::Csv => {
            let mut header = vec!["dataset".to_string()];
            for m in &results.models {
                header.push(format!("{}_mean", m.id()));
                header.push(format!("{}_sd", m.id()));
            }
            header.push("best_model".to_string());
            writeln!(writer, "{}", header.join(","))?;
            for (name, means, sds) in &lines {
                let mut fields = vec![csv_field(name)];
                for (m, mean) in means.iter().enumerate() {
                    fields.push(mean.to_string());
                    fields.push(sds.as_ref().map(|s| s[m].to_string()).unwrap_or_default());
                }
                let best: Vec<&str> = argmax_all(means)
                    .into_iter()
                    .map(|m| results.models[m].id())
                    .collect();
                fields.push(best.join(";"));
                writeln!(writer, "{}", fields.join(","))?;
            }
        }
        TableFormat::Markdown => {
            let titles: Vec<&str> = results.models.iter().map(|m| m.title()).collect();
            writeln!(writer, "| Dataset | {} |", titles.join(" | "))?;
            writeln!(writer, "|---|{}", "---:|".repeat(titles.len()))?;
            for (name, means, _) in &lines {
                let best = argmax_all(means);
                let cells: Vec<String> = means
                    .iter()
                    .enumerate()
                    .map(|(m, v)| {
                        let s = format!("{:.2}", 100.0 * v);
                        if best.contains(&m) {
                            format!("**{s}**")
                        } else {
                            s
                        }
                    })
                    .collect();
                writeln!(
                    writer,
                    "| {} | {} |",
                    name.replace('|', "\\|"),
                    cells.join(" | ")
                )?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_table(
    results: &ResultsTable,
    format: TableFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    emit_table(results, format, std::io::BufWriter::new(file))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
