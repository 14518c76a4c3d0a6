use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column roles and labels of a tabular dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSchema {
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub categorical_features: BTreeSet<usize>,
    /// Column index -> category labels in encoding order.
    pub categorical_names: BTreeMap<usize, Vec<String>>,
}

/// Which columns to treat as categorical, plus optional class names.
#[derive(Debug, Clone, Default)]
pub struct SchemaHints {
    pub categorical: Vec<String>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Nearest-rank quartile boundaries (continuous columns only).
    pub quartiles: [f64; 3],
    /// Empirical frequency of each category code, or of each quartile bin
    /// for continuous columns.
    pub frequencies: Vec<f64>,
}

/// Rows plus schema and per-column statistics derived from them.
#[derive(Debug, Clone)]
pub struct Dataset {
    rows: Vec<Vec<f32>>,
    schema: TabularSchema,
    stats: Vec<ColumnStats>,
}

pub const QUARTILE_BINS: usize = 4;

impl Dataset {
    pub fn new(rows: Vec<Vec<f32>>, schema: TabularSchema) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = schema.feature_names.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::InconsistentArity {
                    row: i + 1,
                    expected: d,
                    found: r.len(),
                });
            }
        }
        for &c in &schema.categorical_features {
            let labels = schema
                .categorical_names
                .get(&c)
                .ok_or_else(|| Error::param(format!("categorical column {c} has no labels")))?;
            if c >= d {
                return Err(Error::param(format!("categorical column {c} out of range")));
            }
            if labels.len() < 2 {
                return Err(Error::param(format!(
                    "categorical column '{}' needs at least 2 categories",
                    schema.feature_names[c]
                )));
            }
            if rows.iter().any(|r| r[c] < 0.0 || r[c] as usize >= labels.len() || r[c].fract() != 0.0) {
                return Err(Error::param(format!("column {c} holds an invalid category code")));
            }
        }
        let stats = (0..d)
            .map(|c| column_stats(&rows, c, schema.categorical_names.get(&c).map(Vec::len)))
            .collect();
        Ok(Dataset { rows, schema, stats })
    }

    pub fn rows(&self) -> &[Vec<f32>] {
        &self.rows
    }

    pub fn schema(&self) -> &TabularSchema {
        &self.schema
    }

    pub fn stats(&self) -> &[ColumnStats] {
        &self.stats
    }

    pub fn num_features(&self) -> usize {
        self.schema.feature_names.len()
    }

    pub fn is_categorical(&self, col: usize) -> bool {
        self.schema.categorical_features.contains(&col)
    }

    /// Quartile bin of a continuous value.
    pub fn bin_of(&self, col: usize, value: f64) -> usize {
        let q = &self.stats[col].quartiles;
        q.iter().position(|&b| value <= b).unwrap_or(QUARTILE_BINS - 1)
    }

    /// Closed value range covered by a quartile bin.
    pub fn bin_range(&self, col: usize, bin: usize) -> (f64, f64) {
        let s = &self.stats[col];
        let edges = [s.min, s.quartiles[0], s.quartiles[1], s.quartiles[2], s.max];
        (edges[bin], edges[bin + 1])
    }

    /// Human-readable form of a cell value.
    pub fn describe_value(&self, col: usize, value: f32) -> String {
        match self.schema.categorical_names.get(&col) {
            Some(labels) if self.is_categorical(col) => labels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| value.to_string()),
            _ => value.to_string(),
        }
    }

    /// Writes the dataset back as header plus rows, categories as labels.
    pub fn to_csv(&self) -> String {
        let mut out = self.schema.feature_names.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().enumerate().map(|(c, &v)| self.describe_value(c, v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn column_stats(rows: &[Vec<f32>], col: usize, categories: Option<usize>) -> ColumnStats {
    let vals: Vec<f64> = rows.iter().map(|r| r[col] as f64).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let mut sorted = vals.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = |p: f64| sorted[((p * n).ceil() as usize).max(1) - 1];
    let quartiles = [rank(0.25), rank(0.5), rank(0.75)];
    let frequencies = match categories {
        Some(k) => {
            let mut counts = vec![0usize; k];
            for v in &vals {
                counts[*v as usize] += 1;
            }
            counts.into_iter().map(|c| c as f64 / n).collect()
        }
        None => {
            let mut counts = vec![0usize; QUARTILE_BINS];
            for v in &vals {
                counts[quartiles.iter().position(|&b| *v <= b).unwrap_or(QUARTILE_BINS - 1)] += 1;
            }
            counts.into_iter().map(|c| c as f64 / n).collect()
        }
    };
    ColumnStats {
        mean,
        std,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        quartiles,
        frequencies,
    }
}

/// Parses header-plus-rows CSV text. Categorical columns named in `hints`
/// are label-encoded in first-seen order; all others must parse as floats.
pub fn parse_csv(text: &str, hints: &SchemaHints) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    for h in &hints.categorical {
        if !names.contains(h) {
            return Err(Error::param(format!("categorical column '{h}' is not in the header")));
        }
    }
    let categorical: BTreeSet<usize> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| hints.categorical.contains(n))
        .map(|(i, _)| i)
        .collect();
    let mut labels: BTreeMap<usize, Vec<String>> = categorical.iter().map(|&c| (c, Vec::new())).collect();
    let mut rows = Vec::new();
    for (line_no, line) in lines {
        // Row numbers count the header as row 1.
        let row = line_no + 1;
        if line.contains('"') {
            return Err(Error::Parse {
                row,
                column: line.find('"').map_or(1, |p| line[..p].matches(',').count() + 1),
                message: "quoted fields are not supported".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(Error::InconsistentArity {
                row,
                expected: names.len(),
                found: fields.len(),
            });
        }
        let mut parsed = Vec::with_capacity(fields.len());
        for (c, f) in fields.iter().enumerate() {
            if let Some(cats) = labels.get_mut(&c) {
                let code = match cats.iter().position(|x| x == f) {
                    Some(p) => p,
                    None => {
                        cats.push(f.to_string());
                        cats.len() - 1
                    }
                };
                parsed.push(code as f32);
            } else {
                let v: f32 = f.parse().ok().filter(|v: &f32| v.is_finite()).ok_or_else(|| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("'{f}' is not a number in continuous column '{}'", names[c]),
                })?;
                parsed.push(v);
            }
        }
        rows.push(parsed);
    }
    let schema = TabularSchema {
        feature_names: names,
        class_names: hints.class_names.clone(),
        categorical_features: categorical,
        categorical_names: labels,
    };
    Dataset::new(rows, schema)
}

pub fn ingest_csv(path: impl AsRef<Path>, hints: &SchemaHints) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, hints)
}
