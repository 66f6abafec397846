//! Dataset handling: CSV ingestion for the standard density-estimation
//! benchmark layout, per-sample weights, and softening configuration.

use crate::error::{Error, Result};
use std::path::{Path, PathBuf};

/// A categorical sample matrix with per-sample weights.
///
/// Values are stored column-major so the leaf kernels stream one variable at
/// a time. An optional softening factor β marks the dataset as implicitly
/// softened: downstream passes replace hard indicator lookups with the
/// softened leaf weights. The softened dataset itself is never materialized.
#[derive(Clone, Debug)]
pub struct WeightedDataset {
    cols: Vec<u8>,
    num_samples: usize,
    num_vars: usize,
    weights: Vec<f64>,
    var_arity: Vec<u32>,
    softening: Option<f64>,
}

impl WeightedDataset {
    /// Builds a dataset from row-major samples with unit weights.
    pub fn from_rows(rows: &[Vec<u8>], var_arity: Vec<u32>) -> Result<Self> {
        let n = rows.len();
        let k = var_arity.len();
        let mut cols = vec![0u8; n * k];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::RaggedRows {
                    line: i + 1,
                    got: row.len(),
                    expected: k,
                });
            }
            for (v, &x) in row.iter().enumerate() {
                if (x as u32) >= var_arity[v] {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("value {x} exceeds arity {} of variable {v}", var_arity[v]),
                    });
                }
                cols[v * n + i] = x;
            }
        }
        Ok(WeightedDataset {
            cols,
            num_samples: n,
            num_vars: k,
            weights: vec![1.0; n],
            var_arity,
            softening: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.num_samples {
            return Err(Error::Config(format!(
                "{} weights for {} samples",
                weights.len(),
                self.num_samples
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.num_samples
    }

    pub fn is_empty(&self) -> bool {
        self.num_samples == 0
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[inline]
    pub fn var_arity(&self) -> &[u32] {
        &self.var_arity
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    #[inline]
    pub fn softening(&self) -> Option<f64> {
        self.softening
    }

    /// Value of variable `var` in sample `row`.
    #[inline(always)]
    pub fn get(&self, row: usize, var: usize) -> u8 {
        self.cols[var * self.num_samples + row]
    }

    /// Column slice for one variable across all samples.
    #[inline]
    pub fn column(&self, var: usize) -> &[u8] {
        &self.cols[var * self.num_samples..(var + 1) * self.num_samples]
    }

    /// Copies the given rows into a new dataset (used for mini-batches).
    pub fn select(&self, rows: &[usize]) -> WeightedDataset {
        let n = rows.len();
        let mut cols = vec![0u8; n * self.num_vars];
        for v in 0..self.num_vars {
            let src = self.column(v);
            let dst = &mut cols[v * n..(v + 1) * n];
            for (j, &r) in rows.iter().enumerate() {
                dst[j] = src[r];
            }
        }
        WeightedDataset {
            cols,
            num_samples: n,
            num_vars: self.num_vars,
            weights: rows.iter().map(|&r| self.weights[r]).collect(),
            var_arity: self.var_arity.clone(),
            softening: self.softening,
        }
    }

    /// Tags the dataset with softening factor β. Samples and weights are
    /// untouched; the softened dataset exists only implicitly. β must exceed
    /// 1/arity for every variable (for booleans: β ∈ (0.5, 1]).
    pub fn soften(mut self, beta: f64) -> Result<Self> {
        for &a in &self.var_arity {
            let lo = 1.0 / a as f64;
            if !(beta > lo && beta <= 1.0) {
                return Err(Error::BetaOutOfRange { beta, lo, arity: a });
            }
        }
        self.softening = Some(beta);
        Ok(self)
    }

    /// Removes the softening tag.
    pub fn harden(mut self) -> Self {
        self.softening = None;
        self
    }

    /// Fingerprint of samples and weights; softening does not change it.
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.cols.hash(&mut h);
        for w in &self.weights {
            w.to_bits().hash(&mut h);
        }
        self.var_arity.hash(&mut h);
        h.finish()
    }
}

/// Loads a CSV of comma-separated integers, one sample per row.
///
/// Arity resolution order: explicit hint, a `<path>.meta` sidecar holding
/// one comma-separated arity per variable, then inference (per-column max
/// value + 1, at least 2).
pub fn load_csv(path: impl AsRef<Path>, arity_hint: Option<&[u32]>) -> Result<WeightedDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(width.unwrap_or(16));
        for (col, cell) in line.split(',').enumerate() {
            let v: u32 = cell.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("column {col}: `{cell}` is not a non-negative integer"),
            })?;
            if v > u8::MAX as u32 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("column {col}: value {v} exceeds the supported arity"),
                });
            }
            row.push(v as u8);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::RaggedRows {
                    line: i + 1,
                    got: row.len(),
                    expected: w,
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let k = width.unwrap_or(0);

    let arity = if let Some(hint) = arity_hint {
        if hint.len() != k {
            return Err(Error::Config(format!(
                "arity hint has {} entries for {k} columns",
                hint.len()
            )));
        }
        hint.to_vec()
    } else if let Some(meta) = read_meta(path)? {
        if meta.len() != k {
            return Err(Error::Config(format!(
                "meta sidecar has {} arities for {k} columns",
                meta.len()
            )));
        }
        meta
    } else {
        let mut arity = vec![2u32; k];
        for row in &rows {
            for (v, &x) in row.iter().enumerate() {
                arity[v] = arity[v].max(x as u32 + 1);
            }
        }
        arity
    };

    WeightedDataset::from_rows(&rows, arity)
}

fn read_meta(path: &Path) -> Result<Option<Vec<u32>>> {
    let mut meta_path: PathBuf = path.to_path_buf();
    let mut name = meta_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".meta");
    meta_path.set_file_name(name);
    if !meta_path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&meta_path)?;
    let arities: std::result::Result<Vec<u32>, _> = text
        .split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse())
        .collect();
    match arities {
        Ok(a) => Ok(Some(a)),
        Err(_) => Err(Error::Parse {
            line: 1,
            message: format!("invalid arity list in {}", meta_path.display()),
        }),
    }
}

/// Train/valid/test splits of one benchmark dataset.
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub name: String,
    pub train: WeightedDataset,
    pub valid: WeightedDataset,
    pub test: WeightedDataset,
}

impl DatasetBundle {
    pub fn num_vars(&self) -> usize {
        self.train.num_vars()
    }
}

/// Loads `<dir>/<name>.train.data`, `.valid.data`, and `.test.data`,
/// unifying the per-variable arities across the three splits.
pub fn load_bundle(dir: impl AsRef<Path>, name: &str) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let path = |split: &str| dir.join(format!("{name}.{split}.data"));
    let mut splits = Vec::with_capacity(3);
    for split in ["train", "valid", "test"] {
        let p = path(split);
        if !p.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("dataset split not found: {}", p.display()),
            )));
        }
        splits.push(load_csv(&p, None)?);
    }
    let k = splits[0].num_vars();
    for s in &splits[1..] {
        if s.num_vars() != k {
            return Err(Error::Config(format!(
                "splits of `{name}` disagree on the variable count"
            )));
        }
    }
    // inferred arities can differ between splits; take the pointwise max
    let arity: Vec<u32> = (0..k)
        .map(|v| splits.iter().map(|s| s.var_arity()[v]).max().unwrap())
        .collect();
    for s in &mut splits {
        s.var_arity = arity.clone();
    }
    let test = splits.pop().unwrap();
    let valid = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(DatasetBundle {
        name: name.to_string(),
        train,
        valid,
        test,
    })
}

/// Degree of overfitting: (LL_val − LL_train) / LL_val.
pub fn overfit_degree(train_ll: f64, valid_ll: f64) -> f64 {
    (valid_ll - train_ll) / valid_ll
}
