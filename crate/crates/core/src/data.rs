//! Fused trial + external dataset, fold planning and CSV ingestion.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Role};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            nrows: rows.len(),
            ncols,
            data,
        })
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            nrows: values.len(),
            ncols: 1,
            data: values.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on zero width
        (0..self.nrows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.ncols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            nrows: idx.len(),
            ncols: self.ncols,
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for i in 0..self.nrows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Self {
            nrows: self.nrows,
            ncols: cols.len(),
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Self> {
        if self.ncols != other.ncols && self.nrows > 0 && other.nrows > 0 {
            return Err(Error::Dimension(format!(
                "cannot stack {} and {} columns",
                self.ncols, other.ncols
            )));
        }
        let ncols = if self.nrows > 0 {
            self.ncols
        } else {
            other.ncols
        };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            nrows: self.nrows + other.nrows,
            ncols,
            data,
        })
    }
}

/// Trial rows (`s = 1`) and external rows (`s = 0`) in one table.
///
/// `e` holds the trial randomization probability `Pr(A=1 | X, S=1)`
/// evaluated at each row's covariates. It must be valid on trial rows; on
/// external rows it is only read by losses that need the trial design
/// evaluated at external covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub s: Vec<u8>,
    pub a: Vec<u8>,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Builds and validates a dataset. Feature names default to `x0, x1, ...`.
    pub fn new(x: Matrix, s: Vec<u8>, a: Vec<u8>, y: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        let feature_names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        let ds = Self {
            x,
            s,
            a,
            y,
            e,
            feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.ncols() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} columns",
                names.len(),
                self.x.ncols()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Checks every structural invariant, reporting the first offending row.
    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if self.x.ncols() == 0 {
            return Err(Error::Dimension("no covariate columns".into()));
        }
        for (name, len) in [
            ("x", self.x.nrows()),
            ("s", self.s.len()),
            ("a", self.a.len()),
            ("e", self.e.len()),
        ] {
            if len != n {
                return Err(Error::Dimension(format!(
                    "{name} has {len} rows, y has {n}"
                )));
            }
        }
        if self.feature_names.len() != self.x.ncols() {
            return Err(Error::Dimension("feature name count".into()));
        }
        for i in 0..n {
            if self.s[i] > 1 {
                return Err(Error::NotBinary {
                    row: i,
                    field: "s",
                    value: f64::from(self.s[i]),
                });
            }
            if self.a[i] > 1 {
                return Err(Error::NotBinary {
                    row: i,
                    field: "a",
                    value: f64::from(self.a[i]),
                });
            }
            if !self.y[i].is_finite() {
                return Err(Error::NonFinite { row: i, field: "y" });
            }
            if self.x.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, field: "x" });
            }
            if self.s[i] == 1 {
                let e = self.e[i];
                if !(e > 0.0 && e < 1.0) {
                    return Err(Error::Propensity { row: i, value: e });
                }
            }
        }
        Ok(())
    }

    /// Copies the selected rows, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            s: idx.iter().map(|&i| self.s[i]).collect(),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            e: idx.iter().map(|&i| self.e[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Row indices matching an optional source and an optional arm.
    pub fn rows_where(&self, s: Option<u8>, a: Option<u8>) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| s.is_none_or(|v| self.s[i] == v) && a.is_none_or(|v| self.a[i] == v))
            .collect()
    }

    pub fn trial_rows(&self) -> Vec<usize> {
        self.rows_where(Some(1), None)
    }

    pub fn external_rows(&self) -> Vec<usize> {
        self.rows_where(Some(0), None)
    }

    pub fn trial_only(&self) -> Dataset {
        self.subset(&self.trial_rows())
    }

    pub fn n_trial(&self) -> usize {
        self.s.iter().filter(|&&s| s == 1).count()
    }

    /// Appends `other` below `self`. Feature names are taken from `self`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.d() != other.d() {
            return Err(Error::Dimension(format!(
                "cannot concatenate {} and {} covariates",
                self.d(),
                other.d()
            )));
        }
        let cat = |a: &[u8], b: &[u8]| a.iter().chain(b).copied().collect::<Vec<u8>>();
        let catf = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<f64>>();
        Ok(Dataset {
            x: self.x.vstack(&other.x)?,
            s: cat(&self.s, &other.s),
            a: cat(&self.a, &other.a),
            y: catf(&self.y, &other.y),
            e: catf(&self.e, &other.e),
            feature_names: self.feature_names.clone(),
        })
    }

    /// Writes covariates followed by `s,a,y,e` with round-trip float formatting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let mut header: Vec<String> = self.feature_names.clone();
        header.extend(["s", "a", "y", "e"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.s[i].to_string());
            rec.push(self.a[i].to_string());
            rec.push(self.y[i].to_string());
            rec.push(self.e[i].to_string());
            w.write_record(&rec)?;
        }
        Ok(())
    }

    /// Schema matching the layout produced by [`Dataset::write_csv`].
    pub fn csv_schema(&self) -> CsvSchema {
        CsvSchema {
            covariates: self.feature_names.clone(),
            categorical: Vec::new(),
            source: Field::Column("s".into()),
            treatment: "a".into(),
            outcome: "y".into(),
            propensity: Field::Column("e".into()),
        }
    }
}

/// Stratified-by-source assignment of rows to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub assignments: Vec<usize>,
    pub k: usize,
}

impl FoldPlan {
    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rows outside `fold`.
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Folds stratified by source.
///
/// Within each non-empty stratum the rows are shuffled by a stream keyed on
/// `(seed, stratum)` and dealt round-robin, so the plan depends only on the
/// source sequence and the seed.
pub fn make_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    make_folds_for_sources(&ds.s, k, seed)
}

pub fn make_folds_for_sources(s: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be >= 2, got {k}")));
    }
    let mut assignments = vec![usize::MAX; s.len()];
    let mut offset = 0usize;
    for stratum in [1u8, 0u8] {
        let mut rows: Vec<usize> = (0..s.len()).filter(|&i| s[i] == stratum).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < k {
            return Err(Error::StratumTooSmall {
                stratum,
                size: rows.len(),
                k,
            });
        }
        let mut rng = rng::stream(seed, 0, Role::Folds, u64::from(stratum));
        rows.shuffle(&mut rng);
        for (pos, &i) in rows.iter().enumerate() {
            assignments[i] = (offset + pos) % k;
        }
        offset = (offset + rows.len()) % k;
    }
    if assignments.contains(&usize::MAX) {
        return Err(Error::Dimension(
            "source vector contains non-binary values".into(),
        ));
    }
    Ok(FoldPlan { assignments, k })
}

/// A value read from a named column or fixed for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field<T> {
    Column(String),
    Constant(T),
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    /// Numeric covariates, in output order.
    pub covariates: Vec<String>,
    /// Categorical covariates, one-hot encoded after the numeric ones.
    #[serde(default)]
    pub categorical: Vec<String>,
    pub source: Field<u8>,
    pub treatment: String,
    pub outcome: String,
    pub propensity: Field<f64>,
}

/// Header plus raw string cells of a CSV file.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let headers = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(Self { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| parse_f64(&r[j], i, name))
            .collect()
    }
}

fn parse_f64(cell: &str, row: usize, column: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })
}

fn parse_binary(cell: &str, row: usize, column: &str, field: &'static str) -> Result<u8> {
    let v = parse_f64(cell, row, column)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::NotBinary {
            row,
            field,
            value: v,
        })
    }
}

/// Expands categorical columns into indicator columns named `col=level`,
/// levels in lexicographic order, no reference level dropped.
pub fn one_hot(values: &[&str], column: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let levels: BTreeSet<&str> = values.iter().copied().collect();
    let index: HashMap<&str, usize> = levels.iter().enumerate().map(|(j, &l)| (l, j)).collect();
    let names = levels.iter().map(|l| format!("{column}={l}")).collect();
    let rows = values
        .iter()
        .map(|v| {
            let mut r = vec![0.0; levels.len()];
            r[index[v]] = 1.0;
            r
        })
        .collect();
    (names, rows)
}

/// Reads a CSV into a validated [`Dataset`]. Row numbers in errors count data
/// rows from 0 (the header is not counted).
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let table = RawTable::read(path)?;
    dataset_from_table(&table, schema)
}

pub fn dataset_from_table(table: &RawTable, schema: &CsvSchema) -> Result<Dataset> {
    // resolve every column first so a missing one is reported before parsing
    let mut required: Vec<&str> = schema.covariates.iter().map(String::as_str).collect();
    required.extend(schema.categorical.iter().map(String::as_str));
    required.push(&schema.treatment);
    required.push(&schema.outcome);
    if let Field::Column(c) = &schema.source {
        required.push(c);
    }
    if let Field::Column(c) = &schema.propensity {
        required.push(c);
    }
    for name in &required {
        table.column_index(name)?;
    }

    let n = table.rows.len();
    let mut names: Vec<String> = schema.covariates.clone();
    let mut columns: Vec<Vec<f64>> = schema
        .covariates
        .iter()
        .map(|c| table.numeric_column(c))
        .collect::<Result<_>>()?;
    for c in &schema.categorical {
        let (level_names, rows) = one_hot(&table.column(c)?, c);
        for (j, name) in level_names.into_iter().enumerate() {
            names.push(name);
            columns.push(rows.iter().map(|r| r[j]).collect());
        }
    }
    let d = columns.len();
    let mut x = Matrix::zeros(n, d);
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            x.set(i, j, v);
        }
    }

    let a_col = table.column_index(&schema.treatment)?;
    let a = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| parse_binary(&r[a_col], i, &schema.treatment, "a"))
        .collect::<Result<Vec<_>>>()?;
    let y = table.numeric_column(&schema.outcome)?;
    let s = match &schema.source {
        Field::Column(c) => {
            let j = table.column_index(c)?;
            table
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| parse_binary(&r[j], i, c, "s"))
                .collect::<Result<Vec<_>>>()?
        }
        Field::Constant(v) => vec![*v; n],
    };
    let e = match &schema.propensity {
        Field::Column(c) => table.numeric_column(c)?,
        Field::Constant(v) => vec![*v; n],
    };
    Dataset::new(x, s, a, y, e)?.with_feature_names(names)
}

/// Rebuilds the feature matrix of a fitted dataset from another table, for
/// prediction. `names` are the fitted feature names; an indicator `col=level`
/// whose `col` is in `categorical` is recomputed from the raw cell, so levels
/// unseen at fit time give an all-zero block.
pub fn features_from_table(
    table: &RawTable,
    names: &[String],
    categorical: &[String],
) -> Result<Matrix> {
    let mut columns = Vec::with_capacity(names.len());
    for name in names {
        let indicator = name
            .split_once('=')
            .filter(|(col, _)| categorical.iter().any(|c| c == col));
        let col = match indicator {
            Some((col, level)) => table
                .column(col)?
                .iter()
                .map(|v| f64::from(u8::from(*v == level)))
                .collect(),
            None => table.numeric_column(name)?,
        };
        columns.push(col);
    }
    let mut x = Matrix::zeros(table.rows.len(), names.len());
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            x.set(i, j, v);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy(n_trial: usize, n_ext: usize) -> Dataset {
        let n = n_trial + n_ext;
        let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let s = (0..n).map(|i| u8::from(i < n_trial)).collect();
        let a = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new(x, s, a, vec![0.0; n], vec![0.5; n]).unwrap()
    }

    #[test]
    fn validate_accepts_well_formed() {
        toy(1, 1).validate().unwrap();
    }

    #[test]
    fn validate_rejects_zero_propensity_on_trial_row() {
        let mut ds = toy(2, 0);
        ds.e[1] = 0.0;
        assert!(matches!(
            ds.validate(),
            Err(Error::Propensity { row: 1, .. })
        ));
        // external rows may carry anything
        let mut ds = toy(1, 1);
        ds.e[1] = 0.0;
        ds.validate().unwrap();
    }

    #[test]
    fn validate_rejects_non_finite_outcome() {
        let mut ds = toy(2, 1);
        ds.y[2] = f64::NAN;
        assert!(matches!(
            ds.validate(),
            Err(Error::NonFinite { row: 2, field: "y" })
        ));
    }

    #[test]
    fn validate_rejects_non_binary_and_mismatch() {
        let mut ds = toy(2, 1);
        ds.a[0] = 2;
        assert!(matches!(
            ds.validate(),
            Err(Error::NotBinary {
                row: 0,
                field: "a",
                ..
            })
        ));
        let mut ds = toy(2, 1);
        ds.y.pop();
        assert!(matches!(ds.validate(), Err(Error::Dimension(_))));
    }

    #[test]
    fn four_rows_two_folds_one_per_stratum() {
        let ds = toy(2, 2);
        let plan = make_folds(&ds, 2, 11).unwrap();
        for f in 0..2 {
            let rows = plan.fold_rows(f);
            assert_eq!(rows.len(), 2);
            assert_eq!(rows.iter().filter(|&&i| ds.s[i] == 1).count(), 1);
        }
        assert_eq!(plan, make_folds(&ds, 2, 11).unwrap());
    }

    #[test]
    fn fifty_fifty_strata_split_evenly() {
        let ds = toy(50, 50);
        for seed in 0..20 {
            let plan = make_folds(&ds, 2, seed).unwrap();
            assert_eq!(plan.fold_sizes(), vec![50, 50]);
            for f in 0..2 {
                let rows = plan.fold_rows(f);
                assert_eq!(rows.iter().filter(|&&i| ds.s[i] == 1).count(), 25);
            }
        }
    }

    #[test]
    fn small_stratum_is_rejected() {
        let ds = toy(3, 1);
        assert!(matches!(
            make_folds(&ds, 2, 0),
            Err(Error::StratumTooSmall {
                stratum: 0,
                size: 1,
                k: 2
            })
        ));
        assert!(make_folds(&ds, 1, 0).is_err());
    }

    fn write_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema(cov: &[&str], cat: &[&str]) -> CsvSchema {
        CsvSchema {
            covariates: cov.iter().map(|s| s.to_string()).collect(),
            categorical: cat.iter().map(|s| s.to_string()).collect(),
            source: Field::Constant(1),
            treatment: "a".into(),
            outcome: "y".into(),
            propensity: Field::Constant(0.5),
        }
    }

    #[test]
    fn load_csv_constant_propensity() {
        let f = write_file("x1,x2,a,y\n1,2,0,0.5\n3,4,1,1.5\n5,6,0,2.5\n");
        let ds = load_csv(f.path(), &schema(&["x1", "x2"], &[])).unwrap();
        assert_eq!(ds.e, vec![0.5; 3]);
        assert_eq!(ds.x.row(2), &[5.0, 6.0]);
        assert_eq!(ds.a, vec![0, 1, 0]);
    }

    #[test]
    fn load_csv_one_hot_is_lexicographic() {
        let f = write_file("g,a,y\nb,0,1\na,1,2\nb,1,3\n");
        let ds = load_csv(f.path(), &schema(&[], &["g"])).unwrap();
        assert_eq!(ds.feature_names, vec!["g=a", "g=b"]);
        assert_eq!(ds.x.row(0), &[0.0, 1.0]);
        assert_eq!(ds.x.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn load_csv_missing_outcome_column() {
        let f = write_file("x1,a\n1,0\n");
        match load_csv(f.path(), &schema(&["x1"], &[])) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_csv_reports_bad_cell() {
        let f = write_file("x1,a,y\n1,0,1\nfoo,1,2\n");
        match load_csv(f.path(), &schema(&["x1"], &[])) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "x1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_csv_missing_file() {
        let err = load_csv(Path::new("/nonexistent/q.csv"), &schema(&["x"], &[])).unwrap_err();
        assert!(matches!(err, Error::FileNotFound(_)));
    }

    #[test]
    fn features_from_table_matches_fitted_layout() {
        let fit = write_file("x1,g,a,y\n1,b,0,1\n2,a,1,2\n");
        let ds = load_csv(fit.path(), &schema(&["x1"], &["g"])).unwrap();
        let new = write_file("g,x1\nc,5\na,6\n");
        let table = RawTable::read(new.path()).unwrap();
        let x = features_from_table(&table, &ds.feature_names, &["g".to_string()]).unwrap();
        assert_eq!(x.row(0), &[5.0, 0.0, 0.0]);
        assert_eq!(x.row(1), &[6.0, 1.0, 0.0]);
        let err = features_from_table(&table, &["x2".to_string()], &[]).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(_)));
    }
}
