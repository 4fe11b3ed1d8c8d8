//! Class-size trial data turned into a trial plus a confounded observational
//! sample.
//!
//! Rural students are split in half: one half is the trial, the other half
//! joins every urban student in the observational set. Within each location,
//! treated observational students scoring strictly above that location's
//! treated median are removed, and location is then dropped from the
//! covariates, so the induced confounding is unmeasured.
//!
//! Input is a CSV with the columns in [`COLUMNS`]:
//!
//! | column | content |
//! |---|---|
//! | `location` | `rural` or `urban` |
//! | `treatment` | `1`/`regular` for a regular class, `0`/`small` for a small class |
//! | `outcome` | average test score |
//! | `gender`, `race`, `teacher_id`, `free_lunch` | categorical, one-hot encoded |
//! | `birth_date` | `YYYY-MM-DD`, encoded as days since 1970-01-01 |

use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;

use crate::data::{one_hot, Dataset, Matrix, RawTable};
use crate::error::{Error, Result};
use crate::rng::{stream, NormalSampler, Role};

pub const COLUMNS: [&str; 8] = [
    "location",
    "treatment",
    "outcome",
    "gender",
    "race",
    "birth_date",
    "teacher_id",
    "free_lunch",
];

const CATEGORICAL: [&str; 4] = ["gender", "race", "teacher_id", "free_lunch"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    Rural,
    Urban,
}

impl Location {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rural => "rural",
            Self::Urban => "urban",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarRecord {
    pub location: Location,
    /// 1 for a regular class, 0 for a small class.
    pub treatment: u8,
    pub outcome: f64,
    pub gender: String,
    pub race: String,
    pub birth_date: NaiveDate,
    pub teacher_id: String,
    pub free_lunch: String,
}

impl StarRecord {
    fn categorical(&self, column: &str) -> &str {
        match column {
            "gender" => &self.gender,
            "race" => &self.race,
            "teacher_id" => &self.teacher_id,
            "free_lunch" => &self.free_lunch,
            _ => unreachable!("not a categorical column: {column}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarRaw {
    pub records: Vec<StarRecord>,
}

fn parse_err(row: usize, column: &str, value: &str) -> Error {
    Error::Parse {
        row,
        column: column.into(),
        value: value.into(),
    }
}

impl StarRaw {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_table(&RawTable::read(path)?)
    }

    pub fn from_table(table: &RawTable) -> Result<Self> {
        let idx: Vec<usize> = COLUMNS
            .iter()
            .map(|c| table.column_index(c))
            .collect::<Result<_>>()?;
        let mut records = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            let cell = |k: usize| row[idx[k]].as_str();
            let location = match cell(0).to_ascii_lowercase().as_str() {
                "rural" => Location::Rural,
                "urban" => Location::Urban,
                _ => return Err(parse_err(i, COLUMNS[0], cell(0))),
            };
            let treatment = match cell(1).to_ascii_lowercase().as_str() {
                "1" | "regular" => 1,
                "0" | "small" => 0,
                _ => return Err(parse_err(i, COLUMNS[1], cell(1))),
            };
            let outcome: f64 = cell(2)
                .parse()
                .map_err(|_| parse_err(i, COLUMNS[2], cell(2)))?;
            if !outcome.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    field: "outcome",
                });
            }
            let birth_date = NaiveDate::parse_from_str(cell(5), "%Y-%m-%d")
                .map_err(|_| parse_err(i, COLUMNS[5], cell(5)))?;
            records.push(StarRecord {
                location,
                treatment,
                outcome,
                gender: cell(3).into(),
                race: cell(4).into(),
                birth_date,
                teacher_id: cell(6).into(),
                free_lunch: cell(7).into(),
            });
        }
        if records.is_empty() {
            return Err(Error::Empty("STAR table has no rows".into()));
        }
        Ok(Self { records })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.location.as_str(),
                &r.treatment.to_string(),
                &r.outcome.to_string(),
                &r.gender,
                &r.race,
                &r.birth_date.format("%Y-%m-%d").to_string(),
                &r.teacher_id,
                &r.free_lunch,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn count(&self, location: Location) -> usize {
        self.records
            .iter()
            .filter(|r| r.location == location)
            .count()
    }

    /// Covariate matrix over every record: birth date first, then the
    /// one-hot blocks in [`CATEGORICAL`] order.
    pub fn encode(&self) -> (Matrix, Vec<String>) {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        let mut names = vec!["birth_date".to_string()];
        let mut blocks = Vec::new();
        for c in CATEGORICAL {
            let values: Vec<&str> = self.records.iter().map(|r| r.categorical(c)).collect();
            let (level_names, rows) = one_hot(&values, c);
            names.extend(level_names);
            blocks.push(rows);
        }
        let d = names.len();
        let mut x = Matrix::zeros(self.records.len(), d);
        for (i, r) in self.records.iter().enumerate() {
            let row = x.row_mut(i);
            row[0] = (r.birth_date - epoch).num_days() as f64;
            let mut j = 1;
            for b in &blocks {
                row[j..j + b[i].len()].copy_from_slice(&b[i]);
                j += b[i].len();
            }
        }
        (x, names)
    }
}

/// Trial and observational datasets built from one extract.
#[derive(Debug, Clone)]
pub struct StarPartition {
    pub trial: Dataset,
    pub external: Dataset,
    /// Raw record indices of the trial rows, in dataset order.
    pub trial_records: Vec<usize>,
    /// Raw record indices of the external rows, in dataset order.
    pub external_records: Vec<usize>,
    /// Raw record indices removed by the median rule.
    pub removed: Vec<usize>,
}

impl StarPartition {
    pub fn dim(&self) -> usize {
        self.trial.d()
    }

    pub fn dropped(&self) -> usize {
        self.removed.len()
    }

    /// Centres and scales the birth-date column by its mean and standard
    /// deviation over both datasets. Day counts near 4000 otherwise dominate
    /// ridge penalties.
    pub fn standardized(mut self) -> Self {
        let values: Vec<f64> = self
            .trial
            .x
            .column(0)
            .into_iter()
            .chain(self.external.x.column(0))
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for ds in [&mut self.trial, &mut self.external] {
            for i in 0..ds.n() {
                let v = ds.x.get(i, 0);
                ds.x.set(i, 0, (v - mean) / sd);
            }
        }
        self
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Builds the partition. `trial_propensity` is written into the `e` column of
/// both datasets.
pub fn build_star_partition(
    raw: &StarRaw,
    seed: u64,
    trial_propensity: f64,
) -> Result<StarPartition> {
    if !(trial_propensity > 0.0 && trial_propensity < 1.0) {
        return Err(Error::Config(format!(
            "trial propensity {trial_propensity} outside (0, 1)"
        )));
    }
    for loc in [Location::Rural, Location::Urban] {
        for a in [0u8, 1u8] {
            if !raw
                .records
                .iter()
                .any(|r| r.location == loc && r.treatment == a)
            {
                return Err(Error::EmptyArm {
                    arm: a,
                    context: format!("{} records", loc.as_str()),
                });
            }
        }
    }
    let mut rural: Vec<usize> = (0..raw.records.len())
        .filter(|&i| raw.records[i].location == Location::Rural)
        .collect();
    rural.shuffle(&mut stream(seed, 0, Role::Partition, 0));
    let half = rural.len() / 2;
    let mut trial_records = rural[..half].to_vec();
    trial_records.sort_unstable();
    let mut observational: Vec<usize> = rural[half..].to_vec();
    observational
        .extend((0..raw.records.len()).filter(|&i| raw.records[i].location == Location::Urban));
    observational.sort_unstable();

    let mut removed = Vec::new();
    for loc in [Location::Rural, Location::Urban] {
        let treated: Vec<usize> = observational
            .iter()
            .copied()
            .filter(|&i| raw.records[i].location == loc && raw.records[i].treatment == 1)
            .collect();
        if treated.is_empty() {
            return Err(Error::EmptyArm {
                arm: 1,
                context: format!("observational {} stratum", loc.as_str()),
            });
        }
        let mut scores: Vec<f64> = treated.iter().map(|&i| raw.records[i].outcome).collect();
        let m = median(&mut scores);
        removed.extend(treated.into_iter().filter(|&i| raw.records[i].outcome > m));
    }
    removed.sort_unstable();
    let external_records: Vec<usize> = observational
        .into_iter()
        .filter(|i| removed.binary_search(i).is_err())
        .collect();

    let (x, names) = raw.encode();
    let build = |rows: &[usize], s: u8| -> Result<Dataset> {
        let n = rows.len();
        Dataset::new(
            x.select_rows(rows),
            vec![s; n],
            rows.iter().map(|&i| raw.records[i].treatment).collect(),
            rows.iter().map(|&i| raw.records[i].outcome).collect(),
            vec![trial_propensity; n],
        )?
        .with_feature_names(names.clone())
    };
    Ok(StarPartition {
        trial: build(&trial_records, 1)?,
        external: build(&external_records, 0)?,
        trial_records,
        external_records,
        removed,
    })
}

/// Without-replacement subsamples of sizes `n1` and `n0`.
///
/// Each side is a prefix of its own seeded permutation, so for a fixed seed
/// and replication the trial subsample does not depend on `n0` and growing
/// `n0` only adds external rows.
pub fn subsample(
    partition: &StarPartition,
    n1: usize,
    n0: usize,
    seed: u64,
    replication: u64,
) -> Result<(Dataset, Dataset)> {
    let pick = |ds: &Dataset, n: usize, tag: u64, what: &str| -> Result<Dataset> {
        if n > ds.n() {
            return Err(Error::Config(format!(
                "requested {n} {what} rows, {} available",
                ds.n()
            )));
        }
        let mut idx: Vec<usize> = (0..ds.n()).collect();
        idx.shuffle(&mut stream(seed, replication, Role::Subsample, tag));
        Ok(ds.subset(&idx[..n]))
    };
    Ok((
        pick(&partition.trial, n1, 1, "trial")?,
        pick(&partition.external, n0, 0, "external")?,
    ))
}

/// Knobs of [`synthetic_star`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticStar {
    pub n_rural: usize,
    pub n_urban: usize,
    /// Size of the teacher pool. Teachers are not tied to a location, so the
    /// covariates carry no trace of it.
    pub teachers: usize,
    pub seed: u64,
}

impl Default for SyntheticStar {
    fn default() -> Self {
        Self {
            n_rural: 2811,
            n_urban: 1407,
            teachers: 12,
            seed: 0,
        }
    }
}

/// A STAR-shaped extract with randomized class size, a location effect and an
/// effect that differs by location. Outcomes are on a standardized scale.
pub fn synthetic_star(cfg: &SyntheticStar) -> Result<StarRaw> {
    if cfg.n_rural < 4 || cfg.n_urban < 2 || cfg.teachers == 0 {
        return Err(Error::Config("synthetic extract too small".into()));
    }
    let mut rng = NormalSampler::new(stream(cfg.seed, 0, Role::Fixture, 0));
    let teacher_effect: Vec<f64> = (0..cfg.teachers).map(|_| 0.3 * rng.sample()).collect();
    let start = NaiveDate::from_ymd_opt(1979, 9, 1).expect("valid date");
    let mut records = Vec::with_capacity(cfg.n_rural + cfg.n_urban);
    for i in 0..cfg.n_rural + cfg.n_urban {
        let location = if i < cfg.n_rural {
            Location::Rural
        } else {
            Location::Urban
        };
        let urban = f64::from(u8::from(location == Location::Urban));
        let teacher = (rng.uniform() * cfg.teachers as f64) as usize % cfg.teachers;
        let female = rng.uniform() < 0.5;
        let u = rng.uniform();
        let race = if u < 0.6 {
            "white"
        } else if u < 0.95 {
            "black"
        } else {
            "other"
        };
        let lunch = rng.uniform() < 0.4 + 0.2 * urban;
        let age_days = (rng.uniform() * 365.0) as i64;
        let treatment = u8::from(rng.uniform() < 0.5);
        let age_z = (age_days as f64 - 182.5) / 105.0;
        let base =
            0.2 * f64::from(u8::from(female)) - 0.4 * f64::from(u8::from(lunch)) - 0.1 * age_z
                + 0.3 * urban
                + teacher_effect[teacher];
        let tau = 0.3 + 0.2 * f64::from(u8::from(female))
            - 0.2 * f64::from(u8::from(lunch))
            - 0.4 * urban;
        let outcome = base + f64::from(treatment) * tau + 0.8 * rng.sample();
        records.push(StarRecord {
            location,
            treatment,
            outcome,
            gender: if female { "female" } else { "male" }.into(),
            race: race.into(),
            birth_date: start + chrono::Duration::days(age_days),
            teacher_id: format!("t{teacher:03}"),
            free_lunch: if lunch { "yes" } else { "no" }.into(),
        });
    }
    Ok(StarRaw { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(location: Location, treatment: u8, outcome: f64) -> StarRecord {
        StarRecord {
            location,
            treatment,
            outcome,
            gender: "female".into(),
            race: "white".into(),
            birth_date: NaiveDate::from_ymd_opt(1980, 1, 1).unwrap(),
            teacher_id: "t1".into(),
            free_lunch: "no".into(),
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn birth_date_is_days_since_epoch() {
        let raw = StarRaw {
            records: vec![record(Location::Rural, 1, 0.0)],
        };
        let (x, names) = raw.encode();
        assert_eq!(x.get(0, 0), 3652.0);
        assert_eq!(names[0], "birth_date");
    }

    #[test]
    fn synthetic_extract_has_requested_shape() {
        let raw = synthetic_star(&SyntheticStar::default()).unwrap();
        assert_eq!(raw.count(Location::Rural), 2811);
        assert_eq!(raw.count(Location::Urban), 1407);
    }
}
