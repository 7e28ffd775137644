//! Feature and performance tables and their CSV forms.
//!
//! Lines starting with `#` are comments (used for provenance) and skipped.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::metacommunity::{FeatureVector, FEATURE_NAMES};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<(String, FeatureVector)>,
}

impl FeatureTable {
    pub fn push(&mut self, id: impl Into<String>, features: FeatureVector) {
        self.rows.push((id.into(), features));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(std::iter::once("subset_id").chain(FEATURE_NAMES.iter().copied()))?;
        for (id, f) in &self.rows {
            let mut rec = vec![id.clone()];
            rec.extend(f.values().iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let headers = r.headers()?.clone();
        let expected: Vec<&str> = std::iter::once("subset_id").chain(FEATURE_NAMES.iter().copied()).collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Integrity("feature table header does not match the 30 canonical features".into()));
        }
        let mut table = Self::default();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let mut values = [0.0; 30];
            for (j, v) in values.iter_mut().enumerate() {
                *v = rec[j + 1].trim().parse().map_err(|_| {
                    Error::Integrity(format!("feature table row {}: bad `{}` value", k + 1, FEATURE_NAMES[j]))
                })?;
            }
            table.push(rec[0].to_string(), FeatureVector::from_values(values)?);
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub subset_id: String,
    pub acc: f64,
    pub bacc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerformanceTable {
    pub rows: Vec<PerformanceRow>,
}

impl PerformanceTable {
    pub fn push(&mut self, row: PerformanceRow) -> Result<()> {
        for (name, v) in [("acc", Some(row.acc)), ("bacc", Some(row.bacc)), ("auc", row.auc)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(validation(format!("{name} for `{}` is {v}, outside [0, 1]", row.subset_id)));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let with_auc = !self.rows.is_empty() && self.rows.iter().all(|r| r.auc.is_some());
        let mut w = csv::Writer::from_writer(out);
        if with_auc {
            w.write_record(["subset_id", "acc", "bacc", "auc"])?;
        } else {
            w.write_record(["subset_id", "acc", "bacc"])?;
        }
        for r in &self.rows {
            let mut rec = vec![r.subset_id.clone(), format!("{:?}", r.acc), format!("{:?}", r.bacc)];
            if with_auc {
                rec.push(format!("{:?}", r.auc.expect("checked")));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
        let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if headers.len() < 3 || headers[..3] != ["subset_id", "acc", "bacc"] {
            return Err(Error::Integrity("performance table header must be `subset_id,acc,bacc[,auc]`".into()));
        }
        let mut table = Self::default();
        for rec in r.deserialize::<PerformanceRow>() {
            table.push(rec?)?;
        }
        Ok(table)
    }
}
