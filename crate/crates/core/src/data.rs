//! Case-level datasets: one row of (outcome, treatment, optional confounders)
//! per independent case, plus the CSV format shared by every tool.
//!
//! CSV layout: `case_id,y_<label>...,a` in shared mode or
//! `case_id,y_<label>...,a_<label>...` per node, optionally followed by
//! `c_<label>...`. Outcomes are -1/1, treatments and confounders 0/1.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{Covariates, Outcome, Treatment, TreatmentMode};

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub id: String,
    pub y: Outcome,
    pub a: Treatment,
    pub c: Option<Covariates>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseDataset {
    labels: Vec<String>,
    mode: TreatmentMode,
    has_covariates: bool,
    cases: Vec<Case>,
}

/// A distinct (y, a, c) row and its multiplicity. Treatment masks are
/// broadcast to every node in shared mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedRow {
    pub y: u64,
    pub a: u64,
    pub c: u64,
    pub weight: f64,
}

impl CaseDataset {
    pub fn new(labels: Vec<String>, mode: TreatmentMode, has_covariates: bool, cases: Vec<Case>) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::EmptyDataset("dataset has no rows".into()));
        }
        if labels.len() > 63 {
            return Err(Error::shape("datasets support at most 63 nodes"));
        }
        let n = labels.len();
        for case in &cases {
            if case.y.len() != n {
                return Err(Error::shape(format!("case {} has {} outcomes, expected {n}", case.id, case.y.len())));
            }
            case.a.check(mode, n)?;
            match (&case.c, has_covariates) {
                (Some(c), true) if c.len() == n => {}
                (Some(_), true) => return Err(Error::shape(format!("case {} has wrong covariate length", case.id))),
                (None, false) => {}
                _ => return Err(Error::config(format!("case {} covariate presence mismatch", case.id))),
            }
        }
        Ok(Self { labels, mode, has_covariates, cases })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn mode(&self) -> TreatmentMode {
        self.mode
    }

    pub fn has_covariates(&self) -> bool {
        self.has_covariates
    }

    pub fn cases(&self) -> &[Case] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Rows picked by index, repeats allowed (bootstrap resamples).
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let cases = indices.iter().map(|&i| self.cases[i].clone()).collect();
        Self::new(self.labels.clone(), self.mode, self.has_covariates, cases)
    }

    /// Distinct rows with multiplicities, in a canonical order.
    pub fn weighted_rows(&self) -> Vec<WeightedRow> {
        let n = self.n_nodes();
        let mut counts: BTreeMap<(u64, u64, u64), f64> = BTreeMap::new();
        for case in &self.cases {
            let key = (case.y.mask(), case.a.mask(n), case.c.as_ref().map_or(0, Covariates::mask));
            *counts.entry(key).or_insert(0.0) += 1.0;
        }
        counts.into_iter().map(|((y, a, c), weight)| WeightedRow { y, a, c, weight }).collect()
    }

    /// Empirical distribution of the covariate vectors, as (mask, weight).
    pub fn covariate_frequencies(&self) -> Vec<(u64, f64)> {
        let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
        for case in &self.cases {
            if let Some(c) = &case.c {
                *counts.entry(c.mask()).or_insert(0.0) += 1.0;
            }
        }
        let total: f64 = counts.values().sum();
        counts.into_iter().map(|(m, w)| (m, w / total)).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["case_id".to_string()];
        header.extend(self.labels.iter().map(|l| format!("y_{l}")));
        match self.mode {
            TreatmentMode::Shared => header.push("a".into()),
            TreatmentMode::PerNode => header.extend(self.labels.iter().map(|l| format!("a_{l}"))),
        }
        if self.has_covariates {
            header.extend(self.labels.iter().map(|l| format!("c_{l}")));
        }
        out.write_record(&header)?;
        let n = self.n_nodes();
        for case in &self.cases {
            let mut rec = vec![case.id.clone()];
            rec.extend(case.y.values().iter().map(|v| v.to_string()));
            match &case.a {
                Treatment::Shared(a) => rec.push(a.to_string()),
                Treatment::PerNode(v) => rec.extend(v.iter().map(|x| x.to_string())),
            }
            if let Some(c) = &case.c {
                rec.extend(c.values().iter().map(|x| x.to_string()));
            }
            debug_assert!(rec.len() == header.len() || n == 0);
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let pos = |name: &str| header.iter().position(|h| h == name);
        let id_col = pos("case_id").ok_or_else(|| Error::Schema(vec!["case_id".into()]))?;
        let y_cols: Vec<(usize, String)> =
            header.iter().enumerate().filter_map(|(i, h)| h.strip_prefix("y_").map(|l| (i, l.to_string()))).collect();
        if y_cols.is_empty() {
            return Err(Error::Schema(vec!["y_<label>".into()]));
        }
        let labels: Vec<String> = y_cols.iter().map(|(_, l)| l.clone()).collect();
        let lookup_all =
            |prefix: &str| -> Option<Vec<usize>> { labels.iter().map(|l| pos(&format!("{prefix}{l}"))).collect() };
        let (mode, a_cols) = if let Some(i) = pos("a") {
            (TreatmentMode::Shared, vec![i])
        } else if let Some(cols) = lookup_all("a_") {
            (TreatmentMode::PerNode, cols)
        } else {
            return Err(Error::Schema(vec!["a or a_<label>".into()]));
        };
        let c_cols = lookup_all("c_");
        let mut cases = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<i64> {
                rec.get(i)
                    .unwrap_or("")
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("row {}: column {} is not an integer", line + 1, header[i])))
            };
            let y = y_cols.iter().map(|&(i, _)| field(i).map(|v| v as i8)).collect::<Result<Vec<_>>>()?;
            let a_vals = a_cols.iter().map(|&i| field(i).and_then(|v| to_bit(v, line))).collect::<Result<Vec<_>>>()?;
            let a = match mode {
                TreatmentMode::Shared => Treatment::shared(a_vals[0])?,
                TreatmentMode::PerNode => Treatment::per_node(a_vals)?,
            };
            let c = match &c_cols {
                Some(cols) => Some(Covariates::new(
                    cols.iter().map(|&i| field(i).and_then(|v| to_bit(v, line))).collect::<Result<Vec<_>>>()?,
                )?),
                None => None,
            };
            cases.push(Case { id: rec.get(id_col).unwrap_or("").to_string(), y: Outcome::new(y)?, a, c });
        }
        Self::new(labels, mode, c_cols.is_some(), cases)
    }
}

fn to_bit(v: i64, line: usize) -> Result<u8> {
    match v {
        0 | 1 => Ok(v as u8),
        _ => Err(Error::Parse(format!("row {}: expected 0 or 1, got {v}", line + 1))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CaseDataset {
        let labels = vec!["O'Connor".to_string(), "b".to_string()];
        let cases = vec![
            Case {
                id: "1".into(),
                y: Outcome::new(vec![1, -1]).unwrap(),
                a: Treatment::PerNode(vec![1, 0]),
                c: Some(Covariates::new(vec![0, 1]).unwrap()),
            },
            Case {
                id: "2".into(),
                y: Outcome::new(vec![1, -1]).unwrap(),
                a: Treatment::PerNode(vec![1, 0]),
                c: Some(Covariates::new(vec![0, 1]).unwrap()),
            },
        ];
        CaseDataset::new(labels, TreatmentMode::PerNode, true, cases).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let d = sample();
        let text = d.to_csv_string();
        assert!(text.starts_with("case_id,y_O'Connor,y_b,a_O'Connor,a_b,c_O'Connor,c_b\n"));
        let back = CaseDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn shared_mode_csv() {
        let text = "case_id,y_x,y_z,a\n7,1,-1,1\n8,-1,-1,0\n";
        let d = CaseDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.mode(), TreatmentMode::Shared);
        assert_eq!(d.cases()[0].a, Treatment::Shared(1));
        assert_eq!(d.to_csv_string(), text);
    }

    #[test]
    fn rejects_bad_values_and_missing_columns() {
        assert!(CaseDataset::read_csv("case_id,y_x,a\n1,0,1\n".as_bytes()).is_err());
        assert!(CaseDataset::read_csv("case_id,y_x,a\n1,1,2\n".as_bytes()).is_err());
        assert!(matches!(CaseDataset::read_csv("case_id,y_x\n1,1\n".as_bytes()), Err(Error::Schema(_))));
        assert!(matches!(CaseDataset::read_csv("case_id,y_x,a\n".as_bytes()), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn weighted_rows_collapse_duplicates() {
        let rows = sample().weighted_rows();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].weight, 2.0);
        assert_eq!(rows[0].y, 0b01);
        assert_eq!(rows[0].c, 0b10);
    }
}
