//! Supreme Court Database (justice-centered export) ingestion for the
//! nine-justice 1994-2004 court.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::data::{Case, CaseDataset};
use crate::error::{Error, Result};
use crate::model::{Outcome, Treatment, TreatmentMode};
use crate::reference::COURT;

/// SCDB `issueArea` codes and names.
pub const ISSUE_AREAS: [(u8, &str); 14] = [
    (1, "Criminal Procedure"),
    (2, "Civil Rights"),
    (3, "First Amendment"),
    (4, "Due Process"),
    (5, "Privacy"),
    (6, "Attorneys"),
    (7, "Unions"),
    (8, "Economic Activity"),
    (9, "Judicial Power"),
    (10, "Federalism"),
    (11, "Interstate Relations"),
    (12, "Federal Taxation"),
    (13, "Miscellaneous"),
    (14, "Private Action"),
];

/// Number of cases the nine justices decided together over 1994-2004.
pub const REPORTED_CASE_COUNT: usize = 893;

pub const DEFAULT_TERMS: RangeInclusive<i64> = 1994..=2004;

pub const REQUIRED_COLUMNS: [&str; 5] = ["caseId", "term", "justiceName", "direction", "issueArea"];

pub fn issue_name(code: u8) -> Option<&'static str> {
    ISSUE_AREAS.iter().find(|(c, _)| *c == code).map(|(_, n)| *n)
}

fn valid_issue_list() -> String {
    ISSUE_AREAS.iter().map(|(c, n)| format!("{c} {n}")).collect::<Vec<_>>().join(", ")
}

/// The nine labels in canonical order and the SCDB names mapped to them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourtPanel {
    pub labels: Vec<String>,
    /// SCDB `justiceName` -> panel label.
    pub aliases: HashMap<String, String>,
}

impl Default for CourtPanel {
    fn default() -> Self {
        let scdb = [
            "WHRehnquist",
            "JPStevens",
            "SDOConnor",
            "AScalia",
            "AMKennedy",
            "DHSouter",
            "CThomas",
            "RBGinsburg",
            "SGBreyer",
        ];
        Self {
            labels: COURT.iter().map(|s| s.to_string()).collect(),
            aliases: scdb.iter().zip(COURT).map(|(a, l)| (a.to_string(), l.to_string())).collect(),
        }
    }
}

impl CourtPanel {
    fn validate(&self) -> Result<()> {
        let unique: BTreeSet<&String> = self.labels.iter().collect();
        if self.labels.len() != 9 || unique.len() != 9 {
            return Err(Error::config("a court panel has exactly nine distinct labels"));
        }
        if let Some((a, l)) = self.aliases.iter().find(|(_, l)| !self.labels.contains(l)) {
            return Err(Error::config(format!("alias {a:?} maps to unknown label {l:?}")));
        }
        Ok(())
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        let label = self.aliases.get(name).map_or(name, String::as_str);
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CourtCase {
    pub case_id: String,
    pub term: i64,
    pub y: Outcome,
    pub issue: Option<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub case_id: String,
    pub reason: String,
}

/// Complete nine-vote cases with their issue areas.
#[derive(Clone, Debug, PartialEq)]
pub struct CourtDataset {
    pub labels: Vec<String>,
    pub cases: Vec<CourtCase>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Default)]
struct Accumulator {
    terms: BTreeSet<i64>,
    votes: Vec<Vec<Option<i64>>>,
    issues: BTreeSet<i64>,
}

fn parse_opt_int(s: &str) -> Result<Option<i64>> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    t.parse::<i64>().map(Some).or_else(|_| {
        // some exports write integers as 1.0
        t.parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0)
            .map(|v| Some(v as i64))
            .ok_or_else(|| Error::Parse(format!("expected an integer, got {t:?}")))
    })
}

/// Groups vote records by case, keeps cases in `terms` where every panel
/// justice has exactly one direction in {1, 2} (duplicates that agree are
/// tolerated), and codes liberal (2) as +1 and conservative (1) as -1.
pub fn load_cases<R: Read>(source: R, panel: &CourtPanel, terms: RangeInclusive<i64>) -> Result<CourtDataset> {
    panel.validate()?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header: Vec<String> = rdr
        .byte_headers()?
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let missing: Vec<String> =
        REQUIRED_COLUMNS.iter().filter(|c| !header.iter().any(|h| h == *c)).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::Schema(missing));
    }
    let col = |name: &str| header.iter().position(|h| h == name).expect("checked");
    let (c_case, c_term, c_name, c_dir, c_issue) =
        (col("caseId"), col("term"), col("justiceName"), col("direction"), col("issueArea"));
    let mut cases: BTreeMap<String, Accumulator> = BTreeMap::new();
    for (line, rec) in rdr.byte_records().enumerate() {
        let rec = rec?;
        let field = |i: usize| String::from_utf8_lossy(rec.get(i).unwrap_or(b"")).trim().to_string();
        let row = line + 2;
        let term = parse_opt_int(&field(c_term))
            .map_err(|e| Error::Parse(format!("line {row}: term: {e}")))?
            .ok_or_else(|| Error::Parse(format!("line {row}: missing term")))?;
        if !terms.contains(&term) {
            continue;
        }
        let name = field(c_name);
        if name.is_empty() {
            return Err(Error::Parse(format!("line {row}: empty justiceName")));
        }
        let j = panel.index_of(&name).ok_or_else(|| Error::UnknownJustice(name.clone()))?;
        let dir = parse_opt_int(&field(c_dir)).map_err(|e| Error::Parse(format!("line {row}: direction: {e}")))?;
        let issue = parse_opt_int(&field(c_issue)).map_err(|e| Error::Parse(format!("line {row}: issueArea: {e}")))?;
        let acc = cases
            .entry(field(c_case))
            .or_insert_with(|| Accumulator { votes: vec![Vec::new(); 9], ..Default::default() });
        acc.terms.insert(term);
        acc.votes[j].push(dir);
        if let Some(code) = issue {
            acc.issues.insert(code);
        }
    }
    let mut kept = Vec::new();
    let mut exclusions = Vec::new();
    for (case_id, acc) in cases {
        match case_outcome(&acc, &panel.labels) {
            Ok(y) => {
                let issue = acc.issues.iter().copied().find(|c| (1..=14).contains(c)).map(|c| c as u8);
                if acc.issues.len() > 1 {
                    log::warn!("case {case_id} lists several issue areas; using {issue:?}");
                }
                kept.push(CourtCase { case_id, term: *acc.terms.iter().next().expect("one record"), y, issue });
            }
            Err(reason) => {
                log::info!("excluding case {case_id}: {reason}");
                exclusions.push(Exclusion { case_id, reason });
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no case in terms {}-{} has nine usable votes",
            terms.start(),
            terms.end()
        )));
    }
    Ok(CourtDataset { labels: panel.labels.clone(), cases: kept, exclusions })
}

fn case_outcome(acc: &Accumulator, labels: &[String]) -> std::result::Result<Outcome, String> {
    let mut y = Vec::with_capacity(9);
    for (j, votes) in acc.votes.iter().enumerate() {
        let distinct: BTreeSet<Option<i64>> = votes.iter().copied().collect();
        if distinct.is_empty() {
            return Err(format!("no vote recorded for {}", labels[j]));
        }
        if distinct.len() > 1 {
            return Err(format!("conflicting duplicate records for {}", labels[j]));
        }
        match distinct.into_iter().next().expect("one value") {
            Some(2) => y.push(1),
            Some(1) => y.push(-1),
            Some(code) => return Err(format!("direction code {code} for {}", labels[j])),
            None => return Err(format!("missing direction for {}", labels[j])),
        }
    }
    Ok(Outcome::new(y).expect("entries are +-1"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssueCount {
    /// `None` for cases without an issue area.
    pub code: Option<u8>,
    pub name: String,
    pub cases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JusticeRates {
    pub justice: String,
    pub liberal_rate: f64,
    pub conservative_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CourtSummary {
    pub cases: usize,
    pub excluded: usize,
    pub per_issue: Vec<IssueCount>,
    pub per_justice: Vec<JusticeRates>,
    /// Share of decisions with fewer than five liberal votes.
    pub conservative_decision_rate: f64,
    pub exclusions_by_reason: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub expected_cases: usize,
    pub observed_cases: usize,
    pub difference: i64,
    pub matches: bool,
}

impl CourtSummary {
    pub fn reconcile(&self, expected_cases: usize) -> Reconciliation {
        let difference = self.cases as i64 - expected_cases as i64;
        if difference != 0 {
            log::warn!(
                "{} cases pass the nine-vote filter, {expected_cases} expected (difference {difference:+})",
                self.cases
            );
        }
        Reconciliation { expected_cases, observed_cases: self.cases, difference, matches: difference == 0 }
    }

    pub fn issue_count(&self, code: u8) -> usize {
        self.per_issue.iter().find(|c| c.code == Some(code)).map_or(0, |c| c.cases)
    }

    pub fn justice(&self, label: &str) -> Option<&JusticeRates> {
        self.per_justice.iter().find(|j| j.justice == label)
    }
}

impl CourtDataset {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Shared-treatment dataset with `a = 1` exactly for cases in `issue`.
    pub fn binarize_issue(&self, issue: i64) -> Result<CaseDataset> {
        let code = u8::try_from(issue)
            .ok()
            .filter(|c| issue_name(*c).is_some())
            .ok_or_else(|| Error::UnknownIssue { code: issue, valid: valid_issue_list() })?;
        let treated = self.cases.iter().filter(|c| c.issue == Some(code)).count();
        if treated == 0 {
            log::warn!("no cases in issue area {code} ({})", issue_name(code).expect("valid"));
        }
        let cases = self
            .cases
            .iter()
            .map(|c| Case {
                id: c.case_id.clone(),
                y: c.y.clone(),
                a: Treatment::Shared(u8::from(c.issue == Some(code))),
                c: None,
            })
            .collect();
        CaseDataset::new(self.labels.clone(), TreatmentMode::Shared, false, cases)
    }

    pub fn summarize(&self) -> CourtSummary {
        let total = self.cases.len();
        let mut per_issue: Vec<IssueCount> = ISSUE_AREAS
            .iter()
            .map(|&(code, name)| IssueCount {
                code: Some(code),
                name: name.to_string(),
                cases: self.cases.iter().filter(|c| c.issue == Some(code)).count(),
            })
            .collect();
        per_issue.push(IssueCount {
            code: None,
            name: "Missing".into(),
            cases: self.cases.iter().filter(|c| c.issue.is_none()).count(),
        });
        let per_justice = self
            .labels
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let lib = self.cases.iter().filter(|c| c.y.values()[j] > 0).count() as f64 / total as f64;
                JusticeRates { justice: l.clone(), liberal_rate: lib, conservative_rate: 1.0 - lib }
            })
            .collect();
        let conservative = self.cases.iter().filter(|c| c.y.liberal_count() < 5).count() as f64 / total as f64;
        let mut exclusions_by_reason = BTreeMap::new();
        for e in &self.exclusions {
            let kind = e.reason.split(" for ").next().unwrap_or(&e.reason).to_string();
            *exclusions_by_reason.entry(kind).or_insert(0) += 1;
        }
        CourtSummary {
            cases: total,
            excluded: self.exclusions.len(),
            per_issue,
            per_justice,
            conservative_decision_rate: conservative,
            exclusions_by_reason,
        }
    }

    /// CSV `case_id,term,y_<label>...,issue` (issue blank when missing).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["case_id".to_string(), "term".to_string()];
        header.extend(self.labels.iter().map(|l| format!("y_{l}")));
        header.push("issue".into());
        out.write_record(&header)?;
        for c in &self.cases {
            let mut rec = vec![c.case_id.clone(), c.term.to_string()];
            rec.extend(c.y.values().iter().map(|v| v.to_string()));
            rec.push(c.issue.map(|i| i.to_string()).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut missing = Vec::new();
        for name in ["case_id", "term", "issue"] {
            if !header.iter().any(|h| h == name) {
                missing.push(name.to_string());
            }
        }
        let y_cols: Vec<(usize, String)> =
            header.iter().enumerate().filter_map(|(i, h)| h.strip_prefix("y_").map(|l| (i, l.to_string()))).collect();
        if y_cols.is_empty() {
            missing.push("y_<label>".into());
        }
        if !missing.is_empty() {
            return Err(Error::Schema(missing));
        }
        let pos = |n: &str| header.iter().position(|h| h == n).expect("checked");
        let (c_id, c_term, c_issue) = (pos("case_id"), pos("term"), pos("issue"));
        let mut cases = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 1));
            let y = y_cols
                .iter()
                .map(|&(i, _)| get(i).parse::<i8>().map_err(|_| bad("outcome")))
                .collect::<Result<Vec<_>>>()?;
            let issue = match get(c_issue) {
                "" => None,
                s => Some(s.parse::<u8>().ok().filter(|c| issue_name(*c).is_some()).ok_or_else(|| bad("issue"))?),
            };
            cases.push(CourtCase {
                case_id: get(c_id).to_string(),
                term: get(c_term).parse().map_err(|_| bad("term"))?,
                y: Outcome::new(y)?,
                issue,
            });
        }
        if cases.is_empty() {
            return Err(Error::EmptyDataset("court dataset has no rows".into()));
        }
        Ok(Self { labels: y_cols.into_iter().map(|(_, l)| l).collect(), cases, exclusions: Vec::new() })
    }
}
