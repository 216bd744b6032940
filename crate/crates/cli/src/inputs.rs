//! Turning flag values and input files into library types.

use std::ops::RangeInclusive;
use std::path::Path;

use chaingraph::exact::CovariateLaw;
use chaingraph::scdb::{CourtDataset, CourtPanel};
use chaingraph::{CaseDataset, ChainGraphModel, Covariates, EventPredicate, NetworkGraph, Treatment, TreatmentMode};

use crate::error::{CliError, CliResult};
use crate::run::Run;

pub fn parse_terms(s: &str) -> CliResult<RangeInclusive<i64>> {
    let bad = || CliError::usage(format!("term range {s:?} is not of the form FIRST-LAST"));
    let (a, b) = s.split_once('-').ok_or_else(bad)?;
    let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    Ok(a..=b)
}

pub fn panel(aliases: &[String]) -> CliResult<CourtPanel> {
    let mut panel = CourtPanel::default();
    for a in aliases {
        let (name, label) =
            a.split_once('=').ok_or_else(|| CliError::usage(format!("alias {a:?} is not of the form NAME=LABEL")))?;
        panel.aliases.insert(name.to_string(), label.to_string());
    }
    Ok(panel)
}

/// Reads a dataset CSV. Court case files (with `term` and `issue` columns)
/// are binarized on `issue`.
pub fn load_dataset(run: &mut Run, path: &Path, issue: Option<i64>) -> CliResult<CaseDataset> {
    let bytes = run.read(path)?;
    let header = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let header = String::from_utf8_lossy(header);
    let cols: Vec<&str> = header.trim().trim_start_matches('\u{feff}').split(',').map(str::trim).collect();
    let is_court = cols.contains(&"term") && cols.contains(&"issue");
    match (is_court, issue) {
        (true, Some(code)) => Ok(CourtDataset::read_csv(bytes.as_slice())?.binarize_issue(code)?),
        (true, None) => {
            Err(CliError::usage(format!("{} is a court case file; choose a treatment with --issue", path.display())))
        }
        (false, Some(_)) => Err(CliError::usage("--issue applies only to court case files written by `ingest`")),
        (false, None) => Ok(CaseDataset::read_csv(bytes.as_slice())?),
    }
}

pub fn load_model(run: &mut Run, path: &Path) -> CliResult<ChainGraphModel> {
    let text = run.read_string(path)?;
    Ok(ChainGraphModel::from_json(&text)?)
}

/// Network on `labels` from an edge CSV (`from,to`) or the edges of a model JSON.
pub fn load_network(run: &mut Run, path: &Path, labels: &[String]) -> CliResult<NetworkGraph> {
    let bytes = run.read(path)?;
    let pairs: Vec<(String, String)> = if path.extension().is_some_and(|e| e == "json") {
        let text = String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{} is not UTF-8", path.display())))?;
        ChainGraphModel::from_json(&text)?.graph().label_pairs()
    } else {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
        let header = rdr.headers().map_err(chaingraph::Error::from)?.clone();
        if header.len() != 2 || &header[0] != "from" || &header[1] != "to" {
            return Err(chaingraph::Error::Schema(vec!["from".into(), "to".into()]).into());
        }
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(chaingraph::Error::from)?;
            out.push((rec[0].to_string(), rec[1].to_string()));
        }
        out
    };
    Ok(NetworkGraph::from_labels(labels, &pairs)?)
}

fn label_indices(spec: &str, labels: &[String]) -> CliResult<Vec<usize>> {
    match spec.trim() {
        "none" => Ok(Vec::new()),
        "all" => Ok((0..labels.len()).collect()),
        list => list
            .split(',')
            .map(|l| {
                let l = l.trim();
                labels.iter().position(|x| x == l).ok_or_else(|| {
                    CliError::usage(format!("unknown node label {l:?}; labels are {}", labels.join(", ")))
                })
            })
            .collect(),
    }
}

pub fn parse_treatment(spec: &str, labels: &[String], mode: TreatmentMode) -> CliResult<Treatment> {
    match mode {
        TreatmentMode::Shared => match spec.trim() {
            "1" | "all" => Ok(Treatment::Shared(1)),
            "0" | "none" => Ok(Treatment::Shared(0)),
            other => Err(CliError::usage(format!("shared treatment must be 0 or 1, got {other:?}"))),
        },
        TreatmentMode::PerNode => Ok(Treatment::treating(labels.len(), &label_indices(spec, labels)?)),
    }
}

pub fn parse_covariates(spec: &str, labels: &[String]) -> CliResult<Covariates> {
    let mut c = vec![0u8; labels.len()];
    for i in label_indices(spec, labels)? {
        c[i] = 1;
    }
    Ok(Covariates::new(c)?)
}

pub fn parse_events(specs: &[String]) -> CliResult<Vec<EventPredicate>> {
    specs.iter().map(|s| s.parse::<EventPredicate>().map_err(CliError::from)).collect()
}

pub fn parse_law(spec: &str, graph: &NetworkGraph, data: Option<&CaseDataset>) -> CliResult<CovariateLaw> {
    let number = |v: &str| v.parse::<f64>().map_err(|_| CliError::usage(format!("bad number in law {spec:?}")));
    let law = match spec.split_once(':') {
        None if spec == "empirical" => {
            let d = data
                .filter(|d| d.has_covariates())
                .ok_or_else(|| CliError::usage("the empirical law needs --data with confounder columns"))?;
            CovariateLaw::empirical_from_masks(d.n_nodes(), &d.covariate_frequencies())
        }
        Some(("ising", v)) => CovariateLaw::uniform_ising(graph, number(v)?),
        Some(("bernoulli", v)) => CovariateLaw::ProductBernoulli(vec![number(v)?; graph.len()]),
        _ => return Err(CliError::usage(format!("unknown confounder law {spec:?}"))),
    };
    law.validate(graph)?;
    Ok(law)
}

pub fn parse_penalties(s: &str) -> CliResult<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad penalty {t:?}")))).collect()
}
