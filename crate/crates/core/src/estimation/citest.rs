//! Likelihood-ratio conditional independence test between two outcome
//! columns, by nested logistic regressions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::log_sigmoid;
use crate::data::CaseDataset;
use crate::error::{Error, Result};
use crate::sampler::sigmoid;

/// A dataset column usable as a regressor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    /// Outcome of node `i`, coded -1/+1.
    Outcome(usize),
    /// Treatment of node `i` (the shared treatment in shared mode), 0/1.
    Treatment(usize),
    /// Confounder of node `i`, 0/1.
    Covariate(usize),
}

const RIDGE_FALLBACK: f64 = 1e-4;
/// Coefficients beyond this size mean the unpenalized fit is diverging.
const SEPARATION_LIMIT: f64 = 15.0;

/// Collapsed logistic design: feature rows with (successes, failures).
struct Design {
    rows: Vec<(Vec<f64>, f64, f64)>,
}

impl Design {
    fn log_lik(&self, beta: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(x, pos, neg)| {
                let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                pos * log_sigmoid(eta) + neg * log_sigmoid(-eta)
            })
            .sum()
    }

    /// Newton fit of `log_lik - ridge/2 * |beta_{1..}|^2`; `None` when the
    /// unpenalized fit diverges or stalls.
    fn fit(&self, d: usize, ridge: f64) -> Option<Vec<f64>> {
        let penalized = |beta: &[f64]| self.log_lik(beta) - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>();
        let mut beta = vec![0.0; d];
        let mut obj = penalized(&beta);
        for _ in 0..200 {
            let mut g = DVector::<f64>::zeros(d);
            let mut h = DMatrix::<f64>::zeros(d, d);
            for (x, pos, neg) in &self.rows {
                let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let p = sigmoid(eta);
                let resid = pos - (pos + neg) * p;
                let curv = (pos + neg) * p * (1.0 - p);
                for r in 0..d {
                    g[r] += resid * x[r];
                    for c in 0..d {
                        h[(r, c)] += curv * x[r] * x[c];
                    }
                }
            }
            for r in 1..d {
                g[r] -= ridge * beta[r];
                h[(r, r)] += ridge;
            }
            if g.amax() < 1e-9 {
                break;
            }
            let mut reg = h.clone();
            for r in 0..d {
                reg[(r, r)] += 1e-10;
            }
            let step = reg.cholesky()?.solve(&g);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
                let f = penalized(&trial);
                if f >= obj - 1e-12 * (1.0 + obj.abs()) {
                    beta = trial;
                    obj = f;
                    break;
                }
                t *= 0.5;
                if t < 1e-10 {
                    return None;
                }
            }
            if ridge == 0.0 && beta.iter().any(|b| b.abs() > SEPARATION_LIMIT) {
                return None;
            }
        }
        if ridge == 0.0 && beta.iter().any(|b| b.abs() > SEPARATION_LIMIT) {
            return None;
        }
        Some(beta)
    }
}

fn column_value(data: &CaseDataset, case: usize, col: Column) -> f64 {
    let c = &data.cases()[case];
    match col {
        Column::Outcome(i) => c.y.values()[i] as f64,
        Column::Treatment(i) => c.a.at(i) as f64,
        Column::Covariate(i) => c.c.as_ref().map_or(0.0, |v| v.values()[i] as f64),
    }
}

fn check_column(data: &CaseDataset, col: Column) -> Result<()> {
    let (i, ok) = match col {
        Column::Outcome(i) | Column::Treatment(i) => (i, true),
        Column::Covariate(i) => (i, data.has_covariates()),
    };
    if i >= data.n_nodes() || !ok {
        return Err(Error::config(format!("column {col:?} is not in the dataset")));
    }
    Ok(())
}

/// p-value of the likelihood-ratio test that outcome `probe` adds nothing to
/// a logistic regression of outcome `target` on an intercept and
/// `conditioning`. Chi-square with one degree of freedom.
pub fn likelihood_ratio_ci_test(
    data: &CaseDataset,
    target: usize,
    probe: usize,
    conditioning: &[Column],
) -> Result<f64> {
    check_column(data, Column::Outcome(target))?;
    check_column(data, Column::Outcome(probe))?;
    for &c in conditioning {
        check_column(data, c)?;
    }
    if target == probe
        || conditioning.contains(&Column::Outcome(target))
        || conditioning.contains(&Column::Outcome(probe))
    {
        return Err(Error::config("target and probe must be distinct and outside the conditioning set"));
    }
    // features: conditioning columns then probe; grouped by value pattern
    let mut groups: BTreeMap<Vec<i8>, (f64, f64)> = BTreeMap::new();
    for case in 0..data.len() {
        let mut key: Vec<i8> = conditioning.iter().map(|&c| column_value(data, case, c) as i8).collect();
        key.push(data.cases()[case].y.values()[probe]);
        let entry = groups.entry(key).or_insert((0.0, 0.0));
        if data.cases()[case].y.values()[target] > 0 {
            entry.0 += 1.0;
        } else {
            entry.1 += 1.0;
        }
    }
    let pos: f64 = groups.values().map(|g| g.0).sum();
    let neg: f64 = groups.values().map(|g| g.1).sum();
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::DegenerateNode { node: data.labels()[target].clone() });
    }
    let design = |with_probe: bool| Design {
        rows: groups
            .iter()
            .map(|(key, &(p, q))| {
                let mut x = vec![1.0];
                let last = key.len() - 1;
                x.extend(key[..last].iter().map(|&v| v as f64));
                if with_probe {
                    x.push(key[last] as f64);
                }
                (x, p, q)
            })
            .collect(),
    };
    let full = design(true);
    let reduced = design(false);
    let d = conditioning.len() + 1;
    let fits = match (full.fit(d + 1, 0.0), reduced.fit(d, 0.0)) {
        (Some(b1), Some(b0)) => Some((b1, b0)),
        _ => None,
    };
    let (b1, b0) = match fits {
        Some(f) => f,
        None => {
            log::warn!(
                "separation in the test of {} against {}; refitting with ridge {RIDGE_FALLBACK}",
                data.labels()[target],
                data.labels()[probe]
            );
            let b1 =
                full.fit(d + 1, RIDGE_FALLBACK).ok_or_else(|| Error::NonConvergence("ridge logistic fit".into()))?;
            let b0 =
                reduced.fit(d, RIDGE_FALLBACK).ok_or_else(|| Error::NonConvergence("ridge logistic fit".into()))?;
            (b1, b0)
        }
    };
    let stat = (2.0 * (full.log_lik(&b1) - reduced.log_lik(&b0))).max(0.0);
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    Ok(chi.sf(stat).clamp(0.0, 1.0))
}
