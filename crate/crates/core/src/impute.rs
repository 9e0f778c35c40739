//! Neighborhood imputation of missing covariates.
//!
//! One pass over the original values: a filled cell never feeds another
//! cell's fill. Continuous gaps take the neighbor mean, categorical gaps the
//! neighbor mode (ties go to the lexicographically smallest label).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::AdjacencyGraph;

#[derive(Debug, Clone, PartialEq)]
pub enum FilledValue {
    Number(f64),
    Category(String),
}

impl std::fmt::Display for FilledValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilledValue::Number(x) => write!(f, "{x}"),
            FilledValue::Category(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedCell {
    pub region: usize,
    pub variable: String,
    pub value: FilledValue,
    pub neighbor_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnimputableCell {
    pub region: usize,
    pub variable: String,
}

/// Outcome of every originally missing cell: either imputed or unimputable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImputationReport {
    pub imputed: Vec<ImputedCell>,
    pub unimputable: Vec<UnimputableCell>,
}

impl ImputationReport {
    pub fn merge(&mut self, other: ImputationReport) {
        self.imputed.extend(other.imputed);
        self.unimputable.extend(other.unimputable);
    }

    /// Region indices with at least one unimputable cell, sorted.
    pub fn unimputable_regions(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.unimputable.iter().map(|c| c.region).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_empty(&self) -> bool {
        self.imputed.is_empty() && self.unimputable.is_empty()
    }

    /// CSV with columns `region_id,variable,action,value,neighbor_count`.
    ///
    /// `excluded` lists extra `(region, variable)` rows (e.g. missing
    /// response) written with action `excluded`.
    pub fn to_csv(&self, ids: &[String], excluded: &[(usize, String)]) -> String {
        let mut out = String::from("region_id,variable,action,value,neighbor_count\n");
        for c in &self.imputed {
            let _ = writeln!(
                out,
                "{},{},imputed,{},{}",
                ids[c.region], c.variable, c.value, c.neighbor_count
            );
        }
        for c in &self.unimputable {
            let _ = writeln!(out, "{},{},unimputable,,0", ids[c.region], c.variable);
        }
        for (region, variable) in excluded {
            let _ = writeln!(out, "{},{},excluded,,", ids[*region], variable);
        }
        out
    }
}

fn check_len(values: usize, graph: &AdjacencyGraph) -> Result<()> {
    if values != graph.n() {
        return Err(Error::Dimension {
            expected: graph.n(),
            actual: values,
            context: "imputation values vs adjacency graph",
        });
    }
    Ok(())
}

/// Fills each missing value with the mean of its non-missing neighbors.
pub fn impute_continuous(
    variable: &str,
    values: &[Option<f64>],
    graph: &AdjacencyGraph,
) -> Result<(Vec<Option<f64>>, ImputationReport)> {
    check_len(values.len(), graph)?;
    let mut out = values.to_vec();
    let mut report = ImputationReport::default();
    for (i, v) in values.iter().enumerate() {
        if v.is_some() {
            continue;
        }
        let known: Vec<f64> = graph
            .neighbors(i)
            .iter()
            .filter_map(|&j| values[j])
            .collect();
        if known.is_empty() {
            report.unimputable.push(UnimputableCell {
                region: i,
                variable: variable.to_string(),
            });
            continue;
        }
        let mean = known.iter().sum::<f64>() / known.len() as f64;
        out[i] = Some(mean);
        report.imputed.push(ImputedCell {
            region: i,
            variable: variable.to_string(),
            value: FilledValue::Number(mean),
            neighbor_count: known.len(),
        });
    }
    Ok((out, report))
}

/// Fills each missing category with the modal category among neighbors.
pub fn impute_categorical(
    variable: &str,
    values: &[Option<String>],
    graph: &AdjacencyGraph,
) -> Result<(Vec<Option<String>>, ImputationReport)> {
    check_len(values.len(), graph)?;
    let mut out = values.to_vec();
    let mut report = ImputationReport::default();
    for (i, v) in values.iter().enumerate() {
        if v.is_some() {
            continue;
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut used = 0;
        for &j in graph.neighbors(i) {
            if let Some(label) = &values[j] {
                *counts.entry(label.as_str()).or_default() += 1;
                used += 1;
            }
        }
        // BTreeMap iterates in label order, so the first maximum wins ties.
        let mode = counts
            .iter()
            .fold(None::<(&str, usize)>, |best, (&label, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((label, c)),
            });
        match mode {
            Some((label, _)) => {
                out[i] = Some(label.to_string());
                report.imputed.push(ImputedCell {
                    region: i,
                    variable: variable.to_string(),
                    value: FilledValue::Category(label.to_string()),
                    neighbor_count: used,
                });
            }
            None => report.unimputable.push(UnimputableCell {
                region: i,
                variable: variable.to_string(),
            }),
        }
    }
    Ok((out, report))
}
