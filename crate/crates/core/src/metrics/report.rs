use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const REPORT_HEADER: &str = "scene,policy,views,auc,final_cr,chamfer_cm,reason";
pub const SUMMARY_HEADER: &str = "policy,views,episodes,auc,final_cr,chamfer_cm";

/// Scores of one episode. `scene` identifies the episode (the harness uses
/// `"<scene id>#<seed>"`), `views` is the view budget the curve is scored
/// over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scene: String,
    pub policy: String,
    pub views: usize,
    /// Mean coverage over the `views` capture steps, in percent.
    pub auc: f64,
    pub final_cr: f64,
    pub chamfer_cm: f64,
    pub reason: String,
}

/// Per-policy means over a set of reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub views: usize,
    pub episodes: usize,
    pub auc: f64,
    pub final_cr: f64,
    pub chamfer_cm: f64,
}

/// Unweighted means per policy, in order of first appearance. All reports
/// must share one view budget.
pub fn aggregate(reports: &[CoverageReport]) -> Result<Vec<PolicySummary>, MetricsError> {
    let first = reports.first().ok_or(MetricsError::NoReports)?;
    let mut out: Vec<PolicySummary> = Vec::new();
    for r in reports {
        if r.views != first.views {
            return Err(MetricsError::MixedBudgets(first.views, r.views));
        }
        match out.iter_mut().find(|s| s.policy == r.policy) {
            Some(s) => {
                s.episodes += 1;
                s.auc += r.auc;
                s.final_cr += r.final_cr;
                s.chamfer_cm += r.chamfer_cm;
            }
            None => out.push(PolicySummary {
                policy: r.policy.clone(),
                views: r.views,
                episodes: 1,
                auc: r.auc,
                final_cr: r.final_cr,
                chamfer_cm: r.chamfer_cm,
            }),
        }
    }
    for s in &mut out {
        let n = s.episodes as f64;
        s.auc /= n;
        s.final_cr /= n;
        s.chamfer_cm /= n;
    }
    Ok(out)
}

pub fn write_reports_csv(reports: &[CoverageReport], out: impl Write) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    if reports.is_empty() {
        w.write_record(REPORT_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv(input: impl Read) -> Result<Vec<CoverageReport>, MetricsError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_summary_csv(summary: &[PolicySummary], out: impl Write) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    for s in summary {
        w.serialize(s)?;
    }
    if summary.is_empty() {
        w.write_record(SUMMARY_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(input: impl Read) -> Result<Vec<PolicySummary>, MetricsError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_summary_json(summary: &[PolicySummary], mut out: impl Write) -> Result<(), MetricsError> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    writeln!(out)?;
    Ok(())
}
