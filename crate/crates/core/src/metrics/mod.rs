//! Episode scoring: coverage curves, mean AUC, Chamfer accuracy, and the
//! CSV/JSON report formats.

mod kdtree;
mod report;
mod scan;

use nalgebra::Point3;
use thiserror::Error;

use crate::exec::Execution;

pub use kdtree::KdTree;
pub use report::{
    aggregate, read_reports_csv, read_summary_csv, write_reports_csv, write_summary_csv, write_summary_json,
    CoverageReport, PolicySummary, REPORT_HEADER, SUMMARY_HEADER,
};
pub use scan::ScanAccumulator;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("coverage curve is empty")]
    EmptyCurve,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no reports to aggregate")]
    NoReports,
    #[error("reports mix view budgets {0} and {1}")]
    MixedBudgets(usize, usize),
    #[error("view budget must be at least 1")]
    ZeroBudget,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Arithmetic mean of the coverage values of the capture steps.
pub fn mean_auc(curve: &[f64]) -> Result<f64, MetricsError> {
    if curve.is_empty() {
        return Err(MetricsError::EmptyCurve);
    }
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

/// Coverage after each of the `view_budget` capture steps, given the full
/// history `CR_0..CR_t` (which starts with the reset view). An episode that
/// stopped early keeps its last coverage for the remaining views.
pub fn budget_curve(history: &[f64], view_budget: usize) -> Result<Vec<f64>, MetricsError> {
    if view_budget == 0 {
        return Err(MetricsError::ZeroBudget);
    }
    let last = *history.last().ok_or(MetricsError::EmptyCurve)?;
    Ok((1..=view_budget)
        .map(|i| history.get(i).copied().unwrap_or(last))
        .collect())
}

/// Mean nearest-neighbour distance from each point of `from` to `to`.
fn directed_mean(from: &[Point3<f64>], to: &KdTree, exec: Execution) -> f64 {
    const CHUNK: usize = 4096;
    let chunks = from.len().div_ceil(CHUNK);
    let sums = exec.map_indexed(chunks, |c| {
        from[c * CHUNK..((c + 1) * CHUNK).min(from.len())]
            .iter()
            .map(|p| to.nearest_distance(p).expect("non-empty tree"))
            .sum::<f64>()
    });
    sums.iter().sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance in centimeters:
/// `(mean_a d(a, B) + mean_b d(b, A)) / 2 * 100`, with exact nearest
/// neighbours.
pub fn chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    chamfer_indexed(a, &KdTree::build(a), b, &KdTree::build(b), Execution::default())
}

/// [`chamfer`] with prebuilt trees for both clouds.
pub fn chamfer_indexed(
    a: &[Point3<f64>],
    a_tree: &KdTree,
    b: &[Point3<f64>],
    b_tree: &KdTree,
    exec: Execution,
) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let ab = directed_mean(a, b_tree, exec);
    let ba = directed_mean(b, a_tree, exec);
    Ok(0.5 * (ab + ba) * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_basics() {
        assert_eq!(mean_auc(&[80.0; 30]).unwrap(), 80.0);
        assert_eq!(mean_auc(&[0.0, 100.0]).unwrap(), 50.0);
        assert!(mean_auc(&[]).is_err());
    }

    #[test]
    fn budget_curve_pads() {
        let c = budget_curve(&[10.0, 20.0, 30.0], 4).unwrap();
        assert_eq!(c, vec![20.0, 30.0, 30.0, 30.0]);
        assert_eq!(budget_curve(&[10.0, 20.0, 30.0], 1).unwrap(), vec![20.0]);
        assert_eq!(budget_curve(&[10.0], 2).unwrap(), vec![10.0, 10.0]);
        assert!(budget_curve(&[10.0], 0).is_err());
    }

    #[test]
    fn chamfer_basics() {
        let a = vec![Point3::new(0.0, 0.0, 0.0)];
        let b = vec![Point3::new(1.0, 0.0, 0.0)];
        assert!((chamfer(&a, &b).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert!(chamfer(&a, &[]).is_err());
    }
}
