//! Metric and trace tables.

use std::fmt::Write as _;
use std::io::Write;

use tensorrec_core::eval::{Comparison, MetricsReport};
use tensorrec_core::training::TrainTrace;

use crate::error::Result;

/// `model  cutoff  recall  ndcg  users_evaluated`, six decimals.
pub fn write_metrics_tsv<W: Write>(mut w: W, reports: &[(String, MetricsReport)]) -> Result<()> {
    writeln!(w, "model\tcutoff\trecall\tndcg\tusers_evaluated")?;
    for (name, r) in reports {
        for (i, n) in r.cutoffs.iter().enumerate() {
            writeln!(w, "{name}\t{n}\t{:.6}\t{:.6}\t{}", r.recall[i], r.ndcg[i], r.users_evaluated)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn improvement(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_owned(), |v| format!("{v:+.4}"))
}

/// Aligned plain-text table with improvements over the reference model.
pub fn format_comparison(c: &Comparison) -> String {
    let header = [
        "model".to_owned(),
        "n".to_owned(),
        "recall".to_owned(),
        "ndcg".to_owned(),
        "contexts".to_owned(),
        format!("recall vs {}", c.reference),
        format!("ndcg vs {}", c.reference),
    ];
    let rows: Vec<[String; 7]> = c
        .rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.cutoff.to_string(),
                format!("{:.4}", r.recall),
                format!("{:.4}", r.ndcg),
                r.users_evaluated.to_string(),
                improvement(r.recall_improvement),
                improvement(r.ndcg_improvement),
            ]
        })
        .collect();
    let mut widths = header.clone().map(|h| h.len());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(line, "{cell:<w$}");
            } else {
                let _ = write!(line, "  {cell:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Recall@50 and NDCG@5 per model, when those cutoffs were evaluated.
pub fn format_headline(reports: &[(String, MetricsReport)]) -> String {
    let mut out = String::new();
    for (name, r) in reports {
        if let (Some(recall), Some(ndcg)) = (r.recall_at(50), r.ndcg_at(5)) {
            let _ = writeln!(out, "{name}: Recall@50 = {recall:.4}, NDCG@5 = {ndcg:.4}");
        }
    }
    out
}

/// `iteration  objective  recall@n  ndcg@n  seconds`; missing values are `NA`.
pub fn write_trace_tsv<W: Write>(mut w: W, trace: &TrainTrace, cutoff: usize) -> Result<()> {
    writeln!(w, "iteration\tobjective\trecall@{cutoff}\tndcg@{cutoff}\tseconds")?;
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_owned(), |v| format!("{v:.6}"));
    for r in &trace.records {
        writeln!(
            w,
            "{}\t{:.8}\t{}\t{}\t{:.3}",
            r.iteration,
            r.objective,
            opt(r.recall),
            opt(r.ndcg),
            r.seconds
        )?;
    }
    w.flush()?;
    Ok(())
}
