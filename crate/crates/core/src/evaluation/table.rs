use std::io::Write;

use super::EvalReport;
use crate::error::Result;
use crate::features::Representation;
use crate::similarity::{Measure, MethodConfig};
use crate::weighting::Scheme;

pub const RESULTS_TABLE_HEADER: &str =
    "Feature representations\tMedian rank (IQR)\tFirst-ranked candidate\tRecall@50";

/// Integer with thousands separators, or one decimal when fractional.
pub fn format_count(x: f64) -> String {
    let rounded = (x * 10.0).round() / 10.0;
    let whole = rounded.trunc() as u64;
    let digits = whole.to_string();
    let mut grouped = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            grouped.push(',');
        }
        grouped.push(c);
    }
    let tenths = ((rounded - whole as f64) * 10.0).round() as u64;
    if tenths == 0 {
        grouped
    } else {
        format!("{grouped}.{tenths}")
    }
}

/// `median (q1-q3)`, e.g. `533 (8-7,900)`.
pub fn format_rank_cell(report: &EvalReport) -> String {
    format!(
        "{} ({}-{})",
        format_count(report.median_rank),
        format_count(report.iqr.q1),
        format_count(report.iqr.q3)
    )
}

fn block_label(representation: Representation, scheme: Scheme) -> String {
    let r = match representation {
        Representation::Term => "Terms",
        Representation::Concept => "Concepts",
    };
    let s = match scheme {
        Scheme::Binary => "binary",
        Scheme::Tfidf => "tf-idf",
    };
    format!("{r} ({s})")
}

fn measure_label(m: Measure) -> &'static str {
    match m {
        Measure::EuclideanNormalized => "Euclidean",
        Measure::Jaccard => "Jaccard",
        Measure::Cosine => "Cosine",
    }
}

/// Tab-separated results table: one block per representation and scheme,
/// one row per measure, in the canonical config order. Configs without a
/// report are skipped, as are empty blocks.
pub fn write_results_table<W: Write>(reports: &[EvalReport], mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_TABLE_HEADER}")?;
    let mut current_block = None;
    for config in MethodConfig::all_legal() {
        let Some(r) = reports.iter().find(|r| r.config == config) else {
            continue;
        };
        let block = (config.representation, config.scheme);
        if current_block != Some(block) {
            writeln!(out, "{}\t\t\t", block_label(block.0, block.1))?;
            current_block = Some(block);
        }
        writeln!(
            out,
            "{}\t{}\t{:.1}%\t{:.1}%",
            measure_label(config.measure),
            format_rank_cell(r),
            r.first_ranked_pct,
            r.recall_at_50_pct
        )?;
    }
    Ok(())
}

/// Recall curves of several configs in one CSV, marking n = 1 and n = 50.
pub fn write_curves_csv<W: Write>(reports: &[EvalReport], mut out: W) -> Result<()> {
    writeln!(out, "representation,scheme,measure,n,recall,marker")?;
    for r in reports {
        for p in &r.recall_curve {
            let marker = match p.n {
                1 => "first",
                50 => "top50",
                _ => "",
            };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.config.representation, r.config.scheme, r.config.measure, p.n, p.recall, marker
            )?;
        }
    }
    Ok(())
}
