//! Markdown renderings of the results tables.

use std::fmt::Write as _;

use crate::explain::ImportanceRanking;
use crate::labeling::{CohortSummary, Descriptives};
use crate::stats::GroupComparisonRow;

/// Fixed three decimals, or scientific notation when that would print zero.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 5e-4 {
        format!("{x:.3e}")
    } else {
        format!("{x:.3}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), num)
}

/// UCLA score descriptives and category shares.
pub fn descriptives_markdown(s: &CohortSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| Score | Mean | Median | Q1 | Q3 | SD |\n|---|---:|---:|---:|---:|---:|");
    let row = |out: &mut String, name: &str, d: &Descriptives| {
        let _ = writeln!(out, "| {name} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |", d.mean, d.median, d.q1, d.q3, d.sd);
    };
    row(&mut out, "Total", &s.total);
    row(&mut out, "Social", &s.social);
    row(&mut out, "Emotional", &s.emotional);
    let _ = writeln!(out, "\n| Group | Count | Percent |\n|---|---:|---:|");
    for c in s.categories.iter().chain(&s.overall) {
        let _ = writeln!(out, "| {} | {} | {:.2} |", c.label, c.count, c.percent);
    }
    let _ = writeln!(out, "\nN = {}", s.n);
    out
}

/// Group-comparison rows as returned (ascending p).
pub fn comparison_markdown(rows: &[GroupComparisonRow], group_a: &str, group_b: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "| Feature | Mean {group_a} (95% CI) | Mean {group_b} (95% CI) | MDiff | d (95% CI) | U | p |\n|---|---:|---:|---:|---:|---:|---:|"
    );
    for r in rows {
        let mark = if r.significant { " *" } else { "" };
        let _ = writeln!(
            out,
            "| {}{mark} | {} ({}, {}) | {} ({}, {}) | {} | {} ({}, {}) | {:.1} | {:.4} |",
            r.feature_name,
            num(r.group_a.mean),
            num(r.group_a.mean_ci_low),
            num(r.group_a.mean_ci_high),
            num(r.group_b.mean),
            num(r.group_b.mean_ci_low),
            num(r.group_b.mean_ci_high),
            num(r.mean_diff),
            opt(r.cohens_d),
            opt(r.d_ci_low),
            opt(r.d_ci_high),
            r.u_statistic,
            r.p_value,
        );
    }
    let _ = writeln!(out, "\n\\* p < 0.05");
    out
}

const BAR_WIDTH: usize = 40;

/// Top-`top` features per class and globally, with text bars scaled to the
/// largest value of each table.
pub fn importance_markdown(r: &ImportanceRanking, model: &str, top: usize) -> String {
    let mut out = String::new();
    let mut table = |title: &str, rows: &[crate::explain::RankedFeature]| {
        let max = rows.first().map_or(0.0, |f| f.mean_abs_shap);
        let _ = writeln!(out, "#### {model}: {title}\n\n| Rank | Feature | Mean abs SHAP | |\n|---:|---|---:|---|");
        for (i, f) in rows.iter().take(top).enumerate() {
            let n = if max > 0.0 { (f.mean_abs_shap / max * BAR_WIDTH as f64).round() as usize } else { 0 };
            let _ = writeln!(out, "| {} | {} | {:.4} | `{}` |", i + 1, f.feature, f.mean_abs_shap, "#".repeat(n));
        }
        out.push('\n');
    };
    table("all classes", &r.global);
    for (c, rows) in r.classes.iter().zip(&r.per_class) {
        table(c, rows);
    }
    out
}
