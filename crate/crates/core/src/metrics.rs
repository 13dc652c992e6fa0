//! Fold metrics, aggregation across folds, the `results.csv` format and the
//! rendered report tables.
//!
//! Accuracies are stored as fractions and rendered as percentages with two
//! decimals. Standard deviations are population standard deviations
//! (divisor N).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no predictions to score")]
    EmptyInput,
    #[error("{0} predictions for {1} truths")]
    LengthMismatch(usize, usize),
    #[error("label {0} is not a class index")]
    BadLabel(usize),
    #[error("no result rows")]
    EmptyResults,
    #[error("results csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("results csv: bad number {0:?}")]
    Number(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub overall: f64,
    /// `None` for classes absent from the test fold.
    pub per_class: [Option<f64>; NUM_CLASSES],
    pub support: [usize; NUM_CLASSES],
}

pub fn fold_metrics(predictions: &[usize], truths: &[usize]) -> Result<FoldMetrics, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), truths.len()));
    }
    if truths.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut support = [0usize; NUM_CLASSES];
    let mut correct = [0usize; NUM_CLASSES];
    for (&p, &t) in predictions.iter().zip(truths) {
        if t >= NUM_CLASSES || p >= NUM_CLASSES {
            return Err(MetricsError::BadLabel(t.max(p)));
        }
        support[t] += 1;
        correct[t] += usize::from(p == t);
    }
    let per_class = std::array::from_fn(|c| (support[c] > 0).then(|| correct[c] as f64 / support[c] as f64));
    let overall = correct.iter().sum::<usize>() as f64 / truths.len() as f64;
    Ok(FoldMetrics { overall, per_class, support })
}

/// Mean and population standard deviation of one field over `n` folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        // shifted by the first value so identical folds give exact results
        let mean = values[0] + values.iter().map(|v| v - values[0]).sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat { mean, std: var.sqrt(), n: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub overall: Stat,
    /// Classes absent from every fold stay `None`; otherwise `n` counts the
    /// folds in which the class was present.
    pub per_class: [Option<Stat>; NUM_CLASSES],
}

pub fn aggregate(folds: &[FoldMetrics]) -> Result<AggregateMetrics, MetricsError> {
    let overall: Vec<f64> = folds.iter().map(|f| f.overall).collect();
    let overall = Stat::of(&overall).ok_or(MetricsError::EmptyInput)?;
    let per_class = std::array::from_fn(|c| {
        let present: Vec<f64> = folds.iter().filter_map(|f| f.per_class[c]).collect();
        Stat::of(&present)
    });
    Ok(AggregateMetrics { overall, per_class })
}

/// A fraction rendered as a two-decimal percentage: `0.9748 → "97.48"`.
pub fn format_pct(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

/// `mean_{std}` in percent: `"97.93_{2.03}"`.
pub fn format_mean_std(stat: &Stat) -> String {
    format!("{}_{{{}}}", format_pct(stat.mean), format_pct(stat.std))
}

// ---------------------------------------------------------------------------
// results.csv
// ---------------------------------------------------------------------------

/// Identifies one experimental configuration on one source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigKey {
    pub framework: String,
    pub backbone_text: String,
    pub backbone_vision: String,
    pub graph_kind: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub source: String,
    pub framework: String,
    pub backbone_text: String,
    /// Empty when the configuration has no vision backbone.
    pub backbone_vision: String,
    pub graph_kind: String,
    pub fold: usize,
    pub metrics: FoldMetrics,
}

impl ResultRow {
    pub fn key(&self) -> ConfigKey {
        ConfigKey {
            framework: self.framework.clone(),
            backbone_text: self.backbone_text.clone(),
            backbone_vision: self.backbone_vision.clone(),
            graph_kind: self.graph_kind.clone(),
            source: self.source.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    source: String,
    framework: String,
    backbone_text: String,
    backbone_vision: String,
    graph_kind: String,
    fold: usize,
    overall: String,
    id: String,
    title: String,
    summary: String,
    body: String,
    support_id: usize,
    support_title: usize,
    support_summary: usize,
    support_body: usize,
}

fn six(v: f64) -> String {
    format!("{v:.6}")
}

fn opt_six(v: Option<f64>) -> String {
    v.map(six).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>, MetricsError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| MetricsError::Number(s.to_owned()))
}

/// Serialize rows in the order given; accuracies at 6 decimals, absent
/// classes as empty fields.
pub fn results_to_csv(rows: &[ResultRow]) -> Result<String, MetricsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let m = &r.metrics;
        w.serialize(CsvRow {
            source: r.source.clone(),
            framework: r.framework.clone(),
            backbone_text: r.backbone_text.clone(),
            backbone_vision: r.backbone_vision.clone(),
            graph_kind: r.graph_kind.clone(),
            fold: r.fold,
            overall: six(m.overall),
            id: opt_six(m.per_class[0]),
            title: opt_six(m.per_class[1]),
            summary: opt_six(m.per_class[2]),
            body: opt_six(m.per_class[3]),
            support_id: m.support[0],
            support_title: m.support[1],
            support_summary: m.support[2],
            support_body: m.support[3],
        })?;
    }
    if rows.is_empty() {
        w.write_record(RESULTS_HEADER)?;
    }
    let bytes = w.into_inner().map_err(|e| MetricsError::Csv(csv::Error::from(e.into_error())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const RESULTS_HEADER: [&str; 15] = [
    "source",
    "framework",
    "backbone_text",
    "backbone_vision",
    "graph_kind",
    "fold",
    "overall",
    "id",
    "title",
    "summary",
    "body",
    "support_id",
    "support_title",
    "support_summary",
    "support_body",
];

pub fn results_from_csv(text: &str) -> Result<Vec<ResultRow>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize::<CsvRow>() {
        let r = rec?;
        let overall = parse_opt(&r.overall)?.ok_or(MetricsError::EmptyInput)?;
        out.push(ResultRow {
            metrics: FoldMetrics {
                overall,
                per_class: [parse_opt(&r.id)?, parse_opt(&r.title)?, parse_opt(&r.summary)?, parse_opt(&r.body)?],
                support: [r.support_id, r.support_title, r.support_summary, r.support_body],
            },
            source: r.source,
            framework: r.framework,
            backbone_text: r.backbone_text,
            backbone_vision: r.backbone_vision,
            graph_kind: r.graph_kind,
            fold: r.fold,
        });
    }
    Ok(out)
}

/// Canonical row order: configuration key, then fold.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.key().cmp(&b.key()).then(a.fold.cmp(&b.fold)));
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub markdown: String,
}

/// Column headers of the accuracy tables, in class-index order.
fn class_headers() -> [&'static str; NUM_CLASSES] {
    Category::CLASSES.map(|c| match c {
        Category::Identifier => "ID",
        Category::Title => "Title",
        Category::Summary => "Summary",
        _ => "Body",
    })
}

fn framework_display(label: &str) -> &str {
    match label {
        "single-text" => "Only-Text",
        "single-vision" => "Only-Vision",
        "concat" => "Concat",
        "dual" => "Dual",
        other => other,
    }
}

fn backbone_display(text: &str, vision: &str) -> String {
    let name = |s: &str| match s {
        "gcn" => "GCN".to_owned(),
        "gat" => "GAT".to_owned(),
        "sage" => "GraphSAGE".to_owned(),
        "tagcn" => "TAGCN".to_owned(),
        other => other.to_owned(),
    };
    let letter = |s: &str| match s {
        "gcn" => "G".to_owned(),
        "gat" => "A".to_owned(),
        "sage" => "S".to_owned(),
        "tagcn" => "T".to_owned(),
        other => other.to_owned(),
    };
    if vision.is_empty() {
        name(text)
    } else {
        format!("{}+{}", letter(text), letter(vision))
    }
}

fn graph_display(label: &str) -> String {
    match label.strip_prefix("k-closest:") {
        Some(k) => format!("k-closest (k={k})"),
        None => match label {
            "complete" => "complete".to_owned(),
            other => other.to_owned(),
        },
    }
}

fn align(table: &[Vec<String>]) -> String {
    let cols = table[0].len();
    let widths: Vec<usize> = (0..cols).map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let line = |r: &[String]| {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(s, &w)| format!("{s:<w$}")).collect();
        format!("| {} |\n", cells.join(" | "))
    };
    let mut out = line(&table[0]);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w.max(3))).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in &table[1..] {
        out.push_str(&line(r));
    }
    out
}

/// Per-configuration mean over sources of per-source fold means.
fn across_sources(per_source: &[&AggregateMetrics]) -> [Option<f64>; NUM_CLASSES + 1] {
    let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let mut out = [None; NUM_CLASSES + 1];
    out[0] = mean(per_source.iter().map(|a| a.overall.mean).collect());
    for c in 0..NUM_CLASSES {
        out[c + 1] = mean(per_source.iter().filter_map(|a| a.per_class[c].map(|s| s.mean)).collect());
    }
    out
}

/// Aggregate fold rows per configuration and render them.
///
/// The Markdown holds two tables: mean accuracy per configuration
/// (averaged over sources), and `mean_{std}` per configuration and source.
/// The CSV carries the per-source aggregates with full precision.
pub fn render_report(rows: &[ResultRow]) -> Result<Report, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyResults);
    }
    let mut groups: BTreeMap<ConfigKey, Vec<FoldMetrics>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.key()).or_default().push(r.metrics.clone());
    }
    let aggregates: BTreeMap<ConfigKey, AggregateMetrics> =
        groups.iter().map(|(k, folds)| Ok((k.clone(), aggregate(folds)?))).collect::<Result<_, MetricsError>>()?;

    let headers = class_headers();
    let mut csv_out = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["source".to_owned(), "framework".into(), "backbone_text".into(), "backbone_vision".into(), "graph_kind".into(), "folds".into()];
    for name in ["overall"].into_iter().chain(["id", "title", "summary", "body"]) {
        head.push(format!("{name}_mean"));
        head.push(format!("{name}_std"));
    }
    csv_out.write_record(&head)?;
    for (k, a) in &aggregates {
        let mut rec = vec![k.source.clone(), k.framework.clone(), k.backbone_text.clone(), k.backbone_vision.clone(), k.graph_kind.clone(), a.overall.n.to_string()];
        for s in std::iter::once(Some(a.overall)).chain(a.per_class) {
            match s {
                Some(s) => {
                    rec.push(six(s.mean));
                    rec.push(six(s.std));
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        csv_out.write_record(&rec)?;
    }
    let csv_bytes = csv_out.into_inner().map_err(|e| MetricsError::Csv(csv::Error::from(e.into_error())))?;

    // table 1: per configuration, averaged over sources
    let mut by_config: BTreeMap<(String, String, String, String), Vec<&AggregateMetrics>> = BTreeMap::new();
    for (k, a) in &aggregates {
        by_config
            .entry((k.framework.clone(), k.backbone_text.clone(), k.backbone_vision.clone(), k.graph_kind.clone()))
            .or_default()
            .push(a);
    }
    let mut t1 = vec![["Model", "Backbone", "Type of graph", "Overall"].iter().map(|s| s.to_string()).chain(headers.iter().map(|s| s.to_string())).collect::<Vec<_>>()];
    for ((fw, bt, bv, g), aggs) in &by_config {
        let vals = across_sources(aggs);
        let mut row = vec![framework_display(fw).to_owned(), backbone_display(bt, bv), graph_display(g)];
        row.extend(vals.iter().map(|v| v.map(format_pct).unwrap_or_else(|| "-".into())));
        t1.push(row);
    }

    // table 2: per configuration and source, mean_{std}
    let mut t2 = vec![["Model", "Backbone", "Type of graph", "Source", "Folds", "Overall"]
        .iter()
        .map(|s| s.to_string())
        .chain(headers.iter().map(|s| s.to_string()))
        .collect::<Vec<_>>()];
    for (k, a) in &aggregates {
        let mut row = vec![
            framework_display(&k.framework).to_owned(),
            backbone_display(&k.backbone_text, &k.backbone_vision),
            graph_display(&k.graph_kind),
            k.source.clone(),
            a.overall.n.to_string(),
            format_mean_std(&a.overall),
        ];
        row.extend(a.per_class.iter().map(|s| s.as_ref().map(format_mean_std).unwrap_or_else(|| "-".into())));
        t2.push(row);
    }

    let mut md = String::from("# Classification accuracy (%)\n\n");
    md.push_str(&align(&t1));
    md.push_str("\nMean over sources of per-source fold means.\n\n## Per source, mean_{std} across folds\n\n");
    md.push_str(&align(&t2));
    md.push_str("\nStandard deviations are population standard deviations (divisor N) over folds. ");
    md.push_str("Classes absent from a fold's test set are excluded from that class's mean.\n");
    Ok(Report { csv: String::from_utf8(csv_bytes).expect("csv output is UTF-8"), markdown: md })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_fold() {
        let m = fold_metrics(&[0, 3, 3, 3], &[0, 0, 3, 3]).unwrap();
        assert_eq!(m.overall, 0.75);
        assert_eq!(m.per_class, [Some(0.5), None, None, Some(1.0)]);
        assert_eq!(m.support, [2, 0, 0, 2]);
    }

    #[test]
    fn perfect_and_single_class() {
        let m = fold_metrics(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap();
        assert!(m.per_class.iter().all(|a| *a == Some(1.0)) && m.overall == 1.0);
        let m = fold_metrics(&[2, 1, 2], &[2, 2, 2]).unwrap();
        assert_eq!(Some(m.overall), m.per_class[2]);
    }

    #[test]
    fn fold_errors() {
        assert!(matches!(fold_metrics(&[], &[]), Err(MetricsError::EmptyInput)));
        assert!(matches!(fold_metrics(&[1], &[1, 2]), Err(MetricsError::LengthMismatch(1, 2))));
        assert!(matches!(fold_metrics(&[4], &[1]), Err(MetricsError::BadLabel(4))));
    }

    fn fold(overall: f64) -> FoldMetrics {
        FoldMetrics { overall, per_class: [Some(overall), None, None, None], support: [1, 0, 0, 0] }
    }

    #[test]
    fn aggregation_examples() {
        let a = aggregate(&[fold(0.9), fold(1.0)]).unwrap();
        assert!((a.overall.mean - 0.95).abs() < 1e-15 && (a.overall.std - 0.05).abs() < 1e-15);
        assert!(a.per_class[1].is_none());
        let a = aggregate(&[fold(0.8), fold(0.8), fold(0.8)]).unwrap();
        assert_eq!(a.overall.std, 0.0);
        let a = aggregate(&[fold(0.7)]).unwrap();
        assert_eq!((a.overall.mean, a.overall.std, a.overall.n), (0.7, 0.0, 1));
        assert!(matches!(aggregate(&[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn absent_classes_reduce_class_fold_count() {
        let mut b = fold(0.5);
        b.per_class = [None, Some(0.5), None, None];
        let a = aggregate(&[fold(1.0), b]).unwrap();
        assert_eq!(a.per_class[0].unwrap().n, 1);
        assert_eq!(a.per_class[1].unwrap().n, 1);
        assert_eq!(a.overall.n, 2);
    }

    #[test]
    fn formatting() {
        assert_eq!(format_pct(0.9748), "97.48");
        assert_eq!(format_pct(0.937), "93.70");
        assert_eq!(format_mean_std(&Stat { mean: 0.9793, std: 0.0203, n: 5 }), "97.93_{2.03}");
    }

    fn row(source: &str, fw: &str, fold_ix: usize, overall: f64) -> ResultRow {
        ResultRow {
            source: source.into(),
            framework: fw.into(),
            backbone_text: "sage".into(),
            backbone_vision: if fw == "dual" { "sage".into() } else { String::new() },
            graph_kind: "k-closest:4".into(),
            fold: fold_ix,
            metrics: FoldMetrics { overall, per_class: [Some(overall), None, Some(1.0), Some(0.5)], support: [3, 0, 1, 2] },
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("A", "dual", 0, 0.123456), row("A", "dual", 1, 1.0 / 3.0)];
        let text = results_to_csv(&rows).unwrap();
        assert!(text.starts_with(&RESULTS_HEADER.join(",")));
        let back = results_from_csv(&text).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!((back[1].metrics.overall - 1.0 / 3.0).abs() < 5e-7);
        assert_eq!(back[1].metrics.per_class[1], None);
    }

    #[test]
    fn empty_results_csv_has_header() {
        let text = results_to_csv(&[]).unwrap();
        assert_eq!(text.trim_end(), RESULTS_HEADER.join(","));
        assert!(results_from_csv(&text).unwrap().is_empty());
    }

    #[test]
    fn report_rows_and_order() {
        let rows: Vec<ResultRow> = (0..5)
            .map(|f| row("A", "single-text", f, 0.8))
            .chain((0..5).map(|f| row("A", "dual", f, if f % 2 == 0 { 0.9 } else { 1.0 })))
            .collect();
        let rep = render_report(&rows).unwrap();
        let dual = rep.markdown.find("| Dual").unwrap();
        let single = rep.markdown.find("| Only-Text").unwrap();
        assert!(dual < single);
        // mean 0.94, std sqrt(0.0024)
        assert!(rep.markdown.contains("94.00_{4.90}"));
        assert!(rep.markdown.contains("population standard deviations"));
        assert_eq!(rep.csv.lines().count(), 3);
        assert!(matches!(render_report(&[]), Err(MetricsError::EmptyResults)));
    }
}
