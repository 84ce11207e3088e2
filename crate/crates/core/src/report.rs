//! CSV and Markdown renderings of a result table.

use std::fmt;
use std::str::FromStr;

use crate::bench::{CellResult, ResultTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Csv,
    #[default]
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?} (expected csv or markdown)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "markdown",
        })
    }
}

/// Accuracies are shown with four decimals.
pub fn format_accuracy(a: f64) -> String {
    format!("{a:.4}")
}

fn cell_text(c: &CellResult) -> Option<String> {
    c.avg_accuracy.map(format_accuracy)
}

pub fn render_report(results: &ResultTable, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => render_csv(results),
        ReportFormat::Markdown => render_markdown(results).into_bytes(),
    }
}

fn render_csv(results: &ResultTable) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["table", "column", "classifier", "avg_accuracy", "pooled_accuracy", "result_id", "error"];
    w.write_record(header).expect("writing to memory");
    for t in &results.tables {
        for row in &t.rows {
            for (col, cell) in t.columns.iter().zip(&row.cells) {
                w.write_record([
                    t.id.as_str(),
                    col.as_str(),
                    row.classifier.as_str(),
                    &cell_text(cell).unwrap_or_default(),
                    &cell.pooled_accuracy.map(format_accuracy).unwrap_or_default(),
                    cell.result_id.as_deref().unwrap_or(""),
                    cell.error.as_deref().unwrap_or(""),
                ])
                .expect("writing to memory");
            }
        }
    }
    w.into_inner().expect("flushing to memory")
}

fn escape_md(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn render_markdown(results: &ResultTable) -> String {
    let mut out = String::new();
    for (n, t) in results.tables.iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        out.push_str(&format!("## Table {}: {}\n\n", t.id, escape_md(&t.title)));
        // Column maxima compare the printed values so visible ties all bold.
        let best: Vec<Option<String>> = (0..t.columns.len())
            .map(|c| {
                t.rows
                    .iter()
                    .filter_map(|r| r.cells.get(c).and_then(|x| x.avg_accuracy))
                    .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))))
                    .map(format_accuracy)
            })
            .collect();
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Classifier".to_string()];
        header.extend(t.columns.iter().map(|c| escape_md(c)));
        grid.push(header);
        for row in &t.rows {
            let mut line = vec![escape_md(&row.label)];
            for (c, cell) in row.cells.iter().enumerate() {
                line.push(match cell_text(cell) {
                    Some(v) if best[c].as_deref() == Some(v.as_str()) => format!("**{v}**"),
                    Some(v) => v,
                    None => "n/a".to_string(),
                });
            }
            grid.push(line);
        }
        let widths: Vec<usize> =
            (0..grid[0].len()).map(|c| grid.iter().map(|l| l[c].chars().count()).max().unwrap_or(0).max(3)).collect();
        let fmt_line = |l: &[String]| {
            let cells: Vec<String> = l.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
            format!("| {} |\n", cells.join(" | "))
        };
        out.push_str(&fmt_line(&grid[0]));
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&fmt_line(&rule));
        for l in &grid[1..] {
            out.push_str(&fmt_line(l));
        }
        let failed: Vec<(&str, &str, &str)> = t
            .rows
            .iter()
            .flat_map(|r| {
                t.columns.iter().zip(&r.cells).filter_map(move |(c, x)| x.error.as_deref().map(|e| (r.label.as_str(), c.as_str(), e)))
            })
            .collect();
        if !failed.is_empty() {
            out.push('\n');
            for (row, col, e) in failed {
                out.push_str(&format!("- {} / {}: {}\n", escape_md(row), escape_md(col), escape_md(e)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{RowResult, TableResult};
    use crate::learn::ClassifierKind;

    fn cell(a: Option<f64>) -> CellResult {
        CellResult {
            result_id: a.map(|_| "abc".into()),
            avg_accuracy: a,
            pooled_accuracy: a,
            error: a.is_none().then(|| "boom".into()),
        }
    }

    fn table(col: &[Option<f64>]) -> ResultTable {
        let kinds = ClassifierKind::FAMILIES;
        ResultTable {
            name: "t".into(),
            tables: vec![TableResult {
                id: "T".into(),
                title: "Test".into(),
                columns: vec!["c".into()],
                rows: col
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| RowResult {
                        classifier: kinds[i],
                        label: kinds[i].display_name().into(),
                        cells: vec![cell(a)],
                    })
                    .collect(),
            }],
            results: vec![],
        }
    }

    fn bold_count(md: &str) -> usize {
        md.matches("**").count() / 2
    }

    #[test]
    fn single_cell_is_bold() {
        let md = String::from_utf8(render_report(&table(&[Some(0.5)]), ReportFormat::Markdown)).unwrap();
        assert!(md.contains("**0.5000**"));
        assert_eq!(bold_count(&md), 1);
    }

    #[test]
    fn ties_are_all_bold() {
        let md = String::from_utf8(render_report(&table(&[Some(0.71), Some(0.74), Some(0.74)]), ReportFormat::Markdown)).unwrap();
        assert_eq!(bold_count(&md), 2);
        assert!(!md.contains("**0.7100**"));
    }

    #[test]
    fn ties_compare_printed_values() {
        let md = String::from_utf8(render_report(&table(&[Some(0.740_01), Some(0.740_04)]), ReportFormat::Markdown)).unwrap();
        assert_eq!(bold_count(&md), 2);
    }

    #[test]
    fn failed_cells_are_listed() {
        let md = String::from_utf8(render_report(&table(&[Some(0.3), None]), ReportFormat::Markdown)).unwrap();
        assert!(md.contains("n/a"));
        assert!(md.contains("boom"));
        let csv = String::from_utf8(render_report(&table(&[Some(0.3), None]), ReportFormat::Csv)).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().ends_with("boom"));
    }

    #[test]
    fn rendering_is_stable() {
        let t = table(&[Some(0.1), Some(0.2)]);
        assert_eq!(render_report(&t, ReportFormat::Markdown), render_report(&t, ReportFormat::Markdown));
        assert_eq!(render_report(&t, ReportFormat::Csv), render_report(&t, ReportFormat::Csv));
    }
}
