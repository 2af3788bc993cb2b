//! Accuracy tables: one row per variant combination, one column per
//! confidence threshold.

use std::fmt::Write as _;

use crate::eval::DomainReport;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    /// One domain report per confidence threshold, in column order.
    pub cells: Vec<DomainReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub confidences: Vec<f64>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// ADA of row `label` at column `col`.
    pub fn ada(&self, label: &str, col: usize) -> Option<f64> {
        self.row(label).and_then(|r| r.cells.get(col)).map(|c| c.ada)
    }

    fn header(&self) -> Vec<String> {
        self.confidences.iter().map(|c| format!("{c:.2}")).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant");
        for h in self.header() {
            out.push(',');
            out.push_str(&h);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.label);
            for c in &r.cells {
                let _ = write!(out, ",{:.6}", c.ada);
            }
            out.push('\n');
        }
        out
    }

    /// Long-format per-domain breakdown.
    pub fn domains_csv(&self) -> String {
        let mut out = String::from("variant,confidence,domain,images,mean_accuracy\n");
        for r in &self.rows {
            for (conf, cell) in self.confidences.iter().zip(&r.cells) {
                for (domain, d) in &cell.per_domain {
                    let _ = writeln!(out, "{},{conf:.2},{domain},{},{:.6}", r.label, d.images, d.mean_accuracy);
                }
            }
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = self.header();
        let label_w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("Variant".len());
        let col_w = 8;
        let mut out = String::new();
        let rule = format!("+{}+{}\n", "-".repeat(label_w + 2), format!("{}+", "-".repeat(col_w + 2)).repeat(header.len()));
        out.push_str(&rule);
        let _ = write!(out, "| {:<label_w$} |", "Variant");
        for h in &header {
            let _ = write!(out, " {h:>col_w$} |");
        }
        out.push('\n');
        out.push_str(&rule);
        for r in &self.rows {
            let _ = write!(out, "| {:<label_w$} |", r.label);
            for c in &r.cells {
                let _ = write!(out, " {:>col_w$.4} |", c.ada);
            }
            out.push('\n');
        }
        out.push_str(&rule);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::ada;

    #[test]
    fn csv_layout() {
        let cell = |v: f64| ada(&[("d", vec![v])]).unwrap();
        let report = Report {
            confidences: vec![0.25, 0.3],
            rows: vec![
                ReportRow {
                    label: "Original".into(),
                    cells: vec![cell(0.5), cell(0.25)],
                },
                ReportRow {
                    label: "Original+Inpaint".into(),
                    cells: vec![cell(0.75), cell(1.0)],
                },
            ],
        };
        assert_eq!(
            report.to_csv(),
            "variant,0.25,0.30\nOriginal,0.500000,0.250000\nOriginal+Inpaint,0.750000,1.000000\n"
        );
        assert_eq!(report.ada("Original+Inpaint", 1), Some(1.0));
        assert!(report.domains_csv().contains("Original,0.30,d,1,0.250000"));
        let table = report.to_table();
        assert!(table.contains("| Original+Inpaint |   0.7500 |   1.0000 |"));
    }
}
