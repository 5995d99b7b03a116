//! Error tables with observed rates and their CSV layouts.

use std::fmt::Write as _;

/// Observed order between two refinement levels.
pub fn observed_rate(h_coarse: f64, h_fine: f64, e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub h: f64,
    pub dofs: usize,
    /// One entry per error column; `None` when the norm does not apply.
    pub errors: Vec<Option<f64>>,
}

/// How error and rate columns are arranged in the CSV output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvLayout {
    /// `h,dofs,err..,rate..`
    Grouped,
    /// `h,err1,rate1,err2,rate2,..`
    Interleaved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    names: Vec<String>,
    rows: Vec<TableRow>,
}

impl ConvergenceTable {
    /// `names` are the error column suffixes, e.g. `["L2", "H1"]`.
    pub fn new(names: &[&str]) -> Self {
        Self { names: names.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, h: f64, dofs: usize, errors: Vec<Option<f64>>) {
        assert_eq!(errors.len(), self.names.len());
        self.rows.push(TableRow { h, dofs, errors });
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        let c = self.index(name);
        self.rows.iter().map(|r| r.errors[c]).collect()
    }

    fn index(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no error column {name}"))
    }

    /// Rates between consecutive rows (the first is `None`).
    pub fn rates(&self, name: &str) -> Vec<Option<f64>> {
        let c = self.index(name);
        let mut out = vec![None];
        for w in self.rows.windows(2) {
            out.push(match (w[0].errors[c], w[1].errors[c]) {
                (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some(observed_rate(w[0].h, w[1].h, a, b)),
                _ => None,
            });
        }
        out.truncate(self.rows.len());
        out
    }

    /// Rate between the last two rows.
    pub fn final_rate(&self, name: &str) -> Option<f64> {
        self.rates(name).last().copied().flatten()
    }

    pub fn to_csv(&self, layout: CsvLayout) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let rates: Vec<Vec<Option<f64>>> = self.names.iter().map(|n| self.rates(n)).collect();
        let mut out = String::new();
        let mut header = vec!["h".to_string()];
        match layout {
            CsvLayout::Grouped => {
                header.push("dofs".into());
                header.extend(self.names.iter().map(|n| format!("err{n}")));
                header.extend(self.names.iter().map(|n| format!("rate{n}")));
            }
            CsvLayout::Interleaved => {
                for n in &self.names {
                    header.push(format!("err{n}"));
                    header.push(format!("rate{n}"));
                }
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let mut cells = vec![format!("{:.16e}", row.h)];
            match layout {
                CsvLayout::Grouped => {
                    cells.push(row.dofs.to_string());
                    cells.extend(row.errors.iter().map(|&e| fmt(e)));
                    cells.extend(rates.iter().map(|r| fmt(r[i])));
                }
                CsvLayout::Interleaved => {
                    for (e, r) in row.errors.iter().zip(&rates) {
                        cells.push(fmt(*e));
                        cells.push(fmt(r[i]));
                    }
                }
            }
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_of_exact_power_laws() {
        let mut t = ConvergenceTable::new(&["L2", "H1", "H2"]);
        for &h in &[0.5, 0.25, 0.125] {
            t.push(h, 10, vec![Some(h * h * h), Some(h * h), None]);
        }
        let r = t.rates("L2");
        assert!(r[0].is_none() && (r[2].unwrap() - 3.0).abs() < 1e-12);
        assert!((t.final_rate("H1").unwrap() - 2.0).abs() < 1e-12);
        assert!(t.final_rate("H2").is_none());
        let csv = t.to_csv(CsvLayout::Grouped);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "h,dofs,errL2,errH1,errH2,rateL2,rateH1,rateH2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(",,,,"));
        let csv = t.to_csv(CsvLayout::Interleaved);
        assert!(csv.starts_with("h,errL2,rateL2,errH1,rateH1,errH2,rateH2\n"));
        // full precision survives a parse round trip
        let h: f64 = csv.lines().nth(2).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(h, 0.25);
    }
}
