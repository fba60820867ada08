//! Minimal CSV tables. Reals are written with 17 significant digits so every
//! `f64` round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use steinmp_core::hmc::SampleBank;
use steinmp_core::metrics::DiagnosticsRecord;
use steinmp_core::Matrix;
use thiserror::Error;

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(i64::from(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Real(v) => out.push_str(&real(*v)),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, self.render())
    }
}

pub fn diagnostics_table(records: &[DiagnosticsRecord]) -> Table {
    let mut t = Table::new(DiagnosticsRecord::CSV_HEADER.split(','));
    for r in records {
        t.push(vec![
            r.iteration.into(),
            r.pamrf_inf.into(),
            r.pamrf_2.into(),
            r.paksg_inf.into(),
            r.paksg_2.into(),
            r.marginal_mean_avg.into(),
            r.marginal_var_avg.into(),
            r.max_abs_move.into(),
        ]);
    }
    t
}

/// One row per particle (or sample), columns `x0 … x{D−1}`.
pub fn matrix_table(m: &Matrix) -> Table {
    let mut t = Table::new((0..m.cols()).map(|d| format!("x{d}")));
    for row in m.iter_rows() {
        t.push(row.iter().map(|&v| Cell::Real(v)).collect());
    }
    t
}

pub fn sample_bank_table(bank: &SampleBank) -> Table {
    matrix_table(&bank.samples)
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no data rows")]
    Empty,
}

/// Reads a numeric CSV written by [`matrix_table`] (header line skipped).
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix, ReadError> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn parse_matrix(text: &str) -> Result<Matrix, ReadError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(ReadError::Empty)?;
    let cols = header.split(',').count();
    let mut data = Vec::new();
    let mut rows = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(ReadError::Parse {
                line: line_no,
                message: format!("expected {cols} fields, found {}", fields.len()),
            });
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| ReadError::Parse {
                line: line_no,
                message: format!("not a number: {f:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(ReadError::Empty);
    }
    Ok(Matrix::from_vec(rows, cols, data).expect("shape checked"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 1.0 - f64::EPSILON] {
            let s = real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(real(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn matrix_round_trip() {
        let m = Matrix::from_fn(3, 2, |i, j| (i as f64 + 1.0) / (j as f64 + 7.0));
        let text = matrix_table(&m).render();
        assert!(text.starts_with("x0,x1\n"));
        assert_eq!(parse_matrix(&text).unwrap(), m);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_matrix(""), Err(ReadError::Empty)));
        assert!(matches!(parse_matrix("x0\n"), Err(ReadError::Empty)));
        assert!(matches!(parse_matrix("x0,x1\n1,2\n3\n"), Err(ReadError::Parse { line: 3, .. })));
        assert!(matches!(parse_matrix("x0\nabc\n"), Err(ReadError::Parse { line: 2, .. })));
    }

    #[test]
    fn mixed_cells() {
        let mut t = Table::new(["name", "n", "v", "ok"]);
        t.push(vec!["svgd".into(), 3usize.into(), 0.5.into(), true.into()]);
        assert_eq!(t.render(), "name,n,v,ok\nsvgd,3,5.0000000000000000e-1,1\n");
    }
}
