//! Whitespace-delimited numeric grids with a `rows cols` header line.
//!
//! A cell is either a number or `-` for an absent entry (an infeasible
//! action in a reward table, for example).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<Option<f64>>,
}

impl Grid {
    pub fn from_rows(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Grid(format!("row {i} has {} cells, expected {cols}", r.len())));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            cells: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if row < self.rows && col < self.cols {
            self.cells[row * self.cols + col]
        } else {
            None
        }
    }

    /// Row as numbers; errors if any cell is absent.
    pub fn dense_row(&self, row: usize) -> Result<Vec<f64>> {
        (0..self.cols)
            .map(|c| {
                self.get(row, c)
                    .ok_or_else(|| Error::Grid(format!("missing cell ({row}, {c})")))
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Grid("empty input".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Grid(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Grid(format!("header must be `rows cols`, got {header:?}")));
        };
        let mut cells = Vec::with_capacity(rows * cols);
        let mut seen_rows = 0;
        for (i, line) in lines.enumerate() {
            let before = cells.len();
            for token in line.split_whitespace() {
                cells.push(match token {
                    "-" => None,
                    t => Some(
                        t.parse::<f64>()
                            .map_err(|_| Error::Grid(format!("row {i}: cannot parse {t:?}")))?,
                    ),
                });
            }
            if cells.len() - before != cols {
                return Err(Error::Grid(format!(
                    "row {i} has {} cells, expected {cols}",
                    cells.len() - before
                )));
            }
            seen_rows += 1;
        }
        if seen_rows != rows {
            return Err(Error::Grid(format!("expected {rows} rows, found {seen_rows}")));
        }
        Ok(Self { rows, cols, cells })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    f.write_str(" ")?;
                }
                match self.cells[r * self.cols + c] {
                    Some(v) => write!(f, "{v}")?,
                    None => f.write_str("-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
